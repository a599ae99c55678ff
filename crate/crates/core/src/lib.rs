//! Estimation of linear dynamic panel data models with interactive fixed
//! effects when the time dimension is short.
//!
//! The centrepiece is the QPC estimator: the model is projected onto the
//! column space of its exogenous covariates through an orthonormal basis,
//! which shrinks the factor term to a dimension that does not grow with the
//! cross-section, and the principal-components least-squares estimator is
//! then applied to the transformed system. The crate also ships the
//! Balestra-Nerlove variant, pooled least squares and the classic PC
//! estimator as comparators, asymptotic covariance and bias formula
//! evaluators, an eigenvalue-ratio test for the number of factors, and a
//! simulation module generating panels with a known factor structure.
//!
//! All numerics are generic over the scalar type via [`Scalar`]; `f64`
//! aliases for the main types are exported at the crate root.

pub mod baselines;
pub mod error;
pub mod estimator;
pub mod factor_count;
pub mod inference;
pub mod numeric;
pub mod objective;
pub mod optim;
pub mod panel;
pub mod simulate;
pub mod transform;

pub use error::{Error, Result};
pub use numeric::Scalar;

pub use baselines::{estimate_ls, estimate_pc};
pub use estimator::{estimate_bn, estimate_qpc, EstimateOptions, EstimateResult};
pub use factor_count::{eigenvalue_ratio, EigRReport};
pub use inference::{
    bias_psi, build_instruments, confidence_intervals, estimate_sigmas, fixed_t_covariance,
    hessian_d, nickell_bias, omega, variance_terms, Instruments, NoiseCovariance,
};
pub use objective::{composite_residual, extract_factors, full_objective, profile_objective};
pub use panel::{lag_response, projectors, shift_matrix, Coefs, FactorStructure, PanelData};
pub use simulate::{generate, DgpConfig, SimTruth};
pub use transform::{
    build_basis, detect_low_rank, transform_panel, BasisMethod, LowRankSpec, TransformBasis,
    TransformedPanel,
};

/// `f64` panel data.
pub type PanelDataF64 = panel::PanelData<f64>;
/// `f64` coefficient vector.
pub type CoefsF64 = panel::Coefs<f64>;
/// `f64` factor structure.
pub type FactorStructureF64 = panel::FactorStructure<f64>;
/// `f64` transformation basis.
pub type TransformBasisF64 = transform::TransformBasis<f64>;
/// `f64` transformed panel.
pub type TransformedPanelF64 = transform::TransformedPanel<f64>;
/// `f64` estimation options.
pub type EstimateOptionsF64 = estimator::EstimateOptions<f64>;
/// `f64` estimation result.
pub type EstimateResultF64 = estimator::EstimateResult<f64>;
/// `f64` simulation configuration.
pub type DgpConfigF64 = simulate::DgpConfig<f64>;
