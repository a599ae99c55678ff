//! Eigenvalue-ratio selection of the number of factors at fixed `T`.
//!
//! The residual Gram matrix of the transformed model is shifted by `I_T / n`
//! before taking ratios of consecutive eigenvalues; covariate projection can
//! push trailing eigenvalues to exactly zero, and the shift keeps every
//! ratio well defined without affecting which index dominates.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::numeric::{sym_eigenvalues_desc, Scalar};
use crate::objective::composite_residual;
use crate::panel::Coefs;
use crate::transform::TransformedPanel;

/// Output of the eigenvalue-ratio test.
#[derive(Debug, Clone, PartialEq)]
pub struct EigRReport<S: Scalar> {
    /// Shifted eigenvalues `mu*_1 >= ... >= mu*_T`, all strictly positive.
    pub shifted_eigenvalues: DVector<S>,
    /// Consecutive ratios `mu*_r / mu*_{r+1}` for `r = 1..T-1`.
    pub ratios: DVector<S>,
    /// Selected factor count: the 1-based index maximising the ratio, ties
    /// broken towards fewer factors.
    pub selected: usize,
    /// Set when every ratio is (numerically) one, in which case `selected`
    /// defaults to 1 and carries no information.
    pub degenerate: bool,
}

/// Run the eigenvalue-ratio test on the composite residual at `theta_hat`.
///
/// The estimate should come from a run with the factor count overestimated,
/// so the residual still contains the full factor structure.
pub fn eigenvalue_ratio<S: Scalar>(
    tp: &TransformedPanel<S>,
    theta_hat: &Coefs<S>,
) -> Result<EigRReport<S>> {
    let t = tp.t();
    if t < 2 {
        return Err(Error::Dimension("the ratio test needs at least two periods".into()));
    }
    let residual = composite_residual(tp, theta_hat)?;
    let nt = S::from_usize(tp.n() * t).unwrap();
    let shift = S::one() / S::from_usize(tp.n()).unwrap();
    let gram = residual.mat.transpose() * &residual.mat / nt;
    let mut shifted = sym_eigenvalues_desc(&gram);
    for v in shifted.iter_mut() {
        *v += shift;
    }

    let mut ratios = DVector::zeros(t - 1);
    for r in 0..t - 1 {
        ratios[r] = shifted[r] / shifted[r + 1];
    }
    let mut selected = 1;
    let mut best = ratios[0];
    for r in 1..t - 1 {
        if ratios[r] > best {
            best = ratios[r];
            selected = r + 1;
        }
    }
    let spread = ratios.iter().fold(S::zero(), |acc, v| {
        let d = crate::numeric::abs(*v - ratios[0]);
        if d > acc {
            d
        } else {
            acc
        }
    });
    let degenerate = spread <= S::of(1e-12);
    if degenerate {
        selected = 1;
    }
    Ok(EigRReport { shifted_eigenvalues: shifted, ratios, selected, degenerate })
}
