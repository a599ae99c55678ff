//! Least-squares objectives for the transformed model and factor extraction.
//!
//! For a candidate coefficient vector, the composite residual collects what
//! the factor term and the noise must explain. Minimising the full
//! least-squares criterion over all rank-`R` factor structures leaves the
//! profile objective: the sum of the `T - R` smallest eigenvalues of the
//! residual Gram matrix, scaled by `1/(nT)` with the *original*
//! cross-section size `n`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numeric::{frob_sq, sym_eig_desc, sym_eigenvalues_desc, Scalar};
use crate::panel::{Coefs, FactorStructure};
use crate::transform::TransformedPanel;

/// The matrix `Ytil * S(alpha) - sum_k beta_k * Xtil_k`, shape `m x T`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeResidual<S: Scalar> {
    /// Residual matrix before removing the factor term.
    pub mat: DMatrix<S>,
}

/// Composite residual of the transformed model at `theta`.
///
/// `Ytil * S(alpha)` is computed through the shift structure directly:
/// column `t` of the product is `ytil_t - alpha * ytil_{t-1}`.
pub fn composite_residual<S: Scalar>(
    tp: &TransformedPanel<S>,
    theta: &Coefs<S>,
) -> Result<CompositeResidual<S>> {
    if theta.beta.len() != tp.k() {
        return Err(Error::Dimension(format!(
            "{} slope coefficients for {} covariates",
            theta.beta.len(),
            tp.k()
        )));
    }
    let mut mat = tp.y().clone();
    let t = tp.t();
    // Right-multiplying by S(alpha) subtracts alpha times the previous
    // column; walk right-to-left so earlier columns stay untouched.
    for col in (1..t).rev() {
        let prev = tp.y().column(col - 1) * theta.alpha;
        let mut target = mat.column_mut(col);
        target -= &prev;
    }
    for (k, xk) in tp.x().iter().enumerate() {
        mat -= xk * theta.beta[k];
    }
    Ok(CompositeResidual { mat })
}

/// Profile (concentrated) objective: `1/(nT)` times the sum of the `T - R`
/// smallest eigenvalues of the residual Gram matrix.
pub fn profile_objective<S: Scalar>(
    tp: &TransformedPanel<S>,
    theta: &Coefs<S>,
    r: usize,
) -> Result<S> {
    let residual = composite_residual(tp, theta)?;
    profile_value(&residual.mat, r, tp.n(), tp.t())
}

/// Eigenvalue-sum criterion for an already-formed residual matrix.
///
/// Shared with the Balestra-Nerlove system, whose residual is affine in the
/// coefficients.
pub(crate) fn profile_value<S: Scalar>(
    residual: &DMatrix<S>,
    r: usize,
    n: usize,
    t: usize,
) -> Result<S> {
    if r > t {
        return Err(Error::InvalidParameter(format!("factor count {r} exceeds T = {t}")));
    }
    if r == t {
        return Ok(S::zero());
    }
    let gram = residual.transpose() * residual;
    let eigs = sym_eigenvalues_desc(&gram);
    let mut sum = S::zero();
    for i in r..t {
        sum += eigs[i];
    }
    let scale = S::from_usize(n * t).unwrap();
    Ok((sum / scale).max(S::zero()))
}

/// Full least-squares objective at an explicit factor structure:
/// `1/(nT) * || residual - loadings * factors^T ||_F^2`.
pub fn full_objective<S: Scalar>(
    tp: &TransformedPanel<S>,
    theta: &Coefs<S>,
    fs: &FactorStructure<S>,
) -> Result<S> {
    let residual = composite_residual(tp, theta)?;
    if fs.factors.nrows() != tp.t() || fs.loadings.nrows() != tp.m() {
        return Err(Error::Dimension(format!(
            "factor structure is {}x{} / {}x{}, panel needs T = {} and m = {}",
            fs.factors.nrows(),
            fs.factors.ncols(),
            fs.loadings.nrows(),
            fs.loadings.ncols(),
            tp.t(),
            tp.m()
        )));
    }
    let diff = &residual.mat - fs.common_component();
    let scale = S::from_usize(tp.n() * tp.t()).unwrap();
    Ok(frob_sq(&diff) / scale)
}

/// Minimising factor structure at `theta` with `R` factors.
///
/// The factors are the `R` leading eigenvectors of the `T x T` residual Gram
/// matrix (unit-norm columns; the factor/loading split is only identified up
/// to rotation and scale, so the product is what matters), and the loadings
/// are the residual projected onto them. A repeated eigenvalue at the
/// retained/discarded boundary leaves the rotation non-unique and sets
/// [`FactorStructure::rotation_ambiguous`].
pub fn extract_factors<S: Scalar>(
    tp: &TransformedPanel<S>,
    theta: &Coefs<S>,
    r: usize,
) -> Result<FactorStructure<S>> {
    let residual = composite_residual(tp, theta)?;
    extract_from_residual(&residual.mat, r)
}

/// Factor extraction from an arbitrary residual matrix (`m x T`).
pub(crate) fn extract_from_residual<S: Scalar>(
    residual: &DMatrix<S>,
    r: usize,
) -> Result<FactorStructure<S>> {
    let t = residual.ncols();
    let m = residual.nrows();
    if r > t {
        return Err(Error::InvalidParameter(format!("factor count {r} exceeds T = {t}")));
    }
    if r == 0 {
        return Ok(FactorStructure::empty(t, m));
    }
    let gram = residual.transpose() * residual;
    let (eigvals, eigvecs) = sym_eig_desc(&gram);
    let factors = eigvecs.columns(0, r).clone_owned();
    // Eigenvectors are orthonormal, so the least-squares loadings reduce to
    // the projection of the residual onto the factor columns.
    let loadings = residual * &factors;
    let mut fs = FactorStructure::new(factors, loadings)?;
    if r < t {
        let scale = eigvals[0].max(S::of(1e-300));
        if (eigvals[r - 1] - eigvals[r]) <= S::of(1e-9) * scale {
            fs.rotation_ambiguous = true;
        }
    }
    Ok(fs)
}
