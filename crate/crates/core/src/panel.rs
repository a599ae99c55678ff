//! Raw panel data types and the small structured matrices the rest of the
//! crate is built from.
//!
//! The panel holds an `n x T` outcome matrix, `K` covariate matrices of the
//! same shape and, optionally, a vector of period-0 outcomes. The dynamic
//! structure of the model is encoded by the shift matrix `S(alpha)` and its
//! companion `G(alpha)`, the response of the outcome path to a lagged shock.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numeric::{abs, orth_projector, Scalar};

/// Balanced panel: outcomes, covariates and an optional initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData<S: Scalar> {
    y: DMatrix<S>,
    x: Vec<DMatrix<S>>,
    y0: Option<DVector<S>>,
}

impl<S: Scalar> PanelData<S> {
    /// Build a panel, validating shapes and finiteness.
    ///
    /// Requirements: at least one covariate, `T >= 2`, all matrices `n x T`,
    /// `n >= T * K` so that the covariate column space has room to be of
    /// full column rank, and every entry finite.
    pub fn new(y: DMatrix<S>, x: Vec<DMatrix<S>>, y0: Option<DVector<S>>) -> Result<Self> {
        let (n, t) = (y.nrows(), y.ncols());
        if x.is_empty() {
            return Err(Error::Dimension("at least one covariate is required".into()));
        }
        if t < 2 {
            return Err(Error::Dimension(format!("T = {t}, need T >= 2")));
        }
        for (k, xk) in x.iter().enumerate() {
            if xk.nrows() != n || xk.ncols() != t {
                return Err(Error::Dimension(format!(
                    "covariate {} is {}x{}, expected {}x{}",
                    k + 1,
                    xk.nrows(),
                    xk.ncols(),
                    n,
                    t
                )));
            }
        }
        let k = x.len();
        if n < t * k {
            return Err(Error::Dimension(format!(
                "n = {n} < T*K = {}; the cross-section must be at least as large as the stacked covariate dimension",
                t * k
            )));
        }
        if let Some(v) = &y0 {
            if v.len() != n {
                return Err(Error::Dimension(format!(
                    "initial outcome vector has length {}, expected {n}",
                    v.len()
                )));
            }
            if v.iter().any(|e| !e.is_finite()) {
                return Err(Error::NonFinite("initial outcomes"));
            }
        }
        if y.iter().any(|e| !e.is_finite()) {
            return Err(Error::NonFinite("outcomes"));
        }
        if x.iter().any(|xk| xk.iter().any(|e| !e.is_finite())) {
            return Err(Error::NonFinite("covariates"));
        }
        Ok(Self { y, x, y0 })
    }

    /// Cross-section size.
    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    /// Number of time periods.
    pub fn t(&self) -> usize {
        self.y.ncols()
    }

    /// Number of covariates.
    pub fn k(&self) -> usize {
        self.x.len()
    }

    /// Outcome matrix.
    pub fn y(&self) -> &DMatrix<S> {
        &self.y
    }

    /// Covariate matrices, in order.
    pub fn x(&self) -> &[DMatrix<S>] {
        &self.x
    }

    /// Optional period-0 outcomes.
    pub fn y0(&self) -> Option<&DVector<S>> {
        self.y0.as_ref()
    }
}

/// Model coefficients: the autoregressive parameter and the slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefs<S: Scalar> {
    /// Autoregressive coefficient, `|alpha| < 1`.
    pub alpha: S,
    /// Slope coefficients, one per covariate.
    pub beta: DVector<S>,
}

impl<S: Scalar> Coefs<S> {
    /// Build a coefficient vector, checking stationarity and finiteness.
    pub fn new(alpha: S, beta: DVector<S>) -> Result<Self> {
        if !alpha.is_finite() || abs(alpha) >= S::one() {
            return Err(Error::InvalidParameter(format!(
                "autoregressive coefficient must be finite with |alpha| < 1, got {}",
                alpha.to_f64_lossy()
            )));
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("slope coefficients"));
        }
        Ok(Self { alpha, beta })
    }

    /// Number of coefficients, `K + 1`.
    pub fn len(&self) -> usize {
        self.beta.len() + 1
    }

    /// True when there are no slope coefficients.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flatten to `(alpha, beta_1, ..., beta_K)`.
    pub fn to_vector(&self) -> DVector<S> {
        let mut v = DVector::zeros(self.len());
        v[0] = self.alpha;
        for i in 0..self.beta.len() {
            v[i + 1] = self.beta[i];
        }
        v
    }

    /// Inverse of [`Coefs::to_vector`]. Does not re-validate bounds, as the
    /// optimiser keeps iterates inside the parameter box.
    pub(crate) fn from_vector(v: &DVector<S>) -> Self {
        Self { alpha: v[0], beta: v.rows(1, v.len() - 1).clone_owned() }
    }
}

/// A factor structure: time factors, loadings in the transformed space and
/// the factor count used to produce them.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorStructure<S: Scalar> {
    /// `T x R` factor matrix, rows indexed by period.
    pub factors: DMatrix<S>,
    /// `m x R` loading matrix in the transformed space.
    pub loadings: DMatrix<S>,
    /// Set when the factor extraction hit a (near) repeated eigenvalue at the
    /// retained/discarded boundary, so the rotation is not unique.
    pub rotation_ambiguous: bool,
}

impl<S: Scalar> FactorStructure<S> {
    /// Build a factor structure, checking that factor and loading column
    /// counts agree and that `R <= T`.
    pub fn new(factors: DMatrix<S>, loadings: DMatrix<S>) -> Result<Self> {
        if factors.ncols() != loadings.ncols() {
            return Err(Error::Dimension(format!(
                "factors have {} columns, loadings have {}",
                factors.ncols(),
                loadings.ncols()
            )));
        }
        if factors.ncols() > factors.nrows() {
            return Err(Error::Dimension(format!(
                "factor count {} exceeds the number of periods {}",
                factors.ncols(),
                factors.nrows()
            )));
        }
        Ok(Self { factors, loadings, rotation_ambiguous: false })
    }

    /// Empty structure with zero factors.
    pub fn empty(t: usize, m: usize) -> Self {
        Self {
            factors: DMatrix::zeros(t, 0),
            loadings: DMatrix::zeros(m, 0),
            rotation_ambiguous: false,
        }
    }

    /// Number of factors.
    pub fn rank(&self) -> usize {
        self.factors.ncols()
    }

    /// The common component `loadings * factors^T`.
    pub fn common_component(&self) -> DMatrix<S> {
        &self.loadings * self.factors.transpose()
    }
}

/// The `T x T` shift matrix `S(alpha) = I - alpha W`, where `W` has ones on
/// the first superdiagonal and zeros elsewhere. Unit triangular, hence
/// invertible for every `alpha`.
pub fn shift_matrix<S: Scalar>(alpha: S, t: usize) -> Result<DMatrix<S>> {
    if t == 0 {
        return Err(Error::Dimension("shift matrix needs T >= 1".into()));
    }
    let mut m = DMatrix::identity(t, t);
    for i in 0..t.saturating_sub(1) {
        m[(i, i + 1)] = -alpha;
    }
    Ok(m)
}

/// The lag-response matrix `G(alpha) = S(alpha)^{-1} W`.
///
/// `W` is nilpotent, so the inverse truncates to a finite geometric series
/// and `G` has the closed form `G[t, t+j] = alpha^(j-1)` for `j >= 1`,
/// strictly upper triangular. Computed directly from the closed form rather
/// than by a linear solve.
pub fn lag_response<S: Scalar>(alpha: S, t: usize) -> Result<DMatrix<S>> {
    if t == 0 {
        return Err(Error::Dimension("lag-response matrix needs T >= 1".into()));
    }
    let mut g = DMatrix::zeros(t, t);
    for row in 0..t {
        let mut power = S::one();
        for col in row + 1..t {
            g[(row, col)] = power;
            power *= alpha;
        }
    }
    Ok(g)
}

/// Orthogonal projector onto the column space of `a` and its complement:
/// `P = A (A^T A)^+ A^T`, `M = I - P`, with the Moore-Penrose pseudoinverse
/// realised through an SVD rank cut. Rank-deficient and zero inputs are
/// fine; a zero matrix maps to `(0, I)`.
pub fn projectors<S: Scalar>(a: &DMatrix<S>) -> (DMatrix<S>, DMatrix<S>) {
    let p = orth_projector(a);
    let m = DMatrix::identity(p.nrows(), p.ncols()) - &p;
    (p, m)
}
