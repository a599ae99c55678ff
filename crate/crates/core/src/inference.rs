//! Instrument construction, asymptotic covariance formulas, bias and
//! variance formula evaluators, and confidence intervals.
//!
//! The sandwich covariance for fixed-`T` inference is `D^{-1} Omega D^{-1}`:
//! `D` is the curvature of the profile objective expressed through the
//! instruments projected orthogonal to the factor structure, and `Omega`
//! weighs the same projections by the noise covariances. The remaining
//! evaluators transcribe the higher-order bias and variance terms that
//! appear when both panel dimensions grow; they need oracle covariances and
//! are used for validation rather than default reporting.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numeric::{abs, frob_sq, psd_sqrt, sym_eig_desc, vec_mat, Scalar};
use crate::panel::{lag_response, projectors, Coefs, FactorStructure};
use crate::transform::TransformedPanel;

/// The `K + 1` instrument matrices of the transformed system.
///
/// The first instrument, `sum_k beta_k Xtil_k G(alpha)`, is what the reduced
/// form makes of the lagged outcome; the remaining ones are the transformed
/// covariates themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct Instruments<S: Scalar> {
    /// Instrument matrices, each `m x T`.
    pub z: Vec<DMatrix<S>>,
}

impl<S: Scalar> Instruments<S> {
    /// Stack the vectorised instruments into an `(mT) x (K+1)` matrix whose
    /// column `kappa` is `vec(Z_kappa)` (column-major).
    pub fn stacked(&self) -> DMatrix<S> {
        let rows = self.z[0].nrows() * self.z[0].ncols();
        let mut out = DMatrix::zeros(rows, self.z.len());
        for (c, zk) in self.z.iter().enumerate() {
            out.set_column(c, &vec_mat(zk));
        }
        out
    }

    /// Number of instruments (`K + 1`).
    pub fn len(&self) -> usize {
        self.z.len()
    }

    /// Always false; there is at least the lag instrument.
    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

/// Where a covariance pair came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceSource {
    /// True covariances supplied by a simulation oracle.
    Oracle,
    /// Kronecker-structured plug-in from the fitted residual.
    PluginKronecker,
    /// Scalar-variance plug-in from the fitted residual.
    PluginHomoskedastic,
}

/// Untransformed cross-section pieces needed by the higher-moment
/// evaluators (the fourth-moment and skewness terms live in the original
/// `n`-dimensional space).
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection<S: Scalar> {
    /// Cross-section covariance `Sigma_n`, `n x n`.
    pub sigma_n: DMatrix<S>,
    /// The orthonormal basis used to transform the model, `n x m`.
    pub basis_q: DMatrix<S>,
}

/// Noise covariances of the transformed model.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCovariance<S: Scalar> {
    /// Time covariance `Sigma_T`, `T x T`.
    pub sigma_t: DMatrix<S>,
    /// Transformed cross-section covariance `Q' Sigma_n Q`, `m x m`.
    pub sigma_n_tilde: DMatrix<S>,
    /// Provenance tag.
    pub source: CovarianceSource,
    /// Full cross-section pieces, present in oracle mode.
    pub cross_section: Option<CrossSection<S>>,
}

impl<S: Scalar> NoiseCovariance<S> {
    /// Validate symmetry (1e-10) and positive semi-definiteness (eigenvalues
    /// above `-1e-10`) of both covariance blocks.
    pub fn check(&self) -> Result<()> {
        for (name, mat) in [("time covariance", &self.sigma_t), ("cross-section covariance", &self.sigma_n_tilde)]
        {
            let asym = (mat - mat.transpose()).abs().max();
            if asym > S::of(1e-10) {
                return Err(Error::InvalidParameter(format!("{name} is not symmetric")));
            }
            let eigs = crate::numeric::sym_eigenvalues_desc(mat);
            if eigs[eigs.len() - 1] < S::of(-1e-10) {
                return Err(Error::InvalidParameter(format!("{name} has a negative eigenvalue")));
            }
        }
        Ok(())
    }
}

/// Build the instrument set at `theta`.
pub fn build_instruments<S: Scalar>(
    tp: &TransformedPanel<S>,
    theta: &Coefs<S>,
) -> Result<Instruments<S>> {
    if theta.beta.len() != tp.k() {
        return Err(Error::Dimension(format!(
            "{} slope coefficients for {} covariates",
            theta.beta.len(),
            tp.k()
        )));
    }
    let g = lag_response(theta.alpha, tp.t())?;
    let mut combo = DMatrix::zeros(tp.m(), tp.t());
    for (k, xk) in tp.x().iter().enumerate() {
        combo += xk * theta.beta[k];
    }
    let mut z = Vec::with_capacity(tp.k() + 1);
    z.push(combo * g);
    for xk in tp.x() {
        z.push(xk.clone());
    }
    Ok(Instruments { z })
}

fn factor_projectors<S: Scalar>(fs: &FactorStructure<S>) -> (DMatrix<S>, DMatrix<S>) {
    let (_, m_f) = projectors(&fs.factors);
    let (_, m_l) = projectors(&fs.loadings);
    (m_f, m_l)
}

/// Curvature matrix `D` with entries
/// `tr(Z_k M_F Z_k'^T M_Lambda) / (nT)`. Symmetric positive semi-definite.
pub fn hessian_d<S: Scalar>(
    ins: &Instruments<S>,
    fs: &FactorStructure<S>,
    n: usize,
    t: usize,
) -> DMatrix<S> {
    let (m_f, m_l) = factor_projectors(fs);
    let p = ins.len();
    let scale = S::from_usize(n * t).unwrap();
    // Cache the doubly projected instruments.
    let projected: Vec<DMatrix<S>> = ins.z.iter().map(|z| &m_l * z * &m_f).collect();
    let mut d = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let mut acc = S::zero();
            for (a, b) in projected[i].iter().zip(projected[j].iter()) {
                acc += *a * *b;
            }
            let v = acc / scale;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// Noise-weighted counterpart of [`hessian_d`]:
/// `Omega = Z' (M_F x M_L) (Sigma_T x Sigma_n~) (M_F x M_L) Z / (nT)`,
/// evaluated entry-wise through traces rather than explicit Kronecker
/// products.
pub fn omega<S: Scalar>(
    ins: &Instruments<S>,
    fs: &FactorStructure<S>,
    sig: &NoiseCovariance<S>,
    n: usize,
    t: usize,
) -> DMatrix<S> {
    let (m_f, m_l) = factor_projectors(fs);
    let p = ins.len();
    let scale = S::from_usize(n * t).unwrap();
    let projected: Vec<DMatrix<S>> = ins.z.iter().map(|z| &m_l * z * &m_f).collect();
    // tr(A_i' Sigma_n~ A_j Sigma_T) with A = M_L Z M_F.
    let weighted: Vec<DMatrix<S>> =
        projected.iter().map(|a| &sig.sigma_n_tilde * a * &sig.sigma_t).collect();
    let mut om = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let mut acc = S::zero();
            for (a, b) in projected[i].iter().zip(weighted[j].iter()) {
                acc += *a * *b;
            }
            let v = acc / scale;
            om[(i, j)] = v;
            om[(j, i)] = v;
        }
    }
    om
}

/// Invert the symmetric matrix `d`, guarding against rank deficiency.
fn invert_spd<S: Scalar>(d: &DMatrix<S>) -> Result<DMatrix<S>> {
    let (vals, vecs) = sym_eig_desc(d);
    let p = d.nrows();
    let max = vals[0];
    let min = vals[p - 1];
    if min <= S::zero() || max / min > S::of(1e12) {
        return Err(Error::Singular(
            "curvature matrix is singular or ill-conditioned; the instruments carry \
             too little variation once the factor structure is projected out"
                .into(),
        ));
    }
    let mut inv = DMatrix::zeros(p, p);
    for r in 0..p {
        let col = vecs.column(r);
        inv += col * col.transpose() / vals[r];
    }
    Ok(inv)
}

/// Fixed-`T` sandwich covariance `D^{-1} Omega D^{-1}` of
/// `sqrt(nT) (theta_hat - theta0)`. Per-coefficient standard errors are
/// `sqrt(diag / (nT))`.
pub fn fixed_t_covariance<S: Scalar>(d: &DMatrix<S>, om: &DMatrix<S>) -> Result<DMatrix<S>> {
    let inv = invert_spd(d)?;
    Ok(&inv * om * &inv)
}

/// Standard errors from an asymptotic covariance of `sqrt(nT)(theta - theta0)`.
pub fn standard_errors<S: Scalar>(cov: &DMatrix<S>, n: usize, t: usize) -> DVector<S> {
    let scale = S::from_usize(n * t).unwrap();
    DVector::from_fn(cov.nrows(), |i, _| (cov[(i, i)] / scale).max(S::zero()).sqrt())
}

/// Estimate the covariance pair from a fitted residual (`m x T`).
///
/// Homoskedastic mode puts the residual variance on the time block
/// (`Sigma_T = sigma2 I_T`, `Sigma_n~ = I_m`), with a degrees-of-freedom
/// correction counting the `K + 1` coefficients and the `R (T + m)`
/// factor-structure parameters. Kronecker mode uses the two residual Gram
/// matrices, jointly scaled so `tr(Sigma_T) = T` and
/// `tr(Sigma_T) tr(Sigma_n~) = ||residual||_F^2` hold exactly.
pub fn estimate_sigmas<S: Scalar>(
    residual: &DMatrix<S>,
    mode: CovarianceSource,
    coef_count: usize,
    factor_count: usize,
) -> Result<NoiseCovariance<S>> {
    let m = residual.nrows();
    let t = residual.ncols();
    let total = frob_sq(residual);
    if total <= S::zero() {
        return Err(Error::DegenerateVariance);
    }
    match mode {
        CovarianceSource::Oracle => Err(Error::InvalidParameter(
            "oracle covariances cannot be estimated from a residual".into(),
        )),
        CovarianceSource::PluginHomoskedastic => {
            let df = coef_count + factor_count * (t + m);
            let cells = t * m;
            let denom = if cells > df { cells - df } else { cells };
            let sigma2 = total / S::from_usize(denom).unwrap();
            Ok(NoiseCovariance {
                sigma_t: DMatrix::identity(t, t) * sigma2,
                sigma_n_tilde: DMatrix::identity(m, m),
                source: mode,
                cross_section: None,
            })
        }
        CovarianceSource::PluginKronecker => {
            let sigma_t = residual.transpose() * residual * (S::from_usize(t).unwrap() / total);
            let sigma_n_tilde = residual * residual.transpose() / S::from_usize(t).unwrap();
            Ok(NoiseCovariance { sigma_t, sigma_n_tilde, source: mode, cross_section: None })
        }
    }
}

/// The four first-order bias vectors. Outside the first (autoregressive)
/// slot, only the cross-dependence terms are non-zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasTerms<S: Scalar> {
    /// Serial-dependence bias through the lag interaction.
    pub psi0: DVector<S>,
    /// Factor-projected lag bias (the generalised within-estimator bias).
    pub psi1: DVector<S>,
    /// Cross-sectional dependence bias.
    pub psi2: DVector<S>,
    /// Serial dependence bias.
    pub psi3: DVector<S>,
}

impl<S: Scalar> BiasTerms<S> {
    /// Sum of the four components.
    pub fn total(&self) -> DVector<S> {
        &self.psi0 + &self.psi1 + &self.psi2 + &self.psi3
    }
}

/// Evaluate the four bias vectors at the true parameters with oracle
/// covariances. `fs0` supplies the true factors and transformed loadings.
pub fn bias_psi<S: Scalar>(
    theta0: &Coefs<S>,
    fs0: &FactorStructure<S>,
    ins: &Instruments<S>,
    sig: &NoiseCovariance<S>,
    n: usize,
    t: usize,
) -> Result<BiasTerms<S>> {
    let p = ins.len();
    let root = S::from_usize(n * t).unwrap().sqrt();
    let g = lag_response(theta0.alpha, t)?;
    let (p_f, m_f) = projectors(&fs0.factors);
    let (_, m_l) = projectors(&fs0.loadings);

    let mut psi0 = DVector::zeros(p);
    let mut psi1 = DVector::zeros(p);
    let mut psi2 = DVector::zeros(p);
    let mut psi3 = DVector::zeros(p);

    psi0[0] = (&m_l * &sig.sigma_n_tilde).trace() * (&g * &sig.sigma_t).trace() / root;
    psi1[0] = sig.sigma_n_tilde.trace()
        * ((&sig.sigma_t * &m_f * &g * &p_f).trace() + (&p_f * &sig.sigma_t * &g).trace())
        / root;

    let r = fs0.rank();
    if r > 0 {
        let ff = fs0.factors.transpose() * &fs0.factors;
        let ll = fs0.loadings.transpose() * &fs0.loadings;
        let ff_inv = ff
            .try_inverse()
            .ok_or_else(|| Error::Singular("factor Gram matrix".into()))?;
        let ll_inv = ll
            .try_inverse()
            .ok_or_else(|| Error::Singular("loading Gram matrix".into()))?;
        // F (F'F)^{-1} (L'L)^{-1} L', the rank-R bridge between the factor
        // and loading spaces (T x m).
        let bridge = &fs0.factors * ff_inv * ll_inv * fs0.loadings.transpose();
        let tr_sigma_t = sig.sigma_t.trace();
        let tr_sigma_n = sig.sigma_n_tilde.trace();
        for kappa in 0..p {
            psi2[kappa] =
                tr_sigma_t * (&sig.sigma_n_tilde * &m_l * &ins.z[kappa] * &bridge).trace() / root;
            psi3[kappa] =
                tr_sigma_n * (&sig.sigma_t * &bridge * &ins.z[kappa] * &m_f).trace() / root;
        }
    }

    Ok(BiasTerms { psi0, psi1, psi2, psi3 })
}

/// The higher-order variance matrices and the adjusted curvature
/// `Delta = D + Upsilon1`. Only the autoregressive block of the Upsilon and
/// fourth-moment matrices is non-zero.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceTerms<S: Scalar> {
    /// Lag-noise interaction entering the curvature.
    pub upsilon1: DMatrix<S>,
    /// Lag-noise variance contribution.
    pub upsilon2: DMatrix<S>,
    /// Excess-kurtosis contribution.
    pub xi: DMatrix<S>,
    /// Skewness contribution.
    pub phi_bar: DMatrix<S>,
    /// `D + Upsilon1`.
    pub delta: DMatrix<S>,
}

/// Evaluate the variance matrices at the true parameters.
///
/// `moments` are the third and fourth moments of the underlying
/// standardised noise; under Gaussian moments `(0, 3)` the skewness and
/// kurtosis terms vanish identically. Non-Gaussian moments require the
/// oracle cross-section pieces on `sig`.
pub fn variance_terms<S: Scalar>(
    theta0: &Coefs<S>,
    fs0: &FactorStructure<S>,
    ins: &Instruments<S>,
    sig: &NoiseCovariance<S>,
    moments: (S, S),
    n: usize,
    t: usize,
) -> Result<VarianceTerms<S>> {
    let g = lag_response(theta0.alpha, t)?;
    variance_terms_with_g(&g, fs0, ins, sig, moments, n, t)
}

/// Same as [`variance_terms`] but with an explicit lag-response matrix, so
/// the static model (no lagged outcome, `G = 0`) can be evaluated directly.
pub(crate) fn variance_terms_with_g<S: Scalar>(
    g: &DMatrix<S>,
    fs0: &FactorStructure<S>,
    ins: &Instruments<S>,
    sig: &NoiseCovariance<S>,
    moments: (S, S),
    n: usize,
    t: usize,
) -> Result<VarianceTerms<S>> {
    let p = ins.len();
    let nt = S::from_usize(n * t).unwrap();
    let (upsilon3, upsilon4) = moments;

    let mut upsilon1 = DMatrix::zeros(p, p);
    upsilon1[(0, 0)] =
        sig.sigma_n_tilde.trace() * (g * &sig.sigma_t * g.transpose()).trace() / nt;

    let tr_nn = (&sig.sigma_n_tilde * &sig.sigma_n_tilde).trace();
    let gs = g * &sig.sigma_t;
    let gts = g.transpose() * &sig.sigma_t;
    let bracket =
        (&gs * &gs).trace() + S::of(2.0) * (&gs * &gts).trace() + (&gts * &gts).trace();
    let mut upsilon2 = DMatrix::zeros(p, p);
    upsilon2[(0, 0)] = tr_nn * bracket / (S::of(2.0) * nt);

    let excess_kurtosis = upsilon4 - S::of(3.0);
    let needs_cross_section = abs(upsilon3) > S::of(1e-14) || abs(excess_kurtosis) > S::of(1e-14);
    let mut xi = DMatrix::zeros(p, p);
    let mut phi_bar = DMatrix::zeros(p, p);
    if needs_cross_section {
        let cross = sig.cross_section.as_ref().ok_or_else(|| {
            Error::InvalidParameter(
                "non-Gaussian noise moments need the oracle cross-section covariance".into(),
            )
        })?;
        let sqrt_t = psd_sqrt(&sig.sigma_t);
        let sqrt_n = psd_sqrt(&cross.sigma_n);
        let q = &cross.basis_q;
        let p_x = q * q.transpose();
        // Diagonals of the moment-mixing matrices.
        let h = &sqrt_t * g * &sqrt_t;
        let n_mat = &sqrt_n * p_x * &sqrt_n;
        let h_diag: Vec<S> = (0..t).map(|i| h[(i, i)]).collect();
        let n_diag: Vec<S> = (0..n).map(|i| n_mat[(i, i)]).collect();
        let h_sq: S = h_diag.iter().map(|v| *v * *v).fold(S::zero(), |a, b| a + b);
        let n_sq: S = n_diag.iter().map(|v| *v * *v).fold(S::zero(), |a, b| a + b);
        xi[(0, 0)] = excess_kurtosis * h_sq * n_sq / nt;

        if abs(upsilon3) > S::of(1e-14) {
            let (_, m_f) = projectors(&fs0.factors);
            let (_, m_l) = projectors(&fs0.loadings);
            let mut phi = DMatrix::zeros(p, p);
            for kappa in 0..p {
                let b = &sqrt_n * q * &m_l * &ins.z[kappa] * &m_f * &sqrt_t;
                let mut acc = S::zero();
                for (ti, &ht) in h_diag.iter().enumerate() {
                    for (i, &ni) in n_diag.iter().enumerate() {
                        acc += ht * ni * b[(i, ti)];
                    }
                }
                phi[(kappa, 0)] = acc;
            }
            phi_bar = (&phi + phi.transpose()) * (upsilon3 / nt);
        }
    }

    let d = hessian_d(ins, fs0, n, t);
    let delta = &d + &upsilon1;
    Ok(VarianceTerms { upsilon1, upsilon2, xi, phi_bar, delta })
}

/// Closed-form bias of the autoregressive coefficient under individual
/// effects with independent homoskedastic errors:
/// `sqrt(T/n) * K/(1-alpha) * (1 - (1 - alpha^T) / (T (1 - alpha)))`.
pub fn nickell_bias<S: Scalar>(alpha: S, t: usize, n: usize, k: usize) -> Result<S> {
    if !alpha.is_finite() || abs(alpha) >= S::one() {
        return Err(Error::InvalidParameter("closed-form bias needs |alpha| < 1".into()));
    }
    let t_s = S::from_usize(t).unwrap();
    let ratio = (S::one() - alpha.powi(t as i32)) / (S::one() - alpha);
    let core = (S::one() - ratio / t_s) / (S::one() - alpha);
    let scale = (t_s / S::from_usize(n).unwrap()).sqrt();
    Ok(scale * S::from_usize(k).unwrap() * core)
}

/// The same bias shape without the covariate-space projection, which blows
/// the prefactor up from `sqrt(T/n)` to `sqrt(n/T)`. Exposed for
/// comparison.
pub fn nickell_bias_untransformed<S: Scalar>(alpha: S, t: usize, n: usize) -> Result<S> {
    if !alpha.is_finite() || abs(alpha) >= S::one() {
        return Err(Error::InvalidParameter("closed-form bias needs |alpha| < 1".into()));
    }
    let t_s = S::from_usize(t).unwrap();
    let ratio = (S::one() - alpha.powi(t as i32)) / (S::one() - alpha);
    let core = (S::one() - ratio / t_s) / (S::one() - alpha);
    let scale = (S::from_usize(n).unwrap() / t_s).sqrt();
    Ok(scale * core)
}

/// First-order expansion terms of the profile objective around the truth,
/// evaluated on a realised transformed error matrix. Used for simulation
/// diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionTerms<S: Scalar> {
    /// Score-like linear term.
    pub c: DVector<S>,
    /// Lag-induced quadratic noise term (first slot only).
    pub b1: DVector<S>,
    /// Dependence cross terms.
    pub b2: DVector<S>,
    /// Dependence cross terms.
    pub b3: DVector<S>,
    /// Dependence cross terms.
    pub b4: DVector<S>,
}

impl<S: Scalar> ExpansionTerms<S> {
    /// The full linear coefficient `d = c + b1 + b2 + b3 + b4`.
    pub fn linear_coefficient(&self) -> DVector<S> {
        &self.c + &self.b1 + &self.b2 + &self.b3 + &self.b4
    }
}

/// Evaluate the expansion terms at the truth given the realised transformed
/// error `eps_tilde` (`m x T`).
pub fn expansion_terms<S: Scalar>(
    theta0: &Coefs<S>,
    fs0: &FactorStructure<S>,
    ins: &Instruments<S>,
    eps_tilde: &DMatrix<S>,
    n: usize,
    t: usize,
) -> Result<ExpansionTerms<S>> {
    let p = ins.len();
    let root = S::from_usize(n * t).unwrap().sqrt();
    let g = lag_response(theta0.alpha, t)?;
    let (_, m_f) = projectors(&fs0.factors);
    let (_, m_l) = projectors(&fs0.loadings);

    // All expansion terms carry the 1/sqrt(nT) scaling: the score then
    // satisfies E[c c'] = Omega, matching the sandwich normalisation, and
    // the objective slope at the truth is -2 d / sqrt(nT) (verified against
    // a finite-difference oracle in the tests).
    let mut c = DVector::zeros(p);
    for kappa in 0..p {
        c[kappa] = (&ins.z[kappa] * &m_f * eps_tilde.transpose() * &m_l).trace() / root;
    }

    let mut b1 = DVector::zeros(p);
    b1[0] = (&m_f * &g * &m_f * eps_tilde.transpose() * &m_l * eps_tilde).trace() / root;

    let mut b2 = DVector::zeros(p);
    let mut b3 = DVector::zeros(p);
    let mut b4 = DVector::zeros(p);
    let r = fs0.rank();
    if r > 0 {
        let ff_inv = (fs0.factors.transpose() * &fs0.factors)
            .try_inverse()
            .ok_or_else(|| Error::Singular("factor Gram matrix".into()))?;
        let ll_inv = (fs0.loadings.transpose() * &fs0.loadings)
            .try_inverse()
            .ok_or_else(|| Error::Singular("loading Gram matrix".into()))?;
        let bridge = &fs0.factors * ff_inv * ll_inv * fs0.loadings.transpose();
        for kappa in 0..p {
            b2[kappa] = -(&m_f
                * eps_tilde.transpose()
                * &m_l
                * &ins.z[kappa]
                * &bridge
                * eps_tilde)
                .trace()
                / root;
            b3[kappa] = -(&m_f
                * ins.z[kappa].transpose()
                * &m_l
                * eps_tilde
                * &bridge
                * eps_tilde)
                .trace()
                / root;
            b4[kappa] = -(&m_f
                * eps_tilde.transpose()
                * &m_l
                * eps_tilde
                * &bridge
                * &ins.z[kappa])
                .trace()
                / root;
        }
    }

    Ok(ExpansionTerms { c, b1, b2, b3, b4 })
}

/// Two-sided standard-normal critical value for a coverage level, e.g.
/// `0.95 -> 1.959964`.
pub fn normal_quantile(level: f64) -> f64 {
    const Z_95: f64 = 1.959964;
    if (level - 0.95).abs() < 1e-12 {
        return Z_95;
    }
    use statrs::distribution::ContinuousCDF;
    let normal = statrs::distribution::Normal::new(0.0, 1.0).expect("unit normal");
    normal.inverse_cdf(0.5 + level / 2.0)
}

/// Per-coefficient confidence intervals from an asymptotic covariance of
/// `sqrt(nT)(theta_hat - theta0)`.
pub fn confidence_intervals<S: Scalar>(
    theta: &Coefs<S>,
    cov: &DMatrix<S>,
    n: usize,
    t: usize,
    level: f64,
) -> Result<Vec<(S, S)>> {
    let p = theta.len();
    if cov.nrows() != p || cov.ncols() != p {
        return Err(Error::Dimension(format!(
            "covariance is {}x{}, expected {p}x{p}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    let z = S::of(normal_quantile(level));
    let scale = S::from_usize(n * t).unwrap();
    let point = theta.to_vector();
    let mut out = Vec::with_capacity(p);
    for i in 0..p {
        let v = cov[(i, i)];
        if v < S::zero() {
            return Err(Error::InvalidParameter(
                "covariance has a negative diagonal entry".into(),
            ));
        }
        let half = z * (v / scale).sqrt();
        out.push((point[i] - half, point[i] + half));
    }
    Ok(out)
}
