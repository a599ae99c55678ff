//! Comparator estimators on the untransformed model: pooled least squares
//! and the alternating principal-components estimator.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimator::{EstimateOptions, EstimateResult, StartTrace};
use crate::numeric::{frob_sq, vec_mat, Scalar};
use crate::panel::{projectors, Coefs, FactorStructure, PanelData};

/// Pooled regression pieces shared by the baseline estimators.
pub(crate) struct PooledFit<S: Scalar> {
    pub coefs: Coefs<S>,
    /// Heteroskedasticity-robust covariance of
    /// `sqrt(n * t_eff) (theta_hat - theta)`.
    pub covariance: DMatrix<S>,
    /// Periods contributing observations (T with an initial condition,
    /// T - 1 without).
    pub t_eff: usize,
    pub ssr: S,
}

/// Stacked system of the untransformed dynamic model: outcomes, the lag
/// regressor and the covariates, restricted to periods with an available
/// lag.
struct StackedSystem<S: Scalar> {
    y: DMatrix<S>,
    lag: DMatrix<S>,
    x: Vec<DMatrix<S>>,
    t_eff: usize,
}

fn stacked_system<S: Scalar>(data: &PanelData<S>) -> StackedSystem<S> {
    let t = data.t();
    match data.y0() {
        Some(y0) => {
            // Lag matrix (y0, y_1, ..., y_{T-1}).
            let mut lag = DMatrix::zeros(data.n(), t);
            lag.set_column(0, y0);
            for col in 1..t {
                lag.set_column(col, &data.y().column(col - 1));
            }
            StackedSystem { y: data.y().clone(), lag, x: data.x().to_vec(), t_eff: t }
        }
        None => {
            let y = data.y().columns(1, t - 1).clone_owned();
            let lag = data.y().columns(0, t - 1).clone_owned();
            let x = data.x().iter().map(|xk| xk.columns(1, t - 1).clone_owned()).collect();
            StackedSystem { y, lag, x, t_eff: t - 1 }
        }
    }
}

fn design_matrix<S: Scalar>(sys: &StackedSystem<S>) -> (DMatrix<S>, DVector<S>) {
    let rows = sys.y.nrows() * sys.y.ncols();
    let k = sys.x.len();
    let mut design = DMatrix::zeros(rows, k + 1);
    design.set_column(0, &vec_mat(&sys.lag));
    for (j, xk) in sys.x.iter().enumerate() {
        design.set_column(j + 1, &vec_mat(xk));
    }
    (design, vec_mat(&sys.y))
}

/// Pooled least squares of the outcome on its lag and the covariates. The
/// autoregressive estimate is clamped into `(-1, 1)` so it remains a valid
/// coefficient vector.
pub(crate) fn pooled_ols<S: Scalar>(data: &PanelData<S>) -> Result<PooledFit<S>> {
    let sys = stacked_system(data);
    let (design, target) = design_matrix(&sys);
    let p = design.ncols();
    let gram = design.transpose() * &design;
    let gram_inv = gram
        .try_inverse()
        .ok_or_else(|| Error::Singular("pooled regressor Gram matrix".into()))?;
    let point = &gram_inv * design.transpose() * &target;
    let residual = &target - &design * &point;
    let ssr = residual.norm_squared();

    // HC0 sandwich.
    let mut meat = DMatrix::zeros(p, p);
    for row in 0..design.nrows() {
        let xi = design.row(row).transpose();
        meat += &xi * xi.transpose() * (residual[row] * residual[row]);
    }
    let cov = &gram_inv * meat * &gram_inv;
    let n_obs = S::from_usize(design.nrows()).unwrap();

    let cap = S::one() - S::of(1e-6);
    let alpha = point[0].clamp(-cap, cap);
    let coefs = Coefs::new(alpha, point.rows(1, p - 1).clone_owned())?;
    Ok(PooledFit { coefs, covariance: cov * n_obs, t_eff: sys.t_eff, ssr })
}

/// Pooled least squares as an estimator result, with a
/// heteroskedasticity-robust covariance.
pub fn estimate_ls<S: Scalar>(data: &PanelData<S>) -> Result<EstimateResult<S>> {
    let fit = pooled_ols(data)?;
    let scale = S::from_usize(data.n() * fit.t_eff).unwrap();
    let objective = fit.ssr / scale;
    let trace = StartTrace {
        start: 0,
        theta: fit.coefs.clone(),
        objective,
        iterations: 1,
        converged: true,
    };
    Ok(EstimateResult {
        theta: fit.coefs,
        factors: FactorStructure::empty(fit.t_eff, 0),
        objective,
        converged: true,
        starts_agreeing: 1,
        diagnostics: vec![trace],
        covariance: Some(fit.covariance),
        sample: (data.n(), fit.t_eff),
        transformed: None,
    })
}

/// System the untransformed principal-components estimator works on: the
/// full `T` periods with the lag entering through the shift structure, so
/// the initial condition stays inside the factor term (its column of the
/// lag matrix is zero) exactly as in the transformed estimator.
fn pc_system<S: Scalar>(data: &PanelData<S>) -> StackedSystem<S> {
    let t = data.t();
    let mut lag = DMatrix::zeros(data.n(), t);
    for col in 1..t {
        lag.set_column(col, &data.y().column(col - 1));
    }
    StackedSystem { y: data.y().clone(), lag, x: data.x().to_vec(), t_eff: t }
}

/// Best rank-`r` approximation via the singular value decomposition,
/// returned as `(loadings, factors)` with `loadings * factors'` the
/// approximation.
fn top_rank_approx<S: Scalar>(mat: &DMatrix<S>, r: usize) -> (DMatrix<S>, DMatrix<S>) {
    let (n, t) = mat.shape();
    if r == 0 {
        return (DMatrix::zeros(n, 0), DMatrix::zeros(t, 0));
    }
    let svd = mat.clone().svd(true, true);
    let u = svd.u.expect("svd requested u");
    let vt = svd.v_t.expect("svd requested v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b].partial_cmp(&svd.singular_values[a]).expect("finite")
    });
    let mut loadings = DMatrix::zeros(n, r);
    let mut factors = DMatrix::zeros(t, r);
    for (dst, &src) in order.iter().take(r).enumerate() {
        loadings.set_column(dst, &(u.column(src) * svd.singular_values[src]));
        factors.set_column(dst, &vt.row(src).transpose());
    }
    (loadings, factors)
}

/// Alternating principal-components estimation of the untransformed model,
/// iterating pooled least squares on the defactored outcomes against
/// rank-`R` truncation of the `n x T` residual `Y S(alpha) - sum beta X`.
///
/// The initial condition is absorbed into the factor term just as in the
/// transformed estimator, so `opts.factors` is the total count including
/// that extra factor. With `T` small the `n`-dimensional loadings are badly
/// estimated and the autoregressive coefficient inherits a sizeable
/// negative bias; the estimator is included as the comparison point the
/// transformation is designed to repair.
pub fn estimate_pc<S: Scalar>(
    data: &PanelData<S>,
    opts: &EstimateOptions<S>,
) -> Result<EstimateResult<S>> {
    let (result, _) = estimate_pc_traced(data, opts)?;
    Ok(result)
}

/// Alternation with the objective path exposed (each entry is the value
/// after one coefficient update).
pub(crate) fn estimate_pc_traced<S: Scalar>(
    data: &PanelData<S>,
    opts: &EstimateOptions<S>,
) -> Result<(EstimateResult<S>, Vec<S>)> {
    const MAX_SWEEPS: usize = 500;
    let rel_tol = S::of(1e-9);

    let r = opts.factors;
    let sys = pc_system(data);
    let n = data.n();
    if r > sys.t_eff.min(n) {
        return Err(Error::InvalidParameter(format!(
            "factor count {r} exceeds min(n, T) of the stacked system"
        )));
    }
    let (design, target) = design_matrix(&sys);
    let gram_inv = (design.transpose() * &design)
        .try_inverse()
        .ok_or_else(|| Error::Singular("pooled regressor Gram matrix".into()))?;
    let projector = &gram_inv * design.transpose();
    let scale = S::from_usize(n * sys.t_eff).unwrap();

    let start = pooled_ols(data)?.coefs;
    let mut point = start.to_vector();
    let mut objective_path = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    let mut common = DMatrix::zeros(n, sys.t_eff);
    let mut loadings = DMatrix::zeros(n, r);
    let mut factors = DMatrix::zeros(sys.t_eff, r);
    let mut prev = S::of(f64::MAX);

    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        // Factor step: rank-R truncation of the residual at the current
        // coefficients.
        let mut residual_mat = sys.y.clone() - &sys.lag * point[0];
        for (k, xk) in sys.x.iter().enumerate() {
            residual_mat -= xk * point[k + 1];
        }
        let (l, f) = top_rank_approx(&residual_mat, r);
        common = &l * f.transpose();
        loadings = l;
        factors = f;

        // Coefficient step: pooled regression on the defactored outcomes.
        let defactored = &target - vec_mat(&common);
        point = &projector * defactored;

        let mut fit = sys.y.clone() - &sys.lag * point[0] - &common;
        for (k, xk) in sys.x.iter().enumerate() {
            fit -= xk * point[k + 1];
        }
        let objective = frob_sq(&fit) / scale;
        objective_path.push(objective);
        if (prev - objective) <= rel_tol * prev.max(S::one()) {
            converged = true;
            break;
        }
        prev = objective;
    }

    let objective = *objective_path.last().expect("at least one sweep");
    let cap = S::one() - S::of(1e-6);
    let theta = Coefs::new(point[0].clamp(-cap, cap), point.rows(1, point.len() - 1).clone_owned())?;

    // Homoskedastic sandwich on the defactored system.
    let covariance = pc_covariance(&sys, &theta, &loadings, &factors, &common, n, r);

    // Loadings live in the original cross-section for this estimator.
    let fs = FactorStructure::new(factors, loadings)?;

    let trace = StartTrace {
        start: 0,
        theta: theta.clone(),
        objective,
        iterations: sweeps,
        converged,
    };
    let result = EstimateResult {
        theta,
        factors: fs,
        objective,
        converged,
        starts_agreeing: 1,
        diagnostics: vec![trace],
        covariance,
        sample: (n, sys.t_eff),
        transformed: None,
    };
    Ok((result, objective_path))
}

fn pc_covariance<S: Scalar>(
    sys: &StackedSystem<S>,
    theta: &Coefs<S>,
    loadings: &DMatrix<S>,
    factors: &DMatrix<S>,
    common: &DMatrix<S>,
    n: usize,
    r: usize,
) -> Option<DMatrix<S>> {
    let t_eff = sys.t_eff;
    let k = sys.x.len();
    let mut fit = sys.y.clone() - &sys.lag * theta.alpha - common;
    for (j, xk) in sys.x.iter().enumerate() {
        fit -= xk * theta.beta[j];
    }
    let df = (k + 1) + r * (n + t_eff);
    let cells = n * t_eff;
    let denom = if cells > df + r * r { cells + r * r - df } else { cells };
    let sigma2 = frob_sq(&fit) / S::from_usize(denom).unwrap();
    if sigma2 <= S::zero() {
        return None;
    }

    let (_, m_f) = projectors(factors);
    let (_, m_l) = projectors(loadings);
    let scale = S::from_usize(n * t_eff).unwrap();
    let mut regressors: Vec<&DMatrix<S>> = vec![&sys.lag];
    for xk in &sys.x {
        regressors.push(xk);
    }
    let projected: Vec<DMatrix<S>> = regressors.iter().map(|z| &m_l * *z * &m_f).collect();
    let mut d = DMatrix::zeros(k + 1, k + 1);
    for i in 0..=k {
        for j in i..=k {
            let mut acc = S::zero();
            for (a, b) in projected[i].iter().zip(projected[j].iter()) {
                acc += *a * *b;
            }
            d[(i, j)] = acc / scale;
            d[(j, i)] = d[(i, j)];
        }
    }
    d.try_inverse().map(|inv| inv * sigma2)
}
