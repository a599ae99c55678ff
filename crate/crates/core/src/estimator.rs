//! The transformed principal-components estimator and its
//! Balestra-Nerlove variant.
//!
//! Both minimise an eigenvalue-sum profile objective over a compact
//! coefficient box with a multistart simplex search seeded at the pooled
//! least-squares estimate. The QPC estimator works on the full `T`-period
//! transformed system and treats the initial condition as one extra factor,
//! so its factor count is `R* + 1`. The Balestra-Nerlove variant instead
//! drops the first period, adds the projected lagged outcome as a regressor
//! and keeps the factor count at `R*`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::pooled_ols;
use crate::error::{Error, Result};
use crate::inference::{
    build_instruments, estimate_sigmas, fixed_t_covariance, hessian_d, omega, CovarianceSource,
    Instruments,
};
use crate::numeric::Scalar;
use crate::objective::{
    composite_residual, extract_from_residual, profile_objective, profile_value,
};
use crate::optim::{minimize_simplex, Bounds, SimplexOptions};
use crate::panel::{Coefs, FactorStructure, PanelData};
use crate::transform::{build_basis, transform_panel, BasisMethod, LowRankSpec, TransformedPanel};

/// Where the search starts.
#[derive(Debug, Clone, PartialEq)]
pub enum StartPoint<S: Scalar> {
    /// Pooled least squares on the raw panel (lag seeded by the initial
    /// condition when available).
    LeastSquares,
    /// A caller-supplied coefficient vector.
    Given(Coefs<S>),
}

/// Estimation controls.
#[derive(Debug, Clone)]
pub struct EstimateOptions<S: Scalar> {
    /// Number of factors handed to the profile objective. For
    /// [`estimate_qpc`] this counts the initial-condition factor, for
    /// [`estimate_bn`] it does not.
    pub factors: usize,
    /// Search interval for the autoregressive coefficient, inside `(-1, 1)`.
    pub alpha_bounds: (S, S),
    /// Half-width of the slope search box around the start point.
    pub beta_halfwidth: S,
    /// Number of simplex starts.
    pub multistart: usize,
    /// Iteration cap per start.
    pub max_iter: usize,
    /// Objective tolerance of the simplex search.
    pub tol: S,
    /// Start point.
    pub initial: StartPoint<S>,
    /// Seed of the fixed perturbation lattice for the extra starts.
    pub seed: u64,
    /// Basis construction method.
    pub basis_method: BasisMethod,
    /// Optional low-rank covariate handling for the basis.
    pub low_rank: Option<LowRankSpec<S>>,
}

impl<S: Scalar> EstimateOptions<S> {
    /// Defaults: alpha in `[-0.99, 0.99]`, slope box half-width 10, eight
    /// starts, 2000 iterations, objective tolerance 1e-10, least-squares
    /// start, symmetric-root basis.
    pub fn new(factors: usize) -> Self {
        Self {
            factors,
            alpha_bounds: (S::of(-0.99), S::of(0.99)),
            beta_halfwidth: S::of(10.0),
            multistart: 8,
            max_iter: 2000,
            tol: S::of(1e-10),
            initial: StartPoint::LeastSquares,
            seed: 0x9e3779b9,
            basis_method: BasisMethod::SymmetricRoot,
            low_rank: None,
        }
    }

    fn validate(&self, t: usize) -> Result<()> {
        let (lo, hi) = self.alpha_bounds;
        if !(lo < hi && lo > S::of(-1.0) && hi < S::of(1.0)) {
            return Err(Error::InvalidParameter(
                "alpha bounds must be a non-empty interval inside (-1, 1)".into(),
            ));
        }
        if self.beta_halfwidth <= S::zero() {
            return Err(Error::InvalidParameter("slope box half-width must be positive".into()));
        }
        if self.multistart == 0 {
            return Err(Error::InvalidParameter("at least one start is required".into()));
        }
        if self.factors > t {
            return Err(Error::InvalidParameter(format!(
                "factor count {} exceeds T = {t}",
                self.factors
            )));
        }
        Ok(())
    }
}

/// Outcome of one simplex start.
#[derive(Debug, Clone)]
pub struct StartTrace<S: Scalar> {
    /// Start index.
    pub start: usize,
    /// Coefficients the start settled on.
    pub theta: Coefs<S>,
    /// Objective at those coefficients.
    pub objective: S,
    /// Iterations over both search stages.
    pub iterations: usize,
    /// Whether the tolerance test stopped the final stage.
    pub converged: bool,
}

/// Estimation output.
#[derive(Debug, Clone)]
pub struct EstimateResult<S: Scalar> {
    /// Coefficient estimates.
    pub theta: Coefs<S>,
    /// Factor structure extracted at the estimate.
    pub factors: FactorStructure<S>,
    /// Profile objective at the estimate.
    pub objective: S,
    /// Convergence flag; with several starts it requires the two best to
    /// agree within 1e-6 in the coefficients and 1e-10 in the objective.
    pub converged: bool,
    /// Number of starts agreeing with the best one at those tolerances.
    pub starts_agreeing: usize,
    /// Per-start diagnostics.
    pub diagnostics: Vec<StartTrace<S>>,
    /// Asymptotic covariance of `sqrt(n * t_eff) (theta_hat - theta0)`,
    /// when it could be formed (a noiseless fit has none).
    pub covariance: Option<DMatrix<S>>,
    /// `(n, t_eff)` pair scaling the covariance into standard errors.
    pub sample: (usize, usize),
    /// The transformed system the estimate was computed on. For the
    /// Balestra-Nerlove variant this is the reduced `T - 1`-period system.
    pub transformed: Option<TransformedPanel<S>>,
}

impl<S: Scalar> EstimateResult<S> {
    /// Standard errors when a covariance is available.
    pub fn standard_errors(&self) -> Option<DVector<S>> {
        self.covariance
            .as_ref()
            .map(|cov| crate::inference::standard_errors(cov, self.sample.0, self.sample.1))
    }
}

struct Multistart<S: Scalar> {
    traces: Vec<StartTrace<S>>,
    best: usize,
    starts_agreeing: usize,
    converged: bool,
}

/// Run the multistart simplex search over the coefficient box.
fn multistart_search<S, F>(
    objective: F,
    start: &Coefs<S>,
    k: usize,
    opts: &EstimateOptions<S>,
) -> Multistart<S>
where
    S: Scalar,
    F: Fn(&DVector<S>) -> S,
{
    let dim = k + 1;
    let mut lower = DVector::zeros(dim);
    let mut upper = DVector::zeros(dim);
    lower[0] = opts.alpha_bounds.0;
    upper[0] = opts.alpha_bounds.1;
    let base = start.to_vector();
    for i in 1..dim {
        lower[i] = base[i] - opts.beta_halfwidth;
        upper[i] = base[i] + opts.beta_halfwidth;
    }
    let bounds = Bounds { lower, upper };

    // Deterministic perturbation lattice for the extra starts: the
    // autoregressive coordinate sweeps its whole interval, slopes jitter
    // around the least-squares values.
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![base.clone()];
    for _ in 1..opts.multistart {
        let mut v = base.clone();
        let (lo, hi) = (opts.alpha_bounds.0.to_f64_lossy(), opts.alpha_bounds.1.to_f64_lossy());
        v[0] = S::of(rng.random_range(lo..hi));
        for i in 1..dim {
            v[i] += S::of(rng.random_range(-2.0..2.0));
        }
        bounds.clamp(&mut v);
        starts.push(v);
    }

    let coarse = SimplexOptions {
        max_iter: opts.max_iter,
        f_tol: opts.tol,
        x_tol: S::of(1e-8),
        init_step: S::of(0.1),
    };
    let polish = SimplexOptions {
        max_iter: opts.max_iter,
        f_tol: opts.tol,
        x_tol: S::of(1e-9),
        init_step: S::of(1e-3),
    };

    let mut traces = Vec::with_capacity(opts.multistart);
    for (idx, x0) in starts.iter().enumerate() {
        let stage1 = minimize_simplex(&objective, x0, &bounds, &coarse);
        let stage2 = minimize_simplex(&objective, &stage1.x, &bounds, &polish);
        traces.push(StartTrace {
            start: idx,
            theta: Coefs::from_vector(&stage2.x),
            objective: stage2.f,
            iterations: stage1.iterations + stage2.iterations,
            converged: stage2.converged,
        });
    }

    // Total order: objective first, then start index.
    let mut order: Vec<usize> = (0..traces.len()).collect();
    order.sort_by(|&a, &b| {
        traces[a]
            .objective
            .partial_cmp(&traces[b].objective)
            .expect("finite objective")
            .then(a.cmp(&b))
    });
    let best = order[0];
    let best_theta = traces[best].theta.to_vector();
    let starts_agreeing = traces
        .iter()
        .filter(|tr| {
            (tr.theta.to_vector() - &best_theta).amax() <= S::of(1e-6)
                && crate::numeric::abs(tr.objective - traces[best].objective) <= S::of(1e-10)
        })
        .count();
    let any_converged = traces.iter().any(|tr| tr.converged);
    let converged = if !any_converged {
        false
    } else if traces.len() == 1 {
        traces[0].converged
    } else {
        starts_agreeing >= 2
    };
    Multistart { traces, best, starts_agreeing, converged }
}

fn start_coefs<S: Scalar>(data: &PanelData<S>, opts: &EstimateOptions<S>) -> Result<Coefs<S>> {
    match &opts.initial {
        StartPoint::Given(theta) => {
            if theta.beta.len() != data.k() {
                return Err(Error::Dimension(format!(
                    "start point has {} slopes for {} covariates",
                    theta.beta.len(),
                    data.k()
                )));
            }
            Ok(theta.clone())
        }
        StartPoint::LeastSquares => match pooled_ols(data) {
            Ok(fit) => Ok(fit.coefs),
            // A singular pooled regression still leaves the origin as a
            // usable start.
            Err(_) => Coefs::new(S::zero(), DVector::zeros(data.k())),
        },
    }
}

/// Estimate the transformed model by principal components.
///
/// `opts.factors` is the *total* factor count of the transformed model;
/// when the data-generating process has `R*` factors plus an initial
/// condition, pass `R* + 1`.
pub fn estimate_qpc<S: Scalar>(
    data: &PanelData<S>,
    opts: &EstimateOptions<S>,
) -> Result<EstimateResult<S>> {
    opts.validate(data.t())?;
    let spec = opts.low_rank.clone().unwrap_or_else(|| LowRankSpec::none(data.k()));
    let basis = build_basis(data, &spec, opts.basis_method)?;
    let tp = transform_panel(data, &basis)?;
    let r = opts.factors;
    let start = start_coefs(data, opts)?;

    let objective = |v: &DVector<S>| -> S {
        let theta = Coefs::from_vector(v);
        profile_objective(&tp, &theta, r).unwrap_or_else(|_| S::of(f64::MAX))
    };
    let search = multistart_search(objective, &start, data.k(), opts);
    let theta = search.traces[search.best].theta.clone();
    let objective_value = search.traces[search.best].objective;

    let residual = composite_residual(&tp, &theta)?;
    let factors = extract_from_residual(&residual.mat, r)?;
    let fit_residual = &residual.mat - factors.common_component();
    let covariance = qpc_covariance(&tp, &theta, &factors, &fit_residual);

    Ok(EstimateResult {
        theta,
        factors,
        objective: objective_value,
        converged: search.converged,
        starts_agreeing: search.starts_agreeing,
        diagnostics: search.traces,
        covariance,
        sample: (tp.n(), tp.t()),
        transformed: Some(tp),
    })
}

fn qpc_covariance<S: Scalar>(
    tp: &TransformedPanel<S>,
    theta: &Coefs<S>,
    factors: &FactorStructure<S>,
    fit_residual: &DMatrix<S>,
) -> Option<DMatrix<S>> {
    let ins = build_instruments(tp, theta).ok()?;
    sandwich_covariance(&ins, factors, fit_residual, tp.n(), tp.t())
}

/// Kronecker-plug-in sandwich shared by the QPC and Balestra-Nerlove fits.
/// Returns `None` when the residual is degenerate (a numerically perfect
/// fit carries no noise to estimate) or the curvature is singular.
fn sandwich_covariance<S: Scalar>(
    ins: &Instruments<S>,
    factors: &FactorStructure<S>,
    fit_residual: &DMatrix<S>,
    n: usize,
    t: usize,
) -> Option<DMatrix<S>> {
    let noise_floor = S::of(1e-12)
        * ins.z.iter().map(crate::numeric::frob_sq).fold(S::zero(), |a, b| a + b);
    if crate::numeric::frob_sq(fit_residual) <= noise_floor {
        return None;
    }
    let sig = estimate_sigmas(
        fit_residual,
        CovarianceSource::PluginKronecker,
        ins.len(),
        factors.rank(),
    )
    .ok()?;
    let d = hessian_d(ins, factors, n, t);
    let om = omega(ins, factors, &sig, n, t);
    fixed_t_covariance(&d, &om).ok()
}

/// Reduced `T - 1`-period system used by the Balestra-Nerlove estimator.
struct BnSystem<S: Scalar> {
    tp: TransformedPanel<S>,
    lag_projected: DMatrix<S>,
}

fn bn_system<S: Scalar>(data: &PanelData<S>, method: BasisMethod) -> Result<BnSystem<S>> {
    let t = data.t();
    let tc = t - 1;
    // Periods 2..T keep their covariates; period 1 only supplies the lag.
    let y_c = data.y().columns(1, tc).clone_owned();
    let y_lag = data.y().columns(0, tc).clone_owned();
    let x_c: Vec<DMatrix<S>> = data.x().iter().map(|xk| xk.columns(1, tc).clone_owned()).collect();
    let reduced = PanelData::new(y_c, x_c, None)?;
    let basis = build_basis(&reduced, &LowRankSpec::none(reduced.k()), method)?;
    let tp = transform_panel(&reduced, &basis)?;
    let lag_projected = basis.q().transpose() * y_lag;
    Ok(BnSystem { tp, lag_projected })
}

fn bn_residual<S: Scalar>(sys: &BnSystem<S>, theta: &Coefs<S>) -> DMatrix<S> {
    let mut mat = sys.tp.y().clone() - &sys.lag_projected * theta.alpha;
    for (k, xk) in sys.tp.x().iter().enumerate() {
        mat -= xk * theta.beta[k];
    }
    mat
}

/// Estimate by the Balestra-Nerlove route: drop the first period, include
/// the projection of the lagged outcome as an additional regressor and run
/// the same profile minimisation on the reduced system.
///
/// `opts.factors` here counts only the genuine factors (`R*`); no
/// initial-condition factor arises.
pub fn estimate_bn<S: Scalar>(
    data: &PanelData<S>,
    opts: &EstimateOptions<S>,
) -> Result<EstimateResult<S>> {
    if data.t() < 3 {
        return Err(Error::Dimension(format!(
            "the reduced system needs T >= 3, got T = {}",
            data.t()
        )));
    }
    opts.validate(data.t() - 1)?;
    if opts.low_rank.is_some() {
        return Err(Error::InvalidParameter(
            "low-rank covariate handling is not wired into the reduced system".into(),
        ));
    }
    let sys = bn_system(data, opts.basis_method)?;
    let r = opts.factors;
    let tc = data.t() - 1;
    let n = data.n();
    let start = start_coefs(data, opts)?;

    let objective = |v: &DVector<S>| -> S {
        let theta = Coefs::from_vector(v);
        let res = bn_residual(&sys, &theta);
        profile_value(&res, r, n, tc).unwrap_or_else(|_| S::of(f64::MAX))
    };
    let search = multistart_search(objective, &start, data.k(), opts);
    let theta = search.traces[search.best].theta.clone();
    let objective_value = search.traces[search.best].objective;

    let residual = bn_residual(&sys, &theta);
    let factors = extract_from_residual(&residual, r)?;
    let fit_residual = &residual - factors.common_component();

    // Instruments of the reduced system: the projected lag plus the
    // transformed covariates.
    let mut z = Vec::with_capacity(data.k() + 1);
    z.push(sys.lag_projected.clone());
    for xk in sys.tp.x() {
        z.push(xk.clone());
    }
    let ins = Instruments { z };
    let covariance = sandwich_covariance(&ins, &factors, &fit_residual, n, tc);

    Ok(EstimateResult {
        theta,
        factors,
        objective: objective_value,
        converged: search.converged,
        starts_agreeing: search.starts_agreeing,
        diagnostics: search.traces,
        covariance,
        sample: (n, tc),
        transformed: Some(sys.tp),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    use crate::simulate::{generate, DgpConfig, ErrorMode};

    fn noiseless_cfg(n: usize, t: usize, seed: u64) -> DgpConfig<f64> {
        let mut cfg = DgpConfig::<f64>::new(n, t).with_seed(seed);
        cfg.error_mode = ErrorMode::Iid { sigma: 0.0 };
        cfg
    }

    #[test]
    fn qpc_recovers_the_truth_without_noise() {
        let cfg = noiseless_cfg(60, 6, 42);
        let (data, truth) = generate(&cfg).unwrap();
        let result = estimate_qpc(&data, &EstimateOptions::new(3)).unwrap();
        let err = (result.theta.to_vector() - truth.theta0.to_vector()).amax();
        assert!(err <= 1e-6, "recovery error {err}");
        assert!(result.objective <= 1e-12, "objective {}", result.objective);
        assert!(result.converged);
        // Noiseless fit has no covariance.
        assert!(result.covariance.is_none());
    }

    #[test]
    fn bn_recovers_the_truth_without_noise() {
        let cfg = noiseless_cfg(60, 6, 43);
        let (data, truth) = generate(&cfg).unwrap();
        let result = estimate_bn(&data, &EstimateOptions::new(2)).unwrap();
        let err = (result.theta.to_vector() - truth.theta0.to_vector()).amax();
        assert!(err <= 1e-6, "recovery error {err}");
        // The reduced system drops one period.
        assert_eq!(result.sample, (60, 5));
        assert_eq!(result.transformed.as_ref().unwrap().t(), 5);
    }

    #[test]
    fn bn_needs_three_periods() {
        let cfg = noiseless_cfg(30, 2, 1);
        let (data, _) = generate(&cfg).unwrap();
        assert!(matches!(
            estimate_bn(&data, &EstimateOptions::new(1)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn static_estimate_matches_closed_form_least_squares() {
        // With no factors the profile objective is an ordinary quadratic;
        // its minimiser has a closed form on the stacked system.
        let mut cfg = DgpConfig::<f64>::new(80, 5).with_seed(44);
        cfg.r_star = 0;
        cfg.error_mode = ErrorMode::Iid { sigma: 0.3 };
        let (data, _) = generate(&cfg).unwrap();
        let mut opts = EstimateOptions::new(0);
        opts.multistart = 4;
        let result = estimate_qpc(&data, &opts).unwrap();

        let tp = result.transformed.as_ref().unwrap();
        // Regressors: the shifted outcome (for alpha) and the covariates.
        let m = tp.m();
        let t = tp.t();
        let rows = m * t;
        let mut design = DMatrix::<f64>::zeros(rows, 3);
        let mut shifted = DMatrix::<f64>::zeros(m, t);
        for col in 1..t {
            shifted.set_column(col, &tp.y().column(col - 1));
        }
        design.set_column(0, &crate::numeric::vec_mat(&shifted));
        design.set_column(1, &crate::numeric::vec_mat(&tp.x()[0]));
        design.set_column(2, &crate::numeric::vec_mat(&tp.x()[1]));
        let target = crate::numeric::vec_mat(tp.y());
        let gram = design.transpose() * &design;
        let rhs = design.transpose() * &target;
        let ols = gram.try_inverse().unwrap() * rhs;

        let got = result.theta.to_vector();
        assert!((got - ols).amax() <= 1e-8, "mismatch vs closed form");
    }

    #[test]
    fn objective_at_estimate_beats_the_truth() {
        for seed in 0..5u64 {
            let cfg = DgpConfig::<f64>::new(40, 5).with_seed(900 + seed);
            let (data, truth) = generate(&cfg).unwrap();
            let result = estimate_qpc(&data, &EstimateOptions::new(3)).unwrap();
            let tp = result.transformed.as_ref().unwrap();
            let at_truth = profile_objective(tp, &truth.theta0, 3).unwrap();
            assert!(
                result.objective <= at_truth + 1e-10,
                "estimate {} vs truth {at_truth}",
                result.objective
            );
            // Stored objective is the profile objective at the estimate.
            let re = profile_objective(tp, &result.theta, 3).unwrap();
            assert_relative_eq!(result.objective, re, epsilon = 1e-12);
        }
    }

    #[test]
    fn estimation_is_scale_equivariant() {
        let cfg = DgpConfig::<f64>::new(50, 5).with_seed(45);
        let (data, _) = generate(&cfg).unwrap();
        let result = estimate_qpc(&data, &EstimateOptions::new(3)).unwrap();

        let c = 3.0;
        let scaled = PanelData::new(
            data.y() * c,
            data.x().iter().map(|x| x * c).collect(),
            data.y0().map(|v| v * c),
        )
        .unwrap();
        let result_scaled = estimate_qpc(&scaled, &EstimateOptions::new(3)).unwrap();
        let gap = (result.theta.to_vector() - result_scaled.theta.to_vector()).amax();
        assert!(gap <= 1e-8, "scale equivariance violated by {gap}");
    }

    #[test]
    fn multistart_agreement_is_reported() {
        let cfg = DgpConfig::<f64>::new(50, 5).with_seed(46);
        let (data, _) = generate(&cfg).unwrap();
        let result = estimate_qpc(&data, &EstimateOptions::new(3)).unwrap();
        assert!(result.starts_agreeing >= 2, "{} starts agree", result.starts_agreeing);
        assert!(result.converged);
        assert_eq!(result.diagnostics.len(), 8);
    }

    #[test]
    fn iteration_starved_search_reports_failure() {
        let cfg = DgpConfig::<f64>::new(50, 5).with_seed(47);
        let (data, _) = generate(&cfg).unwrap();
        let mut opts = EstimateOptions::new(3);
        opts.max_iter = 1;
        let result = estimate_qpc(&data, &opts).unwrap();
        assert!(!result.converged);
    }

    #[test]
    fn rank_deficient_design_propagates_the_basis_error() {
        let cfg = DgpConfig::<f64>::new(50, 5).with_seed(48);
        let (data, _) = generate(&cfg).unwrap();
        let dup = PanelData::new(
            data.y().clone(),
            vec![data.x()[0].clone(), data.x()[0].clone()],
            None,
        )
        .unwrap();
        assert!(matches!(
            estimate_qpc(&dup, &EstimateOptions::new(3)),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn invalid_options_are_rejected() {
        let cfg = noiseless_cfg(30, 4, 2);
        let (data, _) = generate(&cfg).unwrap();
        let mut opts = EstimateOptions::new(3);
        opts.alpha_bounds = (-1.0, 0.5);
        assert!(estimate_qpc(&data, &opts).is_err());
        let mut opts = EstimateOptions::new(5);
        opts.alpha_bounds = (-0.9, 0.9);
        assert!(estimate_qpc(&data, &opts).is_err());
        let mut opts = EstimateOptions::new(2);
        opts.multistart = 0;
        assert!(estimate_qpc(&data, &opts).is_err());
    }

    #[test]
    fn given_start_point_is_honoured() {
        let cfg = noiseless_cfg(40, 5, 49);
        let (data, truth) = generate(&cfg).unwrap();
        let mut opts = EstimateOptions::new(3);
        opts.initial = StartPoint::Given(truth.theta0.clone());
        opts.multistart = 1;
        let result = estimate_qpc(&data, &opts).unwrap();
        let err = (result.theta.to_vector() - truth.theta0.to_vector()).amax();
        assert!(err <= 1e-6);
        assert_eq!(result.starts_agreeing, 1);
    }

    #[test]
    fn noisy_fit_has_standard_errors() {
        let cfg = DgpConfig::<f64>::new(60, 6).with_seed(50);
        let (data, _) = generate(&cfg).unwrap();
        let result = estimate_qpc(&data, &EstimateOptions::new(3)).unwrap();
        let se = result.standard_errors().expect("covariance available");
        assert_eq!(se.len(), 3);
        assert!(se.iter().all(|v| *v > 0.0 && v.is_finite()));
    }
}
