//! Replicated simulation runs and their aggregation into report tables.
//!
//! Replications are distributed over a worker pool; every replication
//! derives its own generator stream from the base seed, the cell and its
//! index, so results do not depend on scheduling order or worker count.
//! Aggregation happens after collection, in replication order.

use std::collections::BTreeMap;

use rayon::prelude::*;

use qpc_core::factor_count::eigenvalue_ratio;
use qpc_core::inference::confidence_intervals;
use qpc_core::simulate::{generate, mix_seed};
use qpc_core::{estimate_bn, estimate_ls, estimate_pc, estimate_qpc, EstimateOptions};

use crate::config::{EstimatorKind, McConfig};

/// One replication of one estimator.
#[derive(Debug, Clone)]
pub enum RepOutcome {
    /// The estimator returned an error.
    Failed,
    /// The search did not converge; excluded from the moments.
    NotConverged,
    /// A usable estimate.
    Estimated {
        /// Per-coefficient estimation errors `theta_hat - theta0`.
        errors: Vec<f64>,
        /// Per-coefficient confidence-interval hits, when a covariance was
        /// available.
        covered: Option<Vec<bool>>,
        /// Factor count selected by the eigenvalue-ratio test (transformed
        /// estimator only).
        eigr: Option<usize>,
    },
}

/// All replications of one estimator in one grid cell.
#[derive(Debug, Clone)]
pub struct EstimatorRun {
    /// Which estimator.
    pub estimator: EstimatorKind,
    /// Outcomes in replication order.
    pub reps: Vec<RepOutcome>,
}

/// Summary row of the report.
#[derive(Debug, Clone)]
pub struct CoefStats {
    /// Coefficient label (`alpha`, `beta1`, ...).
    pub name: String,
    /// Mean estimation error over converged replications.
    pub bias: f64,
    /// Empirical standard deviation of the estimates.
    pub sd: f64,
    /// Coverage of the nominal-level interval, in percent.
    pub coverage: Option<f64>,
}

/// Aggregated cell of the experiment grid.
#[derive(Debug, Clone)]
pub struct CellReport {
    /// Estimator the row belongs to.
    pub estimator: EstimatorKind,
    /// Cross-section size.
    pub n: usize,
    /// Panel length.
    pub t: usize,
    /// Per-coefficient summaries; empty when no replication succeeded.
    pub coefs: Vec<CoefStats>,
    /// Replications entering the moments.
    pub used: usize,
    /// Error or non-convergence count.
    pub failures: usize,
}

/// Frequency table of the selected factor count in one cell.
#[derive(Debug, Clone)]
pub struct FactorCountCell {
    /// Cross-section size.
    pub n: usize,
    /// Panel length.
    pub t: usize,
    /// Selected count -> occurrences.
    pub counts: BTreeMap<usize, usize>,
    /// Replications with a selection.
    pub total: usize,
}

/// Full report of a Monte Carlo run.
#[derive(Debug, Clone)]
pub struct McReport {
    /// One row per (estimator, n, T).
    pub cells: Vec<CellReport>,
    /// Factor-count frequencies per (n, T), present when the transformed
    /// estimator ran.
    pub factor_counts: Vec<FactorCountCell>,
    /// Replications per cell.
    pub replications: usize,
}

fn coef_names(k: usize) -> Vec<String> {
    let mut names = vec!["alpha".to_string()];
    for i in 1..=k {
        names.push(format!("beta{i}"));
    }
    names
}

fn run_one(
    cfg: &McConfig,
    estimator: EstimatorKind,
    data: &qpc_core::PanelDataF64,
    theta0: &qpc_core::CoefsF64,
) -> RepOutcome {
    let result = match estimator {
        EstimatorKind::Ls => estimate_ls(data),
        EstimatorKind::Pc => estimate_pc(data, &EstimateOptions::new(cfg.factors_for(estimator))),
        EstimatorKind::Bn => estimate_bn(data, &EstimateOptions::new(cfg.factors_for(estimator))),
        EstimatorKind::Qpc => {
            estimate_qpc(data, &EstimateOptions::new(cfg.factors_for(estimator)))
        }
    };
    let result = match result {
        Ok(r) => r,
        Err(_) => return RepOutcome::Failed,
    };
    if !result.converged {
        return RepOutcome::NotConverged;
    }
    let truth = theta0.to_vector();
    let point = result.theta.to_vector();
    let errors: Vec<f64> = (0..truth.len()).map(|i| point[i] - truth[i]).collect();

    let covered = result.covariance.as_ref().and_then(|cov| {
        confidence_intervals(&result.theta, cov, result.sample.0, result.sample.1, cfg.level)
            .ok()
            .map(|cis| {
                cis.iter()
                    .enumerate()
                    .map(|(i, (lo, hi))| *lo <= truth[i] && truth[i] <= *hi)
                    .collect()
            })
    });

    let eigr = if estimator == EstimatorKind::Qpc {
        result
            .transformed
            .as_ref()
            .and_then(|tp| eigenvalue_ratio(tp, &result.theta).ok())
            .map(|report| report.selected)
    } else {
        None
    };

    RepOutcome::Estimated { errors, covered, eigr }
}

/// Run every configured estimator on `cfg.replications` fresh panels for
/// one `(n, t)` cell. Replications share draws across estimators.
pub fn run_cell(cfg: &McConfig, n: usize, t: usize) -> Vec<EstimatorRun> {
    let cell_tag = (n as u64) << 32 | t as u64;
    let cell_seed = mix_seed(cfg.seed, cell_tag);
    let outcomes: Vec<Vec<RepOutcome>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let dgp = cfg.dgp(n, t).with_seed(mix_seed(cell_seed, rep as u64));
            match generate(&dgp) {
                Ok((data, truth)) => cfg
                    .estimators
                    .iter()
                    .map(|&est| run_one(cfg, est, &data, &truth.theta0))
                    .collect(),
                Err(_) => cfg.estimators.iter().map(|_| RepOutcome::Failed).collect(),
            }
        })
        .collect();

    cfg.estimators
        .iter()
        .enumerate()
        .map(|(j, &estimator)| EstimatorRun {
            estimator,
            reps: outcomes.iter().map(|row| row[j].clone()).collect(),
        })
        .collect()
}

/// Aggregate one estimator's replications into a report row.
pub fn summarize(run: &EstimatorRun, n: usize, t: usize, k: usize) -> CellReport {
    let names = coef_names(k);
    let p = k + 1;
    let mut errors: Vec<Vec<f64>> = vec![Vec::new(); p];
    let mut hits = vec![0usize; p];
    let mut hit_totals = vec![0usize; p];
    let mut failures = 0usize;
    for rep in &run.reps {
        match rep {
            RepOutcome::Failed | RepOutcome::NotConverged => failures += 1,
            RepOutcome::Estimated { errors: e, covered, .. } => {
                for i in 0..p {
                    errors[i].push(e[i]);
                }
                if let Some(flags) = covered {
                    for i in 0..p {
                        hit_totals[i] += 1;
                        if flags[i] {
                            hits[i] += 1;
                        }
                    }
                }
            }
        }
    }
    let used = errors[0].len();
    let coefs = if used == 0 {
        Vec::new()
    } else {
        (0..p)
            .map(|i| {
                let mean = errors[i].iter().sum::<f64>() / used as f64;
                let var = if used > 1 {
                    errors[i].iter().map(|e| (e - mean).powi(2)).sum::<f64>()
                        / (used - 1) as f64
                } else {
                    0.0
                };
                let coverage = (hit_totals[i] > 0)
                    .then(|| 100.0 * hits[i] as f64 / hit_totals[i] as f64);
                CoefStats { name: names[i].clone(), bias: mean, sd: var.sqrt(), coverage }
            })
            .collect()
    };
    CellReport { estimator: run.estimator, n, t, coefs, used, failures }
}

fn factor_frequencies(run: &EstimatorRun, n: usize, t: usize) -> FactorCountCell {
    let mut counts = BTreeMap::new();
    let mut total = 0usize;
    for rep in &run.reps {
        if let RepOutcome::Estimated { eigr: Some(r), .. } = rep {
            *counts.entry(*r).or_insert(0) += 1;
            total += 1;
        }
    }
    FactorCountCell { n, t, counts, total }
}

/// Run the whole experiment grid.
pub fn run_monte_carlo(cfg: &McConfig) -> Result<McReport, String> {
    cfg.validate()?;
    let k = cfg.beta0.len();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| e.to_string())?;

    let mut cells = Vec::new();
    let mut factor_counts = Vec::new();
    for &n in &cfg.grid_n {
        for &t in &cfg.grid_t {
            let runs = pool.install(|| run_cell(cfg, n, t));
            for run in &runs {
                cells.push(summarize(run, n, t, k));
                if run.estimator == EstimatorKind::Qpc {
                    factor_counts.push(factor_frequencies(run, n, t));
                }
            }
        }
    }
    Ok(McReport { cells, factor_counts, replications: cfg.replications })
}
