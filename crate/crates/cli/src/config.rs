//! Monte Carlo configuration, read from a flat TOML key-value file.

use nalgebra::DVector;
use serde::Deserialize;

use qpc_core::simulate::{DgpConfig, ErrorMode};

/// Which estimator a table column refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    /// Pooled least squares.
    Ls,
    /// Principal components on the untransformed model.
    Pc,
    /// Balestra-Nerlove on the reduced system.
    Bn,
    /// Principal components on the transformed model.
    Qpc,
}

impl EstimatorKind {
    /// Lower-case label used in reports and on the command line.
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Ls => "ls",
            EstimatorKind::Pc => "pc",
            EstimatorKind::Bn => "bn",
            EstimatorKind::Qpc => "qpc",
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ls" => Ok(EstimatorKind::Ls),
            "pc" => Ok(EstimatorKind::Pc),
            "bn" => Ok(EstimatorKind::Bn),
            "qpc" => Ok(EstimatorKind::Qpc),
            other => Err(format!("unknown estimator '{other}' (expected ls|pc|bn|qpc)")),
        }
    }
}

fn default_grid_n() -> Vec<usize> {
    vec![30, 60, 90, 150, 300]
}

fn default_grid_t() -> Vec<usize> {
    vec![6, 9, 12]
}

fn default_replications() -> usize {
    500
}

fn default_estimators() -> Vec<EstimatorKind> {
    vec![EstimatorKind::Ls, EstimatorKind::Pc, EstimatorKind::Bn, EstimatorKind::Qpc]
}

fn default_r_qpc() -> usize {
    3
}

fn default_r_bn() -> usize {
    2
}

fn default_r_pc() -> usize {
    3
}

fn default_level() -> f64 {
    0.95
}

fn default_alpha0() -> f64 {
    0.5
}

fn default_beta0() -> Vec<f64> {
    vec![1.0, 1.0]
}

fn default_r_star() -> usize {
    2
}

fn default_het_lo() -> f64 {
    0.5
}

fn default_het_hi() -> f64 {
    2.5
}

fn default_burn_in() -> usize {
    100
}

fn default_error_mode() -> String {
    "heteroskedastic".into()
}

fn default_sigma_iid() -> f64 {
    1.0
}

fn default_workers() -> usize {
    0
}

fn default_format() -> String {
    "csv".into()
}

/// Experiment definition: the sample-size grid, replication count, the
/// estimators to run with their factor counts, and the data-generating
/// process template. Every key has a default mirroring the study design.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    /// Cross-section sizes; crossed with `grid_t`.
    #[serde(default = "default_grid_n")]
    pub grid_n: Vec<usize>,
    /// Panel lengths.
    #[serde(default = "default_grid_t")]
    pub grid_t: Vec<usize>,
    /// Monte Carlo replications per cell.
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// Estimators to include.
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    /// Factor count for the transformed-model estimator (counts the
    /// initial-condition factor).
    #[serde(default = "default_r_qpc")]
    pub r_qpc: usize,
    /// Factor count for the reduced-system estimator.
    #[serde(default = "default_r_bn")]
    pub r_bn: usize,
    /// Factor count for the untransformed principal-components estimator
    /// (counts the initial-condition factor, like `r_qpc`).
    #[serde(default = "default_r_pc")]
    pub r_pc: usize,
    /// Nominal confidence level for the coverage columns.
    #[serde(default = "default_level")]
    pub level: f64,
    /// Base seed; replications derive their own streams from it.
    #[serde(default)]
    pub seed: u64,
    /// Worker threads for the replication pool (0 = all cores).
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// True autoregressive coefficient of the data-generating process.
    #[serde(default = "default_alpha0")]
    pub alpha0: f64,
    /// True slopes; length fixes the number of covariates.
    #[serde(default = "default_beta0")]
    pub beta0: Vec<f64>,
    /// True number of factors.
    #[serde(default = "default_r_star")]
    pub r_star: usize,
    /// Lower bound of the heteroskedastic variance draws.
    #[serde(default = "default_het_lo")]
    pub het_lo: f64,
    /// Upper bound of the heteroskedastic variance draws.
    #[serde(default = "default_het_hi")]
    pub het_hi: f64,
    /// Burn-in periods for the outcome recursion.
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    /// Error structure: "heteroskedastic" or "iid".
    #[serde(default = "default_error_mode")]
    pub error_mode: String,
    /// Error standard deviation in iid mode.
    #[serde(default = "default_sigma_iid")]
    pub sigma_iid: f64,
    /// Output path; stdout when absent.
    #[serde(default)]
    pub output: Option<String>,
    /// Output format: "csv" or "markdown".
    #[serde(default = "default_format")]
    pub format: String,
}

impl Default for McConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults are complete")
    }
}

impl McConfig {
    /// Parse a TOML document.
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let cfg: McConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Basic sanity checks.
    pub fn validate(&self) -> Result<(), String> {
        if self.replications == 0 {
            return Err("replications must be at least 1".into());
        }
        if self.grid_n.is_empty() || self.grid_t.is_empty() {
            return Err("the (n, T) grid must be non-empty".into());
        }
        if self.estimators.is_empty() {
            return Err("at least one estimator is required".into());
        }
        if !(0.0..1.0).contains(&self.level) || self.level <= 0.0 {
            return Err("coverage level must lie in (0, 1)".into());
        }
        match self.error_mode.as_str() {
            "heteroskedastic" | "iid" => {}
            other => return Err(format!("unknown error_mode '{other}'")),
        }
        match self.format.as_str() {
            "csv" | "markdown" => {}
            other => return Err(format!("unknown format '{other}'")),
        }
        Ok(())
    }

    /// Data-generating template for one cell of the grid.
    pub fn dgp(&self, n: usize, t: usize) -> DgpConfig<f64> {
        let mut dgp = DgpConfig::new(n, t);
        dgp.alpha0 = self.alpha0;
        dgp.beta0 = DVector::from_row_slice(&self.beta0);
        dgp.r_star = self.r_star;
        dgp.het_range = (self.het_lo, self.het_hi);
        dgp.burn_in = self.burn_in;
        dgp.error_mode = match self.error_mode.as_str() {
            "iid" => ErrorMode::Iid { sigma: self.sigma_iid },
            _ => ErrorMode::HeteroskedasticDiagonal,
        };
        dgp
    }

    /// Factor count used by an estimator.
    pub fn factors_for(&self, estimator: EstimatorKind) -> usize {
        match estimator {
            EstimatorKind::Ls => 0,
            EstimatorKind::Pc => self.r_pc,
            EstimatorKind::Bn => self.r_bn,
            EstimatorKind::Qpc => self.r_qpc,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_validate() {
        let cfg = McConfig::default();
        assert_eq!(cfg.grid_n, vec![30, 60, 90, 150, 300]);
        assert_eq!(cfg.replications, 500);
        assert_eq!(cfg.estimators.len(), 4);
        cfg.validate().unwrap();
    }

    #[test]
    fn toml_round_trip_overrides() {
        let cfg = McConfig::from_toml(
            r#"
            grid_n = [30]
            grid_t = [6]
            replications = 10
            estimators = ["qpc", "ls"]
            r_qpc = 2
            seed = 7
            error_mode = "iid"
            sigma_iid = 0.5
            "#,
        )
        .unwrap();
        assert_eq!(cfg.grid_n, vec![30]);
        assert_eq!(cfg.r_qpc, 2);
        assert_eq!(cfg.estimators, vec![EstimatorKind::Qpc, EstimatorKind::Ls]);
        let dgp = cfg.dgp(30, 6);
        assert_eq!(dgp.n, 30);
        assert!(matches!(dgp.error_mode, ErrorMode::Iid { .. }));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(McConfig::from_toml("replications = 0").is_err());
        assert!(McConfig::from_toml("grid_n = []").is_err());
        assert!(McConfig::from_toml("error_mode = \"bananas\"").is_err());
        assert!(McConfig::from_toml("not_a_key = 1").is_err());
        assert!(McConfig::from_toml("estimators = [\"nope\"]").is_err());
    }
}
