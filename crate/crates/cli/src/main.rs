//! `qpc` command line: Monte Carlo table generation and panel estimation
//! from CSV files.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use qpc_cli::config::{EstimatorKind, McConfig};
use qpc_cli::data::{read_long, read_wide, DataError};
use qpc_cli::mc::run_monte_carlo;
use qpc_cli::report::{render_csv, render_factor_csv, render_markdown};
use qpc_core::factor_count::eigenvalue_ratio;
use qpc_core::inference::confidence_intervals;
use qpc_core::{
    estimate_bn, estimate_ls, estimate_pc, estimate_qpc, EstimateOptionsF64, EstimateResultF64,
    PanelDataF64,
};

const EXIT_USAGE: i32 = 1;
const EXIT_DATA: i32 = 2;
const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser)]
#[command(name = "qpc", version, about = "Short-panel interactive-fixed-effects estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo study from a TOML configuration.
    Mc(McArgs),
    /// Estimate a model from CSV data.
    Fit(FitArgs),
}

#[derive(Args)]
struct McArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override the replication count.
    #[arg(long)]
    reps: Option<usize>,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path (stdout when omitted). A second file with suffix
    /// `_factors` carries the factor-count table in csv mode.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_parser = ["csv", "markdown"])]
    format: Option<String>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct FitArgs {
    /// Data file: the long-format CSV, or the outcome matrix in wide mode.
    #[arg(long)]
    data: PathBuf,
    /// Input layout.
    #[arg(long, value_parser = ["long", "wide"])]
    format: String,
    /// Estimator to run.
    #[arg(long, value_parser = parse_estimator)]
    estimator: EstimatorKind,
    /// Number of factors (total including the initial-condition factor for
    /// qpc; genuine factors only for bn/pc; ignored by ls).
    #[arg(long, default_value_t = 3)]
    factors: usize,
    /// Covariate matrix files (wide mode only, repeat per covariate).
    #[arg(long = "x")]
    x: Vec<PathBuf>,
    /// Initial-outcome file (wide mode only).
    #[arg(long)]
    y0: Option<PathBuf>,
    /// Confidence level for the reported intervals.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Also print the eigenvalue-ratio factor-count diagnostic
    /// (transformed estimator only).
    #[arg(long)]
    eigr: bool,
}

fn parse_estimator(s: &str) -> Result<EstimatorKind, String> {
    s.parse()
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help/version requests are successes, anything else is usage.
            let benign = matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = err.print();
            return if benign { 0 } else { EXIT_USAGE };
        }
    };
    match cli.command {
        Command::Mc(args) => run_mc(args),
        Command::Fit(args) => run_fit(args),
    }
}

fn run_mc(args: McArgs) -> i32 {
    let text = match std::fs::read_to_string(&args.config) {
        Ok(text) => text,
        Err(err) => {
            eprintln!("cannot read {}: {err}", args.config.display());
            return EXIT_DATA;
        }
    };
    let mut cfg = match McConfig::from_toml(&text) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("invalid configuration: {err}");
            return EXIT_DATA;
        }
    };
    if let Some(reps) = args.reps {
        cfg.replications = reps;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = args.workers {
        cfg.workers = workers;
    }
    if let Some(format) = args.format {
        cfg.format = format;
    }
    if let Some(out) = args.out {
        cfg.output = Some(out.display().to_string());
    }
    if let Err(err) = cfg.validate() {
        eprintln!("invalid configuration: {err}");
        return EXIT_DATA;
    }

    let report = match run_monte_carlo(&cfg) {
        Ok(report) => report,
        Err(err) => {
            eprintln!("simulation failed: {err}");
            return EXIT_NUMERICAL;
        }
    };

    let body = match cfg.format.as_str() {
        "markdown" => render_markdown(&report),
        _ => render_csv(&report),
    };
    match &cfg.output {
        Some(path) => {
            if let Err(err) = std::fs::write(path, &body) {
                eprintln!("cannot write {path}: {err}");
                return EXIT_DATA;
            }
            if cfg.format == "csv" && !report.factor_counts.is_empty() {
                let factor_path = factor_path(path);
                if let Err(err) = std::fs::write(&factor_path, render_factor_csv(&report)) {
                    eprintln!("cannot write {factor_path}: {err}");
                    return EXIT_DATA;
                }
            }
        }
        None => {
            print!("{body}");
            if cfg.format == "csv" && !report.factor_counts.is_empty() {
                println!();
                print!("{}", render_factor_csv(&report));
            }
        }
    }
    0
}

fn factor_path(path: &str) -> String {
    match path.rsplit_once('.') {
        Some((stem, ext)) => format!("{stem}_factors.{ext}"),
        None => format!("{path}_factors"),
    }
}

fn run_fit(args: FitArgs) -> i32 {
    if args.eigr && args.estimator != EstimatorKind::Qpc {
        eprintln!("--eigr is only available with --estimator qpc");
        return EXIT_USAGE;
    }
    let data = match load_panel(&args) {
        Ok(data) => data,
        Err(err) => {
            eprintln!("{err}");
            return EXIT_DATA;
        }
    };

    let result = match fit_panel(&args, &data) {
        Ok(result) => result,
        Err(err) => {
            eprintln!("estimation failed: {err}");
            return EXIT_NUMERICAL;
        }
    };

    print_result(&args, &data, &result);

    if args.eigr {
        let Some(tp) = result.transformed.as_ref() else {
            eprintln!("no transformed system available for the ratio test");
            return EXIT_NUMERICAL;
        };
        match eigenvalue_ratio(tp, &result.theta) {
            Ok(report) => {
                println!();
                println!("eigenvalue-ratio factor count");
                println!("  shifted eigenvalues: {}", join(report.shifted_eigenvalues.iter()));
                println!("  ratios:              {}", join(report.ratios.iter()));
                println!(
                    "  selected R = {}{}",
                    report.selected,
                    if report.degenerate { " (degenerate: all ratios equal)" } else { "" }
                );
            }
            Err(err) => {
                eprintln!("ratio test failed: {err}");
                return EXIT_NUMERICAL;
            }
        }
    }
    0
}

fn join<'a>(values: impl Iterator<Item = &'a f64>) -> String {
    values.map(|v| format!("{v:.6}")).collect::<Vec<_>>().join("  ")
}

fn load_panel(args: &FitArgs) -> Result<PanelDataF64, DataError> {
    match args.format.as_str() {
        "long" => {
            if !args.x.is_empty() || args.y0.is_some() {
                return Err(DataError::Schema(
                    "--x/--y0 are for wide format; long format uses a single file".into(),
                ));
            }
            read_long(&args.data)
        }
        _ => read_wide(&args.data, &args.x, args.y0.as_deref()),
    }
}

fn fit_panel(args: &FitArgs, data: &PanelDataF64) -> qpc_core::Result<EstimateResultF64> {
    match args.estimator {
        EstimatorKind::Ls => estimate_ls(data),
        EstimatorKind::Pc => estimate_pc(data, &EstimateOptionsF64::new(args.factors)),
        EstimatorKind::Bn => estimate_bn(data, &EstimateOptionsF64::new(args.factors)),
        EstimatorKind::Qpc => estimate_qpc(data, &EstimateOptionsF64::new(args.factors)),
    }
}

fn print_result(args: &FitArgs, data: &PanelDataF64, result: &EstimateResultF64) {
    println!(
        "estimator: {}   n = {}   T = {}   K = {}   R = {}",
        args.estimator.label(),
        data.n(),
        data.t(),
        data.k(),
        result.factors.rank()
    );
    println!(
        "objective: {:.6e}   converged: {}   starts agreeing: {}",
        result.objective, result.converged, result.starts_agreeing
    );
    let names: Vec<String> = std::iter::once("alpha".to_string())
        .chain((1..=data.k()).map(|j| format!("beta{j}")))
        .collect();
    let point = result.theta.to_vector();
    let se = result.standard_errors();
    let ci = result.covariance.as_ref().and_then(|cov| {
        confidence_intervals(&result.theta, cov, result.sample.0, result.sample.1, args.level)
            .ok()
    });
    println!();
    println!(
        "{:<8} {:>12} {:>12} {:>26}",
        "coef",
        "estimate",
        "std.err",
        format!("{:.0}% interval", args.level * 100.0)
    );
    for (i, name) in names.iter().enumerate() {
        let se_text =
            se.as_ref().map(|s| format!("{:.6}", s[i])).unwrap_or_else(|| "NA".into());
        let ci_text = ci
            .as_ref()
            .map(|c| format!("[{:.6}, {:.6}]", c[i].0, c[i].1))
            .unwrap_or_else(|| "NA".into());
        println!("{:<8} {:>12.6} {:>12} {:>26}", name, point[i], se_text, ci_text);
    }
}
