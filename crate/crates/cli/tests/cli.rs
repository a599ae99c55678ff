//! End-to-end checks of the data interfaces and the binary.

use std::path::Path;
use std::process::Command;

use qpc_cli::config::McConfig;
use qpc_cli::data::{read_long, read_wide, write_long, write_wide, DataError};
use qpc_core::simulate::{generate, DgpConfig};
use qpc_core::{estimate_qpc, EstimateOptionsF64};

fn sample_panel(seed: u64) -> qpc_core::PanelDataF64 {
    let cfg = DgpConfig::<f64>::new(30, 5).with_seed(seed);
    generate(&cfg).unwrap().0
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qpc"))
}

#[test]
fn long_format_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("panel.csv");
    let data = sample_panel(1);
    write_long(&data, &path).unwrap();
    let back = read_long(&path).unwrap();
    assert_eq!(back, data);

    // Estimates computed from the file match the in-memory run exactly.
    let opts = EstimateOptionsF64::new(3);
    let from_memory = estimate_qpc(&data, &opts).unwrap();
    let from_file = estimate_qpc(&back, &opts).unwrap();
    assert_eq!(from_memory.theta.to_vector(), from_file.theta.to_vector());
    assert_eq!(from_memory.objective, from_file.objective);
}

#[test]
fn wide_and_long_ingestion_agree() {
    let dir = tempfile::tempdir().unwrap();
    let data = sample_panel(2);
    let long_path = dir.path().join("panel.csv");
    write_long(&data, &long_path).unwrap();
    let (y_path, x_paths, y0_path) = write_wide(&data, dir.path()).unwrap();

    let from_long = read_long(&long_path).unwrap();
    let from_wide = read_wide(&y_path, &x_paths, y0_path.as_deref()).unwrap();
    assert_eq!(from_long, from_wide);

    let opts = EstimateOptionsF64::new(3);
    let a = estimate_qpc(&from_long, &opts).unwrap();
    let b = estimate_qpc(&from_wide, &opts).unwrap();
    assert_eq!(a.theta.to_vector(), b.theta.to_vector());
}

#[test]
fn malformed_rows_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "id,t,y,x1\n1,1,0.5,1.0\n1,2,oops,1.0\n").unwrap();
    match read_long(&path) {
        Err(DataError::Parse { line, message }) => {
            assert_eq!(line, 2);
            assert!(message.contains("oops"), "message: {message}");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn unbalanced_panels_list_missing_cells() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("holes.csv");
    // Unit 2 is missing period 2. The data must still satisfy n >= T*K
    // once pivoted, so use four units and two periods.
    let mut text = String::from("id,t,y,x1\n");
    for id in 1..=4 {
        for t in 1..=2 {
            if id == 2 && t == 2 {
                continue;
            }
            text.push_str(&format!("{id},{t},0.1,0.2\n"));
        }
    }
    std::fs::write(&path, text).unwrap();
    match read_long(&path) {
        Err(DataError::Unbalanced { missing }) => {
            assert_eq!(missing, vec![("2".to_string(), 2)]);
        }
        other => panic!("expected an unbalanced-panel error, got {other:?}"),
    }
}

#[test]
fn binary_fit_runs_and_prints_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("panel.csv");
    write_long(&sample_panel(3), &path).unwrap();
    let output = bin()
        .args(["fit", "--data"])
        .arg(&path)
        .args(["--format", "long", "--estimator", "qpc", "--factors", "3", "--eigr"])
        .output()
        .unwrap();
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("alpha"), "{stdout}");
    assert!(stdout.contains("beta2"), "{stdout}");
    assert!(stdout.contains("eigenvalue-ratio factor count"), "{stdout}");
}

#[test]
fn binary_exit_codes_follow_the_contract() {
    // Usage error: unknown estimator.
    let out = bin().args(["fit", "--data", "x.csv", "--format", "long", "--estimator", "zzz"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Usage error: --eigr with a non-transformed estimator.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("panel.csv");
    write_long(&sample_panel(4), &path).unwrap();
    let out = bin()
        .args(["fit", "--data"])
        .arg(&path)
        .args(["--format", "long", "--estimator", "ls", "--eigr"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Data error: missing file.
    let out = bin()
        .args(["fit", "--data", "/nonexistent.csv", "--format", "long", "--estimator", "qpc"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Numerical error: duplicated covariate makes the design rank deficient.
    let data = sample_panel(5);
    let dup = qpc_core::PanelDataF64::new(
        data.y().clone(),
        vec![data.x()[0].clone(), data.x()[0].clone()],
        None,
    )
    .unwrap();
    let dup_path = dir.path().join("dup.csv");
    write_long(&dup, &dup_path).unwrap();
    let out = bin()
        .args(["fit", "--data"])
        .arg(&dup_path)
        .args(["--format", "long", "--estimator", "qpc", "--factors", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn tiny_mc_toml(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("mc.toml");
    std::fs::write(
        &path,
        r#"
grid_n = [30]
grid_t = [6]
replications = 2
seed = 42
workers = 1
"#,
    )
    .unwrap();
    path
}

#[test]
fn binary_mc_is_reproducible_and_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_mc_toml(dir.path());
    let out_path = dir.path().join("report.csv");

    let run = || {
        let output = bin()
            .args(["mc", "--config"])
            .arg(&config)
            .args(["--out"])
            .arg(&out_path)
            .output()
            .unwrap();
        assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
        std::fs::read_to_string(&out_path).unwrap()
    };
    let first = run();
    let second = run();
    assert_eq!(first, second, "same seed and config must give identical bytes");
    assert!(first.starts_with("estimator,n,T,coef,bias,sd,coverage\n"));
    assert!(first.contains("qpc,30,6,beta1,"));

    // Factor-count side table.
    let factors = std::fs::read_to_string(dir.path().join("report_factors.csv")).unwrap();
    assert!(factors.starts_with("n,T,r,count,percent\n"));

    // Markdown variant.
    let output = bin()
        .args(["mc", "--config"])
        .arg(&config)
        .args(["--format", "markdown"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("## Coefficient alpha"), "{stdout}");

    // Config-file problems exit with the data code.
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "replications = 0\n").unwrap();
    let output = bin().args(["mc", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn reps_and_seed_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_mc_toml(dir.path());
    let output = bin()
        .args(["mc", "--config"])
        .arg(&config)
        .args(["--reps", "1", "--seed", "7", "--workers", "1"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    // One replication: empirical sd of a single draw is zero.
    assert!(text.contains(",0.000000,"), "{text}");
    let _ = McConfig::default();
}
