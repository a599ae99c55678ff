//! Rendering of Monte Carlo reports as CSV or markdown.

use std::fmt::Write as _;

use crate::mc::McReport;

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.2}"),
        None => "NA".into(),
    }
}

/// CSV rendering with the schema `estimator,n,T,coef,bias,sd,coverage`.
/// Cells without a single successful replication appear with `NA` moments.
pub fn render_csv(report: &McReport) -> String {
    let mut out = String::from("estimator,n,T,coef,bias,sd,coverage\n");
    for cell in &report.cells {
        if cell.coefs.is_empty() {
            let _ = writeln!(out, "{},{},{},NA,NA,NA,NA", cell.estimator.label(), cell.n, cell.t);
            continue;
        }
        for stat in &cell.coefs {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{:.6},{}",
                cell.estimator.label(),
                cell.n,
                cell.t,
                stat.name,
                stat.bias,
                stat.sd,
                fmt_opt(stat.coverage)
            );
        }
    }
    out
}

/// CSV table of the factor-count frequencies: `n,T,r,count,percent`.
pub fn render_factor_csv(report: &McReport) -> String {
    let mut out = String::from("n,T,r,count,percent\n");
    for cell in &report.factor_counts {
        for (&r, &count) in &cell.counts {
            let pct = if cell.total > 0 { 100.0 * count as f64 / cell.total as f64 } else { 0.0 };
            let _ = writeln!(out, "{},{},{},{},{:.2}", cell.n, cell.t, r, count, pct);
        }
    }
    out
}

/// Markdown rendering: one bias/SD/coverage table per coefficient plus the
/// factor-count table.
pub fn render_markdown(report: &McReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Simulation report ({} replications per cell)\n", report.replications);

    let coef_names: Vec<String> = report
        .cells
        .iter()
        .find(|c| !c.coefs.is_empty())
        .map(|c| c.coefs.iter().map(|s| s.name.clone()).collect())
        .unwrap_or_default();

    for name in &coef_names {
        let _ = writeln!(out, "## Coefficient {name}\n");
        let _ = writeln!(out, "| estimator | n | T | bias | sd | coverage % |");
        let _ = writeln!(out, "|---|---|---|---|---|---|");
        for cell in &report.cells {
            if let Some(stat) = cell.coefs.iter().find(|s| &s.name == name) {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {:.3} | {:.3} | {} |",
                    cell.estimator.label(),
                    cell.n,
                    cell.t,
                    stat.bias,
                    stat.sd,
                    fmt_opt(stat.coverage)
                );
            } else if cell.coefs.is_empty() {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | NA | NA | NA |",
                    cell.estimator.label(),
                    cell.n,
                    cell.t
                );
            }
        }
        let _ = writeln!(out);
    }

    if !report.factor_counts.is_empty() {
        let _ = writeln!(out, "## Number of factors chosen (%)\n");
        let mut all_r: Vec<usize> = report
            .factor_counts
            .iter()
            .flat_map(|c| c.counts.keys().copied())
            .collect();
        all_r.sort_unstable();
        all_r.dedup();
        let header: Vec<String> = all_r.iter().map(|r| format!("R = {r}")).collect();
        let _ = writeln!(out, "| n | T | {} |", header.join(" | "));
        let _ = writeln!(out, "|---|---|{}", "---|".repeat(all_r.len()));
        for cell in &report.factor_counts {
            let row: Vec<String> = all_r
                .iter()
                .map(|r| {
                    let count = cell.counts.get(r).copied().unwrap_or(0);
                    if cell.total > 0 {
                        format!("{:.2}", 100.0 * count as f64 / cell.total as f64)
                    } else {
                        "NA".into()
                    }
                })
                .collect();
            let _ = writeln!(out, "| {} | {} | {} |", cell.n, cell.t, row.join(" | "));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::McConfig;
    use crate::mc::run_monte_carlo;

    #[test]
    fn empty_cells_render_as_na() {
        let report = McReport {
            cells: vec![crate::mc::CellReport {
                estimator: crate::config::EstimatorKind::Qpc,
                n: 30,
                t: 6,
                coefs: Vec::new(),
                used: 0,
                failures: 5,
            }],
            factor_counts: Vec::new(),
            replications: 5,
        };
        let csv = render_csv(&report);
        assert!(csv.contains("qpc,30,6,NA,NA,NA,NA"), "{csv}");
        let md = render_markdown(&report);
        assert!(md.contains("5 replications"));
    }

    #[test]
    fn renderings_are_deterministic() {
        let cfg = McConfig::from_toml(
            r#"
            grid_n = [30]
            grid_t = [6]
            replications = 2
            estimators = ["ls", "qpc"]
            seed = 3
            workers = 1
            "#,
        )
        .unwrap();
        let a = run_monte_carlo(&cfg).unwrap();
        let b = run_monte_carlo(&cfg).unwrap();
        assert_eq!(render_csv(&a), render_csv(&b));
        assert_eq!(render_factor_csv(&a), render_factor_csv(&b));
        let md = render_markdown(&a);
        assert!(md.contains("Coefficient alpha"));
        let csv = render_csv(&a);
        assert!(csv.starts_with("estimator,n,T,coef,bias,sd,coverage\n"));
        assert!(csv.contains("qpc,30,6,alpha,"));
    }
}
