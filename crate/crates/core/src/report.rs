//! Report rendering: a structured hierarchical key-value format for
//! machine consumption, and a compact human-readable text form. All
//! numbers are written with 17 significant digits so values survive a
//! parse round trip bit-for-bit, and rendering is fully deterministic.

use crate::problem::{fmt_f64, serialize_problem, ProblemDocument};
use crate::simulate::MonteCarloStats;
use crate::solve::SolutionReport;
use nalgebra::Matrix2;

pub const REPORT_HEADER: &str = "format trilat-report v1";
pub const STATS_HEADER: &str = "format trilat-montecarlo v1";

pub fn tool_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Text,
    Structured,
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map_or_else(|| "-".to_string(), fmt_f64)
}

fn push_matrix2(out: &mut String, key: &str, m: &Matrix2<f64>) {
    out.push_str(&format!(
        "{key} {} {} {} {}\n",
        fmt_f64(m[(0, 0)]),
        fmt_f64(m[(0, 1)]),
        fmt_f64(m[(1, 0)]),
        fmt_f64(m[(1, 1)])
    ));
}

pub fn render_solution_structured(
    doc: &ProblemDocument,
    report: &SolutionReport,
    seed: Option<u64>,
) -> String {
    let mut out = String::new();
    out.push_str(REPORT_HEADER);
    out.push('\n');
    out.push_str(&format!("tool-version {}\n", tool_version()));
    if let Some(seed) = seed {
        out.push_str(&format!("seed {seed}\n"));
    }
    out.push_str(&format!("fallback {}\n", report.fallback_used));
    let squared = doc.squared_on_ingestion();
    if !squared.is_empty() {
        let list: Vec<String> = squared.iter().map(|i| i.to_string()).collect();
        out.push_str(&format!("squared-on-ingestion {}\n", list.join(" ")));
    }
    out.push_str("begin problem\n");
    out.push_str(&serialize_problem(doc));
    out.push_str("end problem\n");
    out.push_str(&format!("candidate-count {}\n", report.candidates.len()));
    for (i, c) in report.candidates.iter().enumerate() {
        out.push_str(&format!("begin candidate {i}\n"));
        out.push_str(&format!("x {}\n", fmt_f64(c.x)));
        out.push_str(&format!("y {}\n", fmt_f64(c.y)));
        out.push_str(&format!("z {}\n", fmt_f64(c.z)));
        out.push_str(&format!("rho {}\n", fmt_opt(c.rho)));
        out.push_str(&format!("theta {}\n", fmt_opt(c.theta)));
        out.push_str(&format!("objective {}\n", fmt_f64(c.objective)));
        out.push_str(&format!("residual-norm {}\n", fmt_f64(c.residual_norm)));
        out.push_str(&format!("classification {}\n", c.classification));
        out.push_str(&format!("provenance {}\n", c.provenance));
        out.push_str(&format!("on-boundary {}\n", c.on_search_boundary));
        out.push_str(&format!("end candidate {i}\n"));
    }
    match report.selected {
        Some(i) => out.push_str(&format!("selected {i}\n")),
        None => out.push_str("selected -\n"),
    }
    if let Some(cov) = &report.covariance {
        out.push_str("begin covariance\n");
        push_matrix2(&mut out, "jacobian", &cov.jacobian);
        push_matrix2(&mut out, "sigma-l", &cov.sigma_l);
        push_matrix2(&mut out, "sigma-x", &cov.sigma_x);
        out.push_str(&format!("condition-number {}\n", fmt_f64(cov.condition_number)));
        out.push_str("end covariance\n");
    }
    if let Some(check) = &report.cross_check {
        out.push_str("begin cross-check\n");
        out.push_str(&format!("agreement {}\n", check.agreement));
        out.push_str(&format!("max-mismatch {}\n", fmt_f64(check.max_mismatch)));
        out.push_str(&format!("tolerance {}\n", fmt_f64(check.tolerance)));
        out.push_str("end cross-check\n");
    }
    if !report.diagnostics.is_empty() {
        out.push_str("begin diagnostics\n");
        for d in &report.diagnostics {
            out.push_str(&format!("note {d}\n"));
        }
        out.push_str("end diagnostics\n");
    }
    out
}

pub fn render_solution_text(doc: &ProblemDocument, report: &SolutionReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{} problem, {} stations\n",
        doc.spec.mode,
        doc.spec.station_count()
    ));
    out.push_str(&format!("candidates ({}):\n", report.candidates.len()));
    for (i, c) in report.candidates.iter().enumerate() {
        let mark = if report.selected == Some(i) { "*" } else { " " };
        out.push_str(&format!(
            "{mark} [{i}] ({:>14.6}, {:>14.6}, {:>10.4})  {:<9} obj {:.6e}  resid {:.3e}  {}\n",
            c.x, c.y, c.z, c.classification.as_str(), c.objective, c.residual_norm, c.provenance
        ));
    }
    match report.selected_candidate() {
        Some(sel) => out.push_str(&format!(
            "selected minimum: ({:.9}, {:.9}, {:.9})\n",
            sel.x, sel.y, sel.z
        )),
        None => out.push_str("selected minimum: none (no candidate classified as a minimum)\n"),
    }
    if let Some(cov) = &report.covariance {
        out.push_str(&format!(
            "covariance sigma-x: [[{:.6e}, {:.6e}], [{:.6e}, {:.6e}]] (condition {:.3e})\n",
            cov.sigma_x[(0, 0)],
            cov.sigma_x[(0, 1)],
            cov.sigma_x[(1, 0)],
            cov.sigma_x[(1, 1)],
            cov.condition_number
        ));
    }
    if let Some(check) = &report.cross_check {
        out.push_str(&format!(
            "cross-check: {} (max mismatch {:.3e}, tolerance {:.3e})\n",
            if check.agreement { "agree" } else { "DISAGREE" },
            check.max_mismatch,
            check.tolerance
        ));
    }
    if report.fallback_used {
        out.push_str("numeric fallback was used\n");
    }
    for d in &report.diagnostics {
        out.push_str(&format!("note: {d}\n"));
    }
    out
}

pub fn render_montecarlo_structured(stats: &MonteCarloStats) -> String {
    let mut out = String::new();
    out.push_str(STATS_HEADER);
    out.push('\n');
    out.push_str(&format!("tool-version {}\n", tool_version()));
    out.push_str(&format!("seed {}\n", stats.seed));
    out.push_str(&format!("trials {}\n", stats.trials));
    out.push_str(&format!("used {}\n", stats.used));
    out.push_str(&format!("basin-hops {}\n", stats.basin_hops));
    out.push_str(&format!("failed {}\n", stats.failed));
    out.push_str(&format!(
        "nominal {} {}\n",
        fmt_f64(stats.nominal.0),
        fmt_f64(stats.nominal.1)
    ));
    out.push_str(&format!(
        "empirical-mean {} {}\n",
        fmt_f64(stats.empirical_mean.0),
        fmt_f64(stats.empirical_mean.1)
    ));
    push_matrix2(&mut out, "empirical-cov", &stats.empirical_cov);
    push_matrix2(&mut out, "analytic-cov", &stats.analytic_cov);
    push_matrix2(&mut out, "relative-diff", &stats.relative_diff);
    out
}

pub fn render_montecarlo_text(stats: &MonteCarloStats) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "monte carlo: {} trials, {} used, {} basin hops excluded, {} failed (seed {})\n",
        stats.trials, stats.used, stats.basin_hops, stats.failed, stats.seed
    ));
    out.push_str(&format!(
        "nominal ({:.9}, {:.9}); empirical mean ({:.9}, {:.9})\n",
        stats.nominal.0, stats.nominal.1, stats.empirical_mean.0, stats.empirical_mean.1
    ));
    for (label, m) in [
        ("empirical", &stats.empirical_cov),
        ("analytic ", &stats.analytic_cov),
        ("rel diff ", &stats.relative_diff),
    ] {
        out.push_str(&format!(
            "{label} [[{:.6e}, {:.6e}], [{:.6e}, {:.6e}]]\n",
            m[(0, 0)],
            m[(0, 1)],
            m[(1, 0)],
            m[(1, 1)]
        ));
    }
    out
}
