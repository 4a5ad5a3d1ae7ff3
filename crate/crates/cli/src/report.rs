use std::fmt::Write;

use perspecta_core::catalog::CatalogEntry;
use perspecta_core::suite::{CheckConfig, CheckId, TrialReport};
use perspecta_core::HermitianMatrix;
use serde::{Deserialize, Serialize};

/// Failures listed per check in text output.
const TEXT_FAILURE_LIMIT: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    /// Checks that ran, in order.
    pub suite: Vec<CheckId>,
    /// Checks of `all` with no eligible function in the selection.
    pub skipped: Vec<CheckId>,
    pub check: CheckConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub config: ResolvedConfig,
    pub reports: Vec<TrialReport>,
    pub passed: bool,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    pub fn new(config: ResolvedConfig, reports: Vec<TrialReport>, wall_clock_seconds: f64) -> Self {
        let passed = reports.iter().all(|r| r.passed);
        RunReport {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            reports,
            passed,
            wall_clock_seconds,
        }
    }

    pub fn to_text(&self) -> String {
        let cfg = &self.config.check;
        let mut out = String::new();
        let _ = writeln!(out, "perspecta {}", self.tool_version);
        let _ = writeln!(
            out,
            "seed {}  order {}  dims {:?}  trials {}  tol {:.2e}",
            cfg.seed, cfg.order, cfg.dims, cfg.trials, cfg.tol
        );
        let _ = writeln!(out, "functions: {}", cfg.functions.join(", "));
        for r in &self.reports {
            let status = if r.passed { "PASS" } else { "FAIL" };
            let worst = r.worst_margin().map_or("n/a".to_string(), |m| format!("{m:.2e}"));
            let _ = writeln!(
                out,
                "{status}  {:<28} worst margin {:>10}  cells {:>3}  failures {}",
                r.check_id,
                worst,
                r.cells.len(),
                r.failure_count()
            );
            for cell in &r.cells {
                if let Some(w) = &cell.witness {
                    let _ = writeln!(
                        out,
                        "      witness {} d{} trial {} value {:.2e} at {}",
                        cell.f, cell.dim, w.trial, w.margin, w.seed_path
                    );
                }
            }
            let failures = r.cells.iter().flat_map(|c| c.failures.iter().map(move |f| (c, f)));
            for (cell, f) in failures.take(TEXT_FAILURE_LIMIT) {
                let detail = match (&f.error, f.margin) {
                    (Some(e), _) => e.clone(),
                    (None, Some(m)) => format!("margin {m:.2e}"),
                    (None, None) => String::new(),
                };
                let _ = writeln!(out, "      failed {} d{} trial {} at {}: {detail}", cell.f, cell.dim, f.trial, f.seed_path);
            }
        }
        if !self.config.skipped.is_empty() {
            let names: Vec<&str> = self.config.skipped.iter().map(|c| c.as_str()).collect();
            let _ = writeln!(out, "skipped (no eligible function): {}", names.join(", "));
        }
        let _ = write!(
            out,
            "overall {} in {:.1} s",
            if self.passed { "PASS" } else { "FAIL" },
            self.wall_clock_seconds
        );
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub relative_entropy: f64,
    pub trace_perspective_neg_log: f64,
    /// `trace_perspective_neg_log - relative_entropy`; zero for commuting pairs.
    pub gap: f64,
}

impl EntropyReport {
    pub fn new(relative_entropy: f64, trace_perspective_neg_log: f64) -> Self {
        EntropyReport {
            relative_entropy,
            trace_perspective_neg_log,
            gap: trace_perspective_neg_log - relative_entropy,
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "relative entropy            {:.12e}\ntrace of -log perspective   {:.12e}\ngap                         {:.3e}",
            self.relative_entropy, self.trace_perspective_neg_log, self.gap
        )
    }
}

fn format_entry(re: f64, im: f64) -> String {
    if im == 0.0 {
        format!("{re:>14.10}")
    } else {
        format!("{re:>14.10}{im:+.10}i")
    }
}

pub fn format_matrix(m: &HermitianMatrix) -> String {
    (0..m.dim())
        .map(|i| {
            (0..m.dim())
                .map(|j| {
                    let z = m.get(i, j);
                    format_entry(z.re, z.im)
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn format_list(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.6e}")).collect::<Vec<_>>().join(", ")
}

pub fn catalog_table(entries: &[CatalogEntry]) -> String {
    let mut out = format!("{:<12} {:<28} {:<9} description", "id", "classification", "monotone");
    for e in entries {
        let _ = write!(
            out,
            "\n{:<12} {:<28} {:<9} {}",
            e.id,
            e.classification.as_str(),
            if e.monotone { "yes" } else { "no" },
            e.description
        );
    }
    out
}
