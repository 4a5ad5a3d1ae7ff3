use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::RngStream;
use crate::error::Result;
use crate::matrix::HermitianMatrix;

use super::config::CheckConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub trial: usize,
    pub seed_path: String,
    /// Worst failing margin, or `None` when the trial raised an error.
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// A recorded counterexample (violation searches) or separating example.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub trial: usize,
    pub seed_path: String,
    pub margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub matrices: BTreeMap<String, HermitianMatrix>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub dim: usize,
    pub f: String,
    pub trials: usize,
    /// Smallest normalized margin over every assertion and trial; `None` if
    /// no trial completed.
    pub worst_margin: Option<f64>,
    /// Smallest normalized margin per named assertion.
    pub metrics: BTreeMap<String, f64>,
    pub failures: Vec<Failure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl CellReport {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub check_id: String,
    pub config: CheckConfig,
    pub cells: Vec<CellReport>,
    pub passed: bool,
}

impl TrialReport {
    /// Smallest value of a metric across all cells.
    pub fn worst_metric(&self, name: &str) -> Option<f64> {
        self.cells
            .iter()
            .filter_map(|c| c.metric(name))
            .min_by(f64::total_cmp)
    }

    pub fn worst_margin(&self) -> Option<f64> {
        self.cells
            .iter()
            .filter_map(|c| c.worst_margin)
            .min_by(f64::total_cmp)
    }

    pub fn failure_count(&self) -> usize {
        self.cells.iter().map(|c| c.failures.len()).sum()
    }

    pub fn cell(&self, dim: usize, f: &str) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.dim == dim && c.f == f)
    }
}

/// One named property evaluated in a trial. The trial passes the assertion
/// when `margin >= -threshold`; margins are normalized so that equality
/// checks report `-deviation / scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Assertion {
    pub name: &'static str,
    pub margin: f64,
    pub threshold: f64,
}

impl Assertion {
    pub fn new(name: &'static str, margin: f64, threshold: f64) -> Self {
        Assertion {
            name,
            margin,
            threshold,
        }
    }

    /// Equality check: `deviation <= threshold · scale`.
    pub fn deviation(name: &'static str, deviation: f64, scale: f64, threshold: f64) -> Self {
        Assertion::new(name, 0.0 - deviation / scale, threshold)
    }

    pub fn holds(&self) -> bool {
        self.margin >= -self.threshold
    }
}

/// Accumulates trial outcomes of one cell in trial-index order.
pub(crate) struct CellBuilder {
    report: CellReport,
}

impl CellBuilder {
    pub fn new(dim: usize, f: impl Into<String>) -> Self {
        CellBuilder {
            report: CellReport {
                dim,
                f: f.into(),
                trials: 0,
                worst_margin: None,
                metrics: BTreeMap::new(),
                failures: Vec::new(),
                witness: None,
            },
        }
    }

    pub fn record(&mut self, trial: usize, seed_path: String, outcome: Result<Vec<Assertion>>) {
        self.report.trials += 1;
        self.record_assertions(trial, seed_path, outcome);
    }

    /// Records assertions that belong to the cell as a whole without counting
    /// a trial.
    pub fn record_assertions(&mut self, trial: usize, seed_path: String, outcome: Result<Vec<Assertion>>) {
        let cell = &mut self.report;
        match outcome {
            Err(e) => cell.failures.push(Failure {
                trial,
                seed_path,
                margin: None,
                error: Some(e.to_string()),
            }),
            Ok(assertions) => {
                let mut failing: Option<f64> = None;
                for a in &assertions {
                    let m = a.margin;
                    cell.worst_margin = Some(cell.worst_margin.map_or(m, |w| w.min(m)));
                    cell.metrics
                        .entry(a.name.to_string())
                        .and_modify(|w| *w = w.min(m))
                        .or_insert(m);
                    if !a.holds() {
                        failing = Some(failing.map_or(m, |w| w.min(m)));
                    }
                }
                if let Some(margin) = failing {
                    cell.failures.push(Failure {
                        trial,
                        seed_path,
                        margin: Some(margin),
                        error: None,
                    });
                }
            }
        }
    }

    pub fn set_witness(&mut self, witness: Witness) {
        self.report.witness = Some(witness);
    }

    pub fn add_trials(&mut self, n: usize) {
        self.report.trials += n;
    }

    pub fn finish(self) -> CellReport {
        self.report
    }
}

/// Runs `trials` independent trials in parallel; trial `i` draws from
/// `base.child("t{i}")`. Results are merged in index order.
pub(crate) fn run_cell<F>(dim: usize, f: &str, trials: usize, base: &RngStream, trial_fn: F) -> CellReport
where
    F: Fn(usize, &RngStream) -> Result<Vec<Assertion>> + Sync,
{
    let outcomes: Vec<_> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let stream = base.child(format!("t{i}"));
            (stream.path_string(), trial_fn(i, &stream))
        })
        .collect();
    let mut cell = CellBuilder::new(dim, f);
    for (i, (path, outcome)) in outcomes.into_iter().enumerate() {
        cell.record(i, path, outcome);
    }
    cell.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn builder_tracks_worst_and_failures() {
        let mut b = CellBuilder::new(3, "f");
        b.record(0, "p/t0".into(), Ok(vec![Assertion::new("a", 0.5, 1e-8), Assertion::new("b", -1e-9, 1e-8)]));
        b.record(1, "p/t1".into(), Ok(vec![Assertion::new("a", -1e-3, 1e-8)]));
        b.record(2, "p/t2".into(), Err(Error::NotPositiveDefinite(-1.0)));
        let cell = b.finish();
        assert_eq!(cell.trials, 3);
        assert_eq!(cell.worst_margin, Some(-1e-3));
        assert_eq!(cell.metric("a"), Some(-1e-3));
        assert_eq!(cell.metric("b"), Some(-1e-9));
        assert_eq!(cell.failures.len(), 2);
        assert_eq!(cell.failures[0].trial, 1);
        assert_eq!(cell.failures[1].margin, None);
        assert!(cell.failures[1].error.is_some());
    }

    #[test]
    fn run_cell_is_ordered() {
        let base = RngStream::new(1).child("x");
        let cell = run_cell(2, "f", 100, &base, |i, _| Ok(vec![Assertion::new("m", -(i as f64), 50.5)]));
        assert_eq!(cell.failures.iter().map(|f| f.trial).collect::<Vec<_>>(), (51..100).collect::<Vec<_>>());
        assert_eq!(cell.failures[0].seed_path, "x/t51");
    }
}
