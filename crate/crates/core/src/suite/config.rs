use serde::{Deserialize, Serialize};

use crate::catalog::{lookup, ScalarFunction};
use crate::error::{Error, Result};
use crate::perspective::PerspectiveOrder;

/// Functions exercised by a default run: the operator convex targets, an
/// affine baseline and the two non-operator-convex controls.
pub const DEFAULT_FUNCTIONS: [&str; 9] = [
    "identity",
    "neg_log",
    "t_log_t",
    "inv",
    "square",
    "pow(1.5)",
    "pow(-0.5)",
    "cube",
    "quart",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomLambda {
    Random,
}

/// Convex-combination weight: a fixed value or a fresh uniform draw per trial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSample {
    Fixed(f64),
    Random(RandomLambda),
}

impl LambdaSample {
    pub const RANDOM: LambdaSample = LambdaSample::Random(RandomLambda::Random);
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub dims: Vec<usize>,
    /// Trials per (dim, function) cell.
    pub trials: usize,
    pub tol: f64,
    /// Trial `i` uses `lambda_samples[i % len]`.
    pub lambda_samples: Vec<LambdaSample>,
    pub seed: u64,
    pub functions: Vec<String>,
    pub order: PerspectiveOrder,
    /// Condition number target of the random positive definite inputs.
    pub cond_target: f64,
    /// Trial budget per function for violation searches.
    pub search_budget: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            dims: (2..=6).collect(),
            trials: 200,
            tol: 1e-8,
            lambda_samples: vec![
                LambdaSample::Fixed(0.5),
                LambdaSample::Fixed(0.25),
                LambdaSample::Fixed(0.1),
                LambdaSample::RANDOM,
            ],
            seed: 42,
            functions: DEFAULT_FUNCTIONS.iter().map(|s| s.to_string()).collect(),
            order: PerspectiveOrder::WeightFirst,
            cond_target: 100.0,
            search_budget: 5000,
        }
    }
}

impl CheckConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.dims.is_empty() {
            return bad("at least one dimension is required".into());
        }
        if let Some(d) = self.dims.iter().find(|d| !(1..=16).contains(*d)) {
            return bad(format!("dimension {d} is outside 1..=16"));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.lambda_samples.is_empty() {
            return bad("at least one lambda sample is required".into());
        }
        for l in &self.lambda_samples {
            if let LambdaSample::Fixed(v) = l {
                if !(0.0..=1.0).contains(v) {
                    return bad(format!("lambda {v} is outside [0, 1]"));
                }
            }
        }
        if !(self.cond_target >= 1.0 && self.cond_target.is_finite()) {
            return bad(format!("cond_target must be >= 1, got {}", self.cond_target));
        }
        if self.search_budget == 0 {
            return bad("search_budget must be at least 1".into());
        }
        self.resolve_functions()?;
        Ok(())
    }

    pub fn resolve_functions(&self) -> Result<Vec<ScalarFunction>> {
        self.functions.iter().map(|id| lookup(id)).collect()
    }

    pub fn with_functions(mut self, ids: &[&str]) -> Self {
        self.functions = ids.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn with_dims(mut self, dims: impl IntoIterator<Item = usize>) -> Self {
        self.dims = dims.into_iter().collect();
        self
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_order(mut self, order: PerspectiveOrder) -> Self {
        self.order = order;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}
