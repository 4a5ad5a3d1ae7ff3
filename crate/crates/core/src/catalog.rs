//! Scalar functions on the positive half-line, tagged with their operator
//! convexity class, and an empirical midpoint tester for that class.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ensembles::{hermitian_with_spectrum, log_uniform, EnsembleConfig, RngStream, RETRY_CAP};
use crate::error::{Error, Result};
use crate::matrix::{apply_function, eig, loewner_leq, HermitianMatrix, LoewnerComparison};
use crate::search::first_hit;

/// Smallest eigenvalue accepted when sampling for the midpoint tester.
pub const DEFAULT_DOMAIN_FLOOR: f64 = 1e-8;
/// Spectra drawn by the midpoint tester lie in this interval.
pub const SAMPLE_SPECTRUM: (f64, f64) = (1e-2, 1e2);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    OperatorConvex,
    OperatorConcave,
    Affine,
    ControlNotOperatorConvex,
}

impl Classification {
    pub const ALL: [Classification; 4] = [
        Classification::OperatorConvex,
        Classification::OperatorConcave,
        Classification::Affine,
        Classification::ControlNotOperatorConvex,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Classification::OperatorConvex => "operator_convex",
            Classification::OperatorConcave => "operator_concave",
            Classification::Affine => "affine",
            Classification::ControlNotOperatorConvex => "control_not_operator_convex",
        }
    }

    /// Whether the perspective satisfies the convex (`Some(true)`) or concave
    /// (`Some(false)`) Jensen-type inequalities. Affine functions count as
    /// convex. Control functions satisfy neither.
    pub fn convex_direction(self) -> Option<bool> {
        match self {
            Classification::OperatorConvex | Classification::Affine => Some(true),
            Classification::OperatorConcave => Some(false),
            Classification::ControlNotOperatorConvex => None,
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Classification {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Classification::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown classification `{s}`")))
    }
}

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A real function on `(0, ∞)` with its operator convexity class.
#[derive(Clone)]
pub struct ScalarFunction {
    id: String,
    classification: Classification,
    monotone: bool,
    description: String,
    evaluator: Evaluator,
}

impl ScalarFunction {
    pub fn new(
        id: impl Into<String>,
        classification: Classification,
        monotone: bool,
        description: impl Into<String>,
        evaluator: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ScalarFunction {
            id: id.into(),
            classification,
            monotone,
            description: description.into(),
            evaluator: Arc::new(evaluator),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn classification(&self) -> Classification {
        self.classification
    }

    /// Operator monotone (non-decreasing).
    pub fn monotone(&self) -> bool {
        self.monotone
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.evaluator)(t)
    }
}

impl fmt::Debug for ScalarFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarFunction")
            .field("id", &self.id)
            .field("classification", &self.classification)
            .field("monotone", &self.monotone)
            .finish()
    }
}

/// Row of the catalog listing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: String,
    pub classification: Classification,
    pub monotone: bool,
    pub description: String,
}

impl From<&ScalarFunction> for CatalogEntry {
    fn from(f: &ScalarFunction) -> Self {
        CatalogEntry {
            id: f.id.clone(),
            classification: f.classification,
            monotone: f.monotone,
            description: f.description.clone(),
        }
    }
}

fn power_class(p: f64) -> (Classification, bool) {
    if p == 0.0 || p == 1.0 {
        (Classification::Affine, true)
    } else if (-1.0..0.0).contains(&p) || (1.0..=2.0).contains(&p) {
        (Classification::OperatorConvex, false)
    } else if p > 0.0 && p < 1.0 {
        (Classification::OperatorConcave, true)
    } else {
        (Classification::ControlNotOperatorConvex, false)
    }
}

/// `t ↦ t^p`. Non-integer exponents are evaluated as `exp(p·ln t)`.
pub fn power(p: f64) -> ScalarFunction {
    let (class, monotone) = power_class(p);
    let eval: Evaluator = if p.fract() == 0.0 && p.abs() <= 64.0 {
        let k = p as i32;
        Arc::new(move |t: f64| t.powi(k))
    } else {
        Arc::new(move |t: f64| (p * t.ln()).exp())
    };
    ScalarFunction {
        id: format!("pow({p})"),
        classification: class,
        monotone,
        description: format!("f(t) = t^{p}"),
        evaluator: eval,
    }
}

fn named(id: &str, power_p: f64, description: &str) -> ScalarFunction {
    let mut f = power(power_p);
    f.id = id.to_string();
    f.description = description.to_string();
    f
}

/// All built-in functions, in listing order.
pub fn catalog() -> Vec<ScalarFunction> {
    use Classification::*;
    vec![
        ScalarFunction::new("identity", Affine, true, "f(t) = t", |t| t),
        ScalarFunction::new("const_one", Affine, true, "f(t) = 1", |_| 1.0),
        ScalarFunction::new("neg_log", OperatorConvex, false, "f(t) = -log t", |t: f64| -t.ln()),
        ScalarFunction::new("t_log_t", OperatorConvex, false, "f(t) = t log t", |t: f64| t * t.ln()),
        ScalarFunction::new("inv", OperatorConvex, false, "f(t) = 1/t", |t| 1.0 / t),
        ScalarFunction::new("square", OperatorConvex, false, "f(t) = t^2", |t| t * t),
        power(-0.5),
        power(1.5),
        ScalarFunction::new("sqrt", OperatorConcave, true, "f(t) = t^(1/2)", f64::sqrt),
        power(0.25),
        named("cube", 3.0, "f(t) = t^3, not operator convex"),
        named("quart", 4.0, "f(t) = t^4, not operator convex"),
    ]
}

/// Looks up a catalog id; `pow(p)` is accepted for any finite `p`.
pub fn lookup(id: &str) -> Result<ScalarFunction> {
    if let Some(f) = catalog().into_iter().find(|f| f.id == id) {
        return Ok(f);
    }
    if let Some(arg) = id.strip_prefix("pow(").and_then(|s| s.strip_suffix(')')) {
        if let Ok(p) = arg.trim().parse::<f64>() {
            if p.is_finite() {
                return Ok(power(p));
            }
        }
    }
    Err(Error::UnknownFunction(id.to_string()))
}

/// Evidence that `f` violates midpoint operator convexity (or concavity).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityWitness {
    pub dim: usize,
    pub seed: u64,
    pub trial: usize,
    pub seed_path: String,
    pub h: HermitianMatrix,
    pub k: HermitianMatrix,
    /// Loewner margin divided by its scale.
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityVerdict {
    pub violated: bool,
    pub witness: Option<ConvexityWitness>,
    pub trials_run: usize,
}

fn midpoint_stream(f: &ScalarFunction, seed: u64, dim: usize, trial: usize) -> RngStream {
    RngStream::new(seed)
        .child("midpoint")
        .child(f.id())
        .child(format!("d{dim}"))
        .child(format!("t{trial}"))
}

fn sample_in_domain(cfg: &EnsembleConfig, stream: &RngStream) -> Result<(HermitianMatrix, HermitianMatrix)> {
    let mut rng = stream.rng();
    let (lo, hi) = SAMPLE_SPECTRUM;
    let mut draw = || -> Result<HermitianMatrix> {
        let mut shift = 0.0;
        for _ in 0..RETRY_CAP {
            let spectrum: Vec<f64> = (0..cfg.dim).map(|_| log_uniform(lo, hi, &mut rng) + shift).collect();
            let h = hermitian_with_spectrum(cfg, &spectrum, &mut rng)?;
            let min = eig(&h)?.min();
            if min > DEFAULT_DOMAIN_FLOOR {
                return Ok(h);
            }
            shift += lo;
        }
        Err(Error::OutOfDomain {
            function: "midpoint sampler".into(),
            eigenvalue: f64::NAN,
            floor: DEFAULT_DOMAIN_FLOOR,
        })
    };
    let h = draw()?;
    let k = draw()?;
    Ok((h, k))
}

fn midpoint_comparison(
    f: &ScalarFunction,
    h: &HermitianMatrix,
    k: &HermitianMatrix,
    tol: f64,
) -> Result<LoewnerComparison> {
    let mid = (h + k).scale(0.5);
    let lhs = apply_function(f, &mid, DEFAULT_DOMAIN_FLOOR)?;
    let rhs = (&apply_function(f, h, DEFAULT_DOMAIN_FLOOR)? + &apply_function(f, k, DEFAULT_DOMAIN_FLOOR)?).scale(0.5);
    match f.classification().convex_direction() {
        Some(false) => loewner_leq(&rhs, &lhs, tol),
        _ => loewner_leq(&lhs, &rhs, tol),
    }
}

/// Re-runs one midpoint trial from its seed, returning the sampled pair and
/// the comparison.
pub fn replay_midpoint_trial(
    f: &ScalarFunction,
    dim: usize,
    seed: u64,
    trial: usize,
    tol: f64,
) -> Result<(HermitianMatrix, HermitianMatrix, LoewnerComparison)> {
    let cfg = EnsembleConfig::new(dim);
    let (h, k) = sample_in_domain(&cfg, &midpoint_stream(f, seed, dim, trial))?;
    let cmp = midpoint_comparison(f, &h, &k, tol)?;
    Ok((h, k, cmp))
}

/// Samples Hermitian pairs `(H, K)` with spectra in [`SAMPLE_SPECTRUM`] and
/// tests `f((H+K)/2) ≼ (f(H)+f(K))/2` (reversed for operator concave `f`).
/// Trial `i` uses dimension `dims[i % dims.len()]`. Returns the first
/// violation found.
pub fn midpoint_operator_convexity_test(
    f: &ScalarFunction,
    dims: &[usize],
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<ConvexityVerdict> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if dims.is_empty() || dims.iter().any(|d| !(1..=16).contains(d)) {
        return Err(Error::InvalidArgument("dims must be a non-empty subset of 1..=16".into()));
    }
    let outcome = |i: usize| -> Option<Result<ConvexityWitness>> {
        let dim = dims[i % dims.len()];
        match replay_midpoint_trial(f, dim, seed, i, tol) {
            Err(e) => Some(Err(e)),
            Ok((_, _, cmp)) if cmp.holds => None,
            Ok((h, k, cmp)) => Some(Ok(ConvexityWitness {
                dim,
                seed,
                trial: i,
                seed_path: midpoint_stream(f, seed, dim, i).path_string(),
                h,
                k,
                margin: cmp.relative_margin(),
            })),
        }
    };
    let (hit, trials_run) = first_hit(trials, outcome);
    match hit {
        None => Ok(ConvexityVerdict {
            violated: false,
            witness: None,
            trials_run,
        }),
        Some((_, Err(e))) => Err(e),
        Some((_, Ok(w))) => Ok(ConvexityVerdict {
            violated: true,
            witness: Some(w),
            trials_run,
        }),
    }
}
