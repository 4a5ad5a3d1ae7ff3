//! Seeded randomized checks of perspective properties.
//!
//! Every check draws its inputs from the stream
//! `seed / check_id / function / d{dim} / t{trial}`, so any failing trial
//! can be re-drawn from its recorded `seed_path` alone.

mod checks;
mod config;
mod reconstruct;
mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::Classification;
use crate::error::{Error, Result};

pub use checks::*;
pub use config::{CheckConfig, LambdaSample, RandomLambda, DEFAULT_FUNCTIONS};
pub use reconstruct::{log_grid, reconstruct_scalar, BlackBox, GridInterpolant, MonotoneCubic, Ordinate};
pub use report::{Assertion, CellReport, Failure, TrialReport, Witness};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckId {
    JointConvexity,
    JensenDecomposition,
    Homogeneity,
    UnitaryInvariance,
    BlockDiagonal,
    BlockUnitaryIdentity,
    TransformerInequality,
    TransformerEquality,
    FiniteRankFormula,
    Reconstruction,
    GeometricMeanConcavity,
    RelativeEntropyCommuting,
    DetectViolationControl,
}

/// Which catalog entries a check runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Eligibility {
    /// Operator convex, concave or affine functions.
    Convexity,
    Any,
    Controls,
    /// The check has fixed subjects and ignores the function list.
    Fixed,
}

impl CheckId {
    pub const ALL: [CheckId; 13] = [
        CheckId::JointConvexity,
        CheckId::JensenDecomposition,
        CheckId::Homogeneity,
        CheckId::UnitaryInvariance,
        CheckId::BlockDiagonal,
        CheckId::BlockUnitaryIdentity,
        CheckId::TransformerInequality,
        CheckId::TransformerEquality,
        CheckId::FiniteRankFormula,
        CheckId::Reconstruction,
        CheckId::GeometricMeanConcavity,
        CheckId::RelativeEntropyCommuting,
        CheckId::DetectViolationControl,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckId::JointConvexity => "joint_convexity",
            CheckId::JensenDecomposition => "jensen_decomposition",
            CheckId::Homogeneity => "homogeneity",
            CheckId::UnitaryInvariance => "unitary_invariance",
            CheckId::BlockDiagonal => "block_diagonal",
            CheckId::BlockUnitaryIdentity => "block_unitary_identity",
            CheckId::TransformerInequality => "transformer_inequality",
            CheckId::TransformerEquality => "transformer_equality",
            CheckId::FiniteRankFormula => "finite_rank_formula",
            CheckId::Reconstruction => "reconstruction",
            CheckId::GeometricMeanConcavity => "geometric_mean_concavity",
            CheckId::RelativeEntropyCommuting => "relative_entropy_commuting",
            CheckId::DetectViolationControl => "detect_violation_control",
        }
    }

    pub fn eligibility(self) -> Eligibility {
        match self {
            CheckId::JointConvexity | CheckId::JensenDecomposition | CheckId::TransformerInequality => {
                Eligibility::Convexity
            }
            CheckId::Homogeneity
            | CheckId::UnitaryInvariance
            | CheckId::BlockDiagonal
            | CheckId::TransformerEquality
            | CheckId::FiniteRankFormula
            | CheckId::Reconstruction => Eligibility::Any,
            CheckId::DetectViolationControl => Eligibility::Controls,
            CheckId::BlockUnitaryIdentity | CheckId::GeometricMeanConcavity | CheckId::RelativeEntropyCommuting => {
                Eligibility::Fixed
            }
        }
    }

    /// Whether the configured function list contains anything this check
    /// runs on.
    pub fn applies_to(self, cfg: &CheckConfig) -> Result<bool> {
        let functions = cfg.resolve_functions()?;
        Ok(match self.eligibility() {
            Eligibility::Fixed => true,
            Eligibility::Any => !functions.is_empty(),
            Eligibility::Convexity => functions.iter().any(|f| f.classification().convex_direction().is_some()),
            Eligibility::Controls => functions
                .iter()
                .any(|f| f.classification() == Classification::ControlNotOperatorConvex),
        })
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CheckId::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown check '{s}'")))
    }
}

pub fn run_check(id: CheckId, cfg: &CheckConfig) -> Result<TrialReport> {
    cfg.validate()?;
    match id {
        CheckId::JointConvexity => check_joint_convexity(cfg),
        CheckId::JensenDecomposition => check_jensen_decomposition(cfg),
        CheckId::Homogeneity => check_homogeneity(cfg),
        CheckId::UnitaryInvariance => check_unitary_invariance(cfg),
        CheckId::BlockDiagonal => check_block_diagonal(cfg),
        CheckId::BlockUnitaryIdentity => check_block_unitary_identity(cfg),
        CheckId::TransformerInequality => check_transformer_inequality(cfg),
        CheckId::TransformerEquality => check_transformer_equality(cfg),
        CheckId::FiniteRankFormula => check_finite_rank_formula(cfg),
        CheckId::Reconstruction => check_reconstruction(cfg),
        CheckId::GeometricMeanConcavity => check_geometric_mean_concavity(cfg),
        CheckId::RelativeEntropyCommuting => check_relative_entropy_commuting(cfg),
        CheckId::DetectViolationControl => check_detect_violation_control(cfg),
    }
}

/// Runs every check in `ids` that applies to the configured functions, in
/// the given order.
pub fn run_suite(ids: &[CheckId], cfg: &CheckConfig) -> Result<Vec<TrialReport>> {
    cfg.validate()?;
    let mut reports = Vec::new();
    for &id in ids {
        if id.applies_to(cfg)? {
            reports.push(run_check(id, cfg)?);
        }
    }
    Ok(reports)
}
