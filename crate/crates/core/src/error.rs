use thiserror::Error;

/// Errors raised by matrix construction, functional calculus and the perspective engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not Hermitian: max |X - X*| = {max_asymmetry:e} at ({row}, {col})")]
    NotHermitian {
        max_asymmetry: f64,
        row: usize,
        col: usize,
    },

    #[error("eigendecomposition did not converge for a {0}x{0} matrix")]
    Decomposition(usize),

    #[error("eigenvalue {eigenvalue:e} is outside the domain of `{function}` (must exceed {floor:e})")]
    OutOfDomain {
        function: String,
        eigenvalue: f64,
        floor: f64,
    },

    #[error("matrix is not positive definite: smallest eigenvalue {0:e}")]
    NotPositiveDefinite(f64),

    #[error("condition number {cond:e} exceeds cap {cap:e}")]
    ConditionCap { cond: f64, cap: f64 },

    #[error("matrices do not commute: ||AB - BA|| = {commutator:e} exceeds {bound:e}")]
    NonCommuting { commutator: f64, bound: f64 },

    #[error("black box is not scalar on (1, t*1) at t = {t}: off-diagonal {off_diagonal:e}, diagonal spread {spread:e}")]
    NonScalar {
        t: f64,
        off_diagonal: f64,
        spread: f64,
    },

    #[error("unknown function `{0}`")]
    UnknownFunction(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed matrix: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Errors caused by inputs leaving the positive definite domain or the
    /// conditioning limits, as opposed to malformed input.
    pub fn is_numeric_domain(&self) -> bool {
        matches!(
            self,
            Error::Decomposition(_)
                | Error::OutOfDomain { .. }
                | Error::NotPositiveDefinite(_)
                | Error::ConditionCap { .. }
                | Error::NonCommuting { .. }
                | Error::NonScalar { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
