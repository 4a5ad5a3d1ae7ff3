//! Non-commutative perspectives of operator convex functions on positive
//! definite matrices, together with a seeded randomized suite that checks
//! their convexity, regularity and transformer properties in the Loewner
//! order.
//!
//! For an operator convex `f` on `(0, ∞)` and positive definite `A`, `B`:
//!
//! ```text
//! weight_second:  B^{1/2} f(B^{-1/2} A B^{-1/2}) B^{1/2}
//! weight_first:   A^{1/2} f(A^{-1/2} B A^{-1/2}) A^{1/2}
//! ```

pub mod catalog;
pub mod ensembles;
pub mod error;
pub mod io;
pub mod matrix;
pub mod perspective;
mod search;
pub mod suite;

pub use catalog::{catalog, lookup, Classification, ScalarFunction};
pub use error::{Error, Result};
pub use matrix::{
    apply_function, congruence, eig, hermitize, inv_sqrt_pd, loewner_leq, sqrt_pd, CMatrix, HermitianMatrix,
    LoewnerComparison, PdMatrix, SpectralDecomposition,
};
pub use perspective::{
    geometric_mean, perspective, perspective_commuting_oracle, quadratic_congruence, relative_entropy,
    trace_perspective_neg_log, PerspectiveOrder, PerspectiveResult,
};
