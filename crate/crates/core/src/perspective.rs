//! Non-commutative perspectives and the objects derived from them: relative
//! entropy, the geometric mean and the `A B⁻¹ A` congruence.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{lookup, ScalarFunction};
use crate::error::{Error, Result};
use crate::matrix::{
    c, eig, hermitize, inv_sqrt_pd, map_decomposition, map_spectrum, operator_norm, same_dim, sqrt_pd,
    HermitianMatrix, PdMatrix,
};

/// Inner eigenvalues below `INNER_FLOOR · λ_max(inner)` are rejected.
pub const INNER_FLOOR: f64 = 1e-12;
/// Relative commutator bound accepted by the commuting oracle.
pub const COMMUTING_TOL: f64 = 1e-10;

/// Which argument carries the square-root weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerspectiveOrder {
    /// `B^{1/2} f(B^{-1/2} A B^{-1/2}) B^{1/2}`.
    WeightSecond,
    /// `A^{1/2} f(A^{-1/2} B A^{-1/2}) A^{1/2}`.
    WeightFirst,
}

impl PerspectiveOrder {
    pub const BOTH: [PerspectiveOrder; 2] = [PerspectiveOrder::WeightFirst, PerspectiveOrder::WeightSecond];

    pub fn as_str(self) -> &'static str {
        match self {
            PerspectiveOrder::WeightSecond => "weight_second",
            PerspectiveOrder::WeightFirst => "weight_first",
        }
    }

    /// `(weight, inner)` arguments of the pair `(a, b)`.
    pub fn split<'a, T>(self, a: &'a T, b: &'a T) -> (&'a T, &'a T) {
        match self {
            PerspectiveOrder::WeightSecond => (b, a),
            PerspectiveOrder::WeightFirst => (a, b),
        }
    }
}

impl Default for PerspectiveOrder {
    fn default() -> Self {
        PerspectiveOrder::WeightFirst
    }
}

impl fmt::Display for PerspectiveOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PerspectiveOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weight_second" => Ok(PerspectiveOrder::WeightSecond),
            "weight_first" => Ok(PerspectiveOrder::WeightFirst),
            _ => Err(Error::InvalidArgument(format!(
                "unknown order `{s}` (expected weight_first or weight_second)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerspectiveResult {
    pub value: HermitianMatrix,
    /// Ascending eigenvalues of the conjugated middle argument.
    pub inner_spectrum: Vec<f64>,
    pub order: PerspectiveOrder,
}

/// `W^{1/2} f(W^{-1/2} X W^{-1/2}) W^{1/2}` where `(W, X)` is `(B, A)` for
/// [`PerspectiveOrder::WeightSecond`] and `(A, B)` for
/// [`PerspectiveOrder::WeightFirst`].
pub fn perspective(
    f: &ScalarFunction,
    a: &PdMatrix,
    b: &PdMatrix,
    order: PerspectiveOrder,
) -> Result<PerspectiveResult> {
    same_dim(a.dim(), b.dim())?;
    let (weight, inner_arg) = order.split(a, b);
    let root = sqrt_pd(weight)?;
    let inv_root = inv_sqrt_pd(weight)?;
    let inner = hermitize(&(inv_root.matrix() * inner_arg.matrix() * inv_root.matrix()))?;
    let dec = eig(&inner)?;
    let floor = INNER_FLOOR * dec.max().abs();
    let mapped = map_decomposition(f.id(), &dec, floor.max(0.0), |t| f.eval(t))?;
    let value = hermitize(&(root.matrix() * mapped.matrix() * root.matrix()))?;
    Ok(PerspectiveResult {
        value,
        inner_spectrum: dec.eigenvalues,
        order,
    })
}

/// Scalar perspective `s·f(t/s)` (weight on `s`).
pub fn scalar_perspective(f: &ScalarFunction, t: f64, s: f64) -> f64 {
    s * f.eval(t / s)
}

/// Perspective of a commuting pair through a common eigenbasis.
///
/// The basis is taken from `A + γB` for a fixed irrational `γ`; a
/// degeneracy of that combination means both matrices are scalar on the
/// eigenspace, apart from accidental coincidences.
pub fn perspective_commuting_oracle(
    f: &ScalarFunction,
    a: &PdMatrix,
    b: &PdMatrix,
    order: PerspectiveOrder,
) -> Result<HermitianMatrix> {
    same_dim(a.dim(), b.dim())?;
    let comm = a.matrix() * b.matrix() - b.matrix() * a.matrix();
    let commutator = operator_norm(&comm);
    let bound = COMMUTING_TOL * a.eigmax() * b.eigmax();
    if commutator > bound {
        return Err(Error::NonCommuting { commutator, bound });
    }
    const GAMMA: f64 = std::f64::consts::SQRT_2 / std::f64::consts::E;
    let combo = hermitize(&(a.matrix() + b.matrix() * c(GAMMA)))?;
    let q = eig(&combo)?.eigenvectors;
    let diag_of = |m: &PdMatrix| -> Vec<f64> {
        let d = q.adjoint() * m.matrix() * &q;
        (0..d.nrows()).map(|i| d[(i, i)].re).collect()
    };
    let (av, bv) = (diag_of(a), diag_of(b));
    let values: Vec<f64> = av
        .iter()
        .zip(&bv)
        .map(|(&ai, &bi)| match order {
            PerspectiveOrder::WeightSecond => bi * f.eval(ai / bi),
            PerspectiveOrder::WeightFirst => ai * f.eval(bi / ai),
        })
        .collect();
    Ok(crate::ensembles::conjugate_diagonal(&q, &values))
}

/// Geometric mean `A # B = A^{1/2}(A^{-1/2} B A^{-1/2})^{1/2} A^{1/2}`.
pub fn geometric_mean(a: &PdMatrix, b: &PdMatrix) -> Result<PdMatrix> {
    let sqrt = lookup("sqrt")?;
    PdMatrix::new(perspective(&sqrt, a, b, PerspectiveOrder::WeightFirst)?.value)
}

/// `Tr(A log A) - Tr(A log B)` with the natural logarithm, unnormalized.
pub fn relative_entropy(a: &PdMatrix, b: &PdMatrix) -> Result<f64> {
    same_dim(a.dim(), b.dim())?;
    let log_a = map_spectrum("log", a.as_hermitian(), 0.0, f64::ln)?;
    let log_b = map_spectrum("log", b.as_hermitian(), 0.0, f64::ln)?;
    let diff = log_a.matrix() - log_b.matrix();
    let prod = a.matrix() * diff;
    Ok(prod.trace().re)
}

/// `Tr(-A^{1/2} log(A^{-1/2} B A^{-1/2}) A^{1/2})`.
pub fn trace_perspective_neg_log(a: &PdMatrix, b: &PdMatrix) -> Result<f64> {
    let neg_log = lookup("neg_log")?;
    Ok(perspective(&neg_log, a, b, PerspectiveOrder::WeightFirst)?.value.trace())
}

/// `A B⁻¹ A`, hermitized.
pub fn quadratic_congruence(a: &PdMatrix, b: &PdMatrix) -> Result<HermitianMatrix> {
    same_dim(a.dim(), b.dim())?;
    let b_inv = b.inverse()?;
    hermitize(&(a.matrix() * b_inv.matrix() * a.matrix()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{random_commuting_pd_pair, random_pd, EnsembleConfig, RngStream};

    fn pd(rows: &[&[f64]]) -> PdMatrix {
        PdMatrix::new(HermitianMatrix::from_real_rows(rows).unwrap()).unwrap()
    }

    fn scale_of(h: &HermitianMatrix) -> f64 {
        h.spectral_norm().unwrap().max(1.0)
    }

    #[test]
    fn identity_and_constant() {
        let mut rng = RngStream::new(1).child("p").rng();
        let cfg = EnsembleConfig::new(4);
        let a = random_pd(&cfg, &mut rng).unwrap();
        let b = random_pd(&cfg, &mut rng).unwrap();
        let p = perspective(&lookup("identity").unwrap(), &a, &b, PerspectiveOrder::WeightSecond).unwrap();
        assert!(p.value.max_abs_diff(a.as_hermitian()) <= 1e-12 * scale_of(&p.value));
        let p = perspective(&lookup("const_one").unwrap(), &a, &b, PerspectiveOrder::WeightSecond).unwrap();
        assert!(p.value.max_abs_diff(b.as_hermitian()) <= 1e-12 * scale_of(&p.value));
        assert!(p.inner_spectrum.iter().all(|&x| x > 0.0));
        assert!(p.inner_spectrum.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn scalar_neg_log_example() {
        let a = PdMatrix::from_diagonal(&[2.0]).unwrap();
        let b = PdMatrix::from_diagonal(&[1.0]).unwrap();
        let f = lookup("neg_log").unwrap();
        let p = perspective(&f, &a, &b, PerspectiveOrder::WeightFirst).unwrap();
        // t log t - t log s at (t, s) = (2, 1)
        let oracle = 2.0 * 2f64.ln() - 2.0 * 1f64.ln();
        assert!((p.value.get(0, 0).re - oracle).abs() < 1e-15);
        assert!((oracle - 1.3862943611198906).abs() < 1e-15);
    }

    #[test]
    fn neg_log_of_equal_arguments_vanishes() {
        let a = pd(&[&[3.0, 1.0], &[1.0, 2.0]]);
        let f = lookup("neg_log").unwrap();
        for order in PerspectiveOrder::BOTH {
            let p = perspective(&f, &a, &a, order).unwrap();
            assert!(p.value.max_abs() < 1e-14);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let f = lookup("inv").unwrap();
        let err = perspective(&f, &PdMatrix::identity(2), &PdMatrix::identity(3), PerspectiveOrder::WeightFirst)
            .unwrap_err();
        assert_eq!(err, Error::DimensionMismatch(2, 3));
    }

    #[test]
    fn scalar_consistency_dim_one() {
        let mut rng = RngStream::new(2).child("dim1").rng();
        let cfg = EnsembleConfig::new(1);
        for f in crate::catalog::catalog() {
            for _ in 0..20 {
                let a = random_pd(&cfg, &mut rng).unwrap();
                let b = random_pd(&cfg, &mut rng).unwrap();
                let (t, s) = (a.eigmin(), b.eigmin());
                let p = perspective(&f, &a, &b, PerspectiveOrder::WeightSecond).unwrap();
                let expected = scalar_perspective(&f, t, s);
                let got = p.value.get(0, 0).re;
                assert!((got - expected).abs() <= 1e-12 * expected.abs().max(1.0), "{}", f.id());
            }
        }
    }

    #[test]
    fn commuting_oracle_examples() {
        let f = lookup("neg_log").unwrap();
        let a = PdMatrix::from_diagonal(&[2.0, 4.0]).unwrap();
        let b = PdMatrix::identity(2);
        let o = perspective_commuting_oracle(&f, &a, &b, PerspectiveOrder::WeightFirst).unwrap();
        let expected = HermitianMatrix::from_diagonal(&[2.0 * 2f64.ln(), 4.0 * 4f64.ln()]).unwrap();
        assert!(o.max_abs_diff(&expected) < 1e-14);

        let a = pd(&[&[3.0, 1.0], &[1.0, 2.0]]);
        let o = perspective_commuting_oracle(&lookup("square").unwrap(), &a, &a, PerspectiveOrder::WeightFirst)
            .unwrap();
        assert!(o.max_abs_diff(a.as_hermitian()) < 1e-13);

        let (t, s) = (3.0, 0.5);
        let f = lookup("t_log_t").unwrap();
        let o = perspective_commuting_oracle(
            &f,
            &PdMatrix::scaled_identity(3, t),
            &PdMatrix::scaled_identity(3, s),
            PerspectiveOrder::WeightSecond,
        )
        .unwrap();
        let expected = HermitianMatrix::identity(3).scale(s * f.eval(t / s));
        assert!(o.max_abs_diff(&expected) < 1e-13);
    }

    #[test]
    fn commuting_oracle_rejects_non_commuting() {
        let a = pd(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let b = PdMatrix::from_diagonal(&[1.0, 3.0]).unwrap();
        let err = perspective_commuting_oracle(&lookup("inv").unwrap(), &a, &b, PerspectiveOrder::WeightFirst)
            .unwrap_err();
        assert!(matches!(err, Error::NonCommuting { .. }));
    }

    #[test]
    fn commuting_consistency_for_catalog() {
        let mut rng = RngStream::new(3).child("comm").rng();
        for f in crate::catalog::catalog() {
            for dim in 1..=5 {
                let (a, b) = random_commuting_pd_pair(&EnsembleConfig::new(dim), &mut rng).unwrap();
                for order in PerspectiveOrder::BOTH {
                    let p = perspective(&f, &a, &b, order).unwrap().value;
                    let o = perspective_commuting_oracle(&f, &a, &b, order).unwrap();
                    let scale = scale_of(&p).max(scale_of(&o));
                    assert!(p.max_abs_diff(&o) <= 1e-9 * scale, "{} {order}", f.id());
                }
            }
        }
    }

    #[test]
    fn geometric_mean_examples() {
        let a = PdMatrix::from_diagonal(&[4.0]).unwrap();
        let b = PdMatrix::from_diagonal(&[9.0]).unwrap();
        assert!((geometric_mean(&a, &b).unwrap().eigmin() - 6.0).abs() < 1e-14);

        let a = pd(&[&[3.0, 1.0], &[1.0, 2.0]]);
        let m = geometric_mean(&a, &a).unwrap();
        assert!(m.as_hermitian().max_abs_diff(a.as_hermitian()) < 1e-13);
    }

    #[test]
    fn geometric_mean_solves_riccati() {
        let mut rng = RngStream::new(4).child("gm").rng();
        let cfg = EnsembleConfig::new(3);
        for _ in 0..20 {
            let a = random_pd(&cfg, &mut rng).unwrap();
            let b = random_pd(&cfg, &mut rng).unwrap();
            let x = geometric_mean(&a, &b).unwrap();
            // X A⁻¹ X = B by direct multiplication
            let a_inv = a.matrix().clone().try_inverse().unwrap();
            let lhs = x.matrix() * a_inv * x.matrix();
            let scale = b.eigmax().max(1.0);
            assert!(crate::matrix::max_abs_diff(&lhs, b.matrix()) <= 1e-7 * scale);
            let y = geometric_mean(&b, &a).unwrap();
            assert!(x.as_hermitian().max_abs_diff(y.as_hermitian()) <= 1e-8 * x.eigmax().max(1.0));
        }
    }

    #[test]
    fn relative_entropy_examples() {
        let a = pd(&[&[3.0, 1.0], &[1.0, 2.0]]);
        assert!(relative_entropy(&a, &a).unwrap().abs() < 1e-14);
        let a = PdMatrix::from_diagonal(&[2.0]).unwrap();
        let b = PdMatrix::from_diagonal(&[1.0]).unwrap();
        assert!((relative_entropy(&a, &b).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-15);
        let a = PdMatrix::from_diagonal(&[1.0, 2.0]).unwrap();
        let b = PdMatrix::from_diagonal(&[2.0, 1.0]).unwrap();
        let oracle = 1.0 * (0.5f64).ln() + 2.0 * 2f64.ln();
        assert!((relative_entropy(&a, &b).unwrap() - oracle).abs() < 1e-15);
        assert!((oracle - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn trace_perspective_matches_entropy_on_commuting_pairs() {
        let a = pd(&[&[3.0, 1.0], &[1.0, 2.0]]);
        assert!(trace_perspective_neg_log(&a, &a).unwrap().abs() < 1e-14);
        let mut rng = RngStream::new(5).child("re").rng();
        for dim in 1..=5 {
            let (a, b) = random_commuting_pd_pair(&EnsembleConfig::new(dim), &mut rng).unwrap();
            let s = relative_entropy(&a, &b).unwrap();
            let t = trace_perspective_neg_log(&a, &b).unwrap();
            assert!((s - t).abs() <= 1e-9 * (1.0 + s.abs()));
        }
    }

    #[test]
    fn quadratic_congruence_examples() {
        let a = PdMatrix::from_diagonal(&[2.0]).unwrap();
        let b = PdMatrix::from_diagonal(&[4.0]).unwrap();
        assert!((quadratic_congruence(&a, &b).unwrap().get(0, 0).re - 1.0).abs() < 1e-15);
        let a = pd(&[&[3.0, 1.0], &[1.0, 2.0]]);
        assert!(quadratic_congruence(&a, &a).unwrap().max_abs_diff(a.as_hermitian()) < 1e-13);

        let mut rng = RngStream::new(6).child("q").rng();
        let cfg = EnsembleConfig::new(4);
        let inv = lookup("inv").unwrap();
        for _ in 0..20 {
            let a = random_pd(&cfg, &mut rng).unwrap();
            let b = random_pd(&cfg, &mut rng).unwrap();
            let q = quadratic_congruence(&a, &b).unwrap();
            let p = perspective(&inv, &a, &b, PerspectiveOrder::WeightFirst).unwrap().value;
            assert!(q.max_abs_diff(&p) <= 1e-8 * scale_of(&q));
        }
    }

    #[test]
    fn order_parsing() {
        assert_eq!("weight_first".parse::<PerspectiveOrder>().unwrap(), PerspectiveOrder::WeightFirst);
        assert_eq!("weight_second".parse::<PerspectiveOrder>().unwrap(), PerspectiveOrder::WeightSecond);
        assert!("first".parse::<PerspectiveOrder>().is_err());
        assert_eq!(PerspectiveOrder::default(), PerspectiveOrder::WeightFirst);
    }

    #[test]
    fn out_of_domain_inner_spectrum_is_an_error() {
        // f = neg_log is fine on positive inner spectra; build a function whose
        // evaluator blows up to exercise the error path.
        let f = ScalarFunction::new("blowup", crate::catalog::Classification::Affine, false, "", |t| {
            if t > 1.5 { f64::INFINITY } else { t }
        });
        let a = PdMatrix::from_diagonal(&[1.0, 4.0]).unwrap();
        let err = perspective(&f, &PdMatrix::identity(2), &a, PerspectiveOrder::WeightFirst).unwrap_err();
        assert!(matches!(err, Error::OutOfDomain { eigenvalue, .. } if eigenvalue == 4.0));
    }
}
