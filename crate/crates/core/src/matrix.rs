//! Dense complex Hermitian matrices, spectral decomposition, functional
//! calculus and Loewner-order comparison.
//!
//! Every matrix-producing operation re-hermitizes its output so that
//! subsequent eigenvalue based comparisons see an exactly self-adjoint
//! argument.

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::catalog::ScalarFunction;
use crate::error::{Error, Result};
use crate::io::MatrixJson;

/// Dense complex matrix used for every operator in the crate.
pub type CMatrix = DMatrix<Complex64>;

/// Relative hermiticity tolerance: `|x_ij - conj(x_ji)| <= HERMITICITY_TOL * max(1, max|x|)`.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Largest accepted `eigmax / eigmin` for positive definite inputs.
pub const DEFAULT_CONDITION_CAP: f64 = 1e12;
/// Default relative tolerance for Loewner comparisons.
pub const DEFAULT_LOEWNER_TOL: f64 = 1e-8;

const EIG_MAX_ITER: usize = 10_000;

pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Spectral norm (largest singular value) of an arbitrary matrix.
pub fn operator_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Ratio of the largest to the smallest singular value.
pub fn condition_number(m: &CMatrix) -> f64 {
    let sv = m.clone().singular_values();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        sv.max() / min
    }
}

fn check_square_finite(x: &CMatrix) -> Result<()> {
    if x.nrows() != x.ncols() {
        return Err(Error::NotSquare {
            rows: x.nrows(),
            cols: x.ncols(),
        });
    }
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            let z = x[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Exact conjugate-symmetric average; assumes a square input.
fn symmetrize(x: &CMatrix) -> CMatrix {
    let n = x.nrows();
    let mut out = CMatrix::zeros(n, n);
    for i in 0..n {
        out[(i, i)] = c(x[(i, i)].re);
        for j in (i + 1)..n {
            let v = (x[(i, j)] + x[(j, i)].conj()) * 0.5;
            out[(i, j)] = v;
            // 0.0 - im keeps real entries free of negative zeros
            out[(j, i)] = Complex64::new(v.re, 0.0 - v.im);
        }
    }
    out
}

/// Largest `|x_ij - conj(x_ji)|` and its location.
pub fn max_asymmetry(x: &CMatrix) -> (f64, usize, usize) {
    let n = x.nrows().min(x.ncols());
    let mut worst = (0.0, 0, 0);
    for i in 0..n {
        for j in i..n {
            let d = (x[(i, j)] - x[(j, i)].conj()).norm();
            if d > worst.0 {
                worst = (d, i, j);
            }
        }
    }
    worst
}

/// Returns `(X + X*) / 2`.
pub fn hermitize(x: &CMatrix) -> Result<HermitianMatrix> {
    check_square_finite(x)?;
    Ok(HermitianMatrix { data: symmetrize(x) })
}

/// A dense complex self-adjoint matrix. Serializes as matrix JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "MatrixJson", try_from = "MatrixJson")]
pub struct HermitianMatrix {
    data: CMatrix,
}

impl HermitianMatrix {
    /// Validates squareness, finiteness and hermiticity within
    /// [`HERMITICITY_TOL`]; the stored matrix is the exact symmetrization.
    pub fn new(data: CMatrix) -> Result<Self> {
        check_square_finite(&data)?;
        let (asym, row, col) = max_asymmetry(&data);
        if asym > HERMITICITY_TOL * max_abs(&data).max(1.0) {
            return Err(Error::NotHermitian {
                max_asymmetry: asym,
                row,
                col,
            });
        }
        Ok(HermitianMatrix {
            data: symmetrize(&data),
        })
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::NotSquare {
                rows: n,
                cols: bad.len(),
            });
        }
        Self::new(CMatrix::from_fn(n, n, |i, j| c(rows[i][j])))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        Self::new(CMatrix::from_fn(
            n,
            n,
            |i, j| if i == j { c(diag[i]) } else { c(0.0) },
        ))
    }

    pub fn identity(n: usize) -> Self {
        HermitianMatrix {
            data: CMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        HermitianMatrix {
            data: CMatrix::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[(i, j)]
    }

    /// Real part of the trace.
    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.data[(i, i)].re).sum()
    }

    pub fn scale(&self, t: f64) -> HermitianMatrix {
        HermitianMatrix {
            data: symmetrize(&(&self.data * c(t))),
        }
    }

    pub fn max_abs_diff(&self, other: &HermitianMatrix) -> f64 {
        max_abs_diff(&self.data, &other.data)
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.data)
    }

    /// Largest eigenvalue modulus.
    pub fn spectral_norm(&self) -> Result<f64> {
        if self.dim() == 0 {
            return Ok(0.0);
        }
        let ev = eig(self)?.eigenvalues;
        Ok(ev[0].abs().max(ev[ev.len() - 1].abs()))
    }

    pub fn checked_add(&self, other: &HermitianMatrix) -> Result<HermitianMatrix> {
        same_dim(self.dim(), other.dim())?;
        Ok(self + other)
    }

    pub fn checked_sub(&self, other: &HermitianMatrix) -> Result<HermitianMatrix> {
        same_dim(self.dim(), other.dim())?;
        Ok(self - other)
    }
}

pub(crate) fn same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        Err(Error::DimensionMismatch(a, b))
    } else {
        Ok(())
    }
}

impl Add for &HermitianMatrix {
    type Output = HermitianMatrix;

    /// Panics on dimension mismatch; see [`HermitianMatrix::checked_add`].
    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix {
            data: symmetrize(&(&self.data + &rhs.data)),
        }
    }
}

impl Sub for &HermitianMatrix {
    type Output = HermitianMatrix;

    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix {
            data: symmetrize(&(&self.data - &rhs.data)),
        }
    }
}

impl Mul<f64> for &HermitianMatrix {
    type Output = HermitianMatrix;

    fn mul(self, t: f64) -> HermitianMatrix {
        self.scale(t)
    }
}

/// Eigenvalues in ascending order with the matching orthonormal eigenvectors
/// stored column-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(f64::NAN)
    }

    /// `Q g(Λ) Q*`, hermitized. Fails if `g` produces a non-finite value.
    pub fn compose(&self, g: impl Fn(f64) -> f64) -> Result<HermitianMatrix> {
        let q = &self.eigenvectors;
        let mut scaled = q.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let v = g(lambda);
            if !v.is_finite() {
                return Err(Error::NonFinite { row: j, col: j });
            }
            scaled.column_mut(j).scale_mut(v);
        }
        hermitize(&(scaled * q.adjoint()))
    }

    /// `‖Q*Q - I‖_max`.
    pub fn unitarity_residual(&self) -> f64 {
        let n = self.dim();
        max_abs_diff(
            &(self.eigenvectors.adjoint() * &self.eigenvectors),
            &CMatrix::identity(n, n),
        )
    }
}

/// Spectral decomposition of a Hermitian matrix with ascending eigenvalues.
pub fn eig(h: &HermitianMatrix) -> Result<SpectralDecomposition> {
    let n = h.dim();
    let dec = h
        .data
        .clone()
        .try_symmetric_eigen(f64::EPSILON, EIG_MAX_ITER)
        .ok_or(Error::Decomposition(n))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dec.eigenvalues[a].total_cmp(&dec.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| dec.eigenvalues[k]).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |i, j| dec.eigenvectors[(i, order[j])]);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Applies `g` to the spectrum of `h`, requiring every eigenvalue to exceed
/// `domain_floor`. `name` identifies the function in domain errors.
pub fn map_spectrum(
    name: &str,
    h: &HermitianMatrix,
    domain_floor: f64,
    g: impl Fn(f64) -> f64,
) -> Result<HermitianMatrix> {
    let dec = eig(h)?;
    map_decomposition(name, &dec, domain_floor, g)
}

pub(crate) fn map_decomposition(
    name: &str,
    dec: &SpectralDecomposition,
    domain_floor: f64,
    g: impl Fn(f64) -> f64,
) -> Result<HermitianMatrix> {
    if let Some(&bad) = dec.eigenvalues.iter().find(|&&l| !(l > domain_floor)) {
        return Err(Error::OutOfDomain {
            function: name.to_string(),
            eigenvalue: bad,
            floor: domain_floor,
        });
    }
    dec.compose(|l| g(l)).map_err(|_| Error::OutOfDomain {
        function: name.to_string(),
        eigenvalue: dec
            .eigenvalues
            .iter()
            .copied()
            .find(|&l| !g(l).is_finite())
            .unwrap_or(f64::NAN),
        floor: domain_floor,
    })
}

/// Functional calculus `Q f(Λ) Q*`.
pub fn apply_function(
    f: &ScalarFunction,
    h: &HermitianMatrix,
    domain_floor: f64,
) -> Result<HermitianMatrix> {
    map_spectrum(f.id(), h, domain_floor, |t| f.eval(t))
}

/// A Hermitian matrix with strictly positive spectrum and bounded condition
/// number. Carries its spectral decomposition so square roots and inverses
/// are cheap.
#[derive(Clone, Debug, PartialEq)]
pub struct PdMatrix {
    base: HermitianMatrix,
    spectral: SpectralDecomposition,
}

impl PdMatrix {
    pub fn new(h: HermitianMatrix) -> Result<Self> {
        Self::with_cap(h, DEFAULT_CONDITION_CAP)
    }

    pub fn with_cap(h: HermitianMatrix, cap: f64) -> Result<Self> {
        let spectral = eig(&h)?;
        Self::validate(&spectral, cap)?;
        Ok(PdMatrix { base: h, spectral })
    }

    /// Validates hermiticity, then positivity and conditioning.
    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        Self::new(HermitianMatrix::new(m)?)
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(HermitianMatrix::from_diagonal(diag)?)
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    /// `t·I` for `t > 0`.
    pub fn scaled_identity(n: usize, t: f64) -> Self {
        assert!(t > 0.0 && t.is_finite(), "scaled identity needs t > 0");
        PdMatrix {
            base: HermitianMatrix::identity(n).scale(t),
            spectral: SpectralDecomposition {
                eigenvalues: vec![t; n],
                eigenvectors: CMatrix::identity(n, n),
            },
        }
    }

    fn validate(spectral: &SpectralDecomposition, cap: f64) -> Result<()> {
        if spectral.dim() == 0 {
            return Err(Error::InvalidArgument("empty matrix".into()));
        }
        let (min, max) = (spectral.min(), spectral.max());
        if !(min > 0.0) {
            return Err(Error::NotPositiveDefinite(min));
        }
        let cond = max / min;
        if cond > cap {
            return Err(Error::ConditionCap { cond, cap });
        }
        Ok(())
    }

    /// Builds `Q g(Λ) Q*` reusing this matrix's eigenvectors; `g` must map
    /// the spectrum into `(0, ∞)`.
    fn spectral_map(&self, g: impl Fn(f64) -> f64) -> Result<PdMatrix> {
        let mapped: Vec<f64> = self.spectral.eigenvalues.iter().map(|&l| g(l)).collect();
        let n = mapped.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| mapped[a].total_cmp(&mapped[b]));
        let spectral = SpectralDecomposition {
            eigenvalues: order.iter().map(|&k| mapped[k]).collect(),
            eigenvectors: CMatrix::from_fn(n, n, |i, j| self.spectral.eigenvectors[(i, order[j])]),
        };
        Self::validate(&spectral, f64::INFINITY)?;
        let base = spectral.compose(|l| l)?;
        Ok(PdMatrix { base, spectral })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn eigmin(&self) -> f64 {
        self.spectral.min()
    }

    pub fn eigmax(&self) -> f64 {
        self.spectral.max()
    }

    pub fn condition_number(&self) -> f64 {
        self.eigmax() / self.eigmin()
    }

    pub fn spectral(&self) -> &SpectralDecomposition {
        &self.spectral
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix {
        &self.base
    }

    pub fn matrix(&self) -> &CMatrix {
        self.base.matrix()
    }

    pub fn into_hermitian(self) -> HermitianMatrix {
        self.base
    }

    /// `A^{-1}` from the stored decomposition.
    pub fn inverse(&self) -> Result<PdMatrix> {
        self.spectral_map(|l| 1.0 / l)
    }
}

impl AsRef<HermitianMatrix> for PdMatrix {
    fn as_ref(&self) -> &HermitianMatrix {
        &self.base
    }
}

/// Positive square root `S` with `S·S = A`.
pub fn sqrt_pd(a: &PdMatrix) -> Result<PdMatrix> {
    a.spectral_map(f64::sqrt)
}

/// Inverse square root `T` with `T·A·T = I`.
pub fn inv_sqrt_pd(a: &PdMatrix) -> Result<PdMatrix> {
    a.spectral_map(|l| 1.0 / l.sqrt())
}

/// `C* H C`, hermitized. `C` may be rectangular with as many rows as `H`.
pub fn congruence(c_mat: &CMatrix, h: &HermitianMatrix) -> Result<HermitianMatrix> {
    same_dim(c_mat.nrows(), h.dim())?;
    hermitize(&(c_mat.adjoint() * h.matrix() * c_mat))
}

/// Outcome of testing `L ≼ R`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoewnerComparison {
    /// Smallest eigenvalue of `R - L`.
    pub margin: f64,
    /// `max(1, ‖L‖, ‖R‖)` in spectral norm.
    pub scale: f64,
    pub holds: bool,
}

impl LoewnerComparison {
    /// Margin divided by scale.
    pub fn relative_margin(&self) -> f64 {
        self.margin / self.scale
    }
}

/// Tests `L ≼ R` with relative tolerance: holds iff
/// `λ_min(R - L) >= -tol · max(1, ‖L‖, ‖R‖)`.
pub fn loewner_leq(l: &HermitianMatrix, r: &HermitianMatrix, tol: f64) -> Result<LoewnerComparison> {
    let diff = r.checked_sub(l)?;
    let margin = eig(&diff)?.min();
    let scale = l.spectral_norm()?.max(r.spectral_norm()?).max(1.0);
    Ok(LoewnerComparison {
        margin,
        scale,
        holds: margin >= -tol * scale,
    })
}
