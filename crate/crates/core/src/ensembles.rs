//! Seeded random ensembles: positive definite matrices, unitaries,
//! contractions, commuting pairs and complementary projections.
//!
//! Every draw comes from an [`RngStream`], a value identified by a root seed
//! and a label path. The generator for a stream is keyed by a SHA-256 hash of
//! the root and the path, so equal streams reproduce bit-identical draws and
//! sibling paths are independent.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::{c, hermitize, CMatrix, HermitianMatrix, PdMatrix};

const STREAM_DOMAIN: &[u8] = b"perspecta/rng-stream/v1";
/// Redraws allowed before a generator gives up on producing a valid sample.
pub const RETRY_CAP: usize = 8;

/// Generator used for every draw.
pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub root_seed: u64,
    pub path: Vec<String>,
}

impl RngStream {
    pub fn new(root_seed: u64) -> Self {
        RngStream {
            root_seed,
            path: Vec::new(),
        }
    }

    pub fn child(&self, label: impl fmt::Display) -> Self {
        let mut path = self.path.clone();
        path.push(label.to_string());
        RngStream {
            root_seed: self.root_seed,
            path,
        }
    }

    /// Re-creates a stream from the `/`-joined path recorded in reports.
    pub fn from_path(root_seed: u64, path: &str) -> Self {
        RngStream {
            root_seed,
            path: path
                .split('/')
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect(),
        }
    }

    pub fn path_string(&self) -> String {
        self.path.join("/")
    }

    pub fn rng(&self) -> StreamRng {
        let mut hasher = Sha256::new();
        hasher.update(STREAM_DOMAIN);
        hasher.update(self.root_seed.to_le_bytes());
        for label in &self.path {
            hasher.update((label.len() as u64).to_le_bytes());
            hasher.update(label.as_bytes());
        }
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest[..32]);
        ChaCha8Rng::from_seed(seed)
    }
}

impl fmt::Display for RngStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.root_seed, self.path_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub dim: usize,
    /// Target condition number of generated positive definite matrices.
    pub cond_target: f64,
    /// Draw complex entries; real orthogonal ensembles otherwise.
    pub complex: bool,
}

impl EnsembleConfig {
    pub fn new(dim: usize) -> Self {
        EnsembleConfig {
            dim,
            cond_target: 100.0,
            complex: true,
        }
    }

    pub fn with_cond_target(mut self, cond_target: f64) -> Self {
        self.cond_target = cond_target;
        self
    }

    pub fn real(mut self) -> Self {
        self.complex = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidArgument("ensemble dim must be at least 1".into()));
        }
        if !(self.cond_target >= 1.0) || !self.cond_target.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "cond_target must be a finite value >= 1, got {}",
                self.cond_target
            )));
        }
        Ok(())
    }
}

fn gaussian_entry<R: Rng + ?Sized>(rng: &mut R, complex: bool) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    if complex {
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    } else {
        c(re)
    }
}

/// Matrix with i.i.d. standard (complex) Gaussian entries.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, complex: bool, rng: &mut R) -> CMatrix {
    let mut m = CMatrix::zeros(rows, cols);
    // column-major fill order is part of the reproducibility contract
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = gaussian_entry(rng, complex);
        }
    }
    m
}

/// Log-uniform sample in `[lo, hi]`.
pub fn log_uniform<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    if lo == hi {
        return lo;
    }
    let u: f64 = rng.random();
    (lo.ln() + u * (hi.ln() - lo.ln())).exp()
}

/// Haar-like unitary: QR of a Gaussian matrix with the diagonal of R
/// normalized to positive phases.
pub fn random_unitary<R: Rng + ?Sized>(cfg: &EnsembleConfig, rng: &mut R) -> Result<CMatrix> {
    cfg.validate()?;
    let n = cfg.dim;
    for _ in 0..RETRY_CAP {
        let g = gaussian_matrix(n, n, cfg.complex, rng);
        let qr = g.qr();
        let r = qr.r();
        let mut q = qr.q();
        let mut ok = true;
        for j in 0..n {
            let d = r[(j, j)];
            let norm = d.norm();
            if !(norm > 1e-12) {
                ok = false;
                break;
            }
            let phase = d / norm;
            q.column_mut(j).iter_mut().for_each(|z| *z *= phase);
        }
        if ok {
            return Ok(q);
        }
    }
    Err(Error::InvalidArgument("unitary sampling exceeded retry cap".into()))
}

/// `Q diag(λ) Q*` with a random unitary `Q`.
pub fn hermitian_with_spectrum<R: Rng + ?Sized>(
    cfg: &EnsembleConfig,
    spectrum: &[f64],
    rng: &mut R,
) -> Result<HermitianMatrix> {
    let q = random_unitary(cfg, rng)?;
    Ok(conjugate_diagonal(&q, spectrum))
}

pub(crate) fn conjugate_diagonal(q: &CMatrix, spectrum: &[f64]) -> HermitianMatrix {
    let mut scaled = q.clone();
    for (j, &l) in spectrum.iter().enumerate() {
        scaled.column_mut(j).scale_mut(l);
    }
    hermitize(&(scaled * q.adjoint())).expect("finite square product")
}

fn pd_spectrum<R: Rng + ?Sized>(cfg: &EnsembleConfig, rng: &mut R) -> Vec<f64> {
    let half = cfg.cond_target.sqrt();
    (0..cfg.dim).map(|_| log_uniform(1.0 / half, half, rng)).collect()
}

/// Random positive definite matrix with eigenvalues log-uniform in
/// `[1/√κ, √κ]` where `κ = cond_target`.
pub fn random_pd<R: Rng + ?Sized>(cfg: &EnsembleConfig, rng: &mut R) -> Result<PdMatrix> {
    cfg.validate()?;
    let mut last = None;
    for _ in 0..RETRY_CAP {
        let spectrum = pd_spectrum(cfg, rng);
        let h = hermitian_with_spectrum(cfg, &spectrum, rng)?;
        match PdMatrix::new(h) {
            Ok(pd) if pd.condition_number() <= cfg.cond_target * (1.0 + 1e-6) => return Ok(pd),
            Ok(pd) => {
                last = Some(Error::ConditionCap {
                    cond: pd.condition_number(),
                    cap: cfg.cond_target,
                })
            }
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Random positive definite matrix whose spectrum lies in `[lo, hi]`.
pub fn random_pd_in<R: Rng + ?Sized>(cfg: &EnsembleConfig, lo: f64, hi: f64, rng: &mut R) -> Result<PdMatrix> {
    let spectrum: Vec<f64> = (0..cfg.dim).map(|_| log_uniform(lo, hi, rng)).collect();
    PdMatrix::new(hermitian_with_spectrum(cfg, &spectrum, rng)?)
}

/// Strict contraction: a Gaussian matrix divided by `σ_max·(1 + m)` with
/// `m` uniform in `(0, 0.5)`, so that `‖C‖ = 1/(1 + m) < 1`.
pub fn random_contraction<R: Rng + ?Sized>(cfg: &EnsembleConfig, rng: &mut R) -> Result<CMatrix> {
    cfg.validate()?;
    let n = cfg.dim;
    for _ in 0..RETRY_CAP {
        let g = gaussian_matrix(n, n, cfg.complex, rng);
        let margin: f64 = rng.random_range(0.0..0.5);
        if margin == 0.0 {
            continue;
        }
        let sigma = g.clone().singular_values().max();
        if sigma > 0.0 {
            return Ok(g * c(1.0 / (sigma * (1.0 + margin))));
        }
    }
    Err(Error::InvalidArgument("contraction sampling exceeded retry cap".into()))
}

/// Invertible matrix `U diag(σ) V*` with singular values log-uniform in
/// `[1, cond]`, the extreme values pinned so the condition number is exactly
/// `cond` up to rounding.
pub fn random_invertible<R: Rng + ?Sized>(cfg: &EnsembleConfig, cond: f64, rng: &mut R) -> Result<CMatrix> {
    cfg.validate()?;
    let u = random_unitary(cfg, rng)?;
    let v = random_unitary(cfg, rng)?;
    let n = cfg.dim;
    let mut sigma: Vec<f64> = (0..n).map(|_| log_uniform(1.0, cond, rng)).collect();
    if n >= 2 {
        sigma[0] = 1.0;
        sigma[n - 1] = cond;
    }
    let mut scaled = u;
    for (j, &s) in sigma.iter().enumerate() {
        scaled.column_mut(j).scale_mut(s);
    }
    Ok(scaled * v.adjoint())
}

/// Commuting positive definite pair sharing a random eigenbasis.
pub fn random_commuting_pd_pair<R: Rng + ?Sized>(
    cfg: &EnsembleConfig,
    rng: &mut R,
) -> Result<(PdMatrix, PdMatrix)> {
    cfg.validate()?;
    let q = random_unitary(cfg, rng)?;
    let a = pd_spectrum(cfg, rng);
    let b = pd_spectrum(cfg, rng);
    Ok((
        PdMatrix::new(conjugate_diagonal(&q, &a))?,
        PdMatrix::new(conjugate_diagonal(&q, &b))?,
    ))
}

/// Complementary orthogonal projections `p + q = I` obtained by splitting a
/// random orthonormal basis after `cut` columns.
#[derive(Clone, Debug)]
pub struct ProjectionPair {
    pub p: HermitianMatrix,
    pub q: HermitianMatrix,
    /// Orthonormal basis; the first `cut` columns span the range of `p`.
    pub basis: CMatrix,
    pub cut: usize,
}

impl ProjectionPair {
    /// `cut` may be `0` or `dim`, giving a trivial split.
    pub fn from_basis(basis: CMatrix, cut: usize) -> Result<Self> {
        let n = basis.nrows();
        if basis.ncols() != n || cut > n {
            return Err(Error::InvalidArgument(format!("cannot split {n} basis vectors at {cut}")));
        }
        let wp = basis.columns(0, cut).into_owned();
        let wq = basis.columns(cut, n - cut).into_owned();
        Ok(ProjectionPair {
            p: hermitize(&(&wp * wp.adjoint()))?,
            q: hermitize(&(&wq * wq.adjoint()))?,
            basis,
            cut,
        })
    }

    /// Isometry onto the range of `p`.
    pub fn p_range(&self) -> CMatrix {
        self.basis.columns(0, self.cut).into_owned()
    }

    /// Isometry onto the range of `q`.
    pub fn q_range(&self) -> CMatrix {
        let n = self.basis.nrows();
        self.basis.columns(self.cut, n - self.cut).into_owned()
    }
}

pub fn random_projection_pair<R: Rng + ?Sized>(cfg: &EnsembleConfig, rng: &mut R) -> Result<ProjectionPair> {
    cfg.validate()?;
    if cfg.dim < 2 {
        return Err(Error::InvalidArgument("projection pairs need dim >= 2".into()));
    }
    let basis = random_unitary(cfg, rng)?;
    let cut = rng.random_range(1..cfg.dim);
    ProjectionPair::from_basis(basis, cut)
}

/// Identity of size `n` as a dense matrix.
pub fn eye(n: usize) -> CMatrix {
    DMatrix::identity(n, n)
}
