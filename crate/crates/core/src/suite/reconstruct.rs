//! Recovering the scalar function behind a two-argument matrix map and
//! rebuilding the map from it.
//!
//! A regular, homogeneous map `F` is determined by `f(t)` where
//! `F(1, t·1) = f(t)·1`. [`reconstruct_scalar`] reads `f` off a black box on
//! a grid of `t` values, refusing black boxes whose output on `(1, t·1)` is
//! not a multiple of the identity. [`GridInterpolant`] turns the recovered
//! samples back into a scalar function.

use crate::catalog::{Classification, ScalarFunction};
use crate::error::{Error, Result};
use crate::matrix::{HermitianMatrix, PdMatrix};

/// A two-argument matrix map under test.
pub type BlackBox<'a> = dyn Fn(&PdMatrix, &PdMatrix) -> Result<HermitianMatrix> + Sync + 'a;

/// `n` points log-spaced over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| {
            if k == 0 {
                lo
            } else if k == n - 1 {
                hi
            } else {
                (a + (b - a) * k as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Evaluates `black_box(I, t·I)` at each grid point and returns `(t, f(t))`.
///
/// The output must be scalar: off-diagonal entries and the spread of the
/// diagonal may not exceed `tol · max(1, |f(t)|)`.
pub fn reconstruct_scalar(black_box: &BlackBox<'_>, t_grid: &[f64], dim: usize, tol: f64) -> Result<Vec<(f64, f64)>> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dim must be at least 1".into()));
    }
    if let Some(&t) = t_grid.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidArgument(format!("grid point {t} is not positive")));
    }
    let one = PdMatrix::identity(dim);
    t_grid
        .iter()
        .map(|&t| {
            let out = black_box(&one, &PdMatrix::scaled_identity(dim, t))?;
            if out.dim() != dim {
                return Err(Error::DimensionMismatch(out.dim(), dim));
            }
            let diag: Vec<f64> = (0..dim).map(|i| out.get(i, i).re).collect();
            let mean = diag.iter().sum::<f64>() / dim as f64;
            let spread = diag.iter().map(|d| (d - mean).abs()).fold(0.0, f64::max);
            let mut off_diagonal: f64 = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    if i != j {
                        off_diagonal = off_diagonal.max(out.get(i, j).norm());
                    }
                }
            }
            let allowed = tol * mean.abs().max(1.0);
            if off_diagonal > allowed || spread > allowed {
                return Err(Error::NonScalar {
                    t,
                    off_diagonal,
                    spread,
                });
            }
            Ok((t, mean))
        })
        .collect()
}

/// Piecewise cubic Hermite interpolant with Fritsch–Carlson slopes; preserves
/// monotonicity of the data on each interval.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

fn edge_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() || m0 == 0.0 {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

impl MonotoneCubic {
    /// `x` must be strictly increasing with at least two points.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::InvalidArgument("interpolation needs at least two matching points".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("interpolation nodes must increase".into()));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let m: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = m[0];
            d[1] = m[0];
        } else {
            for k in 1..n - 1 {
                if m[k - 1] * m[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / m[k - 1] + w2 / m[k]);
                }
            }
            d[0] = edge_slope(h[0], h[1], m[0], m[1]);
            d[n - 1] = edge_slope(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
        }
        Ok(MonotoneCubic { x, y, d })
    }

    /// Evaluates the interpolant; outside the nodes the end cubics are
    /// extended.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let k = match self.x.partition_point(|&xi| xi <= t) {
            0 => 0,
            p => (p - 1).min(n - 2),
        };
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }
}

/// Coordinates in which recovered samples are interpolated. The abscissa
/// is always `ln t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ordinate {
    /// `f(t)`.
    Value,
    /// `ln |f(t)|` for samples of constant sign.
    LogMagnitude { negative: bool },
    /// `f(t) / t`.
    PerUnit,
}

impl Ordinate {
    fn forward(self, t: f64, y: f64) -> f64 {
        match self {
            Ordinate::Value => y,
            Ordinate::LogMagnitude { .. } => y.abs().ln(),
            Ordinate::PerUnit => y / t,
        }
    }

    fn back(self, t: f64, v: f64) -> f64 {
        match self {
            Ordinate::Value => v,
            Ordinate::LogMagnitude { negative } => {
                if negative {
                    -v.exp()
                } else {
                    v.exp()
                }
            }
            Ordinate::PerUnit => v * t,
        }
    }
}

/// Monotone cubic interpolant of `(t, f(t))` samples in `(ln t, g)`
/// coordinates, where `g` is picked among [`Ordinate`] variants by the
/// smallest leave-one-out error on the interior samples.
#[derive(Clone, Debug, PartialEq)]
pub struct GridInterpolant {
    ordinate: Ordinate,
    spline: MonotoneCubic,
}

impl GridInterpolant {
    pub fn fit(samples: &[(f64, f64)]) -> Result<Self> {
        let mut candidates = vec![Ordinate::Value, Ordinate::PerUnit];
        if samples.iter().all(|&(_, y)| y > 0.0) {
            candidates.insert(1, Ordinate::LogMagnitude { negative: false });
        } else if samples.iter().all(|&(_, y)| y < 0.0) {
            candidates.insert(1, Ordinate::LogMagnitude { negative: true });
        }
        let mut best: Option<(f64, GridInterpolant)> = None;
        for ordinate in candidates {
            let fitted = Self::fit_with(samples, ordinate)?;
            let score = Self::leave_one_out(samples, ordinate)?;
            if best.as_ref().map_or(true, |(s, _)| score < *s) {
                best = Some((score, fitted));
            }
        }
        Ok(best.expect("at least one candidate").1)
    }

    pub fn fit_with(samples: &[(f64, f64)], ordinate: Ordinate) -> Result<Self> {
        let x = samples.iter().map(|&(t, _)| t.ln()).collect();
        let y = samples.iter().map(|&(t, y)| ordinate.forward(t, y)).collect();
        Ok(GridInterpolant {
            ordinate,
            spline: MonotoneCubic::new(x, y)?,
        })
    }

    fn leave_one_out(samples: &[(f64, f64)], ordinate: Ordinate) -> Result<f64> {
        if samples.len() < 4 {
            return Ok(0.0);
        }
        let mut worst: f64 = 0.0;
        for k in 1..samples.len() - 1 {
            let rest: Vec<(f64, f64)> = samples
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != k)
                .map(|(_, &s)| s)
                .collect();
            let fit = Self::fit_with(&rest, ordinate)?;
            let (t, y) = samples[k];
            worst = worst.max((fit.eval(t) - y).abs());
        }
        Ok(worst)
    }

    pub fn ordinate(&self) -> Ordinate {
        self.ordinate
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.ordinate.back(t, self.spline.eval(t.ln()))
    }

    /// Wraps the interpolant as a catalog-style function.
    pub fn into_function(self, id: impl Into<String>, classification: Classification) -> ScalarFunction {
        ScalarFunction::new(id, classification, false, "interpolated from recovered samples", move |t| {
            self.eval(t)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::lookup;
    use crate::perspective::{geometric_mean, perspective, PerspectiveOrder};

    #[test]
    fn grid_endpoints_are_exact() {
        let g = log_grid(0.1, 10.0, 20);
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], 0.1);
        assert_eq!(g[19], 10.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn recovers_neg_log() {
        let f = lookup("neg_log").unwrap();
        let bb = |a: &PdMatrix, b: &PdMatrix| Ok(perspective(&f, a, b, PerspectiveOrder::WeightFirst)?.value);
        let grid = log_grid(0.1, 10.0, 20);
        for (t, est) in reconstruct_scalar(&bb, &grid, 3, 1e-8).unwrap() {
            assert!((est + t.ln()).abs() <= 1e-10);
        }
    }

    #[test]
    fn recovers_sqrt_from_geometric_mean() {
        let bb = |a: &PdMatrix, b: &PdMatrix| Ok(geometric_mean(a, b)?.into_hermitian());
        for (t, est) in reconstruct_scalar(&bb, &log_grid(0.1, 10.0, 20), 4, 1e-8).unwrap() {
            assert!((est - t.sqrt()).abs() <= 1e-10);
        }
    }

    #[test]
    fn rejects_unitarily_broken_black_box() {
        let f = lookup("inv").unwrap();
        let bb = |a: &PdMatrix, b: &PdMatrix| {
            let p = perspective(&f, a, b, PerspectiveOrder::WeightFirst)?.value;
            let mut m = p.matrix().clone();
            m[(0, 0)] += 1e-4;
            HermitianMatrix::new(m)
        };
        let err = reconstruct_scalar(&bb, &[0.5, 2.0], 2, 1e-8).unwrap_err();
        assert!(matches!(err, Error::NonScalar { t, .. } if t == 0.5));
    }

    #[test]
    fn rejects_bad_grid() {
        let bb = |a: &PdMatrix, _: &PdMatrix| Ok(a.as_hermitian().clone());
        assert!(reconstruct_scalar(&bb, &[1.0, 0.0], 2, 1e-8).is_err());
    }

    #[test]
    fn monotone_cubic_reproduces_lines_and_nodes() {
        let x: Vec<f64> = (0..7).map(|k| k as f64 * 0.3 + (k * k) as f64 * 0.01).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let s = MonotoneCubic::new(x.clone(), y.clone()).unwrap();
        for t in [0.0, 0.1, 0.77, 1.5, 2.0] {
            assert!((s.eval(t) - (2.0 * t - 1.0)).abs() < 1e-14);
        }
        let y2: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let s = MonotoneCubic::new(x.clone(), y2.clone()).unwrap();
        for (xi, yi) in x.iter().zip(&y2) {
            assert!((s.eval(*xi) - yi).abs() < 1e-14);
        }
    }

    #[test]
    fn monotone_cubic_preserves_monotonicity() {
        let x = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let y = vec![0.0, 0.0, 1.0, 1.0, 5.0];
        let s = MonotoneCubic::new(x, y).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=400 {
            let v = s.eval(k as f64 * 0.01);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn ordinate_selection_linearizes_catalog_functions() {
        let grid = log_grid(0.1, 10.0, 20);
        let dense = log_grid(0.1, 10.0, 997);
        for (id, expected) in [
            ("neg_log", Ordinate::Value),
            ("t_log_t", Ordinate::PerUnit),
            ("inv", Ordinate::LogMagnitude { negative: false }),
            ("quart", Ordinate::LogMagnitude { negative: false }),
        ] {
            let f = lookup(id).unwrap();
            let samples: Vec<_> = grid.iter().map(|&t| (t, f.eval(t))).collect();
            let fit = GridInterpolant::fit(&samples).unwrap();
            assert_eq!(fit.ordinate(), expected, "{id}");
            for &t in &dense {
                let v = f.eval(t);
                assert!((fit.eval(t) - v).abs() <= 1e-10 * v.abs().max(1.0), "{id} at {t}");
            }
        }
    }
}
