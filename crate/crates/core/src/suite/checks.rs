use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use crate::catalog::{Classification, ScalarFunction};
use crate::ensembles::{
    eye, random_commuting_pd_pair, random_contraction, random_invertible, random_pd, random_pd_in,
    random_projection_pair, random_unitary, EnsembleConfig, RngStream, StreamRng,
};
use crate::error::{Error, Result};
use crate::matrix::{
    apply_function, c, condition_number, congruence, hermitize, inv_sqrt_pd, loewner_leq, max_abs_diff, sqrt_pd,
    CMatrix, HermitianMatrix, LoewnerComparison, PdMatrix,
};
use crate::perspective::{geometric_mean, perspective, relative_entropy, trace_perspective_neg_log, PerspectiveOrder};
use crate::search::scan_until;

use super::config::{CheckConfig, LambdaSample};
use super::reconstruct::{log_grid, reconstruct_scalar, BlackBox, GridInterpolant};
use super::report::{run_cell, Assertion, CellBuilder, CellReport, TrialReport, Witness};

/// Bound on `‖U*U - I‖_max` for the block unitaries.
pub const UNITARITY_TOL: f64 = 1e-9;
/// Absolute bound on `F(1, t·1) - f(t)·1` over the scalar grid.
pub const SCALAR_GRID_TOL: f64 = 1e-10;
pub const SCALAR_GRID: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 10.0];
pub const HOMOGENEITY_FACTORS: [f64; 3] = [0.5, 2.0, 10.0];
pub const ZERO_LIMIT_EPS: [f64; 2] = [1e-2, 1e-4];
/// Condition number of the invertible congruences.
pub const INVERTIBLE_COND: f64 = 100.0;
/// Absolute bound on the recovered scalars.
pub const RECOVERY_TOL: f64 = 1e-9;
/// Relative bound on rebuilt versus black-box outputs.
pub const REBUILD_TOL: f64 = 1e-4;
pub const REBUILD_PAIRS: usize = 50;
/// Log-spaced grid `(lo, hi, points)` used for reconstruction.
pub const RECONSTRUCTION_GRID: (f64, f64, usize) = (0.1, 10.0, 20);
/// Relative size of the off-scalar defect injected into black boxes.
pub const DEFECT_SIZE: f64 = 1e-6;
/// Smallest entropy gap accepted as a separating example.
pub const SEPARATION_GAP: f64 = 1e-6;

fn cell_base(cfg: &CheckConfig, check: &str, f: &str, dim: usize) -> RngStream {
    RngStream::new(cfg.seed).child(check).child(f).child(format!("d{dim}"))
}

fn ensemble(cfg: &CheckConfig, dim: usize) -> EnsembleConfig {
    EnsembleConfig::new(dim).with_cond_target(cfg.cond_target)
}

fn draw_lambda(cfg: &CheckConfig, trial: usize, rng: &mut StreamRng) -> f64 {
    match cfg.lambda_samples[trial % cfg.lambda_samples.len()] {
        LambdaSample::Fixed(v) => v,
        LambdaSample::Random(_) => rng.random_range(0.0..=1.0),
    }
}

fn scale_of(ms: &[&HermitianMatrix]) -> Result<f64> {
    ms.iter().try_fold(1.0_f64, |s, m| Ok(s.max(m.spectral_norm()?)))
}

fn persp(f: &ScalarFunction, a: &PdMatrix, b: &PdMatrix, order: PerspectiveOrder) -> Result<HermitianMatrix> {
    Ok(perspective(f, a, b, order)?.value)
}

fn combine(lambda: f64, x: &HermitianMatrix, y: &HermitianMatrix) -> HermitianMatrix {
    &x.scale(lambda) + &y.scale(1.0 - lambda)
}

/// `L ≼ R`, or `R ≼ L` for operator concave `f`.
fn directed(f: &ScalarFunction, l: &HermitianMatrix, r: &HermitianMatrix, tol: f64) -> Result<LoewnerComparison> {
    match f.classification().convex_direction() {
        Some(false) => loewner_leq(r, l, tol),
        _ => loewner_leq(l, r, tol),
    }
}

fn equality(name: &'static str, l: &HermitianMatrix, r: &HermitianMatrix, threshold: f64) -> Result<Assertion> {
    let scale = scale_of(&[l, r])?;
    Ok(Assertion::deviation(name, l.max_abs_diff(r), scale, threshold))
}

fn convexity_functions(cfg: &CheckConfig) -> Result<Vec<ScalarFunction>> {
    Ok(cfg
        .resolve_functions()?
        .into_iter()
        .filter(|f| f.classification().convex_direction().is_some())
        .collect())
}

fn control_functions(cfg: &CheckConfig) -> Result<Vec<ScalarFunction>> {
    Ok(cfg
        .resolve_functions()?
        .into_iter()
        .filter(|f| f.classification() == Classification::ControlNotOperatorConvex)
        .collect())
}

fn require_any(check: &str, functions: &[ScalarFunction]) -> Result<()> {
    if functions.is_empty() {
        return Err(Error::InvalidArgument(format!("no selected function is eligible for {check}")));
    }
    Ok(())
}

fn per_function_cells<T>(
    check: &str,
    cfg: &CheckConfig,
    functions: &[ScalarFunction],
    min_dim: usize,
    trial: T,
) -> Vec<CellReport>
where
    T: Fn(&ScalarFunction, usize, usize, &RngStream) -> Result<Vec<Assertion>> + Sync,
{
    let mut cells = Vec::new();
    for f in functions {
        for &dim in cfg.dims.iter().filter(|&&d| d >= min_dim) {
            let base = cell_base(cfg, check, f.id(), dim);
            cells.push(run_cell(dim, f.id(), cfg.trials, &base, |i, s| trial(f, dim, i, s)));
        }
    }
    cells
}

fn finish(check: &str, cfg: &CheckConfig, cells: Vec<CellReport>) -> TrialReport {
    let passed = !cells.is_empty() && cells.iter().all(|c| c.failures.is_empty());
    TrialReport {
        check_id: check.to_string(),
        config: cfg.clone(),
        cells,
        passed,
    }
}

/// One draw of the joint convexity experiment.
#[derive(Clone, Debug)]
pub struct JointConvexitySample {
    pub a1: PdMatrix,
    pub b1: PdMatrix,
    pub a2: PdMatrix,
    pub b2: PdMatrix,
    pub lambda: f64,
    /// `P(λA1+(1-λ)A2, λB1+(1-λ)B2) ≼ λP(A1,B1) + (1-λ)P(A2,B2)`, reversed
    /// for operator concave `f`.
    pub comparison: LoewnerComparison,
}

impl JointConvexitySample {
    pub fn matrices(&self) -> BTreeMap<String, HermitianMatrix> {
        [("a1", &self.a1), ("b1", &self.b1), ("a2", &self.a2), ("b2", &self.b2)]
            .into_iter()
            .map(|(k, m)| (k.to_string(), m.as_hermitian().clone()))
            .collect()
    }
}

pub fn joint_convexity_sample(
    f: &ScalarFunction,
    cfg: &CheckConfig,
    dim: usize,
    trial: usize,
    stream: &RngStream,
) -> Result<JointConvexitySample> {
    let e = ensemble(cfg, dim);
    let mut rng = stream.rng();
    let a1 = random_pd(&e, &mut rng)?;
    let b1 = random_pd(&e, &mut rng)?;
    let a2 = random_pd(&e, &mut rng)?;
    let b2 = random_pd(&e, &mut rng)?;
    let lambda = draw_lambda(cfg, trial, &mut rng);
    let comparison = joint_convexity_compare(f, cfg.order, &a1, &b1, &a2, &b2, lambda, cfg.tol)?;
    Ok(JointConvexitySample {
        a1,
        b1,
        a2,
        b2,
        lambda,
        comparison,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn joint_convexity_compare(
    f: &ScalarFunction,
    order: PerspectiveOrder,
    a1: &PdMatrix,
    b1: &PdMatrix,
    a2: &PdMatrix,
    b2: &PdMatrix,
    lambda: f64,
    tol: f64,
) -> Result<LoewnerComparison> {
    let a = PdMatrix::new(combine(lambda, a1.as_hermitian(), a2.as_hermitian()))?;
    let b = PdMatrix::new(combine(lambda, b1.as_hermitian(), b2.as_hermitian()))?;
    let lhs = persp(f, &a, &b, order)?;
    let rhs = combine(lambda, &persp(f, a1, b1, order)?, &persp(f, a2, b2, order)?);
    directed(f, &lhs, &rhs, tol)
}

/// Re-draws a joint convexity trial from its recorded seed path.
pub fn replay_joint_convexity(
    f: &ScalarFunction,
    cfg: &CheckConfig,
    dim: usize,
    trial: usize,
    seed_path: &str,
) -> Result<JointConvexitySample> {
    joint_convexity_sample(f, cfg, dim, trial, &RngStream::from_path(cfg.seed, seed_path))
}

pub fn check_joint_convexity(cfg: &CheckConfig) -> Result<TrialReport> {
    const ID: &str = "joint_convexity";
    let functions = convexity_functions(cfg)?;
    require_any(ID, &functions)?;
    let cells = per_function_cells(ID, cfg, &functions, 1, |f, dim, i, s| {
        let sample = joint_convexity_sample(f, cfg, dim, i, s)?;
        Ok(vec![Assertion::new("loewner", sample.comparison.relative_margin(), cfg.tol)])
    });
    Ok(finish(ID, cfg, cells))
}

fn jensen_trial(f: &ScalarFunction, cfg: &CheckConfig, dim: usize, trial: usize, s: &RngStream) -> Result<Vec<Assertion>> {
    let e = ensemble(cfg, dim);
    let mut rng = s.rng();
    let a1 = random_pd(&e, &mut rng)?;
    let b1 = random_pd(&e, &mut rng)?;
    let a2 = random_pd(&e, &mut rng)?;
    let b2 = random_pd(&e, &mut rng)?;
    let lambda = draw_lambda(cfg, trial, &mut rng);
    let (w1, x1) = cfg.order.split(&a1, &b1);
    let (w2, x2) = cfg.order.split(&a2, &b2);
    let w = PdMatrix::new(combine(lambda, w1.as_hermitian(), w2.as_hermitian()))?;
    let x_sum = combine(lambda, x1.as_hermitian(), x2.as_hermitian());
    let w_is = inv_sqrt_pd(&w)?;
    let xm: CMatrix = sqrt_pd(w1)?.matrix() * c(lambda.sqrt()) * w_is.matrix();
    let ym: CMatrix = sqrt_pd(w2)?.matrix() * c((1.0 - lambda).sqrt()) * w_is.matrix();
    let residual = max_abs_diff(&(xm.adjoint() * &xm + ym.adjoint() * &ym), &eye(dim));

    let h = congruence(inv_sqrt_pd(w1)?.matrix(), x1.as_hermitian())?;
    let k = congruence(inv_sqrt_pd(w2)?.matrix(), x2.as_hermitian())?;
    let arg = &congruence(&xm, &h)? + &congruence(&ym, &k)?;
    let expected = congruence(w_is.matrix(), &x_sum)?;

    let lhs = apply_function(f, &arg, 0.0)?;
    let rhs = &congruence(&xm, &apply_function(f, &h, 0.0)?)? + &congruence(&ym, &apply_function(f, &k, 0.0)?)?;
    let step = directed(f, &lhs, &rhs, cfg.tol)?;
    Ok(vec![
        Assertion::deviation("identity_residual", residual, 1.0, cfg.tol),
        equality("argument_identity", &arg, &expected, cfg.tol)?,
        Assertion::new("jensen_step", step.relative_margin(), cfg.tol),
    ])
}

/// Operator Jensen decomposition of the joint convexity inequality: the
/// coefficients `X = (λW1)^{1/2} W^{-1/2}`, `Y = ((1-λ)W2)^{1/2} W^{-1/2}`
/// satisfy `X*X + Y*Y = I` and carry the inner arguments into the inner
/// argument of the combination.
pub fn check_jensen_decomposition(cfg: &CheckConfig) -> Result<TrialReport> {
    const ID: &str = "jensen_decomposition";
    let functions = convexity_functions(cfg)?;
    require_any(ID, &functions)?;
    let cells = per_function_cells(ID, cfg, &functions, 1, |f, dim, i, s| jensen_trial(f, cfg, dim, i, s));
    Ok(finish(ID, cfg, cells))
}

fn homogeneity_trial(f: &ScalarFunction, cfg: &CheckConfig, dim: usize, s: &RngStream) -> Result<Vec<Assertion>> {
    let e = ensemble(cfg, dim);
    let mut rng = s.rng();
    let a = random_pd(&e, &mut rng)?;
    let b = random_pd(&e, &mut rng)?;
    let p = persp(f, &a, &b, cfg.order)?;
    let scale = scale_of(&[&p])?;
    let mut homogeneity = f64::INFINITY;
    for t in HOMOGENEITY_FACTORS {
        let at = PdMatrix::new(a.as_hermitian().scale(t))?;
        let bt = PdMatrix::new(b.as_hermitian().scale(t))?;
        let pt = persp(f, &at, &bt, cfg.order)?;
        homogeneity = homogeneity.min(-pt.max_abs_diff(&p.scale(t)) / (t * scale));
    }
    let f1 = f.eval(1.0);
    let mut zero_limit = f64::INFINITY;
    for eps in ZERO_LIMIT_EPS {
        let small = PdMatrix::scaled_identity(dim, eps);
        let pe = persp(f, &small, &small, cfg.order)?;
        let target = HermitianMatrix::identity(dim).scale(eps * f1);
        zero_limit = zero_limit.min(-pe.max_abs_diff(&target) / (eps * f1.abs().max(1.0)));
    }
    Ok(vec![
        Assertion::new("homogeneity", homogeneity, cfg.tol),
        Assertion::new("zero_limit", zero_limit, cfg.tol),
    ])
}

/// `P(tA, tB) = t·P(A, B)` and `P(εI, εI) = ε f(1) I → 0`.
pub fn check_homogeneity(cfg: &CheckConfig) -> Result<TrialReport> {
    const ID: &str = "homogeneity";
    let functions = cfg.resolve_functions()?;
    require_any(ID, &functions)?;
    let cells = per_function_cells(ID, cfg, &functions, 1, |f, dim, _, s| homogeneity_trial(f, cfg, dim, s));
    Ok(finish(ID, cfg, cells))
}

/// `P(U*AU, U*BU) = U* P(A, B) U`.
pub fn check_unitary_invariance(cfg: &CheckConfig) -> Result<TrialReport> {
    const ID: &str = "unitary_invariance";
    let functions = cfg.resolve_functions()?;
    require_any(ID, &functions)?;
    let cells = per_function_cells(ID, cfg, &functions, 1, |f, dim, _, s| {
        let e = ensemble(cfg, dim);
        let mut rng = s.rng();
        let a = random_pd(&e, &mut rng)?;
        let b = random_pd(&e, &mut rng)?;
        let u = random_unitary(&e, &mut rng)?;
        let au = PdMatrix::new(congruence(&u, a.as_hermitian())?)?;
        let bu = PdMatrix::new(congruence(&u, b.as_hermitian())?)?;
        let lhs = persp(f, &au, &bu, cfg.order)?;
        let rhs = congruence(&u, &persp(f, &a, &b, cfg.order)?)?;
        Ok(vec![equality("covariance", &lhs, &rhs, cfg.tol)?])
    });
    Ok(finish(ID, cfg, cells))
}

/// `W1 H1 W1* + W2 H2 W2*` for isometries `W1`, `W2` with complementary ranges.
fn embed(w1: &CMatrix, h1: &HermitianMatrix, w2: &CMatrix, h2: &HermitianMatrix) -> Result<HermitianMatrix> {
    hermitize(&(w1 * h1.matrix() * w1.adjoint() + w2 * h2.matrix() * w2.adjoint()))
}

/// Block rule: for `A = PA1P + QA2Q`, `B = PB1P + QB2Q` with complementary
/// projections, `P(A, B)` equals the sum of the perspectives of the
/// compressions of `A` and `B` to the two ranges.
pub fn check_block_diagonal(cfg: &CheckConfig) -> Result<TrialReport> {
    const ID: &str = "block_diagonal";
    let functions = cfg.resolve_functions()?;
    require_any(ID, &functions)?;
    let cells = per_function_cells(ID, cfg, &functions, 2, |f, dim, _, s| {
        let mut rng = s.rng();
        let pair = random_projection_pair(&ensemble(cfg, dim), &mut rng)?;
        let (e1, e2) = (ensemble(cfg, pair.cut), ensemble(cfg, dim - pair.cut));
        let a1 = random_pd(&e1, &mut rng)?;
        let b1 = random_pd(&e1, &mut rng)?;
        let a2 = random_pd(&e2, &mut rng)?;
        let b2 = random_pd(&e2, &mut rng)?;
        let (wp, wq) = (pair.p_range(), pair.q_range());
        let a = PdMatrix::new(embed(&wp, a1.as_hermitian(), &wq, a2.as_hermitian())?)?;
        let b = PdMatrix::new(embed(&wp, b1.as_hermitian(), &wq, b2.as_hermitian())?)?;
        let whole = persp(f, &a, &b, cfg.order)?;
        let restrict = |w: &CMatrix, m: &PdMatrix| PdMatrix::new(congruence(w, m.as_hermitian())?);
        let on_p = persp(f, &restrict(&wp, &a)?, &restrict(&wp, &b)?, cfg.order)?;
        let on_q = persp(f, &restrict(&wq, &a)?, &restrict(&wq, &b)?, cfg.order)?;
        let split = embed(&wp, &on_p, &wq, &on_q)?;
        Ok(vec![equality("block_split", &whole, &split, cfg.tol)?])
    });
    Ok(finish(ID, cfg, cells))
}

/// Unitary dilations of a strict contraction `C`:
///
/// ```text
/// U = [[C, D], [E, -C*]],   V = [[C, -D], [E, C*]],
/// D = (1 - CC*)^{1/2},      E = (1 - C*C)^{1/2}.
/// ```
///
/// Averaging over them compresses `A ⊕ 0` to `C*AC ⊕ DAD`.
#[derive(Clone, Debug)]
pub struct BlockUnitaryPair {
    pub c: CMatrix,
    pub d: CMatrix,
    pub e: CMatrix,
    pub u: CMatrix,
    pub v: CMatrix,
}

fn defect_root(m: CMatrix) -> Result<CMatrix> {
    let h = hermitize(&(eye(m.nrows()) - m))?;
    Ok(sqrt_pd(&PdMatrix::with_cap(h, f64::INFINITY)?)?.matrix().clone())
}

fn blocks(tl: &CMatrix, tr: &CMatrix, bl: &CMatrix, br: &CMatrix) -> CMatrix {
    let n = tl.nrows();
    let mut out = CMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(tl);
    out.view_mut((0, n), (n, n)).copy_from(tr);
    out.view_mut((n, 0), (n, n)).copy_from(bl);
    out.view_mut((n, n), (n, n)).copy_from(br);
    out
}

impl BlockUnitaryPair {
    /// `c` must be square with operator norm below one.
    pub fn new(c_mat: &CMatrix) -> Result<Self> {
        if !c_mat.is_square() {
            return Err(Error::NotSquare {
                rows: c_mat.nrows(),
                cols: c_mat.ncols(),
            });
        }
        let d = defect_root(c_mat * c_mat.adjoint())?;
        let e = defect_root(c_mat.adjoint() * c_mat)?;
        let ca = c_mat.adjoint();
        let u = blocks(c_mat, &d, &e, &-ca.clone());
        let v = blocks(c_mat, &-d.clone(), &e, &ca);
        Ok(BlockUnitaryPair {
            c: c_mat.clone(),
            d,
            e,
            u,
            v,
        })
    }

    /// `‖U*U - I‖_max` and `‖V*V - I‖_max`.
    pub fn unitarity_residuals(&self) -> (f64, f64) {
        let id = eye(self.u.nrows());
        (
            max_abs_diff(&(self.u.adjoint() * &self.u), &id),
            max_abs_diff(&(self.v.adjoint() * &self.v), &id),
        )
    }

    /// `½U*(A ⊕ 0)U + ½V*(A ⊕ 0)V`.
    pub fn average(&self, a: &HermitianMatrix) -> Result<HermitianMatrix> {
        let n = self.c.nrows();
        let zero = CMatrix::zeros(n, n);
        let padded = HermitianMatrix::new(blocks(a.matrix(), &zero, &zero, &zero))?;
        Ok(&congruence(&self.u, &padded)?.scale(0.5) + &congruence(&self.v, &padded)?.scale(0.5))
    }

    /// `C*AC ⊕ DAD`.
    pub fn compressed(&self, a: &HermitianMatrix) -> Result<HermitianMatrix> {
        let n = self.c.nrows();
        let zero = CMatrix::zeros(n, n);
        let top = congruence(&self.c, a)?;
        let bottom = congruence(&self.d, a)?;
        HermitianMatrix::new(blocks(top.matrix(), &zero, &zero, bottom.matrix()))
    }
}

pub fn check_block_unitary_identity(cfg: &CheckConfig) -> Result<TrialReport> {
    const ID: &str = "block_unitary_identity";
    let mut cells = Vec::new();
    for &dim in &cfg.dims {
        let base = cell_base(cfg, ID, "none", dim);
        cells.push(run_cell(dim, "none", cfg.trials, &base, |_, s| {
            let e = ensemble(cfg, dim);
            let mut rng = s.rng();
            let cm = random_contraction(&e, &mut rng)?;
            let a = random_pd(&e, &mut rng)?;
            let pair = BlockUnitaryPair::new(&cm)?;
            let (ru, rv) = pair.unitarity_residuals();
            let avg = pair.average(a.as_hermitian())?;
            let expected = pair.compressed(a.as_hermitian())?;
            Ok(vec![
                Assertion::deviation("u_unitarity", ru, 1.0, UNITARITY_TOL),
                Assertion::deviation("v_unitarity", rv, 1.0, UNITARITY_TOL),
                equality("averaging_identity", &avg, &expected, cfg.tol)?,
            ])
        }));
    }
    Ok(finish(ID, cfg, cells))
}

/// `C* P(A, B) C ≽ P(C*AC, C*BC)` for strict contractions `C` (reversed for
/// concave `f`). For a unitary the Loewner margin must vanish to within
/// `10·tol` in absolute terms.
pub fn check_transformer_inequality(cfg: &CheckConfig) -> Result<TrialReport> {
    const ID: &str = "transformer_inequality";
    let functions = convexity_functions(cfg)?;
    require_any(ID, &functions)?;
    let cells = per_function_cells(ID, cfg, &functions, 1, |f, dim, _, s| {
        let e = ensemble(cfg, dim);
        let mut rng = s.rng();
        let a = random_pd(&e, &mut rng)?;
        let b = random_pd(&e, &mut rng)?;
        let cm = random_contraction(&e, &mut rng)?;
        let w = random_unitary(&e, &mut rng)?;
        let p = persp(f, &a, &b, cfg.order)?;
        let transformed = |m: &CMatrix| -> Result<HermitianMatrix> {
            let ca = PdMatrix::new(congruence(m, a.as_hermitian())?)?;
            let cb = PdMatrix::new(congruence(m, b.as_hermitian())?)?;
            persp(f, &ca, &cb, cfg.order)
        };
        let contraction = directed(f, &transformed(&cm)?, &congruence(&cm, &p)?, cfg.tol)?;
        let unitary = loewner_leq(&transformed(&w)?, &congruence(&w, &p)?, cfg.tol)?;
        Ok(vec![
            Assertion::new("contraction", contraction.relative_margin(), cfg.tol),
            Assertion::new("unitary_specialization", -unitary.margin.abs(), 10.0 * cfg.tol),
        ])
    });
    Ok(finish(ID, cfg, cells))
}

/// `C* P(A, B) C = P(C*AC, C*BC)` for invertible `C`, including the
/// normalization by the inverse square root of the weight.
pub fn check_transformer_equality(cfg: &CheckConfig) -> Result<TrialReport> {
    const ID: &str = "transformer_equality";
    let functions = cfg.resolve_functions()?;
    require_any(ID, &functions)?;
    let cells = per_function_cells(ID, cfg, &functions, 1, |f, dim, _, s| {
        let e = ensemble(cfg, dim);
        let mut rng = s.rng();
        let a = random_pd(&e, &mut rng)?;
        let b = random_pd(&e, &mut rng)?;
        let cm = random_invertible(&e, INVERTIBLE_COND, &mut rng)?;
        let kappa = condition_number(&cm);
        let p = persp(f, &a, &b, cfg.order)?;
        let ca = PdMatrix::new(congruence(&cm, a.as_hermitian())?)?;
        let cb = PdMatrix::new(congruence(&cm, b.as_hermitian())?)?;
        let lhs = congruence(&cm, &p)?;
        let rhs = persp(f, &ca, &cb, cfg.order)?;
        let scale = scale_of(&[&lhs, &rhs])?;
        let congruence_equality = Assertion::deviation("congruence_equality", lhs.max_abs_diff(&rhs), kappa * kappa * scale, cfg.tol);

        let (w, x) = cfg.order.split(&a, &b);
        let w_is = inv_sqrt_pd(w)?;
        let normalized = PdMatrix::new(congruence(w_is.matrix(), x.as_hermitian())?)?;
        let one = PdMatrix::identity(dim);
        let special = match cfg.order {
            PerspectiveOrder::WeightFirst => persp(f, &one, &normalized, cfg.order)?,
            PerspectiveOrder::WeightSecond => persp(f, &normalized, &one, cfg.order)?,
        };
        let reduced = congruence(w_is.matrix(), &p)?;
        Ok(vec![
            congruence_equality,
            equality("inverse_sqrt_specialization", &reduced, &special, cfg.tol)?,
        ])
    });
    Ok(finish(ID, cfg, cells))
}

/// `P(1, A) = f(A)` with the weight on the identity, and `P(1, t·1) = f(t)·1`.
pub fn check_finite_rank_formula(cfg: &CheckConfig) -> Result<TrialReport> {
    const ID: &str = "finite_rank_formula";
    let functions = cfg.resolve_functions()?;
    require_any(ID, &functions)?;
    let with_unit_weight = |f: &ScalarFunction, x: &PdMatrix| -> Result<HermitianMatrix> {
        let one = PdMatrix::identity(x.dim());
        match cfg.order {
            PerspectiveOrder::WeightFirst => persp(f, &one, x, cfg.order),
            PerspectiveOrder::WeightSecond => persp(f, x, &one, cfg.order),
        }
    };
    let cells = per_function_cells(ID, cfg, &functions, 1, |f, dim, _, s| {
        let a = random_pd(&ensemble(cfg, dim), &mut s.rng())?;
        let lhs = with_unit_weight(f, &a)?;
        let rhs = apply_function(f, a.as_hermitian(), 0.0)?;
        let mut grid_dev: f64 = 0.0;
        for t in SCALAR_GRID {
            let out = with_unit_weight(f, &PdMatrix::scaled_identity(dim, t))?;
            grid_dev = grid_dev.max(out.max_abs_diff(&HermitianMatrix::identity(dim).scale(f.eval(t))));
        }
        Ok(vec![
            equality("finite_rank", &lhs, &rhs, cfg.tol)?,
            Assertion::deviation("scalar_grid", grid_dev, 1.0, SCALAR_GRID_TOL),
        ])
    });
    Ok(finish(ID, cfg, cells))
}

fn reconstruction_cell(
    cfg: &CheckConfig,
    label: &str,
    dim: usize,
    black_box: &BlackBox<'_>,
    truth: &(dyn Fn(f64) -> f64 + Sync),
    classification: Classification,
) -> CellReport {
    const ID: &str = "reconstruction";
    let base = cell_base(cfg, ID, label, dim);
    let mut cell = CellBuilder::new(dim, label);
    let (lo, hi, n) = RECONSTRUCTION_GRID;
    let grid = log_grid(lo, hi, n);
    let samples = match reconstruct_scalar(black_box, &grid, dim, cfg.tol) {
        Ok(samples) => samples,
        Err(e) => {
            cell.record_assertions(0, base.path_string(), Err(e));
            return cell.finish();
        }
    };
    let recovered = samples
        .iter()
        .map(|&(t, v)| (v - truth(t)).abs())
        .fold(0.0, f64::max);
    let fitted = GridInterpolant::fit(&samples);
    cell.record_assertions(
        0,
        base.path_string(),
        fitted.as_ref().map(|_| vec![Assertion::deviation("recovered_scalars", recovered, 1.0, RECOVERY_TOL)]).map_err(Clone::clone),
    );
    let rebuilt = match fitted {
        Ok(fit) => fit.into_function(format!("rebuilt:{label}"), classification),
        Err(_) => return cell.finish(),
    };

    let e = ensemble(cfg, dim);
    let outcomes: Vec<_> = (0..REBUILD_PAIRS)
        .into_par_iter()
        .map(|i| {
            let s = base.child(format!("t{i}"));
            let outcome = (|| {
                let mut rng = s.rng();
                let a = random_pd(&e, &mut rng)?;
                let inner = random_pd_in(&e, lo * (1.0 + 1e-6), hi / (1.0 + 1e-6), &mut rng)?;
                let b = PdMatrix::new(congruence(sqrt_pd(&a)?.matrix(), inner.as_hermitian())?)?;
                let expected = black_box(&a, &b)?;
                let got = persp(&rebuilt, &a, &b, PerspectiveOrder::WeightFirst)?;
                Ok(vec![equality("rebuilt_agreement", &got, &expected, REBUILD_TOL)?])
            })();
            (s.path_string(), outcome)
        })
        .collect();
    for (i, (path, outcome)) in outcomes.into_iter().enumerate() {
        cell.record(i, path, outcome);
    }

    if dim >= 2 {
        let defective = |a: &PdMatrix, b: &PdMatrix| -> Result<HermitianMatrix> {
            let out = black_box(a, b)?;
            let mut m = out.matrix().clone();
            m[(0, 0)] += c(DEFECT_SIZE * out.max_abs().max(1.0));
            HermitianMatrix::new(m)
        };
        let outcome = match reconstruct_scalar(&defective, &grid, dim, cfg.tol) {
            Err(Error::NonScalar { .. }) => Ok(vec![Assertion::new("defect_rejected", 0.0, 0.0)]),
            Ok(_) => Ok(vec![Assertion::new("defect_rejected", -1.0, 0.0)]),
            Err(e) => Err(e),
        };
        cell.record_assertions(REBUILD_PAIRS, base.child("defect").path_string(), outcome);
    }
    cell.finish()
}

/// Recovers `f` from each perspective (and `sqrt` from the geometric mean)
/// as a black box, rebuilds the map from the recovered samples and compares,
/// then checks that a black box broken off the scalars is rejected.
pub fn check_reconstruction(cfg: &CheckConfig) -> Result<TrialReport> {
    let functions = cfg.resolve_functions()?;
    let order = cfg.order;
    let mut cells = Vec::new();
    for f in &functions {
        let black_box = |a: &PdMatrix, b: &PdMatrix| persp(f, a, b, order);
        let truth = |t: f64| match order {
            PerspectiveOrder::WeightFirst => f.eval(t),
            PerspectiveOrder::WeightSecond => t * f.eval(1.0 / t),
        };
        for &dim in &cfg.dims {
            cells.push(reconstruction_cell(cfg, f.id(), dim, &black_box, &truth, f.classification()));
        }
    }
    let mean = |a: &PdMatrix, b: &PdMatrix| Ok(geometric_mean(a, b)?.into_hermitian());
    for &dim in &cfg.dims {
        cells.push(reconstruction_cell(cfg, "geometric_mean", dim, &mean, &f64::sqrt, Classification::OperatorConcave));
    }
    Ok(finish("reconstruction", cfg, cells))
}

/// Midpoint concavity and symmetry of the geometric mean.
pub fn check_geometric_mean_concavity(cfg: &CheckConfig) -> Result<TrialReport> {
    const ID: &str = "geometric_mean_concavity";
    let mut cells = Vec::new();
    for &dim in &cfg.dims {
        let base = cell_base(cfg, ID, "geometric_mean", dim);
        cells.push(run_cell(dim, "geometric_mean", cfg.trials, &base, |_, s| {
            let e = ensemble(cfg, dim);
            let mut rng = s.rng();
            let a1 = random_pd(&e, &mut rng)?;
            let b1 = random_pd(&e, &mut rng)?;
            let a2 = random_pd(&e, &mut rng)?;
            let b2 = random_pd(&e, &mut rng)?;
            let m1 = geometric_mean(&a1, &b1)?;
            let m2 = geometric_mean(&a2, &b2)?;
            let lhs = combine(0.5, m1.as_hermitian(), m2.as_hermitian());
            let a = PdMatrix::new(combine(0.5, a1.as_hermitian(), a2.as_hermitian()))?;
            let b = PdMatrix::new(combine(0.5, b1.as_hermitian(), b2.as_hermitian()))?;
            let rhs = geometric_mean(&a, &b)?;
            let concavity = loewner_leq(&lhs, rhs.as_hermitian(), cfg.tol)?;
            let swapped = geometric_mean(&b1, &a1)?;
            Ok(vec![
                Assertion::new("concavity", concavity.relative_margin(), cfg.tol),
                equality("symmetry", m1.as_hermitian(), swapped.as_hermitian(), cfg.tol)?,
            ])
        }));
    }
    Ok(finish(ID, cfg, cells))
}

/// Relative entropy equals the trace of the `-log` perspective on commuting
/// pairs; on non-commuting pairs a strictly separating example is recorded.
pub fn check_relative_entropy_commuting(cfg: &CheckConfig) -> Result<TrialReport> {
    const ID: &str = "relative_entropy_commuting";
    let mut cells = Vec::new();
    for &dim in &cfg.dims {
        let base = cell_base(cfg, ID, "commuting", dim);
        cells.push(run_cell(dim, "commuting", cfg.trials, &base, |_, s| {
            let (a, b) = random_commuting_pd_pair(&ensemble(cfg, dim), &mut s.rng())?;
            let entropy = relative_entropy(&a, &b)?;
            let trace = trace_perspective_neg_log(&a, &b)?;
            Ok(vec![Assertion::deviation(
                "commuting_equality",
                (entropy - trace).abs(),
                1.0 + entropy.abs(),
                cfg.tol,
            )])
        }));
    }
    for &dim in cfg.dims.iter().filter(|&&d| d >= 2) {
        let base = cell_base(cfg, ID, "noncommuting", dim);
        let trial = |i: usize| {
            let s = base.child(format!("t{i}"));
            let outcome = (|| {
                let e = ensemble(cfg, dim);
                let mut rng = s.rng();
                let a = random_pd(&e, &mut rng)?;
                let b = random_pd(&e, &mut rng)?;
                let gap = trace_perspective_neg_log(&a, &b)? - relative_entropy(&a, &b)?;
                Ok((a, b, gap))
            })();
            (s.path_string(), outcome)
        };
        let separating = |o: &(String, Result<(PdMatrix, PdMatrix, f64)>)| match &o.1 {
            Ok((_, _, gap)) => gap.abs() > SEPARATION_GAP,
            Err(_) => true,
        };
        let scanned = scan_until(cfg.trials, trial, separating);
        let mut cell = CellBuilder::new(dim, "noncommuting");
        cell.add_trials(scanned.len());
        let last = scanned.len() - 1;
        match scanned.into_iter().nth(last).expect("at least one trial") {
            (path, Err(e)) => cell.record_assertions(last, path, Err(e)),
            (path, Ok((a, b, gap))) if gap.abs() > SEPARATION_GAP => cell.set_witness(Witness {
                trial: last,
                seed_path: path,
                margin: gap,
                lambda: None,
                matrices: [("a".to_string(), a.into_hermitian()), ("b".to_string(), b.into_hermitian())].into(),
            }),
            (path, Ok(_)) => cell.record_assertions(
                last,
                path,
                Err(Error::InvalidArgument(format!(
                    "no pair separated by more than {SEPARATION_GAP} within {} trials",
                    cfg.trials
                ))),
            ),
        }
        cells.push(cell.finish());
    }
    Ok(finish(ID, cfg, cells))
}

/// Outcome of searching for a joint convexity violation of one function.
#[derive(Clone, Debug)]
pub struct ViolationSearch {
    pub f: String,
    /// One cell per dimension that was sampled.
    pub cells: Vec<CellReport>,
    /// Dimension and witness of the first violating trial.
    pub found: Option<(usize, Witness)>,
    pub trials_run: usize,
}

/// Scans joint convexity trials (dimension `dims[i % len]` for trial `i`)
/// until the inequality fails beyond `tol` or `search_budget` trials ran.
/// A witness is replayed from its seed path before it is reported.
pub fn search_violation(f: &ScalarFunction, cfg: &CheckConfig) -> Result<ViolationSearch> {
    const ID: &str = "detect_violation_control";
    cfg.validate()?;
    let dim_of = |i: usize| cfg.dims[i % cfg.dims.len()];
    let trial = |i: usize| {
        let dim = dim_of(i);
        let s = cell_base(cfg, ID, f.id(), dim).child(format!("t{i}"));
        (s.path_string(), joint_convexity_sample(f, cfg, dim, i, &s))
    };
    let violated = |o: &(String, Result<JointConvexitySample>)| matches!(&o.1, Ok(s) if !s.comparison.holds);
    let scanned = scan_until(cfg.search_budget, trial, violated);
    let trials_run = scanned.len();

    let mut builders: BTreeMap<usize, CellBuilder> = BTreeMap::new();
    let mut found = None;
    for (i, (path, outcome)) in scanned.into_iter().enumerate() {
        let dim = dim_of(i);
        let cell = builders.entry(dim).or_insert_with(|| CellBuilder::new(dim, f.id()));
        match outcome {
            Err(e) => cell.record(i, path, Err(e)),
            Ok(sample) => {
                let margin = sample.comparison.relative_margin();
                cell.record(i, path.clone(), Ok(vec![Assertion::new("loewner", margin, f64::INFINITY)]));
                if sample.comparison.holds {
                    continue;
                }
                let replay = replay_joint_convexity(f, cfg, dim, i, &path)?;
                if replay.comparison != sample.comparison || replay.matrices() != sample.matrices() {
                    cell.record_assertions(
                        i,
                        path,
                        Err(Error::InvalidArgument("witness did not replay from its seed path".into())),
                    );
                    continue;
                }
                let witness = Witness {
                    trial: i,
                    seed_path: path,
                    margin,
                    lambda: Some(sample.lambda),
                    matrices: sample.matrices(),
                };
                cell.set_witness(witness.clone());
                found = Some((dim, witness));
            }
        }
    }
    Ok(ViolationSearch {
        f: f.id().to_string(),
        cells: builders.into_values().map(CellBuilder::finish).collect(),
        found,
        trials_run,
    })
}

/// Every selected control function must yield a replayable violation.
pub fn check_detect_violation_control(cfg: &CheckConfig) -> Result<TrialReport> {
    const ID: &str = "detect_violation_control";
    let functions = control_functions(cfg)?;
    require_any(ID, &functions)?;
    let mut cells = Vec::new();
    let mut all_found = true;
    for f in &functions {
        let search = search_violation(f, cfg)?;
        all_found &= search.found.is_some();
        cells.extend(search.cells);
    }
    let mut report = finish(ID, cfg, cells);
    report.passed &= all_found;
    Ok(report)
}
