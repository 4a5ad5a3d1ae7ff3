use perspecta_core::ensembles::{random_pd, random_unitary, EnsembleConfig, RngStream};
use perspecta_core::io::{matrix_to_string, parse_matrix};
use perspecta_core::matrix::max_abs_diff;
use perspecta_core::{
    apply_function, congruence, eig, hermitize, inv_sqrt_pd, loewner_leq, lookup, perspective, sqrt_pd, CMatrix,
    HermitianMatrix, PdMatrix, PerspectiveOrder,
};
use proptest::prelude::*;

fn draw(seed: u64, dim: usize, label: &str) -> (PdMatrix, PdMatrix, CMatrix) {
    let cfg = EnsembleConfig::new(dim);
    let mut rng = RngStream::new(seed).child(label).rng();
    let a = random_pd(&cfg, &mut rng).unwrap();
    let b = random_pd(&cfg, &mut rng).unwrap();
    let u = random_unitary(&cfg, &mut rng).unwrap();
    (a, b, u)
}

fn rel_diff(x: &HermitianMatrix, y: &HermitianMatrix) -> f64 {
    x.max_abs_diff(y) / x.max_abs().max(y.max_abs()).max(1.0)
}

const FUNCTIONS: [&str; 8] = ["neg_log", "t_log_t", "inv", "square", "sqrt", "pow(1.5)", "pow(-0.5)", "quart"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn spectral_mapping(seed in any::<u64>(), dim in 1usize..6, k in 0usize..FUNCTIONS.len()) {
        let f = lookup(FUNCTIONS[k]).unwrap();
        let (a, _, _) = draw(seed, dim, "spectral");
        let fa = apply_function(&f, a.as_hermitian(), 0.0).unwrap();
        let mut expected: Vec<f64> = a.spectral().eigenvalues.iter().map(|&l| f.eval(l)).collect();
        expected.sort_by(f64::total_cmp);
        let got = eig(&fa).unwrap().eigenvalues;
        let scale = expected.iter().fold(1.0_f64, |s, v| s.max(v.abs()));
        for (g, e) in got.iter().zip(&expected) {
            prop_assert!((g - e).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn functional_calculus_is_unitarily_covariant(seed in any::<u64>(), dim in 1usize..6, k in 0usize..FUNCTIONS.len()) {
        let f = lookup(FUNCTIONS[k]).unwrap();
        let (a, _, u) = draw(seed, dim, "covariance");
        let rotated = congruence(&u, a.as_hermitian()).unwrap();
        let lhs = apply_function(&f, &rotated, 0.0).unwrap();
        let rhs = congruence(&u, &apply_function(&f, a.as_hermitian(), 0.0).unwrap()).unwrap();
        prop_assert!(rel_diff(&lhs, &rhs) <= 1e-9);
    }

    #[test]
    fn perspective_is_unitarily_covariant(seed in any::<u64>(), dim in 1usize..6, k in 0usize..FUNCTIONS.len(), first in any::<bool>()) {
        let f = lookup(FUNCTIONS[k]).unwrap();
        let order = if first { PerspectiveOrder::WeightFirst } else { PerspectiveOrder::WeightSecond };
        let (a, b, u) = draw(seed, dim, "perspective");
        let au = PdMatrix::new(congruence(&u, a.as_hermitian()).unwrap()).unwrap();
        let bu = PdMatrix::new(congruence(&u, b.as_hermitian()).unwrap()).unwrap();
        let lhs = perspective(&f, &au, &bu, order).unwrap().value;
        let rhs = congruence(&u, &perspective(&f, &a, &b, order).unwrap().value).unwrap();
        prop_assert!(rel_diff(&lhs, &rhs) <= 1e-9);
    }

    #[test]
    fn square_roots_round_trip(seed in any::<u64>(), dim in 1usize..7) {
        let (a, _, _) = draw(seed, dim, "sqrt");
        let s = sqrt_pd(&a).unwrap();
        let back = hermitize(&(s.matrix() * s.matrix())).unwrap();
        prop_assert!(rel_diff(&back, a.as_hermitian()) <= 1e-12);
        let t = inv_sqrt_pd(&a).unwrap();
        let id = t.matrix() * a.matrix() * t.matrix();
        prop_assert!(max_abs_diff(&id, &CMatrix::identity(dim, dim)) <= 1e-11);
    }

    #[test]
    fn loewner_order_is_reflexive_and_antisymmetric(seed in any::<u64>(), dim in 1usize..6) {
        let (a, b, _) = draw(seed, dim, "loewner");
        prop_assert!(loewner_leq(a.as_hermitian(), a.as_hermitian(), 0.0).unwrap().holds);
        let bigger = a.as_hermitian() + b.as_hermitian();
        prop_assert!(loewner_leq(a.as_hermitian(), &bigger, 1e-12).unwrap().holds);
        let reverse = loewner_leq(&bigger, a.as_hermitian(), 1e-12).unwrap();
        prop_assert!(!reverse.holds);
        prop_assert!((reverse.margin + b.eigmax()).abs() <= 1e-9 * reverse.scale);
    }

    #[test]
    fn json_round_trip_is_bit_exact(seed in any::<u64>(), dim in 1usize..7, real in any::<bool>()) {
        let mut cfg = EnsembleConfig::new(dim);
        if real {
            cfg = cfg.real();
        }
        let h = random_pd(&cfg, &mut RngStream::new(seed).child("json").rng()).unwrap().into_hermitian();
        let back = parse_matrix(&matrix_to_string(&h)).unwrap();
        for (x, y) in h.matrix().iter().zip(back.matrix().iter()) {
            prop_assert_eq!(x.re.to_bits(), y.re.to_bits());
            prop_assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
    }

    #[test]
    fn order_swap_transposes_the_function(seed in any::<u64>(), dim in 1usize..6) {
        // s·(1/(t/s)) and t·(s/t)² are both s²/t; the matrix forms are B A⁻¹ B.
        let (a, b, _) = draw(seed, dim, "swap");
        let inv = lookup("inv").unwrap();
        let square = lookup("square").unwrap();
        let lhs = perspective(&inv, &a, &b, PerspectiveOrder::WeightSecond).unwrap().value;
        let rhs = perspective(&square, &a, &b, PerspectiveOrder::WeightFirst).unwrap().value;
        let a_inv = a.matrix().clone().try_inverse().unwrap();
        let direct = hermitize(&(b.matrix() * a_inv * b.matrix())).unwrap();
        prop_assert!(rel_diff(&lhs, &direct) <= 1e-9);
        prop_assert!(rel_diff(&rhs, &direct) <= 1e-9);
    }

    #[test]
    fn perspective_is_homogeneous(seed in any::<u64>(), dim in 1usize..6, t in 0.01f64..100.0, k in 0usize..FUNCTIONS.len()) {
        let f = lookup(FUNCTIONS[k]).unwrap();
        let (a, b, _) = draw(seed, dim, "homogeneous");
        let at = PdMatrix::new(a.as_hermitian().scale(t)).unwrap();
        let bt = PdMatrix::new(b.as_hermitian().scale(t)).unwrap();
        let p = perspective(&f, &a, &b, PerspectiveOrder::WeightFirst).unwrap().value;
        let pt = perspective(&f, &at, &bt, PerspectiveOrder::WeightFirst).unwrap().value;
        prop_assert!(rel_diff(&pt, &p.scale(t)) <= 1e-9);
    }
}
