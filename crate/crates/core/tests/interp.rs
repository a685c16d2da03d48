use opspace::interp::{
    self, interpolate_exponent, k_functional, k_profile, real_interp_norm, weighted_norm, SequenceCouple, Side, ThetaParams,
};
use proptest::prelude::*;

fn exponent() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(2.0), Just(f64::INFINITY), 1.0f64..6.0]
}

fn couple() -> impl Strategy<Value = SequenceCouple> {
    (
        prop::collection::vec(-2.0f64..2.0, 1..6),
        -1.0f64..1.0,
        0.25f64..2.0,
        any::<bool>(),
        exponent(),
        exponent(),
    )
        .prop_map(|(a, s0, gap, up, q0, q1)| {
            let s1 = if up { s0 + gap } else { s0 - gap };
            SequenceCouple::new(a, Side::new(s0, q0).unwrap(), Side::new(s1, q1).unwrap()).unwrap()
        })
}

fn k(t: f64, c: &SequenceCouple) -> f64 {
    k_functional(t, c).unwrap().value
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn k_is_bounded_by_either_side(c in couple(), lt in -6.0f64..6.0) {
        let t = lt.exp2();
        let v = k(t, &c);
        prop_assert!(v >= 0.0);
        prop_assert!(v <= c.norm0().min(t * c.norm1()) * (1.0 + 1e-12));
    }

    #[test]
    fn k_is_homogeneous(c in couple(), lt in -6.0f64..6.0, alpha in -4.0f64..4.0) {
        let t = lt.exp2();
        let scaled: Vec<f64> = c.values().iter().map(|v| alpha * v).collect();
        let cs = SequenceCouple::new(scaled, c.side0(), c.side1()).unwrap();
        let (a, b) = (k(t, &cs), alpha.abs() * k(t, &c));
        prop_assert!((a - b).abs() <= 1e-9 * b.max(1e-300));
    }

    #[test]
    fn k_is_symmetric_under_swapping_sides(c in couple(), lt in -6.0f64..6.0) {
        let t = lt.exp2();
        let swapped = SequenceCouple::new(c.values().to_vec(), c.side1(), c.side0()).unwrap();
        let (a, b) = (k(t, &c), t * k(1.0 / t, &swapped));
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-300));
    }

    #[test]
    fn k_is_increasing_concave_and_k_over_t_decreasing(c in couple(), lt in -6.0f64..5.0, r1 in 0.1f64..2.0, r2 in 0.1f64..2.0) {
        let t0 = lt.exp2();
        let t1 = t0 * (1.0 + r1);
        let t2 = t1 * (1.0 + r2);
        let (k0, k1, k2) = (k(t0, &c), k(t1, &c), k(t2, &c));
        let tol = 1e-10 * c.norm0().max(1e-300);
        prop_assert!(k1 >= k0 - tol && k2 >= k1 - tol);
        let lam = (t2 - t1) / (t2 - t0);
        prop_assert!(k1 >= lam * k0 + (1.0 - lam) * k2 - tol);
        prop_assert!(k2 / t2 <= k1 / t1 * (1.0 + 1e-10) && k1 / t1 <= k0 / t0 * (1.0 + 1e-10));
    }

    #[test]
    fn split_reproduces_the_sequence(c in couple(), lt in -6.0f64..6.0) {
        let t = lt.exp2();
        let r = k_functional(t, &c).unwrap();
        for ((a0, a1), a) in r.split0.iter().zip(&r.split1).zip(c.values()) {
            prop_assert!((a0 + a1 - a).abs() <= 1e-14 * a.max(1.0));
        }
        prop_assert!((c.objective(t, &r.split0) - r.value).abs() <= 1e-12 * r.value.max(1e-300));
    }

    #[test]
    fn holder_inequality(
        a in prop::collection::vec(-1.0f64..1.0, 1..20),
        seedw in prop::collection::vec((-6.0f64..6.0, -6.0f64..6.0), 20),
        p0 in exponent(),
        p1 in exponent(),
        theta in 0.01f64..0.99,
    ) {
        let n = a.len();
        let w0: Vec<f64> = seedw[..n].iter().map(|w| w.0.exp2()).collect();
        let w1: Vec<f64> = seedw[..n].iter().map(|w| w.1.exp2()).collect();
        let w: Vec<f64> = w0.iter().zip(&w1).map(|(x, y)| x.powf(1.0 - theta) * y.powf(theta)).collect();
        let p = interpolate_exponent(theta, p0, p1);
        let mid = weighted_norm(&a, &w, p);
        let bound = weighted_norm(&a, &w0, p0).powf(1.0 - theta) * weighted_norm(&a, &w1, p1).powf(theta);
        prop_assert!(mid <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn profile_matches_pointwise_solver(c in couple()) {
        prop_assume!(!c.is_zero());
        let p = k_profile(&c).unwrap();
        for i in (0..p.t.len()).step_by(7) {
            let direct = k(p.t[i], &c);
            prop_assert!((p.k[i] - direct).abs() <= 1e-10 * direct.max(1e-300));
        }
        prop_assert!((p.k[0] / (p.t[0] * p.norm1) - 1.0).abs() <= 1e-12);
        prop_assert!((p.k[p.k.len() - 1] / p.norm0 - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn single_coordinate_norm_has_closed_form() {
    for (theta, r) in [(0.3, 1.0), (0.5, 2.0), (0.7, 3.0), (0.5, f64::INFINITY)] {
        let prm = ThetaParams::new(theta, r, Side::new(0.0, 2.0).unwrap(), Side::new(1.0, 1.0).unwrap()).unwrap();
        // the entry sits at j = 0, where both weights are one
        let c = SequenceCouple::new(vec![2.5], prm.side0, prm.side1).unwrap();
        let got = real_interp_norm(&c, &prm).unwrap();
        let expect = 2.5 * interp::single_coordinate_constant(theta, r);
        assert!((got / expect - 1.0).abs() <= 1e-9, "θ = {theta}, r = {r}: {got} vs {expect}");
    }
}

#[test]
fn zero_sequence_has_zero_norm() {
    let prm = ThetaParams::new(0.5, 2.0, Side::new(0.0, 2.0).unwrap(), Side::new(1.0, 2.0).unwrap()).unwrap();
    let c = SequenceCouple::new(vec![0.0; 4], prm.side0, prm.side1).unwrap();
    assert_eq!(real_interp_norm(&c, &prm).unwrap(), 0.0);
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(Side::new(0.0, 0.5).is_err());
    assert!(Side::new(f64::NAN, 2.0).is_err());
    let s = Side::new(0.0, 2.0).unwrap();
    assert!(ThetaParams::new(0.0, 2.0, s, s).is_err());
    assert!(ThetaParams::new(1.0, 2.0, s, s).is_err());
    assert!(SequenceCouple::new(vec![], s, s).is_err());
    assert!(SequenceCouple::new(vec![f64::INFINITY], s, s).is_err());
    let prm = ThetaParams::new(0.5, 2.0, s, s).unwrap();
    assert!(interp::verify_sequence_identity(4, 8, &prm, 1).is_err());
}

#[test]
fn sequence_identity_is_seeded() {
    let prm = ThetaParams::new(0.5, 2.0, Side::new(0.0, 2.0).unwrap(), Side::new(1.0, 2.0).unwrap()).unwrap();
    let a = interp::verify_sequence_identity(10, 8, &prm, 9).unwrap();
    let b = interp::verify_sequence_identity(10, 8, &prm, 9).unwrap();
    assert_eq!(a.band.min.to_bits(), b.band.min.to_bits());
    assert_eq!(a.band.max.to_bits(), b.band.max.to_bits());
    assert!(a.band.min > 1.0 && a.band.max < 2.0);
}

/// At `t = w₀_j / w₁_j` a coordinate move is neutral; descent must not stop
/// there when another coordinate can still improve.
#[test]
fn solver_does_not_stall_at_a_coordinate_crossover() {
    let c = SequenceCouple::new(
        vec![0.0, 0.0, 0.0, 1.7498088457083436, 1.059128988859709],
        Side::new(0.0, 1.0).unwrap(),
        Side::new(-0.7591393933168414, 1.751893634127097).unwrap(),
    )
    .unwrap();
    let t = c.weights0()[4] / c.weights1()[4];
    let at = k(t, &c);
    let (below, above) = (k(t * (1.0 - 1e-9), &c), k(t * (1.0 + 1e-9), &c));
    assert!(at >= below - 1e-12 && at <= above + 1e-12, "{below} {at} {above}");
    assert!(at < c.norm0() * 0.99);
}
