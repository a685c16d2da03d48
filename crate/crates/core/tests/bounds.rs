use std::sync::Arc;

use opspace::bounds::{self, BallAverager, RadialProfile};
use opspace::calculus::eig;
use opspace::operators::{self, FieldPreset};
use opspace::{Boundary, DyadicSystem, Error, Grid, GridFunction, GridSpec, PotentialSpec, WindowFamily};
use proptest::prelude::*;

fn grid(dim: usize, n: usize, h: f64, b: Boundary) -> Arc<Grid> {
    Arc::new(Grid::new(&GridSpec::new(dim, n, h, b)).unwrap())
}

#[test]
fn decay_constant_matches_a_direct_loop() {
    let g = grid(2, 6, 1.0 / 6.0, Boundary::Dirichlet);
    let v = FieldPreset::Checkerboard { low: 0.0, high: 30.0 }.grid_function(g.clone()).unwrap();
    let dec = eig(&operators::schrodinger(g.clone(), &PotentialSpec::from_signed(&v).unwrap()).unwrap()).unwrap();
    let sys = DyadicSystem::covering(dec.spectral_radius(), Default::default()).unwrap();
    let eps = 0.5;
    let mut nonzero = 0;
    for j in 0..=sys.j_max() {
        let k = dec.kernel_matrix(|l| sys.window(j, l)).unwrap();
        let s = (j as f64 / 2.0).exp2();
        let mut direct = 0.0f64;
        for x in 0..g.len() {
            for y in 0..g.len() {
                let r = g.distance(x, y);
                direct = direct.max(k.get(x, y).norm() * (1.0 + s * r).powf(2.0 + eps) / (s * s));
            }
        }
        let lib = bounds::decay_constant(&dec, &sys, j, eps).unwrap();
        nonzero += usize::from(direct > 0.0);
        assert!((lib - direct).abs() <= 1e-12 * direct, "j = {j}: {lib} vs {direct}");
    }
    assert!(nonzero >= 3);
}

#[test]
fn decay_rejects_nonpositive_epsilon() {
    let g = grid(1, 8, 0.125, Boundary::Periodic);
    let dec = eig(&operators::laplacian(g).unwrap()).unwrap();
    let sys = DyadicSystem::covering(dec.spectral_radius(), Default::default()).unwrap();
    for eps in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        assert!(matches!(bounds::decay_suite(&dec, &sys, eps, 1e3, 10.0), Err(Error::Domain(_))));
    }
}

#[test]
fn kernel_matrix_reproduces_the_calculus_and_heat_conserves_mass() {
    let g = grid(1, 40, 0.025, Boundary::Periodic);
    let dec = eig(&operators::laplacian(g.clone()).unwrap()).unwrap();
    let f = FieldPreset::Random { seed: 8, low: -1.0, high: 1.0 }.grid_function(g.clone()).unwrap();
    let k = dec.heat_kernel(0.003).unwrap();
    let via_kernel = k.apply(&f);
    let via_calculus = dec.apply_function(|l| (-0.003 * l).exp(), &f).unwrap();
    assert!(via_kernel.sub(&via_calculus).lp_norm(f64::INFINITY).unwrap() <= 1e-12);
    for m in k.row_mass() {
        assert!((m.re - 1.0).abs() <= 1e-12 && m.im.abs() <= 1e-12);
    }
    assert!(dec.heat_kernel(0.0).is_err());
}

#[test]
fn heat_fit_validates_inputs_and_flags_times() {
    let g = grid(1, 32, 0.125, Boundary::Periodic);
    let dec = eig(&operators::laplacian(g).unwrap()).unwrap();
    assert!(bounds::heat_bound_fit(&dec, &[0.1], 0.0).is_err());
    assert!(bounds::heat_bound_fit(&dec, &[], 0.1).is_err());
    let fit = bounds::heat_bound_fit(&dec, &[1e-4, 0.1, 1e4], 0.125).unwrap();
    assert!(fit.per_t[0].outside_window);
    assert!(!fit.per_t[1].outside_window && !fit.per_t[1].ground_state_regime);
    assert!(fit.per_t[2].ground_state_regime);
    assert_eq!(fit.resolved_times, 1);
    assert!(!fit.warnings.is_empty());
}

#[test]
fn maximal_lemma_is_exact_for_constants() {
    let g = grid(2, 12, 0.25, Boundary::Periodic);
    let fs = vec![GridFunction::constant(g, 2.0)];
    for prof in [RadialProfile::BallIndicator, RadialProfile::Exponential, RadialProfile::Gaussian] {
        let rep = bounds::maximal_lemma_check(&prof, &[0, 1, 2, 3, 4], &fs).unwrap();
        for (j, c) in &rep.per_j {
            assert!((c - 1.0).abs() <= 1e-12, "{prof:?} j = {j}: {c}");
        }
    }
}

#[test]
fn tabulated_profiles_are_validated() {
    let bad = [
        RadialProfile::Tabulated { knots: vec![] },
        RadialProfile::Tabulated { knots: vec![(0.0, 1.0), (1.0, 2.0)] },
        RadialProfile::Tabulated { knots: vec![(1.0, 1.0), (0.5, 0.5)] },
        RadialProfile::Tabulated { knots: vec![(0.0, -1.0)] },
    ];
    let g = grid(1, 8, 0.5, Boundary::Periodic);
    let fs = vec![GridFunction::constant(g, 1.0)];
    for p in bad {
        assert!(bounds::maximal_lemma_check(&p, &[0], &fs).is_err(), "{p:?}");
    }
    let ok = RadialProfile::Tabulated { knots: vec![(0.0, 1.0), (1.0, 0.5), (2.0, 0.0)] };
    assert_eq!(ok.eval(0.5), 0.75);
    assert_eq!(ok.eval(3.0), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn maximal_operator_is_sublinear_homogeneous_and_dominating(
        a in prop::collection::vec(-1.0f64..1.0, 30),
        b in prop::collection::vec(-1.0f64..1.0, 30),
        alpha in -4.0f64..4.0,
    ) {
        let g = grid(1, 30, 0.1, Boundary::Dirichlet);
        let ba = BallAverager::new(g.clone());
        let f = GridFunction::from_real(g.clone(), a).unwrap();
        let h = GridFunction::from_real(g.clone(), b).unwrap();
        let (mf, mh) = (ba.maximal(&f), ba.maximal(&h));
        let sum = ba.maximal(&f.add(&h));
        let scaled = ba.maximal(&f.scale(alpha));
        for x in 0..g.len() {
            prop_assert!(mf[x] >= f.values()[x].norm() - 1e-15);
            prop_assert!(sum[x] <= mf[x] + mh[x] + 1e-14);
            prop_assert!((scaled[x] - alpha.abs() * mf[x]).abs() <= 1e-14 * alpha.abs().max(1.0));
        }
    }
}
