//! Property tests over randomly generated models and drivers.

use jumpem_core::diagnostics::{crossing_statistic, occupation_time};
use jumpem_core::{
    sample_driver, simulate_em, AffineFn, CoefficientModel, IntensityFn, PiecewisePoly, Polynomial,
    TimeGrid, TransformG,
};
use proptest::prelude::*;

/// A model with 1..=3 breakpoints in [-2, 2], cubic inner pieces, affine outer
/// pieces, a guaranteed drift jump at every breakpoint and sigma bounded away from 0.
fn arb_model() -> impl Strategy<Value = CoefficientModel> {
    (1usize..=3)
        .prop_flat_map(|m| {
            (
                prop::collection::vec(0.2f64..1.5, m),
                prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 4), m + 1),
                prop::collection::vec(prop_oneof![-3.0f64..-0.1, 0.1f64..3.0], m),
                0.2f64..1.0,
                -0.1f64..0.1,
                -0.5f64..0.5,
                -1.0f64..1.0,
            )
        })
        .prop_map(|(gaps, coeffs, jumps, s0, s1, r1, xi)| {
            let mut breakpoints = Vec::with_capacity(gaps.len());
            let mut z = -2.0;
            for g in gaps {
                z += g;
                breakpoints.push(z);
            }
            let last = coeffs.len() - 1;
            let mut pieces: Vec<Vec<f64>> = coeffs
                .into_iter()
                .enumerate()
                .map(|(i, mut c)| {
                    if i == 0 || i == last {
                        c.truncate(2);
                    }
                    c
                })
                .collect();
            // shift each piece so the drift jumps by the requested amount
            for (k, (&zeta, &jump)) in breakpoints.iter().zip(&jumps).enumerate() {
                let left = Polynomial::new(pieces[k].clone()).unwrap().eval(zeta);
                let right = Polynomial::new(pieces[k + 1].clone()).unwrap().eval(zeta);
                pieces[k + 1][0] += left + jump - right;
            }
            let pieces = pieces
                .into_iter()
                .map(|c| Polynomial::new(c).unwrap())
                .collect();
            CoefficientModel::new(
                PiecewisePoly::new(breakpoints, pieces).unwrap(),
                AffineFn::new(s0, s1),
                AffineFn::new(0.0, r1),
                IntensityFn::new(vec![0.0, 0.5], vec![1.0, 2.0]).unwrap(),
                xi,
                1.0,
            )
            .unwrap()
        })
}

fn arb_builtin() -> impl Strategy<Value = CoefficientModel> {
    prop_oneof![Just("example1"), Just("example2")]
        .prop_map(|n| CoefficientModel::builtin(n).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn drift_obeys_linear_growth(model in arb_model()) {
        let c = model.growth_constants().mu;
        for i in 0..=10_000 {
            let x = -100.0 + 200.0 * i as f64 / 10_000.0;
            prop_assert!(model.eval_mu(x).abs() <= c * (1.0 + x.abs()) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn one_sided_limits_match_nearby_values(model in arb_model()) {
        let lips = model.mu().lipschitz_constants();
        for k in 1..=model.breakpoints().len() {
            let zeta = model.breakpoints()[k - 1];
            let (left, right) = model.one_sided_limits(k).unwrap();
            let l = lips[k - 1].max(lips[k]);
            for h in [1e-3, 1e-5, 1e-7] {
                prop_assert!((model.eval_mu(zeta - h) - left).abs() <= 10.0 * h * l + 1e-12);
                prop_assert!((model.eval_mu(zeta + h) - right).abs() <= 10.0 * h * l + 1e-12);
            }
        }
    }

    #[test]
    fn cumulative_intensity_is_monotone_and_bounded(
        values in prop::collection::vec(0.0f64..5.0, 1..5),
        ts in prop::collection::vec(0.0f64..1.0, 2..20),
    ) {
        let n = values.len();
        let knots: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let lambda = IntensityFn::new(knots, values).unwrap();
        let model = CoefficientModel::new(
            PiecewisePoly::affine(0.0, 0.0), AffineFn::zero(), AffineFn::zero(), lambda.clone(), 0.0, 1.0,
        ).unwrap();
        let mut ts = ts;
        ts.sort_by(f64::total_cmp);
        let kappas: Vec<f64> = ts.iter().map(|&t| model.cumulative_intensity(t).unwrap()).collect();
        prop_assert!(kappas.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(model.cumulative_intensity(1.0).unwrap() <= lambda.sup() * 1.0 * (1.0 + 1e-12));
        prop_assert!(model.cumulative_intensity(1.5).is_err());
    }

    #[test]
    fn transform_invariants_hold(model in arb_model(), seed in any::<u64>()) {
        let t = TransformG::build(&model).unwrap();
        let report = t.check_invariants(2_000, seed);
        prop_assert_eq!(report.monotonicity_violations, 0);
        prop_assert!(report.max_roundtrip_error <= 1e-10, "roundtrip {}", report.max_roundtrip_error);
        prop_assert!(report.fixed_points_exact && report.identity_outside_exact);
        prop_assert!(report.min_g_prime > 0.0);
        prop_assert!(report.tilde_mu_lipschitz.is_finite());
    }

    #[test]
    fn transform_is_monotone_and_invertible(model in arb_model(), xs in prop::collection::vec(-3.0f64..3.0, 2..50)) {
        let t = TransformG::build(&model).unwrap();
        let mut xs = xs;
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        for w in xs.windows(2) {
            prop_assert!(t.g(w[0]) < t.g(w[1]));
        }
        for &x in &xs {
            prop_assert!((t.inverse(t.g(x)) - x).abs() <= 1e-10);
        }
        for &zeta in t.zetas() {
            prop_assert_eq!(t.g(zeta), zeta);
        }
    }

    #[test]
    fn coarse_levels_aggregate_exactly(seed in any::<u64>(), path in 0u64..1000, finest_exp in 2u32..10) {
        let lambda = IntensityFn::constant(3.0).unwrap();
        let finest = TimeGrid::new(1.0, 1 << finest_exp).unwrap();
        let d = sample_driver(seed, path, finest, &lambda);
        for fine_exp in 1..=finest_exp {
            let fine = d.increments_at_level(&TimeGrid::new(1.0, 1 << fine_exp).unwrap()).unwrap();
            for coarse_exp in 0..fine_exp {
                let direct = d.increments_at_level(&TimeGrid::new(1.0, 1 << coarse_exp).unwrap()).unwrap();
                let via = fine.coarsen(1 << (fine_exp - coarse_exp)).unwrap();
                prop_assert_eq!(&direct.brownian, &via.brownian);
                prop_assert_eq!(&direct.counts, &via.counts);
            }
        }
        prop_assert_eq!(d.increments_at_level(&finest).unwrap().counts.iter().map(|&c| c as usize).sum::<usize>(),
            d.event_times().len());
    }

    #[test]
    fn drivers_are_pure_functions_of_their_keys(seed in any::<u64>(), path in any::<u64>()) {
        let lambda = IntensityFn::new(vec![0.0, 0.25], vec![0.5, 4.0]).unwrap();
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let a = sample_driver(seed, path, grid, &lambda);
        let b = sample_driver(seed, path, grid, &lambda);
        prop_assert_eq!(a.brownian_increments(), b.brownian_increments());
        prop_assert_eq!(a.event_times(), b.event_times());
    }

    #[test]
    fn pure_jump_scheme_is_exact(b8 in -16i32..16, xi16 in -80i32..80, seed in any::<u64>(), exp in 0u32..8) {
        // dyadic b and xi keep every partial sum exactly representable
        let (b, xi) = (f64::from(b8) / 8.0, f64::from(xi16) / 16.0);
        let model = CoefficientModel::new(
            PiecewisePoly::affine(0.0, 0.0), AffineFn::zero(), AffineFn::new(b, 0.0),
            IntensityFn::constant(2.0).unwrap(), xi, 1.0,
        ).unwrap();
        let grid = TimeGrid::new(1.0, 1 << exp).unwrap();
        let d = sample_driver(seed, 0, grid.refined(4).unwrap(), model.lambda());
        let x = simulate_em(&model, grid, &d).unwrap();
        prop_assert_eq!(x.terminal(), xi + b * d.event_times().len() as f64);
    }

    #[test]
    fn continuous_extension_hits_nodes(model in arb_builtin(), seed in any::<u64>()) {
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let d = sample_driver(seed, 0, grid.refined(8).unwrap(), model.lambda());
        let x = simulate_em(&model, grid, &d).unwrap();
        for k in 0..=32 {
            prop_assert_eq!(x.evaluate_continuous(grid.node(k)).unwrap(), x.values()[k]);
        }
    }

    #[test]
    fn pathwise_diagnostic_bounds(model in arb_builtin(), seed in any::<u64>(), start in -0.05f64..0.15) {
        let model = model.with_xi(start);
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let d = sample_driver(seed, 0, grid.refined(16).unwrap(), model.lambda());
        let x = simulate_em(&model, grid, &d).unwrap();
        let mut previous = 0.0;
        for eps in [0.005, 0.01, 0.02, 0.04, 0.08] {
            let occ = occupation_time(&x, 0.0, eps, 16).unwrap();
            prop_assert!((0.0..=1.0).contains(&occ));
            prop_assert!(occ >= previous);
            previous = occ;
        }
        let cross = crossing_statistic(&x, 0.0, 16).unwrap();
        prop_assert!((0.0..=1.0).contains(&cross));
    }
}
