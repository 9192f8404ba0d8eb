use polycbo::cli::laplace_instance;
use polycbo::consensus::{consensus_all, consensus_point, Ensemble, WeightKernel};
use polycbo::diagnostics::{fit_exponential_rate, phi_test};
use polycbo::dynamics::{init_ensemble, step, DynamicsConfig, InitSpec};
use polycbo::meanfield::{cfl_dt, fp_step, init_density, ConsensusOperator, FpParams, Grid1D};
use polycbo::objectives::{
    check_assumption_lower, make_builtin, multi_well, ConvexComponent, MinimizerSet, ObjectiveSpec,
};
use polycbo::rng::StreamKey;
use proptest::prelude::*;
use serde_json::json;

fn kernel() -> impl Strategy<Value = WeightKernel> {
    prop_oneof![
        Just(WeightKernel::StandardGibbs),
        (0.1f64..5.0).prop_map(|theta| WeightKernel::Polarized { theta }),
        (0.01f64..2.0, 0.1f64..10.0)
            .prop_map(|(kappa_scale, theta)| WeightKernel::AdaptiveProduct { kappa_scale, theta }),
    ]
}

fn ensemble(max_n: usize) -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1usize..=3, 1usize..=max_n).prop_flat_map(|(d, n)| (Just(d), prop::collection::vec(-10.0f64..10.0, n * d)))
}

fn quadratic(d: usize) -> ObjectiveSpec {
    make_builtin("quadratic", &json!({"dim": d})).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn consensus_lies_in_bounding_box((d, pos) in ensemble(40), k in kernel(), alpha in 0.0f64..200.0) {
        let ens = Ensemble::evaluated(d, pos.clone(), &quadratic(d)).unwrap();
        let all = consensus_all(&ens, &k, alpha, 0.0).unwrap();
        for (j, c) in all.iter().enumerate() {
            let axis = j % d;
            let lo = pos.iter().skip(axis).step_by(d).copied().fold(f64::INFINITY, f64::min);
            let hi = pos.iter().skip(axis).step_by(d).copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(*c >= lo && *c <= hi, "{c} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn batched_matches_single_rows((d, pos) in ensemble(70), k in kernel(), alpha in 0.0f64..50.0) {
        let ens = Ensemble::evaluated(d, pos, &quadratic(d)).unwrap();
        let all = consensus_all(&ens, &k, alpha, 0.0).unwrap();
        for i in 0..ens.n() {
            let one = consensus_point(&ens, &k, alpha, 0.0, ens.point(i), ens.f_values()[i]).unwrap();
            for (a, b) in one.iter().zip(&all[i * d..(i + 1) * d]) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn worker_count_does_not_change_consensus((d, pos) in ensemble(100), k in kernel(), alpha in 0.0f64..50.0) {
        let ens = Ensemble::evaluated(d, pos, &quadratic(d)).unwrap();
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| consensus_all(&ens, &k, alpha, 0.0).unwrap())
        };
        let one: Vec<u64> = run(1).iter().map(|x| x.to_bits()).collect();
        let four: Vec<u64> = run(4).iter().map(|x| x.to_bits()).collect();
        prop_assert_eq!(one, four);
    }

    #[test]
    fn symmetric_gibbs_consensus_is_centred(xs in prop::collection::vec(0.0f64..5.0, 1..20), alpha in 0.0f64..100.0) {
        let obj = make_builtin("symmetric_double_well", &json!({})).unwrap();
        let pos: Vec<f64> = xs.iter().flat_map(|&x| [x, -x]).collect();
        let ens = Ensemble::evaluated(1, pos, &obj).unwrap();
        let c = consensus_point(&ens, &WeightKernel::StandardGibbs, alpha, 0.0, ens.point(0), ens.f_values()[0]).unwrap();
        prop_assert!(c[0].abs() <= 1e-12 * 5.0, "{}", c[0]);
    }

    #[test]
    fn phi_is_a_cutoff(v in prop::collection::vec(-3.0f64..3.0, 1..4), r in 0.1f64..2.0, tau in 3u32..8) {
        let phi = phi_test(&v, r, tau).unwrap();
        prop_assert!((0.0..=1.0).contains(&phi));
        if v.iter().map(|x| x * x).sum::<f64>() >= r * r {
            prop_assert_eq!(phi, 0.0);
        }
    }

    #[test]
    fn multi_well_meets_its_growth_bound(
        c in prop::collection::vec(-3.0f64..3.0, 2),
        radius in 0.1f64..1.5,
        p in 1.0f64..=2.0,
        ell in 0.1f64..3.0,
        seed in any::<u64>(),
    ) {
        let set = MinimizerSet::new(vec![
            ConvexComponent::ball(c.clone(), radius).unwrap(),
            ConvexComponent::aabb(vec![c[0] + 4.0, c[1] - 1.0], vec![c[0] + 5.0, c[1] + 1.0]).unwrap(),
        ]).unwrap();
        let obj = multi_well(set, ell, p, None).unwrap();
        let rep = check_assumption_lower(&obj, 500, 3.0, seed).unwrap();
        prop_assert_eq!(rep.violations, 0);
    }

    #[test]
    fn rate_fit_recovers_exponentials(rate in 0.01f64..20.0, c in 0.01f64..100.0, dt in 0.01f64..0.2) {
        let times: Vec<f64> = (0..30).map(|k| k as f64 * dt).collect();
        let values: Vec<f64> = times.iter().map(|t| c * (-rate * t).exp()).collect();
        let fit = fit_exponential_rate(&times, &values, 0..values.len()).unwrap();
        prop_assert!((fit.rate - rate).abs() <= 1e-6 * rate);
        prop_assert!(fit.r2 > 1.0 - 1e-9);
    }

    #[test]
    fn noiseless_step_contracts_toward_consensus((d, pos) in ensemble(30), lambda in 0.1f64..2.0, dt in 0.01f64..0.5) {
        prop_assume!(dt * lambda <= 1.0);
        let obj = quadratic(d);
        let n = pos.len() / d;
        let cfg = DynamicsConfig {
            lambda, sigma: 0.0, alpha: 5.0, kappa: 0.0, dt, steps: 1, n_particles: n,
            kernel: WeightKernel::StandardGibbs,
            init: InitSpec::Explicit(pos.chunks(d).map(|c| c.to_vec()).collect()),
            seed: 0,
        };
        let ens = init_ensemble(&cfg.init, n, d, StreamKey::new(0), &obj).unwrap();
        let c = consensus_point(&ens, &cfg.kernel, cfg.alpha, 0.0, ens.point(0), ens.f_values()[0]).unwrap();
        let next = step(&ens, &cfg, &obj, 0).unwrap();
        for i in 0..n {
            for ((ck, x), y) in c.iter().zip(ens.point(i)).zip(next.point(i)) {
                let expect = ck + (1.0 - dt * lambda) * (x - ck);
                prop_assert!((y - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
            }
        }
    }

    #[test]
    fn generated_laplace_instances_pass(seed in any::<u64>(), index in 0usize..1000, dim in 1usize..4) {
        let rep = laplace_instance(seed, index, dim, 300).check().unwrap();
        prop_assert_eq!(rep.pass, Some(true), "{:?}", rep);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn fokker_planck_keeps_a_probability_density(
        mean in -2.0f64..2.0,
        variance in 0.2f64..2.0,
        sigma in 0.0f64..1.0,
        kappa in 0.0f64..0.3,
        alpha in 1.0f64..30.0,
    ) {
        let grid = Grid1D::new(-6.0, 6.0, 120).unwrap();
        let obj = make_builtin("symmetric_double_well", &json!({})).unwrap();
        let kernel = WeightKernel::AdaptiveProduct { kappa_scale: 0.5, theta: 2.0 };
        let op = ConsensusOperator::new(grid, &kernel, alpha, &obj).unwrap();
        let params = FpParams { lambda: 1.0, sigma, kappa };
        let mut field = init_density(grid, &InitSpec::GaussianIid { mean: vec![mean], variance }).unwrap();
        for _ in 0..20 {
            let dt = cfl_dt(&field, &op, &params).min(0.05);
            let info = fp_step(&mut field, &op, &params, dt).unwrap();
            prop_assert!(info.mass_defect <= 1e-9);
            prop_assert!(field.rho.iter().all(|r| *r >= 0.0));
            prop_assert!((field.mass() - 1.0).abs() <= 1e-12);
        }
    }
}
