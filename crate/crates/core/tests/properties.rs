//! Property-based invariants over randomized parameters.

use imbal_core::attractors::{classify, AClass};
use imbal_core::kernel::{
    hypergeom_pmf, level_transition_probs, stay_probabilities, ModelParams, TransitionKernel,
};
use imbal_core::measure::{chain_rates, invariant_measure};
use imbal_core::simulator::{run, RecordFlags, SimConfig, SpinInit};
use imbal_core::wealth::ImpactFunction;
use proptest::prelude::*;

/// (n, d) pairs with 1 <= 2d <= n - 1.
fn n_d() -> impl Strategy<Value = (usize, usize)> {
    (3usize..=48).prop_flat_map(|n| (Just(n), 1usize..=((n - 1) / 2).max(1)))
}

fn frozen_params() -> impl Strategy<Value = ModelParams> {
    (n_d(), 0.05f64..10.0, -1.0f64..-0.01, 0.05f64..=1.0).prop_map(
        |((n, d), alpha, gamma, q)| {
            ModelParams::new(n, d, alpha, gamma, q, f64::INFINITY).unwrap()
        },
    )
}

proptest! {
    #[test]
    fn transition_rows_always_sum_to_one(params in frozen_params(), frac in 0.0f64..=1.0) {
        let i = ((params.n as f64) * frac).round() as usize;
        let t = level_transition_probs(&params, i.min(params.n));
        prop_assert!((t.sum() - 1.0).abs() < 1e-14);
        for v in [t.p_pp, t.p_pm, t.p_mm, t.p_mp] {
            prop_assert!((-1e-15..=1.0 + 1e-15).contains(&v));
        }
    }

    #[test]
    fn stay_probabilities_are_probabilities_and_mirror(params in frozen_params()) {
        for i in 0..=params.n {
            let (sp, sm) = stay_probabilities(&params, i);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&sp));
            prop_assert!((0.0..=1.0 + 1e-12).contains(&sm));
            let (sp_mirror, _) = stay_probabilities(&params, params.n - i);
            prop_assert!((sm - sp_mirror).abs() < 1e-12, "level {i}: {sm} vs {sp_mirror}");
        }
    }

    #[test]
    fn impact_functional_bounded(params in frozen_params()) {
        let kernel = TransitionKernel::new(params).unwrap();
        for i in 0..=params.n {
            prop_assert!(kernel.e_plus[i] >= params.gamma - 1e-12);
            prop_assert!(kernel.e_plus[i] <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn classification_is_a_partition(params in frozen_params()) {
        let kernel = TransitionKernel::new(params).unwrap();
        let c = classify(&kernel);
        for i in 0..=params.n {
            let expected = match (c.in_b[i], c.in_c[i]) {
                (true, false) => AClass::A1,
                (true, true) => AClass::A2,
                (false, false) => AClass::A3,
                (false, true) => AClass::A4,
            };
            prop_assert_eq!(c.a_class[i], expected);
        }
    }

    #[test]
    fn existing_measures_normalize_and_balance(params in frozen_params()) {
        let kernel = TransitionKernel::new(params).unwrap();
        let c = classify(&kernel);
        if c.has_a3() || c.a2_levels().len() > 8 {
            return Ok(());
        }
        let branch = vec![1i8; c.a2_levels().len()];
        let Ok(m) = invariant_measure(&kernel, &c, &branch) else { return Ok(()) };
        let pi = m.pi().unwrap();
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(pi.iter().all(|&p| p >= 0.0));
        let plus_set = c.steady_plus_indicator(&branch).unwrap();
        let (up, down) = chain_rates(&kernel, &plus_set);
        for l in 1..=params.n {
            let lhs = pi[l] * down[l];
            let rhs = pi[l - 1] * up[l - 1];
            let scale = lhs.abs().max(rhs.abs());
            if scale > 1e-280 {
                prop_assert!((lhs - rhs).abs() / scale < 1e-10, "level {}", l);
            }
        }
    }

    #[test]
    fn hypergeometric_normalizes(pop in 1u64..400, s_frac in 0.0f64..=1.0, d_frac in 0.0f64..=1.0) {
        let successes = ((pop as f64) * s_frac).round() as u64;
        let draws = ((pop as f64) * d_frac).round() as u64;
        let total: f64 = (0..=draws).map(|k| hypergeom_pmf(pop, successes, draws, k).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-11, "pop {} succ {} draws {}: {}", pop, successes, draws, total);
    }

    #[test]
    fn simulator_is_seed_deterministic(
        params in frozen_params(),
        seed in any::<u64>(),
    ) {
        let config = SimConfig {
            params,
            impact: ImpactFunction::new(0.001, params.gamma).unwrap(),
            init_eta1: SpinInit::RandomUniform,
            init_eta2: SpinInit::RandomUniform,
            initial_price: 1.0,
            initial_capital: 0.0,
            epochs: 300,
            seed,
            record: RecordFlags { n_plus_path: true, price_path: true, ..Default::default() },
        };
        let a = run(&config).unwrap();
        let b = run(&config).unwrap();
        prop_assert_eq!(a.histogram, b.histogram);
        prop_assert_eq!(a.n_plus_path.unwrap(), b.n_plus_path.unwrap());
        let pa = a.price_path.unwrap();
        let pb = b.price_path.unwrap();
        prop_assert!(pa.iter().zip(&pb).all(|(x, y)| x == y));
    }

    #[test]
    fn level_moves_by_at_most_one(params in frozen_params(), seed in any::<u64>()) {
        let config = SimConfig {
            params,
            impact: ImpactFunction::new(0.001, params.gamma).unwrap(),
            init_eta1: SpinInit::RandomUniform,
            init_eta2: SpinInit::RandomUniform,
            initial_price: 1.0,
            initial_capital: 0.0,
            epochs: 400,
            seed,
            record: RecordFlags { n_plus_path: true, ..Default::default() },
        };
        let t = run(&config).unwrap();
        let path = t.n_plus_path.unwrap();
        for w in path.windows(2) {
            prop_assert!((w[0] as i64 - w[1] as i64).abs() <= 1);
        }
    }
}
