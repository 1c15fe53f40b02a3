//! Dense cross-check of the product-form measure against the linear-algebra
//! oracle over a wide small-instance grid, wherever both apply.

use imbal_core::attractors::classify;
use imbal_core::kernel::{ModelParams, TransitionKernel};
use imbal_core::measure::invariant_measure;
use imbal_core::oracle::{build_chain, stationary_solve, StationaryOutcome};
use imbal_core::CoreError;

#[test]
fn product_form_matches_dense_solve_on_wide_grid() {
    let qs: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
    let alphas: Vec<f64> = (1..=10).map(|k| k as f64).collect();
    let gammas = [-1.0, -0.8, -0.6, -0.4, -0.2];
    let mut compared = 0usize;
    let mut skipped = 0usize;
    for &n in &[4usize, 8, 16] {
        for &q in &qs {
            for &alpha in &alphas {
                for &gamma in &gammas {
                    let params =
                        ModelParams::new(n, 1, alpha, gamma, q, f64::INFINITY).unwrap();
                    let kernel = TransitionKernel::new(params).unwrap();
                    let classes = classify(&kernel);
                    if !classes.a2_levels().is_empty() || classes.has_a3() {
                        skipped += 1;
                        continue;
                    }
                    let m = match invariant_measure(&kernel, &classes, &[]) {
                        Ok(m) => m,
                        Err(CoreError::DegenerateChain { .. }) => {
                            skipped += 1;
                            continue;
                        }
                        Err(e) => panic!("unexpected error: {e}"),
                    };
                    let chain = build_chain(&kernel, &classes, &[]).unwrap();
                    match stationary_solve(&chain).unwrap() {
                        StationaryOutcome::Unique(sol) => {
                            let pi = m.pi().unwrap();
                            let linf = pi
                                .iter()
                                .zip(&sol)
                                .map(|(a, b)| (a - b).abs())
                                .fold(0.0f64, f64::max);
                            assert!(
                                linf <= 1e-10,
                                "n={n} q={q} alpha={alpha} gamma={gamma}: L-inf {linf}"
                            );
                            compared += 1;
                        }
                        StationaryOutcome::Reducible(_) => skipped += 1,
                    }
                }
            }
        }
    }
    assert!(compared > 250, "only {compared} comparable cells ({skipped} skipped)");
}
