//! Seeded Monte Carlo of the full two-dimensional spin process.
//!
//! One epoch updates a uniformly chosen agent's market spin (heat bath with
//! probability q, expectation-copy otherwise), moves the price by the impact
//! of the resulting level change, credits every other agent's wealth, and
//! then synchronously updates the expectation spin of every level.
//!
//! Transitions of the continuous-time process occur at unit-rate exponential
//! epochs; since the rate is state-independent the embedded jump chain has
//! the same occupation law, so the simulator advances in discrete epochs.

use crate::attractors::{classify, lambda_finite_beta};
use crate::error::{CoreError, Result};
use crate::kernel::{ModelParams, TransitionKernel};
use crate::wealth::ImpactFunction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

/// Name of the generator recorded in run metadata.
pub const RNG_ALGORITHM: &str = "chacha12";

/// Epoch interval for the redundant recount of the cached level counter.
const RECOUNT_INTERVAL: u64 = 100_000;

/// Initial spin layout for either spin dimension.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SpinInit {
    RandomUniform,
    AllPlus,
    AllMinus,
    Given(Vec<i8>),
}

impl SpinInit {
    fn materialize(&self, len: usize, rng: &mut ChaCha12Rng) -> Result<Vec<i8>> {
        match self {
            SpinInit::RandomUniform => {
                Ok((0..len).map(|_| if rng.gen::<bool>() { 1i8 } else { -1 }).collect())
            }
            SpinInit::AllPlus => Ok(vec![1; len]),
            SpinInit::AllMinus => Ok(vec![-1; len]),
            SpinInit::Given(v) => {
                if v.len() != len {
                    return Err(CoreError::InvalidParameter(format!(
                        "initial spin vector has length {}, expected {len}",
                        v.len()
                    )));
                }
                if v.iter().any(|&s| s != 1 && s != -1) {
                    return Err(CoreError::InvalidParameter("spins must be +-1".into()));
                }
                Ok(v.clone())
            }
        }
    }
}

/// Which per-epoch paths to store besides the always-on level histogram.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct RecordFlags {
    pub n_plus_path: bool,
    pub price_path: bool,
    pub wealth_path: bool,
    pub eta2_trace: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimConfig {
    pub params: ModelParams,
    pub impact: ImpactFunction,
    pub init_eta1: SpinInit,
    pub init_eta2: SpinInit,
    pub initial_price: f64,
    pub initial_capital: f64,
    pub epochs: u64,
    pub seed: u64,
    pub record: RecordFlags,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.epochs < 1 {
            return Err(CoreError::InvalidParameter("epochs must be >= 1".into()));
        }
        if !(self.initial_price > 0.0) {
            return Err(CoreError::InvalidParameter("initial price must be > 0".into()));
        }
        Ok(())
    }
}

/// Full mutable state of one trajectory.
#[derive(Debug, Clone)]
pub struct MarketState {
    pub eta1: Vec<i8>,
    pub eta2: Vec<i8>,
    pub n_plus: usize,
    pub price: f64,
    pub wealth: Vec<f64>,
    pub epoch: u64,
    rng: ChaCha12Rng,
}

impl MarketState {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let n = config.params.n;
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
        let eta1 = config.init_eta1.materialize(n, &mut rng)?;
        let eta2 = config.init_eta2.materialize(n + 1, &mut rng)?;
        let n_plus = eta1.iter().filter(|&&s| s == 1).count();
        Ok(MarketState {
            eta1,
            eta2,
            n_plus,
            price: config.initial_price,
            wealth: vec![config.initial_capital; n],
            epoch: 0,
            rng,
        })
    }

    pub fn aggregate_wealth(&self) -> f64 {
        self.wealth.iter().sum()
    }
}

/// Immutable per-run context: parameters plus the precomputed expectation-
/// spin update tables.
pub struct SimContext {
    params: ModelParams,
    impact: ImpactFunction,
    /// frozen phase: stability of a +1 mark (B) and of a -1 mark (C)
    frozen_stay: Option<(Vec<bool>, Vec<bool>)>,
    /// finite beta: per-level stay probabilities for marks +1 and -1
    lambda_stay: Option<(Vec<f64>, Vec<f64>)>,
}

impl SimContext {
    pub fn new(params: ModelParams, impact: ImpactFunction) -> Result<Self> {
        params.validate()?;
        let kernel = TransitionKernel::new(params)?;
        if params.is_frozen() {
            let c = classify(&kernel);
            Ok(SimContext {
                params,
                impact,
                frozen_stay: Some((c.in_b, c.in_c)),
                lambda_stay: None,
            })
        } else {
            let levels = params.levels();
            let mut stay_plus = Vec::with_capacity(levels);
            let mut stay_minus = Vec::with_capacity(levels);
            for i in 0..levels {
                stay_plus.push(lambda_finite_beta(&params, i, 1, 1)?);
                stay_minus.push(lambda_finite_beta(&params, i, -1, -1)?);
            }
            Ok(SimContext {
                params,
                impact,
                frozen_stay: None,
                lambda_stay: Some((stay_plus, stay_minus)),
            })
        }
    }
}

/// Draw `2d` distinct sites other than `exclude` and return their spin sum.
fn sample_neighbor_sum(
    eta1: &[i8],
    exclude: usize,
    two_d: usize,
    rng: &mut ChaCha12Rng,
) -> i64 {
    let n = eta1.len();
    let mut sum: i64 = 0;
    if two_d <= 32 && two_d * 4 <= n {
        // rejection sampling on the stack; expected trials stay near 2d
        let mut picked = [usize::MAX; 32];
        let mut count = 0usize;
        while count < two_d {
            let site = rng.gen_range(0..n);
            if site == exclude || picked[..count].contains(&site) {
                continue;
            }
            picked[count] = site;
            count += 1;
            sum += eta1[site] as i64;
        }
    } else {
        // partial Fisher-Yates over the other sites
        let mut pool: Vec<usize> = (0..n).filter(|&s| s != exclude).collect();
        for k in 0..two_d {
            let j = rng.gen_range(k..pool.len());
            pool.swap(k, j);
            sum += eta1[pool[k]] as i64;
        }
    }
    sum
}

/// Advance the state by one epoch.
pub fn step(state: &mut MarketState, ctx: &SimContext) {
    let n = ctx.params.n;
    let level_before = state.n_plus;

    // (1) choose the updating agent
    let agent = state.rng.gen_range(0..n);
    let old_spin = state.eta1[agent];

    // (2) Hamiltonian or strategic move
    let new_spin = if state.rng.gen::<f64>() < ctx.params.q {
        let nbr_sum = sample_neighbor_sum(&state.eta1, agent, 2 * ctx.params.d, &mut state.rng);
        let imbalance = (2.0 * level_before as f64 / n as f64 - 1.0).abs();
        let h = nbr_sum as f64 - ctx.params.alpha * old_spin as f64 * imbalance;
        if ctx.params.is_frozen() {
            // deterministic sign rule; zero field leaves the spin alone
            if h > 0.0 {
                1
            } else if h < 0.0 {
                -1
            } else {
                old_spin
            }
        } else {
            let p_plus = 1.0 / (1.0 + (-2.0 * ctx.params.beta * h).exp());
            if state.rng.gen::<f64>() < p_plus {
                1
            } else {
                -1
            }
        }
    } else {
        // copy the expectation spin of the pre-move level
        state.eta2[level_before]
    };

    // (3) apply the flip, update the level and the price
    state.eta1[agent] = new_spin;
    let x_bar = (new_spin - old_spin) / 2; // -1, 0 or +1
    if x_bar == 1 {
        state.n_plus += 1;
    } else if x_bar == -1 {
        state.n_plus -= 1;
    }
    let delta_p = state.price * ctx.impact.value(x_bar);

    // (4) wealth update for everyone except the mover (pre-move spins; only
    // the mover's spin changed, so the current array serves for the rest)
    if delta_p != 0.0 {
        for (y, w) in state.wealth.iter_mut().enumerate() {
            if y != agent {
                *w += state.eta1[y] as f64 * delta_p;
            }
        }
        // the mover's contribution uses its pre-move spin, but it is excluded
        state.price += delta_p;
    }

    // (5) synchronous expectation-spin update
    if let Some((in_b, in_c)) = &ctx.frozen_stay {
        for (level, mark) in state.eta2.iter_mut().enumerate() {
            *mark = if *mark == 1 {
                if in_b[level] {
                    1
                } else {
                    -1
                }
            } else if in_c[level] {
                -1
            } else {
                1
            };
        }
    } else if let Some((stay_plus, stay_minus)) = &ctx.lambda_stay {
        for (level, mark) in state.eta2.iter_mut().enumerate() {
            let stay = if *mark == 1 { stay_plus[level] } else { stay_minus[level] };
            if state.rng.gen::<f64>() >= stay {
                *mark = -*mark;
            }
        }
    }

    state.epoch += 1;
    if state.epoch % RECOUNT_INTERVAL == 0 {
        let recount = state.eta1.iter().filter(|&&s| s == 1).count();
        assert_eq!(recount, state.n_plus, "level counter drifted from the spin array");
    }
}

/// Summary and recorded paths of one run.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub epochs: u64,
    pub seed: u64,
    pub rng_algorithm: &'static str,
    /// epochs spent at each level (post-move), length n+1
    pub histogram: Vec<u64>,
    pub mean_n_plus: f64,
    pub final_price: f64,
    pub final_aggregate_wealth: f64,
    pub n_plus_path: Option<Vec<u32>>,
    pub price_path: Option<Vec<f64>>,
    pub wealth_path: Option<Vec<f64>>,
    pub eta2_trace: Option<Vec<Vec<i8>>>,
}

impl Trajectory {
    /// Empirical level distribution.
    pub fn occupancy(&self) -> Vec<f64> {
        let total: u64 = self.histogram.iter().sum();
        self.histogram.iter().map(|&c| c as f64 / total as f64).collect()
    }

    /// Total-variation distance of the occupancy from a reference law.
    pub fn total_variation(&self, reference: &[f64]) -> f64 {
        let occ = self.occupancy();
        0.5 * occ.iter().zip(reference).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

/// Run a full trajectory. Identical configs and seeds give bit-identical
/// results on one platform.
pub fn run(config: &SimConfig) -> Result<Trajectory> {
    config.validate()?;
    let ctx = SimContext::new(config.params, config.impact)?;
    let mut state = MarketState::new(config)?;

    let epochs = config.epochs;
    let mut histogram = vec![0u64; config.params.levels()];
    let mut n_plus_path = config.record.n_plus_path.then(|| Vec::with_capacity(epochs as usize));
    let mut price_path = config.record.price_path.then(|| Vec::with_capacity(epochs as usize));
    let mut wealth_path = config.record.wealth_path.then(|| Vec::with_capacity(epochs as usize));
    let mut eta2_trace = config.record.eta2_trace.then(|| Vec::with_capacity(epochs as usize));
    let mut level_sum: u128 = 0;

    for _ in 0..epochs {
        step(&mut state, &ctx);
        histogram[state.n_plus] += 1;
        level_sum += state.n_plus as u128;
        if let Some(p) = n_plus_path.as_mut() {
            p.push(state.n_plus as u32);
        }
        if let Some(p) = price_path.as_mut() {
            p.push(state.price);
        }
        if let Some(p) = wealth_path.as_mut() {
            p.push(state.aggregate_wealth());
        }
        if let Some(t) = eta2_trace.as_mut() {
            t.push(state.eta2.clone());
        }
    }

    Ok(Trajectory {
        epochs,
        seed: config.seed,
        rng_algorithm: RNG_ALGORITHM,
        histogram,
        mean_n_plus: level_sum as f64 / epochs as f64,
        final_price: state.price,
        final_aggregate_wealth: state.aggregate_wealth(),
        n_plus_path,
        price_path,
        wealth_path,
        eta2_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attractors::{classify, AClass};

    fn config(n: usize, d: usize, alpha: f64, gamma: f64, q: f64, epochs: u64, seed: u64) -> SimConfig {
        let params = ModelParams::new(n, d, alpha, gamma, q, f64::INFINITY).unwrap();
        SimConfig {
            params,
            impact: ImpactFunction::new(0.001, gamma).unwrap(),
            init_eta1: SpinInit::RandomUniform,
            init_eta2: SpinInit::RandomUniform,
            initial_price: 1.0,
            initial_capital: 0.0,
            epochs,
            seed,
            record: RecordFlags::default(),
        }
    }

    #[test]
    fn zero_epochs_rejected() {
        let mut c = config(8, 1, 4.0, -0.7, 1.0, 1, 7);
        c.epochs = 0;
        assert!(run(&c).is_err());
    }

    #[test]
    fn given_vector_length_checked() {
        let mut c = config(8, 1, 4.0, -0.7, 1.0, 10, 7);
        c.init_eta2 = SpinInit::Given(vec![1; 3]);
        assert!(run(&c).is_err());
        c.init_eta2 = SpinInit::Given(vec![2; 9]);
        assert!(run(&c).is_err());
        c.init_eta2 = SpinInit::Given(vec![1; 9]);
        assert!(run(&c).is_ok());
    }

    #[test]
    fn same_seed_same_trajectory() {
        let mut c = config(16, 1, 4.0, -0.7, 0.8, 5000, 42);
        c.record.n_plus_path = true;
        c.record.price_path = true;
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        assert_eq!(a.histogram, b.histogram);
        assert_eq!(a.n_plus_path, b.n_plus_path);
        assert_eq!(a.price_path.as_ref().unwrap(), b.price_path.as_ref().unwrap());
        assert_eq!(a.final_price, b.final_price);
        let mut c2 = c.clone();
        c2.seed = 43;
        let d = run(&c2).unwrap();
        assert_ne!(a.histogram, d.histogram);
    }

    #[test]
    fn balanced_move_changes_nothing_but_eta2() {
        // all-plus start at alpha <= 2d: every field is 2 - alpha > 0, so no
        // spin ever flips and every epoch is a balanced move: price and
        // wealth must never change
        let mut c = config(8, 1, 1.0, -0.7, 1.0, 2000, 5);
        c.init_eta1 = SpinInit::AllPlus;
        c.record.price_path = true;
        c.record.wealth_path = true;
        let t = run(&c).unwrap();
        assert!(t.price_path.unwrap().iter().all(|&p| p == 1.0));
        assert!(t.wealth_path.unwrap().iter().all(|&w| w == 0.0));
        assert_eq!(t.histogram[8], 2000);
    }

    #[test]
    fn frozen_eta2_traces_follow_classes() {
        let params = ModelParams::new(32, 1, 4.0, -0.7, 0.9, f64::INFINITY).unwrap();
        let kernel = TransitionKernel::new(params).unwrap();
        let classes = classify(&kernel);
        let mut c = config(32, 1, 4.0, -0.7, 0.9, 64, 11);
        c.record.eta2_trace = true;
        let init = vec![-1i8; 33];
        c.init_eta2 = SpinInit::Given(init.clone());
        let t = run(&c).unwrap();
        let trace = t.eta2_trace.unwrap();
        for (level, &class) in classes.a_class.iter().enumerate() {
            for (epoch, snapshot) in trace.iter().enumerate() {
                let v = snapshot[level];
                match class {
                    AClass::A1 => assert_eq!(v, 1, "level {level} epoch {epoch}"),
                    AClass::A4 => assert_eq!(v, -1, "level {level} epoch {epoch}"),
                    AClass::A2 => assert_eq!(v, init[level], "level {level} epoch {epoch}"),
                    AClass::A3 => {
                        let expect = if epoch % 2 == 0 { -init[level] } else { init[level] };
                        assert_eq!(v, expect, "level {level} epoch {epoch}");
                    }
                }
            }
        }
    }

    #[test]
    fn level_counter_matches_recount() {
        let c = config(16, 2, 4.0, -0.7, 0.7, 200_000, 3);
        // the built-in recount assertion fires inside run() if it drifts
        let t = run(&c).unwrap();
        assert_eq!(t.histogram.iter().sum::<u64>(), 200_000);
    }

    #[test]
    fn histogram_approaches_exact_measure_small_instance() {
        use crate::measure::invariant_measure;
        let params = ModelParams::new(8, 1, 4.0, -0.7, 1.0, f64::INFINITY).unwrap();
        let kernel = TransitionKernel::new(params).unwrap();
        let classes = classify(&kernel);
        let m = invariant_measure(&kernel, &classes, &[]).unwrap();
        let c = config(8, 1, 4.0, -0.7, 1.0, 2_000_000, 99);
        let t = run(&c).unwrap();
        let tv = t.total_variation(m.pi().unwrap());
        assert!(tv <= 0.02, "TV = {tv}");
    }

    #[test]
    fn finite_beta_runs() {
        let params = ModelParams::new(16, 1, 4.0, -0.7, 0.8, 1.5).unwrap();
        let c = SimConfig {
            params,
            impact: ImpactFunction::new(0.001, -0.7).unwrap(),
            init_eta1: SpinInit::RandomUniform,
            init_eta2: SpinInit::RandomUniform,
            initial_price: 1.0,
            initial_capital: 0.0,
            epochs: 20_000,
            seed: 1,
            record: RecordFlags::default(),
        };
        let t = run(&c).unwrap();
        assert_eq!(t.histogram.iter().sum::<u64>(), 20_000);
        // at beta this soft the chain roams: several levels visited
        assert!(t.histogram.iter().filter(|&&h| h > 0).count() > 4);
    }
}
