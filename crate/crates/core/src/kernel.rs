//! Frozen-phase transition kernel of the imbalance chain.
//!
//! The market has `n` agents with spins in {-1,+1}; the chain tracks the
//! number of positive spins `i` (the imbalance level, 0..=n). At every epoch
//! one uniformly chosen agent updates. With probability `q` it follows the
//! heat-bath rule for the interaction field
//!
//! ```text
//! h(x) = sum of 2d resampled-neighbor spins  -  alpha * s(x) * |2i/n - 1|
//! ```
//!
//! and with probability `1-q` it copies the expectation spin of the current
//! level (module `attractors`). Because neighborhoods are resampled uniformly
//! at every move, the neighbor sum is hypergeometric and the per-level stay
//! probabilities have an exact closed form, computed here.

use crate::error::{CoreError, Result};
use serde::Serialize;

/// Scalar model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    /// Agent count (N >= 2).
    pub n: usize,
    /// Lattice dimension; each move samples a fresh neighborhood of exactly
    /// `2d` distinct other sites, so `1 <= 2d <= n-1`.
    pub d: usize,
    /// Coupling of the global (majority-size) term relative to the local one.
    pub alpha: f64,
    /// Price impact of an incremental seller over that of an incremental
    /// buyer; in `[-1, 0)`.
    pub gamma: f64,
    /// Probability of a Hamiltonian (heat-bath) move; `1-q` is the strategic
    /// copy probability. In `(0, 1]`.
    pub q: f64,
    /// Inverse temperature; `f64::INFINITY` selects the frozen phase.
    pub beta: f64,
}

impl ModelParams {
    pub fn new(n: usize, d: usize, alpha: f64, gamma: f64, q: f64, beta: f64) -> Result<Self> {
        let p = ModelParams { n, d, alpha, gamma, q, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(CoreError::InvalidParameter(format!("n = {} must be >= 2", self.n)));
        }
        if self.d < 1 || 2 * self.d > self.n - 1 {
            return Err(CoreError::InvalidParameter(format!(
                "need 1 <= 2d <= n-1, got d = {}, n = {}",
                self.d, self.n
            )));
        }
        if !(self.alpha > 0.0) {
            return Err(CoreError::InvalidParameter(format!("alpha = {} must be > 0", self.alpha)));
        }
        if !(-1.0..0.0).contains(&self.gamma) {
            return Err(CoreError::InvalidParameter(format!(
                "gamma = {} must lie in [-1, 0)",
                self.gamma
            )));
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(CoreError::InvalidParameter(format!("q = {} must lie in (0, 1]", self.q)));
        }
        if !(self.beta > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "beta = {} must be positive (or infinite for the frozen phase)",
                self.beta
            )));
        }
        Ok(())
    }

    /// Frozen phase: heat-bath flips degenerate to deterministic sign rules.
    pub fn is_frozen(&self) -> bool {
        self.beta.is_infinite()
    }

    /// Number of imbalance levels, `n + 1`.
    pub fn levels(&self) -> usize {
        self.n + 1
    }
}

// ---------------------------------------------------------------------------
// Binomial / hypergeometric machinery
// ---------------------------------------------------------------------------

const LN_FACT_TABLE_LEN: usize = 2048;

fn ln_fact_table() -> &'static [f64; LN_FACT_TABLE_LEN] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<[f64; LN_FACT_TABLE_LEN]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0.0f64; LN_FACT_TABLE_LEN];
        // compensated summation keeps the tail entries near 1 ulp
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for k in 1..LN_FACT_TABLE_LEN {
            let term = (k as f64).ln();
            let y = term - comp;
            let s = sum + y;
            comp = (s - sum) - y;
            sum = s;
            t[k] = sum;
        }
        t
    })
}

/// Natural log of `x!`, table below 2048, Stirling series above.
pub fn ln_factorial(x: u64) -> f64 {
    if (x as usize) < LN_FACT_TABLE_LEN {
        return ln_fact_table()[x as usize];
    }
    let n = x as f64;
    // Stirling with three correction terms; error < 1e-20 for n >= 2048
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    n * n.ln() - n + 0.5 * (ln_2pi + n.ln()) + 1.0 / (12.0 * n) - 1.0 / (360.0 * n.powi(3))
        + 1.0 / (1260.0 * n.powi(5))
}

/// Natural log of `C(n, k)`; `-inf` when `k > n`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `C(n, k)` as f64. For the small-k case (everything the kernel needs) the
/// direct product is both faster and more accurate than the log route.
pub fn binomial_f64(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    if k <= 40 {
        let mut acc = 1.0f64;
        for t in 1..=k {
            acc = acc * ((n - k + t) as f64) / (t as f64);
        }
        acc
    } else {
        ln_binomial(n, k).exp()
    }
}

/// Hypergeometric pmf: probability of `k` successes in `draws` draws without
/// replacement from a population of size `population` containing `successes`
/// success states.
pub fn hypergeom_pmf(population: u64, successes: u64, draws: u64, k: u64) -> Result<f64> {
    if successes > population {
        return Err(CoreError::InvalidParameter(format!(
            "hypergeometric: successes {successes} > population {population}"
        )));
    }
    if draws > population {
        return Err(CoreError::InvalidParameter(format!(
            "hypergeometric: draws {draws} > population {population}"
        )));
    }
    // outside the support
    if k > draws || k > successes || draws - k > population - successes {
        return Ok(0.0);
    }
    // log route: overflow-free for populations up to at least 1e6
    let ln_p = ln_binomial(successes, k) + ln_binomial(population - successes, draws - k)
        - ln_binomial(population, draws);
    Ok(ln_p.exp())
}

// ---------------------------------------------------------------------------
// Frozen-phase stay probabilities
// ---------------------------------------------------------------------------

/// Threshold count `c = ceil(alpha * |i/n - 1/2|)`: the minimum neighbor
/// surplus needed to hold a spin against the global term.
fn threshold_count(params: &ModelParams, i: usize) -> i64 {
    let x = params.alpha * (i as f64 / params.n as f64 - 0.5).abs();
    x.ceil() as i64
}

/// Frozen-phase stay probabilities `(stay_plus, stay_minus)` at level `i`:
/// the probability that an updating +1 (resp. -1) agent keeps its spin.
///
/// `stay_plus(i)  = P(h >= 0 | spin +1) = sum_{j=(d+c) v (i+2d-n)}^{2d ^ i} C(i-1,j) C(n-i,2d-j) / C(n-1,2d)`
/// `stay_minus(i) = P(h <= 0 | spin -1) = sum_{j=0 v (i+2d-n)}^{(d-c) ^ i} C(i,j) C(n-i-1,2d-j) / C(n-1,2d)`
///
/// Ties (`h = 0`) count as staying. Both vanish outside the band
/// `i/n in [1/2 - d/alpha, 1/2 + d/alpha]` because the ranges go empty.
pub fn stay_probabilities(params: &ModelParams, i: usize) -> (f64, f64) {
    let n = params.n as i64;
    let d = params.d as i64;
    let i = i as i64;
    let c = threshold_count(params, i as usize);
    let denom = binomial_f64((n - 1) as u64, (2 * d) as u64);

    let mut stay_plus = 0.0f64;
    if i >= 1 {
        let lo = (d + c).max(i + 2 * d - n);
        let hi = (2 * d).min(i);
        let mut j = lo;
        while j <= hi {
            stay_plus += binomial_f64((i - 1) as u64, j as u64)
                * binomial_f64((n - i) as u64, (2 * d - j) as u64);
            j += 1;
        }
        stay_plus /= denom;
    }

    let mut stay_minus = 0.0f64;
    if i <= n - 1 {
        let lo = 0i64.max(i + 2 * d - n);
        let hi = (d - c).min(i);
        let mut j = lo;
        while j <= hi {
            stay_minus += binomial_f64(i as u64, j as u64)
                * binomial_f64((n - i - 1) as u64, (2 * d - j) as u64);
            j += 1;
        }
        stay_minus /= denom;
    }

    (stay_plus, stay_minus)
}

/// One-step level transition probabilities for the pure heat-bath dynamic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelTransition {
    /// chose a + agent, it stayed
    pub p_pp: f64,
    /// chose a + agent, it flipped (level moves down)
    pub p_pm: f64,
    /// chose a - agent, it stayed
    pub p_mm: f64,
    /// chose a - agent, it flipped (level moves up)
    pub p_mp: f64,
}

impl LevelTransition {
    pub fn sum(&self) -> f64 {
        self.p_pp + self.p_pm + self.p_mm + self.p_mp
    }
}

/// `P_ab(i)` for the frozen phase: stay probabilities weighted by the chance
/// of selecting an agent with the corresponding spin. The four entries sum
/// to one.
pub fn level_transition_probs(params: &ModelParams, i: usize) -> LevelTransition {
    let (sp, sm) = stay_probabilities(params, i);
    let frac = i as f64 / params.n as f64;
    LevelTransition {
        p_pp: frac * sp,
        p_pm: frac * (1.0 - sp),
        p_mm: (1.0 - frac) * sm,
        p_mp: (1.0 - frac) * (1.0 - sm),
    }
}

/// Expected-impact functional at level `i` in the frozen phase:
/// `E_+(i) = P_mp(i) + gamma * P_pm(i)`, the expected price-shock direction
/// of one heat-bath move. Always in `[gamma, 1]`.
pub fn expected_imbalance_impact(params: &ModelParams, i: usize) -> f64 {
    let t = level_transition_probs(params, i);
    t.p_mp + params.gamma * t.p_pm
}

// ---------------------------------------------------------------------------
// Cached kernel
// ---------------------------------------------------------------------------

/// Per-level transition data for a fixed `ModelParams`, precomputed once.
/// Immutable after construction; cheap to share across threads.
#[derive(Debug, Clone, Serialize)]
pub struct TransitionKernel {
    pub params: ModelParams,
    /// stay probability of a +1 agent at each level 0..=n
    pub stay_plus: Vec<f64>,
    /// stay probability of a -1 agent at each level 0..=n
    pub stay_minus: Vec<f64>,
    /// expected-impact functional at each level 0..=n
    pub e_plus: Vec<f64>,
}

impl TransitionKernel {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        let levels = params.levels();
        let mut stay_plus = Vec::with_capacity(levels);
        let mut stay_minus = Vec::with_capacity(levels);
        let mut e_plus = Vec::with_capacity(levels);
        for i in 0..levels {
            let (sp, sm) = stay_probabilities(&params, i);
            stay_plus.push(sp);
            stay_minus.push(sm);
            let frac = i as f64 / params.n as f64;
            let p_mp = (1.0 - frac) * (1.0 - sm);
            let p_pm = frac * (1.0 - sp);
            e_plus.push(p_mp + params.gamma * p_pm);
        }
        Ok(TransitionKernel { params, stay_plus, stay_minus, e_plus })
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn levels(&self) -> usize {
        self.params.n + 1
    }

    pub fn transition(&self, i: usize) -> LevelTransition {
        let frac = i as f64 / self.params.n as f64;
        LevelTransition {
            p_pp: frac * self.stay_plus[i],
            p_pm: frac * (1.0 - self.stay_plus[i]),
            p_mm: (1.0 - frac) * self.stay_minus[i],
            p_mp: (1.0 - frac) * (1.0 - self.stay_minus[i]),
        }
    }
}

// ---------------------------------------------------------------------------
// Exact-rational backend (small instances; oracle cross-checks)
// ---------------------------------------------------------------------------

pub mod exact {
    //! Rational-arithmetic twin of the floating kernel, for exact agreement
    //! checks against exhaustive enumeration at small `n`.

    use num_rational::Ratio;
    use num_traits::{Signed, Zero};

    pub type Rat = Ratio<i128>;

    pub fn rat(num: i128, den: i128) -> Rat {
        Ratio::new(num, den)
    }

    /// Exact `C(n, k)`; panics on overflow (intended for n <= ~60).
    pub fn binomial_exact(n: i128, k: i128) -> i128 {
        if k < 0 || k > n {
            return 0;
        }
        let k = k.min(n - k);
        let mut acc: i128 = 1;
        for t in 1..=k {
            acc = acc * (n - k + t) / t;
        }
        acc
    }

    /// Ceiling of a nonnegative rational.
    fn ceil_rat(x: Rat) -> i128 {
        x.ceil().to_integer()
    }

    /// Exact frozen-phase stay probabilities at level `i` for rational
    /// `alpha`. Mirrors [`super::stay_probabilities`] term for term.
    pub fn stay_probabilities_exact(n: usize, d: usize, alpha: Rat, i: usize) -> (Rat, Rat) {
        assert!(alpha.is_positive());
        let ni = n as i128;
        let di = d as i128;
        let ii = i as i128;
        let c = ceil_rat(alpha * (rat(ii, ni) - rat(1, 2)).abs());
        let denom = binomial_exact(ni - 1, 2 * di);

        let mut stay_plus = Rat::zero();
        if ii >= 1 {
            let lo = (di + c).max(ii + 2 * di - ni);
            let hi = (2 * di).min(ii);
            let mut j = lo;
            while j <= hi {
                stay_plus +=
                    rat(binomial_exact(ii - 1, j) * binomial_exact(ni - ii, 2 * di - j), denom);
                j += 1;
            }
        }

        let mut stay_minus = Rat::zero();
        if ii <= ni - 1 {
            let lo = 0i128.max(ii + 2 * di - ni);
            let hi = (di - c).min(ii);
            let mut j = lo;
            while j <= hi {
                stay_minus +=
                    rat(binomial_exact(ii, j) * binomial_exact(ni - ii - 1, 2 * di - j), denom);
                j += 1;
            }
        }

        (stay_plus, stay_minus)
    }
}
