//! Expected wealth increments, the majority-opinion functional and the
//! optimal strategic-interaction search.
//!
//! A single move at level `i` shifts the price by `P * f(X, n)` where
//! `X in {-1, 0, +1}` is the level change, `f(1, n) = f_plus`,
//! `f(-1, n) = gamma * f_plus` and `f(0, n) = 0`. The closed forms below
//! carry the asymmetry prefactor `-(1 + 1/gamma)`; it vanishes identically
//! at `gamma = -1`, which is what kills all expected gains under symmetric
//! impact.

use crate::error::{CoreError, Result};
use crate::kernel::{ModelParams, TransitionKernel};
use crate::measure::{all_branches, InvariantMeasure};
use crate::attractors::classify;
use serde::Serialize;

/// Price impact of one incremental trade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpactFunction {
    /// impact of an incremental buyer, `f(1, n) > 0`
    pub f_plus: f64,
    /// seller-to-buyer impact ratio, in `[-1, 0)`
    pub gamma: f64,
}

impl ImpactFunction {
    pub fn new(f_plus: f64, gamma: f64) -> Result<Self> {
        if !(f_plus > 0.0) {
            return Err(CoreError::InvalidParameter(format!("f_plus = {f_plus} must be > 0")));
        }
        if !(-1.0..0.0).contains(&gamma) {
            return Err(CoreError::InvalidParameter(format!("gamma = {gamma} must lie in [-1, 0)")));
        }
        Ok(ImpactFunction { f_plus, gamma })
    }

    pub fn from_params(params: &ModelParams, f_plus: f64) -> Result<Self> {
        Self::new(f_plus, params.gamma)
    }

    /// `f(x, n)` for a level change `x in {-1, 0, +1}`; balanced moves map to
    /// the fundamental price.
    pub fn value(&self, x: i8) -> f64 {
        match x {
            1 => self.f_plus,
            -1 => self.gamma * self.f_plus,
            _ => 0.0,
        }
    }
}

/// Expected one-move wealth increment of an agent holding `spin` at level
/// `i`: `-spin * f_plus * price * (1 - 1/n)(1 + 1/gamma) * E_+(i)`.
pub fn agent_expected_increment(
    kernel: &TransitionKernel,
    impact: &ImpactFunction,
    price: f64,
    i: usize,
    spin: i8,
) -> f64 {
    let n = kernel.n() as f64;
    -(spin as f64)
        * impact.f_plus
        * price
        * (1.0 - 1.0 / n)
        * (1.0 + 1.0 / impact.gamma)
        * kernel.e_plus[i]
}

/// Expected one-move increment of the aggregate market wealth at level `i`:
/// `-f_plus * price * (1 + 1/gamma) * { (2i-n+1) P_mp(i) + gamma (2i-n-1) P_pm(i) }`.
pub fn market_expected_increment(
    kernel: &TransitionKernel,
    impact: &ImpactFunction,
    price: f64,
    i: usize,
) -> f64 {
    -impact.f_plus * price * (1.0 + 1.0 / impact.gamma) * market_braces(kernel, impact.gamma, i)
}

/// The level-dependent factor of the market increment (no prefactor).
fn market_braces(kernel: &TransitionKernel, gamma: f64, i: usize) -> f64 {
    let n = kernel.n() as f64;
    let t = kernel.transition(i);
    (2.0 * i as f64 - n + 1.0) * t.p_mp + gamma * (2.0 * i as f64 - n - 1.0) * t.p_pm
}

/// Stationary expectation of the market increment: the pi-weighted mean of
/// [`market_expected_increment`] over levels.
pub fn stationary_expected_increment(
    measure: &InvariantMeasure,
    kernel: &TransitionKernel,
    impact: &ImpactFunction,
    price: f64,
) -> Result<f64> {
    let pi = measure.pi()?;
    Ok(pi
        .iter()
        .enumerate()
        .map(|(i, &p)| p * market_expected_increment(kernel, impact, price, i))
        .sum())
}

fn sign_of(x: f64) -> i64 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Majority opinion at level `i`: each of the `i` buyers contributes the
/// sign of its expected increment, each of the `n - i` sellers likewise;
/// agents with zero expectation count for neither side.
pub fn majority_opinion(
    kernel: &TransitionKernel,
    impact: &ImpactFunction,
    price: f64,
    i: usize,
) -> i64 {
    let n = kernel.n() as i64;
    let plus = sign_of(agent_expected_increment(kernel, impact, price, i, 1));
    let minus = sign_of(agent_expected_increment(kernel, impact, price, i, -1));
    i as i64 * plus + (n - i as i64) * minus
}

/// Sign record for one (parameter cell, level) pair.
#[derive(Debug, Clone, Serialize)]
pub struct ConflictCell {
    pub q: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub level: usize,
    pub market_sign: i64,
    pub majority_sign: i64,
    /// both signs nonzero and opposite
    pub disagreement: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConflictReport {
    pub cells: Vec<ConflictCell>,
    pub disagreement_count: usize,
}

impl ConflictReport {
    /// Cells violating either implication: a market supermartingale with a
    /// positive majority, or a disagreement without a market submartingale.
    /// Both reduce to `market < 0 && majority > 0`.
    pub fn violations(&self) -> Vec<&ConflictCell> {
        self.cells.iter().filter(|c| c.market_sign < 0 && c.majority_sign > 0).collect()
    }
}

/// Scan every level of every kernel for the relative signs of the market
/// increment and the majority opinion.
pub fn conflict_scan<'a, I>(kernels: I, f_plus: f64, price: f64) -> Result<ConflictReport>
where
    I: IntoIterator<Item = &'a TransitionKernel>,
{
    let mut cells = Vec::new();
    let mut disagreement_count = 0;
    for kernel in kernels {
        let impact = ImpactFunction::from_params(&kernel.params, f_plus)?;
        for level in 0..kernel.levels() {
            let market = sign_of(market_expected_increment(kernel, &impact, price, level));
            let majority = sign_of(majority_opinion(kernel, &impact, price, level) as f64);
            let disagreement = market * majority == -1;
            if disagreement {
                disagreement_count += 1;
            }
            cells.push(ConflictCell {
                q: kernel.params.q,
                alpha: kernel.params.alpha,
                gamma: kernel.params.gamma,
                level,
                market_sign: market,
                majority_sign: majority,
                disagreement,
            });
        }
    }
    Ok(ConflictReport { cells, disagreement_count })
}

/// Result of the optimal strategic-interaction search.
#[derive(Debug, Clone, Serialize)]
pub struct OptimalQ {
    pub q_star: f64,
    pub dw_star: f64,
    /// measure uniqueness at the maximizing cell
    pub unique: bool,
    /// branch assignment (level, mark) that achieved the maximum
    pub branch: Vec<(usize, i8)>,
    /// true when the maximum was tied and broken toward smaller q
    pub tie: bool,
    /// grid points skipped because no invariant measure exists
    pub skipped_no_measure: Vec<f64>,
    /// grid points skipped because the product form was degenerate
    pub skipped_degenerate: Vec<f64>,
}

/// Maximize the stationary market increment over a q grid, maximizing over
/// measure branches inside non-unique cells. Ties break toward smaller q.
pub fn optimal_q(
    base: &ModelParams,
    q_grid: &[f64],
    impact: &ImpactFunction,
    price: f64,
) -> Result<OptimalQ> {
    if q_grid.is_empty() {
        return Err(CoreError::InvalidParameter("empty q grid".into()));
    }
    let mut best: Option<OptimalQ> = None;
    let mut skipped_no_measure = Vec::new();
    let mut skipped_degenerate = Vec::new();

    for &q in q_grid {
        let params = ModelParams { q, ..*base };
        params.validate()?;
        let kernel = TransitionKernel::new(params)?;
        let classification = classify(&kernel);
        if classification.has_a3() {
            skipped_no_measure.push(q);
            continue;
        }
        let branches = match all_branches(&kernel, &classification) {
            Ok(b) => b,
            Err(CoreError::DegenerateChain { .. }) => {
                skipped_degenerate.push(q);
                continue;
            }
            Err(e) => return Err(e),
        };
        let unique = branches.len() == 1;
        for m in &branches {
            let dw = stationary_expected_increment(m, &kernel, impact, price)?;
            match &mut best {
                None => {
                    best = Some(OptimalQ {
                        q_star: q,
                        dw_star: dw,
                        unique,
                        branch: m.branch.clone(),
                        tie: false,
                        skipped_no_measure: vec![],
                        skipped_degenerate: vec![],
                    });
                }
                Some(b) => {
                    if dw > b.dw_star {
                        b.q_star = q;
                        b.dw_star = dw;
                        b.unique = unique;
                        b.branch = m.branch.clone();
                        b.tie = false;
                    } else if dw == b.dw_star && q != b.q_star {
                        b.tie = true; // smaller q already holds the slot
                    }
                }
            }
        }
    }

    let mut out = best.ok_or(CoreError::NoInvariantMeasure)?;
    out.skipped_no_measure = skipped_no_measure;
    out.skipped_degenerate = skipped_degenerate;
    Ok(out)
}

/// Evenly spaced grid helper: `start, start+step, ..., <= stop` (inclusive
/// within half a step).
pub fn grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || stop < start {
        return Err(CoreError::InvalidParameter(format!(
            "bad grid {start}:{stop}:{step}"
        )));
    }
    let count = ((stop - start) / step + 0.5).floor() as usize + 1;
    Ok((0..count).map(|k| start + k as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attractors::classify;
    use crate::kernel::ModelParams;
    use crate::measure::invariant_measure;

    fn kernel(n: usize, d: usize, alpha: f64, gamma: f64, q: f64) -> TransitionKernel {
        TransitionKernel::new(ModelParams::new(n, d, alpha, gamma, q, f64::INFINITY).unwrap())
            .unwrap()
    }

    #[test]
    fn impact_function_validation() {
        assert!(ImpactFunction::new(0.0, -0.5).is_err());
        assert!(ImpactFunction::new(1.0, 0.0).is_err());
        assert!(ImpactFunction::new(1.0, -1.5).is_err());
        let f = ImpactFunction::new(2.0, -0.5).unwrap();
        assert_eq!(f.value(1), 2.0);
        assert_eq!(f.value(-1), -1.0);
        assert_eq!(f.value(0), 0.0);
    }

    #[test]
    fn agent_increment_zero_cases() {
        let k = kernel(64, 2, 5.0, -1.0, 1.0);
        let f = ImpactFunction::new(1.0, -1.0).unwrap();
        for i in 0..=64 {
            assert_eq!(agent_expected_increment(&k, &f, 1.0, i, 1), 0.0);
            assert_eq!(agent_expected_increment(&k, &f, 1.0, i, -1), 0.0);
        }
    }

    #[test]
    fn agent_increment_antisymmetric_in_spin() {
        let k = kernel(64, 2, 5.0, -0.7, 1.0);
        let f = ImpactFunction::new(1.0, -0.7).unwrap();
        for i in 0..=64 {
            let a = agent_expected_increment(&k, &f, 1.0, i, 1);
            let b = agent_expected_increment(&k, &f, 1.0, i, -1);
            assert_eq!(a, -b);
        }
    }

    #[test]
    fn market_increment_against_one_step_enumeration() {
        // the raw one-step expectation over X in {-1,0,+1} pins the braces
        // structure; the closed form is exactly -(1 + 1/gamma) times it,
        // so they coincide at gamma = -1/2
        for &gamma in &[-0.5f64, -0.7, -0.9] {
            let k = kernel(8, 1, 4.0, gamma, 1.0);
            let f = ImpactFunction::new(1.3, gamma).unwrap();
            let price = 2.0;
            for i in 0..=8usize {
                let t = k.transition(i);
                let direct = price
                    * (f.value(1) * t.p_mp * (2.0 * i as f64 - 8.0 + 1.0)
                        + f.value(-1) * t.p_pm * (2.0 * i as f64 - 8.0 - 1.0));
                let closed = market_expected_increment(&k, &f, price, i);
                let expect = -(1.0 + 1.0 / gamma) * direct;
                assert!(
                    (closed - expect).abs() <= 1e-12 * expect.abs().max(1.0),
                    "gamma {gamma} level {i}: {closed} vs {expect}"
                );
                if gamma == -0.5 {
                    assert!((closed - direct).abs() <= 1e-12 * direct.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn market_increment_zero_when_transitions_vanish() {
        // outside the band nothing holds, but a level where both flip
        // weights vanish gives zero: use gamma = -1 instead (prefactor)
        let k = kernel(16, 1, 4.0, -1.0, 1.0);
        let f = ImpactFunction::new(1.0, -1.0).unwrap();
        for i in 0..=16 {
            assert_eq!(market_expected_increment(&k, &f, 1.0, i), 0.0);
        }
    }

    #[test]
    fn stationary_increment_is_pi_weighted_mean() {
        let k = kernel(128, 2, 4.1, -0.7, 1.0);
        let c = classify(&k);
        let m = invariant_measure(&k, &c, &[]).unwrap();
        let f = ImpactFunction::new(1.0, -0.7).unwrap();
        let dw = stationary_expected_increment(&m, &k, &f, 1.0).unwrap();
        let pi = m.pi().unwrap();
        let manual: f64 = pi
            .iter()
            .enumerate()
            .map(|(i, &p)| p * market_expected_increment(&k, &f, 1.0, i))
            .sum();
        assert_eq!(dw, manual);
    }

    #[test]
    fn homogeneity_in_impact_scale() {
        let k = kernel(64, 2, 5.0, -0.7, 1.0);
        let f1 = ImpactFunction::new(1.0, -0.7).unwrap();
        let f2 = ImpactFunction::new(2.0, -0.7).unwrap();
        for i in 0..=64 {
            let a = market_expected_increment(&k, &f1, 1.0, i);
            let b = market_expected_increment(&k, &f2, 1.0, i);
            assert_eq!(b, 2.0 * a); // power-of-two scale is exact
            let c = market_expected_increment(&k, &f1, 2.0, i);
            assert_eq!(c, 2.0 * a);
            assert_eq!(
                majority_opinion(&k, &f1, 1.0, i),
                majority_opinion(&k, &f2, 4.0, i)
            );
        }
    }

    #[test]
    fn majority_edges() {
        let k = kernel(16, 1, 4.0, -0.7, 1.0);
        let f = ImpactFunction::new(1.0, -0.7).unwrap();
        for i in 0..=16usize {
            let m = majority_opinion(&k, &f, 1.0, i);
            assert!(m.abs() <= 16);
            if k.e_plus[i] == 0.0 {
                assert_eq!(m, 0);
            }
        }
        // at the top level every agent is a buyer: |M| = n or 0
        let m = majority_opinion(&k, &f, 1.0, 16);
        assert!(m == 16 || m == -16 || m == 0);
    }

    #[test]
    fn conflict_scan_sign_implications() {
        let kernels: Vec<TransitionKernel> = [0.5, 0.8, 1.0]
            .iter()
            .map(|&q| kernel(64, 2, 5.0, -0.7, q))
            .collect();
        let report = conflict_scan(kernels.iter(), 1.0, 1.0).unwrap();
        assert!(report.violations().is_empty());
        for cell in &report.cells {
            if cell.market_sign < 0 {
                assert!(cell.majority_sign <= 0, "{cell:?}");
            }
            if cell.disagreement {
                assert!(cell.market_sign > 0, "{cell:?}");
            }
        }
    }

    #[test]
    fn conflict_scan_symmetric_gamma_has_no_disagreements() {
        let kernels = vec![kernel(32, 1, 4.0, -1.0, 0.8)];
        let report = conflict_scan(kernels.iter(), 1.0, 1.0).unwrap();
        assert_eq!(report.disagreement_count, 0);
        assert!(report.cells.iter().all(|c| c.market_sign == 0));
    }

    #[test]
    fn optimal_q_symmetric_gamma_reports_tie_at_smallest_existing_q() {
        let base = ModelParams::new(32, 1, 4.0, -1.0, 0.5, f64::INFINITY).unwrap();
        let f = ImpactFunction::new(1.0, -1.0).unwrap();
        let qs = grid(0.05, 1.0, 0.05).unwrap();
        let got = optimal_q(&base, &qs, &f, 1.0).unwrap();
        assert_eq!(got.dw_star, 0.0);
        assert!(got.tie);
        // q_star is the smallest grid point where a measure exists
        let all_skipped: Vec<f64> = got
            .skipped_no_measure
            .iter()
            .chain(got.skipped_degenerate.iter())
            .copied()
            .collect();
        let smallest_live =
            qs.iter().copied().find(|q| !all_skipped.iter().any(|s| (s - q).abs() < 1e-12));
        assert_eq!(Some(got.q_star), smallest_live);
    }

    #[test]
    fn optimal_increment_nonnegative_across_gamma() {
        // the best strategic level never leaves the market expecting losses
        let f_dummy = ImpactFunction::new(1.0, -0.5).unwrap();
        let qs = grid(0.05, 1.0, 0.05).unwrap();
        for &gamma in &[-1.0, -0.7, -0.4, -0.1] {
            let base = ModelParams::new(128, 2, 5.0, gamma, 0.5, f64::INFINITY).unwrap();
            let impact = ImpactFunction { gamma, ..f_dummy };
            let got = optimal_q(&base, &qs, &impact, 1.0).unwrap();
            assert!(got.dw_star >= -1e-9, "gamma {gamma}: dW* = {}", got.dw_star);
        }
    }

    #[test]
    fn grid_shapes() {
        assert_eq!(grid(0.01, 0.03, 0.01).unwrap(), vec![0.01, 0.02, 0.03]);
        assert_eq!(grid(1.0, 1.0, 0.5).unwrap(), vec![1.0]);
        assert!(grid(1.0, 0.0, 0.1).is_err());
        assert!(grid(0.0, 1.0, 0.0).is_err());
        // fp-robust endpoint: 0.01..1.00 step 0.01 has exactly 100 points
        assert_eq!(grid(0.01, 1.0, 0.01).unwrap().len(), 100);
    }
}
