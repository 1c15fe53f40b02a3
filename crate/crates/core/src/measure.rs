//! Invariant measures of the imbalance chain.
//!
//! When no level oscillates, the chain restricted to the settled expectation
//! spins is a birth-death chain and its stationary law has the product form
//!
//! ```text
//! g(0) = 1
//! g(l) = C(n, l) * prod_{j=0}^{l-1} (1 - q stay_minus(j) - (1-q) X4(j))
//!                                 / (1 - q stay_plus(j+1) - (1-q) X1(j+1))
//! pi(l) = g(l) / sum_m g(m)
//! ```
//!
//! where `X1`/`X4` indicate the +1- and -1-settled level sets. Each frozen
//! (A2) level contributes an independent sign choice, so there are
//! `2^|A2|` distinct measures; with oscillating (A3) levels none exists.
//! Everything is evaluated in log space: at n = 128 the binomial factor alone
//! spans ~37 orders of magnitude.

use crate::attractors::Classification;
use crate::error::{CoreError, Result};
use crate::kernel::{ln_binomial, ModelParams, TransitionKernel};
use serde::Serialize;

/// Denominator factors below this are treated as an absorbing defect of the
/// product form; callers fall back to the dense stationary solve.
pub const DEGENERACY_TOLERANCE: f64 = 1e-13;

/// Cap on |A2| for exhaustive branch enumeration (2^20 ~ 1e6 branches).
pub const BRANCH_CAP: usize = 20;

/// One stationary measure branch of the imbalance chain.
#[derive(Debug, Clone, Serialize)]
pub struct InvariantMeasure {
    pub params: ModelParams,
    /// Stationary probabilities over levels 0..=n; absent when no invariant
    /// measure exists.
    pub pi: Option<Vec<f64>>,
    /// The (level, mark) assignment on frozen levels that selected this
    /// branch.
    pub branch: Vec<(usize, i8)>,
    /// False exactly when some level oscillates.
    pub exists: bool,
    /// True exactly when no level is frozen (single branch).
    pub unique: bool,
}

impl InvariantMeasure {
    /// The stationary vector, or [`CoreError::NoInvariantMeasure`].
    pub fn pi(&self) -> Result<&[f64]> {
        self.pi.as_deref().ok_or(CoreError::NoInvariantMeasure)
    }
}

/// Numerically stable `log(sum(exp(x)))`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = values.iter().map(|&v| (v - m).exp()).sum();
    m + s.ln()
}

/// Compute one branch of the stationary measure.
///
/// `branch[k]` assigns +-1 to the k-th frozen level in ascending order.
/// Returns `exists = false` (with `pi` absent) when oscillating levels are
/// present; errors with [`CoreError::DegenerateChain`] when a denominator
/// factor vanishes.
pub fn invariant_measure(
    kernel: &TransitionKernel,
    classification: &Classification,
    branch: &[i8],
) -> Result<InvariantMeasure> {
    let params = kernel.params;
    let a2 = classification.a2_levels();
    let branch_pairs: Vec<(usize, i8)> = a2.iter().copied().zip(branch.iter().copied()).collect();

    if classification.has_a3() {
        if branch.len() != a2.len() {
            return Err(CoreError::InvalidParameter(format!(
                "branch length {} != |A2| = {}",
                branch.len(),
                a2.len()
            )));
        }
        return Ok(InvariantMeasure {
            params,
            pi: None,
            branch: branch_pairs,
            exists: false,
            unique: a2.is_empty(),
        });
    }

    let plus_set = classification.steady_plus_indicator(branch)?;
    let n = params.n;
    let q = params.q;

    // reject any vanishing denominator before touching logs
    for level in 1..=n {
        let den = 1.0 - q * kernel.stay_plus[level]
            - (1.0 - q) * if plus_set[level] { 1.0 } else { 0.0 };
        if den < DEGENERACY_TOLERANCE {
            return Err(CoreError::DegenerateChain { level });
        }
    }

    let mut log_g = vec![0.0f64; n + 1];
    let mut acc = 0.0f64;
    for level in 1..=n {
        let num = 1.0 - q * kernel.stay_minus[level - 1]
            - (1.0 - q) * if plus_set[level - 1] { 0.0 } else { 1.0 };
        let den = 1.0 - q * kernel.stay_plus[level]
            - (1.0 - q) * if plus_set[level] { 1.0 } else { 0.0 };
        // rounding can push a mathematically zero factor a hair negative
        let num = num.max(0.0);
        acc += if num > 0.0 { num.ln() } else { f64::NEG_INFINITY };
        acc -= den.ln();
        log_g[level] = ln_binomial(n as u64, level as u64) + acc;
    }

    let lse = log_sum_exp(&log_g);
    let mut pi: Vec<f64> = log_g.iter().map(|&lg| (lg - lse).exp()).collect();
    let total: f64 = pi.iter().sum();
    for p in &mut pi {
        *p /= total;
    }

    Ok(InvariantMeasure {
        params,
        pi: Some(pi),
        branch: branch_pairs,
        exists: true,
        unique: a2.is_empty(),
    })
}

/// Enumerate every stationary branch, one per +-1 assignment on the frozen
/// levels, in binary counting order: bit k of the branch index is the k-th
/// frozen level ascending, bit value 0 meaning +1.
pub fn all_branches(
    kernel: &TransitionKernel,
    classification: &Classification,
) -> Result<Vec<InvariantMeasure>> {
    let a2 = classification.a2_levels();
    if a2.len() > BRANCH_CAP {
        return Err(CoreError::BranchExplosion { a2_count: a2.len(), cap: BRANCH_CAP });
    }
    let count: u64 = 1u64 << a2.len();
    let mut out = Vec::with_capacity(count as usize);
    for bits in 0..count {
        let branch: Vec<i8> =
            (0..a2.len()).map(|k| if bits >> k & 1 == 0 { 1 } else { -1 }).collect();
        out.push(invariant_measure(kernel, classification, &branch)?);
    }
    Ok(out)
}

/// Summary statistics of one stationary measure.
#[derive(Debug, Clone, Serialize)]
pub struct MeasureStats {
    /// argmax level, ties broken toward the lower level
    pub global_mode: usize,
    /// true when the argmax was a tie
    pub mode_tie: bool,
    /// mass within two levels of the global mode, window clipped at the edges
    pub mode_mass_5: f64,
    /// mean level
    pub mean: f64,
    /// all local maxima (plateau-aware), ascending
    pub mode_list: Vec<usize>,
}

/// Mode, concentration and mean of a stationary measure.
pub fn measure_stats(measure: &InvariantMeasure) -> Result<MeasureStats> {
    let pi = measure.pi()?;
    let n = pi.len() - 1;

    let mut global_mode = 0usize;
    let mut mode_tie = false;
    for (i, &p) in pi.iter().enumerate() {
        if p > pi[global_mode] {
            global_mode = i;
            mode_tie = false;
        } else if i != global_mode && p == pi[global_mode] {
            mode_tie = true;
        }
    }

    let lo = global_mode.saturating_sub(2);
    let hi = (global_mode + 2).min(n);
    let mode_mass_5: f64 = pi[lo..=hi].iter().sum();

    let mean: f64 = pi.iter().enumerate().map(|(i, &p)| i as f64 * p).sum();

    // plateau-aware local maxima: a maximal run of equal values counts when
    // it exceeds both boundary neighbors; reported at its lowest level
    let mut mode_list = Vec::new();
    let mut start = 0usize;
    while start <= n {
        let mut end = start;
        while end < n && pi[end + 1] == pi[start] {
            end += 1;
        }
        let left_ok = start == 0 || pi[start - 1] < pi[start];
        let right_ok = end == n || pi[end + 1] < pi[start];
        if left_ok && right_ok {
            mode_list.push(start);
        }
        start = end + 1;
    }

    Ok(MeasureStats { global_mode, mode_tie, mode_mass_5, mean, mode_list })
}

/// Strategic-adjusted birth/death rates of the imbalance chain under settled
/// expectation spins; shared by the detailed-balance checks and the oracle.
pub fn chain_rates(
    kernel: &TransitionKernel,
    plus_set: &[bool],
) -> (Vec<f64>, Vec<f64>) {
    let n = kernel.n();
    let q = kernel.params.q;
    let mut up = Vec::with_capacity(n + 1);
    let mut down = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let frac = i as f64 / n as f64;
        let chi1 = if plus_set[i] { 1.0 } else { 0.0 };
        let chi4 = 1.0 - chi1;
        up.push((1.0 - frac) * (q * (1.0 - kernel.stay_minus[i]) + (1.0 - q) * chi1));
        down.push(frac * (q * (1.0 - kernel.stay_plus[i]) + (1.0 - q) * chi4));
    }
    (up, down)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attractors::{classify, AClass};
    use crate::kernel::ModelParams;

    fn kernel(n: usize, d: usize, alpha: f64, gamma: f64, q: f64) -> TransitionKernel {
        TransitionKernel::new(ModelParams::new(n, d, alpha, gamma, q, f64::INFINITY).unwrap())
            .unwrap()
    }

    #[test]
    fn log_sum_exp_extremes() {
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = [-1000.0, -1000.0];
        assert!((log_sum_exp(&v) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        let w = [700.0, 710.0];
        let expect = 710.0 + (1.0 + (-10f64).exp()).ln();
        assert!((log_sum_exp(&w) - expect).abs() < 1e-12);
    }

    #[test]
    fn measure_normalizes_and_is_nonnegative() {
        let k = kernel(128, 2, 4.1, -0.7, 1.0);
        let c = classify(&k);
        let m = invariant_measure(&k, &c, &[]).unwrap();
        let pi = m.pi().unwrap();
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(pi.iter().all(|&p| p >= 0.0));
        assert!(m.exists && m.unique);
    }

    #[test]
    fn q_one_measure_is_symmetric() {
        let k = kernel(128, 2, 4.1, -0.7, 1.0);
        let c = classify(&k);
        let m = invariant_measure(&k, &c, &[]).unwrap();
        let pi = m.pi().unwrap();
        for l in 0..=128 {
            assert!((pi[l] - pi[128 - l]).abs() < 1e-12, "level {l}");
        }
    }

    #[test]
    fn oscillating_levels_mean_no_measure() {
        // low q at these parameters leaves high outside-band levels unsettled
        let k = kernel(128, 2, 5.0, -0.9, 0.11);
        let c = classify(&k);
        assert!(c.has_a3());
        let m = invariant_measure(&k, &c, &vec![1i8; c.a2_levels().len()]).unwrap();
        assert!(!m.exists);
        assert!(m.pi.is_none());
        assert!(matches!(m.pi(), Err(CoreError::NoInvariantMeasure)));
    }

    #[test]
    fn branch_count_is_power_of_two() {
        // near q = 1 a level with slightly negative impact sits in the narrow
        // frozen window: a single-level non-uniqueness island
        let k = kernel(128, 2, 5.0, -0.9, 0.995);
        let c = classify(&k);
        let a2 = c.a2_levels();
        assert_eq!(a2, vec![39]);
        assert!(!c.has_a3());
        let branches = all_branches(&k, &c).unwrap();
        assert_eq!(branches.len(), 2);
        for b in &branches {
            assert!(!b.unique);
            let pi = b.pi().unwrap();
            assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let p0 = branches[0].pi().unwrap();
        let p1 = branches[1].pi().unwrap();
        assert!(p0.iter().zip(p1).any(|(a, b)| (a - b).abs() > 1e-9));
    }

    #[test]
    fn unique_when_no_frozen_levels() {
        let k = kernel(16, 1, 4.0, -0.7, 1.0);
        let c = classify(&k);
        assert!(c.a2_levels().is_empty());
        let branches = all_branches(&k, &c).unwrap();
        assert_eq!(branches.len(), 1);
        assert!(branches[0].unique);
    }

    #[test]
    fn branch_flip_equals_set_substitution() {
        // flipping one frozen level's mark must equal moving that level
        // between the settled sets in the raw product
        let k = kernel(128, 2, 5.0, -0.9, 0.995);
        let c = classify(&k);
        let a2 = c.a2_levels();
        assert!(!a2.is_empty());
        let mut branch = vec![1i8; a2.len()];
        let m_plus = invariant_measure(&k, &c, &branch).unwrap();
        branch[0] = -1;
        let m_minus = invariant_measure(&k, &c, &branch).unwrap();

        // reconstruct the minus measure from scratch with the indicator moved
        let mut plus_set = c.steady_plus_indicator(&vec![1i8; a2.len()]).unwrap();
        plus_set[a2[0]] = false;
        let (up, down) = chain_rates(&k, &plus_set);
        // detailed-balance rebuild
        let n = k.n();
        let mut log_g = vec![0.0f64; n + 1];
        for l in 1..=n {
            log_g[l] = log_g[l - 1]
                + if up[l - 1] > 0.0 { up[l - 1].ln() } else { f64::NEG_INFINITY }
                - down[l].ln();
        }
        let lse = log_sum_exp(&log_g);
        let pi_rebuilt: Vec<f64> = log_g.iter().map(|&lg| (lg - lse).exp()).collect();
        let pi = m_minus.pi().unwrap();
        for l in 0..=n {
            assert!((pi[l] - pi_rebuilt[l]).abs() < 1e-12, "level {l}: {} vs {}", pi[l], pi_rebuilt[l]);
        }
        // and the two branches genuinely differ
        let pp = m_plus.pi().unwrap();
        assert!(pp.iter().zip(pi).any(|(a, b)| (a - b).abs() > 1e-9));
    }

    #[test]
    fn detailed_balance_holds() {
        let mut checked = 0;
        for &q in &[0.9, 0.995, 1.0] {
            let k = kernel(64, 2, 5.0, -0.7, q);
            let c = classify(&k);
            if c.has_a3() {
                continue;
            }
            let branch = vec![1i8; c.a2_levels().len()];
            let Ok(m) = invariant_measure(&k, &c, &branch) else { continue };
            checked += 1;
            let pi = m.pi().unwrap();
            let plus_set = c.steady_plus_indicator(&branch).unwrap();
            let (up, down) = chain_rates(&k, &plus_set);
            for l in 1..=64 {
                let lhs = pi[l] * down[l];
                let rhs = pi[l - 1] * up[l - 1];
                let scale = lhs.abs().max(rhs.abs());
                if scale > 1e-300 {
                    assert!((lhs - rhs).abs() / scale < 1e-10, "q {q} level {l}");
                }
            }
        }
        assert!(checked >= 1, "no measure was checkable");
    }

    #[test]
    fn degenerate_denominator_is_reported() {
        // alpha <= 2d makes the top level absorbing upward (its stay
        // probability is one), so the product form is invalid at q = 1
        let k = kernel(8, 1, 2.0, -0.7, 1.0);
        assert_eq!(k.stay_plus[8], 1.0);
        let c = classify(&k);
        let branch = vec![1i8; c.a2_levels().len()];
        match invariant_measure(&k, &c, &branch) {
            Err(CoreError::DegenerateChain { level }) => assert_eq!(level, 8),
            other => panic!("expected DegenerateChain, got {other:?}"),
        }
    }

    #[test]
    fn stats_of_uniform_vector() {
        let k = kernel(16, 1, 4.0, -0.7, 1.0);
        let m = InvariantMeasure {
            params: k.params,
            pi: Some(vec![1.0 / 17.0; 17]),
            branch: vec![],
            exists: true,
            unique: true,
        };
        let s = measure_stats(&m).unwrap();
        assert_eq!(s.mean, (0..=16).map(|i| i as f64 / 17.0).sum::<f64>());
        assert!((s.mean - 8.0).abs() < 1e-12);
        // a full plateau is a single run exceeding no neighbor: reported once
        assert_eq!(s.mode_list, vec![0]);
        assert_eq!(s.global_mode, 0);
        assert!(s.mode_tie);
    }

    #[test]
    fn stats_mode_and_mass() {
        let k = kernel(128, 2, 4.1, -0.7, 1.0);
        let c = classify(&k);
        let m = invariant_measure(&k, &c, &[]).unwrap();
        let s = measure_stats(&m).unwrap();
        assert!(s.mode_list.contains(&s.global_mode));
        assert!(s.mode_mass_5 > 0.0 && s.mode_mass_5 <= 1.0);
        // symmetric tri-modal: mean is the center
        assert!((s.mean - 64.0).abs() < 1e-9);
        assert_eq!(s.mode_list.len(), 3, "modes: {:?}", s.mode_list);
    }

    #[test]
    fn branch_cap_enforced() {
        // synthetic classification with 22 frozen levels trips the cap
        let k = kernel(64, 2, 5.0, -0.9, 0.9);
        let mut c = classify(&k);
        for class in c.a_class.iter_mut().take(22) {
            *class = AClass::A2;
        }
        match all_branches(&k, &c) {
            Err(CoreError::BranchExplosion { a2_count, cap }) => {
                assert_eq!(a2_count, 22);
                assert_eq!(cap, BRANCH_CAP);
            }
            other => panic!("expected BranchExplosion, got {:?}", other.map(|v| v.len())),
        }
    }
}
