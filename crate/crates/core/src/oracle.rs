//! Brute-force ground truth for small instances.
//!
//! Two independent routes check the analytic results: exact flip-probability
//! enumeration over every neighborhood and spin assignment, and a dense
//! linear solve for the stationary vector of the explicit birth-death
//! transition matrix. Agreement with the closed forms is mandatory wherever
//! both apply.

use crate::attractors::Classification;
use crate::error::{CoreError, Result};
use crate::kernel::exact::{binomial_exact, Rat};
use crate::kernel::TransitionKernel;
use crate::measure::chain_rates;
use num_traits::{Signed, Zero};
use serde::Serialize;

/// Explicit one-step transition rates of the imbalance chain.
#[derive(Debug, Clone, Serialize)]
pub struct BirthDeathMatrix {
    pub up: Vec<f64>,
    pub down: Vec<f64>,
    pub stay: Vec<f64>,
}

impl BirthDeathMatrix {
    pub fn levels(&self) -> usize {
        self.up.len()
    }

    pub fn from_rates(up: Vec<f64>, down: Vec<f64>) -> Self {
        assert_eq!(up.len(), down.len());
        let stay = up.iter().zip(&down).map(|(u, d)| 1.0 - u - d).collect();
        BirthDeathMatrix { up, down, stay }
    }
}

/// Materialize the chain implied by a kernel, a classification and a branch
/// assignment on the frozen levels.
pub fn build_chain(
    kernel: &TransitionKernel,
    classification: &Classification,
    branch: &[i8],
) -> Result<BirthDeathMatrix> {
    let plus_set = classification.steady_plus_indicator(branch)?;
    let (up, down) = chain_rates(kernel, &plus_set);
    Ok(BirthDeathMatrix::from_rates(up, down))
}

/// Report for a chain whose stationary vector is not unique.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReducibleReport {
    /// closed communicating classes as inclusive level ranges, ascending
    pub recurrent_classes: Vec<(usize, usize)>,
}

/// Outcome of the dense stationary solve.
#[derive(Debug, Clone, Serialize)]
pub enum StationaryOutcome {
    /// exactly one closed class: the unique stationary vector over all levels
    Unique(Vec<f64>),
    /// several closed classes: no single stationary vector
    Reducible(ReducibleReport),
}

/// Closed communicating classes of a birth-death chain, found structurally
/// from exactly-zero rates.
pub fn recurrent_classes(matrix: &BirthDeathMatrix) -> Vec<(usize, usize)> {
    let n = matrix.levels() - 1;
    // communicating intervals: split where the connecting rate vanishes
    let mut classes = Vec::new();
    let mut start = 0usize;
    for i in 0..=n {
        let splits_after = i == n || matrix.up[i] == 0.0 || matrix.down[i + 1] == 0.0;
        if splits_after {
            // interval [start, i]; closed iff nothing leaks out either end
            let up_closed = i == n || matrix.up[i] == 0.0;
            let down_closed = start == 0 || matrix.down[start] == 0.0;
            if up_closed && down_closed {
                classes.push((start, i));
            }
            start = i + 1;
        }
    }
    classes
}

/// Dense stationary solve of `pi P = pi`, `sum pi = 1` by Gaussian
/// elimination with partial pivoting. Detects reducibility first and
/// reports the closed classes instead of a vector when there are several.
pub fn stationary_solve(matrix: &BirthDeathMatrix) -> Result<StationaryOutcome> {
    let levels = matrix.levels();
    if levels < 2 {
        return Err(CoreError::InvalidParameter("chain needs at least two levels".into()));
    }
    if levels > 2049 {
        return Err(CoreError::InvalidParameter(format!(
            "dense solve capped at 2048 levels, got {}",
            levels - 1
        )));
    }
    let classes = recurrent_classes(matrix);
    if classes.len() != 1 {
        return Ok(StationaryOutcome::Reducible(ReducibleReport { recurrent_classes: classes }));
    }

    // rows: (P^T - I) pi = 0 with the last equation replaced by sum pi = 1
    let m = levels;
    let mut a = vec![0.0f64; m * m];
    for j in 0..m {
        // column j of P^T row i is P[j][i]; build (P^T - I)
        // transitions out of state j: up, down, stay
        a[j * m + j] -= 1.0; // -I on the diagonal, filled together with stay below
        a[j * m + j] += matrix.stay[j];
        if j + 1 < m {
            a[(j + 1) * m + j] += matrix.up[j];
        }
        if j > 0 {
            a[(j - 1) * m + j] += matrix.down[j];
        }
    }
    let mut b = vec![0.0f64; m];
    for j in 0..m {
        a[(m - 1) * m + j] = 1.0;
    }
    b[m - 1] = 1.0;

    // gaussian elimination, partial pivoting
    for col in 0..m {
        let mut pivot = col;
        for row in col + 1..m {
            if a[row * m + col].abs() > a[pivot * m + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * m + col].abs() < 1e-300 {
            return Err(CoreError::InvalidParameter(
                "singular stationary system (unexpected for an irreducible chain)".into(),
            ));
        }
        if pivot != col {
            for k in 0..m {
                a.swap(col * m + k, pivot * m + k);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * m + col];
        for row in col + 1..m {
            let factor = a[row * m + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..m {
                a[row * m + k] -= factor * a[col * m + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0f64; m];
    for row in (0..m).rev() {
        let mut s = b[row];
        for k in row + 1..m {
            s -= a[row * m + k] * x[k];
        }
        x[row] = s / a[row * m + row];
    }
    // clamp tiny negative round-off on transient states and renormalize
    for v in &mut x {
        if *v < 0.0 && *v > -1e-12 {
            *v = 0.0;
        }
    }
    let total: f64 = x.iter().sum();
    for v in &mut x {
        *v /= total;
    }
    Ok(StationaryOutcome::Unique(x))
}

// ---------------------------------------------------------------------------
// Exhaustive flip-probability enumeration (exact rationals)
// ---------------------------------------------------------------------------

fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // advance
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Exact stay probabilities by brute force: iterate over every 2d-subset of
/// the other `n-1` sites and every placement of the remaining +1 spins
/// consistent with the level, apply the sign rule to the field
/// `h = neighbor sum - s * alpha * |2i - n| / n` (ties stay), and count.
///
/// Intended for `n <= 12`; cost grows as `C(n-1, 2d) * C(n-1, i)`.
pub fn enumerate_flip_probs(n: usize, d: usize, alpha: Rat, i: usize) -> Result<(Rat, Rat)> {
    if n > 12 {
        return Err(CoreError::InvalidParameter(format!("enumeration capped at n = 12, got {n}")));
    }
    if n < 2 || d < 1 || 2 * d > n - 1 || i > n {
        return Err(CoreError::InvalidParameter("bad enumeration parameters".into()));
    }
    let others = n - 1;
    let global: Rat = alpha * Rat::new((2 * i as i128 - n as i128).abs(), n as i128);

    // stay probability for a +1 agent: the other sites hold i-1 pluses
    let stay_plus = if i >= 1 {
        enumerate_side(others, d, i - 1, &global, true)
    } else {
        Rat::zero()
    };
    // stay probability for a -1 agent: the other sites hold i pluses
    let stay_minus = if i <= n - 1 {
        enumerate_side(others, d, i, &global, false)
    } else {
        Rat::zero()
    };
    Ok((stay_plus, stay_minus))
}

fn enumerate_side(others: usize, d: usize, plus_count: usize, global: &Rat, is_plus: bool) -> Rat {
    let subset_count = binomial_exact(others as i128, 2 * d as i128);
    let assign_count = binomial_exact(others as i128, plus_count as i128);
    if subset_count == 0 || assign_count == 0 {
        return Rat::zero();
    }
    let mut stays: i128 = 0;
    // spin assignments as bitmasks over the other sites
    let masks: Vec<u32> = (0u32..1 << others).filter(|m| m.count_ones() as usize == plus_count).collect();
    for_each_combination(others, 2 * d, |subset| {
        let subset_mask: u32 = subset.iter().fold(0, |acc, &s| acc | 1 << s);
        for &mask in &masks {
            let plus_in_nbhd = (mask & subset_mask).count_ones() as i128;
            let nbr_sum = 2 * plus_in_nbhd - 2 * d as i128; // +-1 spins summed
            // h = nbr_sum -+ global ; exact rational comparison
            let h = Rat::new(nbr_sum, 1) + if is_plus { -global.clone() } else { global.clone() };
            let stay = if is_plus { !h.is_negative() } else { !h.is_positive() };
            if stay {
                stays += 1;
            }
        }
    });
    Rat::new(stays, subset_count * assign_count)
}

/// Convenience float wrapper around [`enumerate_flip_probs`].
pub fn enumerate_flip_probs_f64(n: usize, d: usize, alpha: Rat, i: usize) -> Result<(f64, f64)> {
    let (p, m) = enumerate_flip_probs(n, d, alpha, i)?;
    let to_f = |r: Rat| *r.numer() as f64 / *r.denom() as f64;
    Ok((to_f(p), to_f(m)))
}
