//! Attractor classification of imbalance levels.
//!
//! Each level carries an expectation spin marking it desirable (+1) or not
//! (-1) to strategic agents. In the frozen phase the expectation spins settle
//! into one of four behaviors per level, determined by two threshold
//! inequalities on the expected-impact functional `E_+`:
//!
//! ```text
//! B = { i : E_+(i) >= (1 - 1/q) (1 - i/n) }      (a +1 mark is stable)
//! C = { i : E_+(i) <= (1 - 1/q) (i/n)     }      (a -1 mark is stable)
//! ```
//!
//! A1 = B and not C  -> settles at +1 after the first update
//! A2 = B and C      -> frozen at its initial value (path dependence)
//! A3 = neither      -> flips every epoch, never settles
//! A4 = C and not B  -> settles at -1

use crate::error::{CoreError, Result};
use crate::kernel::{hypergeom_pmf, ModelParams, TransitionKernel};
use serde::Serialize;

/// Absolute tolerance for deciding ties in the threshold inequalities.
/// `E_+` is a finite sum of rationals, so genuine ties (the q = 1,
/// `E_+ = 0` case) must be detected through double-precision noise.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AClass {
    A1,
    A2,
    A3,
    A4,
}

impl std::fmt::Display for AClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AClass::A1 => "A1",
            AClass::A2 => "A2",
            AClass::A3 => "A3",
            AClass::A4 => "A4",
        };
        f.write_str(s)
    }
}

/// Per-level attractor classification together with the B/C membership that
/// produced it.
#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub params: ModelParams,
    pub in_b: Vec<bool>,
    pub in_c: Vec<bool>,
    pub a_class: Vec<AClass>,
}

impl Classification {
    /// Levels frozen to their initial mark, ascending.
    pub fn a2_levels(&self) -> Vec<usize> {
        (0..self.a_class.len()).filter(|&i| self.a_class[i] == AClass::A2).collect()
    }

    /// Levels that oscillate forever, ascending.
    pub fn a3_levels(&self) -> Vec<usize> {
        (0..self.a_class.len()).filter(|&i| self.a_class[i] == AClass::A3).collect()
    }

    pub fn has_a3(&self) -> bool {
        self.a_class.iter().any(|&c| c == AClass::A3)
    }

    /// Indicator of the +1-settled set under a branch assignment for the A2
    /// levels (`branch[k]` is the mark of the k-th A2 level, ascending).
    /// Errors when oscillating levels are present or the branch length is
    /// wrong. The complement indicator is the -1-settled set.
    pub fn steady_plus_indicator(&self, branch: &[i8]) -> Result<Vec<bool>> {
        if self.has_a3() {
            return Err(CoreError::NoInvariantMeasure);
        }
        let a2 = self.a2_levels();
        if branch.len() != a2.len() {
            return Err(CoreError::InvalidParameter(format!(
                "branch length {} != |A2| = {}",
                branch.len(),
                a2.len()
            )));
        }
        if branch.iter().any(|&b| b != 1 && b != -1) {
            return Err(CoreError::InvalidParameter("branch entries must be +-1".into()));
        }
        let mut ind = vec![false; self.a_class.len()];
        let mut k = 0;
        for (i, &class) in self.a_class.iter().enumerate() {
            ind[i] = match class {
                AClass::A1 => true,
                AClass::A4 => false,
                AClass::A2 => {
                    let v = branch[k] == 1;
                    k += 1;
                    v
                }
                AClass::A3 => unreachable!(),
            };
        }
        Ok(ind)
    }
}

/// Classify every level of a frozen-phase kernel.
pub fn classify(kernel: &TransitionKernel) -> Classification {
    let params = kernel.params;
    let n = params.n as f64;
    let t = 1.0 - 1.0 / params.q;
    let levels = kernel.levels();
    let mut in_b = Vec::with_capacity(levels);
    let mut in_c = Vec::with_capacity(levels);
    let mut a_class = Vec::with_capacity(levels);
    for i in 0..levels {
        let e = kernel.e_plus[i];
        let frac = i as f64 / n;
        let b = e >= t * (1.0 - frac) - TIE_TOLERANCE;
        let c = e <= t * frac + TIE_TOLERANCE;
        in_b.push(b);
        in_c.push(c);
        a_class.push(match (b, c) {
            (true, false) => AClass::A1,
            (true, true) => AClass::A2,
            (false, false) => AClass::A3,
            (false, true) => AClass::A4,
        });
    }
    Classification { params, in_b, in_c, a_class }
}

/// Long-run fate of one expectation spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EtaTwoFate {
    /// settles at +1 from the first update on
    Plus,
    /// settles at -1 from the first update on
    Minus,
    /// keeps its initial mark forever
    Frozen(i8),
    /// alternates sign every epoch; never settles
    Oscillating,
}

#[derive(Debug, Clone, Serialize)]
pub struct EtaTwoSteadyState {
    pub values: Vec<EtaTwoFate>,
}

/// Steady-state map for the expectation spins given their initial values.
pub fn eta2_steady(classification: &Classification, initial_eta2: &[i8]) -> EtaTwoSteadyState {
    assert_eq!(initial_eta2.len(), classification.a_class.len());
    let values = classification
        .a_class
        .iter()
        .zip(initial_eta2)
        .map(|(&class, &init)| match class {
            AClass::A1 => EtaTwoFate::Plus,
            AClass::A4 => EtaTwoFate::Minus,
            AClass::A2 => EtaTwoFate::Frozen(init),
            AClass::A3 => EtaTwoFate::Oscillating,
        })
        .collect();
    EtaTwoSteadyState { values }
}

/// Finite-beta flip probability of an expectation spin: the chance that a
/// mark currently `a` becomes `b` at the next synchronous update.
///
/// The underlying randomness is the pair of independent hypergeometric
/// neighbor counts (U, V) that realize the impact functional at inverse
/// temperature beta:
///
/// ```text
/// E(u, v) = (1 - i/n) sigmoid(2 beta h_minus(v)) + gamma (i/n) sigmoid(-2 beta h_plus(u))
/// h_plus(u)  = 2(u - d) - alpha |2i/n - 1|
/// h_minus(v) = 2(v - d) + alpha |2i/n - 1|
/// ```
///
/// A +1 mark stays when `E >= (1 - 1/q)(1 - i/n)`, a -1 mark stays when
/// `E <= (1 - 1/q)(i/n)`; realizations on the boundary count as staying.
/// Rows are complementary by construction and the beta -> infinity limit
/// reproduces [`classify`] wherever no realization atom straddles its
/// threshold.
pub fn lambda_finite_beta(params: &ModelParams, i: usize, a: i8, b: i8) -> Result<f64> {
    params.validate()?;
    if params.is_frozen() {
        return Err(CoreError::InvalidParameter(
            "lambda_finite_beta requires finite beta (use classify for the frozen phase)".into(),
        ));
    }
    if i > params.n {
        return Err(CoreError::InvalidParameter(format!("level {i} out of range")));
    }
    if (a != 1 && a != -1) || (b != 1 && b != -1) {
        return Err(CoreError::InvalidParameter("spin arguments must be +-1".into()));
    }

    let n = params.n as f64;
    let frac = i as f64 / n;
    let two_d = 2 * params.d;
    let global = params.alpha * (2.0 * frac - 1.0).abs();
    let beta = params.beta;
    let t = 1.0 - 1.0 / params.q;

    // pmf tables for U (given a +1 agent: i-1 other pluses) and V (given a -1
    // agent: i other pluses). At i = 0 the U-weighted term carries factor
    // i/n = 0 and at i = n the V term carries 1 - i/n = 0, so the clamped
    // success counts never contribute.
    let pop = (params.n - 1) as u64;
    let succ_u = i.saturating_sub(1).min(params.n - 1) as u64;
    let succ_v = i.min(params.n - 1) as u64;
    let pmf_u: Vec<f64> =
        (0..=two_d).map(|k| hypergeom_pmf(pop, succ_u, two_d as u64, k as u64)).collect::<Result<_>>()?;
    let pmf_v: Vec<f64> =
        (0..=two_d).map(|k| hypergeom_pmf(pop, succ_v, two_d as u64, k as u64)).collect::<Result<_>>()?;

    let sigmoid = |x: f64| 1.0 / (1.0 + (-x).exp());

    let threshold = if a == 1 { t * (1.0 - frac) } else { t * frac };
    let mut stay = 0.0f64;
    for (u, &pu) in pmf_u.iter().enumerate() {
        if pu == 0.0 {
            continue;
        }
        let h_plus = 2.0 * (u as f64 - params.d as f64) - global;
        let term_u = params.gamma * frac * sigmoid(-2.0 * beta * h_plus);
        for (v, &pv) in pmf_v.iter().enumerate() {
            if pv == 0.0 {
                continue;
            }
            let h_minus = 2.0 * (v as f64 - params.d as f64) + global;
            let e = (1.0 - frac) * sigmoid(2.0 * beta * h_minus) + term_u;
            let stays = if a == 1 { e >= threshold } else { e <= threshold };
            if stays {
                stay += pu * pv;
            }
        }
    }
    // the atom masses themselves sum to 1 only up to rounding
    let stay = stay.clamp(0.0, 1.0);

    Ok(if b == a { stay } else { 1.0 - stay })
}
