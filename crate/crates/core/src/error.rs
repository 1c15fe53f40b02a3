use thiserror::Error;

/// Errors shared across the exact-computation modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    /// A constructor or operation precondition was violated.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A denominator factor of the stationary product form is (numerically)
    /// zero: the level is almost surely absorbing upward and the closed form
    /// is invalid. Callers fall back to the dense stationary solve.
    #[error("degenerate chain: product-form denominator vanishes at level {level}")]
    DegenerateChain { level: usize },

    /// Requested the stationary vector of a measure that does not exist
    /// (some level oscillates forever).
    #[error("no invariant measure exists (oscillating levels present)")]
    NoInvariantMeasure,

    /// Enumerating all 2^|A2| measure branches would exceed the cap.
    #[error("branch explosion: 2^{a2_count} branches exceeds cap 2^{cap}")]
    BranchExplosion { a2_count: usize, cap: usize },
}

pub type Result<T> = std::result::Result<T, CoreError>;
