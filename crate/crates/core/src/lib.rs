//! Exact computation and Monte Carlo simulation for a two-dimensional spin
//! market model on the imbalance chain.
//!
//! `n` agents hold buy/sell spins; the chain tracks the number of buyers.
//! A second spin dimension marks each imbalance level as desirable or not to
//! strategic agents, who copy that mark instead of following the heat-bath
//! dynamic with probability `1 - q`. The crate provides:
//!
//! - [`kernel`]: exact frozen-phase transition probabilities built from
//!   hypergeometric neighbor counts, and the expected-impact functional.
//! - [`attractors`]: the per-level threshold classification that decides
//!   whether each desirability mark locks, freezes or oscillates, plus
//!   finite-temperature mark-flip probabilities.
//! - [`measure`]: product-form invariant measures, their non-unique branches
//!   and non-existence detection, with summary statistics.
//! - [`wealth`]: expected wealth increments for agents and the market, the
//!   majority-opinion functional, conflict scans and the optimal-q search.
//! - [`simulator`]: a seeded Monte Carlo of the full lattice process.
//! - [`oracle`]: independent brute-force ground truth (exhaustive
//!   enumeration and dense stationary solves) for small instances.

pub mod attractors;
pub mod error;
pub mod kernel;
pub mod measure;
pub mod oracle;
pub mod simulator;
pub mod wealth;

pub use attractors::{classify, eta2_steady, lambda_finite_beta, AClass, Classification};
pub use error::{CoreError, Result};
pub use kernel::{
    expected_imbalance_impact, hypergeom_pmf, level_transition_probs, stay_probabilities,
    LevelTransition, ModelParams, TransitionKernel,
};
pub use measure::{
    all_branches, invariant_measure, measure_stats, InvariantMeasure, MeasureStats,
};
pub use oracle::{
    build_chain, enumerate_flip_probs, stationary_solve, BirthDeathMatrix, StationaryOutcome,
};
pub use simulator::{run, SimConfig, SpinInit, Trajectory};
pub use wealth::{
    agent_expected_increment, conflict_scan, grid, majority_opinion, market_expected_increment,
    optimal_q, stationary_expected_increment, ImpactFunction, OptimalQ,
};
