//! Distributed Nash-equilibrium seeking over directed communication graphs
//! with row-stochastic mixing.
//!
//! Each agent keeps an estimate of the full joint action, averages it with
//! the estimates received from in-neighbors, and takes a projected gradient
//! step on its own action using only local information. Convergence rests on
//! a per-agent diagonal-dominance property of the game's gradients rather
//! than monotonicity, and the admissible step sizes depend only on each
//! agent's own constants, never on the communication structure.
//!
//! Crate layout:
//! - [`game`]: game definitions, regularity constants, assumption checkers.
//! - [`network`]: digraphs and row-stochastic weight matrices.
//! - [`engine`]: the averaged projected-gradient iteration and its metrics.
//! - [`games`]: built-in instances (optical power control, linear games).

pub mod engine;
pub mod error;
pub mod game;
pub mod games;
pub mod network;

pub use engine::{
    apply_operator, km_step, metrics, mix, run, AlgoConfig, ConfigWarning, EstimateMatrix,
    Metrics, MetricsSample, TerminationReason, Trajectory,
};
pub use error::{Error, Result};
pub use game::{
    estimate_constants_sampled, sampled_min_symmetric_eigenvalue, ActionBox, DominanceEntry,
    DominanceReport, GameConstants, GameSpec,
};
pub use network::{validate_weights, DiGraph, WeightMatrix, WeightReport, WeightViolation};
