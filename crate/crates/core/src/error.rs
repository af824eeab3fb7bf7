//! Error type shared by all solver components.

use thiserror::Error;

/// Errors produced by game construction, graph validation, and the iteration.
#[derive(Debug, Error)]
pub enum Error {
    /// Agent index outside `0..num_agents`.
    #[error("agent index {index} out of range for {count} agents")]
    AgentIndex { index: usize, count: usize },

    /// A vector or matrix does not match the expected dimension.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    /// Malformed value supplied by the caller.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Inconsistent solver configuration.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The communication graph does not admit a path between every node pair.
    #[error("graph is not strongly connected")]
    NotStronglyConnected,

    /// A self-Lipschitz constant is zero, so no step-size bound exists.
    #[error("degenerate game: agent {agent} has zero self-Lipschitz constant")]
    DegenerateGame { agent: usize },

    /// The game does not provide a Jacobian evaluator.
    #[error("jacobian evaluator is not available for this game")]
    MissingJacobian,

    /// Gradient evaluation failed for a specific agent.
    #[error("gradient evaluation failed for agent {agent}: {reason}")]
    Gradient { agent: usize, reason: String },

    /// Evaluation outside the domain of a cost or gradient formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// The iteration produced non-finite values.
    #[error("iteration diverged at step {iteration}: non-finite values ({last})")]
    Divergence { iteration: u64, last: String },

    /// No equilibrium oracle can be produced for this game.
    #[error("equilibrium oracle unavailable: {0}")]
    OracleUnavailable(String),

    /// Random instance generation exhausted its retry budget.
    #[error("instance generation failed after {attempts} attempts")]
    Generation { attempts: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
