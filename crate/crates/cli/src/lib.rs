//! Experiment harness for the equilibrium-seeking library: config
//! ingestion, assumption checks, single runs, equilibrium oracles, and
//! Monte-Carlo sweeps with CSV emission.

pub mod commands;
pub mod config;
pub mod error;
pub mod montecarlo;

pub use commands::{cmd_check, cmd_oracle, cmd_run, CheckOutcome, OracleOutcome, RunOutcome};
pub use config::{resolve, Experiment, ExperimentConfig, GameInstance, Overrides};
pub use error::CliError;
pub use montecarlo::{
    aggregate_rows, run_monte_carlo, GammaAggregate, InstanceRow, MonteCarloParams,
    MonteCarloReport,
};
