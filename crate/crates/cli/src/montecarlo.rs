//! Monte-Carlo sweeps over seeded random power-control instances: one run
//! per averaging parameter from a shared initial condition, aggregated per
//! parameter value.
//!
//! Instances are seeded individually (`base seed + instance index`), so the
//! per-instance rows are identical no matter how many worker threads execute
//! them; wall-clock columns are the one exception and are excluded from the
//! aggregate checksum.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use nashnet::engine::{self, AlgoConfig, EstimateMatrix, TerminationReason};
use nashnet::games::OsnrGame;
use nashnet::network::WeightMatrix;

use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct MonteCarloParams {
    pub channels: usize,
    pub gammas: Vec<f64>,
    pub instances: usize,
    pub seed: u64,
    /// Safety factor on the per-agent step-size bounds.
    pub rho: f64,
    pub tol: f64,
    pub max_iters: u64,
}

impl MonteCarloParams {
    pub fn new(channels: usize, gammas: Vec<f64>, instances: usize, seed: u64) -> Self {
        Self {
            channels,
            gammas,
            instances,
            seed,
            rho: 0.99,
            tol: AlgoConfig::DEFAULT_TOL,
            max_iters: AlgoConfig::DEFAULT_MAX_ITERS,
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.instances == 0 {
            return Err(CliError::Validation("instance count must be at least one".into()));
        }
        if self.gammas.is_empty()
            || self
                .gammas
                .iter()
                .any(|g| !g.is_finite() || *g < 0.0 || *g >= 1.0)
        {
            return Err(CliError::Validation(
                "averaging parameters must be a nonempty list inside [0, 1)".into(),
            ));
        }
        if self.channels < 2 {
            return Err(CliError::Validation("instances need at least two channels".into()));
        }
        Ok(())
    }
}

/// One (instance, averaging parameter) run.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRow {
    pub instance: usize,
    pub seed: u64,
    pub gamma: f64,
    pub iterations: u64,
    pub terminated_by: TerminationReason,
    /// Terminal Euclidean distance of the joint action to the instance's
    /// closed-form equilibrium.
    pub action_error: f64,
    pub consensus_residual: f64,
    pub wall_time_s: f64,
}

fn row_checksum(row: &InstanceRow) -> u64 {
    (row.instance as u64).rotate_left(43)
        ^ row.iterations.rotate_left(17)
        ^ row.action_error.to_bits()
        ^ row.consensus_residual.to_bits().rotate_left(29)
}

/// Aggregate over all completed instances of one averaging parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaAggregate {
    pub gamma: f64,
    pub completed: usize,
    pub failures: usize,
    pub mean_action_error: f64,
    /// Population standard deviation (a single instance aggregates to 0).
    pub stddev_action_error: f64,
    pub mean_iterations: f64,
    pub mean_wall_time_s: f64,
    /// XOR fold of the deterministic row fields; recomputable from the
    /// per-instance rows.
    pub checksum: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub rows: Vec<InstanceRow>,
    pub aggregates: Vec<GammaAggregate>,
    /// `(instance, reason)` pairs for skipped instances.
    pub failures: Vec<(usize, String)>,
}

/// Deterministic aggregation of rows by averaging parameter; rows are folded
/// in instance order regardless of how they were produced.
pub fn aggregate_rows(
    gammas: &[f64],
    rows: &[InstanceRow],
    failures: usize,
) -> Vec<GammaAggregate> {
    gammas
        .iter()
        .map(|gamma| {
            let mut selected: Vec<&InstanceRow> =
                rows.iter().filter(|r| r.gamma == *gamma).collect();
            selected.sort_by_key(|r| r.instance);
            let n = selected.len();
            let mean = |f: fn(&InstanceRow) -> f64| -> f64 {
                if n == 0 {
                    f64::NAN
                } else {
                    selected.iter().map(|r| f(r)).sum::<f64>() / n as f64
                }
            };
            let mean_err = mean(|r| r.action_error);
            let var = if n == 0 {
                f64::NAN
            } else {
                selected
                    .iter()
                    .map(|r| (r.action_error - mean_err) * (r.action_error - mean_err))
                    .sum::<f64>()
                    / n as f64
            };
            let checksum = selected.iter().fold(0u64, |acc, r| acc ^ row_checksum(r));
            GammaAggregate {
                gamma: *gamma,
                completed: n,
                failures,
                mean_action_error: mean_err,
                stddev_action_error: var.sqrt(),
                mean_iterations: mean(|r| r.iterations as f64),
                mean_wall_time_s: mean(|r| r.wall_time_s),
                checksum,
            }
        })
        .collect()
}

fn run_instance(params: &MonteCarloParams, instance: usize) -> Result<Vec<InstanceRow>, String> {
    let seed = params.seed + instance as u64;
    let (game, graph) = OsnrGame::random(params.channels, seed).map_err(|e| e.to_string())?;
    let weights = WeightMatrix::row_stochastic(graph).map_err(|e| e.to_string())?;
    let constants = game.constants().map_err(|e| e.to_string())?;
    let bounds = constants.step_size_bounds().map_err(|e| e.to_string())?;
    let steps: Vec<f64> = bounds.iter().map(|b| params.rho * b).collect();
    let oracle = game.closed_form_ne().map_err(|e| e.to_string())?;
    let spec = game.spec();
    // One initial condition shared by every averaging parameter, so the
    // sweep isolates the parameter itself.
    let init = EstimateMatrix::default_init(&spec);

    let mut rows = Vec::with_capacity(params.gammas.len());
    for gamma in &params.gammas {
        let cfg = AlgoConfig::new(*gamma, steps.clone())
            .with_tol(params.tol)
            .with_max_iters(params.max_iters)
            .with_record_every(params.max_iters.max(1));
        let started = Instant::now();
        let t = engine::run(&spec, &weights, &cfg, init.clone(), Some(&oracle))
            .map_err(|e| e.to_string())?;
        let wall = started.elapsed().as_secs_f64();
        let terminal = t.terminal_sample();
        rows.push(InstanceRow {
            instance,
            seed,
            gamma: *gamma,
            iterations: t.iterations,
            terminated_by: t.reason,
            action_error: terminal.action_error.expect("oracle supplied"),
            consensus_residual: terminal.consensus_residual,
            wall_time_s: wall,
        });
    }
    Ok(rows)
}

/// Runs the sweep; instances execute in parallel (bounded by `jobs` when
/// given) and failed instances are skipped and counted.
pub fn run_monte_carlo(
    params: &MonteCarloParams,
    jobs: Option<usize>,
) -> Result<MonteCarloReport, CliError> {
    params.validate()?;

    let worker = |instance: usize| (instance, run_instance(params, instance));
    let results: Vec<(usize, Result<Vec<InstanceRow>, String>)> = match jobs {
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| CliError::Runtime(format!("cannot build thread pool: {e}")))?;
            pool.install(|| (1..=params.instances).into_par_iter().map(worker).collect())
        }
        None => (1..=params.instances).into_par_iter().map(worker).collect(),
    };

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (instance, result) in results {
        match result {
            Ok(mut r) => rows.append(&mut r),
            Err(reason) => failures.push((instance, reason)),
        }
    }
    rows.sort_by_key(|r| r.instance);
    let aggregates = aggregate_rows(&params.gammas, &rows, failures.len());
    Ok(MonteCarloReport {
        rows,
        aggregates,
        failures,
    })
}

impl MonteCarloReport {
    /// Per-run CSV; wall-clock values vary between executions, every other
    /// column is deterministic in the seeds.
    pub fn instances_csv(&self) -> String {
        let mut out = String::from(
            "instance,seed,gamma,iterations,terminated_by,action_error,consensus_residual,wall_time_s\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.instance,
                r.seed,
                r.gamma,
                r.iterations,
                r.terminated_by,
                r.action_error,
                r.consensus_residual,
                r.wall_time_s
            );
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "gamma,completed,failures,mean_action_error,stddev_action_error,mean_iterations,mean_wall_time_s,checksum\n",
        );
        for a in &self.aggregates {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{:016x}",
                a.gamma,
                a.completed,
                a.failures,
                a.mean_action_error,
                a.stddev_action_error,
                a.mean_iterations,
                a.mean_wall_time_s,
                a.checksum
            );
        }
        out
    }

    pub fn summary_lines(&self) -> String {
        let mut out = String::new();
        for a in &self.aggregates {
            let _ = writeln!(
                out,
                "gamma={}: instances={} failures={} mean_error={:.6e} stddev={:.6e} mean_iters={:.1} mean_wall={:.4}s",
                a.gamma,
                a.completed,
                a.failures,
                a.mean_action_error,
                a.stddev_action_error,
                a.mean_iterations,
                a.mean_wall_time_s
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(MonteCarloParams::new(6, vec![0.2], 0, 1).validate().is_err());
        assert!(MonteCarloParams::new(6, vec![1.0], 4, 1).validate().is_err());
        assert!(MonteCarloParams::new(6, vec![], 4, 1).validate().is_err());
        assert!(MonteCarloParams::new(1, vec![0.2], 4, 1).validate().is_err());
    }

    #[test]
    fn single_instance_aggregate_equals_its_row() {
        let params = MonteCarloParams::new(4, vec![0.3], 1, 11);
        let report = run_monte_carlo(&params, Some(1)).unwrap();
        assert_eq!(report.rows.len(), 1);
        let row = &report.rows[0];
        let agg = &report.aggregates[0];
        assert_eq!(agg.completed, 1);
        assert_eq!(agg.mean_action_error, row.action_error);
        assert_eq!(agg.stddev_action_error, 0.0);
        assert_eq!(agg.mean_iterations, row.iterations as f64);
    }

    #[test]
    fn aggregates_are_recomputable_from_rows() {
        let params = MonteCarloParams::new(4, vec![0.2, 0.6], 3, 5);
        let report = run_monte_carlo(&params, Some(2)).unwrap();
        let recomputed = aggregate_rows(&params.gammas, &report.rows, report.failures.len());
        for (a, b) in report.aggregates.iter().zip(&recomputed) {
            assert_eq!(a.checksum, b.checksum);
            assert_eq!(a.mean_action_error, b.mean_action_error);
            assert_eq!(a.mean_iterations, b.mean_iterations);
        }
    }

    #[test]
    fn parallel_and_sequential_rows_agree() {
        let params = MonteCarloParams::new(4, vec![0.2, 0.5], 4, 29);
        let seq = run_monte_carlo(&params, Some(1)).unwrap();
        let par = run_monte_carlo(&params, Some(4)).unwrap();
        assert_eq!(seq.rows.len(), par.rows.len());
        for (a, b) in seq.rows.iter().zip(&par.rows) {
            assert_eq!(a.instance, b.instance);
            assert_eq!(a.gamma, b.gamma);
            assert_eq!(a.iterations, b.iterations);
            assert_eq!(a.action_error, b.action_error);
            assert_eq!(a.consensus_residual, b.consensus_residual);
        }
        for (a, b) in seq.aggregates.iter().zip(&par.aggregates) {
            assert_eq!(a.checksum, b.checksum);
        }
    }
}
