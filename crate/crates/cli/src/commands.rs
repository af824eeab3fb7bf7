//! The `check`, `run`, and `oracle` commands.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use nashnet::engine::{self, AlgoConfig, TerminationReason, Trajectory};
use nashnet::game::sampled_min_symmetric_eigenvalue;

use crate::config::{build_game, build_graph, resolve_steps, resolve_with, ExperimentConfig};
use crate::error::CliError;

/// Sample count for the monotonicity diagnostic in `check`.
const MONOTONICITY_SAMPLES: usize = 256;

/// Structured result of the assumption checks.
#[derive(Debug, Default)]
pub struct CheckOutcome {
    pub lines: Vec<String>,
    pub warnings: Vec<String>,
    pub failures: Vec<String>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            let _ = writeln!(out, "{l}");
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        for f in &self.failures {
            let _ = writeln!(out, "FAIL: {f}");
        }
        let _ = writeln!(
            out,
            "result: {}",
            if self.passed() { "PASS" } else { "FAIL" }
        );
        out
    }
}

fn fmt_vec(values: &[f64]) -> String {
    let cells: Vec<String> = values.iter().map(|v| format!("{v:.6}")).collect();
    format!("[{}]", cells.join(", "))
}

/// Verifies every assumption the convergence guarantee needs: connectivity,
/// weight validity, dominance slacks, the game's own dominance condition,
/// step admissibility, and the averaging parameter; also prints the sampled
/// monotonicity diagnostic.
pub fn cmd_check(config: &ExperimentConfig) -> Result<CheckOutcome, CliError> {
    let mut out = CheckOutcome::default();
    let (game, instance_graph) = build_game(&config.game)?;
    let graph = build_graph(&config.graph, game.num_agents(), instance_graph)?;

    out.lines.push(format!(
        "graph: {} nodes, {} edges (self-loops included)",
        graph.num_nodes(),
        graph.edge_count()
    ));
    let connected = graph.is_strongly_connected();
    out.lines
        .push(format!("strongly connected: {}", if connected { "yes" } else { "no" }));
    if !connected {
        out.failures.push("graph is not strongly connected".into());
    }

    if connected {
        match nashnet::WeightMatrix::row_stochastic(graph) {
            Ok(w) => {
                let report = nashnet::validate_weights(w.matrix(), w.graph())?;
                if report.is_valid() {
                    out.lines.push(
                        "weights: row-stochastic with positive diagonal, pattern matches graph"
                            .into(),
                    );
                } else {
                    for v in report.violations() {
                        out.failures.push(format!("weight violation: {v}"));
                    }
                }
            }
            Err(e) => out.failures.push(format!("weight construction: {e}")),
        }
    }

    if let Some(condition) = game.condition_report() {
        let margins: Vec<f64> = condition.entries().iter().map(|e| e.margin).collect();
        out.lines.push(format!(
            "system-matrix dominance margins: {}",
            fmt_vec(&margins)
        ));
        if !condition.holds() {
            out.failures
                .push("system-matrix dominance condition fails".into());
        }
    }

    let constants = game.constants()?;
    let dominance = constants.dominance();
    let slacks: Vec<f64> = dominance.entries().iter().map(|e| e.slack).collect();
    out.lines
        .push(format!("dominance slacks: {}", fmt_vec(&slacks)));
    if !dominance.holds() {
        out.failures.push(format!(
            "dominance condition fails (min slack {})",
            dominance.min_slack()
        ));
    } else if dominance.min_slack() == 0.0 {
        out.warnings
            .push("dominance slack is zero for some agent; the guarantee is borderline".into());
    }

    let bounds = constants.step_size_bounds()?;
    out.lines
        .push(format!("step-size bounds: {}", fmt_vec(&bounds)));

    let steps = resolve_steps(&config.algorithm, &constants)?;
    out.lines.push(format!("steps in use: {}", fmt_vec(&steps)));
    let algo = AlgoConfig::new(config.algorithm.gamma, steps)
        .with_tol(config.algorithm.tol)
        .with_max_iters(config.algorithm.max_iters)
        .with_record_every(config.output.stride);
    match algo.validate(Some(&constants)) {
        Ok(warnings) => {
            out.lines.push("steps admissible: yes".into());
            for w in warnings {
                out.warnings.push(w.to_string());
            }
        }
        Err(e) => out.failures.push(e.to_string()),
    }
    out.lines
        .push(format!("averaging parameter: {}", config.algorithm.gamma));

    let spec = game.spec();
    match sampled_min_symmetric_eigenvalue(&spec, MONOTONICITY_SAMPLES, 0) {
        Ok(min) => {
            let verdict = if min < 0.0 {
                "gradient map is not monotone on the box (diagnostic only)"
            } else {
                "no nonmonotonicity detected at the sampled points"
            };
            out.lines.push(format!(
                "sampled min symmetric-part eigenvalue: {min:.6} ({verdict})"
            ));
        }
        Err(nashnet::Error::MissingJacobian) => {
            out.lines
                .push("sampled monotonicity diagnostic: unavailable (no jacobian)".into());
        }
        Err(e) => return Err(e.into()),
    }

    Ok(out)
}

/// Result of a single run.
#[derive(Debug)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub wall_seconds: f64,
    pub csv_path: PathBuf,
    pub warnings: Vec<String>,
}

impl RunOutcome {
    pub fn summary_line(&self) -> String {
        let t = &self.trajectory;
        let term = t.terminal_sample();
        let action = term
            .action_error
            .map_or_else(|| "n/a".into(), |e| format!("{e:.6e}"));
        format!(
            "run: terminated={} iters={} step_delta={:.6e} action_error={} consensus={:.6e} fixed_point={:.6e} wall={:.3}s csv={}",
            t.reason,
            t.iterations,
            term.step_delta.unwrap_or(f64::NAN),
            action,
            term.consensus_residual,
            term.fixed_point_residual,
            self.wall_seconds,
            self.csv_path.display()
        )
    }
}

/// Runs the configured experiment and writes the trajectory CSV.
///
/// The assumption checks must pass first unless `force` is set.
pub fn cmd_run(config: &ExperimentConfig, force: bool) -> Result<RunOutcome, CliError> {
    let check = cmd_check(config)?;
    if !check.passed() && !force {
        return Err(CliError::Validation(format!(
            "assumption checks failed ({}); rerun with --force to execute anyway",
            check.failures.join("; ")
        )));
    }

    let experiment = resolve_with(config, force)?;
    let started = Instant::now();
    let trajectory = engine::run(
        &experiment.spec,
        &experiment.weights,
        &experiment.config,
        experiment.init.clone(),
        experiment.oracle.as_deref(),
    )?;
    let wall_seconds = started.elapsed().as_secs_f64();

    std::fs::create_dir_all(&experiment.out_dir)?;
    let csv_path = experiment.out_dir.join("trajectory.csv");
    std::fs::write(&csv_path, trajectory.to_csv())?;
    std::fs::write(
        experiment.out_dir.join("weights.csv"),
        experiment.weights.to_csv(),
    )?;

    Ok(RunOutcome {
        trajectory,
        wall_seconds,
        csv_path,
        warnings: experiment.warnings,
    })
}

/// Result of the equilibrium oracle command.
#[derive(Debug)]
pub struct OracleOutcome {
    pub equilibrium: Vec<f64>,
    /// Infinity norm of the stacked gradient at the oracle point.
    pub residual: f64,
    pub interior: bool,
}

impl OracleOutcome {
    pub fn render(&self) -> String {
        // `v + 0.0` folds negative zeros from the linear solve.
        let cells: Vec<String> = self
            .equilibrium
            .iter()
            .map(|v| format!("{:.6}", v + 0.0))
            .collect();
        format!(
            "equilibrium: [{}]\ngradient residual (inf norm): {:.3e}\ninterior: {}",
            cells.join(", "),
            self.residual,
            if self.interior { "yes" } else { "no" }
        )
    }
}

/// Computes the game's equilibrium oracle, its gradient residual, and
/// whether it is interior to the action boxes.
pub fn cmd_oracle(config: &ExperimentConfig) -> Result<OracleOutcome, CliError> {
    let (game, _) = build_game(&config.game)?;
    let equilibrium = game.oracle()?;
    let spec = game.spec();
    let mut residual = 0.0f64;
    for i in 0..spec.num_agents() {
        for g in spec.partial_gradient(i, &equilibrium)? {
            residual = residual.max(g.abs());
        }
    }
    let interior = game.is_interior(&equilibrium);
    Ok(OracleOutcome {
        equilibrium,
        residual,
        interior,
    })
}

/// Convenience: run a resolved experiment directly (used by tests to share
/// exact run semantics with the CLI).
pub fn run_resolved(experiment: &crate::config::Experiment) -> Result<Trajectory, CliError> {
    Ok(engine::run(
        &experiment.spec,
        &experiment.weights,
        &experiment.config,
        experiment.init.clone(),
        experiment.oracle.as_deref(),
    )?)
}

/// True when a run stopped on its tolerance rather than the iteration cap.
pub fn terminated_by_tolerance(t: &Trajectory) -> bool {
    t.reason == TerminationReason::Tolerance
}
