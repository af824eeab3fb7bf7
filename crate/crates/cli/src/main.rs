use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nashnet_cli::config::{parse_steps_flag, ExperimentConfig, Overrides};
use nashnet_cli::montecarlo::{run_monte_carlo, MonteCarloParams};
use nashnet_cli::{cmd_check, cmd_oracle, cmd_run, CliError};

/// Distributed Nash-equilibrium seeking over directed graphs.
#[derive(Parser)]
#[command(name = "nashnet", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify every assumption the convergence guarantee needs.
    Check {
        /// Experiment config (TOML).
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the configured experiment and write the trajectory CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the averaging parameter.
        #[arg(long)]
        gamma: Option<f64>,
        /// Override the step sizes: "theorem1" or a comma-separated list
        /// (a single value broadcasts to every agent).
        #[arg(long)]
        steps: Option<String>,
        /// Seeded random initialization instead of the deterministic start.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory override.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Execute even if the assumption checks fail.
        #[arg(long)]
        force: bool,
    },
    /// Monte-Carlo sweep over random instances and averaging parameters.
    Montecarlo {
        /// Number of channels per instance.
        #[arg(long)]
        n: usize,
        /// Comma-separated averaging parameters, e.g. "0.2,0.5,0.8".
        #[arg(long)]
        gammas: String,
        /// Number of random instances.
        #[arg(long)]
        instances: usize,
        /// Base seed; instance r uses seed + r.
        #[arg(long)]
        seed: u64,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory for the CSV files.
        #[arg(long, default_value = "out/montecarlo")]
        out: PathBuf,
        /// Termination tolerance per run.
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[arg(long, default_value_t = 10_000_000)]
        max_iters: u64,
    },
    /// Print the game's equilibrium oracle and its gradient residual.
    Oracle {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_gammas(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|e| CliError::Validation(format!("cannot parse averaging parameters: {e}")))
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Check { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let outcome = cmd_check(&cfg)?;
            print!("{}", outcome.render());
            if outcome.passed() {
                Ok(())
            } else {
                Err(CliError::Validation(format!(
                    "{} assumption check(s) failed",
                    outcome.failures.len()
                )))
            }
        }
        Command::Run {
            config,
            gamma,
            steps,
            seed,
            out,
            force,
        } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(s) = &steps {
                parse_steps_flag(s)?;
            }
            cfg.apply_overrides(&Overrides {
                gamma,
                steps,
                seed,
                out,
            })?;
            let outcome = cmd_run(&cfg, force)?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", outcome.summary_line());
            Ok(())
        }
        Command::Montecarlo {
            n,
            gammas,
            instances,
            seed,
            jobs,
            out,
            tol,
            max_iters,
        } => {
            let mut params = MonteCarloParams::new(n, parse_gammas(&gammas)?, instances, seed);
            params.tol = tol;
            params.max_iters = max_iters;
            let report = run_monte_carlo(&params, jobs)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("montecarlo_instances.csv"), report.instances_csv())?;
            std::fs::write(out.join("montecarlo_summary.csv"), report.summary_csv())?;
            print!("{}", report.summary_lines());
            for (instance, reason) in &report.failures {
                eprintln!("warning: instance {instance} skipped: {reason}");
            }
            println!("csv written to {}", out.display());
            Ok(())
        }
        Command::Oracle { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let outcome = cmd_oracle(&cfg)?;
            println!("{}", outcome.render());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
