//! Experiment configuration: a TOML file with `[game]`, `[graph]`,
//! `[algorithm]`, and `[output]` sections, resolved into validated solver
//! inputs.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Deserialize;

use nashnet::engine::{AlgoConfig, EstimateMatrix};
use nashnet::game::{GameConstants, GameSpec};
use nashnet::games::{ConditionReport, LinearGame, OsnrGame};
use nashnet::network::{DiGraph, WeightMatrix};

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameSection,
    #[serde(default)]
    pub graph: GraphSection,
    pub algorithm: AlgorithmSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GameSection {
    /// Optical power-control game with explicit channel parameters.
    Osnr {
        eta: Vec<f64>,
        beta: Vec<f64>,
        a: Vec<f64>,
        phi: Vec<Vec<f64>>,
        n0: f64,
        x_min: f64,
        x_max: f64,
    },
    /// Linear game: stacked gradient `matrix * x + offset` with per-agent
    /// interval action sets.
    Linear {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
        boxes: Vec<[f64; 2]>,
    },
    /// Seeded random power-control instance (also fixes the graph unless a
    /// `[graph]` section overrides it).
    RandomOsnr { channels: usize, seed: u64 },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    /// "cycle" (default) or "cycle-plus-random".
    pub generator: Option<String>,
    /// Node count; defaults to the game's agent count and must match it.
    pub nodes: Option<usize>,
    pub extra_edge_prob: Option<f64>,
    pub seed: Option<u64>,
    /// Explicit `[from, to]` pairs instead of a generator.
    pub edges: Option<Vec<[usize; 2]>>,
}

fn default_rho() -> f64 {
    0.99
}

fn default_tol() -> f64 {
    AlgoConfig::DEFAULT_TOL
}

fn default_max_iters() -> u64 {
    AlgoConfig::DEFAULT_MAX_ITERS
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSection {
    pub gamma: f64,
    /// Either the string "theorem1" (per-agent bound scaled by `rho`) or an
    /// explicit list of step sizes.
    pub steps: StepsSpec,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: u64,
    /// Seeded random initialization; omitted means the deterministic
    /// midpoint start.
    pub init_seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum StepsSpec {
    Named(String),
    Explicit(Vec<f64>),
}

fn default_dir() -> String {
    "out".into()
}

fn default_stride() -> u64 {
    AlgoConfig::DEFAULT_RECORD_EVERY
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "default_stride")]
    pub stride: u64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            stride: default_stride(),
        }
    }
}

/// Command-line overrides applied on top of a parsed config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub gamma: Option<f64>,
    /// "theorem1" or a comma-separated list; a single value broadcasts to
    /// every agent.
    pub steps: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse_toml(&text)
    }

    pub fn parse_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text)
            .map_err(|e| CliError::Validation(format!("config parse error: {e}")))
    }

    pub fn apply_overrides(&mut self, ov: &Overrides) -> Result<(), CliError> {
        if let Some(g) = ov.gamma {
            self.algorithm.gamma = g;
        }
        if let Some(spec) = &ov.steps {
            self.algorithm.steps = parse_steps_flag(spec)?;
        }
        if let Some(seed) = ov.seed {
            self.algorithm.init_seed = Some(seed);
        }
        if let Some(out) = &ov.out {
            self.output.dir = out.display().to_string();
        }
        Ok(())
    }
}

/// Parses the `--steps` flag: "theorem1" or a comma-separated value list.
pub fn parse_steps_flag(text: &str) -> Result<StepsSpec, CliError> {
    let trimmed = text.trim();
    if trimmed == "theorem1" {
        return Ok(StepsSpec::Named(trimmed.to_string()));
    }
    let values = trimmed
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|e| {
            CliError::Validation(format!(
                "steps must be \"theorem1\" or a comma-separated list of numbers: {e}"
            ))
        })?;
    if values.is_empty() {
        return Err(CliError::Validation("steps list is empty".into()));
    }
    Ok(StepsSpec::Explicit(values))
}

/// A resolved builtin game.
#[derive(Debug, Clone)]
pub enum GameInstance {
    Osnr(OsnrGame),
    Linear(LinearGame),
}

impl GameInstance {
    pub fn num_agents(&self) -> usize {
        match self {
            Self::Osnr(g) => g.num_channels(),
            Self::Linear(g) => g.num_agents(),
        }
    }

    pub fn spec(&self) -> GameSpec {
        match self {
            Self::Osnr(g) => g.spec(),
            Self::Linear(g) => g.spec(),
        }
    }

    pub fn constants(&self) -> Result<GameConstants, CliError> {
        match self {
            Self::Osnr(g) => Ok(g.constants()?),
            Self::Linear(g) => Ok(g.constants()?),
        }
    }

    /// Closed-form (or projected) equilibrium oracle.
    pub fn oracle(&self) -> nashnet::Result<Vec<f64>> {
        match self {
            Self::Osnr(g) => g.closed_form_ne(),
            Self::Linear(g) => g.oracle(),
        }
    }

    /// The strict system-matrix dominance report, for games that have one.
    pub fn condition_report(&self) -> Option<ConditionReport> {
        match self {
            Self::Osnr(g) => Some(g.condition_report()),
            Self::Linear(_) => None,
        }
    }

    /// True iff `x` lies strictly inside every action interval.
    pub fn is_interior(&self, x: &[f64]) -> bool {
        match self {
            Self::Osnr(g) => g.is_interior(x),
            Self::Linear(g) => x
                .iter()
                .enumerate()
                .all(|(i, v)| {
                    let b = g.action_box(i);
                    *v > b.lo()[0] && *v < b.hi()[0]
                }),
        }
    }
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, CliError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Validation(format!("{what} must be a square matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Builds the game described by a `[game]` section. Random instances also
/// return their generated graph.
pub fn build_game(section: &GameSection) -> Result<(GameInstance, Option<DiGraph>), CliError> {
    match section {
        GameSection::Osnr {
            eta,
            beta,
            a,
            phi,
            n0,
            x_min,
            x_max,
        } => {
            let phi = matrix_from_rows(phi, "phi")?;
            let game = OsnrGame::new(
                eta.clone(),
                beta.clone(),
                a.clone(),
                phi,
                *n0,
                *x_min,
                *x_max,
            )?;
            Ok((GameInstance::Osnr(game), None))
        }
        GameSection::Linear {
            matrix,
            offset,
            boxes,
        } => {
            let a = matrix_from_rows(matrix, "matrix")?;
            let intervals = boxes.iter().map(|b| (b[0], b[1])).collect();
            let game = LinearGame::new(a, offset.clone(), intervals)?;
            Ok((GameInstance::Linear(game), None))
        }
        GameSection::RandomOsnr { channels, seed } => {
            let (game, graph) = OsnrGame::random(*channels, *seed)?;
            Ok((GameInstance::Osnr(game), Some(graph)))
        }
    }
}

/// Builds the communication graph for `num_agents` agents, honoring an
/// instance-provided graph when the section leaves everything unset.
pub fn build_graph(
    section: &GraphSection,
    num_agents: usize,
    instance_graph: Option<DiGraph>,
) -> Result<DiGraph, CliError> {
    if let Some(edges) = &section.edges {
        if section.generator.is_some() {
            return Err(CliError::Validation(
                "graph section cannot set both `edges` and `generator`".into(),
            ));
        }
        let n = section.nodes.unwrap_or(num_agents);
        if n != num_agents {
            return Err(CliError::Validation(format!(
                "graph has {n} nodes but the game has {num_agents} agents"
            )));
        }
        let pairs: Vec<(usize, usize)> = edges.iter().map(|e| (e[0], e[1])).collect();
        return Ok(DiGraph::from_edges(n, &pairs)?);
    }
    let n = section.nodes.unwrap_or(num_agents);
    if n != num_agents {
        return Err(CliError::Validation(format!(
            "graph has {n} nodes but the game has {num_agents} agents"
        )));
    }
    match section.generator.as_deref() {
        None => match instance_graph {
            Some(g) => Ok(g),
            None => Ok(DiGraph::cycle(n)?),
        },
        Some("cycle") => Ok(DiGraph::cycle(n)?),
        Some("cycle-plus-random") => {
            let p = section.extra_edge_prob.unwrap_or(0.3);
            let seed = section.seed.unwrap_or(0);
            Ok(DiGraph::cycle_plus_random(n, p, seed)?)
        }
        Some(other) => Err(CliError::Validation(format!(
            "unknown graph generator \"{other}\" (expected \"cycle\" or \"cycle-plus-random\")"
        ))),
    }
}

/// Resolves the step sizes of an algorithm section against the game's
/// constants.
pub fn resolve_steps(
    section: &AlgorithmSection,
    constants: &GameConstants,
) -> Result<Vec<f64>, CliError> {
    match &section.steps {
        StepsSpec::Named(name) if name == "theorem1" => {
            if !(section.rho > 0.0 && section.rho < 1.0) {
                return Err(CliError::Validation(format!(
                    "step safety factor must lie in (0, 1), got {}",
                    section.rho
                )));
            }
            let bounds = constants.step_size_bounds()?;
            Ok(bounds.iter().map(|b| section.rho * b).collect())
        }
        StepsSpec::Named(other) => Err(CliError::Validation(format!(
            "unknown steps rule \"{other}\" (expected \"theorem1\" or an explicit list)"
        ))),
        StepsSpec::Explicit(values) => {
            let n = constants.num_agents();
            if values.len() == 1 && n > 1 {
                return Ok(vec![values[0]; n]);
            }
            if values.len() != n {
                return Err(CliError::Validation(format!(
                    "{} step sizes given for {n} agents",
                    values.len()
                )));
            }
            Ok(values.clone())
        }
    }
}

/// A fully resolved, runnable experiment.
#[derive(Debug)]
pub struct Experiment {
    pub game: GameInstance,
    pub spec: GameSpec,
    pub weights: WeightMatrix,
    pub constants: GameConstants,
    pub config: AlgoConfig,
    pub init: EstimateMatrix,
    pub oracle: Option<Vec<f64>>,
    pub warnings: Vec<String>,
    pub out_dir: PathBuf,
}

/// Resolves a parsed config into a runnable experiment, failing on any
/// violated hard assumption.
pub fn resolve(config: &ExperimentConfig) -> Result<Experiment, CliError> {
    resolve_with(config, false)
}

/// Like [`resolve`], but with `forced` set the step-admissibility gate is
/// downgraded to a warning (structural validity still has to hold).
pub fn resolve_with(config: &ExperimentConfig, forced: bool) -> Result<Experiment, CliError> {
    let (game, instance_graph) = build_game(&config.game)?;
    let graph = build_graph(&config.graph, game.num_agents(), instance_graph)?;
    let weights = WeightMatrix::row_stochastic(graph)?;
    let constants = game.constants()?;
    let steps = resolve_steps(&config.algorithm, &constants)?;
    let algo = AlgoConfig::new(config.algorithm.gamma, steps)
        .with_tol(config.algorithm.tol)
        .with_max_iters(config.algorithm.max_iters)
        .with_record_every(config.output.stride);
    let mut warnings: Vec<String> = match algo.validate(Some(&constants)) {
        Ok(ws) => ws.iter().map(|w| w.to_string()).collect(),
        Err(e) if forced => {
            let mut ws: Vec<String> = algo
                .validate(None)?
                .iter()
                .map(|w| w.to_string())
                .collect();
            ws.push(format!("running despite a failed admissibility check: {e}"));
            ws
        }
        Err(e) => return Err(e.into()),
    };
    let spec = game.spec();
    let init = match config.algorithm.init_seed {
        Some(seed) => EstimateMatrix::random_init(&spec, seed),
        None => EstimateMatrix::default_init(&spec),
    };
    let oracle = match game.oracle() {
        Ok(ne) => Some(ne),
        Err(e) => {
            warnings.push(format!("no equilibrium oracle: {e}"));
            None
        }
    };
    Ok(Experiment {
        game,
        spec,
        weights,
        constants,
        config: algo,
        init,
        oracle,
        warnings,
        out_dir: PathBuf::from(&config.output.dir),
    })
}
