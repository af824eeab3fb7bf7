//! The averaged projected-gradient fixed-point iteration over stacked
//! estimates, together with the blockwise mixed norm, per-iteration metrics,
//! and termination handling.
//!
//! One sweep of the iteration maps the estimate stack `x` to
//! `gamma * x + (1 - gamma) * A(x)`, where `A` mixes every agent's estimate
//! row with its in-neighbors' rows, takes a projected gradient step on the
//! own-action block, and leaves the remaining blocks at their mixed values.
//! The averaging parameter weights the current iterate: `gamma = 0` applies
//! the full mapped update, values near one slow the update down, and
//! `gamma = 1` would freeze the iteration and is rejected.

use std::fmt;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::{GameConstants, GameSpec};
use crate::network::WeightMatrix;

/// Stack of agent estimates: row `i` is agent `i`'s estimate of the full
/// joint action, and block `(i, i)` is agent `i`'s own action.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateMatrix {
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl EstimateMatrix {
    fn offsets_from_dims(dims: &[usize]) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(dims.len() + 1);
        offsets.push(0);
        for d in dims {
            offsets.push(offsets.last().unwrap() + d);
        }
        offsets
    }

    /// All-zero stack for the given per-agent dimensions.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidInput(
                "estimate stack needs positive per-agent dimensions".into(),
            ));
        }
        let offsets = Self::offsets_from_dims(dims);
        let n = *offsets.last().unwrap();
        Ok(Self {
            data: vec![0.0; dims.len() * n],
            offsets,
        })
    }

    /// Stack with every row equal to the joint point `x`.
    pub fn consensus(dims: &[usize], x: &[f64]) -> Result<Self> {
        let mut m = Self::zeros(dims)?;
        if x.len() != m.joint_dim() {
            return Err(Error::Dimension {
                expected: m.joint_dim(),
                actual: x.len(),
            });
        }
        for i in 0..m.num_agents() {
            m.row_mut(i).copy_from_slice(x);
        }
        Ok(m)
    }

    /// Stack from explicit rows (each of joint dimension).
    pub fn from_rows(dims: &[usize], rows: &[Vec<f64>]) -> Result<Self> {
        let mut m = Self::zeros(dims)?;
        if rows.len() != m.num_agents() {
            return Err(Error::Dimension {
                expected: m.num_agents(),
                actual: rows.len(),
            });
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != m.joint_dim() {
                return Err(Error::Dimension {
                    expected: m.joint_dim(),
                    actual: r.len(),
                });
            }
            m.row_mut(i).copy_from_slice(r);
        }
        Ok(m)
    }

    /// Deterministic default start: own actions at box midpoints, every
    /// other estimate block at zero.
    pub fn default_init(game: &GameSpec) -> Self {
        let dims = game.dims();
        let mut m = Self::zeros(&dims).expect("game dimensions are valid");
        for i in 0..game.num_agents() {
            let mid = game.action_box(i).midpoint();
            m.block_mut(i, i).copy_from_slice(&mid);
        }
        m
    }

    /// Seeded random start: block `(i, j)` is drawn uniformly from agent
    /// `j`'s action box, so own actions are always feasible.
    pub fn random_init(game: &GameSpec, seed: u64) -> Self {
        let dims = game.dims();
        let mut m = Self::zeros(&dims).expect("game dimensions are valid");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..game.num_agents() {
            for j in 0..game.num_agents() {
                let v = game.action_box(j).sample(&mut rng);
                m.block_mut(i, j).copy_from_slice(&v);
            }
        }
        m
    }

    pub fn num_agents(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn joint_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.joint_dim();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.joint_dim();
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn block(&self, i: usize, j: usize) -> &[f64] {
        let n = self.joint_dim();
        &self.data[i * n + self.offsets[j]..i * n + self.offsets[j + 1]]
    }

    pub fn block_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let n = self.joint_dim();
        let (s, e) = (self.offsets[j], self.offsets[j + 1]);
        &mut self.data[i * n + s..i * n + e]
    }

    /// Concatenated diagonal blocks: the joint action the stack encodes.
    pub fn actions(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.joint_dim());
        for i in 0..self.num_agents() {
            x.extend_from_slice(self.block(i, i));
        }
        x
    }

    /// Blockwise mixed norm: the largest Euclidean norm over all blocks.
    pub fn mixed_norm(&self) -> f64 {
        let mut max = 0.0f64;
        for i in 0..self.num_agents() {
            for j in 0..self.num_agents() {
                let norm = self.block(i, j).iter().map(|v| v * v).sum::<f64>().sqrt();
                max = max.max(norm);
            }
        }
        max
    }

    /// Mixed norm of `self - other`. Panics if the shapes differ.
    pub fn mixed_norm_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.offsets, other.offsets, "estimate shapes must match");
        let mut max = 0.0f64;
        for i in 0..self.num_agents() {
            for j in 0..self.num_agents() {
                let norm = self
                    .block(i, j)
                    .iter()
                    .zip(other.block(i, j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                max = max.max(norm);
            }
        }
        max
    }

    /// Euclidean norm of `self - other` over the full stack.
    pub fn euclidean_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.offsets, other.offsets, "estimate shapes must match");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest pairwise Euclidean distance between estimate rows.
    pub fn consensus_residual(&self) -> f64 {
        let n_agents = self.num_agents();
        let mut max = 0.0f64;
        for i in 0..n_agents {
            for j in (i + 1)..n_agents {
                let d = self
                    .row(i)
                    .iter()
                    .zip(self.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                max = max.max(d);
            }
        }
        max
    }

    /// Euclidean distance between the stack's joint action and `target`.
    pub fn action_distance(&self, target: &[f64]) -> f64 {
        let x = self.actions();
        assert_eq!(x.len(), target.len(), "target dimension must match");
        x.iter()
            .zip(target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

fn check_shapes(game: &GameSpec, w: &WeightMatrix, steps: &[f64], x: &EstimateMatrix) -> Result<()> {
    let n_agents = game.num_agents();
    if w.num_nodes() != n_agents {
        return Err(Error::Dimension {
            expected: n_agents,
            actual: w.num_nodes(),
        });
    }
    if steps.len() != n_agents {
        return Err(Error::Dimension {
            expected: n_agents,
            actual: steps.len(),
        });
    }
    if steps.iter().any(|a| !a.is_finite() || *a <= 0.0) {
        return Err(Error::InvalidInput("step sizes must be positive and finite".into()));
    }
    if x.num_agents() != n_agents || x.dims() != game.dims() {
        return Err(Error::Dimension {
            expected: n_agents,
            actual: x.num_agents(),
        });
    }
    Ok(())
}

fn mix_into(w: &WeightMatrix, x: &EstimateMatrix, out: &mut EstimateMatrix) {
    let n_agents = x.num_agents();
    let n = x.joint_dim();
    let m = w.matrix();
    for i in 0..n_agents {
        let row_out = out.row_mut(i);
        row_out.fill(0.0);
        for j in 0..n_agents {
            let wij = m[(i, j)];
            if wij == 0.0 {
                continue;
            }
            let row_j = &x.data[j * n..(j + 1) * n];
            for (o, v) in row_out.iter_mut().zip(row_j) {
                *o += wij * v;
            }
        }
    }
}

/// Gradient step and projection on the own-action block of row `i`, in place.
/// The gradient is evaluated at the full (already mixed) row.
fn descend_project_row(game: &GameSpec, steps: &[f64], x: &mut EstimateMatrix, i: usize) -> Result<()> {
    let g = game.partial_gradient(i, x.row(i))?;
    let alpha = steps[i];
    let block = x.block_mut(i, i);
    for (b, gv) in block.iter_mut().zip(&g) {
        *b -= alpha * gv;
    }
    game.action_box(i).clamp_slice(block);
    Ok(())
}

fn operator_into(
    game: &GameSpec,
    w: &WeightMatrix,
    steps: &[f64],
    x: &EstimateMatrix,
    out: &mut EstimateMatrix,
) -> Result<()> {
    mix_into(w, x, out);
    for i in 0..game.num_agents() {
        descend_project_row(game, steps, out, i)?;
    }
    Ok(())
}

/// One round of blockwise mixing: row `i` of the result is the
/// `w`-weighted combination of the input rows.
pub fn mix(w: &WeightMatrix, x: &EstimateMatrix) -> Result<EstimateMatrix> {
    if w.num_nodes() != x.num_agents() {
        return Err(Error::Dimension {
            expected: x.num_agents(),
            actual: w.num_nodes(),
        });
    }
    let mut out = x.clone();
    mix_into(w, x, &mut out);
    Ok(out)
}

/// Gradient descent on every own-action block (no projection, no mixing).
pub fn gradient_step(game: &GameSpec, steps: &[f64], x: &EstimateMatrix) -> Result<EstimateMatrix> {
    if x.dims() != game.dims() || steps.len() != game.num_agents() {
        return Err(Error::Dimension {
            expected: game.num_agents(),
            actual: steps.len().min(x.num_agents()),
        });
    }
    let mut out = x.clone();
    for (i, alpha) in steps.iter().enumerate() {
        let g = game.partial_gradient(i, x.row(i))?;
        for (b, gv) in out.block_mut(i, i).iter_mut().zip(&g) {
            *b -= alpha * gv;
        }
    }
    Ok(out)
}

/// Clamp every own-action block onto its action box.
pub fn project_actions(game: &GameSpec, x: &EstimateMatrix) -> Result<EstimateMatrix> {
    if x.dims() != game.dims() {
        return Err(Error::Dimension {
            expected: game.joint_dim(),
            actual: x.joint_dim(),
        });
    }
    let mut out = x.clone();
    for i in 0..game.num_agents() {
        game.action_box(i).clamp_slice(out.block_mut(i, i));
    }
    Ok(out)
}

/// The full iteration operator: mixing, then the projected gradient step on
/// every own-action block, with all other blocks kept at their mixed values.
pub fn apply_operator(
    game: &GameSpec,
    w: &WeightMatrix,
    steps: &[f64],
    x: &EstimateMatrix,
) -> Result<EstimateMatrix> {
    check_shapes(game, w, steps, x)?;
    let mut out = x.clone();
    operator_into(game, w, steps, x, &mut out)?;
    Ok(out)
}

/// Convex averaging of the current stack with the mapped stack:
/// `gamma * x + (1 - gamma) * mapped`.
pub fn km_step(x: &EstimateMatrix, gamma: f64, mapped: &EstimateMatrix) -> EstimateMatrix {
    let mut out = x.clone();
    km_into(x, gamma, mapped, &mut out);
    out
}

fn km_into(x: &EstimateMatrix, gamma: f64, mapped: &EstimateMatrix, out: &mut EstimateMatrix) {
    assert_eq!(x.offsets, mapped.offsets, "estimate shapes must match");
    for ((o, a), b) in out.data.iter_mut().zip(&x.data).zip(&mapped.data) {
        *o = gamma * a + (1.0 - gamma) * b;
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    /// The full-stack update norm dropped below the tolerance.
    Tolerance,
    /// The iteration cap was reached first.
    MaxIterations,
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Tolerance => write!(f, "tolerance"),
            Self::MaxIterations => write!(f, "max-iterations"),
        }
    }
}

/// Iteration parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgoConfig {
    /// Averaging parameter in `[0, 1)`; weight kept on the current iterate.
    pub gamma: f64,
    /// Per-agent step sizes.
    pub steps: Vec<f64>,
    /// Termination threshold on the Euclidean norm of the full stacked
    /// update.
    pub tol: f64,
    pub max_iters: u64,
    /// Metric sampling stride.
    pub record_every: u64,
}

impl AlgoConfig {
    pub const DEFAULT_TOL: f64 = 1e-7;
    pub const DEFAULT_MAX_ITERS: u64 = 10_000_000;
    pub const DEFAULT_RECORD_EVERY: u64 = 10;

    pub fn new(gamma: f64, steps: Vec<f64>) -> Self {
        Self {
            gamma,
            steps,
            tol: Self::DEFAULT_TOL,
            max_iters: Self::DEFAULT_MAX_ITERS,
            record_every: Self::DEFAULT_RECORD_EVERY,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: u64) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_record_every(mut self, record_every: u64) -> Self {
        self.record_every = record_every;
        self
    }

    /// Validates the configuration; hard violations error out, soft ones
    /// are returned as warnings. Step admissibility is only verified when
    /// constants are supplied.
    pub fn validate(&self, constants: Option<&GameConstants>) -> Result<Vec<ConfigWarning>> {
        if !self.gamma.is_finite() || self.gamma < 0.0 || self.gamma >= 1.0 {
            let detail = if self.gamma == 1.0 {
                " (an averaging parameter of one keeps every iterate unchanged)"
            } else {
                ""
            };
            return Err(Error::InvalidConfig(format!(
                "averaging parameter must lie in [0, 1), got {}{detail}",
                self.gamma
            )));
        }
        if self.steps.is_empty() || self.steps.iter().any(|a| !a.is_finite() || *a <= 0.0) {
            return Err(Error::InvalidConfig(
                "step sizes must be a nonempty list of positive finite values".into(),
            ));
        }
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iters == 0 || self.record_every == 0 {
            return Err(Error::InvalidConfig(
                "iteration cap and record stride must be positive".into(),
            ));
        }
        let mut warnings = Vec::new();
        if self.gamma == 0.0 {
            warnings.push(ConfigWarning::GammaZero);
        }
        match constants {
            Some(c) => {
                if c.num_agents() != self.steps.len() {
                    return Err(Error::InvalidConfig(format!(
                        "constants cover {} agents but {} steps were given",
                        c.num_agents(),
                        self.steps.len()
                    )));
                }
                let bounds = c.step_size_bounds()?;
                for (i, (a, b)) in self.steps.iter().zip(&bounds).enumerate() {
                    if a >= b {
                        return Err(Error::InvalidConfig(format!(
                            "step size {a} of agent {i} is not strictly below its bound {b}"
                        )));
                    }
                }
            }
            None => warnings.push(ConfigWarning::StepsUnverified),
        }
        Ok(warnings)
    }
}

/// Soft validation findings for a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigWarning {
    /// No averaging: the convergence guarantee assumes a positive parameter,
    /// but zero is accepted to reproduce plain fixed-step baselines.
    GammaZero,
    /// No constants were supplied, so step admissibility was not checked.
    StepsUnverified,
}

impl fmt::Display for ConfigWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::GammaZero => write!(
                f,
                "averaging parameter is zero; the convergence guarantee assumes a positive value"
            ),
            Self::StepsUnverified => {
                write!(f, "no constants supplied; step admissibility not verified")
            }
        }
    }
}

/// State metrics at a single point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Euclidean distance of the joint action to the reference equilibrium,
    /// absent when no oracle is available.
    pub action_error: Option<f64>,
    /// Largest pairwise distance between estimate rows.
    pub consensus_residual: f64,
    /// Mixed norm of `x - A(x)`.
    pub fixed_point_residual: f64,
}

/// One recorded trajectory row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsSample {
    pub iteration: u64,
    pub action_error: Option<f64>,
    pub consensus_residual: f64,
    pub fixed_point_residual: f64,
    /// Euclidean norm of the update that produced this iterate; absent at
    /// iteration zero.
    pub step_delta: Option<f64>,
}

/// Result of a run: terminal state plus the sampled metric series.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub iterations: u64,
    pub terminal: EstimateMatrix,
    pub samples: Vec<MetricsSample>,
    pub reason: TerminationReason,
}

impl Trajectory {
    /// CSV with header `iter,action_error,consensus_residual,
    /// fixed_point_residual,step_delta`; absent values are empty cells and
    /// floats are written round-trip safe.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("iter,action_error,consensus_residual,fixed_point_residual,step_delta\n");
        for s in &self.samples {
            let _ = write!(out, "{},", s.iteration);
            if let Some(e) = s.action_error {
                let _ = write!(out, "{e}");
            }
            let _ = write!(out, ",{},{},", s.consensus_residual, s.fixed_point_residual);
            if let Some(d) = s.step_delta {
                let _ = write!(out, "{d}");
            }
            out.push('\n');
        }
        out
    }

    pub fn terminal_sample(&self) -> &MetricsSample {
        self.samples.last().expect("a run records its terminal state")
    }
}

fn sample_from_state(
    iteration: u64,
    x: &EstimateMatrix,
    mapped: &EstimateMatrix,
    step_delta: Option<f64>,
    oracle: Option<&[f64]>,
) -> MetricsSample {
    MetricsSample {
        iteration,
        action_error: oracle.map(|t| x.action_distance(t)),
        consensus_residual: x.consensus_residual(),
        fixed_point_residual: x.mixed_norm_diff(mapped),
        step_delta,
    }
}

/// Metrics of a single stack: action error against an optional reference
/// equilibrium, consensus residual, and the fixed-point residual under the
/// iteration operator.
pub fn metrics(
    x: &EstimateMatrix,
    game: &GameSpec,
    w: &WeightMatrix,
    steps: &[f64],
    oracle: Option<&[f64]>,
) -> Result<Metrics> {
    let mapped = apply_operator(game, w, steps, x)?;
    let s = sample_from_state(0, x, &mapped, None, oracle);
    Ok(Metrics {
        action_error: s.action_error,
        consensus_residual: s.consensus_residual,
        fixed_point_residual: s.fixed_point_residual,
    })
}

/// Runs the averaged iteration from `init` until the full-stack update norm
/// drops below `config.tol` or `config.max_iters` is reached.
///
/// Own-action blocks of `init` must be feasible; the remaining blocks are
/// arbitrary. Metrics are recorded at iteration zero, every
/// `config.record_every` iterations, and at termination. The run is
/// deterministic in its inputs.
pub fn run(
    game: &GameSpec,
    w: &WeightMatrix,
    config: &AlgoConfig,
    init: EstimateMatrix,
    oracle: Option<&[f64]>,
) -> Result<Trajectory> {
    config.validate(None)?;
    check_shapes(game, w, &config.steps, &init)?;
    if let Some(t) = oracle {
        if t.len() != game.joint_dim() {
            return Err(Error::Dimension {
                expected: game.joint_dim(),
                actual: t.len(),
            });
        }
    }
    if !init.is_finite() {
        return Err(Error::InvalidInput("initial stack contains non-finite values".into()));
    }
    for i in 0..game.num_agents() {
        if !game.action_box(i).contains(init.block(i, i)) {
            return Err(Error::InvalidInput(format!(
                "initial action of agent {i} lies outside its action set"
            )));
        }
    }

    let mut x = init;
    let mut mapped = x.clone();
    let mut next = x.clone();
    let mut samples = Vec::new();
    let mut prev_delta: Option<f64> = None;
    let mut k: u64 = 0;

    let reason = loop {
        operator_into(game, w, &config.steps, &x, &mut mapped)?;
        if k.is_multiple_of(config.record_every) {
            samples.push(sample_from_state(k, &x, &mapped, prev_delta, oracle));
        }
        km_into(&x, config.gamma, &mapped, &mut next);
        let delta = next.euclidean_diff(&x);
        if !delta.is_finite() {
            let last = samples
                .last()
                .map(|s| {
                    format!(
                        "last recorded metrics at iteration {}: consensus_residual={}, fixed_point_residual={}{}",
                        s.iteration,
                        s.consensus_residual,
                        s.fixed_point_residual,
                        s.action_error
                            .map(|e| format!(", action_error={e}"))
                            .unwrap_or_default()
                    )
                })
                .unwrap_or_else(|| "no metrics recorded".into());
            return Err(Error::Divergence {
                iteration: k + 1,
                last,
            });
        }
        std::mem::swap(&mut x, &mut next);
        prev_delta = Some(delta);
        k += 1;
        if delta < config.tol {
            break TerminationReason::Tolerance;
        }
        if k >= config.max_iters {
            break TerminationReason::MaxIterations;
        }
    };

    // Terminal row: one extra operator application for the residual.
    operator_into(game, w, &config.steps, &x, &mut mapped)?;
    samples.push(sample_from_state(k, &x, &mapped, prev_delta, oracle));

    Ok(Trajectory {
        iterations: k,
        terminal: x,
        samples,
        reason,
    })
}
