//! Game definitions, regularity constants, and the checkers that gate the
//! iteration: box action sets, partial-gradient access, diagonal-dominance
//! slack, local step-size bounds, and sampled spectral diagnostics.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default sample count for the sampling-based constant estimator.
pub const DEFAULT_CONSTANT_SAMPLES: usize = 10_000;

/// Axis-aligned box `[lo, hi]` used as one agent's action set.
///
/// Projection onto a box is a componentwise clamp, which is exact in
/// floating point and nonexpansive in the Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ActionBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidInput(format!(
                "box bounds must be nonempty and of equal length (got {} and {})",
                lo.len(),
                hi.len()
            )));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !l.is_finite() || !h.is_finite() || l > h {
                return Err(Error::InvalidInput(format!(
                    "box bounds must be finite with lo <= hi (got [{l}, {h}])"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    /// One-dimensional interval `[lo, hi]`.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        v.len() == self.dim()
            && v.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (l, h))| *x >= *l && *x <= *h)
    }

    /// Componentwise clamp of `v` onto the box.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: v.len(),
            });
        }
        let mut out = v.to_vec();
        self.clamp_slice(&mut out);
        Ok(out)
    }

    /// In-place clamp; `v` must have the box dimension.
    pub(crate) fn clamp_slice(&self, v: &mut [f64]) {
        debug_assert_eq!(v.len(), self.dim());
        for (x, (l, h)) in v.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *x = x.clamp(*l, *h);
        }
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| if l == h { *l } else { rng.random_range(*l..*h) })
            .collect()
    }
}

/// Partial-gradient callback: `(agent index, joint point) -> own-block gradient`.
pub type PartialGradientFn = dyn Fn(usize, &[f64]) -> Result<Vec<f64>> + Send + Sync;
/// Jacobian callback over the joint space.
pub type JacobianFn = dyn Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync;

/// A game instance: per-agent box action sets plus callable partial gradients
/// (and an optional Jacobian for spectral diagnostics).
///
/// All methods are pure functions of their inputs; a `GameSpec` is immutable
/// after construction and safe to share across threads.
pub struct GameSpec {
    boxes: Vec<ActionBox>,
    offsets: Vec<usize>,
    gradient: Box<PartialGradientFn>,
    jacobian: Option<Box<JacobianFn>>,
}

impl fmt::Debug for GameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GameSpec")
            .field("num_agents", &self.num_agents())
            .field("dims", &self.dims())
            .field("has_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl GameSpec {
    pub fn new(boxes: Vec<ActionBox>, gradient: Box<PartialGradientFn>) -> Result<Self> {
        if boxes.is_empty() {
            return Err(Error::InvalidInput("a game needs at least one agent".into()));
        }
        let mut offsets = Vec::with_capacity(boxes.len() + 1);
        offsets.push(0);
        for b in &boxes {
            offsets.push(offsets.last().unwrap() + b.dim());
        }
        Ok(Self {
            boxes,
            offsets,
            gradient,
            jacobian: None,
        })
    }

    pub fn with_jacobian(mut self, jacobian: Box<JacobianFn>) -> Self {
        self.jacobian = Some(jacobian);
        self
    }

    pub fn num_agents(&self) -> usize {
        self.boxes.len()
    }

    /// Per-agent block dimensions.
    pub fn dims(&self) -> Vec<usize> {
        self.boxes.iter().map(ActionBox::dim).collect()
    }

    /// Total joint dimension `n`.
    pub fn joint_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Offset of agent `i`'s block inside a joint vector.
    pub fn block_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn action_box(&self, i: usize) -> &ActionBox {
        &self.boxes[i]
    }

    pub fn has_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    fn check_agent(&self, i: usize) -> Result<()> {
        if i >= self.num_agents() {
            return Err(Error::AgentIndex {
                index: i,
                count: self.num_agents(),
            });
        }
        Ok(())
    }

    /// Agent `i`'s own-block gradient of its cost at the joint point `y`.
    pub fn partial_gradient(&self, i: usize, y: &[f64]) -> Result<Vec<f64>> {
        self.check_agent(i)?;
        if y.len() != self.joint_dim() {
            return Err(Error::Dimension {
                expected: self.joint_dim(),
                actual: y.len(),
            });
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(
                "joint point contains non-finite entries".into(),
            ));
        }
        let g = (self.gradient)(i, y).map_err(|e| Error::Gradient {
            agent: i,
            reason: e.to_string(),
        })?;
        let expected = self.boxes[i].dim();
        if g.len() != expected {
            return Err(Error::Dimension {
                expected,
                actual: g.len(),
            });
        }
        Ok(g)
    }

    /// Euclidean projection of `v` onto agent `i`'s action set.
    pub fn project_action(&self, i: usize, v: &[f64]) -> Result<Vec<f64>> {
        self.check_agent(i)?;
        self.boxes[i].project(v)
    }

    /// Full Jacobian of the stacked partial gradients at `y`.
    pub fn jacobian(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        let jac = self.jacobian.as_ref().ok_or(Error::MissingJacobian)?;
        if y.len() != self.joint_dim() {
            return Err(Error::Dimension {
                expected: self.joint_dim(),
                actual: y.len(),
            });
        }
        let m = jac(y)?;
        if m.nrows() != self.joint_dim() || m.ncols() != self.joint_dim() {
            return Err(Error::Dimension {
                expected: self.joint_dim(),
                actual: m.nrows(),
            });
        }
        Ok(m)
    }

    /// Uniform sample from the joint box.
    pub fn sample_joint<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.joint_dim());
        for b in &self.boxes {
            y.extend(b.sample(rng));
        }
        y
    }

    /// Joint point with every agent at its box midpoint.
    pub fn joint_midpoint(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.joint_dim());
        for b in &self.boxes {
            y.extend(b.midpoint());
        }
        y
    }
}

/// Strong-convexity moduli and cross-Lipschitz constants of a game.
///
/// `mu[i]` is the strong-convexity modulus of agent `i`'s cost in its own
/// action; `ell[(i, j)]` is the Lipschitz constant of agent `i`'s partial
/// gradient with respect to agent `j`'s action (so `ell[(i, i)]` is the
/// self-Lipschitz constant).
#[derive(Debug, Clone, PartialEq)]
pub struct GameConstants {
    mu: Vec<f64>,
    ell: DMatrix<f64>,
}

impl GameConstants {
    pub fn new(mu: Vec<f64>, ell: DMatrix<f64>) -> Result<Self> {
        let n = mu.len();
        if n == 0 {
            return Err(Error::InvalidInput("constants need at least one agent".into()));
        }
        if ell.nrows() != n || ell.ncols() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: ell.nrows(),
            });
        }
        for (i, m) in mu.iter().enumerate() {
            if !m.is_finite() || *m <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "strong-convexity modulus of agent {i} must be positive and finite (got {m})"
                )));
            }
        }
        for i in 0..n {
            for j in 0..n {
                let v = ell[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "lipschitz constant ({i}, {j}) must be nonnegative and finite (got {v})"
                    )));
                }
            }
        }
        for i in 0..n {
            // A strong-convexity modulus can never exceed the own-block
            // Lipschitz constant; allow a tiny relative slop for estimators.
            if mu[i] > ell[(i, i)] * (1.0 + 1e-12) {
                return Err(Error::InvalidInput(format!(
                    "agent {i}: modulus {} exceeds self-Lipschitz constant {}",
                    mu[i],
                    ell[(i, i)]
                )));
            }
        }
        Ok(Self { mu, ell })
    }

    pub fn num_agents(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn ell(&self) -> &DMatrix<f64> {
        &self.ell
    }

    /// Sum of agent `i`'s cross-Lipschitz constants, excluding the own block.
    pub fn cross_sum(&self, i: usize) -> f64 {
        (0..self.num_agents())
            .filter(|j| *j != i)
            .map(|j| self.ell[(i, j)])
            .sum()
    }

    /// Largest row sum of the Lipschitz matrix (a global Lipschitz constant
    /// for the stacked gradient in the blockwise max norm).
    pub fn global_ell(&self) -> f64 {
        (0..self.num_agents())
            .map(|i| (0..self.num_agents()).map(|j| self.ell[(i, j)]).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Per-agent dominance slack `mu_i - sum_{j != i} ell_{i,j}`.
    pub fn dominance(&self) -> DominanceReport {
        let entries = (0..self.num_agents())
            .map(|i| {
                let slack = self.mu[i] - self.cross_sum(i);
                DominanceEntry {
                    agent: i,
                    slack,
                    holds: slack >= 0.0,
                }
            })
            .collect();
        DominanceReport { entries }
    }

    /// Strict per-agent step-size bounds `1 / ell_{i,i}`.
    ///
    /// Any positive step strictly below its bound is admissible; the bounds
    /// depend only on each agent's own constants, never on the graph.
    pub fn step_size_bounds(&self) -> Result<Vec<f64>> {
        (0..self.num_agents())
            .map(|i| {
                let l = self.ell[(i, i)];
                if l == 0.0 {
                    Err(Error::DegenerateGame { agent: i })
                } else {
                    Ok(1.0 / l)
                }
            })
            .collect()
    }
}

/// One agent's dominance verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominanceEntry {
    pub agent: usize,
    /// `mu_i - sum_{j != i} ell_{i,j}`; nonnegative when dominance holds.
    pub slack: f64,
    pub holds: bool,
}

/// Per-agent dominance report; the condition holds iff every slack is >= 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DominanceReport {
    entries: Vec<DominanceEntry>,
}

impl DominanceReport {
    pub fn entries(&self) -> &[DominanceEntry] {
        &self.entries
    }

    pub fn holds(&self) -> bool {
        self.entries.iter().all(|e| e.holds)
    }

    pub fn min_slack(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.slack)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Smallest eigenvalue of the symmetrized Jacobian over uniform box samples.
///
/// A negative return value certifies that the stacked gradient is not
/// monotone on the box. This is a diagnostic; nothing in the iteration
/// assumes monotonicity.
pub fn sampled_min_symmetric_eigenvalue(
    game: &GameSpec,
    sample_count: usize,
    seed: u64,
) -> Result<f64> {
    if !game.has_jacobian() {
        return Err(Error::MissingJacobian);
    }
    if sample_count == 0 {
        return Err(Error::InvalidInput("sample count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min = f64::INFINITY;
    for _ in 0..sample_count {
        let y = game.sample_joint(&mut rng);
        let jac = game.jacobian(&y)?;
        let sym = 0.5 * (&jac + jac.transpose());
        let eigs = SymmetricEigen::new(sym).eigenvalues;
        min = min.min(eigs.min());
    }
    Ok(min)
}

/// Sampling fallback for [`GameConstants`]: per-block spectral norms of the
/// Jacobian maximized over uniform box samples (and the own-block symmetric
/// minimum for the moduli).
///
/// Prefer analytic or interval constants when a game provides them; sampled
/// values are certified only at the drawn points.
pub fn estimate_constants_sampled(
    game: &GameSpec,
    sample_count: usize,
    seed: u64,
) -> Result<GameConstants> {
    if !game.has_jacobian() {
        return Err(Error::MissingJacobian);
    }
    if sample_count == 0 {
        return Err(Error::InvalidInput("sample count must be positive".into()));
    }
    let n_agents = game.num_agents();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ell = DMatrix::zeros(n_agents, n_agents);
    let mut mu = vec![f64::INFINITY; n_agents];
    for _ in 0..sample_count {
        let y = game.sample_joint(&mut rng);
        let jac = game.jacobian(&y)?;
        for i in 0..n_agents {
            let ri = game.block_range(i);
            for j in 0..n_agents {
                let rj = game.block_range(j);
                let block = jac.view((ri.start, rj.start), (ri.len(), rj.len()));
                let spectral = block.clone_owned().singular_values().max();
                if spectral > ell[(i, j)] {
                    ell[(i, j)] = spectral;
                }
            }
            let own = jac.view((ri.start, ri.start), (ri.len(), ri.len())).clone_owned();
            let sym = 0.5 * (&own + own.transpose());
            let lambda_min = SymmetricEigen::new(sym).eigenvalues.min();
            if lambda_min < mu[i] {
                mu[i] = lambda_min;
            }
        }
    }
    GameConstants::new(mu, ell)
}
