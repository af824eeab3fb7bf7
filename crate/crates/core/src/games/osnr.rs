//! Optical power-control game: each channel picks a transmit power in a
//! shared interval, trading a linear price against a signal-to-noise
//! utility coupled through the link's system matrix.
//!
//! The game ships an analytic gradient and Jacobian, a strict
//! diagonal-dominance condition on the effective system matrix, interval
//! bounds for the regularity constants, and a closed-form equilibrium
//! oracle for inner solutions.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::{ActionBox, GameConstants, GameSpec};
use crate::network::DiGraph;

/// Retry budget for random instance generation.
const GENERATION_ATTEMPTS: usize = 64;

/// Power-control game over `n` channels.
///
/// Channel `i` minimizes
/// `eta_i x_i - beta_i (ln(1 + a_i r_i / (1 - phi_ii r_i)) - x_i)` where
/// `r_i = x_i / (n0 + sum_j phi_ij x_j)` is its signal-to-noise ratio.
/// The effective system matrix has `a_i` on the diagonal and the `phi`
/// off-diagonals elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct OsnrGame {
    eta: Vec<f64>,
    beta: Vec<f64>,
    a: Vec<f64>,
    phi: DMatrix<f64>,
    n0: f64,
    x_min: f64,
    x_max: f64,
}

/// One channel's verdict for the strict dominance condition
/// `a_i > sum_{j != i} phi_ij`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionEntry {
    pub agent: usize,
    pub margin: f64,
    pub holds: bool,
}

/// Per-channel report of the system-matrix dominance condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    entries: Vec<ConditionEntry>,
}

impl ConditionReport {
    pub fn entries(&self) -> &[ConditionEntry] {
        &self.entries
    }

    pub fn holds(&self) -> bool {
        self.entries.iter().all(|e| e.holds)
    }

    pub fn min_margin(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.margin)
            .fold(f64::INFINITY, f64::min)
    }
}

impl OsnrGame {
    pub fn new(
        eta: Vec<f64>,
        beta: Vec<f64>,
        a: Vec<f64>,
        phi: DMatrix<f64>,
        n0: f64,
        x_min: f64,
        x_max: f64,
    ) -> Result<Self> {
        let n = eta.len();
        if n == 0 || beta.len() != n || a.len() != n || phi.nrows() != n || phi.ncols() != n {
            return Err(Error::InvalidInput(
                "channel parameter lengths must agree and be nonempty".into(),
            ));
        }
        for v in eta.iter().chain(&beta).chain(&a) {
            if !v.is_finite() || *v <= 0.0 {
                return Err(Error::InvalidInput(
                    "channel parameters must be positive and finite".into(),
                ));
            }
        }
        for i in 0..n {
            for j in 0..n {
                let v = phi[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "system matrix entry ({i}, {j}) must be nonnegative and finite"
                    )));
                }
            }
        }
        if !n0.is_finite() || n0 < 0.0 {
            return Err(Error::InvalidInput("input noise must be nonnegative".into()));
        }
        if !x_min.is_finite() || !x_max.is_finite() || x_min < 0.0 || x_min >= x_max {
            return Err(Error::InvalidInput(format!(
                "power interval must satisfy 0 <= x_min < x_max (got [{x_min}, {x_max}])"
            )));
        }
        let game = Self {
            eta,
            beta,
            a,
            phi,
            n0,
            x_min,
            x_max,
        };
        for i in 0..n {
            // The gradient denominator is increasing in every power, so
            // positivity at the lower box corner covers the whole box.
            if game.denominator(i, &vec![x_min; n]) <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "gradient denominator of channel {i} is not positive on the power interval"
                )));
            }
        }
        Ok(game)
    }

    /// The bundled six-channel reference instance.
    pub fn six_player() -> Self {
        #[rustfmt::skip]
        let phi = DMatrix::from_row_slice(6, 6, &[
            7.463e-5, 7.378e-5, 7.293e-5, 7.210e-5, 7.127e-5, 6.965e-5,
            7.451e-5, 7.365e-5, 7.281e-5, 7.198e-5, 7.115e-5, 6.953e-5,
            7.438e-5, 7.353e-5, 7.269e-5, 7.186e-5, 7.103e-5, 6.942e-5,
            7.427e-5, 7.342e-5, 7.258e-5, 7.175e-5, 7.093e-5, 6.931e-5,
            7.409e-5, 7.324e-5, 7.240e-5, 7.157e-5, 7.075e-5, 6.914e-5,
            7.387e-5, 7.303e-5, 7.219e-5, 7.136e-5, 7.055e-5, 6.894e-5,
        ]);
        Self::new(
            vec![1.0; 6],
            vec![0.5, 0.51, 0.52, 0.3, 0.31, 0.32],
            vec![0.261, 0.494, 0.107, 0.366, 0.208, 0.305],
            phi,
            4.3e-7,
            0.2,
            2.0,
        )
        .expect("reference parameters are valid")
    }

    pub fn num_channels(&self) -> usize {
        self.eta.len()
    }

    pub fn power_interval(&self) -> (f64, f64) {
        (self.x_min, self.x_max)
    }

    pub fn system_matrix(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn noise(&self) -> f64 {
        self.n0
    }

    /// Effective system matrix: `a_i` on the diagonal, `phi` elsewhere.
    pub fn effective_system_matrix(&self) -> DMatrix<f64> {
        let n = self.num_channels();
        DMatrix::from_fn(n, n, |i, j| if i == j { self.a[i] } else { self.phi[(i, j)] })
    }

    fn phi_tilde_entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.a[i]
        } else {
            self.phi[(i, j)]
        }
    }

    /// `n0 + sum_j phi~_ij x_j`, the gradient denominator of channel `i`.
    fn denominator(&self, i: usize, x: &[f64]) -> f64 {
        self.n0
            + x.iter()
                .enumerate()
                .map(|(j, xj)| self.phi_tilde_entry(i, j) * xj)
                .sum::<f64>()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.num_channels() {
            return Err(Error::Dimension {
                expected: self.num_channels(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Channel `i`'s cost at the joint power vector `x`, evaluated exactly
    /// as the model states it (used by finite-difference checks and
    /// diagnostics; the iteration itself only touches gradients).
    pub fn cost(&self, i: usize, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let total = self.n0
            + x.iter()
                .enumerate()
                .map(|(j, xj)| self.phi[(i, j)] * xj)
                .sum::<f64>();
        if total <= 0.0 {
            return Err(Error::Domain(format!(
                "signal-to-noise denominator of channel {i} is not positive"
            )));
        }
        let ratio = x[i] / total;
        let rest = 1.0 - self.phi[(i, i)] * ratio;
        if rest <= 0.0 {
            return Err(Error::Domain(format!(
                "utility of channel {i} is undefined at this point"
            )));
        }
        let arg = 1.0 + self.a[i] * ratio / rest;
        if arg <= 0.0 {
            return Err(Error::Domain(format!(
                "log argument of channel {i} is not positive"
            )));
        }
        Ok(self.eta[i] * x[i] - self.beta[i] * (arg.ln() - x[i]))
    }

    /// Own-power derivative of channel `i`'s cost:
    /// `eta_i + beta_i - a_i beta_i / (n0 + sum_j phi~_ij x_j)`.
    pub fn partial_gradient(&self, i: usize, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let d = self.denominator(i, x);
        if d <= 0.0 {
            return Err(Error::Domain(format!(
                "gradient denominator of channel {i} is not positive"
            )));
        }
        Ok(self.eta[i] + self.beta[i] - self.a[i] * self.beta[i] / d)
    }

    /// Stacked gradient at `x`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        (0..self.num_channels())
            .map(|i| self.partial_gradient(i, x))
            .collect()
    }

    /// Jacobian of the stacked gradient:
    /// `theta_ij = a_i beta_i phi~_ij / (n0 + sum_j phi~_ij x_j)^2`.
    /// Every entry is positive and decreasing in each power.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let n = self.num_channels();
        let mut theta = DMatrix::zeros(n, n);
        for i in 0..n {
            let d = self.denominator(i, x);
            if d <= 0.0 {
                return Err(Error::Domain(format!(
                    "gradient denominator of channel {i} is not positive"
                )));
            }
            let scale = self.a[i] * self.beta[i] / (d * d);
            for j in 0..n {
                theta[(i, j)] = scale * self.phi_tilde_entry(i, j);
            }
        }
        Ok(theta)
    }

    /// Strict dominance condition on the effective system matrix, with
    /// per-channel margins `a_i - sum_{j != i} phi_ij`.
    pub fn condition_report(&self) -> ConditionReport {
        let n = self.num_channels();
        let entries = (0..n)
            .map(|i| {
                let cross: f64 = (0..n)
                    .filter(|j| *j != i)
                    .map(|j| self.phi[(i, j)])
                    .sum();
                let margin = self.a[i] - cross;
                ConditionEntry {
                    agent: i,
                    margin,
                    holds: margin > 0.0,
                }
            })
            .collect();
        ConditionReport { entries }
    }

    /// Interval bounds for the regularity constants: Jacobian entries are
    /// decreasing in every power, so the cross constants are the entries at
    /// the lower box corner and the moduli are the diagonal entries at the
    /// upper corner.
    pub fn constants(&self) -> Result<GameConstants> {
        let n = self.num_channels();
        let ell = self.jacobian(&vec![self.x_min; n])?;
        let upper = self.jacobian(&vec![self.x_max; n])?;
        let mu = (0..n).map(|i| upper[(i, i)]).collect();
        GameConstants::new(mu, ell)
    }

    /// Closed-form inner equilibrium: the solution of
    /// `phi~ x = col(a_i beta_i / (eta_i + beta_i) - n0)`, valid whenever it
    /// stays inside the power interval.
    pub fn closed_form_ne(&self) -> Result<Vec<f64>> {
        let n = self.num_channels();
        let c = DVector::from_fn(n, |i, _| {
            self.a[i] * self.beta[i] / (self.eta[i] + self.beta[i]) - self.n0
        });
        let solution = self
            .effective_system_matrix()
            .lu()
            .solve(&c)
            .ok_or_else(|| Error::OracleUnavailable("effective system matrix is singular".into()))?;
        let x: Vec<f64> = solution.iter().copied().collect();
        for (i, v) in x.iter().enumerate() {
            if *v < self.x_min || *v > self.x_max {
                return Err(Error::OracleUnavailable(format!(
                    "inner solution leaves the power interval: x[{i}] = {v} not in [{}, {}]",
                    self.x_min, self.x_max
                )));
            }
        }
        Ok(x)
    }

    /// True iff `x` lies strictly inside the power interval.
    pub fn is_interior(&self, x: &[f64]) -> bool {
        x.iter().all(|v| *v > self.x_min && *v < self.x_max)
    }

    /// Generic game view with the analytic gradient and Jacobian attached.
    pub fn spec(&self) -> GameSpec {
        let n = self.num_channels();
        let boxes = (0..n)
            .map(|_| ActionBox::interval(self.x_min, self.x_max).expect("validated interval"))
            .collect();
        let shared = Arc::new(self.clone());
        let grad_game = Arc::clone(&shared);
        let jac_game = Arc::clone(&shared);
        GameSpec::new(
            boxes,
            Box::new(move |i, y: &[f64]| grad_game.partial_gradient(i, y).map(|g| vec![g])),
        )
        .expect("validated boxes")
        .with_jacobian(Box::new(move |y: &[f64]| jac_game.jacobian(y)))
    }

    /// Seeded random instance in the reference parameter regime, paired
    /// with a cycle-plus-random communication graph. Instances are redrawn
    /// until the dominance condition holds and the closed-form equilibrium
    /// is strictly interior.
    pub fn random(num_channels: usize, seed: u64) -> Result<(Self, DiGraph)> {
        if num_channels < 2 {
            return Err(Error::InvalidInput(
                "random instances need at least two channels".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..GENERATION_ATTEMPTS {
            let phi =
                DMatrix::from_fn(num_channels, num_channels, |_, _| rng.random_range(6.8e-5..7.5e-5));
            let a: Vec<f64> = (0..num_channels).map(|_| rng.random_range(0.1..0.5)).collect();
            let beta: Vec<f64> = (0..num_channels).map(|_| rng.random_range(0.3..0.52)).collect();
            let game = Self::new(
                vec![1.0; num_channels],
                beta,
                a,
                phi,
                0.43e-6,
                0.2,
                2.0,
            )?;
            if !game.condition_report().holds() {
                continue;
            }
            match game.closed_form_ne() {
                Ok(ne) if game.is_interior(&ne) => {
                    let graph = DiGraph::cycle_plus_random(num_channels, 0.3, seed)?;
                    return Ok((game, graph));
                }
                _ => continue,
            }
        }
        Err(Error::Generation {
            attempts: GENERATION_ATTEMPTS,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_game(n0: f64, x_min: f64, x_max: f64) -> OsnrGame {
        OsnrGame::new(
            vec![1.0],
            vec![1.0],
            vec![1.0],
            DMatrix::from_row_slice(1, 1, &[1.0]),
            n0,
            x_min,
            x_max,
        )
        .unwrap()
    }

    #[test]
    fn gradient_plugin_example() {
        let g = unit_game(0.0, 0.2, 2.0);
        // eta + beta - a*beta/(n0 + a*x) at x = 1.
        assert!((g.partial_gradient(0, &[1.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn jacobian_plugin_example() {
        let g = unit_game(0.0, 0.2, 2.0);
        let theta = g.jacobian(&[1.0]).unwrap();
        assert!((theta[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn interval_constants_plugin_example() {
        let g = unit_game(1.0, 0.0, 1.0);
        let c = g.constants().unwrap();
        assert!((c.ell()[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((c.mu()[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn six_player_condition_holds_for_every_channel() {
        let report = OsnrGame::six_player().condition_report();
        assert!(report.holds());
        assert!(report.min_margin() > 0.0);
    }

    #[test]
    fn condition_fails_at_the_boundary() {
        let base = OsnrGame::six_player();
        let n = base.num_channels();
        let cross: f64 = (1..n).map(|j| base.system_matrix()[(0, j)]).sum();
        let mut a = vec![0.3; n];
        a[0] = cross; // boundary: strict inequality fails
        let g = OsnrGame::new(
            vec![1.0; n],
            vec![0.4; n],
            a,
            base.system_matrix().clone(),
            base.noise(),
            0.2,
            2.0,
        )
        .unwrap();
        assert!(!g.condition_report().entries()[0].holds);
    }

    #[test]
    fn six_player_equilibrium_matches_reference_values() {
        let g = OsnrGame::six_player();
        let ne = g.closed_form_ne().unwrap();
        let expected = [0.3329, 0.3375, 0.3412, 0.2305, 0.2361, 0.2421];
        for (v, e) in ne.iter().zip(&expected) {
            assert!((v - e).abs() < 5e-4, "got {v}, expected {e}");
        }
        assert!(g.is_interior(&ne));
        // Inner equilibrium: the stacked gradient vanishes there.
        let residual = g
            .gradient(&ne)
            .unwrap()
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        assert!(residual < 1e-9, "residual {residual}");
    }

    #[test]
    fn gradient_nearly_vanishes_at_printed_equilibrium() {
        let g = OsnrGame::six_player();
        let printed = [0.3329, 0.3375, 0.3412, 0.2305, 0.2361, 0.2421];
        for v in g.gradient(&printed).unwrap() {
            assert!(v.abs() < 1e-3);
        }
    }

    #[test]
    fn six_player_self_curvature_at_lower_corner() {
        let g = OsnrGame::six_player();
        let theta = g.jacobian(&[0.2; 6]).unwrap();
        assert!((theta[(0, 0)] - 12.47).abs() < 0.01);
        assert!((1.0 / theta[(0, 0)] - 0.080).abs() < 5e-4);
    }

    #[test]
    fn six_player_step_bounds_truncate_to_reference_steps() {
        let g = OsnrGame::six_player();
        let bounds = g.constants().unwrap().step_size_bounds().unwrap();
        let truncated: Vec<f64> = bounds.iter().map(|b| (b * 100.0).floor() / 100.0).collect();
        assert_eq!(truncated, vec![0.08, 0.07, 0.07, 0.13, 0.12, 0.12]);
    }

    #[test]
    fn six_player_dominance_holds_with_reference_slack() {
        let c = OsnrGame::six_player().constants().unwrap();
        let report = c.dominance();
        assert!(report.holds());
        let first = report.entries()[0];
        assert!((first.slack - 0.107).abs() < 2e-3, "slack {}", first.slack);
        assert!((c.mu()[0] - 0.125).abs() < 1e-3);
        assert!((c.cross_sum(0) - 0.017).abs() < 1e-3);
    }

    #[test]
    fn diagonal_system_solves_componentwise() {
        let n = 3;
        let a = vec![0.3, 0.4, 0.5];
        let beta = vec![0.5, 0.5, 0.5];
        let g = OsnrGame::new(
            vec![1.0; n],
            beta.clone(),
            a.clone(),
            DMatrix::zeros(n, n),
            1e-6,
            0.01,
            2.0,
        )
        .unwrap();
        let ne = g.closed_form_ne().unwrap();
        for i in 0..n {
            let expected = (a[i] * beta[i] / (1.0 + beta[i]) - 1e-6) / a[i];
            assert!((ne[i] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn oracle_refuses_solutions_outside_the_interval() {
        // Tiny upper power bound forces the inner solution out of the box.
        let g = OsnrGame::new(
            vec![1.0],
            vec![1.0],
            vec![1.0],
            DMatrix::from_row_slice(1, 1, &[1.0]),
            0.0,
            0.01,
            0.1,
        )
        .unwrap();
        assert!(matches!(
            g.closed_form_ne(),
            Err(Error::OracleUnavailable(_))
        ));
    }

    #[test]
    fn nonpositive_denominator_is_a_domain_error() {
        let g = unit_game(0.0, 0.2, 2.0);
        assert!(matches!(
            g.partial_gradient(0, &[-1.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn random_instances_are_deterministic_and_valid() {
        let (g1, graph1) = OsnrGame::random(6, 42).unwrap();
        let (g2, graph2) = OsnrGame::random(6, 42).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(graph1, graph2);
        for seed in [0u64, 5, 99] {
            let (g, graph) = OsnrGame::random(5, seed).unwrap();
            assert!(g.condition_report().holds());
            let ne = g.closed_form_ne().unwrap();
            assert!(g.is_interior(&ne));
            assert!(graph.is_strongly_connected());
        }
    }
}
