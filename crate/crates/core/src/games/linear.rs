//! Linear-quadratic games with scalar agents: the stacked gradient is
//! `A x + b`, so each agent's cost is the unique quadratic with that own
//! derivative. Ships the diagonally dominant but nonmonotone two-agent
//! example and a projected-equilibrium oracle.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::game::{ActionBox, GameConstants, GameSpec};

/// Oracle fixed-point tolerance (infinity norm of one sweep).
const ORACLE_TOL: f64 = 1e-12;
const ORACLE_MAX_ITERS: u64 = 10_000_000;

/// Game with stacked gradient `A x + b` and one scalar action per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGame {
    a: DMatrix<f64>,
    b: DVector<f64>,
    boxes: Vec<ActionBox>,
}

impl LinearGame {
    pub fn new(a: DMatrix<f64>, b: Vec<f64>, intervals: Vec<(f64, f64)>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::InvalidInput("gradient matrix must be square and nonempty".into()));
        }
        if b.len() != n || intervals.len() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: b.len().min(intervals.len()),
            });
        }
        if a.iter().any(|v| !v.is_finite()) || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("gradient coefficients must be finite".into()));
        }
        let boxes = intervals
            .into_iter()
            .map(|(lo, hi)| ActionBox::interval(lo, hi))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            a,
            b: DVector::from_vec(b),
            boxes,
        })
    }

    /// Two-agent example whose gradient matrix is strictly diagonally
    /// dominant yet has an indefinite symmetric part, so the stacked
    /// gradient is not monotone.
    pub fn nonmonotone_example() -> Self {
        Self::new(
            DMatrix::from_row_slice(2, 2, &[1.0, -0.9, -9.0, 10.0]),
            vec![0.0, 0.0],
            vec![(-1.0, 1.0), (-1.0, 1.0)],
        )
        .expect("example coefficients are valid")
    }

    pub fn num_agents(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn offset(&self) -> &[f64] {
        self.b.as_slice()
    }

    pub fn action_box(&self, i: usize) -> &ActionBox {
        &self.boxes[i]
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.num_agents() {
            return Err(Error::Dimension {
                expected: self.num_agents(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn partial_gradient(&self, i: usize, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok((0..self.num_agents())
            .map(|j| self.a[(i, j)] * x[j])
            .sum::<f64>()
            + self.b[i])
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        (0..self.num_agents())
            .map(|i| self.partial_gradient(i, x))
            .collect()
    }

    /// Analytic constants: `mu_i = a_ii` (requires positive diagonal) and
    /// `ell_ij = |a_ij|`.
    pub fn constants(&self) -> Result<GameConstants> {
        let n = self.num_agents();
        let mu = (0..n).map(|i| self.a[(i, i)]).collect();
        let ell = DMatrix::from_fn(n, n, |i, j| self.a[(i, j)].abs());
        GameConstants::new(mu, ell)
    }

    fn strictly_dominant(&self) -> bool {
        let n = self.num_agents();
        (0..n).all(|i| {
            let cross: f64 = (0..n)
                .filter(|j| *j != i)
                .map(|j| self.a[(i, j)].abs())
                .sum();
            self.a[(i, i)] > 0.0 && self.a[(i, i)] > cross
        })
    }

    /// Equilibrium oracle: solves `A x = -b` and returns the solution when
    /// it is feasible; otherwise falls back to the projected fixed-point
    /// sweep `x <- proj(x - alpha (A x + b))`, which contracts in the max
    /// norm under strict dominance.
    pub fn oracle(&self) -> Result<Vec<f64>> {
        let n = self.num_agents();
        if let Some(solution) = self.a.clone().lu().solve(&(-&self.b)) {
            let x: Vec<f64> = solution.iter().copied().collect();
            if (0..n).all(|i| self.boxes[i].contains(&x[i..=i])) {
                return Ok(x);
            }
        }
        if !self.strictly_dominant() {
            return Err(Error::OracleUnavailable(
                "no feasible inner solution and the gradient matrix is not strictly dominant"
                    .into(),
            ));
        }
        let steps: Vec<f64> = (0..n).map(|i| 0.99 / self.a[(i, i)]).collect();
        let mut x: Vec<f64> = self.boxes.iter().map(|b| b.midpoint()[0]).collect();
        for _ in 0..ORACLE_MAX_ITERS {
            let g = self.gradient(&x)?;
            let mut delta = 0.0f64;
            let mut next = x.clone();
            for i in 0..n {
                next[i] = (x[i] - steps[i] * g[i]).clamp(
                    self.boxes[i].lo()[0],
                    self.boxes[i].hi()[0],
                );
                delta = delta.max((next[i] - x[i]).abs());
            }
            x = next;
            if delta < ORACLE_TOL {
                return Ok(x);
            }
        }
        Err(Error::OracleUnavailable(
            "projected fixed-point sweep did not converge".into(),
        ))
    }

    /// Generic game view with the constant Jacobian attached.
    pub fn spec(&self) -> GameSpec {
        let shared = Arc::new(self.clone());
        let grad_game = Arc::clone(&shared);
        let a = self.a.clone();
        GameSpec::new(
            self.boxes.clone(),
            Box::new(move |i, y: &[f64]| grad_game.partial_gradient(i, y).map(|g| vec![g])),
        )
        .expect("validated boxes")
        .with_jacobian(Box::new(move |_: &[f64]| Ok(a.clone())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::sampled_min_symmetric_eigenvalue;

    #[test]
    fn gradient_matches_printed_products() {
        let g = LinearGame::nonmonotone_example();
        let at_ones = g.gradient(&[1.0, 1.0]).unwrap();
        assert!((at_ones[0] - 0.1).abs() < 1e-15);
        assert!((at_ones[1] - 1.0).abs() < 1e-15);
        assert_eq!(g.gradient(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn oracle_returns_origin_for_homogeneous_system() {
        let g = LinearGame::nonmonotone_example();
        let ne = g.oracle().unwrap();
        assert!(ne.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn oracle_solves_interior_offset() {
        let g = LinearGame::new(
            DMatrix::identity(1, 1),
            vec![-0.5],
            vec![(0.0, 1.0)],
        )
        .unwrap();
        assert!((g.oracle().unwrap()[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn oracle_clamps_at_the_boundary() {
        let g = LinearGame::new(DMatrix::identity(1, 1), vec![-2.0], vec![(0.0, 1.0)]).unwrap();
        assert!((g.oracle().unwrap()[0] - 1.0).abs() < 1e-11);
    }

    #[test]
    fn oracle_unavailable_without_dominance() {
        // Singular and not dominant: rows are identical.
        let g = LinearGame::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
            vec![-10.0, 3.0],
            vec![(0.0, 1.0), (0.0, 1.0)],
        )
        .unwrap();
        assert!(matches!(g.oracle(), Err(Error::OracleUnavailable(_))));
    }

    #[test]
    fn example_is_dominant_but_not_monotone() {
        let g = LinearGame::nonmonotone_example();
        let report = g.constants().unwrap().dominance();
        assert!(report.holds());
        assert!((report.entries()[0].slack - 0.1).abs() < 1e-15);
        assert!((report.entries()[1].slack - 1.0).abs() < 1e-15);

        let min = sampled_min_symmetric_eigenvalue(&g.spec(), 8, 1).unwrap();
        let expected = (11.0 - 179.01f64.sqrt()) / 2.0;
        assert!((min - expected).abs() < 1e-9, "min {min}, expected {expected}");
        assert!(min < -1.0);
    }
}
