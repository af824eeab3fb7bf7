//! Directed communication graphs and row-stochastic weight matrices.
//!
//! Edges are ordered pairs `(from, to)`: node `to` receives from node
//! `from`. Every graph records its self-loops explicitly, and weight
//! matrices are validated for row stochasticity, positive diagonal, and
//! sparsity agreement with their graph on construction.

use std::collections::VecDeque;
use std::fmt;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Tolerance on `|row sum - 1|` for weight validation.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Directed graph with explicit self-loops on every node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiGraph {
    in_neighbors: Vec<Vec<usize>>,
    out_neighbors: Vec<Vec<usize>>,
}

impl DiGraph {
    /// Builds a graph from `(from, to)` pairs; self-loops are always added.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("graph needs at least one node".into()));
        }
        let mut ins: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        let mut outs: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for &(from, to) in edges {
            if from >= n || to >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({from}, {to}) out of range for {n} nodes"
                )));
            }
            if !ins[to].contains(&from) {
                ins[to].push(from);
                outs[from].push(to);
            }
        }
        for list in ins.iter_mut().chain(outs.iter_mut()) {
            list.sort_unstable();
        }
        Ok(Self {
            in_neighbors: ins,
            out_neighbors: outs,
        })
    }

    /// Directed cycle `0 -> 1 -> ... -> n-1 -> 0` plus self-loops.
    pub fn cycle(n: usize) -> Result<Self> {
        let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::from_edges(n, &edges)
    }

    /// Directed cycle plus each remaining ordered pair independently with
    /// probability `extra_edge_prob`. Deterministic for a fixed seed, and
    /// always strongly connected (the cycle guarantees it).
    pub fn cycle_plus_random(n: usize, extra_edge_prob: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(
                "random cycle graphs need at least two nodes".into(),
            ));
        }
        if !(0.0..=1.0).contains(&extra_edge_prob) {
            return Err(Error::InvalidInput(format!(
                "edge probability must lie in [0, 1] (got {extra_edge_prob})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        for from in 0..n {
            for to in 0..n {
                if from == to || (from + 1) % n == to {
                    continue;
                }
                if rng.random_bool(extra_edge_prob) {
                    edges.push((from, to));
                }
            }
        }
        Self::from_edges(n, &edges)
    }

    pub fn num_nodes(&self) -> usize {
        self.in_neighbors.len()
    }

    /// Nodes `j` with an edge `(j, i)`, including `i` itself.
    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_neighbors[i]
    }

    pub fn out_neighbors(&self, i: usize) -> &[usize] {
        &self.out_neighbors[i]
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.in_neighbors[to].binary_search(&from).is_ok()
    }

    /// Total edge count, self-loops included.
    pub fn edge_count(&self) -> usize {
        self.in_neighbors.iter().map(Vec::len).sum()
    }

    /// In-degree of `i` not counting its self-loop.
    pub fn in_degree_excluding_self(&self, i: usize) -> usize {
        self.in_neighbors[i].len() - 1
    }

    /// Ordered `(from, to)` pairs, self-loops included.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (to, ins) in self.in_neighbors.iter().enumerate() {
            for &from in ins {
                out.push((from, to));
            }
        }
        out
    }

    fn reaches_all(&self, lists: &[Vec<usize>]) -> bool {
        let n = self.num_nodes();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &lists[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == n
    }

    /// True iff a directed path exists between every ordered node pair
    /// (forward and backward sweeps from node 0).
    pub fn is_strongly_connected(&self) -> bool {
        self.reaches_all(&self.out_neighbors) && self.reaches_all(&self.in_neighbors)
    }
}

/// A single violation found when validating a weight matrix against a graph.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightViolation {
    Negative { row: usize, col: usize, value: f64 },
    RowSum { row: usize, sum: f64 },
    Diagonal { row: usize, value: f64 },
    /// Edge present in the graph but weight is zero.
    MissingWeight { row: usize, col: usize },
    /// Positive weight with no corresponding edge.
    SpuriousWeight { row: usize, col: usize, value: f64 },
}

impl fmt::Display for WeightViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Negative { row, col, value } => {
                write!(f, "negative weight w[{row},{col}] = {value}")
            }
            Self::RowSum { row, sum } => write!(f, "row {row} sums to {sum}, expected 1"),
            Self::Diagonal { row, value } => {
                write!(f, "diagonal weight w[{row},{row}] = {value} is not positive")
            }
            Self::MissingWeight { row, col } => {
                write!(f, "edge ({col}, {row}) has zero weight")
            }
            Self::SpuriousWeight { row, col, value } => {
                write!(f, "weight w[{row},{col}] = {value} has no edge")
            }
        }
    }
}

/// Report-style result of [`validate_weights`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightReport {
    violations: Vec<WeightViolation>,
}

impl WeightReport {
    pub fn violations(&self) -> &[WeightViolation] {
        &self.violations
    }

    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks nonnegativity, row sums (within [`ROW_SUM_TOL`]), positive
/// diagonal, and sparsity agreement of `w` with `graph`.
pub fn validate_weights(w: &DMatrix<f64>, graph: &DiGraph) -> Result<WeightReport> {
    let n = graph.num_nodes();
    if w.nrows() != n || w.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: w.nrows(),
        });
    }
    let mut violations = Vec::new();
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            let v = w[(i, j)];
            sum += v;
            if v < 0.0 {
                violations.push(WeightViolation::Negative { row: i, col: j, value: v });
            }
            let edge = graph.has_edge(j, i);
            if edge && v <= 0.0 {
                violations.push(WeightViolation::MissingWeight { row: i, col: j });
            } else if !edge && v != 0.0 {
                violations.push(WeightViolation::SpuriousWeight { row: i, col: j, value: v });
            }
        }
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            violations.push(WeightViolation::RowSum { row: i, sum });
        }
        if w[(i, i)] <= 0.0 {
            violations.push(WeightViolation::Diagonal { row: i, value: w[(i, i)] });
        }
    }
    Ok(WeightReport { violations })
}

/// Row-stochastic, nonnegative weight matrix with positive diagonal paired
/// with its digraph. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    w: DMatrix<f64>,
    graph: DiGraph,
}

impl WeightMatrix {
    /// Validates `w` against `graph` and the strong-connectivity assumption.
    pub fn new(w: DMatrix<f64>, graph: DiGraph) -> Result<Self> {
        if !graph.is_strongly_connected() {
            return Err(Error::NotStronglyConnected);
        }
        let report = validate_weights(&w, &graph)?;
        if let Some(first) = report.violations().first() {
            return Err(Error::InvalidInput(format!(
                "weight matrix violates its contract: {first} ({} violations total)",
                report.violations().len()
            )));
        }
        Ok(Self { w, graph })
    }

    /// Local weight recipe: each in-neighbor weight is `delta`, the
    /// self-weight absorbs the remainder, with `delta = 0.5 / max_i d(i)`
    /// and `d(i)` the in-degree excluding the self-loop. Every self-weight
    /// ends up at least one half.
    pub fn row_stochastic(graph: DiGraph) -> Result<Self> {
        if !graph.is_strongly_connected() {
            return Err(Error::NotStronglyConnected);
        }
        let n = graph.num_nodes();
        let max_d = (0..n)
            .map(|i| graph.in_degree_excluding_self(i))
            .max()
            .unwrap_or(0);
        let mut w = DMatrix::zeros(n, n);
        if max_d == 0 {
            // Single node: only the self-loop exists.
            w[(0, 0)] = 1.0;
            return Self::new(w, graph);
        }
        let delta = 0.5 / max_d as f64;
        for i in 0..n {
            let d = graph.in_degree_excluding_self(i) as f64;
            for &j in graph.in_neighbors(i) {
                if j != i {
                    w[(i, j)] = delta;
                }
            }
            w[(i, i)] = 1.0 - delta * d;
        }
        Self::new(w, graph)
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn graph(&self) -> &DiGraph {
        &self.graph
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[(i, j)]
    }

    /// Row-major CSV serialization at full (round-trip safe) precision.
    pub fn to_csv(&self) -> String {
        let n = self.num_nodes();
        let mut out = String::new();
        for i in 0..n {
            for j in 0..n {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", self.w[(i, j)]);
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_is_strongly_connected() {
        let g = DiGraph::cycle(3).unwrap();
        assert!(g.is_strongly_connected());
        assert_eq!(g.edge_count(), 6);
    }

    #[test]
    fn one_way_pair_is_not_strongly_connected() {
        let g = DiGraph::from_edges(2, &[(0, 1)]).unwrap();
        assert!(!g.is_strongly_connected());
    }

    #[test]
    fn single_node_is_strongly_connected() {
        let g = DiGraph::from_edges(1, &[]).unwrap();
        assert!(g.is_strongly_connected());
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn random_cycle_probability_extremes() {
        let g = DiGraph::cycle_plus_random(3, 0.0, 42).unwrap();
        assert_eq!(g.edge_count(), 6);
        assert_eq!(g, DiGraph::cycle(3).unwrap());

        let g = DiGraph::cycle_plus_random(3, 1.0, 42).unwrap();
        assert_eq!(g.edge_count(), 9);
    }

    #[test]
    fn random_cycle_is_deterministic() {
        let a = DiGraph::cycle_plus_random(8, 0.3, 7).unwrap();
        let b = DiGraph::cycle_plus_random(8, 0.3, 7).unwrap();
        assert_eq!(a.edges(), b.edges());
        assert!(a.is_strongly_connected());
    }

    #[test]
    fn recipe_on_cycle_gives_half_weights() {
        let w = WeightMatrix::row_stochastic(DiGraph::cycle(3).unwrap()).unwrap();
        for i in 0..3 {
            assert_eq!(w.get(i, i), 0.5);
            assert_eq!(w.get(i, (i + 2) % 3), 0.5);
        }
    }

    #[test]
    fn recipe_with_two_in_neighbors() {
        // Complete digraph on three nodes: every d(i) = 2, delta = 0.25.
        let edges: Vec<(usize, usize)> = (0..3)
            .flat_map(|i| (0..3).filter(move |j| *j != i).map(move |j| (i, j)))
            .collect();
        let g = DiGraph::from_edges(3, &edges).unwrap();
        let w = WeightMatrix::row_stochastic(g).unwrap();
        for i in 0..3 {
            assert_eq!(w.get(i, i), 0.5);
            for j in 0..3 {
                if j != i {
                    assert_eq!(w.get(i, j), 0.25);
                }
            }
        }
    }

    #[test]
    fn recipe_rows_sum_to_one() {
        let g = DiGraph::cycle_plus_random(9, 0.4, 3).unwrap();
        let w = WeightMatrix::row_stochastic(g).unwrap();
        for i in 0..9 {
            let sum: f64 = (0..9).map(|j| w.get(i, j)).sum();
            assert!((sum - 1.0).abs() <= ROW_SUM_TOL);
            assert!(w.get(i, i) >= 0.5);
        }
    }

    #[test]
    fn recipe_requires_strong_connectivity() {
        let g = DiGraph::from_edges(2, &[(0, 1)]).unwrap();
        assert!(matches!(
            WeightMatrix::row_stochastic(g),
            Err(Error::NotStronglyConnected)
        ));
    }

    #[test]
    fn identity_against_cycle_reports_missing_weights() {
        let g = DiGraph::cycle(3).unwrap();
        let report = validate_weights(&DMatrix::identity(3, 3), &g).unwrap();
        assert!(!report.is_valid());
        assert!(report
            .violations()
            .iter()
            .any(|v| matches!(v, WeightViolation::MissingWeight { .. })));
    }

    #[test]
    fn doubly_stochastic_clique_passes() {
        let edges: Vec<(usize, usize)> = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .collect();
        let g = DiGraph::from_edges(3, &edges).unwrap();
        let w = DMatrix::from_element(3, 3, 1.0 / 3.0);
        assert!(validate_weights(&w, &g).unwrap().is_valid());
    }

    #[test]
    fn constructed_matrix_passes_its_own_validation() {
        let g = DiGraph::cycle_plus_random(6, 0.5, 11).unwrap();
        let w = WeightMatrix::row_stochastic(g).unwrap();
        assert!(validate_weights(w.matrix(), w.graph()).unwrap().is_valid());
    }

    #[test]
    fn csv_round_trips_weights() {
        let w = WeightMatrix::row_stochastic(DiGraph::cycle(3).unwrap()).unwrap();
        let csv = w.to_csv();
        let parsed: Vec<f64> = csv
            .lines()
            .flat_map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()))
            .collect();
        assert_eq!(parsed.len(), 9);
        assert_eq!(parsed[0], w.get(0, 0));
        assert_eq!(parsed[2], w.get(0, 2));
    }
}
