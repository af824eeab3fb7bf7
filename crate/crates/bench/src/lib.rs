//! Shared setup for the iteration benchmarks.

use nashnet::engine::EstimateMatrix;
use nashnet::game::GameSpec;
use nashnet::games::OsnrGame;
use nashnet::network::{DiGraph, WeightMatrix};

/// The six-channel reference instance over a communication cycle, with
/// near-bound step sizes and the deterministic start.
pub fn reference_setup() -> (OsnrGame, GameSpec, WeightMatrix, Vec<f64>, EstimateMatrix) {
    let game = OsnrGame::six_player();
    let spec = game.spec();
    let weights = WeightMatrix::row_stochastic(DiGraph::cycle(6).unwrap()).unwrap();
    let steps: Vec<f64> = game
        .constants()
        .unwrap()
        .step_size_bounds()
        .unwrap()
        .iter()
        .map(|b| 0.99 * b)
        .collect();
    let init = EstimateMatrix::default_init(&spec);
    (game, spec, weights, steps, init)
}
