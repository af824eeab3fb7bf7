//! Built-in game instances with analytic constants and equilibrium oracles.

mod linear;
mod osnr;

pub use linear::LinearGame;
pub use osnr::{ConditionEntry, ConditionReport, OsnrGame};
