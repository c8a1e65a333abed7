//! Deterministic density-field engine on uniform grids.

pub mod conv;
pub mod grid;
mod sim;

pub use conv::{Backend, ConvPlan, DiscreteKernel};
pub use grid::{Axis, Grid};
pub use sim::{FieldConfig, FieldRun, FieldSnapshot, FieldState, Integrator};
