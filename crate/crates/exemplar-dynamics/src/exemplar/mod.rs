//! Event-driven stochastic engine for the exemplar-level model.

mod engine;
mod store;

pub use engine::{Counters, ExemplarRun, SimState, SnapshotRow};
pub use store::{Exemplar, WordStore};
