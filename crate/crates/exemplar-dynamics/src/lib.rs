//! Simulation of word pronunciation dynamics in phonetic space.
//!
//! Two engines share one model: an event-driven stochastic simulation of
//! individual exemplars (memories of utterances with exponentially decaying
//! weights), and a deterministic integrator for the corresponding exemplar
//! density fields on a grid. Words interact through a categorization step
//! that assigns each newly produced exemplar to a word, with three
//! interchangeable regimes (no competition, pure competition, competition
//! with discards). Both engines work in one or two phonetic dimensions.

pub mod categorize;
pub mod config;
pub mod engine;
pub mod error;
pub mod exemplar;
pub mod field;
pub mod output;
pub mod params;
pub mod point;
pub mod regime;
pub mod rng;
pub mod scenarios;
pub mod stats;
pub mod validate;

pub use error::{Error, Result};
pub use params::{ModelParams, Selection, WordParams};
pub use point::Point;
