//! The two simulation engines behind one interface, selected by name.

use crate::error::{Error, Result};
use crate::exemplar::{SimState, SnapshotRow};
use crate::field::{FieldSnapshot, FieldState};
use crate::scenarios::Scenario;
use crate::stats::DiagnosticsRow;

/// Results of one engine run. The series is common to both engines;
/// snapshots come in the engine's native form.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub series: Vec<DiagnosticsRow>,
    pub exemplar_snapshots: Vec<(f64, Vec<SnapshotRow>)>,
    pub field_snapshots: Vec<FieldSnapshot>,
    pub warnings: Vec<String>,
}

/// A simulation engine: runs a scenario with a given seed (the field
/// engine only consumes the seed when its initial peaks are perturbed).
pub trait Engine: Sync {
    fn name(&self) -> &'static str;

    fn run(&self, scenario: &Scenario, seed: u64) -> Result<RunOutput>;
}

/// Event-driven stochastic simulation of individual exemplars.
pub struct ExemplarEngine;

impl Engine for ExemplarEngine {
    fn name(&self) -> &'static str {
        "exemplar"
    }

    fn run(&self, scenario: &Scenario, seed: u64) -> Result<RunOutput> {
        scenario.validate()?;
        let mut sim = SimState::new(scenario.params.clone(), seed)?;
        let run = sim.run(scenario.t_max, scenario.sample_every, &scenario.snapshot_times);
        Ok(RunOutput {
            series: run.series,
            exemplar_snapshots: run.snapshots,
            field_snapshots: Vec::new(),
            warnings: Vec::new(),
        })
    }
}

/// Deterministic integration of the exemplar density fields.
pub struct FieldEngine;

impl Engine for FieldEngine {
    fn name(&self) -> &'static str {
        "field"
    }

    fn run(&self, scenario: &Scenario, seed: u64) -> Result<RunOutput> {
        scenario.validate()?;
        let mut state = FieldState::new(&scenario.params, &scenario.field_config(seed))?;
        let run = state.run(
            scenario.t_max,
            scenario.dt,
            scenario.sample_every,
            &scenario.snapshot_times,
        )?;
        Ok(RunOutput {
            series: run.series,
            exemplar_snapshots: Vec::new(),
            field_snapshots: run.snapshots,
            warnings: run.warnings,
        })
    }
}

/// All registered engines.
pub static REGISTRY: &[&dyn Engine] = &[&ExemplarEngine, &FieldEngine];

pub fn engine_by_name(name: &str) -> Result<&'static dyn Engine> {
    REGISTRY
        .iter()
        .copied()
        .find(|e| e.name() == name)
        .ok_or_else(|| {
            let names: Vec<&str> = REGISTRY.iter().map(|e| e.name()).collect();
            Error::config(
                "engine",
                format!("unknown engine `{name}`; known engines: {}", names.join(", ")),
            )
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::preset;

    #[test]
    fn registry_lookup() {
        assert_eq!(engine_by_name("exemplar").unwrap().name(), "exemplar");
        assert_eq!(engine_by_name("field").unwrap().name(), "field");
        assert!(engine_by_name("nope").is_err());
    }

    #[test]
    fn both_engines_run_a_short_scenario() {
        let mut sc = preset("single-1d").unwrap();
        sc.t_max = 1.0;
        sc.sample_every = 0.5;
        sc.snapshot_times = vec![1.0];
        for engine in REGISTRY {
            let out = engine.run(&sc, 3).unwrap();
            assert!(!out.series.is_empty(), "{}", engine.name());
            let words: Vec<usize> = out.series.iter().map(|r| r.word).collect();
            assert!(words.contains(&0));
        }
    }

    #[test]
    fn engine_snapshots_land_in_native_slots() {
        let mut sc = preset("single-1d").unwrap();
        sc.t_max = 1.0;
        sc.snapshot_times = vec![0.5];
        let ex = ExemplarEngine.run(&sc, 1).unwrap();
        assert_eq!(ex.exemplar_snapshots.len(), 1);
        assert!(ex.field_snapshots.is_empty());
        let fe = FieldEngine.run(&sc, 1).unwrap();
        assert_eq!(fe.field_snapshots.len(), 1);
        assert!(fe.exemplar_snapshots.is_empty());
    }
}
