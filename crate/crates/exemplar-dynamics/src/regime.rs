//! Categorization regimes as interchangeable strategies.
//!
//! Each regime answers the same two questions, one per engine: what
//! happens to a single produced exemplar (stochastic engine), and how
//! production couples into a word's density field (field engine). New
//! regimes register by name in [`REGISTRY`].

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Fate of a newly produced exemplar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignmentOutcome {
    Accept(usize),
    Discard,
}

/// A categorization regime, shared by both engines.
pub trait CategorizationRegime: Sync {
    fn name(&self) -> &'static str;

    fn kind(&self) -> RegimeKind;

    /// Decide the fate of an exemplar produced from `source`, given the
    /// per-word assignment probabilities at its phonetic position.
    fn classify(
        &self,
        source: usize,
        probs: &[f64],
        rng: &mut dyn rand::RngCore,
    ) -> AssignmentOutcome;

    /// Pointwise production coupling for the field equations: the rate of
    /// weight gain of word W at a point, given the assignment fraction
    /// `f_w`, the word's own production `p_w`, and the total production
    /// `p_total` there.
    fn production_coupling(&self, f_w: f64, p_w: f64, p_total: f64) -> f64;

    /// Whether classification consults the smoothed densities at all.
    /// When false both engines skip evaluating them.
    fn uses_densities(&self) -> bool {
        true
    }
}

/// Draw an index from a normalized probability vector.
fn draw(probs: &[f64], rng: &mut dyn rand::RngCore) -> usize {
    let u: f64 = rng.gen::<f64>();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Exemplars are always stored under the word they were produced from.
pub struct NoCompetition;

impl CategorizationRegime for NoCompetition {
    fn name(&self) -> &'static str {
        "no-competition"
    }

    fn kind(&self) -> RegimeKind {
        RegimeKind::NoCompetition
    }

    fn classify(&self, source: usize, _probs: &[f64], _rng: &mut dyn rand::RngCore) -> AssignmentOutcome {
        AssignmentOutcome::Accept(source)
    }

    fn production_coupling(&self, _f_w: f64, p_w: f64, _p_total: f64) -> f64 {
        p_w
    }

    fn uses_densities(&self) -> bool {
        false
    }
}

/// Words compete for every exemplar; the winner stores it regardless of
/// which word produced it.
pub struct PureCompetition;

impl CategorizationRegime for PureCompetition {
    fn name(&self) -> &'static str {
        "pure-competition"
    }

    fn kind(&self) -> RegimeKind {
        RegimeKind::PureCompetition
    }

    fn classify(&self, _source: usize, probs: &[f64], rng: &mut dyn rand::RngCore) -> AssignmentOutcome {
        AssignmentOutcome::Accept(draw(probs, rng))
    }

    fn production_coupling(&self, f_w: f64, _p_w: f64, p_total: f64) -> f64 {
        f_w * p_total
    }
}

/// Words compete as above, but a misclassified exemplar (claimed by a
/// word other than its source) is discarded rather than stored.
pub struct CompetitionWithDiscards;

impl CategorizationRegime for CompetitionWithDiscards {
    fn name(&self) -> &'static str {
        "competition-with-discards"
    }

    fn kind(&self) -> RegimeKind {
        RegimeKind::CompetitionWithDiscards
    }

    fn classify(&self, source: usize, probs: &[f64], rng: &mut dyn rand::RngCore) -> AssignmentOutcome {
        if draw(probs, rng) == source {
            AssignmentOutcome::Accept(source)
        } else {
            AssignmentOutcome::Discard
        }
    }

    fn production_coupling(&self, f_w: f64, p_w: f64, _p_total: f64) -> f64 {
        f_w * p_w
    }
}

/// All registered regimes.
pub static REGISTRY: &[&dyn CategorizationRegime] =
    &[&NoCompetition, &PureCompetition, &CompetitionWithDiscards];

pub fn regime_by_name(name: &str) -> Option<&'static dyn CategorizationRegime> {
    REGISTRY.iter().copied().find(|r| r.name() == name)
}

/// Serializable tag for the three regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeKind {
    NoCompetition,
    PureCompetition,
    CompetitionWithDiscards,
}

impl RegimeKind {
    pub fn strategy(&self) -> &'static dyn CategorizationRegime {
        match self {
            RegimeKind::NoCompetition => &NoCompetition,
            RegimeKind::PureCompetition => &PureCompetition,
            RegimeKind::CompetitionWithDiscards => &CompetitionWithDiscards,
        }
    }

    pub fn name(&self) -> &'static str {
        self.strategy().name()
    }
}

impl std::fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for RegimeKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        regime_by_name(s).map(|r| r.kind()).ok_or_else(|| {
            let names: Vec<&str> = REGISTRY.iter().map(|r| r.name()).collect();
            crate::Error::config(
                "regime",
                format!("unknown regime `{s}`; known regimes: {}", names.join(", ")),
            )
        })
    }
}
