use crate::error::{Error, Result};
use crate::point::Point;
use crate::regime::RegimeKind;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Selection parameter `p` for word competition. `p = 0` yields uniform
/// assignment; the infinite value is winner-take-all on the smoothed
/// densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    Finite(f64),
    Infinite,
}

impl Selection {
    pub fn finite(&self) -> Option<f64> {
        match self {
            Selection::Finite(p) => Some(*p),
            Selection::Infinite => None,
        }
    }
}

impl std::fmt::Display for Selection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Selection::Finite(p) => write!(f, "{p}"),
            Selection::Infinite => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinite") {
            return Ok(Selection::Infinite);
        }
        s.parse::<f64>()
            .map(Selection::Finite)
            .map_err(|_| Error::config("p", format!("expected a number or \"inf\", got `{s}`")))
    }
}

impl Serialize for Selection {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Selection::Finite(p) => ser.serialize_f64(*p),
            Selection::Infinite => ser.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Selection {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(de)? {
            Raw::Num(p) => Ok(Selection::Finite(p)),
            Raw::Str(s) => s.parse().map_err(|e| D::Error::custom(format!("{e}"))),
        }
    }
}

/// Initial exemplar cloud for one word: `count` exemplars of weight `w0`
/// at a single point. The field engine places the matching total weight
/// in the grid cell nearest that point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    pub count: usize,
    pub at: Point,
}

/// Per-word parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordParams {
    pub name: String,
    /// Production rate (events per unit time).
    pub nu: f64,
    pub init: InitSpec,
}

impl WordParams {
    /// Weight influx rate `mu = nu * w0`, the coupling that keeps the
    /// field limit finite.
    pub fn mu(&self, w0: f64) -> f64 {
        self.nu * w0
    }
}

/// Full model parameter set shared by both engines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Weight decay rate.
    pub lambda: f64,
    /// Initial weight of every new exemplar.
    pub w0: f64,
    /// Entrenchment: bias of production towards the word mean.
    pub alpha: f64,
    /// Lenition: bias of production towards the preferred point.
    pub beta: f64,
    /// Production noise standard deviation.
    pub sigma: f64,
    /// Preferred point in phonetic space; its dimension fixes the
    /// simulation dimension.
    pub y_star: Point,
    /// Sharpness of the exponential smoothing kernel.
    pub k: f64,
    /// Selection parameter for competitive categorization.
    pub p: Selection,
    pub regime: RegimeKind,
    pub words: Vec<WordParams>,
    /// Exemplars below this decayed weight are pruned (exemplar engine
    /// only). Defaults to `w0 * 1e-3`.
    pub prune_threshold: Option<f64>,
}

impl ModelParams {
    pub fn dim(&self) -> usize {
        self.y_star.dim
    }

    pub fn mu(&self, word: usize) -> f64 {
        self.words[word].mu(self.w0)
    }

    pub fn mu_total(&self) -> f64 {
        self.words.iter().map(|w| w.mu(self.w0)).sum()
    }

    pub fn prune_threshold(&self) -> f64 {
        self.prune_threshold.unwrap_or(self.w0 * 1e-3)
    }

    /// Check every construction-time invariant, reporting the first
    /// violation with the offending key.
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::config("model.lambda", "must be > 0"));
        }
        if !(self.w0 > 0.0) {
            return Err(Error::config("model.w0", "must be > 0"));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::config("model.sigma", "must be >= 0"));
        }
        if !(self.k > 0.0) {
            return Err(Error::config("model.k", "must be > 0"));
        }
        if self.alpha < 0.0 {
            return Err(Error::config("model.alpha", "must be >= 0"));
        }
        if self.beta < 0.0 {
            return Err(Error::config("model.beta", "must be >= 0"));
        }
        let ab = self.alpha + self.beta;
        if !(ab > 0.0 && ab < 2.0) {
            return Err(Error::config(
                "model.alpha+beta",
                format!("alpha + beta = {ab} must lie strictly inside (0, 2) for a finite equilibrium dispersion"),
            ));
        }
        if let Selection::Finite(p) = self.p {
            if !(p >= 0.0) {
                return Err(Error::config("model.p", "must be >= 0 or \"inf\""));
            }
        }
        if !self.y_star.is_finite() {
            return Err(Error::config("model.y_star", "coordinates must be finite"));
        }
        if let Some(th) = self.prune_threshold {
            if !(th >= 0.0) {
                return Err(Error::config("model.prune_threshold", "must be >= 0"));
            }
        }
        if self.words.is_empty() {
            return Err(Error::config("words", "at least one word is required"));
        }
        for (i, w) in self.words.iter().enumerate() {
            if !(w.nu > 0.0) {
                return Err(Error::config(format!("words[{i}].nu"), "must be > 0"));
            }
            if w.init.count == 0 {
                return Err(Error::config(
                    format!("words[{i}].init.count"),
                    "a word with positive production rate needs at least one initial exemplar",
                ));
            }
            if w.init.at.dim != self.dim() {
                return Err(Error::config(
                    format!("words[{i}].init.at"),
                    "dimension differs from y_star",
                ));
            }
            if !w.init.at.is_finite() {
                return Err(Error::config(
                    format!("words[{i}].init.at"),
                    "coordinates must be finite",
                ));
            }
        }
        let mut names: Vec<&str> = self.words.iter().map(|w| w.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.words.len() {
            return Err(Error::config("words", "word names must be unique"));
        }
        Ok(())
    }
}
