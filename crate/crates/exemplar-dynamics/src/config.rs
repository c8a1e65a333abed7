//! Configuration files: a TOML schema that expands to a [`Scenario`].
//!
//! A file either names a preset (whose values can then be overridden key
//! by key) or describes a scenario from scratch, in which case documented
//! defaults fill everything not given. The schema has six sections —
//! `model`, `words` (an array of tables), `engine`, `grid`, `run`,
//! `output` — plus the optional top-level `preset`, `name`, and `note`
//! keys. Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Backend, Grid, Integrator};
use crate::params::{InitSpec, ModelParams, Selection, WordParams};
use crate::point::Point;
use crate::regime::RegimeKind;
use crate::scenarios::{preset, EngineChoice, Scenario};

/// One or two numbers, for per-axis grid bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrTwo<T> {
    One(T),
    Two([T; 2]),
}

impl<T: Copy> OneOrTwo<T> {
    fn per_axis(&self, dim: usize, key: &str) -> Result<Vec<T>> {
        match (self, dim) {
            (OneOrTwo::One(v), 1) => Ok(vec![*v]),
            (OneOrTwo::One(v), 2) => Ok(vec![*v, *v]),
            (OneOrTwo::Two(v), 2) => Ok(vec![v[0], v[1]]),
            (OneOrTwo::Two(_), _) => Err(Error::config(
                key,
                "a pair of values needs a two-dimensional model",
            )),
            _ => unreachable!("dimension is validated to be 1 or 2"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ModelSection {
    lambda: Option<f64>,
    w0: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    sigma: Option<f64>,
    y_star: Option<Vec<f64>>,
    k: Option<f64>,
    p: Option<Selection>,
    regime: Option<RegimeKind>,
    prune_threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct WordSection {
    name: Option<String>,
    nu: Option<f64>,
    count: Option<usize>,
    at: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct EngineSection {
    kind: Option<EngineChoice>,
    backend: Option<Backend>,
    integrator: Option<Integrator>,
    perturb_cells: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct GridSection {
    min: Option<OneOrTwo<f64>>,
    max: Option<OneOrTwo<f64>>,
    n: Option<OneOrTwo<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RunSection {
    t_max: Option<f64>,
    dt: Option<f64>,
    sample_every: Option<f64>,
    seed: Option<u64>,
    seeds: Option<Vec<u64>>,
    snapshot_times: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct OutputSection {
    dir: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    preset: Option<String>,
    name: Option<String>,
    note: Option<String>,
    model: Option<ModelSection>,
    words: Option<Vec<WordSection>>,
    engine: Option<EngineSection>,
    grid: Option<GridSection>,
    run: Option<RunSection>,
    output: Option<OutputSection>,
}

/// Default word name for position `i`: A, B, C, ...
fn default_word_name(i: usize) -> String {
    char::from(b'A' + (i % 26) as u8).to_string()
}

const DEFAULT_NU: f64 = 100.0;

impl ConfigFile {
    /// Expand into a fully validated scenario. Values start from the
    /// named preset if one is given, otherwise from documented defaults;
    /// every key present in the file then overrides its counterpart.
    pub fn resolve(&self) -> Result<Scenario> {
        let mut sc = match &self.preset {
            Some(name) => preset(name)?,
            None => default_scenario(),
        };
        if let Some(name) = &self.name {
            sc.name = name.clone();
        }
        if let Some(note) = &self.note {
            sc.note = note.clone();
        }
        if let Some(m) = &self.model {
            let p = &mut sc.params;
            if let Some(v) = m.lambda {
                p.lambda = v;
            }
            if let Some(v) = m.w0 {
                p.w0 = v;
            }
            if let Some(v) = m.alpha {
                p.alpha = v;
            }
            if let Some(v) = m.beta {
                p.beta = v;
            }
            if let Some(v) = m.sigma {
                p.sigma = v;
            }
            if let Some(v) = &m.y_star {
                if v.is_empty() || v.len() > 2 {
                    return Err(Error::config("model.y_star", "needs 1 or 2 coordinates"));
                }
                p.y_star = Point::from_slice(v);
            }
            if let Some(v) = m.k {
                p.k = v;
            }
            if let Some(v) = m.p {
                p.p = v;
            }
            if let Some(v) = m.regime {
                p.regime = v;
            }
            if let Some(v) = m.prune_threshold {
                p.prune_threshold = Some(v);
            }
        }
        if let Some(words) = &self.words {
            if words.is_empty() {
                return Err(Error::config("words", "at least one word is required"));
            }
            let dim = sc.params.dim();
            sc.params.words = words
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    let at = match &w.at {
                        Some(c) if c.len() == dim => Point::from_slice(c),
                        Some(_) => {
                            return Err(Error::config(
                                format!("words[{i}].at"),
                                format!("needs {dim} coordinate(s) to match y_star"),
                            ))
                        }
                        None => sc.params.y_star,
                    };
                    Ok(WordParams {
                        name: w.name.clone().unwrap_or_else(|| default_word_name(i)),
                        nu: w.nu.unwrap_or(DEFAULT_NU),
                        init: InitSpec {
                            count: w.count.unwrap_or(50),
                            at,
                        },
                    })
                })
                .collect::<Result<_>>()?;
        }
        // Without an explicit w0 the influx rate defaults to mu = 1 for
        // the first word: w0 = 1 / nu.
        if self.preset.is_none() && self.model.as_ref().map_or(true, |m| m.w0.is_none()) {
            sc.params.w0 = 1.0 / sc.params.words[0].nu;
        }
        if let Some(e) = &self.engine {
            if let Some(v) = e.kind {
                sc.engine = v;
            }
            if let Some(v) = e.backend {
                sc.backend = v;
            }
            if let Some(v) = e.integrator {
                sc.integrator = v;
            }
            if let Some(v) = e.perturb_cells {
                sc.perturb_cells = v;
            }
        }
        let dim = sc.params.dim();
        if let Some(g) = &self.grid {
            let current = &sc.grid;
            let min = match &g.min {
                Some(v) => v.per_axis(dim, "grid.min")?,
                None => (0..dim).map(|a| current.axis(a).min).collect(),
            };
            let max = match &g.max {
                Some(v) => v.per_axis(dim, "grid.max")?,
                None => (0..dim).map(|a| current.axis(a).max).collect(),
            };
            let n = match &g.n {
                Some(v) => v.per_axis(dim, "grid.n")?,
                None => (0..dim).map(|a| current.axis(a).n).collect(),
            };
            sc.grid = match dim {
                1 => Grid::d1(min[0], max[0], n[0])?,
                _ => Grid::d2([min[0], min[1]], [max[0], max[1]], [n[0], n[1]])?,
            };
        } else if sc.grid.dim() != dim {
            // a 2D model without an explicit grid gets the default bounds
            // extended to both axes
            let (lo, hi, n) = (sc.grid.axis(0).min, sc.grid.axis(0).max, sc.grid.axis(0).n);
            sc.grid = Grid::d2([lo, lo], [hi, hi], [n.min(128), n.min(128)])?;
        }
        if let Some(r) = &self.run {
            if let Some(v) = r.t_max {
                sc.t_max = v;
            }
            if let Some(v) = r.dt {
                sc.dt = v;
            }
            if let Some(v) = r.sample_every {
                sc.sample_every = v;
            }
            match (&r.seed, &r.seeds) {
                (Some(_), Some(_)) => {
                    return Err(Error::config(
                        "run.seed",
                        "give either `seed` or `seeds`, not both",
                    ))
                }
                (Some(s), None) => sc.seeds = vec![*s],
                (None, Some(s)) => sc.seeds = s.clone(),
                (None, None) => {}
            }
            if let Some(v) = &r.snapshot_times {
                sc.snapshot_times = v.clone();
            }
        }
        if let Some(o) = &self.output {
            if let Some(dir) = &o.dir {
                sc.out_dir = Some(dir.clone());
            }
        }
        sc.validate()?;
        Ok(sc)
    }
}

/// Scenario used when a config names no preset: one word at the
/// preferred point, no competition, the standard one-dimensional grid.
fn default_scenario() -> Scenario {
    Scenario {
        name: "custom".into(),
        engine: EngineChoice::Field,
        params: ModelParams {
            lambda: 1.0,
            w0: 1.0 / DEFAULT_NU,
            alpha: 0.0,
            beta: 0.1,
            sigma: 1.0,
            y_star: Point::d1(0.0),
            k: 10.0,
            p: Selection::Finite(1.0),
            regime: RegimeKind::NoCompetition,
            words: vec![WordParams {
                name: "A".into(),
                nu: DEFAULT_NU,
                init: InitSpec {
                    count: 50,
                    at: Point::d1(0.0),
                },
            }],
            prune_threshold: None,
        },
        grid: Grid::d1(-20.0, 25.0, 1024).expect("default grid"),
        t_max: 40.0,
        dt: 0.01,
        sample_every: 0.1,
        seeds: vec![0],
        snapshot_times: vec![],
        perturb_cells: 0.0,
        backend: Backend::Fft,
        integrator: Integrator::Euler,
        note: String::new(),
        out_dir: None,
    }
}

/// Parse a configuration document into a scenario.
pub fn parse_config(text: &str) -> Result<Scenario> {
    let file: ConfigFile =
        toml::from_str(text).map_err(|e| Error::config("config", e.message().to_string()))?;
    file.resolve()
}

/// Write a scenario back out as a complete configuration document that
/// [`parse_config`] turns into an identical scenario.
pub fn serialize_scenario(sc: &Scenario) -> String {
    let p = &sc.params;
    let file = ConfigFile {
        preset: None,
        name: Some(sc.name.clone()),
        note: Some(sc.note.clone()),
        model: Some(ModelSection {
            lambda: Some(p.lambda),
            w0: Some(p.w0),
            alpha: Some(p.alpha),
            beta: Some(p.beta),
            sigma: Some(p.sigma),
            y_star: Some(p.y_star.coords().to_vec()),
            k: Some(p.k),
            p: Some(p.p),
            regime: Some(p.regime),
            prune_threshold: p.prune_threshold,
        }),
        words: Some(
            p.words
                .iter()
                .map(|w| WordSection {
                    name: Some(w.name.clone()),
                    nu: Some(w.nu),
                    count: Some(w.init.count),
                    at: Some(w.init.at.coords().to_vec()),
                })
                .collect(),
        ),
        engine: Some(EngineSection {
            kind: Some(sc.engine),
            backend: Some(sc.backend),
            integrator: Some(sc.integrator),
            perturb_cells: Some(sc.perturb_cells),
        }),
        grid: Some(GridSection {
            min: Some(axis_values(&sc.grid, |a| a.min)),
            max: Some(axis_values(&sc.grid, |a| a.max)),
            n: Some(axis_values(&sc.grid, |a| a.n)),
        }),
        run: Some(RunSection {
            t_max: Some(sc.t_max),
            dt: Some(sc.dt),
            sample_every: Some(sc.sample_every),
            seed: None,
            seeds: Some(sc.seeds.clone()),
            snapshot_times: Some(sc.snapshot_times.clone()),
        }),
        output: sc.out_dir.clone().map(|dir| OutputSection { dir: Some(dir) }),
    };
    toml::to_string_pretty(&file).expect("scenario serializes")
}

fn axis_values<T: Copy>(grid: &Grid, f: impl Fn(&crate::field::Axis) -> T) -> OneOrTwo<T> {
    match grid.dim() {
        1 => OneOrTwo::One(f(grid.axis(0))),
        _ => OneOrTwo::Two([f(grid.axis(0)), f(grid.axis(1))]),
    }
}
