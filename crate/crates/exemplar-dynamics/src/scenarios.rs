//! Canned experiment presets, the exemplar-vs-field convergence study,
//! and a merger-outcome classifier for diagnostics series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exemplar::SimState;
use crate::field::{Backend, FieldConfig, FieldState, Grid, Integrator};
use crate::params::{InitSpec, ModelParams, Selection, WordParams};
use crate::point::Point;
use crate::regime::RegimeKind;
use crate::stats::DiagnosticsRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineChoice {
    Exemplar,
    Field,
    Both,
}

impl std::fmt::Display for EngineChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EngineChoice::Exemplar => "exemplar",
            EngineChoice::Field => "field",
            EngineChoice::Both => "both",
        })
    }
}

impl std::str::FromStr for EngineChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exemplar" => Ok(EngineChoice::Exemplar),
            "field" => Ok(EngineChoice::Field),
            "both" => Ok(EngineChoice::Both),
            other => Err(Error::config(
                "engine.kind",
                format!("unknown engine '{other}' (expected exemplar, field, or both)"),
            )),
        }
    }
}

/// A fully resolved experiment: model, engine, grid, and run schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub engine: EngineChoice,
    pub params: ModelParams,
    pub grid: Grid,
    pub t_max: f64,
    /// Field-engine time step.
    pub dt: f64,
    pub sample_every: f64,
    pub seeds: Vec<u64>,
    pub snapshot_times: Vec<f64>,
    /// Random offset of field initial peaks, in cells.
    pub perturb_cells: f64,
    pub backend: Backend,
    pub integrator: Integrator,
    /// Where the preset's numbers come from, or a warning about a value
    /// that had to be assumed.
    pub note: String,
    pub out_dir: Option<String>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.grid.dim() != self.params.dim() {
            return Err(Error::config("grid", "grid and y_star dimensions differ"));
        }
        if !(self.t_max > 0.0) {
            return Err(Error::config("run.t_max", "must be > 0"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::config("run.dt", "must be > 0"));
        }
        if !(self.sample_every > 0.0) {
            return Err(Error::config("run.sample_every", "must be > 0"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("run.seed", "at least one seed is required"));
        }
        Ok(())
    }

    pub fn field_config(&self, seed: u64) -> FieldConfig {
        FieldConfig {
            grid: self.grid.clone(),
            backend: self.backend,
            integrator: self.integrator,
            perturb_cells: self.perturb_cells,
            seed,
        }
    }
}

fn word(name: &str, nu: f64, count: usize, at: Point) -> WordParams {
    WordParams {
        name: name.into(),
        nu,
        init: InitSpec { count, at },
    }
}

fn two_word_base(name: &str, regime: RegimeKind, p: f64, note: &str) -> Scenario {
    Scenario {
        name: name.into(),
        engine: EngineChoice::Field,
        params: ModelParams {
            lambda: 1.0,
            w0: 1e-3,
            alpha: 0.0,
            beta: 0.1,
            sigma: 1.0,
            y_star: Point::d1(0.0),
            k: 10.0,
            p: Selection::Finite(p),
            regime,
            words: vec![
                word("A", 1000.0, 50, Point::d1(5.0)),
                word("B", 1000.0, 50, Point::d1(10.0)),
            ],
            prune_threshold: None,
        },
        grid: Grid::d1(-20.0, 25.0, 1024).expect("preset grid"),
        t_max: 1000.0,
        dt: 0.01,
        sample_every: 1.0,
        seeds: vec![0],
        snapshot_times: vec![100.0, 1000.0],
        perturb_cells: 0.0,
        backend: Backend::Fft,
        integrator: Integrator::Euler,
        note: note.into(),
        out_dir: None,
    }
}

pub fn preset(name: &str) -> Result<Scenario> {
    match name {
        "single-1d" => Ok(Scenario {
            name: "single-1d".into(),
            engine: EngineChoice::Both,
            params: ModelParams {
                lambda: 1.0,
                w0: 0.01,
                alpha: 0.0,
                beta: 0.1,
                sigma: 1.0,
                y_star: Point::d1(0.0),
                k: 10.0,
                p: Selection::Finite(1.0),
                regime: RegimeKind::NoCompetition,
                words: vec![word("A", 100.0, 100, Point::d1(5.0))],
                prune_threshold: None,
            },
            grid: Grid::d1(-20.0, 25.0, 1024).expect("preset grid"),
            t_max: 40.0,
            dt: 0.01,
            sample_every: 0.1,
            seeds: vec![0, 1, 2, 3, 4],
            snapshot_times: vec![0.1, 10.0, 40.0],
            perturb_cells: 0.0,
            backend: Backend::Fft,
            integrator: Integrator::Euler,
            note: "one word relaxing to its equilibrium; sigma = 1 is an assumed \
                   default and the 100 initial exemplars carry the equilibrium \
                   weight so the total weight starts at its limit"
                .into(),
            out_dir: None,
        }),
        "two-word-nocomp" => Ok(two_word_base(
            "two-word-nocomp",
            RegimeKind::NoCompetition,
            1.0,
            "two independent words sharing one preferred point: fast merger",
        )),
        "two-word-pure-p1" => Ok(two_word_base(
            "two-word-pure-p1",
            RegimeKind::PureCompetition,
            1.0,
            "pure competition at p = 1: slow merger",
        )),
        "two-word-pure-p15" => Ok(two_word_base(
            "two-word-pure-p15",
            RegimeKind::PureCompetition,
            1.5,
            "pure competition at p = 1.5: distinct words drifting away from \
             the preferred point",
        )),
        "two-word-discards-p1" => Ok(two_word_base(
            "two-word-discards-p1",
            RegimeKind::CompetitionWithDiscards,
            1.0,
            "competition with discards at p = 1: stable distinct words",
        )),
        "validate-regime2" => {
            let mut sc = two_word_base(
                "validate-regime2",
                RegimeKind::CompetitionWithDiscards,
                1.0,
                "short two-word discards run used as the base of the \
                 exemplar-vs-field convergence study",
            );
            sc.engine = EngineChoice::Both;
            sc.t_max = 10.0;
            sc.sample_every = 0.25;
            sc.snapshot_times = vec![];
            sc.seeds = vec![0, 1, 2, 3, 4];
            Ok(sc)
        }
        "2d-five-words" => {
            let names = ["A", "B", "C", "D", "E"];
            let words = (0..5)
                .map(|i| {
                    let c = -5.0 + 5.0 * i as f64;
                    word(names[i], 1000.0, 50, Point::d2(c, c))
                })
                .collect();
            Ok(Scenario {
                name: "2d-five-words".into(),
                engine: EngineChoice::Field,
                params: ModelParams {
                    lambda: 1.0,
                    w0: 1e-3,
                    alpha: 0.0,
                    beta: 0.1,
                    sigma: 1.0,
                    y_star: Point::d2(0.0, 0.0),
                    k: 10.0,
                    p: Selection::Finite(1.0),
                    regime: RegimeKind::CompetitionWithDiscards,
                    words,
                    prune_threshold: Some(1e-4),
                },
                grid: Grid::d2([-20.0, -20.0], [25.0, 25.0], [128, 128]).expect("preset grid"),
                t_max: 200.0,
                dt: 0.02,
                sample_every: 1.0,
                seeds: vec![0],
                snapshot_times: vec![10.0, 50.0, 100.0, 200.0],
                perturb_cells: 1.0,
                backend: Backend::Fft,
                integrator: Integrator::Euler,
                note: "five words on a diagonal in two phonetic dimensions under \
                       competition with discards; initial peaks get a random \
                       sub-cell offset to break the exact diagonal symmetry"
                    .into(),
                out_dir: None,
            })
        }
        other => Err(Error::config(
            "preset",
            format!(
                "unknown preset `{other}`; available: {}",
                PRESET_NAMES.join(", ")
            ),
        )),
    }
}

pub static PRESET_NAMES: &[&str] = &[
    "single-1d",
    "two-word-nocomp",
    "two-word-pure-p1",
    "two-word-pure-p15",
    "two-word-discards-p1",
    "validate-regime2",
    "2d-five-words",
];

/// One line of the convergence study: the deviation between stochastic
/// and field trajectories at a given production rate.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub nu: f64,
    pub word: usize,
    /// Median over seeds of the sup over sample times of the distance
    /// between the exemplar and field means.
    pub median_mean_dev: f64,
    /// Same for the dispersions.
    pub median_disp_dev: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Per-word trajectories extracted from an interleaved diagnostics series.
fn split_by_word(series: &[DiagnosticsRow], n_words: usize) -> Vec<Vec<&DiagnosticsRow>> {
    let mut out = vec![Vec::new(); n_words];
    for row in series {
        out[row.word].push(row);
    }
    out
}

/// Run the exemplar model at each production rate in `nu_list` (with
/// `w0 = 1/nu`, keeping the weight influx fixed) against the matching
/// field solution, and report per-word deviation medians over seeds.
pub fn convergence_study(
    base: &Scenario,
    nu_list: &[f64],
    seeds: &[u64],
) -> Result<Vec<ConvergenceRow>> {
    base.validate()?;
    if nu_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("nu_list", "production rates must be ascending"));
    }
    if seeds.is_empty() {
        return Err(Error::config("seeds", "at least one seed is required"));
    }
    let n_words = base.params.words.len();
    let mut out = Vec::new();
    for &nu in nu_list {
        let mut params = base.params.clone();
        params.w0 = 1.0 / nu;
        for w in &mut params.words {
            w.nu = nu;
        }
        // With w0 = 1/nu the initial mass per word is count/nu, so the
        // early mean relaxation runs at rate beta * mu / M0 = beta * nu
        // / count, far stiffer than the decay rate. Resolve it, or the
        // field reference itself carries an O(dt * rate) transient error
        // that grows with nu and masks the stochastic convergence.
        let transient_rate = params
            .words
            .iter()
            .map(|w| params.beta * w.mu(params.w0) / (w.init.count as f64 * params.w0))
            .fold(0.0f64, f64::max);
        let dt_raw = if transient_rate > 0.0 {
            base.dt.min(0.01 / transient_rate)
        } else {
            base.dt
        };
        // exact divisor of the sampling interval so the sample times of
        // the two engines line up
        let dt = base.sample_every / (base.sample_every / dt_raw).ceil();
        let mut field = FieldState::new(&params, &base.field_config(base.seeds[0]))?;
        let field_run = field.run(base.t_max, dt, base.sample_every, &[])?;
        let field_words = split_by_word(&field_run.series, n_words);

        let mut mean_devs = vec![Vec::new(); n_words];
        let mut disp_devs = vec![Vec::new(); n_words];
        for &seed in seeds {
            let mut sim = SimState::new(params.clone(), seed)?;
            let ex_run = sim.run(base.t_max, base.sample_every, &[]);
            let ex_words = split_by_word(&ex_run.series, n_words);
            for w in 0..n_words {
                let mut mean_dev = 0.0f64;
                let mut disp_dev = 0.0f64;
                for (fe, ex) in field_words[w].iter().zip(&ex_words[w]) {
                    debug_assert!((fe.t - ex.t).abs() < 1e-9 * (1.0 + fe.t.abs()));
                    mean_dev = mean_dev.max(fe.mean.dist(&ex.mean));
                    disp_dev = disp_dev.max((fe.dispersion - ex.dispersion).abs());
                }
                mean_devs[w].push(mean_dev);
                disp_devs[w].push(disp_dev);
            }
        }
        for w in 0..n_words {
            out.push(ConvergenceRow {
                nu,
                word: w,
                median_mean_dev: median(mean_devs[w].clone()),
                median_disp_dev: median(disp_devs[w].clone()),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MergerVerdict {
    Merged,
    DistinctStable,
    DistinctDrifting,
}

impl std::fmt::Display for MergerVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MergerVerdict::Merged => "Merged",
            MergerVerdict::DistinctStable => "DistinctStable",
            MergerVerdict::DistinctDrifting => "DistinctDrifting",
        })
    }
}

/// The numbers behind a verdict, reported alongside it.
#[derive(Debug, Clone, Serialize)]
pub struct OutcomeEvidence {
    /// Terminal mean distance of the least-resolved word pair (the pair
    /// whose separation clears its threshold by the smallest margin).
    pub terminal_separation: f64,
    /// The threshold that pair was held to.
    pub theta_sep: f64,
    /// Magnitude of the joint-mean drift over the terminal window.
    pub drift_rate: f64,
    pub theta_drift: f64,
    pub window: f64,
}

pub const DEFAULT_THETA_DRIFT: f64 = 1e-3;

/// Classify a finished multi-word run as merged, stably distinct, or
/// distinct but drifting.
///
/// Merged means some pair of words is unresolvable at the end: their
/// mean separation falls below `theta_sep`, which defaults per pair to
/// the sum of the two terminal dispersions. (A max- or average-based
/// threshold misreads unequal clusters — a narrow word riding the
/// shoulder of a broad one is plainly resolvable even when the broad
/// cloud alone spans the gap.) Otherwise the joint weighted mean over
/// the final `window` time units decides between drifting and stable at
/// `theta_drift` (phonetic units per unit time).
pub fn classify_outcome(
    series: &[DiagnosticsRow],
    window: f64,
    theta_sep: Option<f64>,
    theta_drift: f64,
) -> Result<(MergerVerdict, OutcomeEvidence)> {
    if series.is_empty() {
        return Err(Error::InsufficientData { got: 0.0, need: window });
    }
    let n_words = series.iter().map(|r| r.word).max().unwrap() + 1;
    if n_words < 2 {
        return Err(Error::config("series", "need at least two words to classify"));
    }
    let t0 = series.iter().map(|r| r.t).fold(f64::INFINITY, f64::min);
    let t1 = series.iter().map(|r| r.t).fold(f64::NEG_INFINITY, f64::max);
    if t1 - t0 < window {
        return Err(Error::InsufficientData { got: t1 - t0, need: window });
    }

    let terminal: Vec<&DiagnosticsRow> = series
        .iter()
        .filter(|r| (r.t - t1).abs() <= 1e-9 * (1.0 + t1.abs()))
        .collect();
    // Per-pair resolvability; the evidence reports the pair closest to
    // (or furthest into) violation.
    let mut separation = f64::INFINITY;
    let mut pair_theta = 0.0;
    let mut min_margin = f64::INFINITY;
    for (i, a) in terminal.iter().enumerate() {
        for b in &terminal[i + 1..] {
            let dist = a.mean.dist(&b.mean);
            let theta = theta_sep.unwrap_or(a.dispersion + b.dispersion);
            if dist - theta < min_margin {
                min_margin = dist - theta;
                separation = dist;
                pair_theta = theta;
            }
        }
    }
    let theta_sep = pair_theta;

    // joint weighted mean per sample time over the terminal window
    let mut by_time: std::collections::BTreeMap<u64, (f64, Point, f64)> =
        std::collections::BTreeMap::new();
    let dim = series[0].mean.dim;
    for r in series.iter().filter(|r| r.t >= t1 - window) {
        let key = r.t.to_bits();
        let e = by_time.entry(key).or_insert((r.t, Point::zero(dim), 0.0));
        e.1 = e.1.add(&r.mean.scale(r.total_weight));
        e.2 += r.total_weight;
    }
    let pts: Vec<(f64, Point)> = by_time
        .values()
        .filter(|(_, _, w)| *w > 0.0)
        .map(|(t, m, w)| (*t, m.scale(1.0 / w)))
        .collect();
    let drift_rate = if pts.len() < 2 {
        0.0
    } else {
        // least-squares slope of each coordinate against time
        let n = pts.len() as f64;
        let tbar: f64 = pts.iter().map(|(t, _)| t).sum::<f64>() / n;
        let denom: f64 = pts.iter().map(|(t, _)| (t - tbar).powi(2)).sum();
        let mut slope = Point::zero(dim);
        for (t, m) in &pts {
            slope = slope.add(&m.scale((t - tbar) / denom));
        }
        slope.norm()
    };

    let verdict = if min_margin < 0.0 {
        MergerVerdict::Merged
    } else if drift_rate > theta_drift {
        MergerVerdict::DistinctDrifting
    } else {
        MergerVerdict::DistinctStable
    };
    Ok((
        verdict,
        OutcomeEvidence {
            terminal_separation: separation,
            theta_sep,
            drift_rate,
            theta_drift,
            window,
        },
    ))
}
