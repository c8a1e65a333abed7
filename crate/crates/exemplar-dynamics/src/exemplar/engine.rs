use crate::categorize::{self, SmoothingKernel};
use crate::error::Result;
use crate::exemplar::store::WordStore;
use crate::params::ModelParams;
use crate::point::Point;
use crate::regime::{AssignmentOutcome, CategorizationRegime};
use crate::rng::{stream, streams};
use crate::stats::DiagnosticsRow;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Interval of simulated time between prune/maintenance passes.
const PRUNE_EVERY: f64 = 1.0;

/// Event counters for one run.
#[derive(Debug, Clone, Default)]
pub struct Counters {
    pub produced: u64,
    pub accepted: Vec<u64>,
    pub discarded: u64,
    /// Production events skipped because the source word had no live
    /// exemplars (possible only under heavy discarding).
    pub skipped_empty: u64,
}

/// One exemplar in a snapshot table.
#[derive(Debug, Clone)]
pub struct SnapshotRow {
    pub word: usize,
    pub position: Point,
    pub weight: f64,
}

/// Results of a completed run.
#[derive(Debug, Clone)]
pub struct ExemplarRun {
    pub series: Vec<DiagnosticsRow>,
    pub snapshots: Vec<(f64, Vec<SnapshotRow>)>,
}

/// Full state of one stochastic simulation.
pub struct SimState {
    pub t: f64,
    pub params: ModelParams,
    pub stores: Vec<WordStore>,
    pub counters: Counters,
    kernel: SmoothingKernel,
    regime: &'static dyn CategorizationRegime,
    rng_events: ChaCha8Rng,
    rng_production: ChaCha8Rng,
    rng_classify: ChaCha8Rng,
    nu_total: f64,
    seed: u64,
    next_prune: f64,
}

impl SimState {
    /// Build the initial state from validated parameters: each word gets
    /// its configured initial exemplars, all created at t = 0.
    pub fn new(params: ModelParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let kernel = SmoothingKernel::new(params.k, params.dim());
        let regime = params.regime.strategy();
        let index_for = regime.uses_densities().then_some(&kernel);
        let mut stores = Vec::with_capacity(params.words.len());
        for (w, wp) in params.words.iter().enumerate() {
            let mut store = WordStore::new(w, params.lambda, params.w0, index_for, params.y_star.x());
            for _ in 0..wp.init.count {
                store.insert(wp.init.at, 0.0);
            }
            stores.push(store);
        }
        let nu_total = params.words.iter().map(|w| w.nu).sum();
        let counters = Counters {
            accepted: vec![0; params.words.len()],
            ..Default::default()
        };
        Ok(SimState {
            t: 0.0,
            kernel,
            regime,
            stores,
            counters,
            nu_total,
            seed,
            next_prune: PRUNE_EVERY,
            rng_events: stream(seed, streams::EVENTS),
            rng_production: stream(seed, streams::PRODUCTION),
            rng_classify: stream(seed, streams::CLASSIFY),
            params,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Draw the waiting time to the next production event and its source
    /// word: exponential clock at the summed rate, source chosen
    /// proportional to its rate.
    pub fn next_event(&mut self) -> (f64, usize) {
        let u: f64 = self.rng_events.gen();
        let dt = -(1.0 - u).ln() / self.nu_total;
        let mut pick = self.rng_events.gen::<f64>() * self.nu_total;
        let mut source = self.params.words.len() - 1;
        for (w, wp) in self.params.words.iter().enumerate() {
            if pick < wp.nu {
                source = w;
                break;
            }
            pick -= wp.nu;
        }
        (dt, source)
    }

    /// Production rule: `y = z + alpha (mean - z) + beta (y* - z) + sigma eta`.
    pub fn produce(
        z: &Point,
        word_mean: &Point,
        params: &ModelParams,
        rng: &mut impl Rng,
    ) -> Point {
        let mut y = z
            .add(&word_mean.sub(z).scale(params.alpha))
            .add(&params.y_star.sub(z).scale(params.beta));
        for d in 0..params.dim() {
            let eta: f64 = rng.sample(StandardNormal);
            y.coords[d] += params.sigma * eta;
        }
        y
    }

    /// Process one production event at time `t` from `source`.
    pub fn apply_event(&mut self, t: f64, source: usize) {
        debug_assert!(t >= self.t);
        self.t = t;
        if self.stores[source].is_empty() {
            self.counters.skipped_empty += 1;
            return;
        }
        let z = self.stores[source]
            .sample(&mut self.rng_production)
            .expect("nonempty store")
            .position;
        let mean = self.stores[source]
            .mean(self.params.dim())
            .expect("nonempty store");
        let y = Self::produce(&z, &mean, &self.params, &mut self.rng_production);
        self.counters.produced += 1;

        let outcome = if self.regime.uses_densities() {
            let densities: Vec<f64> = self
                .stores
                .iter()
                .map(|s| s.smoothed_density(&self.kernel, &y, t))
                .collect();
            categorize::classify(source, &densities, self.regime, self.params.p, &mut self.rng_classify)
                .expect("source id is always in range")
        } else {
            AssignmentOutcome::Accept(source)
        };
        match outcome {
            AssignmentOutcome::Accept(w) => {
                self.stores[w].insert(y, t);
                self.counters.accepted[w] += 1;
            }
            AssignmentOutcome::Discard => self.counters.discarded += 1,
        }
    }

    /// Remove exemplars below the prune threshold and renew reference
    /// times.
    pub fn prune(&mut self, t: f64) -> usize {
        let th = self.params.prune_threshold();
        self.stores.iter_mut().map(|s| s.prune(t, th)).sum()
    }

    /// Diagnostics for every word at time `t`.
    pub fn diagnostics(&self, t: f64) -> Vec<DiagnosticsRow> {
        let dim = self.params.dim();
        self.stores
            .iter()
            .enumerate()
            .map(|(w, s)| DiagnosticsRow {
                t,
                word: w,
                mean: s.mean(dim).unwrap_or(Point {
                    coords: [f64::NAN, f64::NAN],
                    dim,
                }),
                dispersion: s.dispersion(dim).unwrap_or(f64::NAN),
                total_weight: s.total_weight(t),
                live_count: Some(s.len()),
                discard_count: Some(self.counters.discarded),
            })
            .collect()
    }

    pub fn snapshot(&self, t: f64) -> Vec<SnapshotRow> {
        let mut rows = Vec::new();
        for store in &self.stores {
            for (position, weight) in store.iter_weighted(t) {
                rows.push(SnapshotRow {
                    word: store.word,
                    position,
                    weight,
                });
            }
        }
        rows
    }

    /// Advance to `t_max`, sampling diagnostics every `sample_every` time
    /// units (including t = 0 and t = t_max) and taking exemplar
    /// snapshots at the requested times. Deterministic for a given seed.
    pub fn run(&mut self, t_max: f64, sample_every: f64, snapshot_times: &[f64]) -> ExemplarRun {
        assert!(t_max > 0.0 && sample_every > 0.0);
        let mut series = Vec::new();
        let mut snapshots = Vec::new();
        let mut next_sample = 0.0;
        let mut snaps: Vec<f64> = snapshot_times.to_vec();
        snaps.sort_by(|a, b| a.total_cmp(b));
        let mut snap_iter = snaps.into_iter().peekable();

        loop {
            let (dt, source) = self.next_event();
            let t_event = self.t + dt;
            let horizon = t_event.min(t_max);

            // checkpoints (samples, snapshots, prunes) up to the next event
            loop {
                let mut t_check = f64::INFINITY;
                if next_sample <= t_max {
                    t_check = t_check.min(next_sample);
                }
                if let Some(ts) = snap_iter.peek() {
                    t_check = t_check.min(*ts);
                }
                if self.next_prune <= t_max {
                    t_check = t_check.min(self.next_prune);
                }
                if t_check > horizon {
                    break;
                }
                if next_sample <= t_max && t_check == next_sample {
                    series.extend(self.diagnostics(next_sample));
                    next_sample += sample_every;
                }
                if snap_iter.peek() == Some(&t_check) {
                    snapshots.push((t_check, self.snapshot(t_check)));
                    snap_iter.next();
                }
                if self.next_prune <= t_max && t_check == self.next_prune {
                    self.prune(self.next_prune);
                    self.next_prune += PRUNE_EVERY;
                }
            }

            if t_event > t_max {
                self.t = t_max;
                break;
            }
            self.apply_event(t_event, source);
        }
        ExemplarRun { series, snapshots }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{InitSpec, Selection, WordParams};
    use crate::regime::RegimeKind;
    use rand_chacha::rand_core::SeedableRng;

    fn single_word(nu: f64) -> ModelParams {
        ModelParams {
            lambda: 1.0,
            w0: 1.0 / nu,
            alpha: 0.0,
            beta: 0.1,
            sigma: 1.0,
            y_star: Point::d1(0.0),
            k: 10.0,
            p: Selection::Finite(1.0),
            regime: RegimeKind::NoCompetition,
            words: vec![WordParams {
                name: "A".into(),
                nu,
                init: InitSpec {
                    count: 50,
                    at: Point::d1(5.0),
                },
            }],
            prune_threshold: None,
        }
    }

    fn two_words(regime: RegimeKind, nu: f64) -> ModelParams {
        let mut p = single_word(nu);
        p.regime = regime;
        p.words = vec![
            WordParams {
                name: "A".into(),
                nu,
                init: InitSpec {
                    count: 50,
                    at: Point::d1(5.0),
                },
            },
            WordParams {
                name: "B".into(),
                nu,
                init: InitSpec {
                    count: 50,
                    at: Point::d1(10.0),
                },
            },
        ];
        p
    }

    #[test]
    fn init_total_weight() {
        let sim = SimState::new(two_words(RegimeKind::CompetitionWithDiscards, 1000.0), 1).unwrap();
        let w0 = sim.params.w0;
        for s in &sim.stores {
            assert!((s.total_weight(0.0) - 50.0 * w0).abs() < 1e-12);
        }
        let single = SimState::new(single_word(100.0), 1).unwrap();
        assert!((single.stores[0].total_weight(0.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn next_event_exponential_mean() {
        let mut sim = SimState::new(single_word(100.0), 5).unwrap();
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += sim.next_event().0;
        }
        let mean = sum / n as f64;
        // exponential with mean 0.01, sd 0.01: 3 sigma band on the sample mean
        let band = 3.0 * 0.01 / (n as f64).sqrt();
        assert!((mean - 0.01).abs() < band, "mean = {mean}");
    }

    #[test]
    fn next_event_source_split() {
        let mut sim = SimState::new(two_words(RegimeKind::NoCompetition, 100.0), 6).unwrap();
        let n = 100_000;
        let mut a = 0u32;
        for _ in 0..n {
            if sim.next_event().1 == 0 {
                a += 1;
            }
        }
        let freq = a as f64 / n as f64;
        let se = (0.25 / n as f64).sqrt();
        assert!((freq - 0.5).abs() < 3.0 * se, "freq = {freq}");
    }

    #[test]
    fn next_event_zero_rate_word_never_selected() {
        let mut params = two_words(RegimeKind::NoCompetition, 100.0);
        // nu must be > 0 to validate; make B negligible instead of zero and
        // check the hard zero case through the sampling arithmetic.
        params.words[1].nu = f64::MIN_POSITIVE;
        let mut sim = SimState::new(params, 7).unwrap();
        for _ in 0..10_000 {
            assert_eq!(sim.next_event().1, 0);
        }
    }

    #[test]
    fn produce_deterministic_cases() {
        let params = single_word(100.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut p = params.clone();
        p.sigma = 0.0;
        p.alpha = 0.0;
        p.beta = 0.0;
        // identity (bypassing validation: produce only reads the fields)
        let y = SimState::produce(&Point::d1(7.0), &Point::d1(1.0), &p, &mut rng);
        assert_eq!(y.x(), 7.0);
        // full lenition
        p.beta = 1.0;
        let y = SimState::produce(&Point::d1(7.0), &Point::d1(1.0), &p, &mut rng);
        assert_eq!(y.x(), 0.0);
        // hand arithmetic: 10 + 0.2(5-10) + 0.1(0-10) = 8
        p.alpha = 0.2;
        p.beta = 0.1;
        let y = SimState::produce(&Point::d1(10.0), &Point::d1(5.0), &p, &mut rng);
        assert!((y.x() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn produce_noise_variance() {
        let mut p = single_word(100.0);
        p.alpha = 0.0;
        p.beta = 0.0;
        p.sigma = 1.0;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let z = Point::d1(2.0);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let d = SimState::produce(&z, &z, &p, &mut rng).x() - z.x();
            sum += d;
            sum2 += d * d;
        }
        let var = sum2 / n as f64 - (sum / n as f64).powi(2);
        assert!((var - 1.0).abs() < 0.02, "var = {var}");
    }

    #[test]
    fn apply_event_ledger_identity() {
        let mut sim = SimState::new(single_word(100.0), 11).unwrap();
        let before = sim.stores[0].total_weight(0.5);
        sim.apply_event(0.5, 0);
        let after = sim.stores[0].total_weight(0.5);
        assert!((after - before - sim.params.w0).abs() < 1e-12);
        assert_eq!(sim.stores[0].len(), 51);
    }

    #[test]
    fn no_competition_grows_source_store_only() {
        let mut sim = SimState::new(two_words(RegimeKind::NoCompetition, 100.0), 12).unwrap();
        sim.apply_event(0.1, 1);
        assert_eq!(sim.stores[0].len(), 50);
        assert_eq!(sim.stores[1].len(), 51);
        assert_eq!(sim.counters.discarded, 0);
    }

    #[test]
    fn run_with_no_events_reports_decayed_initial_state() {
        let mut params = single_word(100.0);
        params.words[0].nu = 1e-12; // first event essentially never arrives
        let mut sim = SimState::new(params, 13).unwrap();
        let out = sim.run(2.0, 1.0, &[]);
        let last = out.series.last().unwrap();
        assert!((last.t - 2.0).abs() < 1e-12);
        assert!((last.total_weight - 0.5 * (-2.0f64).exp()).abs() < 1e-12);
        assert!((last.mean.x() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn same_seed_reproduces_series_exactly() {
        let params = two_words(RegimeKind::CompetitionWithDiscards, 200.0);
        let mut a = SimState::new(params.clone(), 21).unwrap();
        let mut b = SimState::new(params, 21).unwrap();
        let ra = a.run(5.0, 0.5, &[5.0]);
        let rb = b.run(5.0, 0.5, &[5.0]);
        assert_eq!(ra.series.len(), rb.series.len());
        for (x, y) in ra.series.iter().zip(&rb.series) {
            assert_eq!(x, y);
        }
        assert_eq!(ra.snapshots[0].1.len(), rb.snapshots[0].1.len());
    }

    #[test]
    fn single_word_weight_equilibrates_near_one() {
        let mut sim = SimState::new(single_word(100.0), 30).unwrap();
        let out = sim.run(40.0, 0.5, &[]);
        let tail: Vec<f64> = out
            .series
            .iter()
            .filter(|r| r.t >= 10.0)
            .map(|r| r.total_weight)
            .collect();
        let avg = tail.iter().sum::<f64>() / tail.len() as f64;
        assert!((avg - 1.0).abs() < 0.1, "avg M = {avg}");
    }
}
