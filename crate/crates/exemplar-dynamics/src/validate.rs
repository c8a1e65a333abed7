//! Built-in invariant suite: fast self-checks of the numerical machinery,
//! runnable from the command line and from the test suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::categorize::{assignment_probabilities, smoothed_density_at, SmoothingKernel};
use crate::engine::{Engine, ExemplarEngine, FieldEngine};
use crate::error::Result;
use crate::exemplar::WordStore;
use crate::field::{Backend, ConvPlan, DiscreteKernel, FieldConfig, FieldState, Grid};
use crate::output::series_csv;
use crate::params::Selection;
use crate::point::Point;
use crate::scenarios::preset;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

/// Discrete smoothing and production kernels carry exactly unit mass, and
/// convolution with them preserves the mass of a field away from the
/// boundary.
fn kernel_mass() -> CheckResult {
    let grid = Grid::d1(-20.0, 25.0, 1024).expect("grid");
    let h = grid.axis(0).spacing();
    let mut worst = 0.0f64;
    for kernel in [
        DiscreteKernel::gaussian(&grid, 1.0),
        DiscreteKernel::exponential(&grid, 10.0),
    ] {
        let mass: f64 = kernel.values.iter().sum::<f64>() * h;
        worst = worst.max((mass - 1.0).abs());
    }
    // mass preservation under convolution of an interior bump
    let kernel = DiscreteKernel::exponential(&grid, 10.0);
    let plan = ConvPlan::new(&grid, kernel.radius, Backend::Fft);
    let prepared = plan.prepare(&kernel);
    let field: Vec<f64> = (0..grid.len())
        .map(|i| (-(grid.coord(0, i) - 2.5).powi(2) / 8.0).exp())
        .collect();
    let smoothed = plan.convolve(&plan.forward(&field), &prepared);
    let before = grid.integrate(&field);
    let after = grid.integrate(&smoothed);
    worst = worst.max((after - before).abs() / before);
    check(
        "kernel-mass",
        worst < 1e-10,
        format!("worst relative mass defect {worst:.3e} (tolerance 1e-10)"),
    )
}

/// Assignment fractions sum to one for any densities and any selection
/// parameter.
fn assignment_normalization() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n = rng.gen_range(2..6);
        let s: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.1) {
                    0.0
                } else {
                    10f64.powf(rng.gen_range(-30.0..3.0))
                }
            })
            .collect();
        for p in [
            Selection::Finite(0.0),
            Selection::Finite(1.0),
            Selection::Finite(1.5),
            Selection::Infinite,
        ] {
            let f = assignment_probabilities(&s, p);
            let total: f64 = f.iter().sum();
            worst = worst.max((total - 1.0).abs());
            if f.iter().any(|v| *v < 0.0) {
                worst = f64::INFINITY;
            }
        }
    }
    check(
        "assignment-normalization",
        worst < 1e-12,
        format!("worst |sum f - 1| = {worst:.3e} over 2000 random cases (tolerance 1e-12)"),
    )
}

/// Stored weights decay exactly exponentially without per-step updates.
fn lazy_weight_decay() -> CheckResult {
    let lambda = 0.7;
    let w0 = 0.01;
    let mut store = WordStore::new(0, lambda, w0, None, 0.0);
    store.insert(Point::d1(1.0), 0.0);
    store.insert(Point::d1(2.0), 0.5);
    let mut worst = 0.0f64;
    for t in [0.5, 1.0, 10.0, 100.0] {
        let expect = w0 * (-lambda * t).exp() + w0 * (-lambda * (t - 0.5)).exp();
        let got = store.total_weight(t);
        worst = worst.max((got - expect).abs() / expect);
    }
    check(
        "lazy-weight-decay",
        worst < 1e-12,
        format!("worst relative error {worst:.3e} vs closed-form decay (tolerance 1e-12)"),
    )
}

/// The production field of a live word integrates to its weight influx
/// rate mu. Measured through one Euler step of a single no-competition
/// word: M1 = M0 + dt (integral of P - lambda M0).
fn production_mass() -> CheckResult {
    let sc = preset("single-1d").expect("preset");
    let mut params = sc.params.clone();
    params.alpha = 0.15; // exercise the general production path
    let cfg = FieldConfig::new(sc.grid.clone());
    let mut state = FieldState::new(&params, &cfg).expect("field state");
    let m0 = state.mass(0);
    let dt = 1e-3;
    state.step(dt).expect("step");
    let m1 = state.mass(0);
    let p_integral = (m1 - m0) / dt + params.lambda * m0;
    let mu = params.mu(0);
    let err = (p_integral - mu).abs() / mu;
    check(
        "production-mass",
        err < 1e-3,
        format!("|integral P - mu| / mu = {err:.3e} (tolerance 1e-3)"),
    )
}

/// Densities stay nonnegative at every explicit step, including under
/// competition with discards.
fn nonnegativity() -> CheckResult {
    let sc = preset("two-word-discards-p1").expect("preset");
    let cfg = FieldConfig::new(sc.grid.clone());
    let mut state = FieldState::new(&sc.params, &cfg).expect("field state");
    let mut min_seen = f64::INFINITY;
    for _ in 0..50 {
        state.step(sc.dt).expect("step");
        for w in 0..sc.params.words.len() {
            min_seen = min_seen.min(state.density(w).iter().cloned().fold(f64::INFINITY, f64::min));
        }
    }
    check(
        "nonnegativity",
        min_seen >= 0.0,
        format!("minimum nodal density over 50 steps = {min_seen:.3e} (must be >= 0)"),
    )
}

/// The fast evaluation paths agree with direct summation: the exemplar
/// store's indexed density query against the kernel sum over all
/// exemplars, and the spectral convolution against the nested-loop sum.
fn fast_vs_direct() -> CheckResult {
    // exemplar store index vs direct sum
    let kernel = SmoothingKernel::new(10.0, 1);
    let mut store = WordStore::new(0, 1.0, 0.01, Some(&kernel), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for i in 0..400 {
        let t = i as f64 * 0.01;
        store.insert(Point::d1(rng.gen_range(-8.0..8.0)), t);
    }
    let t = 4.0;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let y = Point::d1(rng.gen_range(-10.0..10.0));
        let fast = store.smoothed_density(&kernel, &y, t);
        let direct = smoothed_density_at(store.iter_weighted(t), &kernel, &y);
        worst = worst.max((fast - direct).abs() / direct.max(1e-300));
    }
    // spectral vs direct convolution
    let grid = Grid::d1(-20.0, 25.0, 512).expect("grid");
    let dkernel = DiscreteKernel::gaussian(&grid, 1.0);
    let field: Vec<f64> = (0..grid.len())
        .map(|i| (-(grid.coord(0, i) - 5.0).powi(2) / 2.0).exp())
        .collect();
    let fft_plan = ConvPlan::new(&grid, dkernel.radius, Backend::Fft);
    let via_fft = fft_plan.convolve(&fft_plan.forward(&field), &fft_plan.prepare(&dkernel));
    let direct_plan = ConvPlan::new(&grid, dkernel.radius, Backend::Direct);
    let via_direct =
        direct_plan.convolve(&direct_plan.forward(&field), &direct_plan.prepare(&dkernel));
    let scale = via_direct.iter().cloned().fold(0.0f64, f64::max);
    for (a, b) in via_fft.iter().zip(&via_direct) {
        worst = worst.max((a - b).abs() / scale);
    }
    check(
        "fast-vs-direct",
        worst < 1e-8,
        format!("worst relative deviation {worst:.3e} (tolerance 1e-8)"),
    )
}

/// Both engines reproduce a run byte-identically from the same seed.
fn determinism() -> CheckResult {
    let mut sc = preset("single-1d").expect("preset");
    sc.t_max = 2.0;
    sc.sample_every = 0.5;
    let names: Vec<String> = sc.params.words.iter().map(|w| w.name.clone()).collect();
    let mut ok = true;
    let mut detail = String::new();
    for engine in [&ExemplarEngine as &dyn Engine, &FieldEngine] {
        let a = engine.run(&sc, 7).map(|o| series_csv(&o.series, &names, 1));
        let b = engine.run(&sc, 7).map(|o| series_csv(&o.series, &names, 1));
        let same = matches!((&a, &b), (Ok(x), Ok(y)) if x == y);
        ok &= same;
        detail.push_str(&format!(
            "{} rerun {}; ",
            engine.name(),
            if same { "byte-identical" } else { "DIFFERS" }
        ));
    }
    check("determinism", ok, detail.trim_end_matches("; ").to_string())
}

/// Run every check. Always returns the full list, pass or fail.
pub fn run_all() -> Result<Vec<CheckResult>> {
    Ok(vec![
        kernel_mass(),
        assignment_normalization(),
        lazy_weight_decay(),
        production_mass(),
        nonnegativity(),
        fast_vs_direct(),
        determinism(),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_invariant_checks_pass() {
        for result in run_all().unwrap() {
            assert!(result.passed, "{}: {}", result.name, result.detail);
        }
    }
}
