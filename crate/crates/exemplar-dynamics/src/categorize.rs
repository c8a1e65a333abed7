//! Kernel-smoothed densities and word assignment, shared by both engines.

use crate::error::{Error, Result};
use crate::params::Selection;
use crate::point::Point;
use crate::regime::{AssignmentOutcome, CategorizationRegime};

/// The exponential smoothing kernel `c_d(k) * exp(-k |y|)`, normalized to
/// unit integral over the simulation dimension: `c_1 = k/2`,
/// `c_2 = k^2 / (2 pi)`.
#[derive(Debug, Clone, Copy)]
pub struct SmoothingKernel {
    pub k: f64,
    pub dim: usize,
    pub norm_const: f64,
}

impl SmoothingKernel {
    pub fn new(k: f64, dim: usize) -> Self {
        assert!(k > 0.0, "kernel sharpness must be positive");
        let norm_const = match dim {
            1 => k / 2.0,
            2 => k * k / (2.0 * std::f64::consts::PI),
            _ => panic!("dimension must be 1 or 2"),
        };
        SmoothingKernel { k, dim, norm_const }
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.norm_const * (-self.k * r).exp()
    }
}

/// Smoothed density at `y` from a collection of weighted exemplars:
/// `sum_i c_d(k) w_i exp(-k |y - y_i|)`. An empty collection gives 0.
pub fn smoothed_density_at(
    exemplars: impl IntoIterator<Item = (Point, f64)>,
    kernel: &SmoothingKernel,
    y: &Point,
) -> f64 {
    exemplars
        .into_iter()
        .map(|(pos, w)| w * kernel.eval(y.dist(&pos)))
        .sum()
}

/// Per-word assignment probabilities `f_W = S_W^p / sum_V S_V^p`.
///
/// Degenerate inputs (all densities zero, possible by underflow far from
/// all mass) and `p = 0` both give the uniform vector. The infinite `p`
/// puts all probability on the argmax, ties split uniformly.
pub fn assignment_probabilities(s_values: &[f64], p: Selection) -> Vec<f64> {
    let mut out = vec![0.0; s_values.len()];
    assignment_probabilities_into(s_values, p, &mut out);
    out
}

/// Allocation-free variant of [`assignment_probabilities`] for hot loops
/// (the field engine evaluates it at every grid node).
pub fn assignment_probabilities_into(s_values: &[f64], p: Selection, out: &mut [f64]) {
    let n = s_values.len();
    assert!(n > 0);
    assert_eq!(out.len(), n);
    debug_assert!(s_values.iter().all(|s| *s >= 0.0));
    let max = s_values.iter().cloned().fold(0.0f64, f64::max);
    if max <= 0.0 {
        out.fill(1.0 / n as f64);
        return;
    }
    match p {
        Selection::Infinite => {
            let winners = s_values.iter().filter(|s| **s >= max).count();
            let share = 1.0 / winners as f64;
            for (o, s) in out.iter_mut().zip(s_values) {
                *o = if *s >= max { share } else { 0.0 };
            }
        }
        Selection::Finite(p) => {
            // Rescale by the max before exponentiating so the powers can
            // neither overflow nor all underflow.
            for (o, s) in out.iter_mut().zip(s_values) {
                *o = (s / max).powf(p);
            }
            let total: f64 = out.iter().sum();
            out.iter_mut().for_each(|o| *o /= total);
        }
    }
}

/// Classify a produced exemplar under the given regime. The densities
/// must all be evaluated at the exemplar's position.
pub fn classify(
    source: usize,
    densities: &[f64],
    regime: &dyn CategorizationRegime,
    p: Selection,
    rng: &mut dyn rand::RngCore,
) -> Result<AssignmentOutcome> {
    if source >= densities.len() {
        return Err(Error::config(
            "source",
            format!("unknown word id {source} (have {})", densities.len()),
        ));
    }
    if !regime.uses_densities() {
        return Ok(regime.classify(source, &[], rng));
    }
    let probs = assignment_probabilities(densities, p);
    Ok(regime.classify(source, &probs, rng))
}
