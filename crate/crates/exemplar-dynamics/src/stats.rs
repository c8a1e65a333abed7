//! Weighted statistics and the closed-form reference quantities for a
//! single word: total-weight relaxation, mean relaxation, and the
//! Gaussian equilibrium dispersion.

use crate::error::{Error, Result};
use crate::point::Point;
use serde::{Deserialize, Serialize};

/// Per-word diagnostics at one sample time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub word: usize,
    pub mean: Point,
    pub dispersion: f64,
    pub total_weight: f64,
    /// Live exemplar count (exemplar engine only).
    pub live_count: Option<usize>,
    /// Cumulative discarded productions (exemplar engine only).
    pub discard_count: Option<u64>,
}

/// Weighted mean position, componentwise.
pub fn weighted_mean(points: &[Point], weights: &[f64]) -> Result<Point> {
    assert_eq!(points.len(), weights.len());
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateStatistics);
    }
    let dim = points.first().map_or(1, |p| p.dim);
    let mut acc = Point::zero(dim);
    for (p, w) in points.iter().zip(weights) {
        acc = acc.add(&p.scale(*w));
    }
    Ok(acc.scale(1.0 / total))
}

/// Weighted standard deviation about the weighted mean. In two dimensions
/// this is the square root of the weighted mean squared Euclidean distance
/// to the mean, so it stays a single scalar.
pub fn dispersion(points: &[Point], weights: &[f64]) -> Result<f64> {
    let mean = weighted_mean(points, weights)?;
    let total: f64 = weights.iter().sum();
    let ss: f64 = points
        .iter()
        .zip(weights)
        .map(|(p, w)| w * p.sub(&mean).norm_sq())
        .sum();
    Ok((ss / total).max(0.0).sqrt())
}

/// Equilibrium dispersion `s = sigma / sqrt(1 - (1 - (alpha+beta))^2)`.
///
/// Only the sum `alpha + beta` enters; the formula diverges as the sum
/// approaches 0 or 2.
pub fn equilibrium_dispersion(sigma: f64, alpha: f64, beta: f64) -> Result<f64> {
    let ab = alpha + beta;
    let denom = 1.0 - (1.0 - ab) * (1.0 - ab);
    if !(ab > 0.0 && ab < 2.0) || denom <= 0.0 {
        return Err(Error::NoFiniteEquilibrium(ab));
    }
    Ok(sigma / denom.sqrt())
}

/// Exact solution of `dM/dt = -lambda M + mu`.
pub fn analytic_total_weight(t: f64, m0: f64, mu: f64, lambda: f64) -> f64 {
    let eq = mu / lambda;
    eq + (m0 - eq) * (-lambda * t).exp()
}

/// Exact relaxation of the word mean towards the preferred point once the
/// total weight has equilibrated (rate `lambda * beta`).
pub fn analytic_mean(t: f64, y0: &Point, y_star: &Point, lambda: f64, beta: f64) -> Point {
    let decay = (-lambda * beta * t).exp();
    y_star.add(&y0.sub(y_star).scale(decay))
}
