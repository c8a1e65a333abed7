use serde::{Deserialize, Serialize};

/// A point in phonetic space, one or two real coordinates.
///
/// Stored as a fixed pair so that values are `Copy`; in one dimension the
/// second coordinate is identically zero and drops out of all norms and
/// sums. The dimension itself is a property of the simulation (carried by
/// `ModelParams`), not of individual points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub coords: [f64; 2],
    pub dim: usize,
}

impl Point {
    pub fn d1(x: f64) -> Self {
        Point {
            coords: [x, 0.0],
            dim: 1,
        }
    }

    pub fn d2(x: f64, y: f64) -> Self {
        Point {
            coords: [x, y],
            dim: 2,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Point {
            coords: [0.0, 0.0],
            dim,
        }
    }

    pub fn from_slice(c: &[f64]) -> Self {
        match c {
            [x] => Point::d1(*x),
            [x, y] => Point::d2(*x, *y),
            _ => panic!("phonetic points have 1 or 2 coordinates, got {}", c.len()),
        }
    }

    /// Active coordinates (length `dim`).
    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    /// First coordinate; the full value in one dimension.
    pub fn x(&self) -> f64 {
        self.coords[0]
    }

    pub fn is_finite(&self) -> bool {
        self.coords().iter().all(|c| c.is_finite())
    }

    pub fn add(&self, other: &Point) -> Point {
        debug_assert_eq!(self.dim, other.dim);
        Point {
            coords: [
                self.coords[0] + other.coords[0],
                self.coords[1] + other.coords[1],
            ],
            dim: self.dim,
        }
    }

    pub fn sub(&self, other: &Point) -> Point {
        debug_assert_eq!(self.dim, other.dim);
        Point {
            coords: [
                self.coords[0] - other.coords[0],
                self.coords[1] - other.coords[1],
            ],
            dim: self.dim,
        }
    }

    pub fn scale(&self, s: f64) -> Point {
        Point {
            coords: [self.coords[0] * s, self.coords[1] * s],
            dim: self.dim,
        }
    }

    /// Euclidean norm (reduces to |x| in one dimension).
    pub fn norm(&self) -> f64 {
        self.coords[0].hypot(self.coords[1])
    }

    pub fn norm_sq(&self) -> f64 {
        self.coords[0] * self.coords[0] + self.coords[1] * self.coords[1]
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.sub(other).norm()
    }
}
