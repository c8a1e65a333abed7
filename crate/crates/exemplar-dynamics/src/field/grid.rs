//! Uniform rectangular grids with trapezoid quadrature and multilinear
//! interpolation. One or two axes; 2D data is row-major with the first
//! axis outermost.

use crate::error::{Error, Result};
use crate::point::Point;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.n - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::config("grid", "dimension must be 1 or 2"));
        }
        for (i, ax) in axes.iter().enumerate() {
            if !(ax.min.is_finite() && ax.max.is_finite() && ax.min < ax.max) {
                return Err(Error::config(
                    format!("grid.axis[{i}]"),
                    "need finite min < max",
                ));
            }
            if ax.n < 16 {
                return Err(Error::config(
                    format!("grid.axis[{i}].n"),
                    "need at least 16 points per axis",
                ));
            }
        }
        Ok(Grid { axes })
    }

    pub fn d1(min: f64, max: f64, n: usize) -> Result<Self> {
        Grid::new(vec![Axis { min, max, n }])
    }

    pub fn d2(min: [f64; 2], max: [f64; 2], n: [usize; 2]) -> Result<Self> {
        Grid::new(vec![
            Axis { min: min[0], max: max[0], n: n[0] },
            Axis { min: min[1], max: max[1], n: n[1] },
        ])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, i: usize) -> &Axis {
        &self.axes[i]
    }

    /// Total number of grid nodes.
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Per-axis node counts, padded with 1 for the unused axis.
    pub fn shape(&self) -> [usize; 2] {
        match self.axes.len() {
            1 => [self.axes[0].n, 1],
            _ => [self.axes[0].n, self.axes[1].n],
        }
    }

    /// Volume of one grid cell (product of spacings).
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing()).product()
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        let ax = &self.axes[axis];
        ax.min + i as f64 * ax.spacing()
    }

    pub fn flat(&self, ix: usize, iy: usize) -> usize {
        match self.axes.len() {
            1 => ix,
            _ => ix * self.axes[1].n + iy,
        }
    }

    /// Coordinates of the node with the given flat index.
    pub fn point(&self, flat: usize) -> Point {
        match self.axes.len() {
            1 => Point::d1(self.coord(0, flat)),
            _ => {
                let ny = self.axes[1].n;
                Point::d2(self.coord(0, flat / ny), self.coord(1, flat % ny))
            }
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..self.dim()).all(|a| {
            let ax = &self.axes[a];
            p.coords[a] >= ax.min && p.coords[a] <= ax.max
        })
    }

    /// Trapezoid quadrature weight of a node, excluding the cell volume
    /// (1 in the interior, halved per boundary axis).
    fn quad_factor(&self, flat: usize) -> f64 {
        let [nx, ny] = self.shape();
        let (ix, iy) = (flat / ny, flat % ny);
        let mut w = if ix == 0 || ix == nx - 1 { 0.5 } else { 1.0 };
        if self.dim() == 2 && (iy == 0 || iy == ny - 1) {
            w *= 0.5;
        }
        w
    }

    /// Trapezoid-rule integral of nodal values over the domain.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        let s: f64 = values
            .iter()
            .enumerate()
            .map(|(i, v)| self.quad_factor(i) * v)
            .sum();
        s * self.cell_volume()
    }

    /// Trapezoid-rule first moment `integral of y * values`.
    pub fn moment1(&self, values: &[f64]) -> Point {
        let mut m = Point::zero(self.dim());
        for (i, v) in values.iter().enumerate() {
            let p = self.point(i);
            let w = self.quad_factor(i) * v;
            m.coords[0] += w * p.coords[0];
            m.coords[1] += w * p.coords[1];
        }
        m.scale(self.cell_volume())
    }

    /// Trapezoid-rule integral of `|y - center|^2 * values`.
    pub fn second_central(&self, values: &[f64], center: &Point) -> f64 {
        let s: f64 = values
            .iter()
            .enumerate()
            .map(|(i, v)| self.quad_factor(i) * v * self.point(i).sub(center).norm_sq())
            .sum();
        s * self.cell_volume()
    }

    /// Multilinear interpolation of nodal values at `p`; zero outside the
    /// domain.
    pub fn interpolate(&self, values: &[f64], p: &Point) -> f64 {
        let mut idx = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for a in 0..self.dim() {
            let ax = &self.axes[a];
            let x = (p.coords[a] - ax.min) / ax.spacing();
            if x < 0.0 || x > (ax.n - 1) as f64 {
                return 0.0;
            }
            let i = (x.floor() as usize).min(ax.n - 2);
            idx[a] = i;
            frac[a] = x - i as f64;
        }
        match self.dim() {
            1 => {
                let (i, f) = (idx[0], frac[0]);
                values[i] * (1.0 - f) + values[i + 1] * f
            }
            _ => {
                let (ix, iy) = (idx[0], idx[1]);
                let (fx, fy) = (frac[0], frac[1]);
                let v00 = values[self.flat(ix, iy)];
                let v01 = values[self.flat(ix, iy + 1)];
                let v10 = values[self.flat(ix + 1, iy)];
                let v11 = values[self.flat(ix + 1, iy + 1)];
                (v00 * (1.0 - fy) + v01 * fy) * (1.0 - fx) + (v10 * (1.0 - fy) + v11 * fy) * fx
            }
        }
    }

    /// Deposit a point mass onto the surrounding nodes with multilinear
    /// weights, preserving total mass and mean exactly for interior
    /// points. Values are densities (mass per cell volume).
    pub fn deposit(&self, values: &mut [f64], p: &Point, mass: f64) -> Result<()> {
        if !self.contains(p) {
            return Err(Error::config(
                "init",
                format!("initial mass at {:?} lies outside the grid", &p.coords[..self.dim()]),
            ));
        }
        let mut idx = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for a in 0..self.dim() {
            let ax = &self.axes[a];
            let x = (p.coords[a] - ax.min) / ax.spacing();
            let i = (x.floor() as usize).min(ax.n - 2);
            idx[a] = i;
            frac[a] = x - i as f64;
        }
        let d = mass / self.cell_volume();
        match self.dim() {
            1 => {
                values[idx[0]] += d * (1.0 - frac[0]);
                values[idx[0] + 1] += d * frac[0];
            }
            _ => {
                let (ix, iy) = (idx[0], idx[1]);
                let (fx, fy) = (frac[0], frac[1]);
                values[self.flat(ix, iy)] += d * (1.0 - fx) * (1.0 - fy);
                values[self.flat(ix, iy + 1)] += d * (1.0 - fx) * fy;
                values[self.flat(ix + 1, iy)] += d * fx * (1.0 - fy);
                values[self.flat(ix + 1, iy + 1)] += d * fx * fy;
            }
        }
        Ok(())
    }
}
