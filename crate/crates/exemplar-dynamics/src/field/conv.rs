//! Discrete convolution of grid fields with sampled kernels.
//!
//! Both backends evaluate the same sum `out_i = h^D sum_m K_m v_{i-m}`
//! (zero outside the grid): a direct summation reference and an FFT path
//! using zero-padded linear convolution. Kernels are renormalized so that
//! `h^D sum K = 1` exactly; sampling the continuous kernel alone would
//! bias total mass (noticeably so for the exponential kernel, whose cusp
//! the trapezoid rule resolves poorly).

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Fft,
    Direct,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::Fft => "fft",
            Backend::Direct => "direct",
        })
    }
}

impl std::str::FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fft" => Ok(Backend::Fft),
            "direct" => Ok(Backend::Direct),
            other => Err(format!("unknown backend '{other}' (expected fft or direct)")),
        }
    }
}

/// A kernel sampled at grid offsets `m in [-radius, radius]` per axis,
/// normalized so `cell_volume * sum(values) = 1`.
#[derive(Debug, Clone)]
pub struct DiscreteKernel {
    pub radius: [usize; 2],
    /// Row-major over (mx, my), size (2 rx + 1) * (2 ry + 1).
    pub values: Vec<f64>,
}

impl DiscreteKernel {
    fn build(grid: &Grid, radius: [usize; 2], f: impl Fn(f64, f64) -> f64) -> Self {
        let dim = grid.dim();
        let (rx, ry) = (radius[0], radius[1]);
        let hx = grid.axis(0).spacing();
        let hy = if dim == 2 { grid.axis(1).spacing() } else { 0.0 };
        let mut values = Vec::with_capacity((2 * rx + 1) * (2 * ry + 1));
        for mx in -(rx as isize)..=(rx as isize) {
            for my in -(ry as isize)..=(ry as isize) {
                values.push(f(mx as f64 * hx, my as f64 * hy));
            }
        }
        let total: f64 = values.iter().sum();
        let scale = 1.0 / (total * grid.cell_volume());
        values.iter_mut().for_each(|v| *v *= scale);
        DiscreteKernel { radius, values }
    }

    fn axis_radius(grid: &Grid, axis: usize, reach: f64) -> usize {
        let n = grid.axis(axis).n;
        ((reach / grid.axis(axis).spacing()).ceil() as usize).min(n - 1)
    }

    /// Gaussian density with standard deviation `sigma > 0` (isotropic in
    /// 2D), truncated where it falls below ~1e-16 of its peak.
    pub fn gaussian(grid: &Grid, sigma: f64) -> Self {
        assert!(sigma > 0.0);
        let mut radius = [0usize; 2];
        for a in 0..grid.dim() {
            radius[a] = Self::axis_radius(grid, a, 8.5 * sigma);
        }
        let inv = 1.0 / (2.0 * sigma * sigma);
        Self::build(grid, radius, |dx, dy| (-(dx * dx + dy * dy) * inv).exp())
    }

    /// Exponential kernel `exp(-k |y|)` (Euclidean norm in 2D).
    pub fn exponential(grid: &Grid, k: f64) -> Self {
        assert!(k > 0.0);
        let mut radius = [0usize; 2];
        for a in 0..grid.dim() {
            radius[a] = Self::axis_radius(grid, a, 42.0 / k);
        }
        Self::build(grid, radius, |dx, dy| (-k * dx.hypot(dy)).exp())
    }
}

/// Exact exponential smoothing on a 1D grid of spacing `h`:
/// `out_j = c * sum_i d^|i-j| v_i` with `d = exp(-k h)` and
/// `c = (1 - d) / (1 + d)`, so the discrete weights sum to 1 and the
/// result approximates `(k/2) exp(-k |y|)` smoothing with unit mass.
///
/// Computed by two recursive sweeps in O(n). Every output is a sum of
/// positive products, so the *relative* error stays small even where the
/// result underflows towards zero — unlike an FFT convolution, whose
/// absolute noise floor (~1e-16 of the peak) scrambles the deep tails.
/// Ratios of smoothed fields therefore remain meaningful far from all
/// mass, which is exactly where assignment fractions are evaluated on
/// production tails.
pub fn exponential_smooth_1d(values: &[f64], k: f64, h: f64) -> Vec<f64> {
    assert!(k > 0.0 && h > 0.0);
    let d = (-k * h).exp();
    let c = (1.0 - d) / (1.0 + d);
    let n = values.len();
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    for j in 0..n {
        acc = values[j] + d * acc;
        out[j] = acc;
    }
    acc = 0.0;
    for j in (0..n).rev() {
        acc = values[j] + d * acc;
        out[j] = c * (out[j] + acc - values[j]);
    }
    out
}

/// A field ready for convolution: either its forward FFT (computed once,
/// reusable against several kernels) or a plain copy for the direct path.
pub enum Spectrum {
    Fft(Vec<Complex<f64>>),
    Plain(Vec<f64>),
}

/// A kernel preprocessed for a specific plan.
pub enum PreparedKernel {
    Fft(Vec<Complex<f64>>),
    Direct(DiscreteKernel),
}

/// Per-grid convolution plan: padded transform sizes and FFT instances
/// shared by every kernel and field on the grid.
pub struct ConvPlan {
    backend: Backend,
    dim: usize,
    n: [usize; 2],
    l: [usize; 2],
    cell_vol: f64,
    fwd: [Option<Arc<dyn Fft<f64>>>; 2],
    inv: [Option<Arc<dyn Fft<f64>>>; 2],
}

fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

impl ConvPlan {
    /// `max_radius` must bound the radius of every kernel later prepared
    /// against this plan (it sets the zero padding).
    pub fn new(grid: &Grid, max_radius: [usize; 2], backend: Backend) -> Self {
        let dim = grid.dim();
        let n = grid.shape();
        let mut l = [1usize; 2];
        let mut fwd: [Option<Arc<dyn Fft<f64>>>; 2] = [None, None];
        let mut inv: [Option<Arc<dyn Fft<f64>>>; 2] = [None, None];
        if backend == Backend::Fft {
            let mut planner = FftPlanner::new();
            for a in 0..dim {
                l[a] = next_pow2(n[a] + 2 * max_radius[a]);
                fwd[a] = Some(planner.plan_fft_forward(l[a]));
                inv[a] = Some(planner.plan_fft_inverse(l[a]));
            }
        }
        ConvPlan {
            backend,
            dim,
            n,
            l,
            cell_vol: grid.cell_volume(),
            fwd,
            inv,
        }
    }

    fn padded_len(&self) -> usize {
        self.l[0] * self.l[1]
    }

    /// In-place FFT over both axes of a padded row-major buffer.
    fn fft2(&self, data: &mut [Complex<f64>], inverse: bool) {
        let plans = if inverse { &self.inv } else { &self.fwd };
        let (lx, ly) = (self.l[0], self.l[1]);
        if ly == 1 {
            plans[0].as_ref().unwrap().process(data);
            return;
        }
        // axis 1: contiguous rows
        plans[1].as_ref().unwrap().process(data);
        // axis 0: strided columns, via gather/scatter
        let plan_x = plans[0].as_ref().unwrap();
        let mut col = vec![Complex::new(0.0, 0.0); lx];
        for iy in 0..ly {
            for ix in 0..lx {
                col[ix] = data[ix * ly + iy];
            }
            plan_x.process(&mut col);
            for ix in 0..lx {
                data[ix * ly + iy] = col[ix];
            }
        }
    }

    pub fn prepare(&self, kernel: &DiscreteKernel) -> PreparedKernel {
        match self.backend {
            Backend::Direct => PreparedKernel::Direct(kernel.clone()),
            Backend::Fft => {
                let (lx, ly) = (self.l[0], self.l[1]);
                let (rx, ry) = (kernel.radius[0], kernel.radius[1]);
                assert!(2 * rx < lx && (self.dim == 1 || 2 * ry < ly));
                let mut buf = vec![Complex::new(0.0, 0.0); self.padded_len()];
                let wy = 2 * ry + 1;
                for (i, v) in kernel.values.iter().enumerate() {
                    let mx = (i / wy) as isize - rx as isize;
                    let my = (i % wy) as isize - ry as isize;
                    let px = mx.rem_euclid(lx as isize) as usize;
                    let py = my.rem_euclid(ly as isize) as usize;
                    buf[px * ly + py] = Complex::new(*v, 0.0);
                }
                self.fft2(&mut buf, false);
                PreparedKernel::Fft(buf)
            }
        }
    }

    pub fn forward(&self, values: &[f64]) -> Spectrum {
        debug_assert_eq!(values.len(), self.n[0] * self.n[1]);
        match self.backend {
            Backend::Direct => Spectrum::Plain(values.to_vec()),
            Backend::Fft => {
                let (ly, ny) = (self.l[1], self.n[1]);
                let mut buf = vec![Complex::new(0.0, 0.0); self.padded_len()];
                for ix in 0..self.n[0] {
                    for iy in 0..ny {
                        buf[ix * ly + iy] = Complex::new(values[ix * ny + iy], 0.0);
                    }
                }
                self.fft2(&mut buf, false);
                Spectrum::Fft(buf)
            }
        }
    }

    /// `out_i = cell_volume * sum_m K_m v_{i-m}`, zero outside the grid.
    pub fn convolve(&self, spectrum: &Spectrum, kernel: &PreparedKernel) -> Vec<f64> {
        match (spectrum, kernel) {
            (Spectrum::Fft(f), PreparedKernel::Fft(k)) => {
                let mut buf: Vec<Complex<f64>> =
                    f.iter().zip(k.iter()).map(|(a, b)| a * b).collect();
                self.fft2(&mut buf, true);
                let scale = self.cell_vol / self.padded_len() as f64;
                let (ly, ny) = (self.l[1], self.n[1]);
                let mut out = vec![0.0; self.n[0] * ny];
                for ix in 0..self.n[0] {
                    for iy in 0..ny {
                        out[ix * ny + iy] = buf[ix * ly + iy].re * scale;
                    }
                }
                out
            }
            (Spectrum::Plain(v), PreparedKernel::Direct(k)) => self.convolve_direct(v, k),
            _ => panic!("spectrum and kernel prepared for different backends"),
        }
    }

    fn convolve_direct(&self, v: &[f64], k: &DiscreteKernel) -> Vec<f64> {
        let (nx, ny) = (self.n[0], self.n[1]);
        let (rx, ry) = (k.radius[0] as isize, k.radius[1] as isize);
        let wy = (2 * ry + 1) as usize;
        let mut out = vec![0.0; nx * ny];
        for ix in 0..nx as isize {
            for iy in 0..ny as isize {
                let mut s = 0.0;
                for mx in -rx..=rx {
                    let jx = ix - mx;
                    if jx < 0 || jx >= nx as isize {
                        continue;
                    }
                    for my in -ry..=ry {
                        let jy = iy - my;
                        if jy < 0 || jy >= ny as isize {
                            continue;
                        }
                        let kv = k.values[((mx + rx) as usize) * wy + (my + ry) as usize];
                        s += kv * v[jx as usize * ny + jy as usize];
                    }
                }
                out[(ix as usize) * ny + iy as usize] = s * self.cell_vol;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv_both(grid: &Grid, kernel: &DiscreteKernel, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let fast = ConvPlan::new(grid, kernel.radius, Backend::Fft);
        let slow = ConvPlan::new(grid, kernel.radius, Backend::Direct);
        let a = fast.convolve(&fast.forward(v), &fast.prepare(kernel));
        let b = slow.convolve(&slow.forward(v), &slow.prepare(kernel));
        (a, b)
    }

    #[test]
    fn kernels_have_unit_discrete_mass() {
        let g = Grid::d1(-10.0, 10.0, 257).unwrap();
        for k in [DiscreteKernel::gaussian(&g, 0.8), DiscreteKernel::exponential(&g, 4.0)] {
            let s: f64 = k.values.iter().sum();
            assert!((s * g.cell_volume() - 1.0).abs() < 1e-12);
        }
        let g2 = Grid::d2([-8.0, -8.0], [8.0, 8.0], [65, 65]).unwrap();
        for k in [DiscreteKernel::gaussian(&g2, 1.0), DiscreteKernel::exponential(&g2, 3.0)] {
            let s: f64 = k.values.iter().sum();
            assert!((s * g2.cell_volume() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fft_matches_direct_1d() {
        let g = Grid::d1(-5.0, 5.0, 200).unwrap();
        let kern = DiscreteKernel::gaussian(&g, 0.5);
        let v: Vec<f64> = (0..g.len())
            .map(|i| (-(g.coord(0, i) - 1.0).powi(2)).exp() + 0.1 * (i as f64 * 0.7).sin().abs())
            .collect();
        let (a, b) = conv_both(&g, &kern, &v);
        let scale = b.iter().cloned().fold(0.0f64, f64::max);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12 * scale, "{x} vs {y}");
        }
    }

    #[test]
    fn fft_matches_direct_2d() {
        let g = Grid::d2([-3.0, -3.0], [3.0, 3.0], [40, 36]).unwrap();
        let kern = DiscreteKernel::exponential(&g, 2.0);
        let v: Vec<f64> = (0..g.len())
            .map(|i| {
                let p = g.point(i);
                (-(p.norm_sq())).exp() + 0.05 * ((i % 7) as f64)
            })
            .collect();
        let (a, b) = conv_both(&g, &kern, &v);
        let scale = b.iter().cloned().fold(0.0f64, f64::max);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12 * scale, "{x} vs {y}");
        }
    }

    #[test]
    fn convolution_preserves_interior_mass() {
        // mass well away from the boundary: integral unchanged to 1e-10
        let g = Grid::d1(-20.0, 20.0, 1001).unwrap();
        let mut v = vec![0.0; g.len()];
        for i in 0..g.len() {
            let y = g.coord(0, i);
            v[i] = (-(y * y) / 2.0).exp();
        }
        let kern = DiscreteKernel::exponential(&g, 10.0);
        let plan = ConvPlan::new(&g, kern.radius, Backend::Fft);
        let out = plan.convolve(&plan.forward(&v), &plan.prepare(&kern));
        let before = g.integrate(&v);
        let after = g.integrate(&out);
        assert!((after - before).abs() < 1e-10 * before, "{before} vs {after}");
    }

    #[test]
    fn delta_input_reproduces_kernel_profile() {
        let g = Grid::d1(-10.0, 10.0, 401).unwrap();
        let h = g.cell_volume();
        let mut v = vec![0.0; g.len()];
        let i0 = 200; // y = 0
        v[i0] = 3.0 / h; // point mass 3
        let kern = DiscreteKernel::gaussian(&g, 1.0);
        let plan = ConvPlan::new(&g, kern.radius, Backend::Fft);
        let out = plan.convolve(&plan.forward(&v), &plan.prepare(&kern));
        // analytic Gaussian, up to the discrete-normalization factor
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        for (i, o) in out.iter().enumerate() {
            let y = g.coord(0, i);
            let want = 3.0 * norm * (-(y * y) / 2.0).exp();
            assert!((o - want).abs() < 1e-4, "y={y}: {o} vs {want}");
        }
    }

    #[test]
    fn recursive_smoothing_matches_brute_force() {
        let g = Grid::d1(-4.0, 4.0, 129).unwrap();
        let h = g.cell_volume();
        let k = 3.0;
        let v: Vec<f64> = (0..g.len())
            .map(|i| (-(g.coord(0, i) - 0.7).powi(2)).exp() + 0.2 * (i as f64 * 1.3).sin().abs())
            .collect();
        let out = exponential_smooth_1d(&v, k, h);
        let d = (-k * h).exp();
        let c = (1.0 - d) / (1.0 + d);
        for j in 0..v.len() {
            let want: f64 = v
                .iter()
                .enumerate()
                .map(|(i, x)| c * d.powi((i as i32 - j as i32).abs()) * x)
                .sum();
            assert!((out[j] - want).abs() < 1e-12 * want.max(1.0), "{j}: {} vs {want}", out[j]);
        }
    }

    #[test]
    fn recursive_smoothing_keeps_tail_ratios_exact() {
        // two point masses; deep in the left tail the closer mass must
        // dominate by its exact exponential factor, however small both
        // smoothed values have become
        let g = Grid::d1(-20.0, 25.0, 1024).unwrap();
        let h = g.cell_volume();
        let k = 10.0;
        let mut a = vec![0.0; g.len()];
        let mut b = vec![0.0; g.len()];
        a[600] = 1.0;
        b[700] = 1.0;
        let sa = exponential_smooth_1d(&a, k, h);
        let sb = exponential_smooth_1d(&b, k, h);
        let d = (-k * h).exp();
        let want_ratio = d.powi(100); // b is 100 cells further away
        for j in [0usize, 50, 200, 400] {
            assert!(sa[j] > 0.0, "smoothed value underflowed to zero at {j}");
            let ratio = sb[j] / sa[j];
            assert!(
                (ratio / want_ratio - 1.0).abs() < 1e-9,
                "{j}: ratio {ratio:e} vs {want_ratio:e}"
            );
        }
    }

    #[test]
    fn recursive_smoothing_preserves_interior_mass() {
        let g = Grid::d1(-20.0, 20.0, 1001).unwrap();
        let v: Vec<f64> = (0..g.len())
            .map(|i| (-(g.coord(0, i).powi(2)) / 2.0).exp())
            .collect();
        let out = exponential_smooth_1d(&v, 10.0, g.cell_volume());
        let before = g.integrate(&v);
        let after = g.integrate(&out);
        assert!((after - before).abs() < 1e-10 * before, "{before} vs {after}");
    }

    #[test]
    fn constant_field_stays_constant_in_the_interior() {
        let g = Grid::d1(0.0, 30.0, 601).unwrap();
        let v = vec![2.5; g.len()];
        let kern = DiscreteKernel::exponential(&g, 3.0);
        let plan = ConvPlan::new(&g, kern.radius, Backend::Fft);
        let out = plan.convolve(&plan.forward(&v), &plan.prepare(&kern));
        // away from the zero-extension boundary the kernel sees a constant
        let reach = 42.0 / 3.0;
        for i in 0..g.len() {
            let y = g.coord(0, i);
            if y > reach && y < 30.0 - reach {
                assert!((out[i] - 2.5).abs() < 1e-10, "y={y}: {}", out[i]);
            }
        }
    }
}
