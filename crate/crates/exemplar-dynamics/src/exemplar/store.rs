//! Per-word exemplar storage with lazily decayed weights.
//!
//! Weights are never stored mutably: the decayed weight of exemplar `i`
//! at time `t` is `w0 * exp(-lambda (t - created_at_i))` by definition.
//! Internally everything is kept in units relative to a reference time
//! `t_ref` (`rel_i = w0 * exp(lambda (created_at_i - t_ref))`), so that a
//! single common factor `exp(-lambda (t - t_ref))` converts to absolute
//! weights. Relative weights grow along a run; maintenance passes renew
//! `t_ref` and rebuild all caches before they can overflow.

use crate::categorize::SmoothingKernel;
use crate::point::Point;

/// A single stored exemplar.
#[derive(Debug, Clone, Copy)]
pub struct Exemplar {
    pub position: Point,
    pub created_at: f64,
    pub word: usize,
}

/// Renew `t_ref` once the relative decay factor exceeds this.
const REL_RESCALE_LIMIT: f64 = 1e12;

/// Fenwick tree over position bins, for prefix sums of f64 values.
#[derive(Debug, Clone)]
struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick {
            tree: vec![0.0; n + 1],
        }
    }

    fn add(&mut self, mut i: usize, v: f64) {
        i += 1;
        while i < self.tree.len() {
            self.tree[i] += v;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over bins `0..=i`.
    fn prefix(&self, i: usize) -> f64 {
        let mut i = i + 1;
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }

    fn clear(&mut self) {
        self.tree.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Exact O(log B) smoothed-density queries in one dimension.
///
/// The exponential kernel splits across the query point:
/// `sum_i r_i e^{-k|y - y_i|} = e^{-ky} sum_{y_i <= y} r_i e^{k y_i}
///                            + e^{ky} sum_{y_i > y} r_i e^{-k y_i}`,
/// so two binned prefix sums answer any query, with only the members of
/// the query's own bin handled term by term. Positions outside the bin
/// range are clamped into the end bins, where the term-by-term path keeps
/// the result exact.
///
/// The upper sum is kept in a tree indexed by reversed bin number, so
/// both sums are true prefix sums of nonnegative terms. Computing the
/// upper sum as `total - prefix` instead would subtract totals dominated
/// by the (possibly astronomically larger) lower-sum terms and lose all
/// precision to cancellation.
#[derive(Debug, Clone)]
struct LineIndex {
    k: f64,
    lo: f64,
    inv_bin_w: f64,
    nbins: usize,
    /// `rel_i e^{k y_i}` by bin, queried for bins strictly below `y`.
    fen_below: Fenwick,
    /// `rel_i e^{-k y_i}` by reversed bin, queried for bins strictly
    /// above `y`.
    fen_above: Fenwick,
    members: Vec<Vec<(f64, f64)>>,
}

impl LineIndex {
    fn new(k: f64, center: f64) -> Self {
        // e^{k |y|} must stay finite across the range, with headroom for
        // relative weights up to REL_RESCALE_LIMIT
        let half_width = f64::min(60.0, 600.0 / k);
        let nbins = 8192usize;
        let lo = center - half_width;
        let bin_w = 2.0 * half_width / nbins as f64;
        LineIndex {
            k,
            lo,
            inv_bin_w: 1.0 / bin_w,
            nbins,
            fen_below: Fenwick::new(nbins),
            fen_above: Fenwick::new(nbins),
            members: vec![Vec::new(); nbins],
        }
    }

    fn bin(&self, y: f64) -> usize {
        let b = ((y - self.lo) * self.inv_bin_w).floor();
        (b.max(0.0) as usize).min(self.nbins - 1)
    }

    fn insert(&mut self, y: f64, rel: f64) {
        let b = self.bin(y);
        // A position clamped into an end bin can overflow one of the two
        // exponential factors. That factor is never consulted: a low
        // outlier sits in bin 0 and so is never in the strictly-above
        // set, a high outlier never in the strictly-below set. Storing 0
        // keeps the trees finite; the member list keeps the bin exact.
        let below = rel * (self.k * y).exp();
        let above = rel * (-self.k * y).exp();
        self.fen_below.add(b, if below.is_finite() { below } else { 0.0 });
        self.fen_above
            .add(self.nbins - 1 - b, if above.is_finite() { above } else { 0.0 });
        self.members[b].push((y, rel));
    }

    fn clear(&mut self) {
        self.fen_below.clear();
        self.fen_above.clear();
        self.members.iter_mut().for_each(Vec::clear);
    }

    /// `sum_i rel_i e^{-k |y - y_i|}` over all inserted exemplars.
    fn query(&self, y: f64) -> f64 {
        let b = self.bin(y);
        let mut s = 0.0;
        for &(yi, r) in &self.members[b] {
            s += r * (-self.k * (y - yi).abs()).exp();
        }
        if b > 0 {
            s += (-self.k * y).exp() * self.fen_below.prefix(b - 1);
        }
        if b < self.nbins - 1 {
            s += (self.k * y).exp() * self.fen_above.prefix(self.nbins - 2 - b);
        }
        s
    }
}

/// All live exemplars of one word, with incremental caches.
#[derive(Debug, Clone)]
pub struct WordStore {
    pub word: usize,
    lambda: f64,
    w0: f64,
    /// Live exemplars are `exemplars[start..]`, in creation order.
    exemplars: Vec<Exemplar>,
    start: usize,
    /// Relative weights, aligned with `exemplars`.
    rel: Vec<f64>,
    /// Prefix sums of `rel` for weight-proportional sampling.
    cum: Vec<f64>,
    t_ref: f64,
    /// Cached sums over live exemplars, in relative units.
    sum_rel: f64,
    sum_ry: [f64; 2],
    sum_ry2: f64,
    index: Option<LineIndex>,
}

impl WordStore {
    pub fn new(word: usize, lambda: f64, w0: f64, index_for: Option<&SmoothingKernel>, center: f64) -> Self {
        let index = index_for.and_then(|kern| {
            (kern.dim == 1).then(|| LineIndex::new(kern.k, center))
        });
        WordStore {
            word,
            lambda,
            w0,
            exemplars: Vec::new(),
            start: 0,
            rel: Vec::new(),
            cum: Vec::new(),
            t_ref: 0.0,
            sum_rel: 0.0,
            sum_ry: [0.0, 0.0],
            sum_ry2: 0.0,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.exemplars.len() - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn decay(&self, t: f64) -> f64 {
        (-self.lambda * (t - self.t_ref)).exp()
    }

    /// Decayed weight of one exemplar, straight from the definition.
    pub fn weight_at(&self, ex: &Exemplar, t: f64) -> f64 {
        self.w0 * (-self.lambda * (t - ex.created_at)).exp()
    }

    pub fn insert(&mut self, position: Point, t: f64) {
        debug_assert!(t >= self.t_ref);
        let rel = self.w0 * (self.lambda * (t - self.t_ref)).exp();
        if rel > REL_RESCALE_LIMIT * self.w0 {
            self.rebuild(t);
            return self.insert(position, t);
        }
        self.exemplars.push(Exemplar {
            position,
            created_at: t,
            word: self.word,
        });
        self.rel.push(rel);
        let base = self.cum.last().copied().unwrap_or(0.0);
        self.cum.push(base + rel);
        self.sum_rel += rel;
        self.sum_ry[0] += rel * position.coords[0];
        self.sum_ry[1] += rel * position.coords[1];
        self.sum_ry2 += rel * position.norm_sq();
        if let Some(idx) = &mut self.index {
            idx.insert(position.x(), rel);
        }
    }

    /// Drop exemplars whose decayed weight at `t` is below `threshold`,
    /// then renew `t_ref` and rebuild every cache. Weights decrease with
    /// age, so the removed set is always the oldest prefix.
    pub fn prune(&mut self, t: f64, threshold: f64) -> usize {
        let cut = self
            .exemplars
            .partition_point(|ex| self.w0 * (-self.lambda * (t - ex.created_at)).exp() < threshold);
        let removed = cut.saturating_sub(self.start);
        self.start = self.start.max(cut);
        self.rebuild(t);
        removed
    }

    /// Compact the live exemplars and recompute all caches with
    /// `t_ref = t`.
    fn rebuild(&mut self, t: f64) {
        self.exemplars.drain(..self.start);
        self.start = 0;
        self.t_ref = t;
        self.rel.clear();
        self.cum.clear();
        self.sum_rel = 0.0;
        self.sum_ry = [0.0, 0.0];
        self.sum_ry2 = 0.0;
        if let Some(idx) = &mut self.index {
            idx.clear();
        }
        let mut acc = 0.0;
        for i in 0..self.exemplars.len() {
            let ex = self.exemplars[i];
            let rel = self.w0 * (self.lambda * (ex.created_at - t)).exp();
            self.rel.push(rel);
            acc += rel;
            self.cum.push(acc);
            self.sum_rel += rel;
            self.sum_ry[0] += rel * ex.position.coords[0];
            self.sum_ry[1] += rel * ex.position.coords[1];
            self.sum_ry2 += rel * ex.position.norm_sq();
            if let Some(idx) = &mut self.index {
                idx.insert(ex.position.x(), rel);
            }
        }
    }

    /// Sample an exemplar with probability proportional to its decayed
    /// weight. All live weights share the common decay factor, so the
    /// relative weights sample identically at any time.
    pub fn sample(&self, rng: &mut impl rand::Rng) -> Option<&Exemplar> {
        if self.is_empty() {
            return None;
        }
        let base = if self.start > 0 {
            self.cum[self.start - 1]
        } else {
            0.0
        };
        let total = self.cum[self.cum.len() - 1] - base;
        let target = base + rng.gen::<f64>() * total;
        let i = self.cum.partition_point(|c| *c <= target);
        let i = i.min(self.cum.len() - 1).max(self.start);
        Some(&self.exemplars[i])
    }

    pub fn total_weight(&self, t: f64) -> f64 {
        self.sum_rel * self.decay(t)
    }

    /// Weighted mean of the live exemplars (time-independent: decay
    /// cancels in the ratio). `None` when empty.
    pub fn mean(&self, dim: usize) -> Option<Point> {
        if self.sum_rel <= 0.0 {
            return None;
        }
        let mut p = Point::zero(dim);
        p.coords[0] = self.sum_ry[0] / self.sum_rel;
        p.coords[1] = self.sum_ry[1] / self.sum_rel;
        Some(p)
    }

    pub fn dispersion(&self, dim: usize) -> Option<f64> {
        let mean = self.mean(dim)?;
        let var = self.sum_ry2 / self.sum_rel - mean.norm_sq();
        Some(var.max(0.0).sqrt())
    }

    /// Smoothed density at `y` and time `t` for the given kernel (the
    /// kernel's `k` must match the one the store was built with when a
    /// line index is present).
    pub fn smoothed_density(&self, kernel: &SmoothingKernel, y: &Point, t: f64) -> f64 {
        let rel_sum = match &self.index {
            Some(idx) => {
                debug_assert_eq!(idx.k, kernel.k);
                idx.query(y.x())
            }
            None => self
                .live()
                .map(|(ex, rel)| rel * (-kernel.k * y.dist(&ex.position)).exp())
                .sum(),
        };
        kernel.norm_const * rel_sum * self.decay(t)
    }

    fn live(&self) -> impl Iterator<Item = (&Exemplar, f64)> {
        self.exemplars[self.start..]
            .iter()
            .zip(self.rel[self.start..].iter().copied())
    }

    /// Live exemplars with their decayed weights at `t`.
    pub fn iter_weighted(&self, t: f64) -> impl Iterator<Item = (Point, f64)> + '_ {
        let d = self.decay(t);
        self.live().map(move |(ex, rel)| (ex.position, rel * d))
    }

    pub fn iter_exemplars(&self) -> impl Iterator<Item = &Exemplar> {
        self.exemplars[self.start..].iter()
    }

    /// Brute-force recomputation of the cached sums, for invariant
    /// checks.
    pub fn recompute_caches(&self, t: f64) -> (f64, [f64; 2], f64) {
        let mut sum = 0.0;
        let mut sy = [0.0, 0.0];
        let mut sy2 = 0.0;
        for ex in self.iter_exemplars() {
            let w = self.weight_at(ex, t);
            sum += w;
            sy[0] += w * ex.position.coords[0];
            sy[1] += w * ex.position.coords[1];
            sy2 += w * ex.position.norm_sq();
        }
        (sum, sy, sy2)
    }
}
