//! Empirical execution-time distributions and the order statistics used to
//! estimate batch latency.
//!
//! A histogram is a piecewise-linear CDF over a sequence of knots. Bins of
//! positive width spread their mass uniformly; zero-width bins (two equal
//! consecutive edges) are atoms. Atoms are how constant execution times are
//! represented without losing the exact value.
//!
//! The maximum of independent draws is computed by evaluating every input
//! CDF on a common refined grid and multiplying (or powering) the values.
//! The subset-sum form of the same distribution is kept as an independent
//! cross-check and is limited to ten variables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of equal-width bins for per-application histograms.
pub const DEFAULT_BINS: usize = 64;

/// Every input interval of a max-order grid is split at least this many times.
pub const GRID_REFINE: usize = 4;

/// The refined grid is made at least this fine overall, so that a one- or
/// two-bin input does not get a visibly biased maximum.
pub const MIN_GRID_INTERVALS: usize = 256;

/// Largest number of variables the subset-sum evaluator accepts.
pub const MAX_SUBSET_VARS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHistogram", into = "RawHistogram")]
pub struct EmpiricalHistogram {
    edges: Vec<f64>,
    counts: Vec<f64>,
    total: f64,
    /// Normalized cumulative mass at each edge index (length = edges.len()).
    cum: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawHistogram {
    edges: Vec<f64>,
    counts: Vec<f64>,
}

impl TryFrom<RawHistogram> for EmpiricalHistogram {
    type Error = Error;
    fn try_from(raw: RawHistogram) -> Result<Self> {
        EmpiricalHistogram::new(raw.edges, raw.counts)
    }
}

impl From<EmpiricalHistogram> for RawHistogram {
    fn from(h: EmpiricalHistogram) -> Self {
        RawHistogram {
            edges: h.edges,
            counts: h.counts,
        }
    }
}

impl EmpiricalHistogram {
    /// Builds a histogram from `edges` (length B+1) and per-bin `counts`
    /// (length B). Edges must be finite, non-negative and non-decreasing;
    /// a repeated edge makes a zero-width bin holding an atom.
    pub fn new(edges: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.len() != counts.len() + 1 {
            return Err(Error::invalid(format!(
                "histogram needs B+1 edges for B counts (got {} edges, {} counts)",
                edges.len(),
                counts.len()
            )));
        }
        if edges.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(Error::invalid("histogram edges must be finite and >= 0"));
        }
        if edges.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("histogram edges must be non-decreasing"));
        }
        if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::invalid("histogram counts must be finite and >= 0"));
        }
        let total: f64 = counts.iter().sum();
        let mut cum = Vec::with_capacity(edges.len());
        cum.push(0.0);
        let mut acc = 0.0;
        for c in &counts {
            acc += c;
            cum.push(if total > 0.0 { acc / total } else { 0.0 });
        }
        if total > 0.0 {
            *cum.last_mut().unwrap() = 1.0;
        }
        Ok(Self {
            edges,
            counts,
            total,
            cum,
        })
    }

    /// All mass at `value`.
    pub fn point_mass(value: f64) -> Result<Self> {
        Self::new(vec![value, value], vec![1.0])
    }

    /// Uniform on `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if hi <= lo {
            return Err(Error::invalid("uniform needs lo < hi"));
        }
        Self::new(vec![lo, hi], vec![1.0])
    }

    /// Equal-width histogram of `samples` over their observed range. A
    /// sample set with a single distinct value becomes a point mass.
    pub fn from_samples(samples: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::invalid("bin count must be positive"));
        }
        if samples.is_empty() {
            return Err(Error::ColdStart);
        }
        if samples.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::invalid("samples must be finite and >= 0"));
        }
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            return Self::new(vec![lo, lo], vec![samples.len() as f64]);
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins)
            .map(|i| if i == bins { hi } else { lo + width * i as f64 })
            .collect();
        let mut counts = vec![0.0; bins];
        for &s in samples {
            let idx = (((s - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1.0;
        }
        Self::new(edges, counts)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total <= 0.0
    }

    /// Normalized probability mass of bin `i`.
    pub fn mass(&self, i: usize) -> f64 {
        self.cum[i + 1] - self.cum[i]
    }

    pub fn min(&self) -> f64 {
        self.edges[0]
    }

    pub fn max(&self) -> f64 {
        *self.edges.last().unwrap()
    }

    fn require_samples(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::ColdStart)
        } else {
            Ok(())
        }
    }

    /// `P(L <= l)`, linear inside bins, right-continuous at atoms.
    pub fn cdf(&self, l: f64) -> Result<f64> {
        self.require_samples()?;
        Ok(self.cdf_unchecked(l))
    }

    fn cdf_unchecked(&self, l: f64) -> f64 {
        if l < self.edges[0] {
            return 0.0;
        }
        let j = self.edges.partition_point(|&e| e <= l) - 1;
        if j + 1 >= self.edges.len() {
            return 1.0;
        }
        let (lo, hi) = (self.edges[j], self.edges[j + 1]);
        self.cum[j] + (self.cum[j + 1] - self.cum[j]) * (l - lo) / (hi - lo)
    }

    /// `P(L < l)`.
    fn cdf_left_unchecked(&self, l: f64) -> f64 {
        let j = self.edges.partition_point(|&e| e < l);
        if j == 0 {
            return 0.0;
        }
        if j >= self.edges.len() {
            return 1.0;
        }
        let (lo, hi) = (self.edges[j - 1], self.edges[j]);
        self.cum[j - 1] + (self.cum[j] - self.cum[j - 1]) * (l - lo) / (hi - lo)
    }

    /// Density of the continuous part at `l` (atoms contribute nothing).
    pub fn density(&self, l: f64) -> f64 {
        if self.is_empty() || l < self.edges[0] || l >= self.max() {
            return 0.0;
        }
        let j = self.edges.partition_point(|&e| e <= l) - 1;
        let w = self.edges[j + 1] - self.edges[j];
        if w > 0.0 {
            self.mass(j) / w
        } else {
            0.0
        }
    }

    /// Smallest `l` with `cdf(l) >= q`, interpolated inside the crossing bin.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        self.require_samples()?;
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::invalid(format!("quantile level {q} outside [0, 1]")));
        }
        let j = self.cum.partition_point(|&c| c < q);
        if j == 0 {
            return Ok(self.edges[0]);
        }
        let j = j.min(self.edges.len() - 1);
        let (c0, c1) = (self.cum[j - 1], self.cum[j]);
        let (lo, hi) = (self.edges[j - 1], self.edges[j]);
        if c1 <= c0 || hi <= lo {
            return Ok(hi);
        }
        Ok(lo + (q - c0) / (c1 - c0) * (hi - lo))
    }

    pub fn mean(&self) -> Result<f64> {
        self.require_samples()?;
        Ok(self
            .edges
            .windows(2)
            .enumerate()
            .map(|(i, w)| self.mass(i) * 0.5 * (w[0] + w[1]))
            .sum())
    }

    /// Image of the distribution under `l -> offset + scale * l`.
    pub fn map_affine(&self, offset: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !offset.is_finite() {
            return Err(Error::invalid(
                "affine map needs scale > 0 and finite offset",
            ));
        }
        Self::new(
            self.edges.iter().map(|e| offset + scale * e).collect(),
            self.counts.clone(),
        )
    }

    /// Re-bins into `bins` equal-width bins over the same support, keeping
    /// the CDF exact at the new edges. A single-point support stays a point
    /// mass.
    pub fn rebin(&self, bins: usize) -> Result<Self> {
        self.require_samples()?;
        if bins == 0 {
            return Err(Error::invalid("bin count must be positive"));
        }
        let (lo, hi) = (self.min(), self.max());
        if hi <= lo {
            return Self::point_mass(lo);
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins)
            .map(|i| if i == bins { hi } else { lo + width * i as f64 })
            .collect();
        let cdfs: Vec<f64> = edges
            .iter()
            .enumerate()
            .map(|(i, &e)| if i == 0 { 0.0 } else { self.cdf_unchecked(e) })
            .collect();
        let counts = cdfs.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
        Self::new(edges, counts)
    }

    fn is_atom_at(&self, x: f64) -> bool {
        self.edges
            .windows(2)
            .enumerate()
            .any(|(i, w)| w[0] == x && w[1] == x && self.counts[i] > 0.0)
    }

    fn eval(&self, k: Knot) -> f64 {
        if k.left {
            self.cdf_left_unchecked(k.x)
        } else {
            self.cdf_unchecked(k.x)
        }
    }
}

/// A grid point at which CDFs are evaluated. Atoms need both the left limit
/// and the right value, so they appear twice.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Knot {
    x: f64,
    left: bool,
}

/// Union of all input edges, each interval split `refine` times (or more,
/// see [`MIN_GRID_INTERVALS`]).
fn knot_grid(hists: &[&EmpiricalHistogram], refine: usize) -> Vec<Knot> {
    let mut xs: Vec<f64> = hists.iter().flat_map(|h| h.edges.iter().copied()).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let intervals = xs.len().saturating_sub(1).max(1);
    let refine = if refine <= 1 {
        1
    } else {
        refine.max(MIN_GRID_INTERVALS.div_ceil(intervals))
    };
    let mut knots = Vec::with_capacity(xs.len() * refine + 8);
    for (i, &x) in xs.iter().enumerate() {
        if hists.iter().any(|h| h.is_atom_at(x)) {
            knots.push(Knot { x, left: true });
        }
        knots.push(Knot { x, left: false });
        if let Some(&next) = xs.get(i + 1) {
            for r in 1..refine {
                knots.push(Knot {
                    x: x + (next - x) * r as f64 / refine as f64,
                    left: false,
                });
            }
        }
    }
    knots
}

/// Histogram whose CDF takes `values` at `knots`; leading and trailing
/// zero-mass bins are trimmed.
fn from_knot_cdf(knots: &[Knot], values: &[f64]) -> Result<EmpiricalHistogram> {
    debug_assert_eq!(knots.len(), values.len());
    let mut edges: Vec<f64> = knots.iter().map(|k| k.x).collect();
    let mut counts: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
    if counts.is_empty() {
        // a lone knot: only possible for a single point support
        return EmpiricalHistogram::point_mass(edges[0]);
    }
    let first = counts.iter().position(|&c| c > 0.0);
    let last = counts.iter().rposition(|&c| c > 0.0);
    if let (Some(a), Some(b)) = (first, last) {
        counts = counts[a..=b].to_vec();
        edges = edges[a..=b + 1].to_vec();
    }
    EmpiricalHistogram::new(edges, counts)
}

fn require_all(hists: &[&EmpiricalHistogram]) -> Result<()> {
    if hists.is_empty() {
        return Err(Error::invalid("at least one distribution is required"));
    }
    if hists.iter().any(|h| h.is_empty()) {
        return Err(Error::ColdStart);
    }
    Ok(())
}

/// Distribution of the maximum of `k` i.i.d. draws: the CDF raised to the
/// k-th power on a refined grid.
pub fn max_order_iid(h: &EmpiricalHistogram, k: usize) -> Result<EmpiricalHistogram> {
    if k < 1 {
        return Err(Error::invalid("k must be >= 1"));
    }
    h.require_samples()?;
    if k == 1 {
        return Ok(h.clone());
    }
    let knots = knot_grid(&[h], GRID_REFINE);
    let values: Vec<f64> = knots.iter().map(|&kn| h.eval(kn).powi(k as i32)).collect();
    from_knot_cdf(&knots, &values)
}

/// Distribution of the maximum of independent, not necessarily identically
/// distributed variables: the product of their CDFs.
pub fn max_order_innid(hists: &[&EmpiricalHistogram]) -> Result<EmpiricalHistogram> {
    require_all(hists)?;
    if hists.len() == 1 {
        return Ok(hists[0].clone());
    }
    let knots = knot_grid(hists, GRID_REFINE);
    let values: Vec<f64> = knots
        .iter()
        .map(|&kn| hists.iter().map(|h| h.eval(kn)).product())
        .collect();
    from_knot_cdf(&knots, &values)
}

/// Same distribution as [`max_order_innid`], evaluated through the
/// alternating sum over all non-empty subsets `s` of the averaged CDF
/// `F^s = (1/|s|) sum_{i in s} F_i`:
///
/// `F_max = sum_s (-1)^(k-|s|) |s|^k / k! * (F^s)^k`
///
/// which is the antiderivative, per subset, of the density form
/// `k (F^s)^(k-1) f^s`.
pub fn max_order_innid_subsets(hists: &[&EmpiricalHistogram]) -> Result<EmpiricalHistogram> {
    require_all(hists)?;
    let k = hists.len();
    if k > MAX_SUBSET_VARS {
        return Err(Error::Capability(format!(
            "subset-sum evaluation is limited to {MAX_SUBSET_VARS} variables (got {k})"
        )));
    }
    let knots = knot_grid(hists, GRID_REFINE);
    let values: Vec<f64> = knots
        .iter()
        .map(|&kn| {
            let f: Vec<f64> = hists.iter().map(|h| h.eval(kn)).collect();
            subset_sum(k, |s| {
                let n = s.count_ones() as f64;
                let mean = indices(s).map(|i| f[i]).sum::<f64>() / n;
                mean.powi(k as i32)
            })
        })
        .collect();
    from_knot_cdf(&knots, &values)
}

/// Pointwise density of the maximum by the subset-sum formula, using the
/// averaged densities `f^s`. Atoms are ignored.
pub fn innid_density_subsets(hists: &[&EmpiricalHistogram], l: f64) -> Result<f64> {
    require_all(hists)?;
    let k = hists.len();
    if k > MAX_SUBSET_VARS {
        return Err(Error::Capability(format!(
            "subset-sum evaluation is limited to {MAX_SUBSET_VARS} variables (got {k})"
        )));
    }
    let cdfs: Vec<f64> = hists.iter().map(|h| h.cdf_unchecked(l)).collect();
    let pdfs: Vec<f64> = hists.iter().map(|h| h.density(l)).collect();
    Ok(subset_sum(k, |s| {
        let n = s.count_ones() as f64;
        let big_f = indices(s).map(|i| cdfs[i]).sum::<f64>() / n;
        let small_f = indices(s).map(|i| pdfs[i]).sum::<f64>() / n;
        k as f64 * big_f.powi(k as i32 - 1) * small_f
    }))
}

/// `sum_{s != {}} (-1)^(k-|s|) |s|^k / k! * term(s)` over bitmask subsets.
fn subset_sum(k: usize, mut term: impl FnMut(u32) -> f64) -> f64 {
    let factorial: f64 = (1..=k).map(|i| i as f64).product();
    let mut acc = 0.0;
    for s in 1u32..(1u32 << k) {
        let n = s.count_ones() as usize;
        let sign = if (k - n).is_multiple_of(2) { 1.0 } else { -1.0 };
        acc += sign * (n as f64).powi(k as i32) / factorial * term(s);
    }
    acc
}

fn indices(mask: u32) -> impl Iterator<Item = usize> {
    (0..32).filter(move |i| mask & (1 << i) != 0)
}

/// Weighted mixture of histograms, exact on the union of their edges.
pub fn mixture(hists: &[&EmpiricalHistogram], weights: &[f64]) -> Result<EmpiricalHistogram> {
    require_all(hists)?;
    if weights.len() != hists.len() {
        return Err(Error::invalid("one weight per histogram is required"));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::invalid("mixture weights must be finite and >= 0"));
    }
    let wsum: f64 = weights.iter().sum();
    if wsum <= 0.0 {
        return Err(Error::invalid("mixture weights must not all be zero"));
    }
    if hists.len() == 1 {
        return Ok(hists[0].clone());
    }
    let knots = knot_grid(hists, 1);
    let values: Vec<f64> = knots
        .iter()
        .map(|&kn| {
            hists
                .iter()
                .zip(weights)
                .map(|(h, w)| w / wsum * h.eval(kn))
                .sum()
        })
        .collect();
    from_knot_cdf(&knots, &values)
}

/// Maximum of `k` i.i.d. draws from the weighted mixture of `hists`.
pub fn max_order_mixture(
    hists: &[&EmpiricalHistogram],
    weights: &[f64],
    k: usize,
) -> Result<EmpiricalHistogram> {
    max_order_iid(&mixture(hists, weights)?, k)
}

/// Smallest sample value whose empirical CDF reaches `q`.
pub fn sample_quantile(samples: &[f64], q: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::ColdStart);
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(format!("quantile level {q} outside [0, 1]")));
    }
    if samples.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("samples must not be NaN"));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let rank = (q * xs.len() as f64).ceil() as usize;
    Ok(xs[rank.clamp(1, xs.len()) - 1])
}

/// Batch cost model `l_B = c0 + c1 * k * l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchCostCoefficients {
    pub c0: f64,
    pub c1: f64,
}

impl BatchCostCoefficients {
    pub fn new(c0: f64, c1: f64) -> Result<Self> {
        let c = Self { c0, c1 };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c0 >= 0.0 && self.c0.is_finite()) || !(self.c1 > 0.0 && self.c1.is_finite()) {
            return Err(Error::invalid(format!(
                "batch cost needs c0 >= 0 and c1 > 0 (got c0={}, c1={})",
                self.c0, self.c1
            )));
        }
        Ok(())
    }

    /// Duration of a batch of `k` requests padded to `longest_ms`.
    pub fn duration(&self, k: usize, longest_ms: f64) -> f64 {
        self.c0 + self.c1 * k as f64 * longest_ms
    }
}

impl Default for BatchCostCoefficients {
    fn default() -> Self {
        Self { c0: 0.0, c1: 1.0 }
    }
}

/// Distribution and expectation of a batch's duration for one batch size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchLatencyModel {
    pub batch_size: usize,
    pub pdf_hist: EmpiricalHistogram,
    pub expectation: f64,
}

impl BatchLatencyModel {
    /// Same model with the distribution re-binned to `bins` equal-width
    /// bins; the expectation is recomputed from the coarser histogram.
    pub fn coarsen(&self, bins: usize) -> Result<Self> {
        let pdf_hist = self.pdf_hist.rebin(bins)?;
        let expectation = pdf_hist.mean()?;
        Ok(Self {
            batch_size: self.batch_size,
            pdf_hist,
            expectation,
        })
    }
}

/// Maps the distribution of the batch maximum through the batch cost model.
pub fn batch_latency(
    dist_of_max: &EmpiricalHistogram,
    k: usize,
    coeffs: BatchCostCoefficients,
) -> Result<BatchLatencyModel> {
    if k < 1 {
        return Err(Error::invalid("batch size must be >= 1"));
    }
    coeffs.validate()?;
    let scale = coeffs.c1 * k as f64;
    let pdf_hist = dist_of_max.map_affine(coeffs.c0, scale)?;
    let expectation = coeffs.c0 + scale * dist_of_max.mean()?;
    Ok(BatchLatencyModel {
        batch_size: k,
        pdf_hist,
        expectation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cdf_single_bin() {
        let h = EmpiricalHistogram::new(vec![10.0, 20.0], vec![1.0]).unwrap();
        assert_eq!(h.cdf(20.0).unwrap(), 1.0);
        assert_eq!(h.cdf(15.0).unwrap(), 0.5);
        assert_eq!(h.cdf(10.0).unwrap(), 0.0);
        assert_eq!(h.cdf(5.0).unwrap(), 0.0);
        assert_eq!(h.cdf(25.0).unwrap(), 1.0);
    }

    #[test]
    fn cdf_two_bins() {
        let h = EmpiricalHistogram::new(vec![0.0, 10.0, 20.0], vec![3.0, 1.0]).unwrap();
        assert_eq!(h.cdf(10.0).unwrap(), 0.75);
    }

    #[test]
    fn empty_histogram_is_cold_start() {
        let h = EmpiricalHistogram::new(vec![0.0, 1.0], vec![0.0]).unwrap();
        assert!(matches!(h.cdf(0.5), Err(Error::ColdStart)));
        assert!(matches!(h.quantile(0.5), Err(Error::ColdStart)));
        assert!(matches!(max_order_iid(&h, 2), Err(Error::ColdStart)));
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(EmpiricalHistogram::new(vec![2.0, 1.0], vec![1.0]).is_err());
        assert!(EmpiricalHistogram::new(vec![-1.0, 1.0], vec![1.0]).is_err());
        assert!(EmpiricalHistogram::new(vec![0.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(EmpiricalHistogram::new(vec![0.0, 1.0], vec![-1.0]).is_err());
    }

    #[test]
    fn atom_cdf_is_right_continuous() {
        let h = EmpiricalHistogram::point_mass(10.0).unwrap();
        assert_eq!(h.cdf(9.999).unwrap(), 0.0);
        assert_eq!(h.cdf(10.0).unwrap(), 1.0);
        assert_eq!(h.cdf_left_unchecked(10.0), 0.0);
        assert_eq!(h.mean().unwrap(), 10.0);
    }

    #[test]
    fn quantiles() {
        let h = EmpiricalHistogram::point_mass(10.0).unwrap();
        assert_eq!(h.quantile(0.99).unwrap(), 10.0);
        let u = EmpiricalHistogram::uniform(0.0, 100.0).unwrap();
        assert_eq!(u.quantile(0.5).unwrap(), 50.0);
        let h = EmpiricalHistogram::new(vec![0.0, 10.0, 20.0], vec![99.0, 1.0]).unwrap();
        assert_eq!(h.quantile(0.99).unwrap(), 10.0);
        assert_eq!(h.quantile(0.0).unwrap(), 0.0);
        assert_eq!(h.quantile(1.0).unwrap(), 20.0);
        assert!(h.quantile(1.5).is_err());
    }

    #[test]
    fn sample_quantiles() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(sample_quantile(&xs, 0.99).unwrap(), 99.0);
        assert_eq!(sample_quantile(&xs, 1.0).unwrap(), 100.0);
        assert_eq!(sample_quantile(&xs, 0.0).unwrap(), 1.0);
        assert_eq!(sample_quantile(&[4.0, 1.0, 3.0], 0.5).unwrap(), 3.0);
        assert!(sample_quantile(&[], 0.5).is_err());
    }

    #[test]
    fn from_samples_constant_is_point_mass() {
        let h = EmpiricalHistogram::from_samples(&[7.0; 5], DEFAULT_BINS).unwrap();
        assert_eq!(h.bins(), 1);
        assert_eq!(h.min(), 7.0);
        assert_eq!(h.max(), 7.0);
        assert_eq!(h.total(), 5.0);
    }

    #[test]
    fn from_samples_bins_cover_range() {
        let xs: Vec<f64> = (0..=100).map(f64::from).collect();
        let h = EmpiricalHistogram::from_samples(&xs, 10).unwrap();
        assert_eq!(h.bins(), 10);
        assert_eq!(h.min(), 0.0);
        assert_eq!(h.max(), 100.0);
        assert_eq!(h.total(), 101.0);
        assert_eq!(h.counts()[9], 11.0);
    }

    #[test]
    fn max_of_one_is_identity() {
        let h = EmpiricalHistogram::new(vec![0.0, 1.0, 4.0], vec![2.0, 5.0]).unwrap();
        assert_eq!(max_order_iid(&h, 1).unwrap(), h);
        assert!(max_order_iid(&h, 0).is_err());
    }

    #[test]
    fn max_of_two_point_like_bins() {
        // two equal-mass narrow bins around 10 and 100
        let h = EmpiricalHistogram::new(vec![9.9, 10.0, 99.9, 100.0], vec![1.0, 0.0, 1.0]).unwrap();
        let m = max_order_iid(&h, 2).unwrap();
        assert!(close(m.cdf(10.0).unwrap(), 0.25, 1e-12));
        assert!(close(m.cdf(50.0).unwrap(), 0.25, 1e-12));
    }

    #[test]
    fn max_of_atoms() {
        let a = EmpiricalHistogram::point_mass(5.0).unwrap();
        let b = EmpiricalHistogram::point_mass(50.0).unwrap();
        let m = max_order_innid(&[&a, &b]).unwrap();
        assert_eq!(m.min(), 50.0);
        assert_eq!(m.max(), 50.0);
        assert_eq!(m.mean().unwrap(), 50.0);
        let s = max_order_innid_subsets(&[&a, &b]).unwrap();
        assert!(close(s.mean().unwrap(), 50.0, 1e-9));
    }

    #[test]
    fn innid_identical_inputs_match_iid() {
        let h = EmpiricalHistogram::new(vec![0.0, 3.0, 10.0], vec![1.0, 2.0]).unwrap();
        let a = max_order_innid(&[&h, &h]).unwrap();
        let b = max_order_iid(&h, 2).unwrap();
        assert_eq!(a.edges(), b.edges());
        for x in [0.5, 2.0, 3.0, 7.7, 9.99] {
            assert!(close(a.cdf(x).unwrap(), b.cdf(x).unwrap(), 1e-15));
        }
    }

    #[test]
    fn innid_input_errors() {
        assert!(max_order_innid(&[]).is_err());
        let h = EmpiricalHistogram::uniform(0.0, 1.0).unwrap();
        let many: Vec<&EmpiricalHistogram> = vec![&h; 11];
        assert!(matches!(
            max_order_innid_subsets(&many),
            Err(Error::Capability(_))
        ));
        assert!(max_order_innid(&many).is_ok());
    }

    #[test]
    fn batch_latency_identity_and_affine() {
        let h = EmpiricalHistogram::new(vec![1.0, 2.0, 8.0], vec![1.0, 3.0]).unwrap();
        let m = batch_latency(&h, 2, BatchCostCoefficients::new(0.0, 0.5).unwrap()).unwrap();
        assert_eq!(m.pdf_hist.edges(), h.edges());
        assert!(close(m.expectation, h.mean().unwrap(), 1e-12));

        let p = EmpiricalHistogram::point_mass(10.0).unwrap();
        let m = batch_latency(&p, 3, BatchCostCoefficients::new(2.0, 1.0).unwrap()).unwrap();
        assert_eq!(m.expectation, 32.0);
        assert_eq!(m.pdf_hist.min(), 32.0);
        assert_eq!(m.pdf_hist.max(), 32.0);
    }

    #[test]
    fn batch_latency_of_uniform_max() {
        let u = EmpiricalHistogram::uniform(0.0, 10.0).unwrap();
        let coeffs = BatchCostCoefficients::new(1.0, 0.5).unwrap();
        let m = batch_latency(&max_order_iid(&u, 2).unwrap(), 2, coeffs).unwrap();
        let exact = 1.0 + 0.5 * 2.0 * (20.0 / 3.0);
        assert!(
            (m.expectation - exact).abs() / exact < 1e-3,
            "{}",
            m.expectation
        );
        assert!(close(
            m.expectation,
            m.pdf_hist.mean().unwrap(),
            1e-9 * exact
        ));
    }

    #[test]
    fn coefficient_validation() {
        assert!(BatchCostCoefficients::new(-1.0, 1.0).is_err());
        assert!(BatchCostCoefficients::new(0.0, 0.0).is_err());
        assert_eq!(
            BatchCostCoefficients::new(2.0, 1.0)
                .unwrap()
                .duration(3, 10.0),
            32.0
        );
    }

    #[test]
    fn mixture_of_equal_weights() {
        let a = EmpiricalHistogram::uniform(0.0, 10.0).unwrap();
        let b = EmpiricalHistogram::uniform(20.0, 30.0).unwrap();
        let m = mixture(&[&a, &b], &[1.0, 1.0]).unwrap();
        assert!(close(m.cdf(10.0).unwrap(), 0.5, 1e-12));
        assert!(close(m.cdf(25.0).unwrap(), 0.75, 1e-12));
        assert!(close(m.mean().unwrap(), 15.0, 1e-12));
    }

    #[test]
    fn rebin_preserves_cdf_at_new_edges() {
        let h = EmpiricalHistogram::new(vec![0.0, 1.0, 1.0, 5.0], vec![1.0, 2.0, 1.0]).unwrap();
        let r = h.rebin(5).unwrap();
        assert_eq!(r.bins(), 5);
        for e in r.edges()[1..].iter() {
            assert!(close(r.cdf(*e).unwrap(), h.cdf(*e).unwrap(), 1e-12));
        }
        let p = EmpiricalHistogram::point_mass(3.0)
            .unwrap()
            .rebin(64)
            .unwrap();
        assert_eq!(p.bins(), 1);
    }

    #[test]
    fn serde_round_trip() {
        let h = EmpiricalHistogram::new(vec![0.0, 1.0, 3.0], vec![1.0, 2.0]).unwrap();
        let s = serde_json::to_string(&h).unwrap();
        let back: EmpiricalHistogram = serde_json::from_str(&s).unwrap();
        assert_eq!(back, h);
        assert!(
            serde_json::from_str::<EmpiricalHistogram>(r#"{"edges":[1,0],"counts":[1]}"#).is_err()
        );
    }
}
