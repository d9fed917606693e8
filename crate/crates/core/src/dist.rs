//! Distribution types and elementary functionals.
//!
//! [`DiscreteDist`] is the universal computational representation: an
//! ordered list of labelled atoms. Piecewise-uniform densities are turned
//! into discrete distributions exactly by [`discretize`] /
//! [`common_refinement`], since a piecewise-constant density integrates to
//! `density * width` on every cell of a refinement of its breakpoints.
//!
//! All logarithms are natural; divergences and entropies are in nats.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{Execution, REDUCE_CHUNK};

/// Tolerance on `sum(probs) == 1` when validating a distribution.
pub const PROB_TOLERANCE: f64 = 1e-12;

/// Default cap on `n^m` atoms produced by [`pack`].
pub const DEFAULT_ENUMERATION_LIMIT: usize = 10_000_000;

/// Probability substituted for empty histogram bins before taking KL.
pub const PROTOCOL_SMOOTHING: f64 = 1e-10;

/// Separator between coordinate labels of a packed tuple.
pub const TUPLE_SEPARATOR: &str = "|";

/// A finite distribution over uniquely labelled atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistRepr", into = "DistRepr")]
pub struct DiscreteDist {
    labels: Vec<String>,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct AtomRepr {
    label: String,
    prob: f64,
}

#[derive(Serialize, Deserialize)]
struct DistRepr {
    atoms: Vec<AtomRepr>,
}

impl TryFrom<DistRepr> for DiscreteDist {
    type Error = Error;

    fn try_from(r: DistRepr) -> Result<Self> {
        let (labels, probs) = r.atoms.into_iter().map(|a| (a.label, a.prob)).unzip();
        DiscreteDist::new(labels, probs)
    }
}

impl From<DiscreteDist> for DistRepr {
    fn from(d: DiscreteDist) -> Self {
        DistRepr {
            atoms: d
                .labels
                .into_iter()
                .zip(d.probs)
                .map(|(label, prob)| AtomRepr { label, prob })
                .collect(),
        }
    }
}

fn check_labels(labels: &[String], len: usize) -> Result<()> {
    if labels.len() != len {
        return Err(Error::InvalidDistribution(format!(
            "{} labels for {} probabilities",
            labels.len(),
            len
        )));
    }
    if len == 0 {
        return Err(Error::InvalidDistribution("no atoms".into()));
    }
    let mut seen = HashSet::with_capacity(len);
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::InvalidDistribution(format!("duplicate label {l:?}")));
        }
    }
    Ok(())
}

fn check_weights(probs: &[f64]) -> Result<f64> {
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "atom {i} has probability {p}"
            )));
        }
    }
    Ok(probs.iter().sum())
}

impl DiscreteDist {
    /// Validates non-negativity, label uniqueness and `|sum - 1| <= 1e-12`.
    pub fn new(labels: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        check_labels(&labels, probs.len())?;
        let sum = check_weights(&probs)?;
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {sum}"
            )));
        }
        Ok(Self { labels, probs })
    }

    /// Like [`DiscreteDist::new`] but rescales non-negative weights to sum to one.
    pub fn normalized(labels: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        check_labels(&labels, weights.len())?;
        let sum = check_weights(&weights)?;
        if sum <= 0.0 {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        let probs = weights.into_iter().map(|w| w / sum).collect();
        Ok(Self { labels, probs })
    }

    /// Either [`DiscreteDist::new`] or [`DiscreteDist::normalized`].
    pub fn with_normalize(labels: Vec<String>, probs: Vec<f64>, normalize: bool) -> Result<Self> {
        if normalize {
            Self::normalized(labels, probs)
        } else {
            Self::new(labels, probs)
        }
    }

    /// Atoms labelled `"0"`, `"1"`, ...
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        let labels = (0..probs.len()).map(|i| i.to_string()).collect();
        Self::new(labels, probs)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::from_probs(vec![1.0 / n as f64; n])
    }

    /// Skips the sum check; callers guarantee the vector is a distribution
    /// up to floating-point accumulation error.
    pub(crate) fn from_parts_unchecked(labels: Vec<String>, probs: Vec<f64>) -> Self {
        debug_assert_eq!(labels.len(), probs.len());
        Self { labels, probs }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob_of(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.probs[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.labels
            .iter()
            .map(String::as_str)
            .zip(self.probs.iter().copied())
    }

    /// Errors unless `other` has exactly the same labels in the same order.
    pub fn check_same_labels(&self, other: &DiscreteDist) -> Result<()> {
        if self.labels != other.labels {
            let detail = if self.len() != other.len() {
                format!("{} atoms vs {} atoms", self.len(), other.len())
            } else {
                let i = self
                    .labels
                    .iter()
                    .zip(&other.labels)
                    .position(|(a, b)| a != b)
                    .unwrap_or(0);
                format!("atom {i}: {:?} vs {:?}", self.labels[i], other.labels[i])
            };
            return Err(Error::LabelMismatch(detail));
        }
        Ok(())
    }
}

/// One constant-density piece: `mass` spread uniformly over `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
}

impl Segment {
    pub fn density(&self) -> f64 {
        self.mass / (self.hi - self.lo)
    }
}

/// A one-dimensional piecewise-constant density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SegmentsRepr", into = "SegmentsRepr")]
pub struct PiecewiseUniformDist {
    segments: Vec<Segment>,
}

#[derive(Serialize, Deserialize)]
struct SegmentsRepr {
    segments: Vec<Segment>,
}

impl TryFrom<SegmentsRepr> for PiecewiseUniformDist {
    type Error = Error;

    fn try_from(r: SegmentsRepr) -> Result<Self> {
        PiecewiseUniformDist::new(r.segments)
    }
}

impl From<PiecewiseUniformDist> for SegmentsRepr {
    fn from(d: PiecewiseUniformDist) -> Self {
        SegmentsRepr {
            segments: d.segments,
        }
    }
}

impl PiecewiseUniformDist {
    /// Segments must be sorted by `lo`, non-overlapping, with `lo < hi`,
    /// non-negative masses summing to one within `1e-12`.
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidSegments("no segments".into()));
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.lo.is_finite() && s.hi.is_finite() && s.lo < s.hi) {
                return Err(Error::InvalidSegments(format!(
                    "segment {i} has bounds [{}, {}]",
                    s.lo, s.hi
                )));
            }
            if !s.mass.is_finite() || s.mass < 0.0 {
                return Err(Error::InvalidSegments(format!(
                    "segment {i} has mass {}",
                    s.mass
                )));
            }
        }
        for (i, w) in segments.windows(2).enumerate() {
            if w[1].lo < w[0].hi {
                return Err(Error::InvalidSegments(format!(
                    "segments {i} and {} overlap or are unsorted",
                    i + 1
                )));
            }
        }
        let total: f64 = segments.iter().map(|s| s.mass).sum();
        if (total - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::InvalidSegments(format!("masses sum to {total}")));
        }
        Ok(Self { segments })
    }

    /// `U[a, b]`.
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![Segment {
            lo: a,
            hi: b,
            mass: 1.0,
        }])
    }

    /// `sum_k w_k U[a_k, b_k]`; components may overlap.
    pub fn mixture(components: &[(f64, f64, f64)]) -> Result<Self> {
        let mut cuts: Vec<f64> = components.iter().flat_map(|&(_, a, b)| [a, b]).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut segments = Vec::new();
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mass: f64 = components
                .iter()
                .filter(|&&(_, a, b)| a <= lo && hi <= b)
                .map(|&(wt, a, b)| wt * (hi - lo) / (b - a))
                .sum();
            if mass > 0.0 {
                segments.push(Segment { lo, hi, mass });
            }
        }
        Self::new(segments)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// `(min lo, max hi)`.
    pub fn support(&self) -> (f64, f64) {
        (
            self.segments[0].lo,
            self.segments[self.segments.len() - 1].hi,
        )
    }

    /// Sorted, de-duplicated segment endpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.segments.iter().flat_map(|s| [s.lo, s.hi]).collect();
        b.dedup();
        b
    }

    /// Mass assigned to `[a, b]`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        self.segments
            .iter()
            .map(|s| {
                let lo = s.lo.max(a);
                let hi = s.hi.min(b);
                if hi > lo {
                    s.mass * ((hi - lo) / (s.hi - s.lo))
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Inverse CDF. `u` is clamped to `[0, 1]`; zero-mass segments are never
    /// returned.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let mut acc = 0.0;
        let mut last = &self.segments[0];
        for s in &self.segments {
            if s.mass <= 0.0 {
                continue;
            }
            last = s;
            if u < acc + s.mass {
                let frac = ((u - acc) / s.mass).clamp(0.0, 1.0);
                return s.lo + frac * (s.hi - s.lo);
            }
            acc += s.mass;
        }
        last.hi
    }
}

/// Label of the cell `[lo, hi]`, shared by discretization and sampling.
pub fn cell_label(lo: f64, hi: f64) -> String {
    format!("[{lo},{hi}]")
}

/// Exact discretization on the cells of the sorted grid `cuts`.
fn discretize_on(pw: &PiecewiseUniformDist, cuts: &[f64]) -> DiscreteDist {
    let mut labels = Vec::with_capacity(cuts.len().saturating_sub(1));
    let mut probs = Vec::with_capacity(labels.capacity());
    for w in cuts.windows(2) {
        labels.push(cell_label(w[0], w[1]));
        probs.push(pw.mass_between(w[0], w[1]));
    }
    DiscreteDist::from_parts_unchecked(labels, probs)
}

fn merge_cuts(mut cuts: Vec<f64>) -> Vec<f64> {
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts
}

/// One atom per cell of the refinement of segment boundaries and the extra
/// breakpoints lying inside the support. Extra breakpoints outside the
/// support (or non-finite) are ignored.
pub fn discretize(pw: &PiecewiseUniformDist, extra_breakpoints: &[f64]) -> DiscreteDist {
    let (lo, hi) = pw.support();
    let mut cuts = pw.breakpoints();
    cuts.extend(
        extra_breakpoints
            .iter()
            .copied()
            .filter(|b| b.is_finite() && *b > lo && *b < hi),
    );
    discretize_on(pw, &merge_cuts(cuts))
}

/// Discretization on an explicit grid of cell edges, which must be strictly
/// increasing and cover the support. Cells outside the support get zero
/// mass, so several densities can share one label set.
pub fn discretize_grid(pw: &PiecewiseUniformDist, cuts: &[f64]) -> Result<DiscreteDist> {
    if cuts.len() < 2
        || cuts.iter().any(|c| !c.is_finite())
        || cuts.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::InvalidSegments(
            "grid must be finite and strictly increasing".into(),
        ));
    }
    let (lo, hi) = pw.support();
    if cuts[0] > lo || cuts[cuts.len() - 1] < hi {
        return Err(Error::InvalidSegments(format!(
            "grid [{}, {}] does not cover support [{lo}, {hi}]",
            cuts[0],
            cuts[cuts.len() - 1]
        )));
    }
    Ok(discretize_on(pw, cuts))
}

/// Discretizes both densities on the union of their breakpoints, so the two
/// results share one label set.
pub fn common_refinement(
    p: &PiecewiseUniformDist,
    q: &PiecewiseUniformDist,
) -> (DiscreteDist, DiscreteDist) {
    let mut cuts = p.breakpoints();
    cuts.extend(q.breakpoints());
    let cuts = merge_cuts(cuts);
    (discretize_on(p, &cuts), discretize_on(q, &cuts))
}

/// `0.5 * sum |p_i - q_i|` over raw probability vectors of equal length.
pub fn total_variation_probs(p: &[f64], q: &[f64], exec: Execution) -> f64 {
    assert_eq!(p.len(), q.len(), "probability vectors differ in length");
    let l1 = exec.sum_chunks(p.len(), REDUCE_CHUNK, |r| {
        p[r.clone()]
            .iter()
            .zip(&q[r])
            .map(|(a, b)| (a - b).abs())
            .sum()
    });
    (0.5 * l1).min(1.0)
}

/// `sup_S P(S) - Q(S) = 0.5 * sum |p_i - q_i|`.
pub fn total_variation(p: &DiscreteDist, q: &DiscreteDist) -> Result<f64> {
    p.check_same_labels(q)?;
    Ok(total_variation_probs(
        p.probs(),
        q.probs(),
        Execution::Sequential,
    ))
}

/// `KL(q || p)` with zero entries of either vector replaced by `smoothing`.
///
/// The smoothed vectors are not renormalized. With `smoothing == 0` a zero
/// `q_i` contributes nothing and a zero `p_i` under positive `q_i` yields
/// `f64::INFINITY`.
pub fn kl_divergence_probs(q: &[f64], p: &[f64], smoothing: f64) -> f64 {
    assert_eq!(p.len(), q.len(), "probability vectors differ in length");
    let mut acc = 0.0;
    for (&qi, &pi) in q.iter().zip(p) {
        let qi = if qi == 0.0 { smoothing } else { qi };
        let pi = if pi == 0.0 { smoothing } else { pi };
        if qi == 0.0 {
            continue;
        }
        if pi == 0.0 {
            return f64::INFINITY;
        }
        acc += qi * (qi / pi).ln();
    }
    acc
}

pub fn kl_divergence(q: &DiscreteDist, p: &DiscreteDist, smoothing: f64) -> Result<f64> {
    if !(smoothing.is_finite() && smoothing >= 0.0) {
        return Err(Error::Domain(format!(
            "smoothing must be >= 0, got {smoothing}"
        )));
    }
    q.check_same_labels(p)?;
    Ok(kl_divergence_probs(q.probs(), p.probs(), smoothing))
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy_probs(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

pub fn entropy(p: &DiscreteDist) -> f64 {
    entropy_probs(p.probs())
}

/// `-sum p_i ln q_i`; infinite when some `q_i = 0` under `p_i > 0`.
pub fn cross_entropy_probs(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "probability vectors differ in length");
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return f64::INFINITY;
        }
        acc -= pi * qi.ln();
    }
    acc
}

/// The m-fold product `p^m` over tuples of base atoms.
///
/// Tuples are ordered lexicographically by base-atom index, first coordinate
/// most significant. Labels are materialized only on request.
#[derive(Clone, Debug, PartialEq)]
pub struct PackedDist {
    base: DiscreteDist,
    degree: usize,
    probs: Vec<f64>,
}

fn check_enumeration(n: usize, m: usize, limit: usize) -> Result<usize> {
    if m == 0 {
        return Err(Error::Domain("packing degree must be positive".into()));
    }
    let too_large = Error::TooLarge {
        atoms: n,
        degree: m,
        limit,
    };
    let size = u32::try_from(m)
        .ok()
        .and_then(|m| n.checked_pow(m))
        .ok_or(too_large)?;
    if size > limit {
        return Err(Error::TooLarge {
            atoms: n,
            degree: m,
            limit,
        });
    }
    Ok(size)
}

/// `p^m`, refusing to enumerate more than [`DEFAULT_ENUMERATION_LIMIT`] atoms.
pub fn pack(p: &DiscreteDist, m: usize) -> Result<PackedDist> {
    pack_with(p, m, DEFAULT_ENUMERATION_LIMIT, Execution::default())
}

pub fn pack_with(p: &DiscreteDist, m: usize, limit: usize, exec: Execution) -> Result<PackedDist> {
    check_enumeration(p.len(), m, limit)?;
    let mut packed = PackedDist {
        base: p.clone(),
        degree: 1,
        probs: p.probs().to_vec(),
    };
    while packed.degree < m {
        packed = packed.extend_with(exec);
    }
    Ok(packed)
}

impl PackedDist {
    /// `self ⊗ base`, one more coordinate.
    fn extend_with(&self, exec: Execution) -> PackedDist {
        let base = self.base.probs();
        let n = base.len();
        let prev = &self.probs;
        // Rows of length n per previous tuple, grouped so tasks are not tiny.
        let rows_per_chunk = (4096 / n).max(1);
        let mut next = vec![0.0; prev.len() * n];
        exec.for_each_chunk_mut(&mut next, rows_per_chunk * n, |ci, chunk| {
            for (r, row) in chunk.chunks_mut(n).enumerate() {
                let w = prev[ci * rows_per_chunk + r];
                for (x, &b) in row.iter_mut().zip(base) {
                    *x = w * b;
                }
            }
        });
        PackedDist {
            base: self.base.clone(),
            degree: self.degree + 1,
            probs: next,
        }
    }

    /// The next packing degree, reusing this product.
    pub fn extended(&self, limit: usize, exec: Execution) -> Result<PackedDist> {
        check_enumeration(self.base.len(), self.degree + 1, limit)?;
        Ok(self.extend_with(exec))
    }

    pub fn base(&self) -> &DiscreteDist {
        &self.base
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Base-atom indices of tuple `index`, first coordinate first.
    pub fn tuple(&self, mut index: usize) -> Vec<usize> {
        let n = self.base.len();
        let mut t = vec![0; self.degree];
        for slot in t.iter_mut().rev() {
            *slot = index % n;
            index /= n;
        }
        t
    }

    pub fn label(&self, index: usize) -> String {
        let labels = self.base.labels();
        self.tuple(index)
            .into_iter()
            .map(|i| labels[i].as_str())
            .collect::<Vec<_>>()
            .join(TUPLE_SEPARATOR)
    }

    /// Materializes tuple labels, e.g. `"a|b"`.
    pub fn to_discrete(&self) -> DiscreteDist {
        let labels = (0..self.len()).map(|i| self.label(i)).collect();
        DiscreteDist::from_parts_unchecked(labels, self.probs.clone())
    }

    /// Distribution of coordinate `coord` (0-based).
    pub fn marginal(&self, coord: usize) -> Result<DiscreteDist> {
        if coord >= self.degree {
            return Err(Error::Domain(format!(
                "coordinate {coord} out of range for degree {}",
                self.degree
            )));
        }
        let n = self.base.len();
        let stride = n.pow((self.degree - 1 - coord) as u32);
        let mut out = vec![0.0; n];
        for (i, &p) in self.probs.iter().enumerate() {
            out[(i / stride) % n] += p;
        }
        Ok(DiscreteDist::from_parts_unchecked(
            self.base.labels().to_vec(),
            out,
        ))
    }

    fn check_compatible(&self, other: &PackedDist) -> Result<()> {
        self.base.check_same_labels(&other.base)?;
        if self.degree != other.degree {
            return Err(Error::LabelMismatch(format!(
                "packing degrees {} and {}",
                self.degree, other.degree
            )));
        }
        Ok(())
    }

    pub fn total_variation(&self, other: &PackedDist) -> Result<f64> {
        self.total_variation_with(other, Execution::default())
    }

    pub fn total_variation_with(&self, other: &PackedDist, exec: Execution) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(total_variation_probs(&self.probs, &other.probs, exec))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn p_toy() -> PiecewiseUniformDist {
        PiecewiseUniformDist::uniform(0.0, 1.0).unwrap()
    }
    fn q1_toy() -> PiecewiseUniformDist {
        PiecewiseUniformDist::uniform(0.2, 1.0).unwrap()
    }
    fn q2_toy() -> PiecewiseUniformDist {
        PiecewiseUniformDist::mixture(&[(0.3, 0.0, 0.5), (0.7, 0.5, 1.0)]).unwrap()
    }

    fn assert_probs(d: &DiscreteDist, want: &[f64]) {
        assert_eq!(d.len(), want.len());
        for (a, b) in d.probs().iter().zip(want) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn discretize_toy_cells() {
        let cuts = [0.2, 0.5];
        let p = discretize(&p_toy(), &cuts);
        assert_eq!(p.labels(), ["[0,0.2]", "[0.2,0.5]", "[0.5,1]"]);
        assert_probs(&p, &[0.2, 0.3, 0.5]);
        // Q1's support starts at 0.2, so compare on a shared grid.
        let (_, q1) = common_refinement(&p_toy(), &q1_toy());
        assert_probs(&q1, &[0.0, 1.0]);
        let cells = PiecewiseUniformDist::new(vec![
            Segment {
                lo: 0.0,
                hi: 0.2,
                mass: 0.0,
            },
            Segment {
                lo: 0.2,
                hi: 1.0,
                mass: 1.0,
            },
        ])
        .unwrap();
        assert_probs(&discretize(&cells, &cuts), &[0.0, 0.375, 0.625]);
        assert_probs(&discretize(&q2_toy(), &cuts), &[0.12, 0.18, 0.70]);
    }

    #[test]
    fn discretize_ignores_outside_breakpoints() {
        let d = discretize(&q1_toy(), &[0.1, 0.5, 2.0, f64::NAN]);
        assert_eq!(d.labels(), ["[0.2,0.5]", "[0.5,1]"]);
        assert_probs(&d, &[0.375, 0.625]);
    }

    #[test]
    fn grid_discretization_shares_labels() {
        let grid = [0.0, 0.2, 0.5, 1.0];
        let q1 = discretize_grid(&q1_toy(), &grid).unwrap();
        assert_eq!(q1.labels(), ["[0,0.2]", "[0.2,0.5]", "[0.5,1]"]);
        assert_probs(&q1, &[0.0, 0.375, 0.625]);
        assert_eq!(
            discretize_grid(&p_toy(), &grid).unwrap().labels(),
            q1.labels()
        );
        assert!(discretize_grid(&p_toy(), &[0.1, 1.0]).is_err());
        assert!(discretize_grid(&p_toy(), &[0.0, 0.5, 0.5, 1.0]).is_err());
    }

    #[test]
    fn common_refinement_examples() {
        let (p, q) = common_refinement(&p_toy(), &q1_toy());
        assert_eq!(p.labels(), ["[0,0.2]", "[0.2,1]"]);
        assert_eq!(p.labels(), q.labels());
        assert_probs(&p, &[0.2, 0.8]);
        assert_probs(&q, &[0.0, 1.0]);

        let (p, q) = common_refinement(&p_toy(), &q2_toy());
        assert_eq!(p.labels(), ["[0,0.5]", "[0.5,1]"]);
        assert_probs(&p, &[0.5, 0.5]);
        assert_probs(&q, &[0.3, 0.7]);

        let (a, b) = common_refinement(&p_toy(), &p_toy());
        assert_eq!(a, b);
    }

    #[test]
    fn segment_validation() {
        let overlap = PiecewiseUniformDist::new(vec![
            Segment {
                lo: 0.0,
                hi: 0.6,
                mass: 0.5,
            },
            Segment {
                lo: 0.5,
                hi: 1.0,
                mass: 0.5,
            },
        ]);
        assert!(matches!(overlap, Err(Error::InvalidSegments(_))));
        let negative = PiecewiseUniformDist::new(vec![
            Segment {
                lo: 0.0,
                hi: 0.5,
                mass: -0.5,
            },
            Segment {
                lo: 0.5,
                hi: 1.0,
                mass: 1.5,
            },
        ]);
        assert!(negative.is_err());
        assert!(PiecewiseUniformDist::uniform(1.0, 1.0).is_err());
        let json =
            r#"{"segments":[{"lo":0.0,"hi":0.5,"mass":0.3},{"lo":0.4,"hi":1.0,"mass":0.7}]}"#;
        assert!(serde_json::from_str::<PiecewiseUniformDist>(json).is_err());
    }

    #[test]
    fn toy_total_variation() {
        let (p, q1) = common_refinement(&p_toy(), &q1_toy());
        assert_abs_diff_eq!(total_variation(&p, &q1).unwrap(), 0.2, epsilon = 1e-12);
        let (p, q2) = common_refinement(&p_toy(), &q2_toy());
        assert_abs_diff_eq!(total_variation(&p, &q2).unwrap(), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn tv_extremes_and_mismatch() {
        let a = DiscreteDist::from_probs(vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let b = DiscreteDist::from_probs(vec![0.0, 0.0, 0.25, 0.75]).unwrap();
        assert_eq!(total_variation(&a, &a).unwrap(), 0.0);
        assert_abs_diff_eq!(total_variation(&a, &b).unwrap(), 1.0, epsilon = 1e-15);
        let c = DiscreteDist::from_probs(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            total_variation(&a, &c),
            Err(Error::LabelMismatch(_))
        ));
        let d = DiscreteDist::new(vec!["x".into(), "y".into()], vec![0.5, 0.5]).unwrap();
        assert!(total_variation(&c, &d).is_err());
    }

    #[test]
    fn construction_validation() {
        assert!(DiscreteDist::from_probs(vec![0.5, 0.6]).is_err());
        assert!(DiscreteDist::from_probs(vec![-0.1, 1.1]).is_err());
        assert!(DiscreteDist::new(vec!["a".into(), "a".into()], vec![0.5, 0.5]).is_err());
        assert!(DiscreteDist::from_probs(vec![]).is_err());
        let n = DiscreteDist::normalized(vec!["a".into(), "b".into()], vec![1.0, 3.0]).unwrap();
        assert_eq!(n.probs(), [0.25, 0.75]);
        let json = r#"{"atoms":[{"label":"a","prob":0.2},{"label":"b","prob":0.8}]}"#;
        let d: DiscreteDist = serde_json::from_str(json).unwrap();
        assert_eq!(d.prob_of("b"), Some(0.8));
        assert_eq!(serde_json::to_string(&d).unwrap(), json);
    }

    #[test]
    fn pack_examples() {
        let p = DiscreteDist::from_probs(vec![0.2, 0.8]).unwrap();
        let one = pack(&p, 1).unwrap();
        assert_eq!(one.probs(), p.probs());
        assert_eq!(one.to_discrete(), p);
        let two = pack(&p, 2).unwrap();
        for (a, b) in two.probs().iter().zip([0.04, 0.16, 0.16, 0.64]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert_eq!(two.label(1), "0|1");
        assert_eq!(two.tuple(2), vec![1, 0]);
        assert!(matches!(pack(&p, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn pack_guard() {
        let p = DiscreteDist::uniform(10).unwrap();
        assert!(matches!(pack(&p, 8), Err(Error::TooLarge { .. })));
        assert!(pack_with(&p, 3, 999, Execution::Sequential).is_err());
        assert!(pack_with(&p, 3, 1000, Execution::Sequential).is_ok());
        assert!(pack(&p, usize::MAX).is_err());
    }

    #[test]
    fn packed_tv_toy_degree_two() {
        let (p, q1) = common_refinement(&p_toy(), &q1_toy());
        let tv = pack(&p, 2)
            .unwrap()
            .total_variation(&pack(&q1, 2).unwrap())
            .unwrap();
        assert_abs_diff_eq!(tv, 0.36, epsilon = 1e-12);
    }

    #[test]
    fn kl_examples() {
        let p = DiscreteDist::from_probs(vec![0.5, 0.5]).unwrap();
        assert_eq!(kl_divergence(&p, &p, PROTOCOL_SMOOTHING).unwrap(), 0.0);
        let q = DiscreteDist::from_probs(vec![1.0, 0.0]).unwrap();
        let want = 2f64.ln() + 1e-10 * (2e-10f64).ln();
        assert_abs_diff_eq!(kl_divergence(&q, &p, 1e-10).unwrap(), want, epsilon = 1e-15);
        assert_abs_diff_eq!(
            kl_divergence(&q, &p, 0.0).unwrap(),
            2f64.ln(),
            epsilon = 1e-15
        );
        assert_eq!(kl_divergence(&p, &q, 0.0).unwrap(), f64::INFINITY);
        assert!(kl_divergence(&p, &q, -1.0).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(
            entropy(&DiscreteDist::uniform(2).unwrap()),
            2f64.ln(),
            epsilon = 1e-15
        );
        assert_eq!(
            entropy(&DiscreteDist::from_probs(vec![1.0, 0.0]).unwrap()),
            0.0
        );
        // Reference value computed with 50-digit mpmath summation.
        let d = DiscreteDist::from_probs(vec![0.12, 0.18, 0.70]).unwrap();
        assert_abs_diff_eq!(entropy(&d), 0.812_767_802_157_670_4, epsilon = 1e-15);
    }

    fn dist_strategy(n: usize) -> impl Strategy<Value = DiscreteDist> {
        prop::collection::vec(0.0f64..1.0, n).prop_filter_map("all zero", |w| {
            let labels = (0..w.len()).map(|i| i.to_string()).collect();
            DiscreteDist::normalized(labels, w).ok()
        })
    }

    fn positive_dist_strategy(n: usize) -> impl Strategy<Value = DiscreteDist> {
        prop::collection::vec(0.01f64..1.0, n).prop_map(|w| {
            let labels = (0..w.len()).map(|i| i.to_string()).collect();
            DiscreteDist::normalized(labels, w).unwrap()
        })
    }

    proptest! {
        #[test]
        fn tv_is_a_metric(
            (a, b, c) in (1usize..7).prop_flat_map(|n| (dist_strategy(n), dist_strategy(n), dist_strategy(n)))
        ) {
            let ab = total_variation(&a, &b).unwrap();
            let ba = total_variation(&b, &a).unwrap();
            let ac = total_variation(&a, &c).unwrap();
            let cb = total_variation(&c, &b).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(total_variation(&a, &a).unwrap() <= 1e-12);
            prop_assert!(ab <= ac + cb + 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn packed_tv_grows_with_degree(
            (p, q) in (1usize..5).prop_flat_map(|n| (dist_strategy(n), dist_strategy(n)))
        ) {
            let mut prev = 0.0;
            for m in 1..=4 {
                let tv = pack(&p, m).unwrap().total_variation(&pack(&q, m).unwrap()).unwrap();
                prop_assert!(tv + 1e-12 >= prev);
                prev = tv;
            }
        }

        #[test]
        fn pack_marginals_recover_base(
            (p, m) in (1usize..5).prop_flat_map(|n| (dist_strategy(n), 1usize..5))
        ) {
            let packed = pack(&p, m).unwrap();
            prop_assert_eq!(packed.len(), p.len().pow(m as u32));
            for k in 0..m {
                let marg = packed.marginal(k).unwrap();
                for (a, b) in marg.probs().iter().zip(p.probs()) {
                    prop_assert!((a - b).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn gibbs_inequality(
            (q, p) in (2usize..8).prop_flat_map(|n| (positive_dist_strategy(n), positive_dist_strategy(n)))
        ) {
            let kl = kl_divergence(&q, &p, 0.0).unwrap();
            prop_assert!(kl >= -1e-15);
            prop_assert!(kl_divergence(&q, &q, 0.0).unwrap().abs() <= 1e-15);
            if total_variation(&q, &p).unwrap() > 1e-6 {
                prop_assert!(kl > 0.0);
            }
        }

        #[test]
        fn discretize_is_exact(
            widths in prop::collection::vec(0.05f64..1.0, 1..6),
            masses in prop::collection::vec(0.0f64..1.0, 6),
            extra in prop::collection::vec(-0.5f64..4.0, 0..8),
        ) {
            let total: f64 = masses[..widths.len()].iter().sum();
            prop_assume!(total > 0.0);
            let mut lo = 0.0;
            let mut segs = Vec::new();
            for (w, m) in widths.iter().zip(&masses) {
                segs.push(Segment { lo, hi: lo + w, mass: m / total });
                lo += w;
            }
            let renorm: f64 = segs.iter().map(|s| s.mass).sum();
            prop_assume!((renorm - 1.0).abs() <= 1e-12);
            let pw = PiecewiseUniformDist::new(segs.clone()).unwrap();
            let d = discretize(&pw, &extra);
            for s in &segs {
                let inside: f64 = d
                    .labels()
                    .iter()
                    .zip(d.probs())
                    .filter(|(l, _)| {
                        let inner = &l[1..l.len() - 1];
                        let (a, b) = inner.split_once(',').unwrap();
                        a.parse::<f64>().unwrap() >= s.lo && b.parse::<f64>().unwrap() <= s.hi
                    })
                    .map(|(_, p)| p)
                    .sum();
                prop_assert!((inside - s.mass).abs() <= 1e-14);
            }
        }
    }
}
