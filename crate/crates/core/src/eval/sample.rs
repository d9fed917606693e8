use rand::Rng;

use super::counts::LabelCounts;
use crate::dist::{cell_label, PiecewiseUniformDist, TUPLE_SEPARATOR};
use crate::error::{Error, Result};
use crate::par::{stream_rng, Execution};

/// Draws per generator stream. Chunk `c` of the output comes from stream
/// `c`, so samples are identical under any execution strategy.
pub const SAMPLE_CHUNK: usize = 1 << 16;

/// `n` inverse-CDF draws from `dist` using ChaCha8 seeded with `seed`.
pub fn draw_samples(dist: &PiecewiseUniformDist, n: usize, seed: u64, exec: Execution) -> Vec<f64> {
    let mut out = vec![0.0; n];
    exec.for_each_chunk_mut(&mut out, SAMPLE_CHUNK, |c, piece| {
        let mut rng = stream_rng(seed, c as u64);
        for x in piece {
            *x = dist.quantile(rng.random::<f64>());
        }
    });
    out
}

fn check_bins(bins: &[f64]) -> Result<()> {
    if bins.len() < 2 {
        return Err(Error::InvalidConfig("need at least two bin edges".into()));
    }
    if bins.iter().any(|b| !b.is_finite()) || bins.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "bin edges must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Index of the half-open bin `[b_i, b_{i+1})` holding `x`; the last bin
/// is closed.
fn bin_index(bins: &[f64], x: f64) -> Option<usize> {
    if !(x >= bins[0] && x <= bins[bins.len() - 1]) {
        return None;
    }
    Some((bins.partition_point(|&b| b <= x) - 1).min(bins.len() - 2))
}

fn bin_labels(bins: &[f64]) -> Vec<String> {
    bins.windows(2).map(|w| cell_label(w[0], w[1])).collect()
}

/// Counts of `samples` per bin, every bin listed in order.
pub fn histogram(samples: &[f64], bins: &[f64]) -> Result<LabelCounts> {
    check_bins(bins)?;
    let mut tally = vec![0u64; bins.len() - 1];
    for &x in samples {
        let i =
            bin_index(bins, x).ok_or_else(|| Error::Domain(format!("sample {x} outside bins")))?;
        tally[i] += 1;
    }
    let mut counts = LabelCounts::new();
    for (label, c) in bin_labels(bins).into_iter().zip(tally) {
        counts.insert(label, c)?;
    }
    Ok(counts)
}

/// Histogram of `n` seeded draws on `bins`, which must cover the support.
pub fn sample_synthetic(
    dist: &PiecewiseUniformDist,
    n: usize,
    bins: &[f64],
    seed: u64,
    exec: Execution,
) -> Result<LabelCounts> {
    if n == 0 {
        return Err(Error::Domain("sample size must be positive".into()));
    }
    check_bins(bins)?;
    let (lo, hi) = dist.support();
    if bins[0] > lo || bins[bins.len() - 1] < hi {
        return Err(Error::InvalidConfig(format!(
            "bins [{}, {}] do not cover support [{lo}, {hi}]",
            bins[0],
            bins[bins.len() - 1]
        )));
    }
    histogram(&draw_samples(dist, n, seed, exec), bins)
}

/// Histogram of consecutive non-overlapping `m`-tuples of `samples`, with
/// tuple labels joined as in packed distributions. A trailing partial
/// tuple is dropped.
pub fn tuple_counts(samples: &[f64], m: usize, bins: &[f64]) -> Result<LabelCounts> {
    if m == 0 {
        return Err(Error::Domain("tuple length must be positive".into()));
    }
    check_bins(bins)?;
    let labels = bin_labels(bins);
    let mut counts = LabelCounts::new();
    let mut key = String::new();
    for tuple in samples.chunks_exact(m) {
        key.clear();
        for (k, &x) in tuple.iter().enumerate() {
            let i = bin_index(bins, x)
                .ok_or_else(|| Error::Domain(format!("sample {x} outside bins")))?;
            if k > 0 {
                key.push_str(TUPLE_SEPARATOR);
            }
            key.push_str(&labels[i]);
        }
        counts.add(&key, 1);
    }
    Ok(counts)
}
