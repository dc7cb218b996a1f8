//! Similarity histograms and Jensen-Shannon divergence.
//!
//! Histograms partition the cosine-similarity range `[-1, 1]` into `B`
//! uniform bins and normalize counts to probabilities. Divergence uses
//! log base 2 so its range is exactly `[0, 1]` regardless of bin count,
//! which keeps gating thresholds portable.

use crate::error::{Error, Result};

/// Lower end of the similarity range.
pub const SIM_LO: f64 = -1.0;
/// Upper end of the similarity range.
pub const SIM_HI: f64 = 1.0;

/// Inputs may overshoot the range by at most this much before they are
/// rejected instead of clamped.
const RANGE_SLACK: f64 = 1e-9;

/// Tolerance on the probability sum of a valid histogram.
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// Default number of bins over `[-1, 1]`.
pub const DEFAULT_BIN_COUNT: usize = 64;

/// A normalized histogram over cosine similarities in `[-1, 1]`.
///
/// Invariants: all probabilities are non-negative and sum to 1 within
/// [`PROB_SUM_TOLERANCE`]. Bins partition the range uniformly; a value
/// equal to 1 falls in the last bin.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityHistogram {
    bin_count: usize,
    probs: Vec<f64>,
}

impl SimilarityHistogram {
    /// Wrap a probability vector, validating the histogram invariants.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyInput("histogram probabilities"));
        }
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("histogram probabilities"));
        }
        if let Some(&p) = probs.iter().find(|&&p| p < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "negative histogram probability {p}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "histogram probabilities sum to {sum}, not 1"
            )));
        }
        Ok(SimilarityHistogram {
            bin_count: probs.len(),
            probs,
        })
    }

    pub fn bin_count(&self) -> usize {
        self.bin_count
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Width of each bin.
    pub fn bin_width(&self) -> f64 {
        (SIM_HI - SIM_LO) / self.bin_count as f64
    }
}

/// Map a similarity value to its bin. The last bin is right-closed.
fn bin_index(value: f64, bin_count: usize) -> usize {
    let t = (value - SIM_LO) / (SIM_HI - SIM_LO) * bin_count as f64;
    (t.floor() as usize).min(bin_count - 1)
}

/// Build a normalized histogram of similarity values.
///
/// Values may overshoot `[-1, 1]` by at most `1e-9` (they are clamped);
/// anything further out is rejected. Errors on empty input.
pub fn build_histogram(values: &[f64], bin_count: usize) -> Result<SimilarityHistogram> {
    if bin_count == 0 {
        return Err(Error::InvalidParameter("bin count must be positive".into()));
    }
    if values.is_empty() {
        return Err(Error::EmptyInput("histogram values"));
    }
    let mut counts = vec![0u64; bin_count];
    for &raw in values {
        if !raw.is_finite() {
            return Err(Error::NonFinite("histogram values"));
        }
        if !(SIM_LO - RANGE_SLACK..=SIM_HI + RANGE_SLACK).contains(&raw) {
            return Err(Error::OutOfRange {
                value: raw,
                lo: SIM_LO,
                hi: SIM_HI,
            });
        }
        let v = raw.clamp(SIM_LO, SIM_HI);
        counts[bin_index(v, bin_count)] += 1;
    }
    let total = values.len() as f64;
    let probs = counts.iter().map(|&c| c as f64 / total).collect();
    Ok(SimilarityHistogram { bin_count, probs })
}

/// Jensen-Shannon divergence between two histograms, log base 2.
///
/// `JSD(P, Q) = KL(P ‖ M) / 2 + KL(Q ‖ M) / 2` with `M = (P + Q) / 2`.
/// Zero-probability terms contribute zero (`0 · log 0 := 0`). The per-bin
/// accumulation is symmetric in its arguments, so swapping `p` and `q`
/// returns a bit-identical value. Errors on bin-count mismatch.
pub fn js_divergence(p: &SimilarityHistogram, q: &SimilarityHistogram) -> Result<f64> {
    if p.bin_count != q.bin_count {
        return Err(Error::BinMismatch {
            left: p.bin_count,
            right: q.bin_count,
        });
    }
    let mut acc = 0.0;
    for (&pi, &qi) in p.probs.iter().zip(q.probs.iter()) {
        let m = 0.5 * (pi + qi);
        let tp = if pi > 0.0 { pi * (pi / m).log2() } else { 0.0 };
        let tq = if qi > 0.0 { qi * (qi / m).log2() } else { 0.0 };
        acc += 0.5 * (tp + tq);
    }
    Ok(acc.clamp(0.0, 1.0))
}
