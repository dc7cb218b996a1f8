//! Anchor sets and contrastive batch sampling.
//!
//! An anchor marks a frame where the scene's semantic attribute changed
//! from the previous anchor's. The neighborhood-consistency assumption
//! says frames within `delta` of an anchor share its attribute, while the
//! neighborhoods of successive anchors differ; batches are drawn
//! accordingly: query and positive from one anchor window, negatives from
//! the adjacent anchors' windows.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// How many times the positive sample is re-drawn to avoid equaling the
/// query before the collision is accepted.
const POSITIVE_RETRIES: usize = 8;

/// Strictly increasing anchor frame indices with their neighborhood
/// half-width `delta`, validated against the owning stream's length.
///
/// Invariants: at least two anchors; `k[i] + delta < k[i+1]` for all `i`
/// (successive windows are disjoint); `k[last] + delta` is inside the
/// stream.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    indices: Vec<usize>,
    delta: usize,
    stream_length: usize,
}

impl AnchorSet {
    pub fn new(indices: Vec<usize>, delta: usize, stream_length: usize) -> Result<Self> {
        if indices.len() < 2 {
            return Err(Error::InvalidAnchors(format!(
                "need at least 2 anchors, got {}",
                indices.len()
            )));
        }
        for (i, pair) in indices.windows(2).enumerate() {
            if pair[0] + delta >= pair[1] {
                return Err(Error::InvalidAnchors(format!(
                    "anchor {} (frame {}) plus delta {} overlaps anchor {} (frame {})",
                    i + 1,
                    pair[0],
                    delta,
                    i + 2,
                    pair[1]
                )));
            }
        }
        let last = *indices.last().unwrap();
        if last + delta >= stream_length {
            return Err(Error::InvalidAnchors(format!(
                "last anchor {last} plus delta {delta} exceeds stream length {stream_length}"
            )));
        }
        Ok(AnchorSet {
            indices,
            delta,
            stream_length,
        })
    }

    /// Number of anchors `n`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn stream_length(&self) -> usize {
        self.stream_length
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Anchor frame for a 1-based ordinal.
    pub fn anchor(&self, ordinal: usize) -> Result<usize> {
        if ordinal == 0 || ordinal > self.indices.len() {
            return Err(Error::InvalidParameter(format!(
                "anchor ordinal {ordinal} out of range 1..={}",
                self.indices.len()
            )));
        }
        Ok(self.indices[ordinal - 1])
    }

    /// Inclusive frame window `[k_i, k_i + delta]` of an anchor.
    pub fn window(&self, ordinal: usize) -> Result<(usize, usize)> {
        let k = self.anchor(ordinal)?;
        Ok((k, k + self.delta))
    }
}

/// Read anchor indices from a plain-text file, one per line.
///
/// The strictly-increasing requirement is checked here so violations are
/// reported with a line number; `delta` comes from configuration, not the
/// file.
pub fn read_anchor_indices(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut indices = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let value: usize = trimmed
            .parse()
            .map_err(|_| Error::parse(path, idx + 1, format!("bad frame index {trimmed:?}")))?;
        if let Some(&prev) = indices.last() {
            if value <= prev {
                return Err(Error::parse(
                    path,
                    idx + 1,
                    format!("anchor {value} not greater than previous {prev}"),
                ));
            }
        }
        indices.push(value);
    }
    if indices.is_empty() {
        return Err(Error::parse(path, 1, "no anchors in file"));
    }
    Ok(indices)
}

pub fn write_anchor_indices(path: impl AsRef<Path>, indices: &[usize]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for k in indices {
        out.push_str(&format!("{k}\n"));
    }
    File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

/// One contrastive training batch: a query and positive from the same
/// anchor window, negatives from the neighboring anchors' windows.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveBatch {
    pub query_index: usize,
    pub positive_index: usize,
    pub negative_indices: Vec<usize>,
    /// 1-based ordinal of the anchor this batch was drawn around.
    pub anchor_ordinal: usize,
}

/// Draw one batch around the given anchor.
///
/// Query and positive are uniform on `[k_i, k_i + delta]`; the positive is
/// re-drawn a bounded number of times to differ from the query when the
/// window has more than one frame. Negatives are uniform with replacement
/// over the union of the previous and next anchors' windows; the first and
/// last anchors use their single existing neighbor.
pub fn draw_batch(
    anchors: &AnchorSet,
    anchor_ordinal: usize,
    n_neg: usize,
    rng: &mut impl Rng,
) -> Result<ContrastiveBatch> {
    if n_neg == 0 {
        return Err(Error::InvalidParameter(
            "need at least one negative sample".into(),
        ));
    }
    let (lo, hi) = anchors.window(anchor_ordinal)?;

    let query_index = rng.random_range(lo..=hi);
    let mut positive_index = rng.random_range(lo..=hi);
    if hi > lo {
        let mut tries = 1;
        while positive_index == query_index && tries < POSITIVE_RETRIES {
            positive_index = rng.random_range(lo..=hi);
            tries += 1;
        }
    }

    let mut neighbor_starts: Vec<usize> = Vec::with_capacity(2);
    if anchor_ordinal > 1 {
        neighbor_starts.push(anchors.anchor(anchor_ordinal - 1)?);
    }
    if anchor_ordinal < anchors.len() {
        neighbor_starts.push(anchors.anchor(anchor_ordinal + 1)?);
    }
    let window_size = anchors.delta() + 1;
    let total = neighbor_starts.len() * window_size;
    let negative_indices = (0..n_neg)
        .map(|_| {
            let r = rng.random_range(0..total);
            neighbor_starts[r / window_size] + r % window_size
        })
        .collect();

    Ok(ContrastiveBatch {
        query_index,
        positive_index,
        negative_indices,
        anchor_ordinal,
    })
}

/// Build the full batch sequence for a training run: one batch per anchor
/// per epoch, with the anchor order reshuffled every epoch. The result is
/// fully determined by the random source's state.
pub fn training_schedule(
    anchors: &AnchorSet,
    epochs: usize,
    n_neg: usize,
    rng: &mut impl Rng,
) -> Result<Vec<ContrastiveBatch>> {
    if n_neg == 0 {
        return Err(Error::InvalidParameter(
            "need at least one negative sample".into(),
        ));
    }
    let n = anchors.len();
    let mut order: Vec<usize> = (1..=n).collect();
    let mut schedule = Vec::with_capacity(epochs * n);
    for _ in 0..epochs {
        order.shuffle(rng);
        for &ordinal in &order {
            schedule.push(draw_batch(anchors, ordinal, n_neg, rng)?);
        }
    }
    Ok(schedule)
}
