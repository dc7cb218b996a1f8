//! Similarity-distribution descriptors, category profiles, and
//! divergence-based classification.
//!
//! A frame's descriptor is the normalized histogram of its cosine
//! similarities against every frame of the training stream. A category
//! profile averages the descriptors whose divergence from a chosen
//! typical frame's descriptor stays below a gate `sigma`; queries are
//! labeled by the profile of minimal Jensen-Shannon divergence.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{cosine_sim, Embedding};
use crate::error::{Error, Result};
use crate::histogram::{build_histogram, js_divergence, SimilarityHistogram};

/// Default divergence gate for profile building. On base-2 divergence in
/// `[0, 1]` this is a tight-but-nonempty gate; sweep support counts over
/// a sigma range to calibrate it for a given stream.
pub const DEFAULT_SIGMA: f64 = 0.1;

/// Per-frame scene descriptor: the distribution of the frame's similarity
/// against a reference stream.
#[derive(Debug, Clone, PartialEq)]
pub struct DsDescriptor {
    /// Index of the query frame this descriptor belongs to.
    pub frame_ref: usize,
    pub histogram: SimilarityHistogram,
}

/// A scene category's meta-pattern: the average descriptor of all frames
/// gathered by the divergence gate, plus the provenance that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryProfile {
    pub category: String,
    pub histogram: SimilarityHistogram,
    /// Gate threshold the profile was built with.
    pub sigma: f64,
    /// Number of descriptors that passed the gate.
    pub support_count: usize,
    /// Frame index of the typical frame.
    pub typical_frame: usize,
}

#[derive(Serialize, Deserialize)]
struct ProfileJson {
    category: String,
    sigma: f64,
    bin_count: usize,
    probs: Vec<f64>,
    support_count: usize,
    typical_frame: usize,
}

impl CategoryProfile {
    /// Persist as a JSON document with fields `category, sigma, bin_count,
    /// probs, support_count, typical_frame`.
    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let doc = ProfileJson {
            category: self.category.clone(),
            sigma: self.sigma,
            bin_count: self.histogram.bin_count(),
            probs: self.histogram.probs().to_vec(),
            support_count: self.support_count,
            typical_frame: self.typical_frame,
        };
        let mut text = serde_json::to_string_pretty(&doc)
            .map_err(|e| Error::InvalidParameter(format!("profile serialization: {e}")))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: ProfileJson =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
        if doc.probs.len() != doc.bin_count {
            return Err(Error::parse(
                path,
                1,
                format!(
                    "bin_count {} does not match {} probabilities",
                    doc.bin_count,
                    doc.probs.len()
                ),
            ));
        }
        if doc.sigma <= 0.0 || !doc.sigma.is_finite() {
            return Err(Error::parse(path, 1, format!("bad sigma {}", doc.sigma)));
        }
        if doc.support_count == 0 {
            return Err(Error::parse(path, 1, "support_count must be at least 1"));
        }
        let histogram = SimilarityHistogram::from_probs(doc.probs)
            .map_err(|e| Error::parse(path, 1, e.to_string()))?;
        Ok(CategoryProfile {
            category: doc.category,
            histogram,
            sigma: doc.sigma,
            support_count: doc.support_count,
            typical_frame: doc.typical_frame,
        })
    }
}

/// Descriptor of one query frame against a reference set.
///
/// The reference set is the full training stream; when the query belongs
/// to it, its self-similarity of 1 lands in the last bin. Errors on an
/// empty reference set.
pub fn compute_ds(
    frame_ref: usize,
    query: &Embedding,
    references: &[Embedding],
    bin_count: usize,
) -> Result<DsDescriptor> {
    if references.is_empty() {
        return Err(Error::EmptyInput("reference embeddings"));
    }
    let mut sims = Vec::with_capacity(references.len());
    for r in references {
        sims.push(cosine_sim(query, r)?);
    }
    Ok(DsDescriptor {
        frame_ref,
        histogram: build_histogram(&sims, bin_count)?,
    })
}

/// Descriptors of every frame of a stream against the stream itself.
/// Parallel over frames; descriptor `i` belongs to frame `i` and the
/// result does not depend on the thread count.
pub fn compute_all_ds(embeddings: &[Embedding], bin_count: usize) -> Result<Vec<DsDescriptor>> {
    if embeddings.is_empty() {
        return Err(Error::EmptyInput("stream embeddings"));
    }
    embeddings
        .par_iter()
        .enumerate()
        .map(|(i, z)| compute_ds(i, z, embeddings, bin_count))
        .collect()
}

/// Build a category profile from a typical frame's descriptor.
///
/// Gathers every descriptor whose divergence from the typical one is
/// strictly below `sigma` (the typical frame itself always passes at
/// divergence 0), averages the gathered probability vectors, and
/// renormalizes the mean to absorb floating-point drift.
pub fn build_scp(
    all_ds: &[DsDescriptor],
    typical: &DsDescriptor,
    sigma: f64,
    category: impl Into<String>,
) -> Result<CategoryProfile> {
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if all_ds.is_empty() {
        return Err(Error::EmptyInput("descriptor set"));
    }
    let bins = typical.histogram.bin_count();
    let mut sum = vec![0.0; bins];
    let mut support_count = 0usize;
    for ds in all_ds {
        if js_divergence(&typical.histogram, &ds.histogram)? < sigma {
            for (acc, &p) in sum.iter_mut().zip(ds.histogram.probs()) {
                *acc += p;
            }
            support_count += 1;
        }
    }
    if support_count == 0 {
        return Err(Error::EmptyInput(
            "no descriptor passed the gate; is the typical frame part of the descriptor set?",
        ));
    }
    let total: f64 = sum.iter().sum();
    let probs: Vec<f64> = sum.iter().map(|&s| s / total).collect();
    Ok(CategoryProfile {
        category: category.into(),
        histogram: SimilarityHistogram::from_probs(probs)?,
        sigma,
        support_count,
        typical_frame: typical.frame_ref,
    })
}

/// Label a query descriptor by the profile of minimal divergence.
///
/// Returns the index of the winning profile and the full divergence
/// vector in profile order. Ties break toward the lowest index.
pub fn classify(
    query_ds: &DsDescriptor,
    profiles: &[CategoryProfile],
) -> Result<(usize, Vec<f64>)> {
    if profiles.is_empty() {
        return Err(Error::EmptyInput("category profiles"));
    }
    let mut divergences = Vec::with_capacity(profiles.len());
    for profile in profiles {
        divergences.push(js_divergence(&query_ds.histogram, &profile.histogram)?);
    }
    let mut best = 0;
    for (i, &d) in divergences.iter().enumerate() {
        if d < divergences[best] {
            best = i;
        }
    }
    Ok((best, divergences))
}

/// Worst-case divergence between profiles built from alternative typical
/// frames of the same category. Errors with fewer than two typicals.
pub fn profile_stability(
    all_ds: &[DsDescriptor],
    typicals: &[DsDescriptor],
    sigma: f64,
) -> Result<f64> {
    if typicals.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "profile stability needs at least 2 typical frames, got {}",
            typicals.len()
        )));
    }
    let profiles: Vec<CategoryProfile> = typicals
        .iter()
        .map(|t| build_scp(all_ds, t, sigma, ""))
        .collect::<Result<_>>()?;
    let mut max = 0.0f64;
    for i in 0..profiles.len() {
        for j in (i + 1)..profiles.len() {
            let d = js_divergence(&profiles[i].histogram, &profiles[j].histogram)?;
            max = max.max(d);
        }
    }
    Ok(max)
}

/// Export descriptors as CSV: `frame` plus one probability column per bin.
pub fn write_ds_csv(path: impl AsRef<Path>, descriptors: &[DsDescriptor]) -> Result<()> {
    let path = path.as_ref();
    if descriptors.is_empty() {
        return Err(Error::EmptyInput("descriptor set"));
    }
    let bins = descriptors[0].histogram.bin_count();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let mut header = String::from("frame");
    for b in 0..bins {
        header.push_str(&format!(",b{b}"));
    }
    header.push('\n');
    out.write_all(header.as_bytes()).map_err(io)?;
    for ds in descriptors {
        let mut line = format!("{}", ds.frame_ref);
        for p in ds.histogram.probs() {
            line.push_str(&format!(",{p}"));
        }
        line.push('\n');
        out.write_all(line.as_bytes()).map_err(io)?;
    }
    out.flush().map_err(io)
}
