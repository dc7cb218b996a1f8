//! Reference labels, the category similarity matrix, and classification
//! metrics.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::pca::pca2;
use crate::sampling::AnchorSet;

/// Per-frame category labels with their vocabulary.
///
/// Labels are stored as indices into the vocabulary, which keeps the order
/// of first appearance. Every frame between two anchors shares the label
/// of the segment that starts at the earlier anchor; frames before the
/// first anchor take the first segment's label, frames from the last
/// anchor onward take the last.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceLabels {
    vocab: Vec<String>,
    ids: Vec<u32>,
}

impl ReferenceLabels {
    /// Build from one label string per frame.
    pub fn from_frame_labels<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyInput("frame labels"));
        }
        let mut vocab: Vec<String> = Vec::new();
        let mut ids = Vec::with_capacity(labels.len());
        for label in labels {
            let label = label.as_ref();
            let id = match vocab.iter().position(|v| v == label) {
                Some(i) => i,
                None => {
                    vocab.push(label.to_string());
                    vocab.len() - 1
                }
            };
            ids.push(id as u32);
        }
        Ok(ReferenceLabels { vocab, ids })
    }

    /// Number of frames.
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Vocabulary in order of first appearance.
    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn label(&self, frame: usize) -> &str {
        &self.vocab[self.ids[frame] as usize]
    }

    pub fn id(&self, frame: usize) -> usize {
        self.ids[frame] as usize
    }

    /// Frame count per vocabulary entry.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.vocab.len()];
        for &id in &self.ids {
            counts[id as usize] += 1;
        }
        counts
    }
}

/// Expand per-segment labels to per-frame labels using the anchors as
/// segment delimiters. `per_segment` must hold exactly one label per
/// anchor (the segment starting at that anchor).
pub fn segment_labels(anchors: &AnchorSet, per_segment: &[String]) -> Result<ReferenceLabels> {
    if per_segment.len() != anchors.len() {
        return Err(Error::InvalidParameter(format!(
            "{} segment labels for {} anchors",
            per_segment.len(),
            anchors.len()
        )));
    }
    let stream_length = anchors.stream_length();
    let indices = anchors.indices();
    let mut frame_labels: Vec<&str> = Vec::with_capacity(stream_length);
    let mut segment = 0usize;
    for frame in 0..stream_length {
        while segment + 1 < indices.len() && frame >= indices[segment + 1] {
            segment += 1;
        }
        // Frames before the first anchor inherit the first segment label.
        frame_labels.push(&per_segment[segment]);
    }
    ReferenceLabels::from_frame_labels(&frame_labels)
}

/// Mean pairwise cosine similarity between all frames of two categories,
/// for every category pair. Symmetric, entries in `[-1, 1]`, ordered by
/// the label vocabulary. Errors if any vocabulary entry has no frames or
/// lengths mismatch.
pub fn category_similarity_matrix(
    embeddings: &[Embedding],
    labels: &ReferenceLabels,
) -> Result<Vec<Vec<f64>>> {
    if embeddings.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            left: embeddings.len(),
            right: labels.len(),
        });
    }
    if embeddings.is_empty() {
        return Err(Error::EmptyInput("embeddings"));
    }
    let n_cat = labels.vocab().len();
    let counts = labels.counts();
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidParameter(format!(
            "category {:?} has no frames",
            labels.vocab()[empty]
        )));
    }
    let dim = embeddings[0].dim();
    // Sum of embeddings per category; the mean pairwise dot product
    // factorizes as dot(sum_a, sum_b) / (|a| * |b|).
    let mut sums = vec![vec![0.0; dim]; n_cat];
    for (i, z) in embeddings.iter().enumerate() {
        if z.dim() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: z.dim(),
            });
        }
        let sum = &mut sums[labels.id(i)];
        for (s, &v) in sum.iter_mut().zip(z.values()) {
            *s += v;
        }
    }
    let mut matrix = vec![vec![0.0; n_cat]; n_cat];
    for a in 0..n_cat {
        for b in 0..n_cat {
            let dot: f64 = sums[a].iter().zip(&sums[b]).map(|(x, y)| x * y).sum();
            matrix[a][b] = dot / (counts[a] as f64 * counts[b] as f64);
        }
    }
    Ok(matrix)
}

/// Confusion counts and accuracy of predictions against reference labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Label order for the confusion matrix: reference vocabulary first,
    /// then any prediction-only labels.
    pub labels: Vec<String>,
    /// `confusion[r][p]` counts frames with reference `r` predicted as `p`.
    pub confusion: Vec<Vec<usize>>,
    pub overall_accuracy: f64,
    pub per_class: Vec<ClassStats>,
    /// Category similarity matrix over the reference vocabulary, when
    /// embeddings were supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub category_similarity: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub label: String,
    /// Reference frames of this class.
    pub support: usize,
    /// Correctly predicted frames (the matrix diagonal).
    pub matched: usize,
    /// matched / support.
    pub accuracy: f64,
}

/// Compare predictions against reference labels frame by frame.
pub fn confusion_and_accuracy(
    predicted: &ReferenceLabels,
    reference: &ReferenceLabels,
) -> Result<EvalReport> {
    if predicted.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            left: predicted.len(),
            right: reference.len(),
        });
    }
    let mut labels: Vec<String> = reference.vocab().to_vec();
    for label in predicted.vocab() {
        if !labels.contains(label) {
            labels.push(label.clone());
        }
    }
    let index_of = |label: &str| labels.iter().position(|l| l == label).unwrap();
    let n = labels.len();
    let mut confusion = vec![vec![0usize; n]; n];
    let mut matched_total = 0usize;
    for frame in 0..reference.len() {
        let r = index_of(reference.label(frame));
        let p = index_of(predicted.label(frame));
        confusion[r][p] += 1;
        if r == p {
            matched_total += 1;
        }
    }
    let per_class = labels
        .iter()
        .enumerate()
        .map(|(r, label)| {
            let support: usize = confusion[r].iter().sum();
            let matched = confusion[r][r];
            ClassStats {
                label: label.clone(),
                support,
                matched,
                accuracy: if support > 0 {
                    matched as f64 / support as f64
                } else {
                    0.0
                },
            }
        })
        .collect();
    Ok(EvalReport {
        labels,
        confusion,
        overall_accuracy: matched_total as f64 / reference.len() as f64,
        per_class,
        category_similarity: None,
    })
}

impl EvalReport {
    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidParameter(format!("report serialization: {e}")))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Write the confusion matrix as CSV: one row per reference label, one
    /// column per predicted label.
    pub fn write_confusion_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("reference");
        for label in &self.labels {
            out.push_str(&format!(",{label}"));
        }
        out.push('\n');
        for (r, label) in self.labels.iter().enumerate() {
            out.push_str(label);
            for count in &self.confusion[r] {
                out.push_str(&format!(",{count}"));
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Export a 2-component projection of the embeddings as CSV with columns
/// `frame,x,y,reference_label`, for external plotting.
pub fn write_pca_csv(
    path: impl AsRef<Path>,
    embeddings: &[Embedding],
    labels: &ReferenceLabels,
) -> Result<()> {
    let path = path.as_ref();
    if embeddings.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            left: embeddings.len(),
            right: labels.len(),
        });
    }
    let coords = pca2(embeddings)?;
    let mut out = String::from("frame,x,y,reference_label\n");
    for (frame, c) in coords.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            frame,
            c[0],
            c[1],
            labels.label(frame)
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
