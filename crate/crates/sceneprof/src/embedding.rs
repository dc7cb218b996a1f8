//! Unit-norm embeddings and cosine similarity.

use crate::error::{Error, Result};

/// Default embedding dimensionality.
pub const DEFAULT_EMBED_DIM: usize = 128;

/// Tolerance on the Euclidean norm of a valid embedding.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// A unit-norm feature vector in the learned similarity space.
///
/// Invariants: every entry is finite and the Euclidean norm is 1 within
/// [`NORM_TOLERANCE`]. Construction goes through [`Embedding::new`], which
/// enforces both.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    /// Wrap an already-normalized vector, validating the invariants.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("embedding"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding"));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "embedding norm {norm} is not 1 within {NORM_TOLERANCE}"
            )));
        }
        Ok(Embedding { values })
    }

    /// Normalize an arbitrary finite vector onto the unit sphere.
    ///
    /// Errors if the input norm is below `1e-12`; callers that need a
    /// degenerate fallback handle that case themselves.
    pub fn from_unnormalized(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("embedding"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding"));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::InvalidParameter(
                "cannot normalize a (near-)zero vector".into(),
            ));
        }
        for v in &mut values {
            *v /= norm;
        }
        Ok(Embedding { values })
    }

    /// The `i`-th standard basis vector in `dim` dimensions.
    pub fn basis(dim: usize, i: usize) -> Result<Self> {
        if dim == 0 || i >= dim {
            return Err(Error::InvalidParameter(format!(
                "basis index {i} out of range for dimension {dim}"
            )));
        }
        let mut values = vec![0.0; dim];
        values[i] = 1.0;
        Ok(Embedding { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl AsRef<[f64]> for Embedding {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Cosine similarity of two unit-norm embeddings.
///
/// Both inputs are unit vectors, so this is their dot product, clamped to
/// `[-1, 1]` to absorb rounding. Errors on dimension mismatch.
pub fn cosine_sim(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let dot: f64 = a
        .values
        .iter()
        .zip(b.values.iter())
        .map(|(x, y)| x * y)
        .sum();
    Ok(dot.clamp(-1.0, 1.0))
}
