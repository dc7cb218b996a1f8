//! Weakly supervised scene categorization from per-frame feature streams.
//!
//! The pipeline learns a semantic similarity metric between frames of a
//! stream using only sparse *anchor points* (frame indices where a human
//! marked a change of scene attribute) as supervision. Frames near one
//! anchor are pulled together, frames near successive anchors are pushed
//! apart, via an InfoNCE contrastive objective over a small trainable
//! encoder. Scenes are then described by the distribution of their
//! similarity against the whole training stream (a normalized histogram),
//! categories are profiled by averaging gathered distributions, and
//! queries are labeled by minimum Jensen-Shannon divergence to the
//! profiles.
//!
//! Module map:
//! - [`embedding`], [`histogram`], [`pca`]: shared numeric primitives
//! - [`stream`]: per-frame feature streams and their CSV format
//! - [`sampling`]: anchor sets and contrastive batch construction
//! - [`encoder`]: the trainable encoder, InfoNCE loss, gradients, SGD
//! - [`profiler`]: similarity-distribution descriptors, category
//!   profiles, and divergence-based classification
//! - [`evaluation`]: reference labels, category similarity matrix,
//!   confusion metrics
//! - [`synthgen`]: seeded synthetic stream generator used as ground truth
//!
//! All randomness is derived from caller-supplied seeds through the
//! offsets in [`seeds`]; identical seeds give bit-identical results.
//!
//! The whole pipeline at desk scale:
//!
//! ```
//! use sceneprof::encoder::{encode_stream, train, TrainConfig};
//! use sceneprof::profiler::{build_scp, classify, compute_all_ds};
//! use sceneprof::synthgen::{generate, SynthConfig};
//!
//! let data = generate(&SynthConfig {
//!     n_segments: 6,
//!     min_segment_frames: 20,
//!     max_segment_frames: 30,
//!     d_in: 8,
//!     ..SynthConfig::default()
//! })?;
//!
//! let cfg = TrainConfig {
//!     epochs: 5,
//!     delta: 5,
//!     n_neg: 4,
//!     hidden: 32,
//!     embed_dim: 16,
//!     ..TrainConfig::default()
//! };
//! let outcome = train(&data.stream, &data.anchor_set(cfg.delta)?, &cfg)?;
//!
//! let embeddings = encode_stream(&outcome.params, &data.stream)?;
//! let descriptors = compute_all_ds(&embeddings, 32)?;
//! let profiles = data
//!     .frame_labels
//!     .vocab()
//!     .iter()
//!     .map(|label| {
//!         // One "typical frame" per category: its first anchor window.
//!         let segment = data.segment_labels.iter().position(|l| l == label).unwrap();
//!         build_scp(&descriptors, &descriptors[data.anchors[segment]], 0.1, label)
//!     })
//!     .collect::<sceneprof::Result<Vec<_>>>()?;
//!
//! let (winner, divergences) = classify(&descriptors[0], &profiles)?;
//! assert_eq!(profiles[winner].category, data.frame_labels.label(0));
//! assert_eq!(divergences.len(), profiles.len());
//! # Ok::<(), sceneprof::Error>(())
//! ```

pub mod embedding;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod histogram;
pub mod pca;
pub mod profiler;
pub mod sampling;
pub mod seeds;
pub mod stream;
pub mod synthgen;

pub use embedding::{cosine_sim, Embedding};
pub use encoder::{EncoderParams, TrainConfig};
pub use error::{Error, Result};
pub use evaluation::ReferenceLabels;
pub use histogram::{build_histogram, js_divergence, SimilarityHistogram};
pub use profiler::{CategoryProfile, DsDescriptor};
pub use sampling::{AnchorSet, ContrastiveBatch};
pub use stream::FrameStream;
pub use synthgen::SynthConfig;
