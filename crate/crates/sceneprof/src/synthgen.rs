//! Seeded synthetic stream generator.
//!
//! Produces a labeled stream of per-frame feature vectors organized as
//! segments: each segment draws a category different from its
//! predecessor, and its frames are the category center plus a smooth
//! within-segment drift plus per-frame noise. An anchor sits at every
//! segment start, so the neighborhood-consistency assumption holds by
//! construction for any `delta` smaller than the shortest segment. The
//! drift makes frames temporally continuous the way video is, which keeps
//! the similarity distributions structured instead of trivially
//! separable.
//!
//! Scales: per-frame noise has unit standard deviation per coordinate and
//! the drift adds `drift_scale` on top; `cluster_separation` is the
//! expected inter-center distance divided by the within-cluster scale
//! (the expected distance between two frames of one cluster).

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::evaluation::ReferenceLabels;
use crate::sampling::AnchorSet;
use crate::seeds;
use crate::stream::FrameStream;

/// Low-pass coefficient of the within-segment drift process.
const DRIFT_SMOOTHING: f64 = 0.95;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_categories: usize,
    pub min_segment_frames: usize,
    pub max_segment_frames: usize,
    pub n_segments: usize,
    pub d_in: usize,
    /// Ratio of expected inter-center distance to the within-cluster
    /// scale.
    pub cluster_separation: f64,
    /// Stationary per-coordinate amplitude of the smooth within-segment
    /// wander, as a fraction of `cluster_separation` in noise-sigma units.
    pub drift_scale: f64,
    /// Generate the last category as events overlaid on the first
    /// category's center (applies with 3 or more categories).
    pub overlay_events: bool,
    pub seed: u64,
    /// Separate seed for the category centers, so streams with different
    /// `seed`s can share centers. Defaults to `seed`.
    pub center_seed: Option<u64>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_categories: 3,
            min_segment_frames: 60,
            max_segment_frames: 240,
            n_segments: 40,
            d_in: 32,
            cluster_separation: 4.0,
            drift_scale: 0.1,
            overlay_events: true,
            seed: 42,
            center_seed: None,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_categories < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 categories, got {}",
                self.n_categories
            )));
        }
        if self.n_segments == 0 || self.d_in == 0 || self.min_segment_frames == 0 {
            return Err(Error::InvalidParameter(
                "segment count, frame dimension and segment lengths must be positive".into(),
            ));
        }
        if self.min_segment_frames > self.max_segment_frames {
            return Err(Error::InvalidParameter(format!(
                "min segment length {} exceeds max {}",
                self.min_segment_frames, self.max_segment_frames
            )));
        }
        if self.cluster_separation <= 0.0 || !self.cluster_separation.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cluster separation must be positive, got {}",
                self.cluster_separation
            )));
        }
        if self.drift_scale < 0.0 || !self.drift_scale.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "drift scale must be non-negative, got {}",
                self.drift_scale
            )));
        }
        Ok(())
    }

    /// Label of category `c`.
    pub fn category_label(c: usize) -> String {
        format!("cat{c}")
    }
}

/// A generated stream with its supervision and ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub stream: FrameStream,
    /// Anchor frame indices (segment starts). `delta` is a consumer
    /// parameter; build an [`AnchorSet`] with [`SynthData::anchor_set`].
    pub anchors: Vec<usize>,
    /// One category label per segment, aligned with `anchors`.
    pub segment_labels: Vec<String>,
    /// True per-frame labels.
    pub frame_labels: ReferenceLabels,
}

impl SynthData {
    /// Bind the emitted anchors to a neighborhood half-width.
    pub fn anchor_set(&self, delta: usize) -> Result<AnchorSet> {
        AnchorSet::new(self.anchors.clone(), delta, self.stream.len())
    }
}

/// Generate a stream. Fully determined by the config; consecutive
/// segments always differ in category.
pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;

    let center_seed = cfg.center_seed.unwrap_or(cfg.seed);
    let mut center_rng = StdRng::seed_from_u64(seeds::derive(center_seed, seeds::SYNTH_CENTERS));
    // Per-frame noise has unit sigma per coordinate; the wander adds
    // drift_scale * cluster_separation on top. The within-cluster scale
    // (expected distance between two frames of one cluster) is sqrt(2 d)
    // times the combined per-coordinate sigma, and centers drawn with
    // sigma equal to cluster_separation times that combined sigma put the
    // expected inter-center distance at cluster_separation times the
    // within-cluster scale.
    let drift_amp = cfg.drift_scale * cfg.cluster_separation;
    let within_sigma = (1.0 + drift_amp * drift_amp).sqrt();
    let center_sigma = cfg.cluster_separation * within_sigma;
    let center_normal = Normal::new(0.0, center_sigma).unwrap();
    let mut centers: Vec<Vec<f64>> = (0..cfg.n_categories)
        .map(|_| {
            (0..cfg.d_in)
                .map(|_| center_normal.sample(&mut center_rng))
                .collect()
        })
        .collect();
    if cfg.overlay_events && cfg.n_categories >= 3 {
        // Last category = first category's center plus an event offset at
        // 0.8 of the typical center distance, keeping it the closest pair.
        let event_normal = Normal::new(0.0, 0.8 * center_sigma * 2f64.sqrt()).unwrap();
        let last = cfg.n_categories - 1;
        centers[last] = centers[0]
            .iter()
            .map(|&v| v + event_normal.sample(&mut center_rng))
            .collect();
    }

    let mut rng = StdRng::seed_from_u64(seeds::derive(cfg.seed, seeds::SYNTH_STREAM));
    let drift_step = (1.0 - DRIFT_SMOOTHING * DRIFT_SMOOTHING).sqrt();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut anchors = Vec::with_capacity(cfg.n_segments);
    let mut segment_labels = Vec::with_capacity(cfg.n_segments);
    let mut frame_labels: Vec<String> = Vec::new();
    let mut prev_category: Option<usize> = None;

    for _ in 0..cfg.n_segments {
        // Category 0 is the dominant background scene the stream keeps
        // returning to, so category proportions end up skewed the way the
        // similarity-distribution descriptors rely on.
        let category = match prev_category {
            None => 0,
            Some(0) => rng.random_range(1..cfg.n_categories),
            Some(prev) => {
                if cfg.n_categories == 2 || rng.random_bool(0.7) {
                    0
                } else {
                    let mut c = rng.random_range(1..cfg.n_categories - 1);
                    if c >= prev {
                        c += 1;
                    }
                    c
                }
            }
        };
        prev_category = Some(category);
        let length = rng.random_range(cfg.min_segment_frames..=cfg.max_segment_frames);
        let label = SynthConfig::category_label(category);

        anchors.push(rows.len());
        segment_labels.push(label.clone());

        let center = &centers[category];
        let mut drift = vec![0.0; cfg.d_in];
        for _ in 0..length {
            let mut frame = Vec::with_capacity(cfg.d_in);
            for k in 0..cfg.d_in {
                let xi: f64 = StandardNormal.sample(&mut rng);
                drift[k] = DRIFT_SMOOTHING * drift[k] + drift_step * xi;
                frame.push(center[k] + drift_amp * drift[k]);
            }
            for value in frame.iter_mut() {
                let eta: f64 = StandardNormal.sample(&mut rng);
                *value += eta;
            }
            rows.push(frame);
            frame_labels.push(label.clone());
        }
    }

    Ok(SynthData {
        stream: FrameStream::from_rows(cfg.d_in, rows)?,
        anchors,
        segment_labels,
        frame_labels: ReferenceLabels::from_frame_labels(&frame_labels)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::segment_labels;

    #[test]
    fn two_segments_two_anchors_differing_labels() {
        let cfg = SynthConfig {
            n_segments: 2,
            min_segment_frames: 10,
            max_segment_frames: 20,
            d_in: 4,
            ..SynthConfig::default()
        };
        let data = generate(&cfg).unwrap();
        assert_eq!(data.anchors.len(), 2);
        assert_eq!(data.segment_labels.len(), 2);
        assert_ne!(data.segment_labels[0], data.segment_labels[1]);
        assert_eq!(data.anchors[0], 0);
    }

    #[test]
    fn consecutive_segment_labels_always_differ() {
        let data = generate(&SynthConfig::default()).unwrap();
        for pair in data.segment_labels.windows(2) {
            assert_ne!(pair[0], pair[1]);
        }
    }

    #[test]
    fn extreme_separation_makes_nearest_mean_classification_perfect() {
        let cfg = SynthConfig {
            cluster_separation: 100.0,
            n_segments: 12,
            min_segment_frames: 20,
            max_segment_frames: 40,
            ..SynthConfig::default()
        };
        let data = generate(&cfg).unwrap();
        let labels = &data.frame_labels;
        let n_cat = labels.vocab().len();
        let dim = data.stream.dim();
        // Empirical category means.
        let mut means = vec![vec![0.0; dim]; n_cat];
        let counts = labels.counts();
        for i in 0..data.stream.len() {
            let m = &mut means[labels.id(i)];
            for (acc, &v) in m.iter_mut().zip(data.stream.frame(i)) {
                *acc += v;
            }
        }
        for (m, &c) in means.iter_mut().zip(&counts) {
            for v in m.iter_mut() {
                *v /= c as f64;
            }
        }
        for i in 0..data.stream.len() {
            let frame = data.stream.frame(i);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, m) in means.iter().enumerate() {
                let d: f64 = frame.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            assert_eq!(best, labels.id(i), "frame {i}");
        }
    }

    #[test]
    fn within_segment_distances_below_between_segment_distances() {
        let data = generate(&SynthConfig::default()).unwrap();
        let n = data.stream.len();
        // Segment id per frame.
        let mut segment_of = vec![0usize; n];
        for (seg, window) in data.anchors.windows(2).enumerate() {
            segment_of[window[0]..window[1]].fill(seg);
        }
        segment_of[*data.anchors.last().unwrap()..n].fill(data.anchors.len() - 1);
        // Brute-force pairwise distances.
        let mut within_sum = 0.0;
        let mut within_count = 0u64;
        let mut between_sum = 0.0;
        let mut between_count = 0u64;
        for i in 0..n {
            let fi = data.stream.frame(i);
            for j in (i + 1)..n {
                let fj = data.stream.frame(j);
                let dist: f64 = fi
                    .iter()
                    .zip(fj)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if segment_of[i] == segment_of[j] {
                    within_sum += dist;
                    within_count += 1;
                } else {
                    between_sum += dist;
                    between_count += 1;
                }
            }
        }
        let within_mean = within_sum / within_count as f64;
        let between_mean = between_sum / between_count as f64;
        assert!(
            within_mean < between_mean,
            "within {within_mean} !< between {between_mean}"
        );
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = SynthConfig::default();
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a, b);
        let c = generate(&SynthConfig {
            seed: 43,
            ..SynthConfig::default()
        })
        .unwrap();
        assert_ne!(a.stream, c.stream);
    }

    #[test]
    fn center_seed_decouples_centers_from_stream_randomness() {
        let base = SynthConfig {
            n_segments: 30,
            ..SynthConfig::default()
        };
        let a = generate(&base).unwrap();
        let b = generate(&SynthConfig {
            seed: 99,
            center_seed: Some(base.seed),
            ..base.clone()
        })
        .unwrap();
        let c = generate(&SynthConfig {
            seed: 99,
            center_seed: Some(12345),
            ..base.clone()
        })
        .unwrap();

        let mean_of = |data: &SynthData, label: &str| -> Vec<f64> {
            let mut m = vec![0.0; data.stream.dim()];
            let mut count = 0usize;
            for i in 0..data.stream.len() {
                if data.frame_labels.label(i) == label {
                    for (acc, &v) in m.iter_mut().zip(data.stream.frame(i)) {
                        *acc += v;
                    }
                    count += 1;
                }
            }
            m.iter().map(|v| v / count as f64).collect()
        };
        let dist = |x: &[f64], y: &[f64]| {
            x.iter()
                .zip(y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        };
        for c_idx in 0..3 {
            let label = SynthConfig::category_label(c_idx);
            let ma = mean_of(&a, &label);
            let mb = mean_of(&b, &label);
            let mc = mean_of(&c, &label);
            assert!(dist(&ma, &mb) < 2.0, "shared centers drifted apart");
            assert!(dist(&ma, &mc) > 5.0, "distinct centers too close");
        }
    }

    #[test]
    fn anchors_validate_for_any_delta_below_min_segment() {
        let data = generate(&SynthConfig::default()).unwrap();
        let mut seg_lengths: Vec<usize> = data.anchors.windows(2).map(|w| w[1] - w[0]).collect();
        seg_lengths.push(data.stream.len() - data.anchors.last().unwrap());
        let min_len = *seg_lengths.iter().min().unwrap();
        for delta in [0, 1, 15, min_len - 1] {
            assert!(data.anchor_set(delta).is_ok(), "delta {delta}");
        }
        assert!(data.anchor_set(min_len).is_err());
    }

    #[test]
    fn delta_windows_stay_inside_their_segment_category() {
        let data = generate(&SynthConfig::default()).unwrap();
        let anchors = data.anchor_set(15).unwrap();
        for (ordinal, label) in data.segment_labels.iter().enumerate() {
            let (lo, hi) = anchors.window(ordinal + 1).unwrap();
            for frame in lo..=hi {
                assert_eq!(data.frame_labels.label(frame), label);
            }
        }
    }

    #[test]
    fn frame_labels_match_segment_expansion_exactly() {
        let data = generate(&SynthConfig::default()).unwrap();
        let anchors = data.anchor_set(0).unwrap();
        let expanded = segment_labels(&anchors, &data.segment_labels).unwrap();
        assert_eq!(data.frame_labels, expanded);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = |f: fn(&mut SynthConfig)| {
            let mut cfg = SynthConfig::default();
            f(&mut cfg);
            generate(&cfg).is_err()
        };
        assert!(bad(|c| c.n_categories = 1));
        assert!(bad(|c| c.min_segment_frames = 0));
        assert!(bad(|c| {
            c.min_segment_frames = 50;
            c.max_segment_frames = 10;
        }));
        assert!(bad(|c| c.cluster_separation = 0.0));
        assert!(bad(|c| c.drift_scale = -1.0));
        assert!(bad(|c| c.d_in = 0));
    }
}
