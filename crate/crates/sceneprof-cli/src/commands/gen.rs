//! `gen`: synthesize a stream with anchors and segment labels.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use sceneprof::sampling::write_anchor_indices;
use sceneprof::synthgen::{generate, SynthConfig};

use crate::config::{ensure_out_dir, FileConfig, Resolved};

#[derive(Args)]
pub struct GenArgs {
    /// Output directory for stream.csv, anchors.txt, segment_labels.txt.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional key=value config file; flags override file values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed for the category centers (defaults to --seed), so streams
    /// with different seeds can share centers.
    #[arg(long)]
    pub center_seed: Option<u64>,
    #[arg(long)]
    pub categories: Option<usize>,
    #[arg(long)]
    pub segments: Option<usize>,
    #[arg(long)]
    pub min_seg_frames: Option<usize>,
    #[arg(long)]
    pub max_seg_frames: Option<usize>,
    #[arg(long)]
    pub d_in: Option<usize>,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub drift: Option<f64>,
    /// Overlay the last category on the first category's center.
    #[arg(long)]
    pub overlay: Option<bool>,
}

pub fn run(args: GenArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let mut resolved = Resolved::new();
    let defaults = SynthConfig::default();

    let seed = resolved.setting("seed", args.seed, &file, defaults.seed)?;
    let cfg = SynthConfig {
        n_categories: resolved.setting(
            "categories",
            args.categories,
            &file,
            defaults.n_categories,
        )?,
        n_segments: resolved.setting("segments", args.segments, &file, defaults.n_segments)?,
        min_segment_frames: resolved.setting(
            "min_seg_frames",
            args.min_seg_frames,
            &file,
            defaults.min_segment_frames,
        )?,
        max_segment_frames: resolved.setting(
            "max_seg_frames",
            args.max_seg_frames,
            &file,
            defaults.max_segment_frames,
        )?,
        d_in: resolved.setting("d_in", args.d_in, &file, defaults.d_in)?,
        cluster_separation: resolved.setting(
            "separation",
            args.separation,
            &file,
            defaults.cluster_separation,
        )?,
        drift_scale: resolved.setting("drift", args.drift, &file, defaults.drift_scale)?,
        overlay_events: resolved.setting(
            "overlay",
            args.overlay,
            &file,
            defaults.overlay_events,
        )?,
        seed,
        center_seed: resolved.optional("center_seed", args.center_seed, &file)?,
    };

    ensure_out_dir(&args.out)?;
    let data = generate(&cfg)?;

    let stream_path = args.out.join("stream.csv");
    data.stream.write_csv(&stream_path)?;
    write_anchor_indices(args.out.join("anchors.txt"), &data.anchors)?;
    let labels_path = args.out.join("segment_labels.txt");
    let mut labels_text = String::new();
    for label in &data.segment_labels {
        labels_text.push_str(label);
        labels_text.push('\n');
    }
    std::fs::write(&labels_path, labels_text)
        .with_context(|| format!("cannot write {}", labels_path.display()))?;
    resolved.write(&args.out)?;

    println!(
        "generated {} frames in {} segments ({} categories) -> {}",
        data.stream.len(),
        data.segment_labels.len(),
        cfg.n_categories,
        args.out.display()
    );
    Ok(())
}
