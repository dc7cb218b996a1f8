//! `classify`: label query frames by minimum divergence to the profiles.
//!
//! Descriptors are always computed against the training stream, also for
//! out-of-stream queries. Wall-clock timings go to stdout only, so the
//! output files stay byte-identical across runs.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;
use sceneprof::encoder::{encode_stream, EncoderParams};
use sceneprof::profiler::{classify, compute_ds, CategoryProfile};
use sceneprof::FrameStream;

use crate::config::{ensure_out_dir, Resolved};

#[derive(Args)]
pub struct ClassifyArgs {
    /// Trained model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Training stream CSV (the descriptor reference set).
    #[arg(long)]
    pub train_stream: PathBuf,
    /// Directory holding `profile_<category>.json` files.
    #[arg(long)]
    pub profiles_dir: PathBuf,
    /// Query stream CSV to classify.
    #[arg(long)]
    pub query: PathBuf,
    /// Output directory for predictions.csv.
    #[arg(long)]
    pub out: PathBuf,
}

/// Load profiles sorted by file name; that order defines the category
/// ordinals used for tie-breaking and the CSV column order.
pub fn load_profiles(dir: &PathBuf) -> Result<Vec<CategoryProfile>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read profiles directory {}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.starts_with("profile_") && n.ends_with(".json"))
                .unwrap_or(false)
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no profile_*.json files in {}", dir.display());
    }
    let profiles = paths
        .iter()
        .map(CategoryProfile::load_json)
        .collect::<Result<Vec<_>, _>>()?;
    let bins = profiles[0].histogram.bin_count();
    for (profile, path) in profiles.iter().zip(&paths) {
        if profile.histogram.bin_count() != bins {
            bail!(
                "{}: bin count {} does not match {} of the first profile",
                path.display(),
                profile.histogram.bin_count(),
                bins
            );
        }
    }
    Ok(profiles)
}

pub fn run(args: ClassifyArgs) -> Result<()> {
    let mut resolved = Resolved::new();
    resolved.note("model", args.model.display());
    resolved.note("train_stream", args.train_stream.display());
    resolved.note("profiles_dir", args.profiles_dir.display());
    resolved.note("query", args.query.display());

    let params = EncoderParams::load(&args.model)?;
    let train_stream = FrameStream::read_csv(&args.train_stream)?;
    let query_stream = FrameStream::read_csv(&args.query)?;
    let profiles = load_profiles(&args.profiles_dir)?;
    let bins = profiles[0].histogram.bin_count();
    resolved.note("bins", bins);

    let t_embed = Instant::now();
    let reference = encode_stream(&params, &train_stream)?;
    let queries = encode_stream(&params, &query_stream)?;
    let embed_elapsed = t_embed.elapsed();

    ensure_out_dir(&args.out)?;
    let mut csv = String::from("frame,predicted");
    for profile in &profiles {
        csv.push_str(&format!(",div_{}", profile.category));
    }
    csv.push('\n');

    let t_classify = Instant::now();
    let mut ds_time = std::time::Duration::ZERO;
    for (i, query) in queries.iter().enumerate() {
        let t_ds = Instant::now();
        let ds = compute_ds(i, query, &reference, bins)?;
        ds_time += t_ds.elapsed();
        let (winner, divergences) = classify(&ds, &profiles)?;
        csv.push_str(&format!("{i},{}", profiles[winner].category));
        for d in divergences {
            csv.push_str(&format!(",{d}"));
        }
        csv.push('\n');
    }
    let classify_elapsed = t_classify.elapsed();

    let predictions_path = args.out.join("predictions.csv");
    std::fs::write(&predictions_path, csv)
        .with_context(|| format!("cannot write {}", predictions_path.display()))?;
    resolved.write(&args.out)?;

    let n = queries.len().max(1) as f64;
    println!(
        "classified {} frames -> {}",
        queries.len(),
        predictions_path.display()
    );
    println!(
        "timing: embed {:.1} ms total, descriptor {:.3} ms/frame, match {:.3} ms/frame",
        embed_elapsed.as_secs_f64() * 1e3,
        ds_time.as_secs_f64() * 1e3 / n,
        (classify_elapsed - ds_time).as_secs_f64() * 1e3 / n
    );
    Ok(())
}
