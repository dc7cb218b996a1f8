//! `train`: fit the encoder on a stream with anchor supervision.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Args;
use sceneprof::encoder::{train, write_loss_csv, TrainConfig};
use sceneprof::sampling::read_anchor_indices;
use sceneprof::{AnchorSet, FrameStream};

use crate::config::{ensure_out_dir, FileConfig, Resolved};

#[derive(Args)]
pub struct TrainArgs {
    /// Stream CSV (dimension header, one frame per line).
    #[arg(long)]
    pub stream: PathBuf,
    /// Anchor file, one strictly increasing frame index per line.
    #[arg(long)]
    pub anchors: PathBuf,
    /// Output directory for model.bin and loss.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional key=value config file; flags override file values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub n_neg: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Anchor neighborhood half-width in frames.
    #[arg(long)]
    pub delta: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
}

pub fn run(args: TrainArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let mut resolved = Resolved::new();
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        temperature: resolved.setting("tau", args.tau, &file, defaults.temperature)?,
        n_neg: resolved.setting("n_neg", args.n_neg, &file, defaults.n_neg)?,
        learning_rate: resolved.setting("lr", args.lr, &file, defaults.learning_rate)?,
        momentum: resolved.setting("momentum", args.momentum, &file, defaults.momentum)?,
        epochs: resolved.setting("epochs", args.epochs, &file, defaults.epochs)?,
        seed: resolved.setting("seed", args.seed, &file, defaults.seed)?,
        delta: resolved.setting("delta", args.delta, &file, defaults.delta)?,
        embed_dim: resolved.setting("embed_dim", args.embed_dim, &file, defaults.embed_dim)?,
        hidden: resolved.setting("hidden", args.hidden, &file, defaults.hidden)?,
    };
    resolved.note("stream", args.stream.display());
    resolved.note("anchors", args.anchors.display());

    let stream = FrameStream::read_csv(&args.stream)?;
    let indices = read_anchor_indices(&args.anchors)?;
    let anchors = AnchorSet::new(indices, cfg.delta, stream.len()).with_context(|| {
        format!(
            "anchors from {} are inconsistent with stream {} ({} frames)",
            args.anchors.display(),
            args.stream.display(),
            stream.len()
        )
    })?;

    ensure_out_dir(&args.out)?;
    let started = Instant::now();
    let outcome = train(&stream, &anchors, &cfg)?;
    let elapsed = started.elapsed();

    let model_path = args.out.join("model.bin");
    outcome.params.save(&model_path)?;
    write_loss_csv(args.out.join("loss.csv"), &outcome.loss_trace)?;
    resolved.write(&args.out)?;

    let mean_loss = |records: &[sceneprof::encoder::TrainRecord]| {
        if records.is_empty() {
            0.0
        } else {
            records.iter().map(|r| r.loss).sum::<f64>() / records.len() as f64
        }
    };
    let per_epoch = anchors.len();
    let (first, last) = if outcome.loss_trace.len() >= per_epoch {
        (
            mean_loss(&outcome.loss_trace[..per_epoch]),
            mean_loss(&outcome.loss_trace[outcome.loss_trace.len() - per_epoch..]),
        )
    } else {
        (0.0, 0.0)
    };
    println!(
        "trained {} steps in {:.2?} (first-epoch loss {first:.6}, last-epoch loss {last:.6}) -> {}",
        outcome.loss_trace.len(),
        elapsed,
        model_path.display()
    );
    Ok(())
}
