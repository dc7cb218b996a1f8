//! `profile`: build one category profile per typical frame.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use sceneprof::encoder::{encode_stream, EncoderParams};
use sceneprof::histogram::DEFAULT_BIN_COUNT;
use sceneprof::profiler::{build_scp, compute_all_ds, write_ds_csv, DEFAULT_SIGMA};
use sceneprof::FrameStream;

use crate::config::{ensure_out_dir, FileConfig, Resolved};

#[derive(Args)]
pub struct ProfileArgs {
    /// Trained model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Training stream CSV (the reference set for descriptors).
    #[arg(long)]
    pub stream: PathBuf,
    /// Typical frame per category as CATEGORY=FRAME; repeatable.
    #[arg(long = "typical", value_name = "CATEGORY=FRAME", required = true)]
    pub typicals: Vec<String>,
    /// Output directory for `profile_<category>.json` files.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional key=value config file; flags override file values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Divergence gate threshold.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Histogram bin count.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Also export every frame's descriptor to ds.csv.
    #[arg(long)]
    pub export_ds: bool,
    /// Report support counts over a sigma range LO:HI:STEPS into
    /// sigma_sweep.csv, to help calibrate --sigma.
    #[arg(long, value_name = "LO:HI:STEPS")]
    pub sigma_sweep: Option<String>,
}

fn parse_typical(raw: &str) -> Result<(String, usize)> {
    let Some((category, frame)) = raw.split_once('=') else {
        bail!("--typical expects CATEGORY=FRAME, found {raw:?}");
    };
    let category = category.trim();
    if category.is_empty()
        || !category
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    {
        bail!("bad category name {category:?} (alphanumeric, _ and - only)");
    }
    let frame: usize = frame
        .trim()
        .parse()
        .with_context(|| format!("bad frame index in {raw:?}"))?;
    Ok((category.to_string(), frame))
}

fn parse_sweep(raw: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = raw.split(':').collect();
    if parts.len() != 3 {
        bail!("--sigma-sweep expects LO:HI:STEPS, found {raw:?}");
    }
    let lo: f64 = parts[0].parse().context("bad sweep LO")?;
    let hi: f64 = parts[1].parse().context("bad sweep HI")?;
    let steps: usize = parts[2].parse().context("bad sweep STEPS")?;
    if lo <= 0.0 || !lo.is_finite() || hi < lo || steps < 2 {
        bail!("--sigma-sweep needs 0 < LO <= HI and STEPS >= 2");
    }
    Ok((lo, hi, steps))
}

pub fn run(args: ProfileArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let mut resolved = Resolved::new();
    let sigma = resolved.setting("sigma", args.sigma, &file, DEFAULT_SIGMA)?;
    let bins = resolved.setting("bins", args.bins, &file, DEFAULT_BIN_COUNT)?;
    resolved.note("model", args.model.display());
    resolved.note("stream", args.stream.display());

    let typicals = args
        .typicals
        .iter()
        .map(|raw| parse_typical(raw))
        .collect::<Result<Vec<_>>>()?;
    for (i, (category, frame)) in typicals.iter().enumerate() {
        for (other, _) in &typicals[..i] {
            if other == category {
                bail!("duplicate category {category:?} in --typical");
            }
        }
        resolved.note(&format!("typical.{category}"), frame);
    }

    let params = EncoderParams::load(&args.model)?;
    let stream = FrameStream::read_csv(&args.stream)?;
    for (category, frame) in &typicals {
        if *frame >= stream.len() {
            bail!(
                "typical frame {frame} for category {category:?} is out of range (stream has {} frames)",
                stream.len()
            );
        }
    }

    let embeddings = encode_stream(&params, &stream)?;
    let all_ds = compute_all_ds(&embeddings, bins)?;

    ensure_out_dir(&args.out)?;
    for (category, frame) in &typicals {
        let profile = build_scp(&all_ds, &all_ds[*frame], sigma, category.clone())?;
        let path = args.out.join(format!("profile_{category}.json"));
        profile.save_json(&path)?;
        println!(
            "profile {category}: typical frame {frame}, support {} of {} -> {}",
            profile.support_count,
            all_ds.len(),
            path.display()
        );
    }

    if args.export_ds {
        write_ds_csv(args.out.join("ds.csv"), &all_ds)?;
        resolved.note("export_ds", true);
    }

    if let Some(raw) = &args.sigma_sweep {
        let (lo, hi, steps) = parse_sweep(raw)?;
        resolved.note("sigma_sweep", raw);
        let mut text = String::from("sigma,category,support_count\n");
        for step in 0..steps {
            let s = lo + (hi - lo) * step as f64 / (steps - 1) as f64;
            for (category, frame) in &typicals {
                let profile = build_scp(&all_ds, &all_ds[*frame], s, category.clone())?;
                text.push_str(&format!("{s},{category},{}\n", profile.support_count));
            }
        }
        let path = args.out.join("sigma_sweep.csv");
        std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    }

    resolved.write(&args.out)?;
    Ok(())
}
