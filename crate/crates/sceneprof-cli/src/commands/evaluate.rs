//! `evaluate`: compare predictions against anchor-derived reference
//! labels and write the metrics report.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use sceneprof::encoder::{encode_stream, EncoderParams};
use sceneprof::evaluation::{
    category_similarity_matrix, confusion_and_accuracy, segment_labels, write_pca_csv,
};
use sceneprof::sampling::read_anchor_indices;
use sceneprof::{AnchorSet, FrameStream, ReferenceLabels};

use crate::config::{ensure_out_dir, Resolved};

#[derive(Args)]
pub struct EvaluateArgs {
    /// predictions.csv written by `classify`.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Anchor file of the evaluated stream.
    #[arg(long)]
    pub anchors: PathBuf,
    /// Per-segment labels, one per anchor.
    #[arg(long)]
    pub segment_labels: PathBuf,
    /// Stream CSV of the evaluated frames.
    #[arg(long)]
    pub stream: PathBuf,
    /// Output directory for metrics.json, confusion.csv, per_frame.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional model file; adds the category similarity matrix and the
    /// 2-component projection export (pca.csv).
    #[arg(long)]
    pub model: Option<PathBuf>,
}

struct Predictions {
    labels: Vec<String>,
    divergence_columns: Vec<String>,
    divergences: Vec<Vec<f64>>,
}

fn read_predictions(path: &Path) -> Result<Predictions> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        bail!("{}:1: empty predictions file", path.display());
    };
    // Tolerate CRLF files from other tooling.
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.len() < 2 || columns[0] != "frame" || columns[1] != "predicted" {
        bail!(
            "{}:1: expected header frame,predicted,div_*, found {header:?}",
            path.display()
        );
    }
    let divergence_columns: Vec<String> = columns[2..]
        .iter()
        .map(|c| {
            c.strip_prefix("div_")
                .map(str::to_string)
                .ok_or_else(|| anyhow::anyhow!("{}:1: bad column {c:?}", path.display()))
        })
        .collect::<Result<_>>()?;

    let mut labels = Vec::new();
    let mut divergences = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            bail!(
                "{}:{}: expected {} fields, found {}",
                path.display(),
                idx + 1,
                columns.len(),
                fields.len()
            );
        }
        let frame: usize = fields[0].parse().with_context(|| {
            format!(
                "{}:{}: bad frame index {:?}",
                path.display(),
                idx + 1,
                fields[0]
            )
        })?;
        if frame != labels.len() {
            bail!(
                "{}:{}: frame {frame} out of order (expected {})",
                path.display(),
                idx + 1,
                labels.len()
            );
        }
        labels.push(fields[1].to_string());
        let divs = fields[2..]
            .iter()
            .map(|f| {
                f.parse::<f64>().with_context(|| {
                    format!("{}:{}: bad divergence {f:?}", path.display(), idx + 1)
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        divergences.push(divs);
    }
    if labels.is_empty() {
        bail!("{}: no prediction rows", path.display());
    }
    Ok(Predictions {
        labels,
        divergence_columns,
        divergences,
    })
}

fn read_segment_labels(path: &Path) -> Result<Vec<String>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let labels: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    if labels.is_empty() {
        bail!("{}:1: no segment labels", path.display());
    }
    Ok(labels)
}

pub fn run(args: EvaluateArgs) -> Result<()> {
    let mut resolved = Resolved::new();
    resolved.note("predictions", args.predictions.display());
    resolved.note("anchors", args.anchors.display());
    resolved.note("segment_labels", args.segment_labels.display());
    resolved.note("stream", args.stream.display());

    let predictions = read_predictions(&args.predictions)?;
    let stream = FrameStream::read_csv(&args.stream)?;
    let anchor_indices = read_anchor_indices(&args.anchors)?;
    let per_segment = read_segment_labels(&args.segment_labels)?;
    // Delta plays no role in labeling; zero keeps any in-range anchor set
    // valid.
    let anchors = AnchorSet::new(anchor_indices, 0, stream.len())?;
    let reference = segment_labels(&anchors, &per_segment)?;

    if predictions.labels.len() != reference.len() {
        bail!(
            "{} has {} rows but the stream has {} frames",
            args.predictions.display(),
            predictions.labels.len(),
            reference.len()
        );
    }
    let predicted = ReferenceLabels::from_frame_labels(&predictions.labels)?;
    let mut report = confusion_and_accuracy(&predicted, &reference)?;

    ensure_out_dir(&args.out)?;

    if let Some(model_path) = &args.model {
        resolved.note("model", model_path.display());
        let params = EncoderParams::load(model_path)?;
        let embeddings = encode_stream(&params, &stream)?;
        report.category_similarity = Some(category_similarity_matrix(&embeddings, &reference)?);
        write_pca_csv(args.out.join("pca.csv"), &embeddings, &reference)?;
    }

    report.save_json(args.out.join("metrics.json"))?;
    report.write_confusion_csv(args.out.join("confusion.csv"))?;

    // Per-frame log: reference and predicted labels plus the divergence
    // vector from the predictions file.
    let mut per_frame = String::from("frame,reference,predicted");
    for column in &predictions.divergence_columns {
        per_frame.push_str(&format!(",div_{column}"));
    }
    per_frame.push('\n');
    for frame in 0..reference.len() {
        per_frame.push_str(&format!(
            "{frame},{},{}",
            reference.label(frame),
            predictions.labels[frame]
        ));
        for d in &predictions.divergences[frame] {
            per_frame.push_str(&format!(",{d}"));
        }
        per_frame.push('\n');
    }
    let per_frame_path = args.out.join("per_frame.csv");
    std::fs::write(&per_frame_path, per_frame)
        .with_context(|| format!("cannot write {}", per_frame_path.display()))?;

    resolved.write(&args.out)?;

    println!(
        "overall accuracy {:.4} over {} frames -> {}",
        report.overall_accuracy,
        reference.len(),
        args.out.join("metrics.json").display()
    );
    for stats in &report.per_class {
        println!(
            "  {}: {}/{} matched ({:.2}%)",
            stats.label,
            stats.matched,
            stats.support,
            100.0 * stats.accuracy
        );
    }
    Ok(())
}
