//! Trainable feature encoder and its contrastive training loop.
//!
//! The encoder is a two-layer fully connected network `d_in -> hidden ->
//! embed_dim` with ReLU between the layers and L2 normalization after the
//! last, so every output lies on the unit sphere. It is trained with the
//! InfoNCE objective over batches drawn by [`crate::sampling`], using
//! plain SGD with momentum; gradients are computed analytically and flow
//! through the query, the positive, and every negative.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::sampling::{training_schedule, AnchorSet};
use crate::seeds;
use crate::stream::FrameStream;

/// Magic bytes of the model file format.
const MODEL_MAGIC: &[u8; 6] = b"SPENC1";

/// Pre-normalization outputs below this norm fall back to the first basis
/// vector.
const DEGENERATE_NORM: f64 = 1e-12;

/// Weights and biases of the two-layer encoder.
///
/// `w1` is `hidden x d_in` row-major (row = hidden unit), `w2` is
/// `embed_dim x hidden` row-major. All parameters are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    d_in: usize,
    hidden: usize,
    embed_dim: usize,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl EncoderParams {
    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Read one parameter by its flat index (order: w1, b1, w2, b2).
    pub fn get_flat(&self, index: usize) -> f64 {
        let mut i = index;
        for part in [&self.w1, &self.b1, &self.w2, &self.b2] {
            if i < part.len() {
                return part[i];
            }
            i -= part.len();
        }
        panic!("flat parameter index {index} out of range");
    }

    /// Write one parameter by its flat index (order: w1, b1, w2, b2).
    pub fn set_flat(&mut self, index: usize, value: f64) {
        let mut i = index;
        for part in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            if i < part.len() {
                part[i] = value;
                return;
            }
            i -= part.len();
        }
        panic!("flat parameter index {index} out of range");
    }

    /// Persist to the binary model format: magic `SPENC1`, little-endian
    /// `u32` dims `d_in, hidden, embed_dim`, then the `f64` arrays `w1,
    /// b1, w2, b2` in order.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        out.write_all(MODEL_MAGIC).map_err(io)?;
        for dim in [self.d_in, self.hidden, self.embed_dim] {
            out.write_all(&(dim as u32).to_le_bytes()).map_err(io)?;
        }
        for part in [&self.w1, &self.b1, &self.w2, &self.b2] {
            for v in part.iter() {
                out.write_all(&v.to_le_bytes()).map_err(io)?;
            }
        }
        out.flush().map_err(io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        if bytes.len() < MODEL_MAGIC.len() + 12 {
            return Err(Error::ModelFormat("file too short".into()));
        }
        if &bytes[..6] != MODEL_MAGIC {
            return Err(Error::ModelFormat("bad magic bytes".into()));
        }
        let dim_at = |offset: usize| {
            u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap()) as usize
        };
        let (d_in, hidden, embed_dim) = (dim_at(6), dim_at(10), dim_at(14));
        if d_in == 0 || hidden == 0 || embed_dim == 0 {
            return Err(Error::ModelFormat("zero dimension".into()));
        }
        let counts = [hidden * d_in, hidden, embed_dim * hidden, embed_dim];
        let expected = 18 + 8 * counts.iter().sum::<usize>();
        if bytes.len() != expected {
            return Err(Error::ModelFormat(format!(
                "expected {expected} bytes for dims {d_in}x{hidden}x{embed_dim}, found {}",
                bytes.len()
            )));
        }
        let mut offset = 18;
        let mut read_part = |count: usize| -> Result<Vec<f64>> {
            let mut part = Vec::with_capacity(count);
            for _ in 0..count {
                let v = f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap());
                if !v.is_finite() {
                    return Err(Error::ModelFormat("non-finite parameter".into()));
                }
                part.push(v);
                offset += 8;
            }
            Ok(part)
        };
        let w1 = read_part(counts[0])?;
        let b1 = read_part(counts[1])?;
        let w2 = read_part(counts[2])?;
        let b2 = read_part(counts[3])?;
        Ok(EncoderParams {
            d_in,
            hidden,
            embed_dim,
            w1,
            b1,
            w2,
            b2,
        })
    }
}

/// Gradient with the same shape as [`EncoderParams`].
#[derive(Debug, Clone)]
pub struct EncoderGradient {
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl EncoderGradient {
    pub fn zeros_like(params: &EncoderParams) -> Self {
        EncoderGradient {
            w1: vec![0.0; params.w1.len()],
            b1: vec![0.0; params.b1.len()],
            w2: vec![0.0; params.w2.len()],
            b2: vec![0.0; params.b2.len()],
        }
    }

    /// Read one gradient entry by flat index (order: w1, b1, w2, b2).
    pub fn get_flat(&self, index: usize) -> f64 {
        let mut i = index;
        for part in [&self.w1, &self.b1, &self.w2, &self.b2] {
            if i < part.len() {
                return part[i];
            }
            i -= part.len();
        }
        panic!("flat gradient index {index} out of range");
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// InfoNCE softmax temperature.
    pub temperature: f64,
    /// Negatives per batch.
    pub n_neg: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Anchor neighborhood half-width in frames.
    pub delta: usize,
    pub embed_dim: usize,
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            temperature: 0.07,
            n_neg: 16,
            learning_rate: 1e-2,
            momentum: 0.9,
            epochs: 30,
            seed: 42,
            delta: 15,
            embed_dim: 128,
            hidden: 256,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.temperature <= 0.0 || !self.temperature.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.n_neg == 0 {
            return Err(Error::InvalidParameter("n_neg must be at least 1".into()));
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidParameter(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.embed_dim == 0 || self.hidden == 0 {
            return Err(Error::InvalidParameter(
                "network dimensions must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Initialize parameters: weights zero-mean normal with standard
/// deviation `1/sqrt(fan_in)`, biases zero. Deterministic given the seed.
pub fn init_params(
    d_in: usize,
    hidden: usize,
    embed_dim: usize,
    seed: u64,
) -> Result<EncoderParams> {
    if d_in == 0 || hidden == 0 || embed_dim == 0 {
        return Err(Error::InvalidParameter(
            "network dimensions must be positive".into(),
        ));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut layer = |rows: usize, cols: usize| -> Vec<f64> {
        let normal = Normal::new(0.0, 1.0 / (cols as f64).sqrt()).unwrap();
        (0..rows * cols).map(|_| normal.sample(&mut rng)).collect()
    };
    let w1 = layer(hidden, d_in);
    let w2 = layer(embed_dim, hidden);
    Ok(EncoderParams {
        d_in,
        hidden,
        embed_dim,
        w1,
        b1: vec![0.0; hidden],
        w2,
        b2: vec![0.0; embed_dim],
    })
}

/// Forward-pass intermediates kept for backpropagation.
struct ForwardCache {
    input: Vec<f64>,
    pre_hidden: Vec<f64>,
    hidden_act: Vec<f64>,
    output_norm: f64,
    z: Vec<f64>,
    degenerate: bool,
}

fn forward_cached(params: &EncoderParams, x: &[f64]) -> Result<ForwardCache> {
    if x.len() != params.d_in {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: params.d_in,
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("encoder input"));
    }
    let pre_hidden: Vec<f64> = params
        .w1
        .chunks_exact(params.d_in)
        .zip(&params.b1)
        .map(|(row, &bias)| row.iter().zip(x).fold(bias, |acc, (w, xi)| acc + w * xi))
        .collect();
    let hidden_act: Vec<f64> = pre_hidden.iter().map(|&a| a.max(0.0)).collect();
    let output: Vec<f64> = params
        .w2
        .chunks_exact(params.hidden)
        .zip(&params.b2)
        .map(|(row, &bias)| {
            row.iter()
                .zip(&hidden_act)
                .fold(bias, |acc, (w, r)| acc + w * r)
        })
        .collect();
    let output_norm = output.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (z, degenerate) = if output_norm < DEGENERATE_NORM {
        let mut z = vec![0.0; params.embed_dim];
        z[0] = 1.0;
        (z, true)
    } else {
        (output.iter().map(|v| v / output_norm).collect(), false)
    };
    Ok(ForwardCache {
        input: x.to_vec(),
        pre_hidden,
        hidden_act,
        output_norm,
        z,
        degenerate,
    })
}

/// Encode one raw feature vector to a unit-norm embedding.
///
/// A pre-normalization output with norm below `1e-12` falls back to the
/// first basis vector.
pub fn encode(params: &EncoderParams, x: &[f64]) -> Result<Embedding> {
    let cache = forward_cached(params, x)?;
    Embedding::new(cache.z)
}

/// Encode every frame of a stream. Parallel over frames; the result does
/// not depend on the thread count.
pub fn encode_stream(params: &EncoderParams, stream: &FrameStream) -> Result<Vec<Embedding>> {
    (0..stream.len())
        .into_par_iter()
        .map(|i| encode(params, stream.frame(i)))
        .collect()
}

/// Stable softmax weights of the positive and negative logits.
/// Returns (sigma_pos, sigma_negs, loss).
fn softmax_and_loss(pos_logit: f64, neg_logits: &[f64]) -> (f64, Vec<f64>, f64) {
    let max_logit = neg_logits
        .iter()
        .fold(pos_logit, |acc, &l| if l > acc { l } else { acc });
    let exp_pos = (pos_logit - max_logit).exp();
    let exp_negs: Vec<f64> = neg_logits.iter().map(|&l| (l - max_logit).exp()).collect();
    let denom = exp_pos + exp_negs.iter().sum::<f64>();
    let loss = -(pos_logit - max_logit) + denom.ln();
    let sigma_pos = exp_pos / denom;
    let sigma_negs = exp_negs.iter().map(|&e| e / denom).collect();
    (sigma_pos, sigma_negs, loss)
}

/// InfoNCE loss of a query against one positive and `n` negatives:
/// `-log( exp(s+/t) / (exp(s+/t) + sum_j exp(s-_j/t)) )`, computed with
/// max-logit subtraction.
pub fn info_nce_loss(
    z_query: &Embedding,
    z_positive: &Embedding,
    z_negatives: &[Embedding],
    temperature: f64,
) -> Result<f64> {
    if temperature <= 0.0 || !temperature.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if z_negatives.is_empty() {
        return Err(Error::EmptyInput("negative samples"));
    }
    let pos_logit = crate::embedding::cosine_sim(z_query, z_positive)? / temperature;
    let neg_logits = z_negatives
        .iter()
        .map(|z| Ok(crate::embedding::cosine_sim(z_query, z)? / temperature))
        .collect::<Result<Vec<f64>>>()?;
    let (_, _, loss) = softmax_and_loss(pos_logit, &neg_logits);
    Ok(loss)
}

/// Backpropagate a gradient on the embedding `z` of one forward pass into
/// the shared parameter gradient.
fn backprop_into(
    grad: &mut EncoderGradient,
    params: &EncoderParams,
    cache: &ForwardCache,
    grad_z: &[f64],
) {
    if cache.degenerate {
        // Constant fallback output: no gradient flows.
        return;
    }
    // Through L2 normalization: z = y / |y|.
    let dot: f64 = grad_z.iter().zip(&cache.z).map(|(g, z)| g * z).sum();
    let grad_out: Vec<f64> = grad_z
        .iter()
        .zip(&cache.z)
        .map(|(g, z)| (g - dot * z) / cache.output_norm)
        .collect();
    // Output layer.
    let mut grad_hidden = vec![0.0; params.hidden];
    for (d, &g) in grad_out.iter().enumerate() {
        grad.b2[d] += g;
        let w_row = &params.w2[d * params.hidden..(d + 1) * params.hidden];
        let g_row = &mut grad.w2[d * params.hidden..(d + 1) * params.hidden];
        for (h, (gw, &w)) in g_row.iter_mut().zip(w_row).enumerate() {
            *gw += g * cache.hidden_act[h];
            grad_hidden[h] += g * w;
        }
    }
    // ReLU and input layer.
    for (h, &g) in grad_hidden.iter().enumerate() {
        if cache.pre_hidden[h] <= 0.0 {
            continue;
        }
        grad.b1[h] += g;
        let g_row = &mut grad.w1[h * params.d_in..(h + 1) * params.d_in];
        for (gw, &xi) in g_row.iter_mut().zip(&cache.input) {
            *gw += g * xi;
        }
    }
}

/// Loss and exact analytic parameter gradient of the InfoNCE objective
/// composed with the encoder, for one batch of raw frames. Gradients flow
/// through the query, the positive, and every negative.
pub fn loss_gradient(
    params: &EncoderParams,
    query: &[f64],
    positive: &[f64],
    negatives: &[&[f64]],
    temperature: f64,
) -> Result<(f64, EncoderGradient)> {
    if temperature <= 0.0 || !temperature.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if negatives.is_empty() {
        return Err(Error::EmptyInput("negative samples"));
    }
    let cache_q = forward_cached(params, query)?;
    let cache_p = forward_cached(params, positive)?;
    let caches_n: Vec<ForwardCache> = negatives
        .iter()
        .map(|x| forward_cached(params, x))
        .collect::<Result<_>>()?;

    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let pos_logit = dot(&cache_q.z, &cache_p.z) / temperature;
    let neg_logits: Vec<f64> = caches_n
        .iter()
        .map(|c| dot(&cache_q.z, &c.z) / temperature)
        .collect();
    let (sigma_pos, sigma_negs, loss) = softmax_and_loss(pos_logit, &neg_logits);

    // dL/dz for each batch member.
    let grad_zq: Vec<f64> = (0..params.embed_dim)
        .map(|i| {
            let acc = sigma_negs
                .iter()
                .zip(&caches_n)
                .fold((sigma_pos - 1.0) * cache_p.z[i], |acc, (sn, cn)| {
                    acc + sn * cn.z[i]
                });
            acc / temperature
        })
        .collect();
    let grad_zp: Vec<f64> = cache_q
        .z
        .iter()
        .map(|&zq| (sigma_pos - 1.0) * zq / temperature)
        .collect();

    let mut grad = EncoderGradient::zeros_like(params);
    backprop_into(&mut grad, params, &cache_q, &grad_zq);
    backprop_into(&mut grad, params, &cache_p, &grad_zp);
    for (sn, cn) in sigma_negs.iter().zip(&caches_n) {
        let grad_zn: Vec<f64> = cache_q.z.iter().map(|&zq| sn * zq / temperature).collect();
        backprop_into(&mut grad, params, cn, &grad_zn);
    }
    Ok((loss, grad))
}

/// One row of the training loss trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub step: usize,
    pub epoch: usize,
    pub anchor_ordinal: usize,
    pub loss: f64,
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: EncoderParams,
    pub loss_trace: Vec<TrainRecord>,
}

/// Train the encoder on a stream with anchor supervision.
///
/// SGD with momentum (`v = mu v + g`, `theta -= lr v`) over the batch
/// schedule; sub-seeds for initialization and scheduling derive from
/// `cfg.seed` via [`crate::seeds`]. Identical inputs and config give a
/// bit-identical outcome.
pub fn train(stream: &FrameStream, anchors: &AnchorSet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if anchors.stream_length() != stream.len() {
        return Err(Error::StreamLengthMismatch {
            anchors: anchors.stream_length(),
            stream: stream.len(),
        });
    }
    if anchors.delta() != cfg.delta {
        return Err(Error::InvalidParameter(format!(
            "anchor set was built with delta {}, config says {}",
            anchors.delta(),
            cfg.delta
        )));
    }

    let mut params = init_params(
        stream.dim(),
        cfg.hidden,
        cfg.embed_dim,
        seeds::derive(cfg.seed, seeds::ENCODER_INIT),
    )?;
    let mut schedule_rng = StdRng::seed_from_u64(seeds::derive(cfg.seed, seeds::TRAIN_SCHEDULE));
    let schedule = training_schedule(anchors, cfg.epochs, cfg.n_neg, &mut schedule_rng)?;

    let mut velocity = EncoderGradient::zeros_like(&params);
    let mut loss_trace = Vec::with_capacity(schedule.len());
    let per_epoch = anchors.len();

    for (step, batch) in schedule.iter().enumerate() {
        let negatives: Vec<&[f64]> = batch
            .negative_indices
            .iter()
            .map(|&i| stream.frame(i))
            .collect();
        let (loss, grad) = loss_gradient(
            &params,
            stream.frame(batch.query_index),
            stream.frame(batch.positive_index),
            &negatives,
            cfg.temperature,
        )?;

        let apply = |v: &mut [f64], g: &[f64], p: &mut [f64]| {
            for i in 0..v.len() {
                v[i] = cfg.momentum * v[i] + g[i];
                p[i] -= cfg.learning_rate * v[i];
            }
        };
        apply(&mut velocity.w1, &grad.w1, &mut params.w1);
        apply(&mut velocity.b1, &grad.b1, &mut params.b1);
        apply(&mut velocity.w2, &grad.w2, &mut params.w2);
        apply(&mut velocity.b2, &grad.b2, &mut params.b2);

        loss_trace.push(TrainRecord {
            step,
            epoch: step / per_epoch,
            anchor_ordinal: batch.anchor_ordinal,
            loss,
        });
    }
    Ok(TrainOutcome { params, loss_trace })
}

/// Write a loss trace as CSV with columns `step,epoch,anchor_ordinal,loss`.
pub fn write_loss_csv(path: impl AsRef<Path>, trace: &[TrainRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("step,epoch,anchor_ordinal,loss\n");
    for rec in trace {
        out.push_str(&format!(
            "{},{},{},{}\n",
            rec.step, rec.epoch, rec.anchor_ordinal, rec.loss
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn tiny_params(seed: u64) -> EncoderParams {
        init_params(3, 4, 3, seed).unwrap()
    }

    /// Tiny network with every parameter (biases included) drawn from a
    /// continuous distribution, so no batch member can land exactly on
    /// the degenerate-normalization fallback and finite differences stay
    /// well posed.
    fn randomized_params(seed: u64) -> EncoderParams {
        let mut params = tiny_params(seed);
        let mut rng = StdRng::seed_from_u64(seed ^ 0xA5A5_A5A5);
        for i in 0..params.param_count() {
            params.set_flat(i, rng.random_range(-0.8..0.8));
        }
        params
    }

    /// Hand-built encoder computing `x / |x|` exactly: the hidden layer
    /// splits the input into positive and negative parts and the output
    /// layer recombines them, so embedding geometry equals input geometry.
    fn identity_params(dim: usize) -> EncoderParams {
        let mut params = init_params(dim, 2 * dim, dim, 0).unwrap();
        for i in 0..params.param_count() {
            params.set_flat(i, 0.0);
        }
        for d in 0..dim {
            // w1: unit d reads +x_d, unit dim+d reads -x_d.
            params.set_flat(d * dim + d, 1.0);
            params.set_flat((dim + d) * dim + d, -1.0);
        }
        let w2_base = 2 * dim * dim + 2 * dim;
        for d in 0..dim {
            // w2 row d: +unit d, -unit dim+d.
            params.set_flat(w2_base + d * 2 * dim + d, 1.0);
            params.set_flat(w2_base + d * 2 * dim + dim + d, -1.0);
        }
        params
    }

    fn random_vec(len: usize, rng: &mut StdRng) -> Vec<f64> {
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// Central finite difference of the batch loss in one parameter.
    fn fd_gradient(
        params: &EncoderParams,
        flat_index: usize,
        query: &[f64],
        positive: &[f64],
        negatives: &[&[f64]],
        temperature: f64,
        step: f64,
    ) -> f64 {
        let eval = |p: &EncoderParams| -> f64 {
            let zq = encode(p, query).unwrap();
            let zp = encode(p, positive).unwrap();
            let zn: Vec<Embedding> = negatives.iter().map(|x| encode(p, x).unwrap()).collect();
            info_nce_loss(&zq, &zp, &zn, temperature).unwrap()
        };
        let mut plus = params.clone();
        plus.set_flat(flat_index, params.get_flat(flat_index) + step);
        let mut minus = params.clone();
        minus.set_flat(flat_index, params.get_flat(flat_index) - step);
        (eval(&plus) - eval(&minus)) / (2.0 * step)
    }

    fn relative_error(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn init_is_seed_deterministic() {
        assert_eq!(tiny_params(1), tiny_params(1));
        assert_ne!(tiny_params(1), tiny_params(2));
    }

    #[test]
    fn param_count_matches_arithmetic() {
        let p = init_params(8, 4, 2, 0).unwrap();
        assert_eq!(p.param_count(), 8 * 4 + 4 + 4 * 2 + 2);
        assert_eq!(p.param_count(), 46);
    }

    #[test]
    fn init_weight_variance_close_to_reciprocal_fan_in() {
        // 1e5 samples with fan_in 256: w1 of a 256 -> 400 layer.
        let p = init_params(256, 400, 1, 7).unwrap();
        let n = p.w1.len() as f64;
        assert!(p.w1.len() >= 100_000);
        let mean: f64 = p.w1.iter().sum::<f64>() / n;
        let var: f64 = p.w1.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / n;
        let target = 1.0 / 256.0;
        assert!(
            (var - target).abs() / target < 0.2,
            "variance {var} vs {target}"
        );
    }

    #[test]
    fn encode_output_is_unit_norm() {
        let mut rng = StdRng::seed_from_u64(3);
        let params = init_params(16, 8, 4, 5).unwrap();
        for _ in 0..20 {
            let x = random_vec(16, &mut rng);
            let z = encode(&params, &x).unwrap();
            let norm: f64 = z.values().iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn encode_rejects_bad_input() {
        let params = tiny_params(0);
        assert!(encode(&params, &[1.0, 2.0]).is_err());
        assert!(encode(&params, &[1.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn scale_invariant_with_zero_biases() {
        // ReLU is positively homogeneous and the biases start at zero, so
        // doubling the input scales the pre-normalization output exactly
        // and the normalized embedding is unchanged.
        let params = init_params(6, 5, 4, 11).unwrap();
        let mut rng = StdRng::seed_from_u64(12);
        for _ in 0..10 {
            let x = random_vec(6, &mut rng);
            let doubled: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
            let z1 = encode(&params, &x).unwrap();
            let z2 = encode(&params, &doubled).unwrap();
            assert_eq!(z1.values(), z2.values());
        }
    }

    #[test]
    fn forward_matches_hand_computed_pass() {
        // d_in=3, hidden=2, embed_dim=2 with hand-set weights.
        let mut params = init_params(3, 2, 2, 0).unwrap();
        let w1 = [0.5, -1.0, 0.25, -0.5, 0.75, 1.5]; // 2x3 row-major
        let b1 = [0.1, -0.2];
        let w2 = [1.0, -0.5, 0.25, 0.75]; // 2x2 row-major
        let b2 = [0.05, -0.05];
        for (i, &v) in w1.iter().chain(&b1).chain(&w2).chain(&b2).enumerate() {
            params.set_flat(i, v);
        }
        let x = [1.0, -0.5, 0.5];
        // Manual matrix arithmetic oracle: one active and one dead unit.
        let a0: f64 = 0.5 * 1.0 + (-1.0) * (-0.5) + 0.25 * 0.5 + 0.1; // 1.225
        let a1: f64 = -0.5 * 1.0 + 0.75 * (-0.5) + 1.5 * 0.5 + (-0.2); // -0.325
        let r0 = a0.max(0.0);
        let r1 = a1.max(0.0);
        assert!(a0 > 0.0 && a1 < 0.0);
        let y0 = 1.0 * r0 + (-0.5) * r1 + 0.05;
        let y1 = 0.25 * r0 + 0.75 * r1 - 0.05;
        let norm = (y0 * y0 + y1 * y1).sqrt();
        let expected = [y0 / norm, y1 / norm];

        let z = encode(&params, &x).unwrap();
        assert!((z.values()[0] - expected[0]).abs() < 1e-9);
        assert!((z.values()[1] - expected[1]).abs() < 1e-9);
    }

    #[test]
    fn symmetric_logits_give_ln_n_plus_one() {
        let dim = 8;
        let q = Embedding::basis(dim, 0).unwrap();
        // Positive and all negatives orthogonal to the query: every logit 0.
        let pos = Embedding::basis(dim, 1).unwrap();
        for n in [1usize, 4, 16] {
            let negs: Vec<Embedding> = (0..n)
                .map(|j| Embedding::basis(dim, 1 + (j % (dim - 1))).unwrap())
                .collect();
            let loss = info_nce_loss(&q, &pos, &negs, 0.07).unwrap();
            let expected = ((n + 1) as f64).ln();
            assert!(
                (loss - expected).abs() < 1e-12,
                "n={n}: {loss} vs {expected}"
            );
        }
        // n = 16 against the quoted closed form.
        let negs: Vec<Embedding> = (0..16).map(|_| Embedding::basis(dim, 2).unwrap()).collect();
        let loss = info_nce_loss(&q, &pos, &negs, 0.5).unwrap();
        assert!((loss - 17f64.ln()).abs() < 1e-12);
        assert!((17f64.ln() - 2.8332).abs() < 1e-4);
    }

    #[test]
    fn saturated_positive_drives_loss_to_zero() {
        let dim = 4;
        let q = Embedding::basis(dim, 0).unwrap();
        let pos = q.clone();
        let neg = Embedding::new(vec![-1.0, 0.0, 0.0, 0.0]).unwrap();
        let negs = vec![neg; 16];
        let loss = info_nce_loss(&q, &pos, &negs, 0.07).unwrap();
        assert!(loss >= 0.0);
        assert!(loss < 1e-9, "loss {loss}");
    }

    #[test]
    fn loss_matches_explicit_softmax_oracle() {
        let mut rng = StdRng::seed_from_u64(21);
        for _ in 0..50 {
            let dim = 8;
            let unit =
                |rng: &mut StdRng| Embedding::from_unnormalized(random_vec(dim, rng)).unwrap();
            let q = unit(&mut rng);
            let pos = unit(&mut rng);
            let negs: Vec<Embedding> = (0..4).map(|_| unit(&mut rng)).collect();
            let tau = 0.5;
            // Oracle: form the softmax explicitly with compensated summation.
            let sim = |a: &Embedding, b: &Embedding| {
                a.values()
                    .iter()
                    .zip(b.values())
                    .map(|(x, y)| x * y)
                    .sum::<f64>()
            };
            let pos_term = (sim(&q, &pos) / tau).exp();
            let mut denom = pos_term;
            let mut compensation = 0.0;
            for n in &negs {
                let term = (sim(&q, n) / tau).exp();
                let y = term - compensation;
                let t = denom + y;
                compensation = (t - denom) - y;
                denom = t;
            }
            let expected = -(pos_term / denom).ln();
            let got = info_nce_loss(&q, &pos, &negs, tau).unwrap();
            assert!((got - expected).abs() < 1e-10, "{got} vs {expected}");
        }
    }

    #[test]
    fn loss_rejects_bad_arguments() {
        let q = Embedding::basis(4, 0).unwrap();
        let p = Embedding::basis(4, 1).unwrap();
        assert!(info_nce_loss(&q, &p, &[], 0.07).is_err());
        assert!(info_nce_loss(&q, &p, std::slice::from_ref(&p), 0.0).is_err());
        assert!(info_nce_loss(&q, &p, std::slice::from_ref(&p), -1.0).is_err());
    }

    #[test]
    fn loss_strictly_decreases_as_positive_similarity_rises() {
        let dim = 6;
        let mut rng = StdRng::seed_from_u64(31);
        let q = Embedding::from_unnormalized(random_vec(dim, &mut rng)).unwrap();
        // Orthonormal direction to mix with.
        let mut u = random_vec(dim, &mut rng);
        let qdot: f64 = u.iter().zip(q.values()).map(|(a, b)| a * b).sum();
        for (ui, qi) in u.iter_mut().zip(q.values()) {
            *ui -= qdot * qi;
        }
        let u = Embedding::from_unnormalized(u).unwrap();
        let negs: Vec<Embedding> = (0..5)
            .map(|_| Embedding::from_unnormalized(random_vec(dim, &mut rng)).unwrap())
            .collect();

        let mut prev = f64::INFINITY;
        for k in 0..20 {
            let alpha = 2.8 - 0.14 * k as f64; // decreasing angle -> rising s+
            let pos = Embedding::from_unnormalized(
                q.values()
                    .iter()
                    .zip(u.values())
                    .map(|(qi, ui)| alpha.cos() * qi + alpha.sin() * ui)
                    .collect(),
            )
            .unwrap();
            let loss = info_nce_loss(&q, &pos, &negs, 0.3).unwrap();
            assert!(loss < prev, "loss must strictly decrease, {loss} !< {prev}");
            prev = loss;
        }
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        // Pre-build check for the training loop: exact analytic gradient
        // against central differences on tiny networks.
        let mut rng = StdRng::seed_from_u64(1000);
        for trial in 0..25 {
            let params = randomized_params(2000 + trial);
            let query = random_vec(3, &mut rng);
            let positive = random_vec(3, &mut rng);
            let neg_data: Vec<Vec<f64>> = (0..3).map(|_| random_vec(3, &mut rng)).collect();
            let negatives: Vec<&[f64]> = neg_data.iter().map(|v| v.as_slice()).collect();
            let tau = 0.5;
            let (_, grad) = loss_gradient(&params, &query, &positive, &negatives, tau).unwrap();
            for idx in 0..params.param_count() {
                let numeric = fd_gradient(&params, idx, &query, &positive, &negatives, tau, 1e-5);
                let analytic = grad.get_flat(idx);
                let err = relative_error(analytic, numeric);
                assert!(
                    err < 1e-4,
                    "trial {trial} param {idx}: analytic {analytic}, numeric {numeric}, err {err}"
                );
            }
        }
    }

    #[test]
    fn aligned_positive_with_orthogonal_negatives_has_weaker_signal() {
        // Through the identity encoder the embeddings equal the
        // normalized inputs, so batch geometry is exact. A positive
        // identical to the query with orthogonal negatives at small
        // temperature saturates the softmax and the measured gradient
        // norm drops far below the symmetric-logit configuration.
        let params = identity_params(4);
        let grad_norm = |q: &[f64], p: &[f64], negs: &[&[f64]]| -> f64 {
            let (_, g) = loss_gradient(&params, q, p, negs, 0.07).unwrap();
            (0..g.param_count())
                .map(|i| g.get_flat(i) * g.get_flat(i))
                .sum::<f64>()
                .sqrt()
        };
        let e0 = [1.0, 0.0, 0.0, 0.0];
        let e1 = [0.0, 1.0, 0.0, 0.0];
        let e2 = [0.0, 0.0, 1.0, 0.0];
        let e3 = [0.0, 0.0, 0.0, 1.0];
        // Saturated: positive = query, negatives orthogonal to both.
        let saturated = grad_norm(&e0, &e0, &[&e1, &e2, &e3]);
        // Symmetric logits: positive and negatives all orthogonal to the
        // query but mutually distinct.
        let symmetric = grad_norm(&e0, &e1, &[&e2, &e3]);
        assert!(saturated < 1e-3, "saturated gradient {saturated}");
        assert!(
            saturated < symmetric / 100.0,
            "saturated {saturated} !< symmetric {symmetric} / 100"
        );
    }

    #[test]
    fn duplicated_negative_contribution_doubles_exactly() {
        let params = tiny_params(5);
        let mut rng = StdRng::seed_from_u64(50);
        let query = random_vec(3, &mut rng);
        let positive = random_vec(3, &mut rng);
        let a = random_vec(3, &mut rng);
        let b = random_vec(3, &mut rng);

        // Softmax weights for the batch [a, a, b].
        let cq = forward_cached(&params, &query).unwrap();
        let ca = forward_cached(&params, &a).unwrap();
        let cb = forward_cached(&params, &b).unwrap();
        let cp = forward_cached(&params, &positive).unwrap();
        let tau = 0.3;
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| u * v).sum::<f64>();
        let (_, sigmas, _) = softmax_and_loss(
            dot(&cq.z, &cp.z) / tau,
            &[
                dot(&cq.z, &ca.z) / tau,
                dot(&cq.z, &ca.z) / tau,
                dot(&cq.z, &cb.z) / tau,
            ],
        );
        assert_eq!(sigmas[0], sigmas[1]);

        // Contribution of one copy vs the two copies together.
        let contribution = |sigma: f64| -> EncoderGradient {
            let gz: Vec<f64> = cq.z.iter().map(|&z| sigma * z / tau).collect();
            let mut g = EncoderGradient::zeros_like(&params);
            backprop_into(&mut g, &params, &ca, &gz);
            g
        };
        let single = contribution(sigmas[0]);
        let mut double = EncoderGradient::zeros_like(&params);
        let gz: Vec<f64> = cq.z.iter().map(|&z| sigmas[0] * z / tau).collect();
        backprop_into(&mut double, &params, &ca, &gz);
        backprop_into(&mut double, &params, &ca, &gz);
        for i in 0..single.param_count() {
            assert_eq!(2.0 * single.get_flat(i), double.get_flat(i));
        }
    }

    #[test]
    fn model_file_round_trips_bit_identically() {
        let params = init_params(5, 7, 3, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        params.save(&path).unwrap();
        let loaded = EncoderParams::load(&path).unwrap();
        assert_eq!(params, loaded);
    }

    #[test]
    fn model_load_rejects_corruption() {
        let params = init_params(2, 2, 2, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        params.save(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            EncoderParams::load(&path),
            Err(Error::ModelFormat(_))
        ));
        // Truncated payload.
        params.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(
            EncoderParams::load(&path),
            Err(Error::ModelFormat(_))
        ));
    }

    fn tiny_training_setup() -> (FrameStream, AnchorSet, TrainConfig) {
        let mut rng = StdRng::seed_from_u64(400);
        let centers = [[2.0, 0.0, 0.0, -2.0], [-2.0, 1.0, -1.0, 2.0]];
        let mut rows = Vec::new();
        for seg in 0..6 {
            let c = centers[seg % 2];
            for _ in 0..20 {
                rows.push(c.iter().map(|v| v + rng.random_range(-0.3..0.3)).collect());
            }
        }
        let stream = FrameStream::from_rows(4, rows).unwrap();
        let anchors = AnchorSet::new(vec![0, 20, 40, 60, 80, 100], 4, 120).unwrap();
        let cfg = TrainConfig {
            delta: 4,
            n_neg: 4,
            epochs: 5,
            hidden: 16,
            embed_dim: 8,
            ..TrainConfig::default()
        };
        (stream, anchors, cfg)
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let (stream, anchors, mut cfg) = tiny_training_setup();
        cfg.epochs = 0;
        let outcome = train(&stream, &anchors, &cfg).unwrap();
        let initial = init_params(
            stream.dim(),
            cfg.hidden,
            cfg.embed_dim,
            seeds::derive(cfg.seed, seeds::ENCODER_INIT),
        )
        .unwrap();
        assert_eq!(outcome.params, initial);
        assert!(outcome.loss_trace.is_empty());
    }

    #[test]
    fn training_is_seed_deterministic() {
        let (stream, anchors, cfg) = tiny_training_setup();
        let a = train(&stream, &anchors, &cfg).unwrap();
        let b = train(&stream, &anchors, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.loss_trace, b.loss_trace);
    }

    #[test]
    fn training_reduces_loss_on_separable_data() {
        let (stream, anchors, cfg) = tiny_training_setup();
        let outcome = train(&stream, &anchors, &cfg).unwrap();
        let per_epoch = anchors.len();
        let mean = |records: &[TrainRecord]| {
            records.iter().map(|r| r.loss).sum::<f64>() / records.len() as f64
        };
        let first = mean(&outcome.loss_trace[..per_epoch]);
        let last = mean(&outcome.loss_trace[outcome.loss_trace.len() - per_epoch..]);
        assert!(last < first, "first epoch {first}, last epoch {last}");
    }

    #[test]
    fn train_reports_stream_length_mismatch() {
        let (stream, _, cfg) = tiny_training_setup();
        let anchors = AnchorSet::new(vec![0, 20, 40], 4, 500).unwrap();
        match train(&stream, &anchors, &cfg) {
            Err(Error::StreamLengthMismatch { anchors, stream }) => {
                assert_eq!(anchors, 500);
                assert_eq!(stream, 120);
            }
            other => panic!("expected stream length mismatch, got {other:?}"),
        }
    }

    #[test]
    fn encode_stream_is_thread_count_independent() {
        let (stream, _, _) = tiny_training_setup();
        let params = init_params(4, 8, 6, 3).unwrap();
        let reference = encode_stream(&params, &stream).unwrap();
        for threads in [1usize, 2, 8] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let got = pool.install(|| encode_stream(&params, &stream)).unwrap();
            assert_eq!(reference, got);
        }
    }

    #[test]
    fn loss_csv_has_expected_shape() {
        let (stream, anchors, cfg) = tiny_training_setup();
        let outcome = train(&stream, &anchors, &cfg).unwrap();
        assert_eq!(outcome.loss_trace.len(), cfg.epochs * anchors.len());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loss.csv");
        write_loss_csv(&path, &outcome.loss_trace).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("step,epoch,anchor_ordinal,loss"));
        assert_eq!(lines.count(), cfg.epochs * anchors.len());
    }
}
