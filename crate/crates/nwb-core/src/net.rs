//! Frequency-aware transformer noise predictor.
//!
//! The network consumes a noised full-band latent z_bt, the aligned clean
//! condition latent z_a, the band's relative-frequency embedding, and the
//! diffusion timestep, and predicts the injected noise. Pipeline: per-token
//! feature concat of (z_bt, z_a) -> linear reduction to the model width,
//! plus additive sinusoidal timestep embedding and an additive projection
//! of the per-token frequency embedding (the raw lattice frequency channel
//! varies by only ~1e-3 across a band, far too weak for attention to tell
//! tokens apart; the embedding carries position at unit scale) -> stacked
//! pre-residual self-attention blocks -> cross-attention with queries from
//! the embedding -> one decoder block -> width-3 convolution over the token
//! axis back to latent width. Gain-free per-row RMS normalization in front of every
//! attention/MLP stage and of the output convolution keeps activations O(1)
//! at any depth without adding parameters; no biases anywhere; the output
//! convolution starts at zero so an untrained model predicts zero noise.
//!
//! Everything is f64 with hand-written backward passes; batches stack pair
//! token blocks along the row axis so each matmul covers the whole batch
//! while attention stays per-pair.

use ndarray::{s, Array2, Array3, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::codec::LatentTensor;
use crate::embed::RfeEmbedding;
use crate::error::{NwbError, Result};
use crate::rng::{mix3, stream};

// ── configuration ─────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub latent_dim: usize,
    pub model_dim: usize,
    pub num_blocks: usize,
    pub num_heads: usize,
    pub embed_dim: usize,
    pub timestep_embed_dim: usize,
}

impl ModelConfig {
    /// Small preset sized for single-core training runs.
    pub fn desk_scale(latent_dim: usize) -> Self {
        Self {
            latent_dim,
            model_dim: 128,
            num_blocks: 4,
            num_heads: 4,
            embed_dim: 64,
            timestep_embed_dim: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.model_dim == 0 || self.num_blocks == 0 {
            return Err(NwbError::InvalidParameter("zero-sized model dimension".into()));
        }
        if self.model_dim % self.num_heads != 0 {
            return Err(NwbError::InvalidParameter(format!(
                "model_dim {} not divisible by num_heads {}",
                self.model_dim, self.num_heads
            )));
        }
        if self.embed_dim == 0 || self.embed_dim % 4 != 0 {
            return Err(NwbError::InvalidParameter(format!(
                "embed_dim {} must be a positive multiple of 4",
                self.embed_dim
            )));
        }
        if self.timestep_embed_dim == 0 || self.timestep_embed_dim % 2 != 0 {
            return Err(NwbError::InvalidParameter(format!(
                "timestep_embed_dim {} must be even",
                self.timestep_embed_dim
            )));
        }
        Ok(())
    }
}

// ── parameters ────────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub wo: Array2<f64>,
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
}

impl BlockParams {
    fn zeros(m: usize) -> Self {
        Self {
            wq: Array2::zeros((m, m)),
            wk: Array2::zeros((m, m)),
            wv: Array2::zeros((m, m)),
            wo: Array2::zeros((m, m)),
            w1: Array2::zeros((m, 2 * m)),
            w2: Array2::zeros((2 * m, m)),
        }
    }
}

/// All learnable arrays, also reused as the gradient / optimizer-moment
/// container (identical shapes, iterated in one fixed order).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub config: ModelConfig,
    pub w_reduce: Array2<f64>,
    pub w_time: Array2<f64>,
    pub w_embed: Array2<f64>,
    pub blocks: Vec<BlockParams>,
    pub cross_wq: Array2<f64>,
    pub cross_wk: Array2<f64>,
    pub cross_wv: Array2<f64>,
    pub decoder: BlockParams,
    pub conv: [Array2<f64>; 3],
}

impl ModelParameters {
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (l, m) = (config.latent_dim, config.model_dim);
        Ok(Self {
            config,
            w_reduce: Array2::zeros((2 * l, m)),
            w_time: Array2::zeros((config.timestep_embed_dim, m)),
            w_embed: Array2::zeros((config.embed_dim, m)),
            blocks: (0..config.num_blocks).map(|_| BlockParams::zeros(m)).collect(),
            cross_wq: Array2::zeros((config.embed_dim, m)),
            cross_wk: Array2::zeros((m, m)),
            cross_wv: Array2::zeros((m, m)),
            decoder: BlockParams::zeros(m),
            conv: [Array2::zeros((m, l)), Array2::zeros((m, l)), Array2::zeros((m, l))],
        })
    }

    /// Named views of every array, in the fixed serialization order.
    pub fn named_arrays(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out: Vec<(String, &Array2<f64>)> = vec![
            ("w_reduce".into(), &self.w_reduce),
            ("w_time".into(), &self.w_time),
            ("w_embed".into(), &self.w_embed),
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("block{i}.wq"), &b.wq));
            out.push((format!("block{i}.wk"), &b.wk));
            out.push((format!("block{i}.wv"), &b.wv));
            out.push((format!("block{i}.wo"), &b.wo));
            out.push((format!("block{i}.w1"), &b.w1));
            out.push((format!("block{i}.w2"), &b.w2));
        }
        out.push(("cross.wq".into(), &self.cross_wq));
        out.push(("cross.wk".into(), &self.cross_wk));
        out.push(("cross.wv".into(), &self.cross_wv));
        out.push(("decoder.wq".into(), &self.decoder.wq));
        out.push(("decoder.wk".into(), &self.decoder.wk));
        out.push(("decoder.wv".into(), &self.decoder.wv));
        out.push(("decoder.wo".into(), &self.decoder.wo));
        out.push(("decoder.w1".into(), &self.decoder.w1));
        out.push(("decoder.w2".into(), &self.decoder.w2));
        out.push(("conv.km1".into(), &self.conv[0]));
        out.push(("conv.k0".into(), &self.conv[1]));
        out.push(("conv.kp1".into(), &self.conv[2]));
        out
    }

    /// Mutable counterpart of [`named_arrays`], same order.
    pub fn named_arrays_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
        let mut out: Vec<(String, &mut Array2<f64>)> = vec![
            ("w_reduce".into(), &mut self.w_reduce),
            ("w_time".into(), &mut self.w_time),
            ("w_embed".into(), &mut self.w_embed),
        ];
        for (i, b) in self.blocks.iter_mut().enumerate() {
            out.push((format!("block{i}.wq"), &mut b.wq));
            out.push((format!("block{i}.wk"), &mut b.wk));
            out.push((format!("block{i}.wv"), &mut b.wv));
            out.push((format!("block{i}.wo"), &mut b.wo));
            out.push((format!("block{i}.w1"), &mut b.w1));
            out.push((format!("block{i}.w2"), &mut b.w2));
        }
        out.push(("cross.wq".into(), &mut self.cross_wq));
        out.push(("cross.wk".into(), &mut self.cross_wk));
        out.push(("cross.wv".into(), &mut self.cross_wv));
        out.push(("decoder.wq".into(), &mut self.decoder.wq));
        out.push(("decoder.wk".into(), &mut self.decoder.wk));
        out.push(("decoder.wv".into(), &mut self.decoder.wv));
        out.push(("decoder.wo".into(), &mut self.decoder.wo));
        out.push(("decoder.w1".into(), &mut self.decoder.w1));
        out.push(("decoder.w2".into(), &mut self.decoder.w2));
        let [km1, k0, kp1] = &mut self.conv;
        out.push(("conv.km1".into(), km1));
        out.push(("conv.k0".into(), k0));
        out.push(("conv.kp1".into(), kp1));
        out
    }

    pub fn num_params(&self) -> usize {
        self.named_arrays().iter().map(|(_, a)| a.len()).sum()
    }

    /// Largest absolute entry (finite-ness / divergence diagnostics).
    pub fn max_abs(&self) -> f64 {
        self.named_arrays()
            .iter()
            .flat_map(|(_, a)| a.iter())
            .fold(0f64, |m, &v| m.max(v.abs()))
    }
}

/// Deterministic N(0, 1/fan_in) initialization; the output convolution is
/// zeroed so the untrained model predicts zero noise.
pub fn init_parameters(config: ModelConfig, seed: u64) -> Result<ModelParameters> {
    let mut p = ModelParameters::zeros(config)?;
    for (idx, (name, arr)) in p.named_arrays_mut().into_iter().enumerate() {
        if name.starts_with("conv.") {
            continue;
        }
        let std = 1.0 / (arr.nrows() as f64).sqrt();
        let mut rng = stream(mix3(seed, 0x4e45_54, idx as u64));
        for v in arr.iter_mut() {
            *v = std * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(p)
}

/// Sinusoidal timestep features: pairs (sin, cos) of t / 10000^(2i/dim).
pub fn timestep_embedding(t: usize, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for i in 0..dim / 2 {
        let w = 10000f64.powf(2.0 * i as f64 / dim as f64);
        out[2 * i] = (t as f64 / w).sin();
        out[2 * i + 1] = (t as f64 / w).cos();
    }
    out
}

// ── batched forward/backward ──────────────────────────────────────────────

/// A training/inference batch: P pairs, each a block of `n_tokens` rows
/// stacked along axis 0 (total P·n_tokens rows everywhere).
#[derive(Debug, Clone)]
pub struct BatchInput {
    pub z_bt: Array2<f64>,
    pub z_a: Array2<f64>,
    pub embed: Array2<f64>,
    pub timesteps: Vec<usize>,
    pub n_tokens: usize,
}

impl BatchInput {
    pub fn pairs(&self) -> usize {
        self.timesteps.len()
    }

    fn validate(&self, config: &ModelConfig) -> Result<()> {
        let rows = self.pairs() * self.n_tokens;
        if self.n_tokens == 0 || self.pairs() == 0 {
            return Err(NwbError::ShapeMismatch("empty batch".into()));
        }
        if self.z_bt.dim() != (rows, config.latent_dim)
            || self.z_a.dim() != (rows, config.latent_dim)
        {
            return Err(NwbError::ShapeMismatch(format!(
                "latent blocks {:?}/{:?}, expected ({rows}, {})",
                self.z_bt.dim(),
                self.z_a.dim(),
                config.latent_dim
            )));
        }
        if self.embed.dim() != (rows, config.embed_dim) {
            return Err(NwbError::ShapeMismatch(format!(
                "embedding block {:?}, expected ({rows}, {})",
                self.embed.dim(),
                config.embed_dim
            )));
        }
        if self.timesteps.iter().any(|&t| t == 0) {
            return Err(NwbError::InvalidParameter(
                "diffusion timestep 0 is outside every schedule".into(),
            ));
        }
        Ok(())
    }
}

struct AttnCache {
    /// normalized block input (the rows the q/k/v maps actually saw)
    input: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    /// (pairs*heads, n, n) softmax rows
    probs: Array3<f64>,
    /// concatenated per-head attention outputs, before the output map
    mixed: Array2<f64>,
}

struct BlockCache {
    attn: AttnCache,
    r_in: Vec<f64>,
    h1n: Array2<f64>,
    r_mid: Vec<f64>,
    m1: Array2<f64>,
    act: Array2<f64>,
}

struct CrossCache {
    qc: Array2<f64>,
    kc: Array2<f64>,
    vc: Array2<f64>,
    /// (pairs, n, n) softmax rows
    probs: Array3<f64>,
}

/// Intermediate activations kept for the backward pass.
pub struct ForwardCache {
    x: Array2<f64>,
    tembs: Array2<f64>,
    blocks: Vec<BlockCache>,
    zgn: Array2<f64>,
    r_zg: Vec<f64>,
    cross: CrossCache,
    decoder: BlockCache,
    u2n: Array2<f64>,
    r_u2: Vec<f64>,
}

impl ForwardCache {
    /// Softmax rows of every attention stage (self blocks, then cross, then
    /// decoder), for invariant checks.
    pub fn attention_rows(&self) -> Vec<&Array3<f64>> {
        let mut v: Vec<&Array3<f64>> = self.blocks.iter().map(|b| &b.attn.probs).collect();
        v.push(&self.cross.probs);
        v.push(&self.decoder.attn.probs);
        v
    }
}

const RMS_EPS: f64 = 1e-8;

/// Row-wise RMS normalization without a learnable gain:
/// y = x / sqrt(mean(x²) + ε). Returns the scaled rows and each row's divisor.
fn rms_rows(x: &Array2<f64>) -> (Array2<f64>, Vec<f64>) {
    let d = x.ncols() as f64;
    let mut y = x.clone();
    let mut rs = Vec::with_capacity(x.nrows());
    for mut row in y.rows_mut() {
        let mean_sq = row.iter().map(|v| v * v).sum::<f64>() / d;
        let r = (mean_sq + RMS_EPS).sqrt();
        for v in row.iter_mut() {
            *v /= r;
        }
        rs.push(r);
    }
    (y, rs)
}

/// dL/dx for y = x/r(x): per row, (dy − y·mean(dy ⊙ y)) / r.
fn rms_backward(y: &Array2<f64>, rs: &[f64], dy: &Array2<f64>) -> Array2<f64> {
    let d = y.ncols() as f64;
    let mut dx = dy.clone();
    for ((mut dx_row, y_row), &r) in dx.rows_mut().into_iter().zip(y.rows()).zip(rs) {
        let dot: f64 = dx_row.iter().zip(y_row.iter()).map(|(a, b)| a * b).sum();
        let c = dot / d;
        for (g, &yv) in dx_row.iter_mut().zip(y_row.iter()) {
            *g = (*g - yv * c) / r;
        }
    }
    dx
}

fn softmax_rows_inplace(s: &mut Array2<f64>) {
    for mut row in s.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// dS = P ⊙ (dP − rowsum(dP ⊙ P))
fn softmax_backward(probs: &Array2<f64>, dprobs: &Array2<f64>) -> Array2<f64> {
    let mut ds = dprobs.clone();
    for (mut ds_row, p_row) in ds.rows_mut().into_iter().zip(probs.rows()) {
        let dot: f64 = ds_row.iter().zip(p_row.iter()).map(|(a, b)| a * b).sum();
        for (d, &p) in ds_row.iter_mut().zip(p_row.iter()) {
            *d = p * (*d - dot);
        }
    }
    ds
}

fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

fn silu_prime(x: f64) -> f64 {
    let sig = 1.0 / (1.0 + (-x).exp());
    sig * (1.0 + x * (1.0 - sig))
}

fn self_attention_forward(
    h: &Array2<f64>,
    bp: &BlockParams,
    pairs: usize,
    n: usize,
    heads: usize,
) -> (Array2<f64>, AttnCache) {
    let m = bp.wq.ncols();
    let dh = m / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let q = h.dot(&bp.wq);
    let k = h.dot(&bp.wk);
    let v = h.dot(&bp.wv);
    let mut probs = Array3::zeros((pairs * heads, n, n));
    let mut mixed = Array2::zeros((pairs * n, m));
    for p in 0..pairs {
        let rows = s![p * n..(p + 1) * n, ..];
        for hd in 0..heads {
            let cols = s![.., hd * dh..(hd + 1) * dh];
            let qh = q.slice(rows).slice_move(cols);
            let kh = k.slice(rows).slice_move(cols);
            let vh = v.slice(rows).slice_move(cols);
            let mut sc = qh.dot(&kh.t());
            sc.mapv_inplace(|x| x * scale);
            softmax_rows_inplace(&mut sc);
            let oh = sc.dot(&vh);
            mixed
                .slice_mut(s![p * n..(p + 1) * n, hd * dh..(hd + 1) * dh])
                .assign(&oh);
            probs.slice_mut(s![p * heads + hd, .., ..]).assign(&sc);
        }
    }
    let out = mixed.dot(&bp.wo);
    (out, AttnCache { input: h.clone(), q, k, v, probs, mixed })
}

/// Returns (d_input, gradients for wq..wo written into `grads`).
fn self_attention_backward(
    cache: &AttnCache,
    bp: &BlockParams,
    grads: &mut BlockParams,
    d_out: &Array2<f64>,
    pairs: usize,
    n: usize,
    heads: usize,
) -> Array2<f64> {
    let m = bp.wq.ncols();
    let dh = m / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    grads.wo += &cache.mixed.t().dot(d_out);
    let d_mixed = d_out.dot(&bp.wo.t());
    let mut dq = Array2::zeros(cache.q.raw_dim());
    let mut dk = Array2::zeros(cache.k.raw_dim());
    let mut dv = Array2::zeros(cache.v.raw_dim());
    for p in 0..pairs {
        let rows = s![p * n..(p + 1) * n, ..];
        for hd in 0..heads {
            let cols = s![.., hd * dh..(hd + 1) * dh];
            let qh = cache.q.slice(rows).slice_move(cols);
            let kh = cache.k.slice(rows).slice_move(cols);
            let vh = cache.v.slice(rows).slice_move(cols);
            let ph = cache.probs.slice(s![p * heads + hd, .., ..]);
            let doh = d_mixed.slice(rows).slice_move(cols);
            let dp = doh.dot(&vh.t());
            let dvh = ph.t().dot(&doh);
            let ds = softmax_backward(&ph.to_owned(), &dp);
            let dqh = ds.dot(&kh).mapv(|x| x * scale);
            let dkh = ds.t().dot(&qh).mapv(|x| x * scale);
            dq.slice_mut(s![p * n..(p + 1) * n, hd * dh..(hd + 1) * dh])
                .zip_mut_with(&dqh, |a, &b| *a += b);
            dk.slice_mut(s![p * n..(p + 1) * n, hd * dh..(hd + 1) * dh])
                .zip_mut_with(&dkh, |a, &b| *a += b);
            dv.slice_mut(s![p * n..(p + 1) * n, hd * dh..(hd + 1) * dh])
                .zip_mut_with(&dvh, |a, &b| *a += b);
        }
    }
    grads.wq += &cache.input.t().dot(&dq);
    grads.wk += &cache.input.t().dot(&dk);
    grads.wv += &cache.input.t().dot(&dv);
    dq.dot(&bp.wq.t()) + dk.dot(&bp.wk.t()) + dv.dot(&bp.wv.t())
}

fn block_forward(
    h: &Array2<f64>,
    bp: &BlockParams,
    pairs: usize,
    n: usize,
    heads: usize,
) -> (Array2<f64>, BlockCache) {
    let (hn, r_in) = rms_rows(h);
    let (attn_out, attn) = self_attention_forward(&hn, bp, pairs, n, heads);
    let h1 = h + &attn_out;
    let (h1n, r_mid) = rms_rows(&h1);
    let m1 = h1n.dot(&bp.w1);
    let act = m1.mapv(silu);
    let out = &h1 + &act.dot(&bp.w2);
    (out, BlockCache { attn, r_in, h1n, r_mid, m1, act })
}

fn block_backward(
    cache: &BlockCache,
    bp: &BlockParams,
    grads: &mut BlockParams,
    d_out: &Array2<f64>,
    pairs: usize,
    n: usize,
    heads: usize,
) -> Array2<f64> {
    grads.w2 += &cache.act.t().dot(d_out);
    let d_act = d_out.dot(&bp.w2.t());
    let mut d_m1 = d_act;
    d_m1.zip_mut_with(&cache.m1, |g, &x| *g *= silu_prime(x));
    grads.w1 += &cache.h1n.t().dot(&d_m1);
    let d_h1n = d_m1.dot(&bp.w1.t());
    let d_h1 = d_out + &rms_backward(&cache.h1n, &cache.r_mid, &d_h1n);
    let d_hn = self_attention_backward(&cache.attn, bp, grads, &d_h1, pairs, n, heads);
    &d_h1 + &rms_backward(&cache.attn.input, &cache.r_in, &d_hn)
}

/// Full forward pass over a stacked batch. Output has z_bt's shape.
pub fn forward_batch(
    params: &ModelParameters,
    input: &BatchInput,
) -> Result<(Array2<f64>, ForwardCache)> {
    input.validate(&params.config)?;
    let cfg = &params.config;
    let (pairs, n) = (input.pairs(), input.n_tokens);
    let heads = cfg.num_heads;

    let x = ndarray::concatenate(Axis(1), &[input.z_bt.view(), input.z_a.view()])
        .expect("concat of equal-row blocks");
    let mut h = x.dot(&params.w_reduce) + &input.embed.dot(&params.w_embed);
    let mut tembs = Array2::zeros((pairs, cfg.timestep_embed_dim));
    for (p, &t) in input.timesteps.iter().enumerate() {
        let te = timestep_embedding(t, cfg.timestep_embed_dim);
        for (j, &v) in te.iter().enumerate() {
            tembs[[p, j]] = v;
        }
        let row = tembs.row(p).dot(&params.w_time);
        for mut hrow in h.slice_mut(s![p * n..(p + 1) * n, ..]).rows_mut() {
            hrow += &row;
        }
    }

    let mut blocks = Vec::with_capacity(cfg.num_blocks);
    for bp in &params.blocks {
        let (out, cache) = block_forward(&h, bp, pairs, n, heads);
        blocks.push(cache);
        h = out;
    }
    let (zgn, r_zg) = rms_rows(&h);

    // cross-attention: queries from the embedding, keys/values from z_g
    let m = cfg.model_dim;
    let scale = 1.0 / (m as f64).sqrt();
    let qc = input.embed.dot(&params.cross_wq);
    let kc = zgn.dot(&params.cross_wk);
    let vc = zgn.dot(&params.cross_wv);
    let mut cprobs = Array3::zeros((pairs, n, n));
    let mut u = Array2::zeros((pairs * n, m));
    for p in 0..pairs {
        let rows = s![p * n..(p + 1) * n, ..];
        let mut sc = qc.slice(rows).dot(&kc.slice(rows).t());
        sc.mapv_inplace(|x| x * scale);
        softmax_rows_inplace(&mut sc);
        u.slice_mut(rows).assign(&sc.dot(&vc.slice(rows)));
        cprobs.slice_mut(s![p, .., ..]).assign(&sc);
    }
    let cross = CrossCache { qc, kc, vc, probs: cprobs };

    let (u2, decoder) = block_forward(&u, &params.decoder, pairs, n, heads);
    let (u2n, r_u2) = rms_rows(&u2);

    // width-3 convolution along each pair's token axis, zero-padded ends
    let l = cfg.latent_dim;
    let mut y = Array2::zeros((pairs * n, l));
    for p in 0..pairs {
        let base = p * n;
        for t in 0..n {
            let mut acc = u2n.row(base + t).dot(&params.conv[1]);
            if t > 0 {
                acc += &u2n.row(base + t - 1).dot(&params.conv[0]);
            }
            if t + 1 < n {
                acc += &u2n.row(base + t + 1).dot(&params.conv[2]);
            }
            y.row_mut(base + t).assign(&acc);
        }
    }

    Ok((y, ForwardCache { x, tembs, blocks, zgn, r_zg, cross, decoder, u2n, r_u2 }))
}

/// Gradients of a scalar loss w.r.t. every parameter, given dL/d(output).
pub fn backward_batch(
    params: &ModelParameters,
    input: &BatchInput,
    cache: &ForwardCache,
    d_y: &Array2<f64>,
) -> Result<ModelParameters> {
    let cfg = params.config;
    let (pairs, n) = (input.pairs(), input.n_tokens);
    let heads = cfg.num_heads;
    let mut g = ModelParameters::zeros(cfg)?;

    // conv backward: kernel grads pair off shifted row ranges; input grads
    // use the opposite shifts
    let mut d_u2n = Array2::zeros(cache.u2n.raw_dim());
    for p in 0..pairs {
        let rows = s![p * n..(p + 1) * n, ..];
        let u2p = cache.u2n.slice(rows);
        let dyp = d_y.slice(rows);
        g.conv[1] += &u2p.t().dot(&dyp);
        if n > 1 {
            g.conv[0] += &u2p.slice(s![..n - 1, ..]).t().dot(&dyp.slice(s![1.., ..]));
            g.conv[2] += &u2p.slice(s![1.., ..]).t().dot(&dyp.slice(s![..n - 1, ..]));
        }
        let mut dup = d_u2n.slice_mut(rows);
        dup += &dyp.dot(&params.conv[1].t());
        if n > 1 {
            let shift_up = dyp.slice(s![1.., ..]).dot(&params.conv[0].t());
            dup.slice_mut(s![..n - 1, ..]).zip_mut_with(&shift_up, |a, &b| *a += b);
            let shift_down = dyp.slice(s![..n - 1, ..]).dot(&params.conv[2].t());
            dup.slice_mut(s![1.., ..]).zip_mut_with(&shift_down, |a, &b| *a += b);
        }
    }
    let d_u2 = rms_backward(&cache.u2n, &cache.r_u2, &d_u2n);

    let d_u = block_backward(&cache.decoder, &params.decoder, &mut g.decoder, &d_u2, pairs, n, heads);

    // cross-attention backward
    let m = cfg.model_dim;
    let scale = 1.0 / (m as f64).sqrt();
    let mut d_qc = Array2::zeros(cache.cross.qc.raw_dim());
    let mut d_kc = Array2::zeros(cache.cross.kc.raw_dim());
    let mut d_vc = Array2::zeros(cache.cross.vc.raw_dim());
    for p in 0..pairs {
        let rows = s![p * n..(p + 1) * n, ..];
        let ph = cache.cross.probs.slice(s![p, .., ..]).to_owned();
        let dup = d_u.slice(rows);
        let dp = dup.dot(&cache.cross.vc.slice(rows).t());
        let dvh = ph.t().dot(&dup);
        let ds = softmax_backward(&ph, &dp);
        let dqh = ds.dot(&cache.cross.kc.slice(rows)).mapv(|x| x * scale);
        let dkh = ds.t().dot(&cache.cross.qc.slice(rows)).mapv(|x| x * scale);
        d_qc.slice_mut(rows).assign(&dqh);
        d_kc.slice_mut(rows).assign(&dkh);
        d_vc.slice_mut(rows).assign(&dvh);
    }
    g.cross_wq += &input.embed.t().dot(&d_qc);
    g.cross_wk += &cache.zgn.t().dot(&d_kc);
    g.cross_wv += &cache.zgn.t().dot(&d_vc);
    let d_zgn = d_kc.dot(&params.cross_wk.t()) + d_vc.dot(&params.cross_wv.t());
    let mut d_h = rms_backward(&cache.zgn, &cache.r_zg, &d_zgn);

    for (bp, (gb, bc)) in params
        .blocks
        .iter()
        .zip(g.blocks.iter_mut().zip(cache.blocks.iter()))
        .rev()
    {
        d_h = block_backward(bc, bp, gb, &d_h, pairs, n, heads);
    }

    // timestep embedding: every token row of a pair received the same
    // additive vector, so its gradient is the row-sum outer product
    for p in 0..pairs {
        let dsum = d_h.slice(s![p * n..(p + 1) * n, ..]).sum_axis(Axis(0));
        let te = cache.tembs.row(p);
        for (j, &tv) in te.iter().enumerate() {
            if tv != 0.0 {
                g.w_time.row_mut(j).zip_mut_with(&dsum, |a, &b| *a += tv * b);
            }
        }
    }
    g.w_reduce += &cache.x.t().dot(&d_h);
    g.w_embed += &input.embed.t().dot(&d_h);

    Ok(g)
}

/// Single-pair noise prediction (the contract entry point).
pub fn predict_noise(
    params: &ModelParameters,
    z_a: &LatentTensor,
    z_bt: &LatentTensor,
    embed: &RfeEmbedding,
    t: usize,
) -> Result<LatentTensor> {
    if z_a.values.dim() != z_bt.values.dim() {
        return Err(NwbError::ShapeMismatch(format!(
            "condition latent {:?} vs noised latent {:?}",
            z_a.values.dim(),
            z_bt.values.dim()
        )));
    }
    if embed.values.nrows() != z_bt.tokens() || embed.embed_dim != params.config.embed_dim {
        return Err(NwbError::ShapeMismatch(format!(
            "embedding ({}, {}) for {} tokens and embed_dim {}",
            embed.values.nrows(),
            embed.embed_dim,
            z_bt.tokens(),
            params.config.embed_dim
        )));
    }
    let input = BatchInput {
        z_bt: z_bt.values.clone(),
        z_a: z_a.values.clone(),
        embed: embed.values.clone(),
        timesteps: vec![t],
        n_tokens: z_bt.tokens(),
    };
    let (y, _) = forward_batch(params, &input)?;
    Ok(LatentTensor { values: y, ..z_bt.clone() })
}
