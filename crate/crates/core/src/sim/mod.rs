//! Seeded Monte Carlo simulation of real random transformer blocks at
//! initialisation. Mirrors the theory-side block composition exactly so that
//! empirical similarity trajectories and attention diagnostics can be compared
//! against the closed-form maps.

pub mod rng;

use crate::block::BlockParams;
use crate::error::{Error, Result};
use crate::mlp::{Activation, MlpParams};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rng::{derive_stream, splitmix64_next, tag};
use serde::{Deserialize, Serialize};

/// A sequence of `t` token embeddings of dimension `d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBatch {
    t: usize,
    d: usize,
    data: Vec<f64>,
}

impl SequenceBatch {
    pub fn zeros(t: usize, d: usize) -> Self {
        SequenceBatch {
            t,
            d,
            data: vec![0.0; t * d],
        }
    }

    pub fn seq_len(&self) -> usize {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }
}

/// Empirical per-row attention diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionStats {
    /// Mean over rows of the inverse participation ratio `sum_s A_ts^2`.
    pub ipr: f64,
    /// Mean over ordered row pairs of the cross-overlap `sum_s A_ts A_t's`.
    pub cross_overlap: f64,
    /// Mean Shannon entropy of the rows, natural log units.
    pub entropy: f64,
}

/// Geometry of a batch: concentrated (q, p) plus pairwise-cosine statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryMeasurement {
    /// Mean squared token norm divided by d.
    pub q: f64,
    /// Mean pair inner product divided by d.
    pub p: f64,
    /// Mean pairwise cosine similarity.
    pub rho_mean: f64,
    /// Standard deviation of the pairwise cosine similarity.
    pub rho_std: f64,
}

/// Monte Carlo run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub d: usize,
    pub t: usize,
    pub block: BlockParams,
    pub n_seeds: usize,
    pub n_sequences: usize,
    pub base_seed: u64,
    /// Target input similarity of the generated sequences.
    pub rho0: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::domain("SimConfig", "d must be >= 2"));
        }
        if self.t < 2 {
            return Err(Error::domain("SimConfig", "t must be >= 2"));
        }
        if self.n_seeds < 1 || self.n_sequences < 1 {
            return Err(Error::domain(
                "SimConfig",
                "n_seeds and n_sequences must be >= 1",
            ));
        }
        if !(0.0..1.0).contains(&self.rho0) {
            return Err(Error::domain("SimConfig", "rho0 must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Depth profile of empirical measurements, index 0 = input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalTrajectory {
    pub rho_mean: Vec<f64>,
    pub rho_std: Vec<f64>,
    pub q_mean: Vec<f64>,
    /// Attention diagnostics of block `l` live at index `l - 1`.
    pub attn: Vec<AttentionStats>,
}

impl EmpiricalTrajectory {
    pub fn layers(&self) -> usize {
        self.rho_mean.len().saturating_sub(1)
    }
}

fn sample_normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

/// Fill with i.i.d. zero-mean Gaussians of standard deviation `std`.
fn fill_gaussian(buf: &mut [f64], std: f64, rng: &mut ChaCha8Rng) {
    if std == 0.0 {
        buf.fill(0.0);
    } else {
        for v in buf.iter_mut() {
            *v = std * sample_normal(rng);
        }
    }
}

/// Dot product with eight independent accumulators. The summation order is
/// fixed, so results are bit-reproducible; the split chains let the FPU
/// pipeline the adds instead of serialising on one dependency chain.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n8 = a.len() & !7;
    let mut acc = [0.0f64; 8];
    for (ca, cb) in a[..n8].chunks_exact(8).zip(b[..n8].chunks_exact(8)) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
        acc[4] += ca[4] * cb[4];
        acc[5] += ca[5] * cb[5];
        acc[6] += ca[6] * cb[6];
        acc[7] += ca[7] * cb[7];
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (x, y) in a[n8..].iter().zip(&b[n8..]) {
        s += x * y;
    }
    s
}

/// `out_row = M * x` for a row-major d x d matrix.
fn matvec(m: &[f64], x: &[f64], out: &mut [f64], d: usize) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(&m[i * d..(i + 1) * d], x);
    }
}

/// Four simultaneous dot products against one shared left operand; every
/// element of `w` is loaded once for four multiply-adds.
fn dot4(w: &[f64], x0: &[f64], x1: &[f64], x2: &[f64], x3: &[f64]) -> [f64; 4] {
    let n = w.len();
    let n4 = n & !3;
    let mut acc = [[0.0f64; 4]; 4];
    let mut j = 0;
    while j < n4 {
        for k in 0..4 {
            let wj = w[j + k];
            acc[k][0] += wj * x0[j + k];
            acc[k][1] += wj * x1[j + k];
            acc[k][2] += wj * x2[j + k];
            acc[k][3] += wj * x3[j + k];
        }
        j += 4;
    }
    let mut out = [0.0f64; 4];
    for (c, o) in out.iter_mut().enumerate() {
        *o = (acc[0][c] + acc[1][c]) + (acc[2][c] + acc[3][c]);
        for (jj, &wj) in w.iter().enumerate().skip(n4) {
            *o += wj * [x0, x1, x2, x3][c][jj];
        }
    }
    out
}

/// `out[t] = M * x[t]` for every token row. Tokens are processed four at a
/// time inside a tile that stays cache-resident while each weight row streams
/// through once.
fn matmul_tokens(m: &[f64], x: &SequenceBatch, out: &mut SequenceBatch) {
    let d = x.d;
    debug_assert_eq!(m.len(), d * d);
    const TILE: usize = 16;
    let mut t0 = 0;
    while t0 < x.t {
        let t1 = (t0 + TILE).min(x.t);
        for i in 0..d {
            let w_row = &m[i * d..(i + 1) * d];
            let mut t = t0;
            while t + 4 <= t1 {
                let vals = dot4(w_row, x.row(t), x.row(t + 1), x.row(t + 2), x.row(t + 3));
                for (k, v) in vals.iter().enumerate() {
                    out.data[(t + k) * d + i] = *v;
                }
                t += 4;
            }
            while t < t1 {
                out.data[t * d + i] = dot(w_row, x.row(t));
                t += 1;
            }
        }
        t0 = t1;
    }
}

/// Tokens `X_t = sqrt(rho) g0 + sqrt(1 - rho) g_t` with a shared Gaussian
/// direction `g0`: expected pairwise cosine `rho_target`, expected q = 1.
pub fn generate_sequence(
    rho_target: f64,
    t: usize,
    d: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SequenceBatch> {
    if !(0.0..1.0).contains(&rho_target) {
        return Err(Error::domain(
            "generate_sequence",
            format!("rho_target must lie in [0, 1), got {rho_target}"),
        ));
    }
    let shared = rho_target.sqrt();
    let fresh = (1.0 - rho_target).sqrt();
    let mut g0 = vec![0.0; d];
    fill_gaussian(&mut g0, 1.0, rng);
    let mut batch = SequenceBatch::zeros(t, d);
    for i in 0..t {
        let row = batch.row_mut(i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = shared * g0[j] + fresh * sample_normal(rng);
        }
    }
    Ok(batch)
}

/// LayerNorm without mean subtraction: every row rescaled to norm `sqrt(d)`.
pub fn layer_norm_apply(batch: &SequenceBatch) -> Result<SequenceBatch> {
    let mut out = batch.clone();
    let scale_target = (batch.d as f64).sqrt();
    for i in 0..batch.t {
        let row = out.row_mut(i);
        let norm2: f64 = row.iter().map(|v| v * v).sum();
        if norm2 == 0.0 {
            return Err(Error::ZeroRow { row: i });
        }
        let s = scale_target / norm2.sqrt();
        for v in row.iter_mut() {
            *v *= s;
        }
    }
    Ok(out)
}

/// Sampled projection weights of one attention layer.
struct AttentionWeights {
    q_w: Vec<f64>,
    k_w: Vec<f64>,
    v_w: Vec<f64>,
}

impl AttentionWeights {
    /// Q and K entries are N(0, sigma_a / d) with `sigma_a = beta sqrt(ln T)`,
    /// so the scores `a_tt' = (Q X_t) . (K X_t') / sqrt(d)` have variance
    /// `sigma_a^2` on normalised inputs. V entries are N(0, sigma_v2 / d).
    fn sample(
        d: usize,
        seq_len: usize,
        beta: f64,
        sigma_v2: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let sigma_a = crate::attention::sigma_a_from_beta(beta, seq_len)?;
        let std_qk = (sigma_a / d as f64).sqrt();
        let std_v = (sigma_v2 / d as f64).sqrt();
        let mut q_w = vec![0.0; d * d];
        let mut k_w = vec![0.0; d * d];
        let mut v_w = vec![0.0; d * d];
        fill_gaussian(&mut q_w, std_qk, rng);
        fill_gaussian(&mut k_w, std_qk, rng);
        fill_gaussian(&mut v_w, std_v, rng);
        Ok(AttentionWeights { q_w, k_w, v_w })
    }
}

fn attention_apply(
    batch: &SequenceBatch,
    weights: &AttentionWeights,
) -> Result<(SequenceBatch, AttentionStats)> {
    let (t, d) = (batch.t, batch.d);
    if t < 2 {
        return Err(Error::domain("attention_forward", "need at least 2 tokens"));
    }
    let mut q_rows = SequenceBatch::zeros(t, d);
    let mut k_rows = SequenceBatch::zeros(t, d);
    let mut v_rows = SequenceBatch::zeros(t, d);
    matmul_tokens(&weights.q_w, batch, &mut q_rows);
    matmul_tokens(&weights.k_w, batch, &mut k_rows);
    matmul_tokens(&weights.v_w, batch, &mut v_rows);

    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    let mut attn = vec![0.0; t * t];
    for i in 0..t {
        let row = &mut attn[i * t..(i + 1) * t];
        let qi = q_rows.row(i);
        for (s, w) in row.iter_mut().enumerate() {
            *w = dot(qi, k_rows.row(s)) * inv_sqrt_d;
        }
        softmax_in_place(row);
    }

    let stats = attention_stats(&attn, t);

    let mut out = SequenceBatch::zeros(t, d);
    for i in 0..t {
        let row = &attn[i * t..(i + 1) * t];
        let o = out.row_mut(i);
        for (s, &a) in row.iter().enumerate() {
            let v = v_rows.row(s);
            for (ov, vv) in o.iter_mut().zip(v) {
                *ov += a * vv;
            }
        }
    }
    Ok((out, stats))
}

/// One self-attention layer with freshly sampled Q, K, V. Softmax subtracts
/// the row maximum before exponentiation.
pub fn attention_forward(
    batch: &SequenceBatch,
    beta: f64,
    sigma_v2: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(SequenceBatch, AttentionStats)> {
    let weights = AttentionWeights::sample(batch.d, batch.t, beta, sigma_v2, rng)?;
    attention_apply(batch, &weights)
}

/// Row-max subtraction before exponentiation; normalises to sum 1.
fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

fn attention_stats(weights: &[f64], t: usize) -> AttentionStats {
    let mut ipr_sum = 0.0;
    let mut entropy_sum = 0.0;
    let mut col_sums = vec![0.0; t];
    for i in 0..t {
        let row = &weights[i * t..(i + 1) * t];
        let mut ipr = 0.0;
        let mut ent = 0.0;
        for (s, &a) in row.iter().enumerate() {
            ipr += a * a;
            if a > 0.0 {
                ent -= a * a.ln();
            }
            col_sums[s] += a;
        }
        ipr_sum += ipr;
        entropy_sum += ent;
    }
    // sum over ordered pairs (t, t'), t != t', of sum_s A_ts A_t's equals
    // sum_s c_s^2 minus the diagonal contribution.
    let col_sq: f64 = col_sums.iter().map(|c| c * c).sum();
    let cross = (col_sq - ipr_sum) / (t * (t - 1)) as f64;
    AttentionStats {
        ipr: ipr_sum / t as f64,
        cross_overlap: cross,
        entropy: entropy_sum / t as f64,
    }
}

/// Sampled weights of the shared two-layer MLP (hidden dimension `d`).
struct MlpWeights {
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl MlpWeights {
    fn sample(d: usize, mlp: &MlpParams, rng: &mut ChaCha8Rng) -> Self {
        let std_w = (mlp.sigma_w2 / d as f64).sqrt();
        let std_b = mlp.sigma_b2.sqrt();
        let mut w1 = vec![0.0; d * d];
        let mut b1 = vec![0.0; d];
        let mut w2 = vec![0.0; d * d];
        let mut b2 = vec![0.0; d];
        fill_gaussian(&mut w1, std_w, rng);
        fill_gaussian(&mut b1, std_b, rng);
        fill_gaussian(&mut w2, std_w, rng);
        fill_gaussian(&mut b2, std_b, rng);
        MlpWeights { w1, b1, w2, b2 }
    }
}

fn mlp_apply(
    batch: &SequenceBatch,
    weights: &MlpWeights,
    activation: Activation,
) -> SequenceBatch {
    let (t, d) = (batch.t, batch.d);
    let mut hidden = SequenceBatch::zeros(t, d);
    matmul_tokens(&weights.w1, batch, &mut hidden);
    for i in 0..t {
        for (h, b) in hidden.row_mut(i).iter_mut().zip(&weights.b1) {
            *h = match activation {
                Activation::Relu => (*h + b).max(0.0),
                Activation::Tanh => (*h + b).tanh(),
            };
        }
    }
    let mut out = SequenceBatch::zeros(t, d);
    matmul_tokens(&weights.w2, &hidden, &mut out);
    for i in 0..t {
        for (v, b) in out.row_mut(i).iter_mut().zip(&weights.b2) {
            *v += b;
        }
    }
    out
}

/// Shared two-layer MLP with freshly sampled weights, applied row-wise.
pub fn mlp_forward(
    batch: &SequenceBatch,
    mlp: &MlpParams,
    rng: &mut ChaCha8Rng,
) -> Result<SequenceBatch> {
    let weights = MlpWeights::sample(batch.d, mlp, rng);
    Ok(mlp_apply(batch, &weights, mlp.activation))
}

/// `out = a + alpha * b` row-wise.
fn add_scaled(a: &SequenceBatch, b: &SequenceBatch, alpha: f64) -> SequenceBatch {
    let mut out = a.clone();
    for (v, w) in out.data.iter_mut().zip(&b.data) {
        *v += alpha * w;
    }
    out
}

/// All sampled weights of one block. The sampling order (Q, K, V, W1, b1, W2,
/// b2) is part of the determinism contract.
struct BlockWeights {
    attn: AttentionWeights,
    mlp: MlpWeights,
}

impl BlockWeights {
    fn sample(
        d: usize,
        seq_len: usize,
        params: &BlockParams,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let attn =
            AttentionWeights::sample(d, seq_len, params.attn.beta, params.sigma_v2, rng)?;
        let mlp = MlpWeights::sample(d, &params.mlp, rng);
        Ok(BlockWeights { attn, mlp })
    }
}

fn block_apply(
    batch: &SequenceBatch,
    params: &BlockParams,
    weights: &BlockWeights,
) -> Result<(SequenceBatch, AttentionStats)> {
    let x0 = layer_norm_apply(batch)?;
    let (sa, stats) = attention_apply(&x0, &weights.attn)?;
    let r1 = add_scaled(&sa, &x0, params.alpha_sa);
    let x1 = layer_norm_apply(&r1)?;
    let m = mlp_apply(&x1, &weights.mlp, params.mlp.activation);
    let r2 = add_scaled(&m, &x1, params.alpha_mlp);
    let out = layer_norm_apply(&r2)?;
    Ok((out, stats))
}

/// One full post-norm block on real embeddings, mirroring the theory map:
/// LN -> attention -> + alpha_SA LN input -> LN -> MLP -> + alpha_MLP input -> LN.
pub fn block_forward(
    batch: &SequenceBatch,
    params: &BlockParams,
    rng: &mut ChaCha8Rng,
) -> Result<(SequenceBatch, AttentionStats)> {
    let weights = BlockWeights::sample(batch.d, batch.t, params, rng)?;
    block_apply(batch, params, &weights)
}

/// Cap on exhaustive pair statistics; larger sequences are subsampled.
const PAIR_EXHAUSTIVE_MAX_T: usize = 2048;
const PAIR_SUBSAMPLE: usize = 1 << 18;

/// Measure the concentrated geometry of a batch.
///
/// All T(T-1)/2 unordered pairs are used up to T = 2048; beyond that a
/// deterministic subsample of 2^18 pairs (seeded only by T) is taken.
pub fn measure_geometry(batch: &SequenceBatch) -> Result<GeometryMeasurement> {
    let (t, d) = (batch.t, batch.d);
    if t < 2 {
        return Err(Error::domain("measure_geometry", "need at least 2 tokens"));
    }
    let df = d as f64;
    let norms2: Vec<f64> = batch.rows().map(|r| dot(r, r)).collect();
    let q = norms2.iter().sum::<f64>() / (t as f64 * df);

    let mut p_sum = 0.0;
    let mut cos_sum = 0.0;
    let mut cos_sq_sum = 0.0;
    let mut n_pairs = 0usize;
    let pairs: Box<dyn Iterator<Item = (usize, usize)>> = if t <= PAIR_EXHAUSTIVE_MAX_T {
        Box::new((0..t).flat_map(move |i| ((i + 1)..t).map(move |j| (i, j))))
    } else {
        let mut rng = derive_stream(t as u64, &[tag::PAIR_SAMPLE]);
        Box::new(
            std::iter::from_fn(move || {
                loop {
                    let i = rng.random_range(0..t);
                    let j = rng.random_range(0..t);
                    if i != j {
                        return Some((i.min(j), i.max(j)));
                    }
                }
            })
            .take(PAIR_SUBSAMPLE),
        )
    };
    for (i, j) in pairs {
        let inner = dot(batch.row(i), batch.row(j));
        p_sum += inner / df;
        let denom = (norms2[i] * norms2[j]).sqrt();
        let cos = if denom > 0.0 { inner / denom } else { 0.0 };
        cos_sum += cos;
        cos_sq_sum += cos * cos;
        n_pairs += 1;
    }
    let n = n_pairs as f64;
    let rho_mean = cos_sum / n;
    let var = (cos_sq_sum / n - rho_mean * rho_mean).max(0.0);
    Ok(GeometryMeasurement {
        q,
        p: p_sum / n,
        rho_mean,
        rho_std: var.sqrt(),
    })
}

struct DepthTaskResult {
    rho_mean: Vec<f64>,
    rho_var_within: Vec<f64>,
    q: Vec<f64>,
    attn: Vec<AttentionStats>,
}

/// Propagate `n_seeds x n_sequences` generated batches through `layers`
/// blocks, recording per-layer geometry and attention diagnostics.
///
/// Weights are fresh per block per seed and shared by all sequences of that
/// seed, so each seed is one work item: its layer weights are sampled once and
/// applied to every sequence. Fully deterministic given `base_seed`; seeds run
/// in parallel and aggregation happens in (seed, sequence) order.
pub fn run_depth_experiment(cfg: &SimConfig, layers: usize) -> Result<EmpiricalTrajectory> {
    cfg.validate()?;
    let seeds: Vec<u64> = (0..cfg.n_seeds as u64).collect();

    let per_seed: Vec<Result<Vec<DepthTaskResult>>> = seeds
        .par_iter()
        .map(|&seed_idx| {
            let mut tasks: Vec<DepthTaskResult> = Vec::with_capacity(cfg.n_sequences);
            let mut batches: Vec<SequenceBatch> = Vec::with_capacity(cfg.n_sequences);
            for seq_idx in 0..cfg.n_sequences as u64 {
                let mut seq_rng =
                    derive_stream(cfg.base_seed, &[tag::SEQUENCE, seed_idx, seq_idx]);
                let batch = generate_sequence(cfg.rho0, cfg.t, cfg.d, &mut seq_rng)?;
                let g = measure_geometry(&batch)?;
                let mut task = DepthTaskResult {
                    rho_mean: Vec::with_capacity(layers + 1),
                    rho_var_within: Vec::with_capacity(layers + 1),
                    q: Vec::with_capacity(layers + 1),
                    attn: Vec::with_capacity(layers),
                };
                task.rho_mean.push(g.rho_mean);
                task.rho_var_within.push(g.rho_std * g.rho_std);
                task.q.push(g.q);
                tasks.push(task);
                batches.push(batch);
            }
            for layer in 1..=layers as u64 {
                let mut w_rng =
                    derive_stream(cfg.base_seed, &[tag::WEIGHTS, seed_idx, layer]);
                let weights = BlockWeights::sample(cfg.d, cfg.t, &cfg.block, &mut w_rng)?;
                for (task, batch) in tasks.iter_mut().zip(batches.iter_mut()) {
                    let (next, stats) = block_apply(batch, &cfg.block, &weights)?;
                    *batch = next;
                    let g = measure_geometry(batch)?;
                    task.rho_mean.push(g.rho_mean);
                    task.rho_var_within.push(g.rho_std * g.rho_std);
                    task.q.push(g.q);
                    task.attn.push(stats);
                }
            }
            Ok(tasks)
        })
        .collect();

    let mut collected = Vec::with_capacity(cfg.n_seeds * cfg.n_sequences);
    for r in per_seed {
        collected.extend(r?);
    }
    let n = collected.len() as f64;
    let levels = layers + 1;
    let mut rho_mean = vec![0.0; levels];
    let mut rho_sq = vec![0.0; levels];
    let mut q_mean = vec![0.0; levels];
    let mut attn = vec![
        AttentionStats {
            ipr: 0.0,
            cross_overlap: 0.0,
            entropy: 0.0
        };
        layers
    ];
    for task in &collected {
        for l in 0..levels {
            rho_mean[l] += task.rho_mean[l];
            // pooled second moment over pairs and tasks
            rho_sq[l] += task.rho_var_within[l] + task.rho_mean[l] * task.rho_mean[l];
            q_mean[l] += task.q[l];
        }
        for (acc, s) in attn.iter_mut().zip(&task.attn) {
            acc.ipr += s.ipr;
            acc.cross_overlap += s.cross_overlap;
            acc.entropy += s.entropy;
        }
    }
    for l in 0..levels {
        rho_mean[l] /= n;
        q_mean[l] /= n;
        rho_sq[l] = (rho_sq[l] / n - rho_mean[l] * rho_mean[l]).max(0.0).sqrt();
    }
    for s in attn.iter_mut() {
        s.ipr /= n;
        s.cross_overlap /= n;
        s.entropy /= n;
    }
    Ok(EmpiricalTrajectory {
        rho_mean,
        rho_std: rho_sq,
        q_mean,
        attn,
    })
}

/// One cell of the single-layer attention phase grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaPhaseCell {
    pub beta: f64,
    pub rho: f64,
    /// Empirical similarity after one attention layer.
    pub sa_rho: f64,
    pub ipr: f64,
    pub entropy: f64,
}

/// Single-layer phase experiment: generate, normalise, one attention layer,
/// measure. Averaged over seeds; beta-major cell order.
pub fn run_sa_phase_experiment(
    d: usize,
    t: usize,
    beta_grid: &[f64],
    rho_grid: &[f64],
    n_seeds: usize,
    base_seed: u64,
) -> Result<Vec<SaPhaseCell>> {
    if beta_grid.is_empty() || rho_grid.is_empty() {
        return Err(Error::precondition(
            "run_sa_phase_experiment",
            "grids must be nonempty",
        ));
    }
    if n_seeds < 1 {
        return Err(Error::precondition(
            "run_sa_phase_experiment",
            "n_seeds must be >= 1",
        ));
    }
    let cells: Vec<(usize, usize)> = (0..beta_grid.len())
        .flat_map(|bi| (0..rho_grid.len()).map(move |ri| (bi, ri)))
        .collect();
    let results: Vec<Result<SaPhaseCell>> = cells
        .par_iter()
        .map(|&(bi, ri)| {
            let beta = beta_grid[bi];
            let rho = rho_grid[ri];
            let mut sa_rho = 0.0;
            let mut ipr = 0.0;
            let mut entropy = 0.0;
            for s in 0..n_seeds as u64 {
                let mut x_rng = derive_stream(
                    base_seed,
                    &[tag::PHASE_SEQ, bi as u64, ri as u64, s],
                );
                let batch = generate_sequence(rho, t, d, &mut x_rng)?;
                let normed = layer_norm_apply(&batch)?;
                let mut w_rng = derive_stream(
                    base_seed,
                    &[tag::PHASE_WEIGHTS, bi as u64, ri as u64, s],
                );
                let (out, stats) = attention_forward(&normed, beta, 1.0, &mut w_rng)?;
                let g = measure_geometry(&out)?;
                sa_rho += g.rho_mean;
                ipr += stats.ipr;
                entropy += stats.entropy;
            }
            let n = n_seeds as f64;
            Ok(SaPhaseCell {
                beta,
                rho,
                sa_rho: sa_rho / n,
                ipr: ipr / n,
                entropy: entropy / n,
            })
        })
        .collect();
    results.into_iter().collect()
}

/// One point of the streamed large-T IPR scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IprPoint {
    pub beta: f64,
    pub ipr_mean: f64,
    pub ipr_std: f64,
    pub entropy_mean: f64,
}

/// Inverse participation ratio of single attention rows at large T.
///
/// Tokens are streamed one at a time, so memory stays O(T + d^2) no matter how
/// long the sequence is: for a query token x_q the scores are
/// `a_s = (K^T Q x_q) . x_s / sqrt(d)`, which needs one d-vector per key.
/// Each (seed, row) pair scores one freshly sampled query against T streamed
/// keys; samples are averaged per beta.
pub fn run_ipr_experiment(
    d: usize,
    t: usize,
    beta_grid: &[f64],
    rho_target: f64,
    n_seeds: usize,
    rows_per_seed: usize,
    base_seed: u64,
) -> Result<Vec<IprPoint>> {
    if beta_grid.is_empty() || n_seeds < 1 || rows_per_seed < 1 {
        return Err(Error::precondition(
            "run_ipr_experiment",
            "need a beta grid, >= 1 seed and >= 1 row",
        ));
    }
    if !(0.0..1.0).contains(&rho_target) {
        return Err(Error::domain(
            "run_ipr_experiment",
            format!("rho_target must lie in [0, 1), got {rho_target}"),
        ));
    }
    let tasks: Vec<(usize, u64, u64)> = (0..beta_grid.len())
        .flat_map(|bi| {
            (0..n_seeds as u64)
                .flat_map(move |s| (0..rows_per_seed as u64).map(move |r| (bi, s, r)))
        })
        .collect();
    let samples: Vec<Result<(usize, f64, f64)>> = tasks
        .par_iter()
        .map(|&(bi, seed, row)| {
            let beta = beta_grid[bi];
            let mut rng = derive_stream(base_seed, &[tag::IPR, bi as u64, seed, row]);
            let (ipr, entropy) = ipr_one_row(d, t, beta, rho_target, &mut rng)?;
            Ok((bi, ipr, entropy))
        })
        .collect();

    let nb = beta_grid.len();
    let mut sums = vec![(0.0f64, 0.0f64, 0.0f64, 0usize); nb];
    for s in samples {
        let (bi, ipr, ent) = s?;
        let acc = &mut sums[bi];
        acc.0 += ipr;
        acc.1 += ipr * ipr;
        acc.2 += ent;
        acc.3 += 1;
    }
    Ok(beta_grid
        .iter()
        .zip(sums)
        .map(|(&beta, (s, s2, e, n))| {
            let n = n as f64;
            let mean = s / n;
            IprPoint {
                beta,
                ipr_mean: mean,
                ipr_std: (s2 / n - mean * mean).max(0.0).sqrt(),
                entropy_mean: e / n,
            }
        })
        .collect())
}

/// Score one streamed attention row; returns (IPR, entropy).
fn ipr_one_row(
    d: usize,
    t: usize,
    beta: f64,
    rho_target: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    let sigma_a = crate::attention::sigma_a_from_beta(beta, t)?;
    let std_qk = (sigma_a / d as f64).sqrt();
    let mut q_w = vec![0.0; d * d];
    let mut k_w = vec![0.0; d * d];
    fill_gaussian(&mut q_w, std_qk, rng);
    fill_gaussian(&mut k_w, std_qk, rng);

    let shared = rho_target.sqrt();
    let fresh = (1.0 - rho_target).sqrt();
    let mut g0 = vec![0.0; d];
    fill_gaussian(&mut g0, 1.0, rng);
    let sqrt_d = (d as f64).sqrt();

    let normalize = |row: &mut [f64]| -> Result<()> {
        let norm2 = dot(row, row);
        if norm2 == 0.0 {
            return Err(Error::ZeroRow { row: 0 });
        }
        let s = sqrt_d / norm2.sqrt();
        for v in row.iter_mut() {
            *v *= s;
        }
        Ok(())
    };

    // Query token: index 0 of the streamed sequence.
    let mut x_q = vec![0.0; d];
    for (j, v) in x_q.iter_mut().enumerate() {
        *v = shared * g0[j] + fresh * sample_normal(rng);
    }
    normalize(&mut x_q)?;

    // v = K^T (Q x_q): scores become a_s = v . x_s / sqrt(d).
    let mut u = vec![0.0; d];
    matvec(&q_w, &x_q, &mut u, d);
    let mut v = vec![0.0; d];
    for i in 0..d {
        let ui = u[i];
        let k_row = &k_w[i * d..(i + 1) * d];
        for (vj, kij) in v.iter_mut().zip(k_row) {
            *vj += kij * ui;
        }
    }

    let inv_sqrt_d = 1.0 / sqrt_d;
    let mut scores = vec![0.0; t];
    scores[0] = dot(&v, &x_q) * inv_sqrt_d;
    let mut x_s = vec![0.0; d];
    for score in scores.iter_mut().skip(1) {
        for (j, xv) in x_s.iter_mut().enumerate() {
            *xv = shared * g0[j] + fresh * sample_normal(rng);
        }
        normalize(&mut x_s)?;
        *score = dot(&v, &x_s) * inv_sqrt_d;
    }

    softmax_in_place(&mut scores);
    let mut ipr = 0.0;
    let mut ent = 0.0;
    for &a in &scores {
        ipr += a * a;
        if a > 0.0 {
            ent -= a * a.ln();
        }
    }
    Ok((ipr, ent))
}

/// Deterministic fingerprint of a batch, used by determinism tests.
pub fn batch_fingerprint(batch: &SequenceBatch) -> u64 {
    let mut state = 0x5EED5EED5EED5EEDu64;
    for &v in &batch.data {
        state ^= v.to_bits();
        splitmix64_next(&mut state);
    }
    state
}
