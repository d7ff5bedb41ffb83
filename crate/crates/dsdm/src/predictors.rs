//! Small differentiable predictors behind a common interface: a seeded
//! deterministic training algorithm, a scalar model-output function, its
//! exact parameter gradient, and the training loss.
//!
//! Two variants are provided. `GeneralizedLogistic` is a binary classifier
//! over per-example triplets `(x_i, b_i, y_i)`. `TinySoftmaxLm` is a
//! next-token model: embedding -> prefix-mean -> hidden tanh layer ->
//! softmax head, conditioning each position on the mean embedding of all
//! preceding tokens within the context window.
//!
//! Parameter flattening order is fixed (layer-major, row-major within each
//! layer): embedding, hidden weights, hidden bias, head weights, head bias.

use std::io::{Read as IoRead, Write as IoWrite};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::corpus::{CandidatePool, TokenId};
use crate::datamodel_oracle::SubsetMask;
use crate::{Error, Result};

/// Probabilities are clamped to this range before any log or margin.
pub const PROB_CLAMP: f64 = 1e-6;

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// One generalized-logistic training point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub x: Vec<f64>,
    pub bias: f64,
    /// Label in {-1, +1}.
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredictorSpec {
    /// Binary classifier `f(z) = x^T theta + b`. `features[i]` is the
    /// triplet for pool example `i` (the deterministic featurizer, applied
    /// up front).
    GeneralizedLogistic { input_dim: usize, features: Vec<Triplet> },
    /// Next-token model over token sequences.
    TinySoftmaxLm { vocab_size: usize, context_len: usize, hidden_dim: usize },
}

impl PredictorSpec {
    pub fn id(&self) -> String {
        match self {
            PredictorSpec::GeneralizedLogistic { input_dim, .. } => {
                format!("logistic:{input_dim}")
            }
            PredictorSpec::TinySoftmaxLm { vocab_size, context_len, hidden_dim } => {
                format!("tinylm:v{vocab_size}:c{context_len}:h{hidden_dim}")
            }
        }
    }

    /// Flat parameter count N.
    pub fn param_len(&self) -> usize {
        match self {
            PredictorSpec::GeneralizedLogistic { input_dim, .. } => *input_dim,
            PredictorSpec::TinySoftmaxLm { vocab_size, hidden_dim, .. } => {
                let (v, h) = (*vocab_size, *hidden_dim);
                v * h + h * h + h + v * h + v
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub theta: Vec<f64>,
    pub predictor_id: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Fraction of the pool used when training reference models.
    pub subset_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            batch_size: 32,
            learning_rate: 0.1,
            weight_decay: 0.0,
            seed: 0,
            subset_fraction: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("steps and batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be > 0".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig("weight_decay must be >= 0".into()));
        }
        if !(self.subset_fraction > 0.0 && self.subset_fraction <= 1.0) {
            return Err(Error::InvalidConfig("subset_fraction must be in (0,1]".into()));
        }
        Ok(())
    }
}

/// An evaluation point for `output`/`grad_output`/`loss`.
#[derive(Debug, Clone)]
pub enum EvalPoint<'a> {
    Logistic(&'a Triplet),
    /// Token sequence; positions `>= continuation_start` are scored
    /// (each conditioned on everything before it).
    Sequence { tokens: &'a [TokenId], continuation_start: usize },
}

impl<'a> EvalPoint<'a> {
    /// A pool training example: every position after the first is scored.
    pub fn pool_sequence(tokens: &'a [TokenId]) -> Self {
        EvalPoint::Sequence { tokens, continuation_start: 1 }
    }
}

/// Owned counterpart of [`EvalPoint`], for APIs that store target examples.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetExample {
    Logistic(Triplet),
    Sequence { tokens: Vec<TokenId>, continuation_start: usize },
}

impl TargetExample {
    pub fn from_sample(sample: &crate::corpus::TargetSample) -> Self {
        let (tokens, start) = sample.full_sequence();
        TargetExample::Sequence { tokens, continuation_start: start.max(1) }
    }

    pub fn as_eval(&self) -> EvalPoint<'_> {
        match self {
            TargetExample::Logistic(t) => EvalPoint::Logistic(t),
            TargetExample::Sequence { tokens, continuation_start } => {
                EvalPoint::Sequence { tokens, continuation_start: *continuation_start }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// TinySoftmaxLm internals
// ---------------------------------------------------------------------------

struct LmLayout {
    v: usize,
    h: usize,
    emb: std::ops::Range<usize>,
    w1: std::ops::Range<usize>,
    b1: std::ops::Range<usize>,
    w2: std::ops::Range<usize>,
    b2: std::ops::Range<usize>,
}

impl LmLayout {
    fn new(v: usize, h: usize) -> Self {
        let emb = 0..v * h;
        let w1 = emb.end..emb.end + h * h;
        let b1 = w1.end..w1.end + h;
        let w2 = b1.end..b1.end + v * h;
        let b2 = w2.end..w2.end + v;
        Self { v, h, emb, w1, b1, w2, b2 }
    }
}

struct PositionForward {
    /// Prefix-mean embedding input.
    u: Vec<f64>,
    /// Pre-activation of the hidden layer.
    h_act: Vec<f64>,
    /// Softmax over the vocabulary.
    probs: Vec<f64>,
}

fn lm_forward_position(layout: &LmLayout, theta: &[f64], prefix_sum: &[f64], prefix_len: usize) -> PositionForward {
    let (v, h) = (layout.v, layout.h);
    let inv = 1.0 / prefix_len as f64;
    let u: Vec<f64> = prefix_sum.iter().map(|s| s * inv).collect();
    let w1 = &theta[layout.w1.clone()];
    let b1 = &theta[layout.b1.clone()];
    let mut h_act = vec![0.0; h];
    for r in 0..h {
        let mut a = b1[r];
        let row = &w1[r * h..(r + 1) * h];
        for c in 0..h {
            a += row[c] * u[c];
        }
        h_act[r] = a.tanh();
    }
    let w2 = &theta[layout.w2.clone()];
    let b2 = &theta[layout.b2.clone()];
    let mut logits = vec![0.0; v];
    for t in 0..v {
        let row = &w2[t * h..(t + 1) * h];
        let mut s = b2[t];
        for c in 0..h {
            s += row[c] * h_act[c];
        }
        logits[t] = s;
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= z;
    }
    PositionForward { u, h_act, probs }
}

/// Backpropagate `d_logits` for one position into the flat gradient.
fn lm_backward_position(
    layout: &LmLayout,
    theta: &[f64],
    fwd: &PositionForward,
    d_logits: &[f64],
    tokens: &[TokenId],
    prefix_len: usize,
    grad: &mut [f64],
) {
    let (v, h) = (layout.v, layout.h);
    let w2 = &theta[layout.w2.clone()];
    let mut d_h = vec![0.0; h];
    {
        let gw2 = &mut grad[layout.w2.clone()];
        for t in 0..v {
            let g = d_logits[t];
            if g == 0.0 {
                continue;
            }
            let row = &mut gw2[t * h..(t + 1) * h];
            for c in 0..h {
                row[c] += g * fwd.h_act[c];
                d_h[c] += g * w2[t * h + c];
            }
        }
    }
    {
        let gb2 = &mut grad[layout.b2.clone()];
        for t in 0..v {
            gb2[t] += d_logits[t];
        }
    }
    let mut d_a = vec![0.0; h];
    for r in 0..h {
        d_a[r] = d_h[r] * (1.0 - fwd.h_act[r] * fwd.h_act[r]);
    }
    let w1 = &theta[layout.w1.clone()];
    let mut d_u = vec![0.0; h];
    {
        let gw1 = &mut grad[layout.w1.clone()];
        let gb1_start = layout.b1.start - layout.w1.start;
        let _ = gb1_start;
        for r in 0..h {
            let g = d_a[r];
            if g == 0.0 {
                continue;
            }
            let row = &mut gw1[r * h..(r + 1) * h];
            for c in 0..h {
                row[c] += g * fwd.u[c];
                d_u[c] += g * w1[r * h + c];
            }
        }
    }
    {
        let gb1 = &mut grad[layout.b1.clone()];
        for r in 0..h {
            gb1[r] += d_a[r];
        }
    }
    let inv = 1.0 / prefix_len as f64;
    let gemb = &mut grad[layout.emb.clone()];
    for &tok in &tokens[..prefix_len] {
        let base = tok as usize * h;
        for c in 0..h {
            gemb[base + c] += d_u[c] * inv;
        }
    }
}

/// Shared forward/backward walk over the scored positions of a sequence.
/// `per_position` receives the position index, the correct-token id, and
/// the forward state, and returns the logit-space gradient to accumulate
/// (or `None` to skip backprop for that position).
fn lm_walk<F>(
    layout: &LmLayout,
    theta: &[f64],
    tokens: &[TokenId],
    continuation_start: usize,
    grad: Option<&mut [f64]>,
    mut per_position: F,
) where
    F: FnMut(usize, usize, &PositionForward) -> Option<Vec<f64>>,
{
    assert!(continuation_start >= 1, "continuation must not start at position 0");
    let h = layout.h;
    let emb = &theta[layout.emb.clone()];
    let mut prefix_sum = vec![0.0; h];
    let mut grad = grad;
    for (j, &correct) in tokens.iter().enumerate() {
        if j > 0 && j >= continuation_start {
            let fwd = lm_forward_position(layout, theta, &prefix_sum, j);
            if let Some(d_logits) = per_position(j, correct as usize, &fwd) {
                let g = grad.as_deref_mut().expect("gradient buffer required");
                lm_backward_position(layout, theta, &fwd, &d_logits, tokens, j, g);
            }
        }
        let base = correct as usize * h;
        for c in 0..h {
            prefix_sum[c] += emb[base + c];
        }
    }
}

/// Next-token distribution given a (non-empty) prefix; used by greedy
/// decoding in the eval module.
pub fn next_token_distribution(
    spec: &PredictorSpec,
    params: &ModelParams,
    prefix: &[TokenId],
) -> Vec<f64> {
    let PredictorSpec::TinySoftmaxLm { vocab_size, hidden_dim, .. } = spec else {
        panic!("next_token_distribution requires the LM variant");
    };
    assert!(!prefix.is_empty(), "empty prefix");
    let layout = LmLayout::new(*vocab_size, *hidden_dim);
    let emb = &params.theta[layout.emb.clone()];
    let mut prefix_sum = vec![0.0; *hidden_dim];
    for &tok in prefix {
        let base = tok as usize * hidden_dim;
        for c in 0..*hidden_dim {
            prefix_sum[c] += emb[base + c];
        }
    }
    lm_forward_position(&layout, &params.theta, &prefix_sum, prefix.len()).probs
}

/// Hidden-layer activation after consuming the whole prefix; the embedding
/// hook used for semantic deduplication.
pub fn hidden_state(spec: &PredictorSpec, params: &ModelParams, prefix: &[TokenId]) -> Vec<f64> {
    let PredictorSpec::TinySoftmaxLm { vocab_size, hidden_dim, .. } = spec else {
        panic!("hidden_state requires the LM variant");
    };
    assert!(!prefix.is_empty(), "empty prefix");
    let layout = LmLayout::new(*vocab_size, *hidden_dim);
    let emb = &params.theta[layout.emb.clone()];
    let mut prefix_sum = vec![0.0; *hidden_dim];
    for &tok in prefix {
        let base = tok as usize * hidden_dim;
        for c in 0..*hidden_dim {
            prefix_sum[c] += emb[base + c];
        }
    }
    lm_forward_position(&layout, &params.theta, &prefix_sum, prefix.len()).h_act
}

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

/// Scalar model output `f(z; theta)`: the linear margin for the logistic
/// variant, and the summed per-position log-odds of the correct token
/// (mean multi-class margin form) for the LM variant.
pub fn output(spec: &PredictorSpec, params: &ModelParams, z: &EvalPoint<'_>) -> f64 {
    match (spec, z) {
        (PredictorSpec::GeneralizedLogistic { .. }, EvalPoint::Logistic(t)) => {
            t.x.iter().zip(&params.theta).map(|(a, b)| a * b).sum::<f64>() + t.bias
        }
        (
            PredictorSpec::TinySoftmaxLm { vocab_size, hidden_dim, .. },
            EvalPoint::Sequence { tokens, continuation_start },
        ) => {
            let layout = LmLayout::new(*vocab_size, *hidden_dim);
            let mut margin = 0.0;
            lm_walk(&layout, &params.theta, tokens, *continuation_start, None, |_, correct, fwd| {
                let p = clamp_prob(fwd.probs[correct]);
                margin += (p / (1.0 - p)).ln();
                None
            });
            margin
        }
        _ => panic!("eval point does not match predictor variant"),
    }
}

/// Exact analytic gradient of `output` with respect to the flat parameters.
pub fn grad_output(spec: &PredictorSpec, params: &ModelParams, z: &EvalPoint<'_>) -> Vec<f64> {
    match (spec, z) {
        (PredictorSpec::GeneralizedLogistic { .. }, EvalPoint::Logistic(t)) => t.x.clone(),
        (
            PredictorSpec::TinySoftmaxLm { vocab_size, hidden_dim, .. },
            EvalPoint::Sequence { tokens, continuation_start },
        ) => {
            let layout = LmLayout::new(*vocab_size, *hidden_dim);
            let mut grad = vec![0.0; spec.param_len()];
            lm_walk(
                &layout,
                &params.theta,
                tokens,
                *continuation_start,
                Some(&mut grad),
                |_, correct, fwd| {
                    let p = fwd.probs[correct];
                    if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
                        // Clamped margin is locally constant.
                        return None;
                    }
                    // d margin / d logit_k = (delta_{ck} - p_k) / (1 - p_c)
                    let scale = 1.0 / (1.0 - p);
                    let mut d: Vec<f64> = fwd.probs.iter().map(|&pk| -pk * scale).collect();
                    d[correct] += scale;
                    Some(d)
                },
            );
            grad
        }
        _ => panic!("eval point does not match predictor variant"),
    }
}

/// Training loss: `log(1+exp(-y f))` for the logistic variant, mean
/// token-level cross-entropy over scored positions for the LM variant.
pub fn loss(spec: &PredictorSpec, params: &ModelParams, z: &EvalPoint<'_>) -> f64 {
    match (spec, z) {
        (PredictorSpec::GeneralizedLogistic { .. }, EvalPoint::Logistic(t)) => {
            let f = output(spec, params, z);
            logistic_loss(t.y * f)
        }
        (
            PredictorSpec::TinySoftmaxLm { vocab_size, hidden_dim, .. },
            EvalPoint::Sequence { tokens, continuation_start },
        ) => {
            let layout = LmLayout::new(*vocab_size, *hidden_dim);
            let mut total = 0.0;
            let mut count = 0usize;
            lm_walk(&layout, &params.theta, tokens, *continuation_start, None, |_, correct, fwd| {
                total -= clamp_prob(fwd.probs[correct]).ln();
                count += 1;
                None
            });
            if count == 0 {
                0.0
            } else {
                total / count as f64
            }
        }
        _ => panic!("eval point does not match predictor variant"),
    }
}

/// Numerically stable `log(1 + exp(-m))`.
fn logistic_loss(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

/// Per-position correct-token probabilities and their mean (LM), or the
/// scalar `p* = sigma(y f)` (logistic). All values clamped into (0, 1).
pub struct CorrectnessProbs {
    pub per_position: Vec<f64>,
    pub mean: f64,
}

pub fn correctness_probabilities(
    spec: &PredictorSpec,
    params: &ModelParams,
    z: &EvalPoint<'_>,
) -> CorrectnessProbs {
    match (spec, z) {
        (PredictorSpec::GeneralizedLogistic { .. }, EvalPoint::Logistic(t)) => {
            let f = output(spec, params, z);
            let p = clamp_prob(1.0 / (1.0 + (-t.y * f).exp()));
            CorrectnessProbs { per_position: vec![p], mean: p }
        }
        (
            PredictorSpec::TinySoftmaxLm { vocab_size, hidden_dim, .. },
            EvalPoint::Sequence { tokens, continuation_start },
        ) => {
            let layout = LmLayout::new(*vocab_size, *hidden_dim);
            let mut per = Vec::new();
            lm_walk(&layout, &params.theta, tokens, *continuation_start, None, |_, correct, fwd| {
                per.push(clamp_prob(fwd.probs[correct]));
                None
            });
            let mean = if per.is_empty() { 0.5 } else { per.iter().sum::<f64>() / per.len() as f64 };
            CorrectnessProbs { per_position: per, mean }
        }
        _ => panic!("eval point does not match predictor variant"),
    }
}

fn init_params(spec: &PredictorSpec, seed: u64) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1234);
    let normal = Normal::new(0.0, 0.1).unwrap();
    let n = spec.param_len();
    let theta = match spec {
        PredictorSpec::GeneralizedLogistic { .. } => {
            (0..n).map(|_| 0.01 * normal.sample(&mut rng)).collect()
        }
        PredictorSpec::TinySoftmaxLm { vocab_size, hidden_dim, .. } => {
            let layout = LmLayout::new(*vocab_size, *hidden_dim);
            let mut theta = vec![0.0; n];
            for i in layout.emb.chain(layout.w1).chain(layout.w2) {
                theta[i] = normal.sample(&mut rng);
            }
            theta
        }
    };
    ModelParams { theta, predictor_id: spec.id(), seed }
}

/// Add the gradient of the training loss at `z` to `grad`, scaled by `w`.
fn accumulate_loss_grad(
    spec: &PredictorSpec,
    params: &ModelParams,
    z: &EvalPoint<'_>,
    w: f64,
    grad: &mut [f64],
) {
    match (spec, z) {
        (PredictorSpec::GeneralizedLogistic { .. }, EvalPoint::Logistic(t)) => {
            let f = output(spec, params, z);
            let p = 1.0 / (1.0 + (-t.y * f).exp());
            let g = -t.y * (1.0 - p) * w;
            for (gi, xi) in grad.iter_mut().zip(&t.x) {
                *gi += g * xi;
            }
        }
        (
            PredictorSpec::TinySoftmaxLm { vocab_size, hidden_dim, .. },
            EvalPoint::Sequence { tokens, continuation_start },
        ) => {
            let layout = LmLayout::new(*vocab_size, *hidden_dim);
            let count = tokens.len().saturating_sub(*continuation_start.max(&1)) as f64;
            if count == 0.0 {
                return;
            }
            let scale = w / count;
            lm_walk(
                &layout,
                &params.theta,
                tokens,
                *continuation_start,
                Some(grad),
                |_, correct, fwd| {
                    let mut d: Vec<f64> = fwd.probs.iter().map(|&pk| pk * scale).collect();
                    d[correct] -= scale;
                    Some(d)
                },
            );
        }
        _ => panic!("eval point does not match predictor variant"),
    }
}

fn pool_eval_point<'a>(
    spec: &'a PredictorSpec,
    pool: &'a CandidatePool,
    idx: usize,
) -> EvalPoint<'a> {
    match spec {
        PredictorSpec::GeneralizedLogistic { features, .. } => EvalPoint::Logistic(&features[idx]),
        PredictorSpec::TinySoftmaxLm { .. } => {
            EvalPoint::pool_sequence(&pool.examples[idx].tokens)
        }
    }
}

/// Seeded mini-batch gradient descent on the training loss over the
/// selected examples. Identical inputs and seed give bit-identical output.
pub fn train(
    spec: &PredictorSpec,
    subset: &SubsetMask,
    pool: &CandidatePool,
    cfg: &TrainConfig,
) -> Result<ModelParams> {
    cfg.validate()?;
    let indices: Vec<usize> = subset.iter_ones().collect();
    if indices.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if let PredictorSpec::GeneralizedLogistic { features, input_dim } = spec {
        if features.len() != subset.len() {
            return Err(Error::LengthMismatch { left: features.len(), right: subset.len() });
        }
        if features.iter().any(|t| t.x.len() != *input_dim) {
            return Err(Error::InvalidConfig("feature dimension mismatch".into()));
        }
    } else if pool.len() != subset.len() {
        return Err(Error::LengthMismatch { left: pool.len(), right: subset.len() });
    }

    let mut params = init_params(spec, cfg.seed);
    let n = params.theta.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ MINIBATCH_SALT);
    let mut order = indices.clone();
    let mut cursor = order.len(); // force an initial shuffle
    let mut grad = vec![0.0; n];

    for step in 0..cfg.steps {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let bs = cfg.batch_size.min(order.len());
        let mut batch = Vec::with_capacity(bs);
        for _ in 0..bs {
            if cursor >= order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(order[cursor]);
            cursor += 1;
        }
        let inv = 1.0 / bs as f64;
        for &idx in &batch {
            let z = pool_eval_point(spec, pool, idx);
            accumulate_loss_grad(spec, &params, &z, inv, &mut grad);
        }
        if cfg.weight_decay > 0.0 {
            for (g, t) in grad.iter_mut().zip(&params.theta) {
                *g += cfg.weight_decay * t;
            }
        }
        let mut finite = true;
        for (t, g) in params.theta.iter_mut().zip(&grad) {
            *t -= cfg.learning_rate * g;
            finite &= t.is_finite();
        }
        if !finite {
            return Err(Error::Divergence { step });
        }
    }
    Ok(params)
}

/// Mean training loss of `params` over the selected pool examples.
pub fn subset_loss(
    spec: &PredictorSpec,
    params: &ModelParams,
    subset: &SubsetMask,
    pool: &CandidatePool,
) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for idx in subset.iter_ones() {
        total += loss(spec, params, &pool_eval_point(spec, pool, idx));
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

// Keeps the minibatch RNG stream distinct from the init stream.
const MINIBATCH_SALT: u64 = 0x00b4_7c4a_11ed_2bb1;

/// Persist parameters: 8-byte little-endian count then N little-endian
/// f32 values, with `predictor_id` and `seed` in a JSON sidecar.
pub fn save_params(params: &ModelParams, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(&(params.theta.len() as u64).to_le_bytes())?;
    for &v in &params.theta {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    drop(w);
    let sidecar = serde_json::json!({ "predictor_id": params.predictor_id, "seed": params.seed });
    std::fs::write(path.with_extension("json"), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<ModelParams> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut len_buf = [0u8; 8];
    r.read_exact(&mut len_buf)?;
    let n = u64::from_le_bytes(len_buf) as usize;
    let mut theta = Vec::with_capacity(n);
    let mut buf = [0u8; 4];
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        theta.push(f32::from_le_bytes(buf) as f64);
    }
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path.with_extension("json"))?)?;
    Ok(ModelParams {
        theta,
        predictor_id: sidecar["predictor_id"].as_str().unwrap_or_default().to_string(),
        seed: sidecar["seed"].as_u64().unwrap_or_default(),
    })
}
