//! Comparison selectors: Random, DSIR (hashed n-gram importance
//! resampling), Classifier (quality score with Lomax-threshold
//! acceptance), and SemDeDup (cluster-based semantic deduplication).

use std::io::{Read as IoRead, Write as IoWrite};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CandidatePool, TokenId};
use crate::datamodel_oracle::SubsetMask;
use crate::predictors::{self, EvalPoint, PredictorSpec, TrainConfig, Triplet};
use crate::selection::SelectionResult;
use crate::{Error, Result};

/// Deterministic token n-gram hasher into a fixed bucket count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashedNgramFeaturizer {
    /// Max n-gram order (orders 1..=n_max are counted).
    pub n_max: usize,
    pub buckets: usize,
    pub hash_seed: u64,
}

impl Default for HashedNgramFeaturizer {
    fn default() -> Self {
        Self { n_max: 2, buckets: 4096, hash_seed: 0 }
    }
}

impl HashedNgramFeaturizer {
    fn bucket(&self, ngram: &[TokenId]) -> usize {
        // FNV-1a, seeded; stable across platforms and releases.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ self.hash_seed;
        for &tok in ngram {
            for byte in tok.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x1000_0000_01b3);
            }
        }
        (h % self.buckets as u64) as usize
    }
}

/// Sparse hashed n-gram counts of one token sequence.
pub fn featurize(tokens: &[TokenId], f: &HashedNgramFeaturizer) -> Vec<(usize, f64)> {
    let mut counts = std::collections::BTreeMap::<usize, f64>::new();
    for order in 1..=f.n_max {
        if tokens.len() < order {
            break;
        }
        for gram in tokens.windows(order) {
            *counts.entry(f.bucket(gram)).or_insert(0.0) += 1.0;
        }
    }
    counts.into_iter().collect()
}

fn featurize_dense(tokens: &[TokenId], f: &HashedNgramFeaturizer) -> Vec<f64> {
    let mut v = vec![0.0; f.buckets];
    for (b, c) in featurize(tokens, f) {
        v[b] = c;
    }
    v
}

/// Normalized bucket distribution of a document set (bag-of-words over
/// hashed n-grams).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramDistribution {
    pub gamma: Vec<f64>,
    pub smoothing_alpha: f64,
}

/// Aggregate bucket counts over `docs`, add-alpha smooth, and normalize.
pub fn fit_ngram_distribution(
    docs: &[Vec<TokenId>],
    f: &HashedNgramFeaturizer,
    smoothing_alpha: f64,
) -> Result<NgramDistribution> {
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut gamma = vec![smoothing_alpha; f.buckets];
    for doc in docs {
        for (b, c) in featurize(doc, f) {
            gamma[b] += c;
        }
    }
    let total: f64 = gamma.iter().sum();
    if total <= 0.0 {
        return Err(Error::UnsmoothedZero);
    }
    gamma.iter_mut().for_each(|g| *g /= total);
    Ok(NgramDistribution { gamma, smoothing_alpha })
}

impl NgramDistribution {
    /// Bag-of-words log-likelihood of a document with sparse counts `c`.
    pub fn log_likelihood(&self, counts: &[(usize, f64)]) -> Result<f64> {
        let mut ll = 0.0;
        for &(b, c) in counts {
            let g = self.gamma[b];
            if g <= 0.0 {
                return Err(Error::UnsmoothedZero);
            }
            ll += c * g.ln();
        }
        Ok(ll)
    }
}

/// DSIR importance log-weights `log(p_hat(c) / q_hat(c))` for every pool
/// example.
pub fn dsir_log_weights(
    pool: &CandidatePool,
    p_hat: &NgramDistribution,
    q_hat: &NgramDistribution,
    f: &HashedNgramFeaturizer,
) -> Result<Vec<f64>> {
    if p_hat.gamma.len() != q_hat.gamma.len() {
        return Err(Error::LengthMismatch { left: p_hat.gamma.len(), right: q_hat.gamma.len() });
    }
    pool.examples
        .iter()
        .map(|ex| {
            let c = featurize(&ex.tokens, f);
            Ok(p_hat.log_likelihood(&c)? - q_hat.log_likelihood(&c)?)
        })
        .collect()
}

/// Gumbel-top-k sampling without replacement: take the k largest
/// `log_weight + Gumbel` keys. Distributionally equivalent to sequential
/// categorical sampling without replacement.
pub fn sample_without_replacement(
    log_weights: &[f64],
    k: usize,
    seed: u64,
    method: &str,
    target: &str,
) -> Result<SelectionResult> {
    let n = log_weights.len();
    if k > n {
        return Err(Error::SelectionSizeOutOfRange { k, pool: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keyed: Vec<(usize, f64, f64)> = log_weights
        .iter()
        .enumerate()
        .map(|(i, &lw)| {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let gumbel = -(-u.ln()).ln();
            (i, lw, lw + gumbel)
        })
        .collect();
    keyed.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)));
    let picks: Vec<(usize, f64)> = keyed[..k].iter().map(|&(i, lw, _)| (i, lw)).collect();
    Ok(SelectionResult::new(method, target, picks))
}

/// DSIR end to end: fit target and pool-holdout n-gram distributions, form
/// importance log-weights, and Gumbel-top-k sample the selection.
#[allow(clippy::too_many_arguments)]
pub fn dsir_select(
    pool: &CandidatePool,
    pool_holdout_docs: &[Vec<TokenId>],
    target_docs: &[Vec<TokenId>],
    f: &HashedNgramFeaturizer,
    smoothing_alpha: f64,
    k: usize,
    seed: u64,
    target: &str,
) -> Result<SelectionResult> {
    let p_hat = fit_ngram_distribution(target_docs, f, smoothing_alpha)?;
    let q_hat = fit_ngram_distribution(pool_holdout_docs, f, smoothing_alpha)?;
    let log_w = dsir_log_weights(pool, &p_hat, &q_hat, f)?;
    sample_without_replacement(&log_w, k, seed, "dsir", target)
}

/// Lomax (shifted Pareto) sampler with scale fixed at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LomaxSampler {
    pub alpha: f64,
    pub seed: u64,
}

impl LomaxSampler {
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.gen_range(0.0..1.0);
        (1.0 - u).powf(-1.0 / self.alpha) - 1.0
    }

    /// `P(eps > x) = (1 + x)^(-alpha)` for x >= 0.
    pub fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            1.0
        } else {
            (1.0 + x).powf(-self.alpha)
        }
    }
}

/// Closed-form MLE for the Lomax shape with scale 1, fit on the residuals
/// `1 - score`.
pub fn fit_lomax_alpha(scores: &[f64]) -> Result<f64> {
    if scores.len() < 10 {
        return Err(Error::InvalidConfig("need at least 10 scores".into()));
    }
    if scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::InvalidConfig("scores must lie in [0,1]".into()));
    }
    let denom: f64 = scores.iter().map(|s| (1.0 + (1.0 - s)).ln()).sum();
    if denom <= 0.0 {
        return Err(Error::ZeroResiduals);
    }
    Ok(scores.len() as f64 / denom)
}

/// Quality-classifier selection: train target-vs-holdout logistic
/// regression on hashed n-gram features, score the pool, and accept each
/// example where a fresh Lomax draw exceeds `1 - score`. With `k_cap`, the
/// highest-scoring accepted examples are kept (topped up from the highest
/// scoring rejected examples when fewer than `k_cap` are accepted, so the
/// selection size is exact).
#[allow(clippy::too_many_arguments)]
pub fn classifier_select(
    pool: &CandidatePool,
    pool_holdout_docs: &[Vec<TokenId>],
    target_docs: &[Vec<TokenId>],
    f: &HashedNgramFeaturizer,
    alpha: f64,
    k_cap: Option<usize>,
    seed: u64,
    train_cfg: &TrainConfig,
    target: &str,
) -> Result<SelectionResult> {
    if pool_holdout_docs.is_empty() || target_docs.is_empty() {
        return Err(Error::NoSamples);
    }
    let mut features = Vec::with_capacity(pool_holdout_docs.len() + target_docs.len());
    for doc in target_docs {
        features.push(Triplet { x: featurize_dense(doc, f), bias: 0.0, y: 1.0 });
    }
    for doc in pool_holdout_docs {
        features.push(Triplet { x: featurize_dense(doc, f), bias: 0.0, y: -1.0 });
    }
    let n_train = features.len();
    let spec = PredictorSpec::GeneralizedLogistic { input_dim: f.buckets, features };
    let train_pool = CandidatePool {
        examples: (0..n_train)
            .map(|i| crate::corpus::Example { id: i, tokens: vec![0, 0], text: None })
            .collect(),
        chunk_len: 2,
        vocab_size: 1,
    };
    let params = predictors::train(&spec, &SubsetMask::full(n_train), &train_pool, train_cfg)?;

    let scores: Vec<f64> = pool
        .examples
        .iter()
        .map(|ex| {
            let t = Triplet { x: featurize_dense(&ex.tokens, f), bias: 0.0, y: 1.0 };
            let margin = predictors::output(&spec, &params, &EvalPoint::Logistic(&t));
            1.0 / (1.0 + (-margin).exp())
        })
        .collect();

    let sampler = LomaxSampler { alpha, seed };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let accepted: Vec<bool> =
        scores.iter().map(|&s| sampler.sample(&mut rng) > 1.0 - s).collect();

    let picks: Vec<(usize, f64)> = match k_cap {
        None => scores
            .iter()
            .enumerate()
            .filter(|&(i, _)| accepted[i])
            .map(|(i, &s)| (i, s))
            .collect(),
        Some(k) => {
            if k > pool.len() {
                return Err(Error::SelectionSizeOutOfRange { k, pool: pool.len() });
            }
            let mut order: Vec<usize> = (0..pool.len()).collect();
            // Accepted first, then by descending score, then by index.
            order.sort_by(|&a, &b| {
                accepted[b]
                    .cmp(&accepted[a])
                    .then(scores[b].partial_cmp(&scores[a]).unwrap())
                    .then(a.cmp(&b))
            });
            order[..k].iter().map(|&i| (i, scores[i])).collect()
        }
    };
    Ok(SelectionResult::new("classifier", target, picks))
}

/// Seeded k-means with k-means++ init and a fixed 25 iterations; within
/// each cluster keeps the `round(keep_fraction * cluster size)` examples
/// with the lowest cosine similarity to the centroid (index tie-break).
pub fn semdedup_select(
    embeddings: &Array2<f64>,
    n_clusters: usize,
    keep_fraction: f64,
    seed: u64,
    target: &str,
) -> Result<SelectionResult> {
    let n = embeddings.nrows();
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::InvalidConfig("keep_fraction must be in (0,1]".into()));
    }
    if n_clusters == 0 || n_clusters > n {
        return Err(Error::InvalidConfig("n_clusters must be in 1..=pool size".into()));
    }
    let norms: Vec<f64> = (0..n)
        .map(|i| embeddings.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if let Some(id) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroNormEmbedding { id });
    }
    let assignment = kmeans(embeddings, n_clusters, seed, 25);

    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); n_clusters];
    for (i, &c) in assignment.iter().enumerate() {
        clusters[c].push(i);
    }
    let mut picks = Vec::new();
    for members in clusters.iter().filter(|m| !m.is_empty()) {
        let mut centroid = Array1::<f64>::zeros(embeddings.ncols());
        for &i in members {
            centroid += &embeddings.row(i);
        }
        centroid /= members.len() as f64;
        let cnorm = centroid.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut sims: Vec<(usize, f64)> = members
            .iter()
            .map(|&i| {
                let sim = if cnorm == 0.0 {
                    0.0
                } else {
                    embeddings.row(i).dot(&centroid) / (norms[i] * cnorm)
                };
                (i, sim)
            })
            .collect();
        // Ascending similarity, index tie-break: least-similar survive.
        sims.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        let keep = (keep_fraction * members.len() as f64).round() as usize;
        let keep = keep.min(members.len());
        picks.extend(sims[..keep].iter().map(|&(i, s)| (i, s)));
    }
    Ok(SelectionResult::new("semdedup", target, picks))
}

fn kmeans(data: &Array2<f64>, k: usize, seed: u64, iterations: usize) -> Vec<usize> {
    let n = data.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding.
    let mut centers: Vec<Array1<f64>> = Vec::with_capacity(k);
    centers.push(data.row(rng.gen_range(0..n)).to_owned());
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), centers[0].view())).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.gen_range(0..n)
        } else {
            let mut draw = rng.gen_range(0.0..total);
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if draw < w {
                    idx = i;
                    break;
                }
                draw -= w;
            }
            idx
        };
        centers.push(data.row(next).to_owned());
        for i in 0..n {
            d2[i] = d2[i].min(sq_dist(data.row(i), centers.last().unwrap().view()));
        }
    }

    let mut assignment = vec![0usize; n];
    for _ in 0..iterations {
        for i in 0..n {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(data.row(i), center.view());
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            assignment[i] = best;
        }
        let mut sums = vec![Array1::<f64>::zeros(data.ncols()); k];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            sums[assignment[i]] += &data.row(i);
            counts[assignment[i]] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = &sums[c] / counts[c] as f64;
            }
        }
    }
    assignment
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Uniform subset without replacement.
pub fn random_select(
    pool_size: usize,
    k: usize,
    seed: u64,
    target: &str,
) -> Result<SelectionResult> {
    if k > pool_size {
        return Err(Error::SelectionSizeOutOfRange { k, pool: pool_size });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, pool_size, k).into_vec();
    Ok(SelectionResult::new("random", target, picked.into_iter().map(|i| (i, 0.0)).collect()))
}

/// Embedding matrix file: header {n u64, e u64} then row-major
/// little-endian f32 entries.
pub fn save_embeddings(embeddings: &Array2<f64>, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(&(embeddings.nrows() as u64).to_le_bytes())?;
    w.write_all(&(embeddings.ncols() as u64).to_le_bytes())?;
    for &v in embeddings.iter() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn load_embeddings(path: &Path) -> Result<Array2<f64>> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let e = u64::from_le_bytes(b8) as usize;
    let mut out = Array2::<f64>::zeros((n, e));
    let mut b4 = [0u8; 4];
    for i in 0..n {
        for j in 0..e {
            r.read_exact(&mut b4)?;
            out[(i, j)] = f32::from_le_bytes(b4) as f64;
        }
    }
    Ok(out)
}
