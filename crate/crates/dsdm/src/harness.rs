//! End-to-end experiment runner: build a synthetic or file-backed pool,
//! run every configured selection method at every size k, train the
//! deployment predictor on each selection, evaluate on a held-out target
//! split, and emit machine-readable results plus a run manifest.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, HashedNgramFeaturizer};
use crate::corpus::{self, CandidatePool, TargetSample, TargetTask, TokenId};
use crate::datamodel_oracle::SubsetMask;
use crate::eval;
use crate::predictors::{self, PredictorSpec, TargetExample, TrainConfig};
use crate::selection::{self, SelectionResult};
use crate::trak::{self, Projection, TrakConfig};
use crate::{Error, Result};

/// Synthetic stand-in for a web-scale pool: token-block subpopulations
/// plus uniform noise examples, with target samples drawn from designated
/// subpopulations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPoolSpec {
    pub n_subpopulations: usize,
    pub examples_per_subpopulation: usize,
    /// Subpopulation ids the target task is drawn from.
    pub target_subpopulations: Vec<usize>,
    pub noise_examples: usize,
    pub vocab_size: usize,
    pub chunk_len: usize,
    /// Samples in the selection-facing target split.
    pub target_samples: usize,
    /// Samples in the held-out evaluation split (disjoint from the above).
    pub holdout_samples: usize,
    pub context_len: usize,
    pub continuation_len: usize,
    pub seed: u64,
}

impl Default for SyntheticPoolSpec {
    fn default() -> Self {
        Self {
            n_subpopulations: 2,
            examples_per_subpopulation: 50,
            target_subpopulations: vec![0],
            noise_examples: 100,
            vocab_size: 32,
            chunk_len: 16,
            target_samples: 16,
            holdout_samples: 16,
            context_len: 8,
            continuation_len: 4,
            seed: 0,
        }
    }
}

impl SyntheticPoolSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_subpopulations == 0
            || self.examples_per_subpopulation == 0
            || self.vocab_size < 2
            || self.chunk_len < 2
            || self.target_samples == 0
            || self.holdout_samples == 0
            || self.context_len == 0
            || self.continuation_len == 0
        {
            return Err(Error::InvalidConfig("synthetic pool counts must be positive".into()));
        }
        if self.target_subpopulations.iter().any(|&s| s >= self.n_subpopulations) {
            return Err(Error::InvalidConfig("target subpopulation id out of range".into()));
        }
        if self.vocab_size < self.n_subpopulations + 1 {
            return Err(Error::InvalidConfig("vocab too small for subpopulation blocks".into()));
        }
        Ok(())
    }

    fn block(&self, subpop: usize) -> std::ops::Range<TokenId> {
        let width = (self.vocab_size / (self.n_subpopulations + 1)).max(1) as TokenId;
        let start = subpop as TokenId * width;
        start..start + width
    }
}

fn block_sequence(
    block: std::ops::Range<TokenId>,
    len: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<TokenId> {
    (0..len).map(|_| rng.gen_range(block.clone())).collect()
}

/// Generate the pool and two disjoint target splits. Pool order is
/// subpopulation blocks first (in id order) then noise examples.
pub fn make_synthetic_pool(
    spec: &SyntheticPoolSpec,
) -> Result<(CandidatePool, TargetTask, TargetTask)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut examples = Vec::new();
    for s in 0..spec.n_subpopulations {
        for _ in 0..spec.examples_per_subpopulation {
            examples.push(block_sequence(spec.block(s), spec.chunk_len, &mut rng));
        }
    }
    for _ in 0..spec.noise_examples {
        examples.push(block_sequence(0..spec.vocab_size as TokenId, spec.chunk_len, &mut rng));
    }
    let pool = CandidatePool {
        examples: examples
            .into_iter()
            .enumerate()
            .map(|(id, tokens)| corpus::Example { id, tokens, text: None })
            .collect(),
        chunk_len: spec.chunk_len,
        vocab_size: spec.vocab_size,
    };
    pool.validate()?;

    let mut make_split = |count: usize| -> Vec<TargetSample> {
        (0..count)
            .map(|i| {
                let subpop =
                    spec.target_subpopulations[i % spec.target_subpopulations.len()];
                let block = spec.block(subpop);
                TargetSample {
                    context: block_sequence(block.clone(), spec.context_len, &mut rng),
                    continuation: block_sequence(block, spec.continuation_len, &mut rng),
                    context_text: None,
                    continuation_text: None,
                }
            })
            .collect()
    };
    let target = TargetTask::new("target", make_split(spec.target_samples));
    let holdout = TargetTask::new("holdout", make_split(spec.holdout_samples));
    Ok((pool, target, holdout))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PoolSource {
    Synthetic { spec: SyntheticPoolSpec },
    Files { pool: PathBuf, target: PathBuf, holdout: PathBuf },
}

/// Selection method grid entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum MethodConfig {
    Dsdm {
        #[serde(default = "default_num_models")]
        num_models: usize,
        #[serde(default = "default_projection_dim")]
        projection_dim: usize,
        #[serde(default = "default_subset_fraction")]
        subset_fraction: f64,
    },
    Random {},
    Dsir {
        #[serde(default = "default_n_max")]
        n_max: usize,
        #[serde(default = "default_buckets")]
        buckets: usize,
        #[serde(default = "default_smoothing")]
        smoothing_alpha: f64,
    },
    Classifier {
        #[serde(default = "default_n_max")]
        n_max: usize,
        #[serde(default = "default_buckets")]
        buckets: usize,
        #[serde(default = "default_lomax_alpha")]
        alpha: f64,
    },
    Semdedup {
        #[serde(default = "default_n_clusters")]
        n_clusters: usize,
    },
}

fn default_num_models() -> usize {
    4
}
fn default_projection_dim() -> usize {
    256
}
fn default_subset_fraction() -> f64 {
    0.38
}
fn default_n_max() -> usize {
    2
}
fn default_buckets() -> usize {
    512
}
fn default_smoothing() -> f64 {
    0.01
}
fn default_lomax_alpha() -> f64 {
    12.0
}
fn default_n_clusters() -> usize {
    8
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::Dsdm { .. } => "dsdm",
            MethodConfig::Random {} => "random",
            MethodConfig::Dsir { .. } => "dsir",
            MethodConfig::Classifier { .. } => "classifier",
            MethodConfig::Semdedup { .. } => "semdedup",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub hidden_dim: usize,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EpochMode {
    Fixed { epochs: usize },
    /// `epochs = ceil(token_budget / (k * chunk_len))`; the default budget
    /// is twice the pool's token count.
    EqualTotalTokens { token_budget: Option<u64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub pool: PoolSource,
    pub methods: Vec<MethodConfig>,
    pub ks: Vec<usize>,
    pub proxy: PredictorConfig,
    pub deployment: PredictorConfig,
    pub epochs: EpochMode,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.ks.is_empty() {
            return Err(Error::InvalidConfig("need at least one method and one k".into()));
        }
        self.proxy.train.validate()?;
        self.deployment.train.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub k: usize,
    pub metric: String,
    pub value: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ResultRow>,
    pub output_dir: PathBuf,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

fn load_source(source: &PoolSource) -> Result<(CandidatePool, TargetTask, TargetTask)> {
    match source {
        PoolSource::Synthetic { spec } => make_synthetic_pool(spec),
        PoolSource::Files { pool, target, holdout } => Ok((
            corpus::load_pool(pool)?,
            corpus::load_task("target", target)?,
            corpus::load_task("holdout", holdout)?,
        )),
    }
}

fn lm_spec(pool: &CandidatePool, cfg: &PredictorConfig) -> PredictorSpec {
    PredictorSpec::TinySoftmaxLm {
        vocab_size: pool.vocab_size,
        context_len: pool.chunk_len,
        hidden_dim: cfg.hidden_dim,
    }
}

fn task_docs(task: &TargetTask) -> Vec<Vec<TokenId>> {
    task.samples.iter().map(|s| s.full_sequence().0).collect()
}

fn epochs_for(mode: &EpochMode, pool: &CandidatePool, k: usize) -> usize {
    match mode {
        EpochMode::Fixed { epochs } => (*epochs).max(1),
        EpochMode::EqualTotalTokens { token_budget } => {
            let budget = token_budget
                .unwrap_or((2 * pool.len() * pool.chunk_len) as u64)
                .max(1);
            let per_epoch = (k * pool.chunk_len).max(1) as u64;
            budget.div_ceil(per_epoch) as usize
        }
    }
}

/// Run the full (method, k) grid and write `results.csv`, `results.json`,
/// `manifest.json`, and one selection file per cell under `output_dir`.
/// Failures are recorded per cell; other cells proceed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let (pool, target, holdout) = load_source(&cfg.pool)?;
    pool.validate()?;
    target.validate()?;
    holdout.validate()?;

    std::fs::create_dir_all(&cfg.output_dir)?;
    let cells_dir = cfg.output_dir.join("cells");
    std::fs::create_dir_all(&cells_dir)?;

    let proxy_spec = lm_spec(&pool, &cfg.proxy);
    let deployment_spec = lm_spec(&pool, &cfg.deployment);

    // Selection consumes only the target split; the holdout split is used
    // exclusively for evaluation below.
    let mut selections: Vec<(String, usize, Result<SelectionResult>)> = Vec::new();
    for method in &cfg.methods {
        let per_k = run_method(method, cfg, &pool, &target, &proxy_spec);
        for (k, sel) in cfg.ks.iter().copied().zip(per_k) {
            selections.push((method.name().to_string(), k, sel));
        }
    }

    let mut rows = Vec::new();
    for (method, k, sel) in &selections {
        let cell_dir = cells_dir.join(format!("{method}_{k}"));
        std::fs::create_dir_all(&cell_dir)?;
        match sel {
            Err(e) => {
                rows.push(ResultRow {
                    method: method.clone(),
                    k: *k,
                    metric: "error".into(),
                    value: f64::NAN,
                    n: 0,
                    error: Some(e.to_string()),
                });
            }
            Ok(sel) => {
                std::fs::write(cell_dir.join("selection.json"), serde_json::to_string_pretty(sel)?)?;
                match evaluate_cell(cfg, &pool, &holdout, &deployment_spec, sel, *k) {
                    Ok(cell_rows) => rows.extend(cell_rows),
                    Err(e) => rows.push(ResultRow {
                        method: method.clone(),
                        k: *k,
                        metric: "error".into(),
                        value: f64::NAN,
                        n: 0,
                        error: Some(e.to_string()),
                    }),
                }
            }
        }
    }

    write_results(&cfg.output_dir, &rows)?;
    write_manifest(cfg, &pool, &target, &holdout, &rows)?;
    Ok(ExperimentReport { rows, output_dir: cfg.output_dir.clone() })
}

fn evaluate_cell(
    cfg: &ExperimentConfig,
    pool: &CandidatePool,
    holdout: &TargetTask,
    deployment_spec: &PredictorSpec,
    sel: &SelectionResult,
    k: usize,
) -> Result<Vec<ResultRow>> {
    let mask = sel.mask(pool.len());
    let epochs = epochs_for(&cfg.epochs, pool, k);
    let mut train_cfg = cfg.deployment.train.clone();
    let batches_per_epoch = k.div_ceil(train_cfg.batch_size.max(1)).max(1);
    train_cfg.steps = (epochs * batches_per_epoch).max(1);
    train_cfg.seed = cfg
        .seed
        .wrapping_add(fnv1a(format!("deploy:{}:{}", sel.method, k).as_bytes()));
    let params = predictors::train(deployment_spec, &mask, pool, &train_cfg)?;

    let logprob = eval::mean_log_probability(deployment_spec, &params, holdout, false)?;
    let exact = eval::exact_match_accuracy(deployment_spec, &params, holdout, false)?;
    Ok(vec![
        ResultRow {
            method: sel.method.clone(),
            k,
            metric: "mean_log_prob".into(),
            value: logprob.value,
            n: logprob.n,
            error: None,
        },
        ResultRow {
            method: sel.method.clone(),
            k,
            metric: "exact_match".into(),
            value: exact.value,
            n: exact.n,
            error: None,
        },
    ])
}

fn run_method(
    method: &MethodConfig,
    cfg: &ExperimentConfig,
    pool: &CandidatePool,
    target: &TargetTask,
    proxy_spec: &PredictorSpec,
) -> Vec<Result<SelectionResult>> {
    match method {
        MethodConfig::Random {} => cfg
            .ks
            .iter()
            .map(|&k| {
                baselines::random_select(
                    pool.len(),
                    k,
                    cfg.seed.wrapping_add(fnv1a(format!("random:{k}").as_bytes())),
                    &target.name,
                )
            })
            .collect(),
        MethodConfig::Dsdm { num_models, projection_dim, subset_fraction } => {
            let trak_cfg = TrakConfig {
                num_models: *num_models,
                projection_dim: *projection_dim,
                subset_fraction: *subset_fraction,
                ridge: None,
                seed: cfg.seed.wrapping_add(fnv1a(b"trak")),
                train: cfg.proxy.train.clone(),
            };
            let mean = dsdm_mean_datamodel(pool, target, proxy_spec, &trak_cfg);
            cfg.ks
                .iter()
                .map(|&k| {
                    mean.as_ref()
                        .map_err(|e| Error::InvalidConfig(e.to_string()))
                        .and_then(|m| selection::dsdm_select(m, k, &target.name))
                })
                .collect()
        }
        MethodConfig::Dsir { n_max, buckets, smoothing_alpha } => {
            let f = HashedNgramFeaturizer { n_max: *n_max, buckets: *buckets, hash_seed: cfg.seed };
            let target_docs = task_docs(target);
            let pool_docs: Vec<Vec<TokenId>> =
                pool.examples.iter().map(|e| e.tokens.clone()).collect();
            cfg.ks
                .iter()
                .map(|&k| {
                    baselines::dsir_select(
                        pool,
                        &pool_docs,
                        &target_docs,
                        &f,
                        *smoothing_alpha,
                        k,
                        cfg.seed.wrapping_add(fnv1a(format!("dsir:{k}").as_bytes())),
                        &target.name,
                    )
                })
                .collect()
        }
        MethodConfig::Classifier { n_max, buckets, alpha } => {
            let f = HashedNgramFeaturizer { n_max: *n_max, buckets: *buckets, hash_seed: cfg.seed };
            let target_docs = task_docs(target);
            let pool_docs: Vec<Vec<TokenId>> =
                pool.examples.iter().map(|e| e.tokens.clone()).collect();
            let train_cfg = TrainConfig {
                steps: 300,
                batch_size: 16,
                learning_rate: 0.05,
                weight_decay: 1e-4,
                seed: cfg.seed,
                subset_fraction: 1.0,
            };
            cfg.ks
                .iter()
                .map(|&k| {
                    baselines::classifier_select(
                        pool,
                        &pool_docs,
                        &target_docs,
                        &f,
                        *alpha,
                        Some(k),
                        cfg.seed.wrapping_add(fnv1a(format!("classifier:{k}").as_bytes())),
                        &train_cfg,
                        &target.name,
                    )
                })
                .collect()
        }
        MethodConfig::Semdedup { n_clusters } => {
            let embeddings = semdedup_embeddings(cfg, pool, proxy_spec);
            cfg.ks
                .iter()
                .map(|&k| {
                    let emb = embeddings
                        .as_ref()
                        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
                    semdedup_exact_k(emb, *n_clusters, k, cfg, &target.name)
                })
                .collect()
        }
    }
}

/// The full proxy-side DsDm pipeline: train TRAK reference models on the
/// pool, project per-example gradients, score every target sample, and
/// average the resulting datamodels.
pub fn dsdm_mean_datamodel(
    pool: &CandidatePool,
    target: &TargetTask,
    proxy_spec: &PredictorSpec,
    trak_cfg: &TrakConfig,
) -> Result<selection::MeanDatamodel> {
    let models = trak::train_reference_models(proxy_spec, pool, trak_cfg)?;
    let stores: Vec<trak::GradientStore> = models
        .iter()
        .enumerate()
        .map(|(kk, m)| {
            trak::project_gradients(
                proxy_spec,
                m,
                pool,
                trak_cfg.projection_dim,
                Projection::Gaussian { seed: trak_cfg.seed.wrapping_add(1000 + kk as u64) },
                kk,
            )
        })
        .collect::<Result<_>>()?;
    let scorer = trak::TrakScorer::new(proxy_spec, &models, &stores, trak_cfg.ridge)?;
    let dms: Vec<_> = target
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| scorer.score(&TargetExample::from_sample(s), format!("{}:{i}", target.name)))
        .collect::<Result<_>>()?;
    selection::average_datamodels(&dms)
}

fn semdedup_embeddings(
    cfg: &ExperimentConfig,
    pool: &CandidatePool,
    proxy_spec: &PredictorSpec,
) -> Result<Array2<f64>> {
    let mut train_cfg = cfg.proxy.train.clone();
    train_cfg.seed = cfg.seed.wrapping_add(fnv1a(b"embed"));
    let params = predictors::train(proxy_spec, &SubsetMask::full(pool.len()), pool, &train_cfg)?;
    let hidden = match proxy_spec {
        PredictorSpec::TinySoftmaxLm { hidden_dim, .. } => *hidden_dim,
        _ => return Err(Error::InvalidConfig("semdedup needs the LM proxy".into())),
    };
    let mut emb = Array2::<f64>::zeros((pool.len(), hidden));
    for (i, ex) in pool.examples.iter().enumerate() {
        let h = predictors::hidden_state(proxy_spec, &params, &ex.tokens);
        for (j, v) in h.into_iter().enumerate() {
            emb[(i, j)] = v;
        }
    }
    Ok(emb)
}

/// SemDeDup with the keep-fraction implied by k, then deterministically
/// trimmed or topped up (by centroid similarity, then index) so the cell
/// has exactly k examples.
fn semdedup_exact_k(
    embeddings: &Array2<f64>,
    n_clusters: usize,
    k: usize,
    cfg: &ExperimentConfig,
    target: &str,
) -> Result<SelectionResult> {
    let n = embeddings.nrows();
    if k > n {
        return Err(Error::SelectionSizeOutOfRange { k, pool: n });
    }
    let keep_fraction = (k as f64 / n as f64).clamp(f64::MIN_POSITIVE, 1.0);
    let sel = baselines::semdedup_select(
        embeddings,
        n_clusters.min(n),
        keep_fraction,
        cfg.seed.wrapping_add(fnv1a(b"semdedup")),
        target,
    )?;
    let mut picks: Vec<(usize, f64)> =
        sel.indices.iter().copied().zip(sel.scores.iter().copied()).collect();
    if picks.len() > k {
        // Drop the most centroid-similar extras first.
        picks.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        picks.truncate(k);
    } else if picks.len() < k {
        let chosen: std::collections::BTreeSet<usize> =
            picks.iter().map(|&(i, _)| i).collect();
        for i in 0..n {
            if picks.len() == k {
                break;
            }
            if !chosen.contains(&i) {
                picks.push((i, f64::NAN));
            }
        }
        // NaN scores mark top-up examples outside the dedup keep set.
        for p in picks.iter_mut().filter(|p| p.1.is_nan()) {
            p.1 = 1.0;
        }
    }
    Ok(SelectionResult::new("semdedup", target, picks))
}

fn write_results(dir: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("results.csv"))
        .map_err(|e| Error::BadFormat(e.to_string()))?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::BadFormat(e.to_string()))?;
    }
    w.flush()?;
    std::fs::write(dir.join("results.json"), serde_json::to_string_pretty(rows)?)?;
    Ok(())
}

fn write_manifest(
    cfg: &ExperimentConfig,
    pool: &CandidatePool,
    target: &TargetTask,
    holdout: &TargetTask,
    rows: &[ResultRow],
) -> Result<()> {
    let config_json = serde_json::to_string(cfg)?;
    let manifest = serde_json::json!({
        "config": serde_json::from_str::<serde_json::Value>(&config_json)?,
        "config_hash": format!("{:016x}", fnv1a(config_json.as_bytes())),
        "pool_size": pool.len(),
        "chunk_len": pool.chunk_len,
        "vocab_size": pool.vocab_size,
        "target_samples": target.samples.len(),
        "holdout_samples": holdout.samples.len(),
        "target_subpopulations": match &cfg.pool {
            PoolSource::Synthetic { spec } => serde_json::json!(spec.target_subpopulations),
            PoolSource::Files { .. } => serde_json::Value::Null,
        },
        "data_flow": {
            "selection_inputs": ["pool", "target"],
            "evaluation_inputs": ["holdout"],
        },
        "n_result_rows": rows.len(),
    });
    std::fs::write(
        cfg.output_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}
