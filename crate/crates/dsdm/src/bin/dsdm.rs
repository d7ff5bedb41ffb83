//! Thin command-line front end over the dsdm library. Every subcommand is
//! a direct wrapper around one library entry point; all logic lives in the
//! crate itself.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;

use dsdm::baselines::{self, HashedNgramFeaturizer};
use dsdm::corpus::{self, TokenId};
use dsdm::datamodel_oracle::{
    self, Datamodel, Measurement, RegressionRecord, SubsetMask,
};
use dsdm::eval;
use dsdm::harness::{self, ExperimentConfig, SyntheticPoolSpec};
use dsdm::predictors::{self, PredictorSpec, TargetExample, TrainConfig, Triplet};
use dsdm::selection::{self, SelectionResult};
use dsdm::trak::{self, Projection, TrakConfig};
use dsdm::{Error, Result};

#[derive(Parser)]
#[command(name = "dsdm", about = "Dataset selection with datamodels", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Candidate pool construction.
    Pool {
        #[command(subcommand)]
        command: PoolCommand,
    },
    /// Datamodel estimation.
    Datamodel {
        #[command(subcommand)]
        command: DatamodelCommand,
    },
    /// Training-subset selection.
    Select {
        #[command(subcommand)]
        command: SelectCommand,
    },
    /// Evaluate a predictor on a target task.
    Eval(EvalArgs),
    /// Full (method, k) experiment grid.
    Experiment {
        #[command(subcommand)]
        command: ExperimentCommand,
    },
    /// Target-to-pool contamination checks.
    Leakage {
        #[command(subcommand)]
        command: LeakageCommand,
    },
    /// Linear datamodeling score on fresh masks.
    Lds(LdsArgs),
}

#[derive(Subcommand)]
enum PoolCommand {
    /// Chunk tokenized documents into fixed-length pool examples.
    Build {
        /// JSONL of {"tokens": [...]} documents.
        #[arg(long)]
        docs: PathBuf,
        #[arg(long)]
        chunk_len: usize,
        #[arg(long)]
        eot: TokenId,
        #[arg(long)]
        vocab_size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate the planted-subpopulation synthetic pool.
    Synth {
        /// JSON file matching SyntheticPoolSpec; defaults apply if omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a config field, e.g. --set seed=7 or --set chunk_len=32.
        #[arg(long = "set", value_name = "PATH=VALUE")]
        set: Vec<String>,
        /// Writes pool.jsonl, target.jsonl, holdout.jsonl here.
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    weight_decay: f64,
}

impl TrainArgs {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            steps: self.steps,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            seed,
            subset_fraction: 1.0,
        }
    }
}

#[derive(Subcommand)]
enum DatamodelCommand {
    /// Ground-truth datamodels by repeated subset training + regression.
    Regress {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        task: PathBuf,
        #[arg(long, default_value_t = 500)]
        masks: usize,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 1e-4)]
        ridge: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        hidden_dim: usize,
        #[command(flatten)]
        train: TrainArgs,
        /// Writes dm_<i>.json and records_<i>.jsonl per target sample.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// TRAK estimator datamodels.
    Trak {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        task: PathBuf,
        #[arg(long, default_value_t = 4)]
        num_models: usize,
        #[arg(long, default_value_t = 512)]
        projection_dim: usize,
        #[arg(long, default_value_t = 0.38)]
        subset_fraction: f64,
        /// Ridge for the projected gram matrix (default: trace-scaled).
        #[arg(long)]
        ridge: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        hidden_dim: usize,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Exact leave-one-out influence datamodel for a logistic task.
    Influence {
        /// JSON array of {"x": [...], "bias": f, "y": +-1} triplets.
        #[arg(long)]
        features: PathBuf,
        /// Index of the target triplet.
        #[arg(long)]
        target_index: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct FeaturizerArgs {
    #[arg(long, default_value_t = 2)]
    n_max: usize,
    #[arg(long, default_value_t = 4096)]
    buckets: usize,
    #[arg(long, default_value_t = 0)]
    hash_seed: u64,
}

impl FeaturizerArgs {
    fn build(&self) -> HashedNgramFeaturizer {
        HashedNgramFeaturizer {
            n_max: self.n_max,
            buckets: self.buckets,
            hash_seed: self.hash_seed,
        }
    }
}

#[derive(Subcommand)]
enum SelectCommand {
    /// Arg-bot-k of averaged datamodel weights.
    Dsdm {
        /// One or more datamodel JSON files (dm_*.json).
        #[arg(long, required = true, num_args = 1..)]
        datamodels: Vec<PathBuf>,
        #[arg(short)]
        k: usize,
        #[arg(long, default_value = "task")]
        target: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hashed n-gram importance resampling toward the target distribution.
    Dsir {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        task: PathBuf,
        #[command(flatten)]
        featurizer: FeaturizerArgs,
        #[arg(long, default_value_t = 0.01)]
        smoothing_alpha: f64,
        #[arg(short)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Quality-classifier selection with Lomax acceptance.
    Classifier {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        task: PathBuf,
        #[command(flatten)]
        featurizer: FeaturizerArgs,
        #[arg(long, default_value_t = 12.0)]
        alpha: f64,
        #[arg(short)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Semantic deduplication over an embedding matrix.
    Semdedup {
        /// Embedding file as written by the embeddings format.
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, default_value_t = 8)]
        clusters: usize,
        #[arg(long)]
        keep_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "task")]
        target: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Uniform random subset.
    Random {
        #[arg(long)]
        pool: PathBuf,
        #[arg(short)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "task")]
        target: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pool: PathBuf,
    #[arg(long)]
    task: PathBuf,
    #[arg(long, default_value_t = 8)]
    hidden_dim: usize,
    /// Pre-trained parameter file; mutually exclusive with --selection.
    #[arg(long, conflicts_with = "selection")]
    params: Option<PathBuf>,
    /// Train on this selection first, then evaluate.
    #[arg(long)]
    selection: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    train: TrainArgs,
    /// Optionally persist the trained parameters.
    #[arg(long)]
    save_params: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ExperimentCommand {
    Run {
        /// JSON file matching ExperimentConfig.
        #[arg(long)]
        config: PathBuf,
        /// Override a config field, e.g. --set seed=3 or
        /// --set proxy.train.steps=200.
        #[arg(long = "set", value_name = "PATH=VALUE")]
        set: Vec<String>,
    },
}

#[derive(Subcommand)]
enum LeakageCommand {
    Check {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        task: PathBuf,
    },
}

#[derive(Args)]
struct LdsArgs {
    /// Datamodel JSON file.
    #[arg(long)]
    datamodel: PathBuf,
    /// Fresh regression records (JSONL) not used for fitting.
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    pool_size: usize,
}

/// Apply `path=value` overrides to a JSON document. Paths use dots for
/// object fields and numeric segments for array indices; values are parsed
/// as JSON, falling back to a plain string.
fn apply_overrides(doc: &mut serde_json::Value, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (path, raw) = item
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("--set needs PATH=VALUE, got {item:?}")))?;
        let value: serde_json::Value =
            serde_json::from_str(raw).unwrap_or(serde_json::Value::String(raw.to_string()));
        let mut segments: Vec<&str> = path.split('.').collect();
        let leaf = segments.pop().unwrap();
        let pointer: String =
            segments.iter().map(|s| format!("/{s}")).collect();
        let parent = doc
            .pointer_mut(&pointer)
            .ok_or_else(|| Error::InvalidConfig(format!("{path}: no such config path")))?;
        match parent {
            serde_json::Value::Object(obj) => {
                obj.insert(leaf.to_string(), value);
            }
            serde_json::Value::Array(arr) => {
                let idx: usize = leaf
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("{path}: {leaf} is not an index")))?;
                if idx >= arr.len() {
                    return Err(Error::InvalidConfig(format!("{path}: index {idx} out of range")));
                }
                arr[idx] = value;
            }
            _ => return Err(Error::InvalidConfig(format!("{path}: not an object or array"))),
        }
    }
    Ok(())
}

fn load_config<T: serde::de::DeserializeOwned>(
    path: Option<&Path>,
    default: serde_json::Value,
    overrides: &[String],
) -> Result<T> {
    let mut doc = match path {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => default,
    };
    apply_overrides(&mut doc, overrides)?;
    Ok(serde_json::from_value(doc)?)
}

fn lm_spec(pool: &corpus::CandidatePool, hidden_dim: usize) -> PredictorSpec {
    PredictorSpec::TinySoftmaxLm {
        vocab_size: pool.vocab_size,
        context_len: pool.chunk_len,
        hidden_dim,
    }
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Gradient-store cache location: DSDMKIT_CACHE_DIR, else beside the
/// output directory.
fn cache_dir(default_parent: &Path) -> PathBuf {
    std::env::var_os("DSDMKIT_CACHE_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| default_parent.join("cache"))
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pool { command } => run_pool(command),
        Command::Datamodel { command } => run_datamodel(command),
        Command::Select { command } => run_select(command),
        Command::Eval(args) => run_eval(args),
        Command::Experiment { command } => run_experiment(command),
        Command::Leakage { command } => run_leakage(command),
        Command::Lds(args) => run_lds(args),
    }
}

fn run_pool(command: PoolCommand) -> Result<()> {
    match command {
        PoolCommand::Build { docs, chunk_len, eot, vocab_size, out } => {
            #[derive(serde::Deserialize)]
            struct Doc {
                tokens: Vec<TokenId>,
            }
            let mut parsed = Vec::new();
            for line in std::fs::read_to_string(&docs)?.lines() {
                if line.trim().is_empty() {
                    continue;
                }
                let doc: Doc = serde_json::from_str(line)?;
                parsed.push(doc.tokens);
            }
            let pool = corpus::tokenize_and_chunk(&parsed, chunk_len, eot, vocab_size)?;
            corpus::save_pool(&pool, &out)?;
            println!("wrote {} examples to {}", pool.len(), out.display());
            Ok(())
        }
        PoolCommand::Synth { config, set, out_dir } => {
            let default = serde_json::to_value(SyntheticPoolSpec::default())?;
            let spec: SyntheticPoolSpec = load_config(config.as_deref(), default, &set)?;
            let (pool, target, holdout) = harness::make_synthetic_pool(&spec)?;
            std::fs::create_dir_all(&out_dir)?;
            corpus::save_pool(&pool, &out_dir.join("pool.jsonl"))?;
            corpus::save_task(&target, &out_dir.join("target.jsonl"))?;
            corpus::save_task(&holdout, &out_dir.join("holdout.jsonl"))?;
            write_json(&spec, &out_dir.join("spec.json"))?;
            println!(
                "wrote pool ({} examples), target ({}), holdout ({}) to {}",
                pool.len(),
                target.samples.len(),
                holdout.samples.len(),
                out_dir.display()
            );
            Ok(())
        }
    }
}

fn run_datamodel(command: DatamodelCommand) -> Result<()> {
    match command {
        DatamodelCommand::Regress {
            pool,
            task,
            masks,
            alpha,
            ridge,
            seed,
            hidden_dim,
            train,
            out_dir,
        } => {
            let pool = corpus::load_pool(&pool)?;
            let task = corpus::load_task("target", &task)?;
            let spec = lm_spec(&pool, hidden_dim);
            let cfg = train.config(seed);
            let masks = datamodel_oracle::sample_subsets(pool.len(), masks, alpha, seed)?;
            let targets: Vec<TargetExample> =
                task.samples.iter().map(TargetExample::from_sample).collect();
            let data = datamodel_oracle::collect_regression_data(
                &spec,
                &pool,
                &targets,
                &masks,
                &cfg,
                Measurement::Loss,
                1,
            )?;
            std::fs::create_dir_all(&out_dir)?;
            for (i, records) in data.iter().enumerate() {
                let dm = datamodel_oracle::fit_linear_datamodel(records, ridge, format!("target:{i}"))?;
                write_json(&dm, &out_dir.join(format!("dm_{i}.json")))?;
                datamodel_oracle::save_records(
                    records,
                    &format!("target:{i}"),
                    &out_dir.join(format!("records_{i}.jsonl")),
                )?;
            }
            println!("wrote {} datamodels to {}", data.len(), out_dir.display());
            Ok(())
        }
        DatamodelCommand::Trak {
            pool,
            task,
            num_models,
            projection_dim,
            subset_fraction,
            ridge,
            seed,
            hidden_dim,
            train,
            out_dir,
        } => {
            let pool = corpus::load_pool(&pool)?;
            let task = corpus::load_task("target", &task)?;
            let spec = lm_spec(&pool, hidden_dim);
            let trak_cfg = TrakConfig {
                num_models,
                projection_dim,
                subset_fraction,
                ridge,
                seed,
                train: train.config(seed),
            };
            trak_cfg.validate()?;
            let models = trak::train_reference_models(&spec, &pool, &trak_cfg)?;
            let cache = cache_dir(&out_dir);
            std::fs::create_dir_all(&cache)?;
            let key = fnv1a(
                format!("{}:{}:{}:{}:{}", spec.id(), pool.len(), projection_dim, seed, num_models)
                    .as_bytes(),
            );
            let mut stores = Vec::with_capacity(num_models);
            for (k, model) in models.iter().enumerate() {
                let path = cache.join(format!("store_{key:016x}_{k}.bin"));
                let store = match trak::load_store(&path, k) {
                    Ok(s) if s.pool_size() == pool.len() && s.dim() == projection_dim => s,
                    _ => {
                        let s = trak::project_gradients(
                            &spec,
                            model,
                            &pool,
                            projection_dim,
                            Projection::Gaussian { seed: seed.wrapping_add(1000 + k as u64) },
                            k,
                        )?;
                        trak::save_store(&s, &path)?;
                        s
                    }
                };
                stores.push(store);
            }
            let scorer = trak::TrakScorer::new(&spec, &models, &stores, ridge)?;
            std::fs::create_dir_all(&out_dir)?;
            let mut dms = Vec::new();
            for (i, sample) in task.samples.iter().enumerate() {
                let dm = scorer.score(&TargetExample::from_sample(sample), format!("target:{i}"))?;
                write_json(&dm, &out_dir.join(format!("dm_{i}.json")))?;
                dms.push(dm);
            }
            let mean = selection::average_datamodels(&dms)?;
            write_json(&mean, &out_dir.join("mean_datamodel.json"))?;
            println!("wrote {} datamodels to {}", dms.len(), out_dir.display());
            Ok(())
        }
        DatamodelCommand::Influence { features, target_index, seed, train, out } => {
            let triplets: Vec<Triplet> =
                serde_json::from_str(&std::fs::read_to_string(&features)?)?;
            if target_index >= triplets.len() {
                return Err(Error::InvalidConfig(format!(
                    "target index {target_index} out of range for {} triplets",
                    triplets.len()
                )));
            }
            let spec = PredictorSpec::GeneralizedLogistic {
                input_dim: triplets.first().map(|t| t.x.len()).unwrap_or(0),
                features: triplets.clone(),
            };
            let dummy = corpus::CandidatePool {
                examples: (0..triplets.len())
                    .map(|id| corpus::Example { id, tokens: vec![0, 0], text: None })
                    .collect(),
                chunk_len: 2,
                vocab_size: 2,
            };
            let params = predictors::train(
                &spec,
                &SubsetMask::full(triplets.len()),
                &dummy,
                &train.config(seed),
            )?;
            let influence = trak::influence_logistic(&triplets[target_index], &triplets, &params)?;
            let f_full = predictors::output(
                &spec,
                &params,
                &predictors::EvalPoint::Logistic(&triplets[target_index]),
            );
            let dm = trak::loo_datamodel_from_influence(
                format!("triplet:{target_index}"),
                &influence,
                f_full,
            );
            write_json(&dm, &out)?;
            println!("wrote influence datamodel to {}", out.display());
            Ok(())
        }
    }
}

fn run_select(command: SelectCommand) -> Result<()> {
    match command {
        SelectCommand::Dsdm { datamodels, k, target, out } => {
            let dms: Vec<Datamodel> = datamodels
                .iter()
                .map(|p| Ok(serde_json::from_str(&std::fs::read_to_string(p)?)?))
                .collect::<Result<_>>()?;
            let mean = selection::average_datamodels(&dms)?;
            let sel = selection::dsdm_select(&mean, k, target)?;
            write_json(&sel, &out)?;
            println!("selected {} examples -> {}", sel.indices.len(), out.display());
            Ok(())
        }
        SelectCommand::Dsir { pool, task, featurizer, smoothing_alpha, k, seed, out } => {
            let pool = corpus::load_pool(&pool)?;
            let task = corpus::load_task("target", &task)?;
            let pool_docs: Vec<Vec<TokenId>> =
                pool.examples.iter().map(|e| e.tokens.clone()).collect();
            let target_docs: Vec<Vec<TokenId>> =
                task.samples.iter().map(|s| s.full_sequence().0).collect();
            let sel = baselines::dsir_select(
                &pool,
                &pool_docs,
                &target_docs,
                &featurizer.build(),
                smoothing_alpha,
                k,
                seed,
                &task.name,
            )?;
            write_json(&sel, &out)?;
            println!("selected {} examples -> {}", sel.indices.len(), out.display());
            Ok(())
        }
        SelectCommand::Classifier { pool, task, featurizer, alpha, k, seed, train, out } => {
            let pool = corpus::load_pool(&pool)?;
            let task = corpus::load_task("target", &task)?;
            let pool_docs: Vec<Vec<TokenId>> =
                pool.examples.iter().map(|e| e.tokens.clone()).collect();
            let target_docs: Vec<Vec<TokenId>> =
                task.samples.iter().map(|s| s.full_sequence().0).collect();
            let sel = baselines::classifier_select(
                &pool,
                &pool_docs,
                &target_docs,
                &featurizer.build(),
                alpha,
                Some(k),
                seed,
                &train.config(seed),
                &task.name,
            )?;
            write_json(&sel, &out)?;
            println!("selected {} examples -> {}", sel.indices.len(), out.display());
            Ok(())
        }
        SelectCommand::Semdedup { embeddings, clusters, keep_fraction, seed, target, out } => {
            let emb: Array2<f64> = baselines::load_embeddings(&embeddings)?;
            let sel = baselines::semdedup_select(&emb, clusters, keep_fraction, seed, &target)?;
            write_json(&sel, &out)?;
            println!("selected {} examples -> {}", sel.indices.len(), out.display());
            Ok(())
        }
        SelectCommand::Random { pool, k, seed, target, out } => {
            let pool = corpus::load_pool(&pool)?;
            let sel = baselines::random_select(pool.len(), k, seed, &target)?;
            write_json(&sel, &out)?;
            println!("selected {} examples -> {}", sel.indices.len(), out.display());
            Ok(())
        }
    }
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let pool = corpus::load_pool(&args.pool)?;
    let task = corpus::load_task("task", &args.task)?;
    let spec = lm_spec(&pool, args.hidden_dim);
    let params = match (&args.params, &args.selection) {
        (Some(p), _) => predictors::load_params(p)?,
        (None, Some(sel_path)) => {
            let sel: SelectionResult =
                serde_json::from_str(&std::fs::read_to_string(sel_path)?)?;
            let params =
                predictors::train(&spec, &sel.mask(pool.len()), &pool, &args.train.config(args.seed))?;
            if let Some(save) = &args.save_params {
                predictors::save_params(&params, save)?;
            }
            params
        }
        (None, None) => {
            return Err(Error::InvalidConfig("need --params or --selection".into()));
        }
    };
    let logprob = eval::mean_log_probability(&spec, &params, &task, true)?;
    let exact = eval::exact_match_accuracy(&spec, &params, &task, false)?;
    let report = serde_json::json!({ "mean_log_prob": logprob, "exact_match": exact });
    match &args.out {
        Some(path) => write_json(&report, path)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

fn run_experiment(command: ExperimentCommand) -> Result<()> {
    let ExperimentCommand::Run { config, set } = command;
    let cfg: ExperimentConfig =
        load_config(Some(&config), serde_json::Value::Null, &set)?;
    let report = harness::run_experiment(&cfg)?;
    let failed: Vec<&harness::ResultRow> =
        report.rows.iter().filter(|r| r.error.is_some()).collect();
    for row in &report.rows {
        match &row.error {
            Some(e) => println!("{}\tk={}\tFAILED: {e}", row.method, row.k),
            None => println!("{}\tk={}\t{} = {:.6}", row.method, row.k, row.metric, row.value),
        }
    }
    println!("results written to {}", report.output_dir.display());
    if !failed.is_empty() {
        // Partial results are on disk; report the stage failure.
        return Err(Error::Stage {
            context: format!("{} grid cell(s) failed", failed.len()),
            source: Box::new(Error::InvalidConfig(
                failed[0].error.clone().unwrap_or_default(),
            )),
        });
    }
    Ok(())
}

fn run_leakage(command: LeakageCommand) -> Result<()> {
    let LeakageCommand::Check { pool, task } = command;
    let pool = corpus::load_pool(&pool)?;
    let task = corpus::load_task("task", &task)?;
    let leaks = corpus::leakage_check(&task, &pool);
    let report = serde_json::json!({
        "n_leaks": leaks.len(),
        "pairs": leaks.iter().map(|(s, e)| serde_json::json!({
            "sample": s,
            "example": e,
        })).collect::<Vec<_>>(),
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn run_lds(args: LdsArgs) -> Result<()> {
    let dm: Datamodel = serde_json::from_str(&std::fs::read_to_string(&args.datamodel)?)?;
    let records: Vec<RegressionRecord> =
        datamodel_oracle::load_records(&args.records, args.pool_size)?;
    let report = eval::lds_spearman(&dm, &records)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

/// 2 for configuration problems, 3 for runtime/stage failures.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_)
        | Error::Json(_)
        | Error::BadFormat(_)
        | Error::DegenerateChunkLength
        | Error::EmptySubsetSize
        | Error::SelectionSizeOutOfRange { .. }
        | Error::EnumerationCapExceeded { .. }
        | Error::LengthMismatch { .. } => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
