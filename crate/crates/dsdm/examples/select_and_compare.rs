//! End-to-end comparison on a planted-subpopulation pool: select training
//! data with DsDm and every baseline, train a small LM on each selection
//! under the same token budget, and report target log-probabilities.
//!
//! This is the whole pipeline in one file; the `experiment run` CLI
//! subcommand drives the same flow from a JSON config.

use dsdm::baselines::{self, HashedNgramFeaturizer};
use dsdm::corpus::TokenId;
use dsdm::eval;
use dsdm::harness::{self, SyntheticPoolSpec};
use dsdm::predictors::{self, PredictorSpec, TrainConfig};
use dsdm::selection;
use dsdm::trak::TrakConfig;

fn main() -> dsdm::Result<()> {
    let spec = SyntheticPoolSpec {
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
        seed: 11,
    };
    let (pool, target, holdout) = harness::make_synthetic_pool(&spec)?;
    let k = 50;
    println!("pool of {} (subpop A aligned with target), selecting k = {k}", pool.len());

    let lm = PredictorSpec::TinySoftmaxLm {
        vocab_size: pool.vocab_size,
        context_len: pool.chunk_len,
        hidden_dim: 8,
    };
    let proxy_train = TrainConfig {
        steps: 300,
        batch_size: 32,
        learning_rate: 0.1,
        weight_decay: 0.0,
        seed: 0,
        subset_fraction: 1.0,
    };
    let deploy_train = TrainConfig { steps: 800, ..proxy_train.clone() };

    let docs: Vec<Vec<TokenId>> = pool.examples.iter().map(|e| e.tokens.clone()).collect();
    let target_docs: Vec<Vec<TokenId>> =
        target.samples.iter().map(|s| s.full_sequence().0).collect();
    let featurizer = HashedNgramFeaturizer { n_max: 2, buckets: 512, hash_seed: 0 };

    // Selections.
    let trak_cfg = TrakConfig {
        num_models: 8,
        projection_dim: 256,
        subset_fraction: 0.38,
        ridge: None,
        seed: 7,
        train: proxy_train.clone(),
    };
    let mean = harness::dsdm_mean_datamodel(&pool, &target, &lm, &trak_cfg)?;
    let mut selections = vec![selection::dsdm_select(&mean, k, "target")?];
    selections.push(baselines::dsir_select(
        &pool, &docs, &target_docs, &featurizer, 0.01, k, 2, "target",
    )?);
    selections.push(baselines::classifier_select(
        &pool,
        &docs,
        &target_docs,
        &featurizer,
        12.0,
        Some(k),
        4,
        &TrainConfig { steps: 300, batch_size: 16, learning_rate: 0.05, ..proxy_train.clone() },
        "target",
    )?);
    selections.push(baselines::random_select(pool.len(), k, 5, "target")?);

    // Same deployment budget for every method.
    println!("\n{:<12} {:>8} {:>14}", "method", "subpop A", "mean log prob");
    for sel in &selections {
        let mask = sel.mask(pool.len());
        let params = predictors::train(&lm, &mask, &pool, &deploy_train)?;
        let report = eval::mean_log_probability(&lm, &params, &holdout, false)?;
        let aligned = sel.indices.iter().filter(|&&i| i < 50).count();
        println!("{:<12} {aligned:>7}/{k} {:>14.3}", sel.method, report.value);
    }
    Ok(())
}
