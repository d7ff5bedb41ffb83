//! Drive the full (method, k) experiment grid programmatically and print
//! the assembled results table. Equivalent to `dsdm experiment run` with
//! the same config as JSON.

use dsdm::harness::{
    EpochMode, ExperimentConfig, MethodConfig, PoolSource, PredictorConfig, SyntheticPoolSpec,
};
use dsdm::predictors::TrainConfig;

fn main() -> dsdm::Result<()> {
    let train = TrainConfig {
        steps: 200,
        batch_size: 32,
        learning_rate: 0.1,
        weight_decay: 0.0,
        seed: 0,
        subset_fraction: 1.0,
    };
    let cfg = ExperimentConfig {
        pool: PoolSource::Synthetic {
            spec: SyntheticPoolSpec {
                examples_per_subpopulation: 30,
                noise_examples: 60,
                seed: 5,
                ..Default::default()
            },
        },
        methods: vec![
            MethodConfig::Dsdm { num_models: 4, projection_dim: 128, subset_fraction: 0.38 },
            MethodConfig::Random {},
            MethodConfig::Dsir { n_max: 2, buckets: 512, smoothing_alpha: 0.01 },
            MethodConfig::Semdedup { n_clusters: 8 },
        ],
        ks: vec![20, 40],
        proxy: PredictorConfig { hidden_dim: 8, train: train.clone() },
        deployment: PredictorConfig { hidden_dim: 8, train },
        epochs: EpochMode::EqualTotalTokens { token_budget: Some(120_000) },
        seed: 7,
        output_dir: std::env::temp_dir().join("dsdm_experiment_grid"),
    };

    let report = dsdm::harness::run_experiment(&cfg)?;
    println!("{:<12} {:>4} {:<16} {:>10}", "method", "k", "metric", "value");
    for row in &report.rows {
        match &row.error {
            Some(e) => println!("{:<12} {:>4} {:<16} FAILED: {e}", row.method, row.k, "-"),
            None => println!(
                "{:<12} {:>4} {:<16} {:>10.4}",
                row.method, row.k, row.metric, row.value
            ),
        }
    }
    println!("\nartifacts under {}", report.output_dir.display());
    Ok(())
}
