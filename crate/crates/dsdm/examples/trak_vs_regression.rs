//! Estimate datamodels two ways — the expensive data-regression oracle
//! (hundreds of subset retrainings) and the cheap TRAK estimator (a
//! handful of reference models plus projected gradients) — and compare
//! the weight vectors they produce.

use dsdm::corpus::{CandidatePool, Example};
use dsdm::datamodel_oracle::{
    collect_regression_data, fit_linear_datamodel, sample_subsets, Measurement,
};
use dsdm::predictors::{PredictorSpec, TargetExample, TrainConfig, Triplet};
use dsdm::stats;
use dsdm::trak::{self, GradientStore, Projection, TrakConfig};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn instance(n: usize, dim: usize, seed: u64) -> Vec<Triplet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let teacher: Vec<f64> =
        (0..dim).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..dim)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal) / (dim as f64).sqrt())
                .collect();
            let m: f64 = 2.0 * x.iter().zip(&teacher).map(|(a, b)| a * b).sum::<f64>();
            let y = if rng.gen::<f64>() < 1.0 / (1.0 + (-m).exp()) { 1.0 } else { -1.0 };
            Triplet { x: x.into_iter().map(|v| y * v).collect(), bias: 0.0, y: 1.0 }
        })
        .collect()
}

fn main() -> dsdm::Result<()> {
    let n = 60;
    let dim = 8;
    let spec = PredictorSpec::GeneralizedLogistic { input_dim: dim, features: instance(n, dim, 2) };
    let pool = CandidatePool {
        examples: (0..n).map(|id| Example { id, tokens: vec![0, 0], text: None }).collect(),
        chunk_len: 2,
        vocab_size: 2,
    };
    let cfg = TrainConfig {
        steps: 500,
        batch_size: n,
        learning_rate: 1.0,
        weight_decay: 0.0,
        seed: 0,
        subset_fraction: 1.0,
    };
    let targets: Vec<TargetExample> =
        instance(3, dim, 99).into_iter().map(TargetExample::Logistic).collect();

    // Oracle: 300 random half-pool subsets, one retraining each, then a
    // least-squares fit of loss against the subset indicator.
    let masks = sample_subsets(n, 300, 0.5, 7)?;
    println!("oracle: training {} subset models...", masks.len());
    let records =
        collect_regression_data(&spec, &pool, &targets, &masks, &cfg, Measurement::Loss, 1)?;
    let oracle: Vec<_> = records
        .iter()
        .enumerate()
        .map(|(t, r)| fit_linear_datamodel(r, 1e-4, format!("t{t}")))
        .collect::<dsdm::Result<_>>()?;

    // TRAK: 4 reference models and d=256 projected gradients.
    let trak_cfg = TrakConfig {
        num_models: 4,
        projection_dim: 256,
        subset_fraction: 0.5,
        ridge: None,
        seed: 13,
        train: cfg.clone(),
    };
    let models = trak::train_reference_models(&spec, &pool, &trak_cfg)?;
    let stores: Vec<GradientStore> = models
        .iter()
        .enumerate()
        .map(|(k, m)| {
            trak::project_gradients(&spec, m, &pool, 256, Projection::Gaussian { seed: 40 + k as u64 }, k)
        })
        .collect::<dsdm::Result<_>>()?;
    let scorer = trak::TrakScorer::new(&spec, &models, &stores, None)?;

    for (t, target) in targets.iter().enumerate() {
        let trak_dm = scorer.score(target, format!("t{t}"))?;
        let rho = stats::spearman(&trak_dm.weights, &oracle[t].weights);
        println!(
            "target {t}: Spearman(TRAK, oracle) = {rho:.3}   ({} retrains vs {})",
            masks.len(),
            trak_cfg.num_models
        );
    }
    Ok(())
}
