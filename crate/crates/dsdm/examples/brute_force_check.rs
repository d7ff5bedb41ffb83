//! On a 12-example pool the subset-selection problem is enumerable:
//! train on every one of the C(12,4) = 495 subsets and see where the
//! datamodel-guided choice lands in the true loss ranking.

use dsdm::corpus::{CandidatePool, Example};
use dsdm::datamodel_oracle::{
    collect_regression_data, fit_linear_datamodel, sample_subsets, Measurement, SubsetMask,
};
use dsdm::predictors::{self, PredictorSpec, TargetExample, TrainConfig, Triplet};
use dsdm::selection;
use itertools::Itertools;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn main() -> dsdm::Result<()> {
    let n = 12;
    let k = 4;
    let dim = 4;
    let make = |count: usize, seed: u64| -> Vec<Triplet> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let teacher: Vec<f64> =
            (0..dim).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        (0..count)
            .map(|_| {
                let x: Vec<f64> = (0..dim)
                    .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal) / (dim as f64).sqrt())
                    .collect();
                let m: f64 = 2.0 * x.iter().zip(&teacher).map(|(a, b)| a * b).sum::<f64>();
                let y = if rng.gen::<f64>() < 1.0 / (1.0 + (-m).exp()) { 1.0 } else { -1.0 };
                Triplet { x: x.into_iter().map(|v| y * v).collect(), bias: 0.0, y: 1.0 }
            })
            .collect()
    };
    let features = make(n, 19);
    let target = TargetExample::Logistic(make(1, 91).pop().unwrap());
    let spec = PredictorSpec::GeneralizedLogistic { input_dim: dim, features };
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

    // Fit a datamodel from subset retrainings at two densities.
    let mut masks = sample_subsets(n, 150, 0.34, 3)?;
    masks.extend(sample_subsets(n, 150, 0.67, 4)?);
    let records = collect_regression_data(
        &spec,
        &pool,
        std::slice::from_ref(&target),
        &masks,
        &cfg,
        Measurement::Loss,
        1,
    )?;
    let dm = fit_linear_datamodel(&records[0], 1e-4, "t")?;
    let mean = selection::average_datamodels(std::slice::from_ref(&dm))?;
    let sel = selection::dsdm_select(&mean, k, "t")?;
    let sel_mask = sel.mask(n);
    println!("datamodel picks {:?}", sel.indices);

    // Exhaustive ground truth.
    let mut results: Vec<(Vec<usize>, f64)> = Vec::with_capacity(495);
    for combo in (0..n).combinations(k) {
        let mask = SubsetMask::from_indices(n, &combo);
        let params = predictors::train(&spec, &mask, &pool, &cfg)?;
        results.push((combo, predictors::loss(&spec, &params, &target.as_eval())));
    }
    results.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let rank = results
        .iter()
        .position(|(combo, _)| SubsetMask::from_indices(n, combo) == sel_mask)
        .unwrap();
    println!("true-loss rank of the datamodel pick: {}/{}", rank + 1, results.len());
    println!("best 3 subsets by true loss:");
    for (combo, loss) in results.iter().take(3) {
        println!("  {combo:?}  loss {loss:.5}");
    }

    // Exact verification against the enumerating selector as well.
    let (best_mask, best_loss) =
        selection::brute_force_optimal(&spec, &pool, std::slice::from_ref(&target), k, &cfg, None)?;
    println!("brute_force_optimal agrees: {:?} (loss {best_loss:.5})", best_mask.indices());
    Ok(())
}
