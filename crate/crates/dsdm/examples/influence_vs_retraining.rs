//! Compare one-step influence-function estimates against actual
//! leave-one-out retraining on a small logistic task.
//!
//! The influence function predicts, for each training point, how much the
//! model's output on a target would change if that point were dropped and
//! the model retrained. Here we retrain for real and measure agreement.

use dsdm::corpus::{CandidatePool, Example};
use dsdm::datamodel_oracle::SubsetMask;
use dsdm::predictors::{self, EvalPoint, PredictorSpec, TrainConfig, Triplet};
use dsdm::stats;
use dsdm::trak;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn main() -> dsdm::Result<()> {
    let n = 120;
    let dim = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let teacher: Vec<f64> =
        (0..dim).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
    // Label-folded features: y is sampled from the teacher and multiplied
    // into x, so every triplet has y = +1 and the output is the margin.
    let triplets: Vec<Triplet> = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..dim)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal) / (dim as f64).sqrt())
                .collect();
            let m: f64 = 2.0 * x.iter().zip(&teacher).map(|(a, b)| a * b).sum::<f64>();
            let y = if rng.gen::<f64>() < 1.0 / (1.0 + (-m).exp()) { 1.0 } else { -1.0 };
            Triplet { x: x.into_iter().map(|v| y * v).collect(), bias: 0.0, y: 1.0 }
        })
        .collect();

    let spec = PredictorSpec::GeneralizedLogistic { input_dim: dim, features: triplets.clone() };
    let pool = CandidatePool {
        examples: (0..n).map(|id| Example { id, tokens: vec![0, 0], text: None }).collect(),
        chunk_len: 2,
        vocab_size: 2,
    };
    // Full-batch gradient descent: deterministic and convex, so the
    // trained model is effectively the unique optimum.
    let cfg = TrainConfig {
        steps: 2500,
        batch_size: n,
        learning_rate: 1.0,
        weight_decay: 0.0,
        seed: 0,
        subset_fraction: 1.0,
    };
    let full = SubsetMask::full(n);
    let params = predictors::train(&spec, &full, &pool, &cfg)?;

    let target = triplets[5].clone();
    let z = EvalPoint::Logistic(&target);
    let f_full = predictors::output(&spec, &params, &z);
    let influence = trak::influence_logistic(&target, &triplets, &params)?;

    let probe: Vec<usize> = (0..n).step_by(5).collect();
    let mut predicted = Vec::new();
    let mut actual = Vec::new();
    for &i in &probe {
        let loo = predictors::train(&spec, &full.without(i), &pool, &cfg)?;
        actual.push(f_full - predictors::output(&spec, &loo, &z));
        predicted.push(influence[i]);
    }
    let r = stats::pearson(&predicted, &actual);
    println!("{} leave-one-out retrains vs influence predictions", probe.len());
    println!("Pearson r = {r:.4}");
    for (j, &i) in probe.iter().take(8).enumerate() {
        println!("  drop {i:3}: predicted {:+.5}  actual {:+.5}", predicted[j], actual[j]);
    }

    // The influence vector also defines a leave-one-out datamodel whose
    // full-mask prediction telescopes back to the observed output.
    let dm = trak::loo_datamodel_from_influence("target", &influence, f_full);
    println!("datamodel(full mask) = {:.6}  (observed {f_full:.6})", dm.predict(&full));
    Ok(())
}
