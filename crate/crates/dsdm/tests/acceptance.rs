//! Acceptance gate: one test per criterion, each printing a single
//! `[PASS] criterion N` line on success. Run with
//! `cargo test --test acceptance -- --nocapture` to see the lines.

use std::time::Instant;

use itertools::Itertools;
use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use dsdm::baselines::{self, HashedNgramFeaturizer, LomaxSampler};
use dsdm::corpus::{self, CandidatePool, Example, TargetSample, TargetTask};
use dsdm::datamodel_oracle::{
    collect_regression_data, fit_linear_datamodel, sample_subsets, Measurement, SubsetMask,
};
use dsdm::eval;
use dsdm::harness::{self, SyntheticPoolSpec};
use dsdm::predictors::{self, EvalPoint, PredictorSpec, TargetExample, TrainConfig, Triplet};
use dsdm::selection::{self};
use dsdm::stats;
use dsdm::trak::{self, GradientStore, Projection, TrakConfig};

// ---------------------------------------------------------------------------
// Shared synthetic-instance helpers
// ---------------------------------------------------------------------------

/// Noisy-teacher logistic instance: labels are sampled from the teacher's
/// class probabilities, so the data is not linearly separable. Labels are
/// folded into the features (x <- y*x, y = +1), the standard margin
/// parametrization, so the model output is directly the correctness
/// margin and the TRAK Q factor composes with it.
fn logistic_instance(n: usize, dim: usize, seed: u64) -> Vec<Triplet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let teacher: Vec<f64> =
        (0..dim).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..dim)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal) / (dim as f64).sqrt())
                .collect();
            let margin: f64 = 2.0 * x.iter().zip(&teacher).map(|(a, b)| a * b).sum::<f64>();
            let p = 1.0 / (1.0 + (-margin).exp());
            let y = if rng.gen::<f64>() < p { 1.0 } else { -1.0 };
            Triplet { x: x.into_iter().map(|v| y * v).collect(), bias: 0.0, y: 1.0 }
        })
        .collect()
}

fn logistic_spec(features: Vec<Triplet>) -> PredictorSpec {
    let input_dim = features.first().map(|t| t.x.len()).unwrap_or(0);
    PredictorSpec::GeneralizedLogistic { input_dim, features }
}

/// Placeholder pool for logistic predictors (which index precomputed
/// features, not token sequences).
fn dummy_pool(n: usize) -> CandidatePool {
    CandidatePool {
        examples: (0..n).map(|id| Example { id, tokens: vec![0, 0], text: None }).collect(),
        chunk_len: 2,
        vocab_size: 2,
    }
}

/// Deterministic full-batch gradient descent to near-convergence.
fn convex_cfg(n: usize, steps: usize) -> TrainConfig {
    TrainConfig {
        steps,
        batch_size: n,
        learning_rate: 1.0,
        weight_decay: 0.0,
        seed: 0,
        subset_fraction: 1.0,
    }
}

fn pass(criterion: usize, detail: String) {
    println!("[PASS] criterion {criterion}: {detail}");
}

// ---------------------------------------------------------------------------
// 1. Influence-function fidelity against leave-one-out retraining
// ---------------------------------------------------------------------------

#[test]
fn acceptance_01_influence_fidelity() {
    let start = Instant::now();
    let n = 200;
    let triplets = logistic_instance(n, 10, 11);
    let spec = logistic_spec(triplets.clone());
    let pool = dummy_pool(n);
    let cfg = convex_cfg(n, 3000);

    let full = SubsetMask::full(n);
    let params = predictors::train(&spec, &full, &pool, &cfg).unwrap();
    let target = triplets[3].clone();
    let z = EvalPoint::Logistic(&target);
    let f_full = predictors::output(&spec, &params, &z);
    let influence = trak::influence_logistic(&target, &triplets, &params).unwrap();

    let loo_indices: Vec<usize> = (0..n).step_by(4).collect();
    assert_eq!(loo_indices.len(), 50);
    let mut predicted = Vec::new();
    let mut actual = Vec::new();
    for &i in &loo_indices {
        let loo_params = predictors::train(&spec, &full.without(i), &pool, &cfg).unwrap();
        actual.push(f_full - predictors::output(&spec, &loo_params, &z));
        predicted.push(influence[i]);
    }

    let r = stats::pearson(&predicted, &actual);
    let agree = predicted
        .iter()
        .zip(&actual)
        .filter(|(p, a)| (p.is_sign_positive()) == (a.is_sign_positive()))
        .count();
    let sign_rate = agree as f64 / predicted.len() as f64;
    let elapsed = start.elapsed().as_secs_f64();
    assert!(r >= 0.99, "Pearson r = {r}");
    assert!(sign_rate >= 0.98, "sign agreement = {sign_rate}");
    assert!(elapsed < 60.0, "took {elapsed:.1}s");
    pass(1, format!("influence vs 50 retrains: r={r:.4}, sign={sign_rate:.2}, {elapsed:.1}s"));
}

// ---------------------------------------------------------------------------
// 2. Leave-one-out datamodel identity (exact telescoping)
// ---------------------------------------------------------------------------

#[test]
fn acceptance_02_loo_datamodel_identity() {
    let n = 40;
    let triplets = logistic_instance(n, 6, 13);
    let spec = logistic_spec(triplets.clone());
    let pool = dummy_pool(n);
    let cfg = convex_cfg(n, 1500);
    let full = SubsetMask::full(n);
    let params = predictors::train(&spec, &full, &pool, &cfg).unwrap();
    let target = triplets[1].clone();
    let f_full = predictors::output(&spec, &params, &EvalPoint::Logistic(&target));
    let influence = trak::influence_logistic(&target, &triplets, &params).unwrap();
    let dm = trak::loo_datamodel_from_influence("t", &influence, f_full);

    assert!((dm.predict(&full) - f_full).abs() < 1e-10);
    let mut worst = 0.0f64;
    for i in 0..n {
        let err = (dm.predict(&full.without(i)) - (f_full - influence[i])).abs();
        worst = worst.max(err);
    }
    assert!(worst < 1e-10, "worst leave-one-out error {worst:e}");
    pass(2, format!("full-mask and {n} leave-one-out identities hold to 1e-10 (worst {worst:.2e})"));
}

// ---------------------------------------------------------------------------
// 3 + 4. TRAK vs regression-oracle agreement, and LDS generalization
// ---------------------------------------------------------------------------

#[test]
fn acceptance_03_04_trak_vs_regression_and_lds() {
    let start = Instant::now();
    let n = 100;
    let dim = 10;
    let pool_triplets = logistic_instance(n, dim, 31);
    let spec = logistic_spec(pool_triplets);
    let pool = dummy_pool(n);
    let cfg = convex_cfg(0, 600); // batch size patched below
    let cfg = TrainConfig { batch_size: n, ..cfg };

    let targets: Vec<TargetExample> = logistic_instance(10, dim, 77)
        .into_iter()
        .map(TargetExample::Logistic)
        .collect();

    // Ground-truth datamodels by data regression on 500 masks at alpha 0.5.
    let masks = sample_subsets(n, 500, 0.5, 123).unwrap();
    let records =
        collect_regression_data(&spec, &pool, &targets, &masks, &cfg, Measurement::Loss, 1)
            .unwrap();
    let reg_dms: Vec<_> = records
        .iter()
        .enumerate()
        .map(|(t, r)| fit_linear_datamodel(r, 1e-4, format!("t{t}")).unwrap())
        .collect();

    // TRAK with m=4, d=512, default ridge.
    let trak_cfg = TrakConfig {
        num_models: 4,
        projection_dim: 512,
        subset_fraction: 0.5,
        ridge: None,
        seed: 9,
        train: cfg.clone(),
    };
    let models = trak::train_reference_models(&spec, &pool, &trak_cfg).unwrap();
    let stores: Vec<GradientStore> = models
        .iter()
        .enumerate()
        .map(|(k, m)| {
            trak::project_gradients(
                &spec,
                m,
                &pool,
                512,
                Projection::Gaussian { seed: 1000 + k as u64 },
                k,
            )
            .unwrap()
        })
        .collect();
    let scorer = trak::TrakScorer::new(&spec, &models, &stores, None).unwrap();
    let trak_dms: Vec<_> = targets
        .iter()
        .enumerate()
        .map(|(t, z)| scorer.score(z, format!("t{t}")).unwrap())
        .collect();

    let mean_rho = trak_dms
        .iter()
        .zip(&reg_dms)
        .map(|(a, b)| stats::spearman(&a.weights, &b.weights))
        .sum::<f64>()
        / targets.len() as f64;
    let elapsed = start.elapsed().as_secs_f64();
    assert!(mean_rho >= 0.4, "mean Spearman vs regression oracle = {mean_rho}");
    assert!(elapsed < 600.0, "took {elapsed:.0}s");
    pass(3, format!("TRAK vs regression oracle mean Spearman {mean_rho:.3} over 10 targets, {elapsed:.0}s"));

    // LDS: rank-correlate TRAK predictions with realized losses on 100
    // fresh masks never used for fitting.
    let fresh = sample_subsets(n, 100, 0.5, 321).unwrap();
    let fresh_records =
        collect_regression_data(&spec, &pool, &targets, &fresh, &cfg, Measurement::Loss, 1)
            .unwrap();
    let mean_lds = trak_dms
        .iter()
        .zip(&fresh_records)
        .map(|(dm, recs)| eval::lds_spearman(dm, recs).unwrap().value)
        .sum::<f64>()
        / targets.len() as f64;
    assert!(mean_lds >= 0.25, "mean LDS = {mean_lds}");
    pass(4, format!("mean LDS on 100 fresh masks = {mean_lds:.3} over 10 targets"));
}

// ---------------------------------------------------------------------------
// 5. Identity-projection equivalence against an independent dense script
// ---------------------------------------------------------------------------

/// Gauss-Jordan inverse: deliberately a different algorithm from the
/// library's Cholesky solve.
fn gauss_jordan_inverse(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let mut aug = Array2::<f64>::zeros((n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            aug[(i, j)] = a[(i, j)];
        }
        aug[(i, n + i)] = 1.0;
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| aug[(x, col)].abs().partial_cmp(&aug[(y, col)].abs()).unwrap())
            .unwrap();
        if pivot != col {
            for j in 0..2 * n {
                aug.swap((col, j), (pivot, j));
            }
        }
        let p = aug[(col, col)];
        assert!(p.abs() > 1e-14, "singular matrix in oracle");
        for j in 0..2 * n {
            aug[(col, j)] /= p;
        }
        for i in 0..n {
            if i != col {
                let f = aug[(i, col)];
                for j in 0..2 * n {
                    aug[(i, j)] -= f * aug[(col, j)];
                }
            }
        }
    }
    aug.slice(ndarray::s![.., n..]).to_owned()
}

#[test]
fn acceptance_05_identity_projection_equivalence() {
    let n = 5;
    let dim = 3; // with identity projection, d equals the parameter count
    let triplets = logistic_instance(n, dim, 41);
    let spec = logistic_spec(triplets.clone());
    let pool = dummy_pool(n);
    let cfg = convex_cfg(n, 800);
    let trak_cfg = TrakConfig {
        num_models: 3,
        projection_dim: dim,
        subset_fraction: 0.8,
        ridge: None,
        seed: 5,
        train: cfg,
    };
    let models = trak::train_reference_models(&spec, &pool, &trak_cfg).unwrap();
    let stores: Vec<GradientStore> = models
        .iter()
        .enumerate()
        .map(|(k, m)| {
            trak::project_gradients(&spec, m, &pool, dim, Projection::Identity, k).unwrap()
        })
        .collect();
    let target = TargetExample::Logistic(triplets[2].clone());
    let dm = trak::trak_scores(&target, &stores, &spec, &models, None, "t").unwrap();

    // Independent dense evaluation. For the logistic margin, the gradient
    // of the output at any point is just its feature vector, so phi rows
    // are the x_i and phi(z) is x_z, per store.
    let m = models.len();
    let mut score_row = Array1::<f64>::zeros(n);
    let mut q_bar = vec![0.0; n];
    for store in &stores {
        let mut phi = Array2::<f64>::zeros((n, dim));
        for (i, t) in triplets.iter().enumerate() {
            for j in 0..dim {
                phi[(i, j)] = t.x[j];
            }
        }
        let mut gram = phi.t().dot(&phi);
        let trace: f64 = (0..dim).map(|i| gram[(i, i)]).sum();
        let lambda = 1e-4 * trace / dim as f64;
        for i in 0..dim {
            gram[(i, i)] += lambda;
        }
        let inv = gauss_jordan_inverse(&gram);
        let phi_z = Array1::from_vec(triplets[2].x.clone());
        score_row = score_row + phi_z.dot(&inv).dot(&phi.t());
        for (acc, &q) in q_bar.iter_mut().zip(&store.q_diag) {
            *acc += q;
        }
    }
    score_row /= m as f64;
    q_bar.iter_mut().for_each(|q| *q /= m as f64);
    let expected: Vec<f64> =
        score_row.iter().zip(&q_bar).map(|(&a, &q)| -(a * q)).collect();

    let mut worst = 0.0f64;
    for (got, want) in dm.weights.iter().zip(&expected) {
        worst = worst.max((got - want).abs());
    }
    assert!(worst < 1e-8, "max deviation from dense script {worst:e}");
    pass(5, format!("identity-projection TRAK matches dense evaluation to 1e-8 (worst {worst:.2e})"));
}

// ---------------------------------------------------------------------------
// 6. Brute-force optimality proximity on an enumerable instance
// ---------------------------------------------------------------------------

#[test]
fn acceptance_06_brute_force_proximity() {
    let n = 12;
    let k = 4;
    let triplets = logistic_instance(n, 4, 19);
    let spec = logistic_spec(triplets);
    let pool = dummy_pool(n);
    let cfg = convex_cfg(n, 500);
    let target = TargetExample::Logistic(logistic_instance(1, 4, 91).pop().unwrap());

    // Regression-oracle datamodel for the single target.
    let mut masks = sample_subsets(n, 150, 0.34, 3).unwrap();
    masks.extend(sample_subsets(n, 150, 0.67, 4).unwrap());
    let records = collect_regression_data(
        &spec,
        &pool,
        std::slice::from_ref(&target),
        &masks,
        &cfg,
        Measurement::Loss,
        1,
    )
    .unwrap();
    let dm = fit_linear_datamodel(&records[0], 1e-4, "t").unwrap();
    let mean = selection::average_datamodels(std::slice::from_ref(&dm)).unwrap();
    let sel = selection::dsdm_select(&mean, k, "t").unwrap();
    let sel_mask = sel.mask(n);

    // Exhaustive ground truth: train on all 495 subsets.
    let mut losses = Vec::with_capacity(495);
    let mut sel_loss = None;
    let mut surrogate_best: Option<(Vec<usize>, f64)> = None;
    for combo in (0..n).combinations(k) {
        let mask = SubsetMask::from_indices(n, &combo);
        let params = predictors::train(&spec, &mask, &pool, &cfg).unwrap();
        let loss = predictors::loss(&spec, &params, &target.as_eval());
        if mask == sel_mask {
            sel_loss = Some(loss);
        }
        losses.push(loss);
        let surrogate = selection::estimate_target_loss(&mask, &mean);
        let better = match &surrogate_best {
            None => true,
            Some((_, best)) => surrogate < *best,
        };
        if better {
            surrogate_best = Some((combo, surrogate));
        }
    }
    assert_eq!(losses.len(), 495);
    let sel_loss = sel_loss.expect("selected subset must appear in the enumeration");
    let mut sorted = losses.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let cutoff = sorted[(sorted.len() / 10) - 1]; // best 10% boundary
    assert!(
        sel_loss <= cutoff,
        "selected subset loss {sel_loss} above best-10% cutoff {cutoff}"
    );

    // And dsdm_select must equal the exact argmin of the linear surrogate.
    let (argmin, _) = surrogate_best.unwrap();
    assert_eq!(sel.indices, argmin, "dsdm_select differs from enumerated surrogate argmin");
    let rank = sorted.iter().filter(|&&l| l < sel_loss).count();
    pass(6, format!("selected subset ranks {}/495 by true loss; surrogate argmin matches", rank + 1));
}

// ---------------------------------------------------------------------------
// 7. Desk-scale qualitative reproduction: DsDm vs Random (and baselines)
// ---------------------------------------------------------------------------

fn planted_spec(seed: u64) -> SyntheticPoolSpec {
    SyntheticPoolSpec {
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
        seed,
    }
}

#[test]
fn acceptance_07_dsdm_beats_random() {
    let spec = planted_spec(11);
    let (pool, target, holdout) = harness::make_synthetic_pool(&spec).unwrap();
    let k = 50;
    let proxy = PredictorSpec::TinySoftmaxLm {
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
    // Equal-total-tokens deployment budget: 320k tokens at k=50 gives
    // 400 epochs of the 800-token selection, i.e. 800 SGD steps.
    let deploy_train = TrainConfig { steps: 800, ..proxy_train.clone() };

    let eval_selection = |mask: &SubsetMask, seed: u64| -> f64 {
        let cfg = TrainConfig { seed, ..deploy_train.clone() };
        let params = predictors::train(&proxy, mask, &pool, &cfg).unwrap();
        eval::mean_log_probability(&proxy, &params, &holdout, false).unwrap().value
    };

    // DsDm.
    let trak_cfg = TrakConfig {
        num_models: 8,
        projection_dim: 256,
        subset_fraction: 0.38,
        ridge: None,
        seed: 7,
        train: proxy_train.clone(),
    };
    let mean = harness::dsdm_mean_datamodel(&pool, &target, &proxy, &trak_cfg).unwrap();
    let dsdm_sel = selection::dsdm_select(&mean, k, "target").unwrap();
    let dsdm_score = eval_selection(&dsdm_sel.mask(pool.len()), 1);

    // 20 Random seeds.
    let random_scores: Vec<f64> = (0..20)
        .map(|s| {
            let sel = baselines::random_select(pool.len(), k, 5000 + s, "target").unwrap();
            eval_selection(&sel.mask(pool.len()), 100 + s)
        })
        .collect();
    let random_mean_10: f64 = random_scores[..10].iter().sum::<f64>() / 10.0;
    let beaten = random_scores.iter().filter(|&&r| dsdm_score > r).count();
    assert!(
        dsdm_score > random_mean_10,
        "DsDm {dsdm_score} vs mean of 10 Randoms {random_mean_10}"
    );
    assert!(beaten >= 18, "DsDm beats only {beaten}/20 random seeds");

    // DSIR and Classifier must land within the Random range or above.
    let random_min = random_scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let docs: Vec<Vec<corpus::TokenId>> =
        pool.examples.iter().map(|e| e.tokens.clone()).collect();
    let target_docs: Vec<Vec<corpus::TokenId>> =
        target.samples.iter().map(|s| s.full_sequence().0).collect();
    let featurizer = HashedNgramFeaturizer { n_max: 2, buckets: 512, hash_seed: 0 };
    let dsir_sel =
        baselines::dsir_select(&pool, &docs, &target_docs, &featurizer, 0.01, k, 2, "target")
            .unwrap();
    let dsir_score = eval_selection(&dsir_sel.mask(pool.len()), 3);
    let clf_cfg = TrainConfig {
        steps: 300,
        batch_size: 16,
        learning_rate: 0.05,
        weight_decay: 1e-4,
        seed: 0,
        subset_fraction: 1.0,
    };
    let clf_sel = baselines::classifier_select(
        &pool,
        &docs,
        &target_docs,
        &featurizer,
        12.0,
        Some(k),
        4,
        &clf_cfg,
        "target",
    )
    .unwrap();
    let clf_score = eval_selection(&clf_sel.mask(pool.len()), 5);
    assert!(dsir_score >= random_min, "DSIR {dsir_score} below random range {random_min}");
    assert!(clf_score >= random_min, "Classifier {clf_score} below random range {random_min}");

    pass(
        7,
        format!(
            "DsDm {dsdm_score:.3} vs Random mean {random_mean_10:.3}, beats {beaten}/20 seeds \
             (DSIR {dsir_score:.3}, Classifier {clf_score:.3})"
        ),
    );
}

// ---------------------------------------------------------------------------
// 8. DSIR distribution matching across seeds
// ---------------------------------------------------------------------------

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum()
}

#[test]
fn acceptance_08_dsir_distribution_matching() {
    let spec = SyntheticPoolSpec {
        n_subpopulations: 2,
        examples_per_subpopulation: 80,
        target_subpopulations: vec![0],
        noise_examples: 40,
        ..planted_spec(23)
    };
    let (pool, target, _) = harness::make_synthetic_pool(&spec).unwrap();
    let k = 60;
    let featurizer = HashedNgramFeaturizer { n_max: 2, buckets: 512, hash_seed: 0 };
    let docs: Vec<Vec<corpus::TokenId>> =
        pool.examples.iter().map(|e| e.tokens.clone()).collect();
    let target_docs: Vec<Vec<corpus::TokenId>> =
        target.samples.iter().map(|s| s.full_sequence().0).collect();
    let p_target =
        baselines::fit_ngram_distribution(&target_docs, &featurizer, 0.01).unwrap();

    let dist_of = |indices: &[usize]| {
        let subset: Vec<Vec<corpus::TokenId>> =
            indices.iter().map(|&i| docs[i].clone()).collect();
        baselines::fit_ngram_distribution(&subset, &featurizer, 0.01).unwrap()
    };

    let mut wins = 0;
    for seed in 0..20 {
        let dsir =
            baselines::dsir_select(&pool, &docs, &target_docs, &featurizer, 0.01, k, seed, "t")
                .unwrap();
        let rand = baselines::random_select(pool.len(), k, 900 + seed, "t").unwrap();
        let kl_dsir = kl(&p_target.gamma, &dist_of(&dsir.indices).gamma);
        let kl_rand = kl(&p_target.gamma, &dist_of(&rand.indices).gamma);
        if kl_dsir < kl_rand {
            wins += 1;
        }
    }
    assert!(wins >= 19, "DSIR closer to target in only {wins}/20 seeds");
    pass(8, format!("DSIR KL to target beats random in {wins}/20 seeds"));
}

// ---------------------------------------------------------------------------
// 9. Classifier Lomax acceptance statistics
// ---------------------------------------------------------------------------

#[test]
fn acceptance_09_lomax_statistics() {
    let sampler = LomaxSampler { alpha: 12.0, seed: 0 };
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let draws: Vec<f64> = (0..100_000).map(|_| sampler.sample(&mut rng)).collect();
    for score in [0.2f64, 0.5, 0.9] {
        let threshold = 1.0 - score;
        let expected = (1.0 + threshold).powf(-12.0);
        let observed =
            draws.iter().filter(|&&d| d > threshold).count() as f64 / draws.len() as f64;
        let rel = (observed - expected).abs() / expected;
        assert!(
            rel <= 0.10,
            "score {score}: observed {observed:.6} vs expected {expected:.6} ({rel:.1}% rel)"
        );
    }

    // MLE shape recovery on planted data.
    let planted = LomaxSampler { alpha: 5.0, seed: 0 };
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let scores: Vec<f64> = (0..10_000)
        .map(|_| (1.0 - planted.sample(&mut rng)).clamp(0.0, 1.0))
        .collect();
    let alpha_hat = baselines::fit_lomax_alpha(&scores).unwrap();
    assert!((alpha_hat - 5.0).abs() <= 0.5, "alpha_hat = {alpha_hat}");
    pass(9, format!("Lomax Monte Carlo within 10% at three scores; alpha_hat = {alpha_hat:.3}"));
}

// ---------------------------------------------------------------------------
// 10. Finite-difference gradient checks for every predictor variant
// ---------------------------------------------------------------------------

#[test]
fn acceptance_10_gradient_checks() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    // 10 logistic instances.
    for trial in 0..10 {
        let triplets = logistic_instance(5, 4, 100 + trial);
        let spec = logistic_spec(triplets.clone());
        let mut params = predictors::train(
            &spec,
            &SubsetMask::full(5),
            &dummy_pool(5),
            &TrainConfig { steps: 5, batch_size: 5, ..convex_cfg(5, 5) },
        )
        .unwrap();
        for v in params.theta.iter_mut() {
            *v += rng.gen_range(-0.5..0.5);
        }
        let z = EvalPoint::Logistic(&triplets[0]);
        check_gradient(&spec, &params, &z);
        checked += 1;
    }
    // 10 LM instances.
    for trial in 0..10 {
        let vocab = 7;
        let spec = PredictorSpec::TinySoftmaxLm { vocab_size: vocab, context_len: 6, hidden_dim: 3 };
        let pool = CandidatePool {
            examples: (0..4)
                .map(|id| Example {
                    id,
                    tokens: (0..6).map(|_| rng.gen_range(0..vocab as u32)).collect(),
                    text: None,
                })
                .collect(),
            chunk_len: 6,
            vocab_size: vocab,
        };
        let params = predictors::train(
            &spec,
            &SubsetMask::full(4),
            &pool,
            &TrainConfig {
                steps: 10,
                batch_size: 4,
                learning_rate: 0.1,
                weight_decay: 0.0,
                seed: 200 + trial,
                subset_fraction: 1.0,
            },
        )
        .unwrap();
        let tokens = pool.examples[0].tokens.clone();
        let z = EvalPoint::Sequence { tokens: &tokens, continuation_start: 3 };
        check_gradient(&spec, &params, &z);
        checked += 1;
    }
    assert_eq!(checked, 20);
    pass(10, "20/20 finite-difference gradient checks below 1e-4 relative error".into());
}

fn check_gradient(spec: &PredictorSpec, params: &predictors::ModelParams, z: &EvalPoint<'_>) {
    let grad = predictors::grad_output(spec, params, z);
    let h = 1e-5;
    let mut fd = vec![0.0; grad.len()];
    let mut p = params.clone();
    for i in 0..grad.len() {
        let orig = p.theta[i];
        p.theta[i] = orig + h;
        let up = predictors::output(spec, &p, z);
        p.theta[i] = orig - h;
        let down = predictors::output(spec, &p, z);
        p.theta[i] = orig;
        fd[i] = (up - down) / (2.0 * h);
    }
    let num: f64 =
        grad.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let denom: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-8);
    let rel = num / denom;
    assert!(rel < 1e-4, "finite-difference relative error {rel:e}");
}

// ---------------------------------------------------------------------------
// 11. Determinism of selectors, estimators, and the harness
// ---------------------------------------------------------------------------

#[test]
fn acceptance_11_determinism() {
    // Selector/estimator-level checks on a shared small instance.
    let spec = SyntheticPoolSpec {
        examples_per_subpopulation: 20,
        noise_examples: 20,
        chunk_len: 12,
        vocab_size: 24,
        target_samples: 6,
        holdout_samples: 6,
        ..planted_spec(3)
    };
    let (pool, target, _) = harness::make_synthetic_pool(&spec).unwrap();
    let docs: Vec<Vec<corpus::TokenId>> =
        pool.examples.iter().map(|e| e.tokens.clone()).collect();
    let target_docs: Vec<Vec<corpus::TokenId>> =
        target.samples.iter().map(|s| s.full_sequence().0).collect();
    let f = HashedNgramFeaturizer { n_max: 2, buckets: 256, hash_seed: 1 };
    let a = baselines::dsir_select(&pool, &docs, &target_docs, &f, 0.01, 15, 5, "t").unwrap();
    let b = baselines::dsir_select(&pool, &docs, &target_docs, &f, 0.01, 15, 5, "t").unwrap();
    assert_eq!(a, b, "dsir_select not deterministic");

    let proxy = PredictorSpec::TinySoftmaxLm {
        vocab_size: pool.vocab_size,
        context_len: pool.chunk_len,
        hidden_dim: 4,
    };
    let trak_cfg = TrakConfig {
        num_models: 2,
        projection_dim: 32,
        subset_fraction: 0.5,
        ridge: None,
        seed: 77,
        train: TrainConfig { steps: 60, batch_size: 8, ..convex_cfg(8, 60) },
    };
    let m1 = harness::dsdm_mean_datamodel(&pool, &target, &proxy, &trak_cfg).unwrap();
    let m2 = harness::dsdm_mean_datamodel(&pool, &target, &proxy, &trak_cfg).unwrap();
    assert_eq!(m1, m2, "TRAK pipeline not deterministic");

    // Harness-level: identical configs produce byte-identical tables.
    let dir = tempfile::tempdir().unwrap();
    let cfg = harness::ExperimentConfig {
        pool: harness::PoolSource::Synthetic { spec: spec.clone() },
        methods: vec![
            harness::MethodConfig::Dsdm {
                num_models: 2,
                projection_dim: 32,
                subset_fraction: 0.5,
            },
            harness::MethodConfig::Random {},
            harness::MethodConfig::Dsir { n_max: 2, buckets: 256, smoothing_alpha: 0.01 },
            harness::MethodConfig::Classifier { n_max: 2, buckets: 256, alpha: 12.0 },
            harness::MethodConfig::Semdedup { n_clusters: 4 },
        ],
        ks: vec![15],
        proxy: harness::PredictorConfig {
            hidden_dim: 4,
            train: TrainConfig { steps: 60, batch_size: 8, ..convex_cfg(8, 60) },
        },
        deployment: harness::PredictorConfig {
            hidden_dim: 4,
            train: TrainConfig { steps: 60, batch_size: 8, ..convex_cfg(8, 60) },
        },
        epochs: harness::EpochMode::Fixed { epochs: 3 },
        seed: 99,
        output_dir: dir.path().to_path_buf(),
    };
    harness::run_experiment(&cfg).unwrap();
    let files = ["results.csv", "results.json", "manifest.json"];
    let first: Vec<Vec<u8>> =
        files.iter().map(|f| std::fs::read(dir.path().join(f)).unwrap()).collect();
    harness::run_experiment(&cfg).unwrap();
    for (f, before) in files.iter().zip(&first) {
        let after = std::fs::read(dir.path().join(f)).unwrap();
        assert_eq!(&after, before, "{f} differs between identical runs");
    }
    pass(11, "selectors, TRAK pipeline, and experiment outputs bit-identical across reruns".into());
}

// ---------------------------------------------------------------------------
// 12. Leakage check worked examples plus growth monotonicity
// ---------------------------------------------------------------------------

#[test]
fn acceptance_12_leakage_suite() {
    // Worked example 1: case/whitespace-insensitive substring match.
    let text_pool = |texts: &[&str]| CandidatePool {
        examples: texts
            .iter()
            .enumerate()
            .map(|(i, t)| Example { id: i, tokens: vec![0, 0], text: Some((*t).into()) })
            .collect(),
        chunk_len: 2,
        vocab_size: 2,
    };
    let text_sample = |ctx: &str, cont: &str| TargetSample {
        context: vec![0],
        continuation: vec![0],
        context_text: Some(ctx.into()),
        continuation_text: Some(cont.into()),
    };
    let pool = text_pool(&["xxabcyydefzz"]);
    let task = TargetTask::new("t", vec![text_sample("A B c", "def")]);
    assert_eq!(corpus::leakage_check(&task, &pool), vec![(0, 0)]);

    // Worked example 2: both context and continuation must appear.
    let absent = TargetTask::new("t", vec![text_sample("abc", "qq")]);
    assert!(corpus::leakage_check(&absent, &pool).is_empty());
    let ctx_absent = TargetTask::new("t", vec![text_sample("zzz", "def")]);
    assert!(corpus::leakage_check(&ctx_absent, &pool).is_empty());

    // Worked example 3: token-containment fallback without text.
    let tok_pool = CandidatePool {
        examples: vec![Example { id: 0, tokens: vec![7, 1, 2, 3, 9], text: None }],
        chunk_len: 5,
        vocab_size: 16,
    };
    let tok_task = TargetTask::new(
        "t",
        vec![TargetSample {
            context: vec![1, 2],
            continuation: vec![3],
            context_text: None,
            continuation_text: None,
        }],
    );
    assert_eq!(corpus::leakage_check(&tok_task, &tok_pool), vec![(0, 0)]);

    // Fuzz: appending pool examples never removes a reported leak.
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for _ in 0..50 {
        let n_samples = rng.gen_range(1..4);
        let samples: Vec<TargetSample> = (0..n_samples)
            .map(|_| TargetSample {
                context: (0..rng.gen_range(1..4)).map(|_| rng.gen_range(0..6)).collect(),
                continuation: (0..rng.gen_range(1..3)).map(|_| rng.gen_range(0..6)).collect(),
                context_text: None,
                continuation_text: None,
            })
            .collect();
        let task = TargetTask::new("t", samples);
        let mut examples: Vec<Example> = Vec::new();
        let mut prev_leaks = 0;
        for grow in 0..6 {
            examples.push(Example {
                id: grow,
                tokens: (0..8).map(|_| rng.gen_range(0..6)).collect(),
                text: None,
            });
            let pool = CandidatePool {
                examples: examples.clone(),
                chunk_len: 8,
                vocab_size: 6,
            };
            let leaks = corpus::leakage_check(&task, &pool).len();
            assert!(
                leaks >= prev_leaks,
                "leak count dropped from {prev_leaks} to {leaks} as the pool grew"
            );
            prev_leaks = leaks;
        }
    }
    pass(12, "three worked leakage examples pass; leak count monotone under pool growth".into());
}
