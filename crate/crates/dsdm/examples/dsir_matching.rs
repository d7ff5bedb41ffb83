//! DSIR importance resampling pulls the selected set's hashed n-gram
//! distribution toward the target's. This example measures that with KL
//! divergence against a random selection of the same size.

use dsdm::baselines::{self, HashedNgramFeaturizer};
use dsdm::corpus::TokenId;
use dsdm::harness::{self, SyntheticPoolSpec};

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum()
}

fn main() -> dsdm::Result<()> {
    let spec = SyntheticPoolSpec {
        n_subpopulations: 2,
        examples_per_subpopulation: 80,
        target_subpopulations: vec![0],
        noise_examples: 40,
        vocab_size: 32,
        chunk_len: 16,
        target_samples: 16,
        holdout_samples: 16,
        context_len: 8,
        continuation_len: 4,
        seed: 23,
    };
    let (pool, target, _) = harness::make_synthetic_pool(&spec)?;
    let k = 60;
    let featurizer = HashedNgramFeaturizer { n_max: 2, buckets: 512, hash_seed: 0 };
    let docs: Vec<Vec<TokenId>> = pool.examples.iter().map(|e| e.tokens.clone()).collect();
    let target_docs: Vec<Vec<TokenId>> =
        target.samples.iter().map(|s| s.full_sequence().0).collect();
    let p_target = baselines::fit_ngram_distribution(&target_docs, &featurizer, 0.01)?;

    let dist_of = |indices: &[usize]| {
        let subset: Vec<Vec<TokenId>> = indices.iter().map(|&i| docs[i].clone()).collect();
        baselines::fit_ngram_distribution(&subset, &featurizer, 0.01)
    };

    println!("{:<6} {:>12} {:>12}", "seed", "KL(dsir)", "KL(random)");
    for seed in 0..5 {
        let dsir =
            baselines::dsir_select(&pool, &docs, &target_docs, &featurizer, 0.01, k, seed, "t")?;
        let rand = baselines::random_select(pool.len(), k, 900 + seed, "t")?;
        println!(
            "{seed:<6} {:>12.4} {:>12.4}",
            kl(&p_target.gamma, &dist_of(&dsir.indices)?.gamma),
            kl(&p_target.gamma, &dist_of(&rand.indices)?.gamma),
        );
    }
    Ok(())
}
