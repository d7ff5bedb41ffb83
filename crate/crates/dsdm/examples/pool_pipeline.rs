//! Build a candidate pool from raw token documents, run the leakage check
//! against a target task, and round-trip everything through JSONL files.

use dsdm::corpus::{self, TargetSample, TargetTask};

fn main() -> dsdm::Result<()> {
    // Three "documents" over a 16-token vocabulary. Documents are joined
    // with an end-of-text separator and cut into fixed-length chunks; the
    // trailing remainder is dropped.
    let docs = vec![
        vec![1, 2, 3, 4, 5, 6, 7],
        vec![8, 9, 10, 11],
        vec![12, 13, 14, 15, 1, 2],
    ];
    let pool = corpus::tokenize_and_chunk(&docs, 4, 0, 16)?;
    println!("pool: {} chunks of length {}", pool.len(), pool.chunk_len);
    for ex in &pool.examples {
        println!("  chunk {}: {:?}", ex.id, ex.tokens);
    }

    // A target sample whose context AND continuation both appear inside a
    // pool chunk is flagged as leaked.
    let task = TargetTask::new(
        "demo",
        vec![
            TargetSample {
                context: vec![1, 2],
                continuation: vec![3],
                context_text: None,
                continuation_text: None,
            },
            TargetSample {
                context: vec![9, 9],
                continuation: vec![9],
                context_text: None,
                continuation_text: None,
            },
        ],
    );
    let leaks = corpus::leakage_check(&task, &pool);
    println!("leaked (sample, chunk) pairs: {leaks:?}");

    let dir = std::env::temp_dir().join("dsdm_pool_pipeline");
    std::fs::create_dir_all(&dir)?;
    corpus::save_pool(&pool, &dir.join("pool.jsonl"))?;
    corpus::save_task(&task, &dir.join("task.jsonl"))?;
    let reloaded = corpus::load_pool(&dir.join("pool.jsonl"))?;
    assert_eq!(reloaded, pool);
    println!("round-tripped pool through {}", dir.display());
    Ok(())
}
