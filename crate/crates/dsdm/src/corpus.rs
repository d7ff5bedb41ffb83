//! Candidate pool and target task construction, persistence, and the
//! train-test leakage check.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type TokenId = u32;

/// One fixed-length pool slice. `raw_text` is retained only so the leakage
/// check and reports can work in string mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: usize,
    pub tokens: Vec<TokenId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

/// The ordered set of candidate training examples.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    pub examples: Vec<Example>,
    pub chunk_len: usize,
    pub vocab_size: usize,
}

impl CandidatePool {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.examples.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        for (i, ex) in self.examples.iter().enumerate() {
            if ex.id != i {
                return Err(Error::BadFormat(format!("non-dense example id {} at {i}", ex.id)));
            }
            if ex.tokens.len() != self.chunk_len {
                return Err(Error::BadFormat(format!(
                    "example {i} has length {} but chunk_len is {}",
                    ex.tokens.len(),
                    self.chunk_len
                )));
            }
            if ex.tokens.iter().any(|&t| t as usize >= self.vocab_size) {
                return Err(Error::BadFormat(format!("example {i} has token >= vocab_size")));
            }
        }
        Ok(())
    }
}

/// One target sample: generate `continuation` given `context`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSample {
    pub context: Vec<TokenId>,
    pub continuation: Vec<TokenId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuation_text: Option<String>,
}

impl TargetSample {
    /// Context and continuation concatenated, with the index where the
    /// continuation begins.
    pub fn full_sequence(&self) -> (Vec<TokenId>, usize) {
        let mut seq = self.context.clone();
        let start = seq.len();
        seq.extend_from_slice(&self.continuation);
        (seq, start)
    }
}

/// A target distribution sample set; `weight` matters only inside mixtures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetTask {
    pub name: String,
    pub samples: Vec<TargetSample>,
    pub weight: f64,
}

impl TargetTask {
    pub fn new(name: impl Into<String>, samples: Vec<TargetSample>) -> Self {
        Self { name: name.into(), samples, weight: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::NoSamples);
        }
        if self.samples.iter().any(|s| s.continuation.is_empty()) {
            return Err(Error::BadFormat("target sample with empty continuation".into()));
        }
        if !(self.weight > 0.0) {
            return Err(Error::InvalidConfig("task weight must be positive".into()));
        }
        Ok(())
    }
}

/// Concatenate documents with `eot_token` separators and slice the result
/// into consecutive chunks of exactly `chunk_len` tokens. A trailing
/// remainder shorter than `chunk_len` is dropped.
pub fn tokenize_and_chunk(
    corpus: &[Vec<TokenId>],
    chunk_len: usize,
    eot_token: TokenId,
    vocab_size: usize,
) -> Result<CandidatePool> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if chunk_len < 2 {
        return Err(Error::DegenerateChunkLength);
    }
    if corpus.iter().any(|d| d.is_empty()) {
        return Err(Error::BadFormat("empty document in corpus".into()));
    }
    let mut stream: Vec<TokenId> = Vec::new();
    for (i, doc) in corpus.iter().enumerate() {
        if i > 0 {
            stream.push(eot_token);
        }
        stream.extend_from_slice(doc);
    }
    let n_chunks = stream.len() / chunk_len;
    if n_chunks == 0 {
        eprintln!(
            "warning: corpus of {} tokens shorter than chunk_len {chunk_len}; pool is empty",
            stream.len()
        );
    }
    let examples = (0..n_chunks)
        .map(|i| Example {
            id: i,
            tokens: stream[i * chunk_len..(i + 1) * chunk_len].to_vec(),
            text: None,
        })
        .collect();
    let pool = CandidatePool { examples, chunk_len, vocab_size };
    if !pool.is_empty() {
        pool.validate()?;
    }
    Ok(pool)
}

fn normalize(text: &str) -> String {
    text.chars()
        .filter(|c| !c.is_whitespace())
        .flat_map(|c| c.to_lowercase())
        .collect()
}

fn tokens_contain(haystack: &[TokenId], needle: &[TokenId]) -> bool {
    if needle.is_empty() {
        return true;
    }
    haystack.windows(needle.len()).any(|w| w == needle)
}

/// Report every (target sample, pool example) pair where both the sample's
/// context and its continuation occur inside the same pool example. String
/// mode compares texts after lowercasing and stripping all whitespace;
/// token mode falls back to contiguous token-subsequence containment. The
/// two matches are tested independently and need not be contiguous.
pub fn leakage_check(task: &TargetTask, pool: &CandidatePool) -> Vec<(usize, usize)> {
    let mut leaks = Vec::new();
    let pool_norm: Vec<Option<String>> = pool
        .examples
        .iter()
        .map(|ex| ex.text.as_deref().map(normalize))
        .collect();
    for (si, sample) in task.samples.iter().enumerate() {
        let string_mode = sample.context_text.is_some() && sample.continuation_text.is_some();
        let (ctx_norm, cont_norm) = if string_mode {
            (
                normalize(sample.context_text.as_deref().unwrap()),
                normalize(sample.continuation_text.as_deref().unwrap()),
            )
        } else {
            (String::new(), String::new())
        };
        for (pi, ex) in pool.examples.iter().enumerate() {
            let leaked = if string_mode {
                match &pool_norm[pi] {
                    Some(text) => text.contains(&ctx_norm) && text.contains(&cont_norm),
                    None => false,
                }
            } else {
                tokens_contain(&ex.tokens, &sample.context)
                    && tokens_contain(&ex.tokens, &sample.continuation)
            };
            if leaked {
                leaks.push((si, ex.id));
            }
        }
    }
    leaks
}

#[derive(Serialize, Deserialize)]
struct PoolHeader {
    chunk_len: usize,
    vocab_size: usize,
}

/// Line-delimited JSON: a header record then one record per example.
pub fn save_pool(pool: &CandidatePool, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(
        &mut w,
        &PoolHeader { chunk_len: pool.chunk_len, vocab_size: pool.vocab_size },
    )?;
    w.write_all(b"\n")?;
    for ex in &pool.examples {
        serde_json::to_writer(&mut w, ex)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn load_pool(path: &Path) -> Result<CandidatePool> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut lines = r.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::BadFormat("missing pool header".into()))??;
    let header: PoolHeader = serde_json::from_str(&header_line)?;
    let mut examples = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        examples.push(serde_json::from_str::<Example>(&line)?);
    }
    let pool = CandidatePool {
        examples,
        chunk_len: header.chunk_len,
        vocab_size: header.vocab_size,
    };
    pool.validate()?;
    Ok(pool)
}

/// Line-delimited JSON, one record per target sample.
pub fn save_task(task: &TargetTask, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for sample in &task.samples {
        serde_json::to_writer(&mut w, sample)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn load_task(name: &str, path: &Path) -> Result<TargetTask> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut samples = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        samples.push(serde_json::from_str::<TargetSample>(&line)?);
    }
    let task = TargetTask::new(name, samples);
    task.validate()?;
    Ok(task)
}
