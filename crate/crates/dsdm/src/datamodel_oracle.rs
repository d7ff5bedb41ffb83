//! The exact (expensive) datamodel estimator: sample training subsets,
//! retrain per subset, record target losses, and fit linear datamodels by
//! ridge-regularized least squares.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::CandidatePool;
use crate::linalg::Cholesky;
use crate::predictors::{self, PredictorSpec, TargetExample, TrainConfig};
use crate::{Error, Result};

/// Characteristic bit vector over the candidate pool.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubsetMask {
    bits: Vec<bool>,
}

impl SubsetMask {
    pub fn empty(len: usize) -> Self {
        Self { bits: vec![false; len] }
    }

    pub fn full(len: usize) -> Self {
        Self { bits: vec![true; len] }
    }

    pub fn from_indices(len: usize, indices: &[usize]) -> Self {
        let mut mask = Self::empty(len);
        for &i in indices {
            mask.bits[i] = true;
        }
        mask
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = value;
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn indices(&self) -> Vec<usize> {
        self.iter_ones().collect()
    }

    /// The mask as a 0/1 real vector.
    pub fn as_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    pub fn without(&self, i: usize) -> Self {
        let mut out = self.clone();
        out.bits[i] = false;
        out
    }
}

/// Which estimator produced a datamodel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorKind {
    Regression,
    Trak,
    InfluenceExact,
}

/// Linear datamodel for one target example: per-pool-example weights and a
/// scalar bias. Weights approximate the effect on the target loss of
/// including each pool example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Datamodel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub target_id: String,
    pub estimator: EstimatorKind,
}

impl Datamodel {
    /// `bias + weights^T 1_S`.
    pub fn predict(&self, mask: &SubsetMask) -> f64 {
        self.bias + mask.iter_ones().map(|i| self.weights[i]).sum::<f64>()
    }
}

/// One (train subset, realized loss) regression pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionRecord {
    pub mask: SubsetMask,
    pub loss: f64,
}

/// Draw `count` uniformly random subsets of exactly `round(alpha * pool_size)`
/// elements, deterministically in `seed`.
pub fn sample_subsets(
    pool_size: usize,
    count: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<SubsetMask>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig("subset fraction must be in (0,1)".into()));
    }
    if count == 0 {
        return Err(Error::InvalidConfig("need at least one subset".into()));
    }
    let size = (alpha * pool_size as f64).round() as usize;
    if size == 0 {
        return Err(Error::EmptySubsetSize);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let masks = (0..count)
        .map(|_| {
            let picked = rand::seq::index::sample(&mut rng, pool_size, size).into_vec();
            SubsetMask::from_indices(pool_size, &picked)
        })
        .collect();
    Ok(masks)
}

/// Whether regression records carry the training loss or the raw model
/// output on each target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measurement {
    Loss,
    Output,
}

/// Train once per mask and record the measurement on every target; the
/// number of trainings equals `masks.len()` regardless of target count.
/// Output is indexed `[target][mask]`. `algorithm_draws` averages that many
/// training seeds per mask (default callers pass 1).
pub fn collect_regression_data(
    spec: &PredictorSpec,
    pool: &CandidatePool,
    targets: &[TargetExample],
    masks: &[SubsetMask],
    cfg: &TrainConfig,
    measure: Measurement,
    algorithm_draws: usize,
) -> Result<Vec<Vec<RegressionRecord>>> {
    if masks.is_empty() {
        return Err(Error::InvalidConfig("no masks supplied".into()));
    }
    let draws = algorithm_draws.max(1);
    let mut records: Vec<Vec<RegressionRecord>> =
        targets.iter().map(|_| Vec::with_capacity(masks.len())).collect();
    for (mi, mask) in masks.iter().enumerate() {
        let mut totals = vec![0.0; targets.len()];
        for draw in 0..draws {
            let mut train_cfg = cfg.clone();
            train_cfg.seed = cfg
                .seed
                .wrapping_add(mi as u64)
                .wrapping_add((draw as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let params = predictors::train(spec, mask, pool, &train_cfg)
                .map_err(|e| e.with_context(format!("mask {mi}")))?;
            for (ti, target) in targets.iter().enumerate() {
                let z = target.as_eval();
                totals[ti] += match measure {
                    Measurement::Loss => predictors::loss(spec, &params, &z),
                    Measurement::Output => predictors::output(spec, &params, &z),
                };
            }
        }
        for (ti, total) in totals.iter().enumerate() {
            records[ti].push(RegressionRecord { mask: mask.clone(), loss: total / draws as f64 });
        }
    }
    Ok(records)
}

/// Least-squares fit of `loss ~ bias + weights^T 1_S` by normal equations,
/// with the ridge penalty applied to the weight block only.
pub fn fit_linear_datamodel(
    records: &[RegressionRecord],
    ridge: f64,
    target_id: impl Into<String>,
) -> Result<Datamodel> {
    if records.len() < 2 {
        return Err(Error::InvalidConfig("need at least two regression records".into()));
    }
    let n = records[0].mask.len();
    if records.iter().any(|r| r.mask.len() != n) {
        return Err(Error::LengthMismatch { left: n, right: 0 });
    }
    // Design matrix columns: intercept then the n mask entries.
    let dim = n + 1;
    let mut gram = Array2::<f64>::zeros((dim, dim));
    let mut rhs = Array1::<f64>::zeros(dim);
    let mut row = vec![0.0; dim];
    for rec in records {
        row[0] = 1.0;
        row[1..].copy_from_slice(&rec.mask.as_f64());
        for i in 0..dim {
            if row[i] == 0.0 {
                continue;
            }
            rhs[i] += row[i] * rec.loss;
            for j in i..dim {
                gram[(i, j)] += row[i] * row[j];
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            gram[(i, j)] = gram[(j, i)];
        }
    }
    for i in 1..dim {
        gram[(i, i)] += ridge;
    }
    let chol = Cholesky::new(gram.view()).map_err(|_| Error::RankDeficientRegression)?;
    let beta = chol.solve_vec(rhs.view());
    Ok(Datamodel {
        weights: beta.as_slice().unwrap()[1..].to_vec(),
        bias: beta[0],
        target_id: target_id.into(),
        estimator: EstimatorKind::Regression,
    })
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    mask_popcount: usize,
    mask_indices: Vec<usize>,
    target_id: String,
    loss: f64,
}

/// Persist one target's records as line-delimited JSON for resumable
/// collection.
pub fn save_records(
    records: &[RegressionRecord],
    target_id: &str,
    path: &Path,
) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for rec in records {
        let line = RecordLine {
            mask_popcount: rec.mask.popcount(),
            mask_indices: rec.mask.indices(),
            target_id: target_id.to_string(),
            loss: rec.loss,
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn load_records(path: &Path, pool_size: usize) -> Result<Vec<RegressionRecord>> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RecordLine = serde_json::from_str(&line)?;
        if rec.mask_indices.len() != rec.mask_popcount {
            return Err(Error::BadFormat("mask popcount mismatch".into()));
        }
        out.push(RegressionRecord {
            mask: SubsetMask::from_indices(pool_size, &rec.mask_indices),
            loss: rec.loss,
        });
    }
    Ok(out)
}
