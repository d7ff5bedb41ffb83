//! Metrics over trained models and datamodel estimators: mean
//! log-probability, accuracy variants, and the linear-datamodeling
//! agreement diagnostic.

use serde::{Deserialize, Serialize};

use crate::corpus::{TargetTask, TokenId};
use crate::datamodel_oracle::{Datamodel, RegressionRecord};
use crate::predictors::{self, EvalPoint, ModelParams, PredictorSpec};
use crate::stats;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    MeanLogProb,
    ExactMatch,
    MultipleChoice,
    SpearmanLds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: MetricKind,
    pub value: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_sample: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

impl MetricReport {
    fn new(metric: MetricKind, per_sample: Vec<f64>, keep_per_sample: bool) -> Self {
        let n = per_sample.len();
        let value = per_sample.iter().sum::<f64>() / n as f64;
        Self {
            metric,
            value,
            n,
            per_sample: keep_per_sample.then_some(per_sample),
            flag: None,
        }
    }
}

/// Per sample, the summed log correct-token probability over continuation
/// positions; the report value is the mean over samples.
pub fn mean_log_probability(
    spec: &PredictorSpec,
    params: &ModelParams,
    task: &TargetTask,
    keep_per_sample: bool,
) -> Result<MetricReport> {
    if task.samples.is_empty() {
        return Err(Error::NoSamples);
    }
    let per_sample = task
        .samples
        .iter()
        .map(|sample| {
            let (tokens, start) = sample.full_sequence();
            let z = EvalPoint::Sequence { tokens: &tokens, continuation_start: start.max(1) };
            predictors::correctness_probabilities(spec, params, &z)
                .per_position
                .iter()
                .map(|p| p.ln())
                .sum()
        })
        .collect();
    Ok(MetricReport::new(MetricKind::MeanLogProb, per_sample, keep_per_sample))
}

/// Greedy (argmax) decoding with ties broken toward the lowest token id.
pub fn greedy_decode(
    spec: &PredictorSpec,
    params: &ModelParams,
    context: &[TokenId],
    len: usize,
) -> Vec<TokenId> {
    let mut seq = context.to_vec();
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let probs = predictors::next_token_distribution(spec, params, &seq);
        let mut best = 0usize;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        out.push(best as TokenId);
        seq.push(best as TokenId);
    }
    out
}

/// Fraction of samples whose greedily decoded continuation matches the
/// label token for token.
pub fn exact_match_accuracy(
    spec: &PredictorSpec,
    params: &ModelParams,
    task: &TargetTask,
    keep_per_sample: bool,
) -> Result<MetricReport> {
    if task.samples.is_empty() {
        return Err(Error::NoSamples);
    }
    let per_sample = task
        .samples
        .iter()
        .map(|sample| {
            let decoded = greedy_decode(spec, params, &sample.context, sample.continuation.len());
            if decoded == sample.continuation {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Ok(MetricReport::new(MetricKind::ExactMatch, per_sample, keep_per_sample))
}

/// One multiple-choice question: pick among `choices` given `context`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceSample {
    pub context: Vec<TokenId>,
    pub choices: Vec<Vec<TokenId>>,
    pub gold: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceTask {
    pub name: String,
    pub samples: Vec<ChoiceSample>,
}

/// Picks the choice with the highest total log-probability given the
/// context; ties go to the lowest choice index.
pub fn multiple_choice_accuracy(
    spec: &PredictorSpec,
    params: &ModelParams,
    task: &ChoiceTask,
    keep_per_sample: bool,
) -> Result<MetricReport> {
    if task.samples.is_empty() {
        return Err(Error::NoSamples);
    }
    if task.samples.iter().any(|s| s.choices.len() < 2 || s.gold >= s.choices.len()) {
        return Err(Error::InvalidConfig("every sample needs >= 2 choices and a valid gold".into()));
    }
    let per_sample = task
        .samples
        .iter()
        .map(|sample| {
            let mut best = 0usize;
            let mut best_lp = f64::NEG_INFINITY;
            for (ci, choice) in sample.choices.iter().enumerate() {
                let mut tokens = sample.context.clone();
                let start = tokens.len();
                tokens.extend_from_slice(choice);
                let z = EvalPoint::Sequence { tokens: &tokens, continuation_start: start.max(1) };
                let lp: f64 = predictors::correctness_probabilities(spec, params, &z)
                    .per_position
                    .iter()
                    .map(|p| p.ln())
                    .sum();
                if lp > best_lp {
                    best_lp = lp;
                    best = ci;
                }
            }
            if best == sample.gold {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Ok(MetricReport::new(MetricKind::MultipleChoice, per_sample, keep_per_sample))
}

/// Spearman rank correlation between datamodel-predicted losses
/// `bias + weights^T 1_S` and realized losses on fresh held-out masks.
pub fn lds_spearman_weights(
    weights: &[f64],
    bias: f64,
    fresh_records: &[RegressionRecord],
) -> Result<MetricReport> {
    if fresh_records.len() < 5 {
        return Err(Error::InvalidConfig("need at least 5 fresh records".into()));
    }
    let predicted: Vec<f64> = fresh_records
        .iter()
        .map(|r| bias + r.mask.iter_ones().map(|i| weights[i]).sum::<f64>())
        .collect();
    let realized: Vec<f64> = fresh_records.iter().map(|r| r.loss).collect();
    let constant = predicted.windows(2).all(|w| w[0] == w[1])
        || realized.windows(2).all(|w| w[0] == w[1]);
    let (value, flag) = if constant {
        (0.0, Some("degenerate ranks".to_string()))
    } else {
        (stats::spearman(&predicted, &realized), None)
    };
    Ok(MetricReport {
        metric: MetricKind::SpearmanLds,
        value,
        n: fresh_records.len(),
        per_sample: None,
        flag,
    })
}

pub fn lds_spearman(dm: &Datamodel, fresh_records: &[RegressionRecord]) -> Result<MetricReport> {
    lds_spearman_weights(&dm.weights, dm.bias, fresh_records)
}
