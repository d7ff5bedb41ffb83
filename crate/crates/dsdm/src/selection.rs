//! Turning datamodels into dataset selections: averaging per-target
//! datamodels (optionally as a task mixture), the linear subset-loss
//! surrogate, arg-bot-k selection, and the exhaustive optimal-subset
//! oracle.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::corpus::CandidatePool;
use crate::datamodel_oracle::{Datamodel, SubsetMask};
use crate::predictors::{self, PredictorSpec, TargetExample, TrainConfig};
use crate::{Error, Result};

pub const DEFAULT_ENUMERATION_CAP: usize = 20_000;

/// A chosen subset with per-example scores and method provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: String,
    pub target: String,
    pub k: usize,
    /// Sorted, unique pool ids.
    pub indices: Vec<usize>,
    /// Score of each selected example, aligned with `indices`.
    pub scores: Vec<f64>,
}

impl SelectionResult {
    pub fn new(
        method: impl Into<String>,
        target: impl Into<String>,
        mut picks: Vec<(usize, f64)>,
    ) -> Self {
        picks.sort_by_key(|&(i, _)| i);
        Self {
            method: method.into(),
            target: target.into(),
            k: picks.len(),
            indices: picks.iter().map(|&(i, _)| i).collect(),
            scores: picks.iter().map(|&(_, s)| s).collect(),
        }
    }

    pub fn mask(&self, pool_size: usize) -> SubsetMask {
        SubsetMask::from_indices(pool_size, &self.indices)
    }
}

/// The averaged datamodel `(1/n) sum theta_x` driving selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanDatamodel {
    pub weights: Vec<f64>,
    pub n_targets: usize,
    pub task_weights: Option<Vec<f64>>,
}

/// Unweighted mean of per-target datamodel weights.
pub fn average_datamodels(dms: &[Datamodel]) -> Result<MeanDatamodel> {
    if dms.is_empty() {
        return Err(Error::NoSamples);
    }
    let n = dms[0].weights.len();
    let mut weights = vec![0.0; n];
    for dm in dms {
        if dm.weights.len() != n {
            return Err(Error::LengthMismatch { left: n, right: dm.weights.len() });
        }
        for (acc, w) in weights.iter_mut().zip(&dm.weights) {
            *acc += w;
        }
    }
    let inv = 1.0 / dms.len() as f64;
    weights.iter_mut().for_each(|w| *w *= inv);
    Ok(MeanDatamodel { weights, n_targets: dms.len(), task_weights: None })
}

/// Two-level mixture averaging: each task's datamodels are averaged within
/// the task first, then tasks are combined by their normalized weights, so
/// unequal per-task sample counts do not skew the mixture.
pub fn average_datamodels_mixture(tasks: &[(&[Datamodel], f64)]) -> Result<MeanDatamodel> {
    if tasks.is_empty() {
        return Err(Error::NoSamples);
    }
    if tasks.iter().any(|&(_, w)| !(w > 0.0)) {
        return Err(Error::InvalidConfig("task weights must be positive".into()));
    }
    let total: f64 = tasks.iter().map(|&(_, w)| w).sum();
    let mut combined: Option<Vec<f64>> = None;
    let mut n_targets = 0;
    let mut norm_weights = Vec::with_capacity(tasks.len());
    for &(dms, w) in tasks {
        let task_mean = average_datamodels(dms)?;
        n_targets += task_mean.n_targets;
        let frac = w / total;
        norm_weights.push(frac);
        match &mut combined {
            None => combined = Some(task_mean.weights.iter().map(|v| v * frac).collect()),
            Some(acc) => {
                if acc.len() != task_mean.weights.len() {
                    return Err(Error::LengthMismatch {
                        left: acc.len(),
                        right: task_mean.weights.len(),
                    });
                }
                for (a, v) in acc.iter_mut().zip(&task_mean.weights) {
                    *a += v * frac;
                }
            }
        }
    }
    Ok(MeanDatamodel {
        weights: combined.unwrap(),
        n_targets,
        task_weights: Some(norm_weights),
    })
}

/// The linear surrogate `1_S^T mean_weights`; bias terms are dropped since
/// constant shifts do not change the argmin over fixed-size subsets.
pub fn estimate_target_loss(mask: &SubsetMask, mean_dm: &MeanDatamodel) -> f64 {
    assert_eq!(mask.len(), mean_dm.weights.len(), "mask/datamodel length mismatch");
    mask.iter_ones().map(|i| mean_dm.weights[i]).sum()
}

/// Arg-bot-k of the mean datamodel weights, ties broken by lower index. By
/// linearity this is exactly the argmin of [`estimate_target_loss`] over
/// all size-k masks.
pub fn dsdm_select(
    mean_dm: &MeanDatamodel,
    k: usize,
    target: impl Into<String>,
) -> Result<SelectionResult> {
    let n = mean_dm.weights.len();
    if k == 0 || k > n {
        return Err(Error::SelectionSizeOutOfRange { k, pool: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        mean_dm.weights[a]
            .partial_cmp(&mean_dm.weights[b])
            .expect("non-finite datamodel weight")
            .then(a.cmp(&b))
    });
    let picks: Vec<(usize, f64)> =
        order[..k].iter().map(|&i| (i, mean_dm.weights[i])).collect();
    Ok(SelectionResult::new("dsdm", target, picks))
}

/// Exhaustive size-k oracle: train on every size-k subset with a fixed
/// seed, evaluate mean target loss, and return the minimizer. Ties break
/// to the lexicographically smallest index set, which is the enumeration
/// order.
pub fn brute_force_optimal(
    spec: &PredictorSpec,
    pool: &CandidatePool,
    targets: &[TargetExample],
    k: usize,
    cfg: &TrainConfig,
    cap: Option<usize>,
) -> Result<(SubsetMask, f64)> {
    let n = match spec {
        PredictorSpec::GeneralizedLogistic { features, .. } => features.len(),
        PredictorSpec::TinySoftmaxLm { .. } => pool.len(),
    };
    if k == 0 || k > n {
        return Err(Error::SelectionSizeOutOfRange { k, pool: n });
    }
    if targets.is_empty() {
        return Err(Error::NoSamples);
    }
    let cap = cap.unwrap_or(DEFAULT_ENUMERATION_CAP);
    if binomial(n, k) > cap as u128 {
        return Err(Error::EnumerationCapExceeded);
    }
    let mut best: Option<(SubsetMask, f64)> = None;
    for combo in (0..n).combinations(k) {
        let mask = SubsetMask::from_indices(n, &combo);
        let params = predictors::train(spec, &mask, pool, cfg)?;
        let loss = targets
            .iter()
            .map(|t| predictors::loss(spec, &params, &t.as_eval()))
            .sum::<f64>()
            / targets.len() as f64;
        let replace = match &best {
            None => true,
            Some((_, best_loss)) => loss < *best_loss,
        };
        if replace {
            best = Some((mask, loss));
        }
    }
    Ok(best.unwrap())
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u128::MAX / 2 {
            return u128::MAX;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel_oracle::EstimatorKind;
    use itertools::Itertools;

    fn dm(weights: Vec<f64>) -> Datamodel {
        Datamodel { weights, bias: 0.0, target_id: "t".into(), estimator: EstimatorKind::Trak }
    }

    #[test]
    fn averaging_is_arithmetic_mean() {
        let mean = average_datamodels(&[dm(vec![1.0, 3.0]), dm(vec![3.0, 5.0])]).unwrap();
        assert_eq!(mean.weights, vec![2.0, 4.0]);
        assert_eq!(mean.n_targets, 2);
    }

    #[test]
    fn single_datamodel_averages_to_itself() {
        let mean = average_datamodels(&[dm(vec![0.5, -1.0])]).unwrap();
        assert_eq!(mean.weights, vec![0.5, -1.0]);
    }

    #[test]
    fn mixture_uses_two_level_averaging() {
        let a = [dm(vec![0.0, 4.0])];
        let b = [dm(vec![2.0, 2.0]), dm(vec![4.0, 0.0])];
        let mean = average_datamodels_mixture(&[(&a, 1.0), (&b, 1.0)]).unwrap();
        assert_eq!(mean.weights, vec![1.5, 2.5]);
        assert_eq!(mean.task_weights, Some(vec![0.5, 0.5]));
    }

    #[test]
    fn mismatched_lengths_error() {
        assert!(average_datamodels(&[dm(vec![1.0]), dm(vec![1.0, 2.0])]).is_err());
    }

    #[test]
    fn surrogate_is_masked_inner_product() {
        let mean = MeanDatamodel {
            weights: vec![1.0, 2.0, 3.0, 4.0],
            n_targets: 1,
            task_weights: None,
        };
        assert_eq!(estimate_target_loss(&SubsetMask::from_indices(4, &[0, 2]), &mean), 4.0);
        assert_eq!(estimate_target_loss(&SubsetMask::empty(4), &mean), 0.0);
        assert_eq!(estimate_target_loss(&SubsetMask::full(4), &mean), 10.0);
    }

    #[test]
    fn dsdm_selects_smallest_weights() {
        let mean = MeanDatamodel {
            weights: vec![0.5, -0.2, 0.1, -0.7],
            n_targets: 1,
            task_weights: None,
        };
        let sel = dsdm_select(&mean, 2, "t").unwrap();
        assert_eq!(sel.indices, vec![1, 3]);
    }

    #[test]
    fn dsdm_full_k_takes_everything_and_ties_break_low() {
        let mean =
            MeanDatamodel { weights: vec![1.0, 1.0, 1.0], n_targets: 1, task_weights: None };
        assert_eq!(dsdm_select(&mean, 3, "t").unwrap().indices, vec![0, 1, 2]);
        assert_eq!(dsdm_select(&mean, 2, "t").unwrap().indices, vec![0, 1]);
        assert!(dsdm_select(&mean, 0, "t").is_err());
        assert!(dsdm_select(&mean, 4, "t").is_err());
    }

    #[test]
    fn dsdm_equals_enumerated_argmin_of_surrogate() {
        let mut rng_state = 88172645463325252u64;
        let mut next = move || {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state % 1000) as f64 / 500.0 - 1.0
        };
        let n = 10;
        let weights: Vec<f64> = (0..n).map(|_| next()).collect();
        let mean = MeanDatamodel { weights, n_targets: 1, task_weights: None };
        for k in [1, 3, 5] {
            let sel = dsdm_select(&mean, k, "t").unwrap();
            let best = (0..n)
                .combinations(k)
                .map(|c| {
                    let mask = SubsetMask::from_indices(n, &c);
                    (estimate_target_loss(&mask, &mean), c)
                })
                .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
                .unwrap();
            assert!((estimate_target_loss(&sel.mask(n), &mean) - best.0).abs() < 1e-12);
        }
    }

    #[test]
    fn selection_is_scale_invariant() {
        let weights = vec![0.4, -0.1, 0.9, -0.3, 0.0];
        let mean = MeanDatamodel { weights: weights.clone(), n_targets: 1, task_weights: None };
        let scaled = MeanDatamodel {
            weights: weights.iter().map(|w| w * 7.5).collect(),
            n_targets: 1,
            task_weights: None,
        };
        for k in 1..=5 {
            assert_eq!(
                dsdm_select(&mean, k, "t").unwrap().indices,
                dsdm_select(&scaled, k, "t").unwrap().indices
            );
        }
    }

    #[test]
    fn selections_nest_monotonically() {
        let mean = MeanDatamodel {
            weights: vec![0.3, -0.3, 0.1, 0.1, -0.5],
            n_targets: 1,
            task_weights: None,
        };
        for k in 1..5 {
            let small = dsdm_select(&mean, k, "t").unwrap();
            let big = dsdm_select(&mean, k + 1, "t").unwrap();
            assert!(small.indices.iter().all(|i| big.indices.contains(i)));
        }
    }

    #[test]
    fn binomial_counts() {
        assert_eq!(binomial(10, 3), 120);
        assert_eq!(binomial(12, 4), 495);
        assert_eq!(binomial(5, 5), 1);
    }

    #[test]
    fn selection_result_serializes_to_expected_json_shape() {
        let sel = SelectionResult::new("random", "t", vec![(3, 0.5), (1, 0.25)]);
        let v: serde_json::Value = serde_json::to_value(&sel).unwrap();
        assert_eq!(v["method"], "random");
        assert_eq!(v["k"], 2);
        assert_eq!(v["indices"], serde_json::json!([1, 3]));
        assert_eq!(v["scores"], serde_json::json!([0.25, 0.5]));
    }
}
