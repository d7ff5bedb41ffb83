//! The efficient datamodel estimator: reference-model training, projected
//! gradient collection, per-model Q diagonals, the averaged TRAK score, and
//! the exact logistic influence-function oracle.

use std::io::{Read as IoRead, Write as IoWrite};
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::corpus::CandidatePool;
use crate::datamodel_oracle::{Datamodel, EstimatorKind, SubsetMask};
use crate::linalg::{add_ridge, Cholesky};
use crate::predictors::{
    self, EvalPoint, ModelParams, PredictorSpec, TargetExample, TrainConfig, Triplet,
};
use crate::{Error, Result};

/// How gradients are mapped into the `d`-dimensional score space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    /// i.i.d. standard normal `N x d` matrix regenerated from the seed on
    /// demand; never materialized in full.
    Gaussian { seed: u64 },
    /// Test hook: requires `d == N` and leaves gradients untouched.
    Identity,
}

impl Projection {
    pub fn seed(&self) -> u64 {
        match self {
            Projection::Gaussian { seed } => *seed,
            Projection::Identity => 0,
        }
    }
}

/// Projected gradients and Q diagonal for one reference model.
#[derive(Debug, Clone)]
pub struct GradientStore {
    pub model_index: usize,
    /// Row i = projected gradient of the output on pool example i.
    pub phi: Array2<f64>,
    /// Per-example `1 - correctness probability`.
    pub q_diag: Vec<f64>,
    pub projection: Projection,
}

impl GradientStore {
    pub fn pool_size(&self) -> usize {
        self.phi.nrows()
    }

    pub fn dim(&self) -> usize {
        self.phi.ncols()
    }
}

#[derive(Debug, Clone)]
pub struct TrakConfig {
    /// Number of reference models m.
    pub num_models: usize,
    /// Projection dimension d.
    pub projection_dim: usize,
    /// Fraction of the pool each reference model trains on.
    pub subset_fraction: f64,
    /// Ridge added to the projected gram matrix; `None` uses the default
    /// `1e-4 * trace(phi^T phi) / d`.
    pub ridge: Option<f64>,
    pub seed: u64,
    pub train: TrainConfig,
}

impl Default for TrakConfig {
    fn default() -> Self {
        Self {
            num_models: 4,
            projection_dim: 512,
            subset_fraction: 0.38,
            ridge: None,
            seed: 0,
            train: TrainConfig::default(),
        }
    }
}

impl TrakConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_models == 0 || self.projection_dim == 0 {
            return Err(Error::InvalidConfig("need m >= 1 and d >= 1".into()));
        }
        if !(self.subset_fraction > 0.0 && self.subset_fraction <= 1.0) {
            return Err(Error::InvalidConfig("subset_fraction must be in (0,1]".into()));
        }
        self.train.validate()
    }
}

/// Train `m` reference models, each on an independent seeded random subset
/// of size `round(subset_fraction * |pool|)`.
pub fn train_reference_models(
    spec: &PredictorSpec,
    pool: &CandidatePool,
    cfg: &TrakConfig,
) -> Result<Vec<ModelParams>> {
    cfg.validate()?;
    let n = match spec {
        PredictorSpec::GeneralizedLogistic { features, .. } => features.len(),
        PredictorSpec::TinySoftmaxLm { .. } => pool.len(),
    };
    let mut models = Vec::with_capacity(cfg.num_models);
    for k in 0..cfg.num_models {
        let mask = reference_subset(n, cfg.subset_fraction, cfg.seed, k)?;
        let mut train_cfg = cfg.train.clone();
        train_cfg.seed = cfg.seed.wrapping_mul(0x100_0193).wrapping_add(k as u64);
        let params = predictors::train(spec, &mask, pool, &train_cfg)
            .map_err(|e| e.with_context(format!("reference model {k}")))?;
        models.push(params);
    }
    Ok(models)
}

fn reference_subset(n: usize, fraction: f64, seed: u64, k: usize) -> Result<SubsetMask> {
    let size = ((fraction * n as f64).round() as usize).clamp(1, n);
    if size == n {
        return Ok(SubsetMask::full(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0xf5ee_d000 + k as u64));
    let picked = rand::seq::index::sample(&mut rng, n, size).into_vec();
    Ok(SubsetMask::from_indices(n, &picked))
}

/// Apply the projection to a single flat gradient.
pub fn project_vector(grad: &[f64], d: usize, projection: Projection) -> Vec<f64> {
    match projection {
        Projection::Identity => {
            assert_eq!(grad.len(), d, "identity projection requires d == N");
            grad.to_vec()
        }
        Projection::Gaussian { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = vec![0.0; d];
            for &g in grad {
                if g == 0.0 {
                    // Still consume this row's draws to stay aligned.
                    for _ in 0..d {
                        let _: f64 = rng.sample(StandardNormal);
                    }
                    continue;
                }
                for slot in out.iter_mut() {
                    let p: f64 = rng.sample(StandardNormal);
                    *slot += g * p;
                }
            }
            out
        }
    }
}

/// Project a whole batch of gradients with one pass over the projection
/// rows (the projection matrix is never stored).
fn project_batch(grads: &[Vec<f64>], d: usize, projection: Projection) -> Array2<f64> {
    let n = grads.len();
    let mut phi = Array2::<f64>::zeros((n, d));
    match projection {
        Projection::Identity => {
            for (i, g) in grads.iter().enumerate() {
                assert_eq!(g.len(), d, "identity projection requires d == N");
                for (j, &v) in g.iter().enumerate() {
                    phi[(i, j)] = v;
                }
            }
        }
        Projection::Gaussian { seed } => {
            let big_n = grads.first().map(|g| g.len()).unwrap_or(0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut row = vec![0.0; d];
            for r in 0..big_n {
                for slot in row.iter_mut() {
                    *slot = rng.sample(StandardNormal);
                }
                for (i, g) in grads.iter().enumerate() {
                    let gv = g[r];
                    if gv == 0.0 {
                        continue;
                    }
                    for (j, &pv) in row.iter().enumerate() {
                        phi[(i, j)] += gv * pv;
                    }
                }
            }
        }
    }
    phi
}

/// Collect the projected output gradients and the Q diagonal over the full
/// pool for one reference model.
pub fn project_gradients(
    spec: &PredictorSpec,
    params: &ModelParams,
    pool: &CandidatePool,
    d: usize,
    projection: Projection,
    model_index: usize,
) -> Result<GradientStore> {
    let n = match spec {
        PredictorSpec::GeneralizedLogistic { features, .. } => features.len(),
        PredictorSpec::TinySoftmaxLm { .. } => pool.len(),
    };
    let mut grads = Vec::with_capacity(n);
    let mut q_diag = Vec::with_capacity(n);
    for i in 0..n {
        let z = pool_point(spec, pool, i);
        let g = predictors::grad_output(spec, params, &z);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { id: i });
        }
        let probs = predictors::correctness_probabilities(spec, params, &z);
        q_diag.push(1.0 - probs.mean);
        grads.push(g);
    }
    Ok(GradientStore { model_index, phi: project_batch(&grads, d, projection), q_diag, projection })
}

fn pool_point<'a>(spec: &'a PredictorSpec, pool: &'a CandidatePool, i: usize) -> EvalPoint<'a> {
    match spec {
        PredictorSpec::GeneralizedLogistic { features, .. } => EvalPoint::Logistic(&features[i]),
        PredictorSpec::TinySoftmaxLm { .. } => EvalPoint::pool_sequence(&pool.examples[i].tokens),
    }
}

/// Per-store cached factor `(phi^T phi + lambda I)^{-1} phi^T`, shared
/// across targets.
struct StoreFactor {
    /// d x n
    factor: Array2<f64>,
}

/// TRAK scorer holding the expensive per-store factors; build once, score
/// many targets.
pub struct TrakScorer<'a> {
    spec: &'a PredictorSpec,
    models: &'a [ModelParams],
    stores: &'a [GradientStore],
    factors: Vec<StoreFactor>,
    q_bar: Vec<f64>,
}

impl<'a> TrakScorer<'a> {
    pub fn new(
        spec: &'a PredictorSpec,
        models: &'a [ModelParams],
        stores: &'a [GradientStore],
        ridge: Option<f64>,
    ) -> Result<Self> {
        if stores.is_empty() || stores.len() != models.len() {
            return Err(Error::InvalidConfig("need one gradient store per reference model".into()));
        }
        let n = stores[0].pool_size();
        let d = stores[0].dim();
        if stores.iter().any(|s| s.pool_size() != n || s.dim() != d) {
            return Err(Error::InvalidConfig("gradient stores disagree on shape".into()));
        }
        let mut factors = Vec::with_capacity(stores.len());
        for store in stores {
            let mut gram = store.phi.t().dot(&store.phi);
            let lambda = match ridge {
                Some(l) => l,
                None => {
                    let trace: f64 = (0..d).map(|i| gram[(i, i)]).sum();
                    1e-4 * trace / d as f64
                }
            };
            if lambda > 0.0 {
                add_ridge(&mut gram, lambda);
            }
            let chol = Cholesky::new(gram.view()).map_err(|_| Error::SingularGram)?;
            let factor = chol.solve_mat(store.phi.t().to_owned().view());
            factors.push(StoreFactor { factor });
        }
        let mut q_bar = vec![0.0; n];
        for store in stores {
            for (acc, &q) in q_bar.iter_mut().zip(&store.q_diag) {
                *acc += q;
            }
        }
        let m = stores.len() as f64;
        q_bar.iter_mut().for_each(|q| *q /= m);
        Ok(Self { spec, models, stores, factors, q_bar })
    }

    /// TRAK datamodel for one target. Weights follow the loss-direction
    /// sign convention: the averaged margin-space score is multiplied by
    /// the averaged Q diagonal and negated, so that lower weight means
    /// including the example lowers the target loss more. Bias is zero.
    pub fn score(&self, target: &TargetExample, target_id: impl Into<String>) -> Result<Datamodel> {
        let n = self.stores[0].pool_size();
        let m = self.stores.len();
        let mut row = Array1::<f64>::zeros(n);
        for (k, store) in self.stores.iter().enumerate() {
            let g = predictors::grad_output(self.spec, &self.models[k], &target.as_eval());
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient { id: usize::MAX });
            }
            let phi_z = Array1::from_vec(project_vector(&g, store.dim(), store.projection));
            row += &phi_z.dot(&self.factors[k].factor);
        }
        row /= m as f64;
        let weights: Vec<f64> =
            row.iter().zip(&self.q_bar).map(|(&a, &q)| -(a * q)).collect();
        Ok(Datamodel {
            weights,
            bias: 0.0,
            target_id: target_id.into(),
            estimator: EstimatorKind::Trak,
        })
    }
}

/// One-shot convenience wrapper around [`TrakScorer`].
pub fn trak_scores(
    target: &TargetExample,
    stores: &[GradientStore],
    spec: &PredictorSpec,
    models: &[ModelParams],
    ridge: Option<f64>,
    target_id: impl Into<String>,
) -> Result<Datamodel> {
    TrakScorer::new(spec, models, stores, ridge)?.score(target, target_id)
}

/// Exact logistic leave-one-out influence: the one-Newton-step estimate of
/// `f(z; train(S)) - f(z; train(S minus z_i))` for every pool triplet.
pub fn influence_logistic(
    target: &Triplet,
    triplets: &[Triplet],
    params: &ModelParams,
) -> Result<Vec<f64>> {
    let n = triplets.len();
    let dim = target.x.len();
    let mut r_diag = Vec::with_capacity(n);
    let mut one_minus_p = Vec::with_capacity(n);
    for t in triplets {
        let f: f64 = t.x.iter().zip(&params.theta).map(|(a, b)| a * b).sum::<f64>() + t.bias;
        let p = predictors::clamp_prob(1.0 / (1.0 + (-t.y * f).exp()));
        r_diag.push(p * (1.0 - p));
        one_minus_p.push(1.0 - p);
    }
    // Hessian X^T R X.
    let mut hess = Array2::<f64>::zeros((dim, dim));
    for (t, &r) in triplets.iter().zip(&r_diag) {
        for a in 0..dim {
            let ra = r * t.x[a];
            for b in a..dim {
                hess[(a, b)] += ra * t.x[b];
            }
        }
    }
    for a in 0..dim {
        for b in 0..a {
            hess[(a, b)] = hess[(b, a)];
        }
    }
    let chol = Cholesky::new(hess.view()).map_err(|_| Error::DegenerateDesign)?;
    let hx = chol.solve_vec(Array1::from_vec(target.x.clone()).view());
    let mut out = Vec::with_capacity(n);
    for (i, t) in triplets.iter().enumerate() {
        let numer: f64 = hx.iter().zip(&t.x).map(|(a, b)| a * b).sum();
        let hxi = chol.solve_vec(Array1::from_vec(t.x.clone()).view());
        let leverage: f64 = hxi.iter().zip(&t.x).map(|(a, b)| a * b).sum();
        let denom = 1.0 - leverage * r_diag[i];
        out.push(numer / denom * one_minus_p[i]);
    }
    Ok(out)
}

/// Leave-one-out datamodel built from an influence vector: weights are the
/// influences and the bias telescopes so the full mask evaluates to
/// `f_full` exactly.
pub fn loo_datamodel_from_influence(
    target_id: impl Into<String>,
    influence: &[f64],
    f_full: f64,
) -> Datamodel {
    let bias = f_full - influence.iter().sum::<f64>();
    Datamodel {
        weights: influence.to_vec(),
        bias,
        target_id: target_id.into(),
        estimator: EstimatorKind::InfluenceExact,
    }
}

const STORE_MAGIC: &[u8; 4] = b"TRKG";
const STORE_VERSION: u32 = 1;

/// Binary store format: header {magic "TRKG", version u32, n u64, d u64,
/// projection_seed u64} then `n*d` little-endian f32 phi entries row-major,
/// then `n` f32 q_diag entries. Identity-projection stores are a test hook
/// and are not persisted.
pub fn save_store(store: &GradientStore, path: &Path) -> Result<()> {
    let seed = match store.projection {
        Projection::Gaussian { seed } => seed,
        Projection::Identity => {
            return Err(Error::InvalidConfig("identity-projection stores are not persisted".into()))
        }
    };
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(STORE_MAGIC)?;
    w.write_all(&STORE_VERSION.to_le_bytes())?;
    w.write_all(&(store.pool_size() as u64).to_le_bytes())?;
    w.write_all(&(store.dim() as u64).to_le_bytes())?;
    w.write_all(&seed.to_le_bytes())?;
    for &v in store.phi.iter() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    for &v in &store.q_diag {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn load_store(path: &Path, model_index: usize) -> Result<GradientStore> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != STORE_MAGIC {
        return Err(Error::BadFormat("bad gradient store magic".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != STORE_VERSION {
        return Err(Error::BadFormat("unsupported gradient store version".into()));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let d = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let seed = u64::from_le_bytes(b8);
    let mut phi = Array2::<f64>::zeros((n, d));
    for i in 0..n {
        for j in 0..d {
            r.read_exact(&mut b4)?;
            phi[(i, j)] = f32::from_le_bytes(b4) as f64;
        }
    }
    let mut q_diag = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut b4)?;
        q_diag.push(f32::from_le_bytes(b4) as f64);
    }
    Ok(GradientStore { model_index, phi, q_diag, projection: Projection::Gaussian { seed } })
}
