//! Dataset selection with datamodels at desk scale.
//!
//! The toolkit estimates linear datamodels for small differentiable
//! predictors — exactly, by regressing realized losses on training-subset
//! masks, and efficiently, with the TRAK estimator over JL-projected
//! gradients — then selects training subsets by taking the examples with
//! the lowest averaged datamodel weight. Baseline selectors (random,
//! hashed n-gram importance resampling, a quality classifier with Lomax
//! acceptance, and semantic deduplication) and an end-to-end experiment
//! harness round out the comparison tooling.
//!
//! See the crate examples for runnable walkthroughs of each capability.

pub mod baselines;
pub mod corpus;
pub mod datamodel_oracle;
pub mod error;
pub mod eval;
pub mod harness;
pub mod linalg;
pub mod predictors;
pub mod selection;
pub mod stats;
pub mod trak;

pub use error::{Error, Result};
