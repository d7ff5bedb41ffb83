use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("degenerate chunk length")]
    DegenerateChunkLength,
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("training diverged at step {step}")]
    Divergence { step: usize },
    #[error("empty subset size")]
    EmptySubsetSize,
    #[error("rank-deficient regression; increase samples or ridge")]
    RankDeficientRegression,
    #[error("singular gram matrix; add ridge")]
    SingularGram,
    #[error("degenerate design; add l2 regularization to training")]
    DegenerateDesign,
    #[error("non-finite gradient for example {id}")]
    NonFiniteGradient { id: usize },
    #[error("unsmoothed zero; set smoothing_alpha > 0")]
    UnsmoothedZero,
    #[error("degenerate: zero residuals")]
    ZeroResiduals,
    #[error("zero-norm embedding for example {id}")]
    ZeroNormEmbedding { id: usize },
    #[error("instance too large for exhaustive oracle")]
    EnumerationCapExceeded,
    #[error("selection size {k} out of range for pool of {pool}")]
    SelectionSizeOutOfRange { k: usize, pool: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no samples")]
    NoSamples,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad file format: {0}")]
    BadFormat(String),
    #[error("{context}: {source}")]
    Stage {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn with_context(self, context: impl Into<String>) -> Self {
        Error::Stage {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
