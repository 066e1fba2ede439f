use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("missing column `{0}` in input header")]
    MissingColumn(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("{rejected} row(s) rejected (limit {limit}); first at row {row}, column `{column}`: value `{value}` is not in the declared domain")]
    UnknownCategory {
        row: usize,
        column: String,
        value: String,
        rejected: usize,
        limit: usize,
    },

    #[error("unknown attribute {0}")]
    UnknownAttribute(String),

    #[error("cluster label {label} out of range (|C| = {num_clusters})")]
    LabelOutOfRange { label: usize, num_clusters: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("histograms are over different domains")]
    DomainMismatch,

    #[error("cluster count {cluster} exceeds total count {total} in bin {bin}")]
    CountInversion {
        bin: usize,
        cluster: String,
        total: String,
    },

    #[error("scale must be positive, got {0}")]
    NonPositiveScale(f64),

    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),

    #[error("epsilon must be non-negative, got {0}")]
    NegativeEpsilon(f64),

    #[error("sensitivity must be positive, got {0}")]
    NonPositiveSensitivity(f64),

    #[error("empty candidate set")]
    EmptyCandidateSet,

    #[error("k = {k} exceeds the number of candidates ({candidates})")]
    KTooLarge { k: usize, candidates: usize },

    #[error("k must be at least 1")]
    ZeroK,

    #[error("attribute set is empty")]
    EmptyAttributeSet,

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid privacy budget: {0}")]
    InvalidBudget(String),

    #[error("search space of {size} combinations exceeds the limit of {limit}")]
    SearchSpaceTooLarge { size: f64, limit: f64 },

    #[error("label sets differ: {left} vs {right} clusters")]
    LabelSetMismatch { left: usize, right: usize },

    #[error("at least one cluster is required")]
    NoClusters,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
