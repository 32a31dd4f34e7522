use thiserror::Error;

/// Errors surfaced by the evaluation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("line {line}: {msg}")]
    Ingest { line: usize, msg: String },

    #[error("line {line}: duplicate question_id `{question_id}`")]
    DuplicateQuestion { line: usize, question_id: String },

    #[error("line {line}: class `{class_label}` of question `{question_id}` has no correctness label and no graded samples")]
    MissingCorrectness {
        line: usize,
        question_id: String,
        class_label: String,
    },

    #[error("index subset is empty")]
    EmptySubset,

    #[error("sample index {index} out of range (record has {len} samples)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("selection and evaluation blocks must be disjoint and non-empty")]
    InvalidBlocks,

    #[error("pool of {available} samples is too small for n+m={needed}")]
    PoolTooSmall { needed: usize, available: usize },

    #[error("no outcomes to bin")]
    EmptyOutcomes,

    #[error("invalid binning scheme: {0}")]
    InvalidBinning(String),

    #[error("eta must be positive")]
    NonPositiveEta,

    #[error("lambda must be non-negative, got {0}")]
    NegativeLambda(f64),

    #[error("tolerance must lie in (0, 1e-3], got {0}")]
    InvalidTolerance(f64),

    #[error("root bracket failure on [{0}, {1}]")]
    BracketFailure(f64, f64),

    #[error("enumeration would visit {outcomes} outcomes, over the cap {cap}; use Monte Carlo instead")]
    EnumerationCap { outcomes: u128, cap: u64 },

    #[error("invalid question: {0}")]
    InvalidQuestion(String),

    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),

    #[error("no records left to evaluate (all {0} excluded)")]
    EmptyEvaluationSet(usize),

    #[error("n grid point {n} exceeds the smallest record pool {pool}")]
    GridExceedsPool { n: usize, pool: usize },

    #[error("empty margin window [{lo:.6}, {hi:.6}]")]
    EmptyWindow { lo: f64, hi: f64 },

    #[error("not enough data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
