use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(String, String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("graph contains a cycle through `{0}`")]
    Cycle(String),
    #[error("node sets overlap on `{0}`")]
    OverlappingSets(String),
    #[error("invalid do-calculus rule {0} (expected 1, 2 or 3)")]
    InvalidRule(u8),
    #[error("missing required node `{0}`")]
    MissingNode(String),
    #[error("graph does not match the expected structure: {0}")]
    GraphMismatch(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("assignment conflict: {0}")]
    AssignmentConflict(String),
    #[error("zero-probability conditioning event: {0}")]
    ZeroProbability(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degenerate support: {0}")]
    DegenerateSupport(String),
    #[error("non-finite value in `{0}`")]
    NonFinite(String),

    #[error("invalid trigger: {0}")]
    InvalidTrigger(String),
    #[error("invalid posterior: {0}")]
    InvalidPosterior(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("enumeration bound exceeded: {0} terms (limit {1})")]
    EnumerationBound(usize, usize),
    #[error("position {0} out of range for length {1}")]
    PositionOutOfRange(usize, usize),
    #[error("count mismatch: {0}")]
    CountMismatch(String),

    #[error("empty corpus")]
    EmptyCorpus,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown instance id `{0}`")]
    UnknownInstance(String),
    #[error("insufficient instances: {0}")]
    Insufficient(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
