use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity exceeded: {what} needs dimension {needed}, limit is {limit}")]
    Capacity {
        what: &'static str,
        needed: String,
        limit: usize,
    },

    #[error("invalid spin-chain spec: {0}")]
    InvalidSpec(String),

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("excited state lost orthogonality to the ground state (overlap {overlap:e})")]
    OrthogonalityLoss { overlap: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid quantum state: {0}")]
    InvalidState(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("too few points: need at least {needed}, got {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("no overlap between series in the scaling variable")]
    NoOverlap,

    #[error("bad basis label `{0}`")]
    BadLabel(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("sweep aborted: {failed} of {total} points failed")]
    SweepAborted { failed: usize, total: usize },

    #[error("bad configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn capacity(what: &'static str, needed: impl ToString, limit: usize) -> Self {
        Error::Capacity {
            what,
            needed: needed.to_string(),
            limit,
        }
    }
}
