use thiserror::Error;

pub type Result<T> = std::result::Result<T, BridgeError>;

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("dimension d = {0} is not supported: S(V) = ∞ for every nontrivial V when d = 1 or 2, so only d ≥ 3 is meaningful")]
    LowDimension(u32),

    #[error("dimension mismatch: expected {expected} coordinates, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no symmetry reduction available: {0}")]
    UnsupportedReduction(String),

    #[error("potential has an unbounded positive part; the exponential path functional is not integrable")]
    UnboundedPositivePart,

    #[error("exponential path functional overflowed (time integral {0})")]
    Overflow(f64),

    #[error("unknown verification suite `{0}`")]
    UnknownSuite(String),

    #[error("growth diagnosis needs at least 4 strictly increasing radii, got {0}")]
    TooFewRadii(usize),

    #[error("malformed potential specification: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
