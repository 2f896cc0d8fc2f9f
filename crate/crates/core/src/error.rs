use thiserror::Error;

/// Errors produced anywhere in the planning toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("singular geometry: receiver coincides with transmitter")]
    SingularGeometry,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("activity probability exceeds 1 ({0})")]
    ActivityProbability(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("integration did not converge: {0}")]
    NonConvergence(String),

    #[error("fit failed for band {band}: {source}")]
    BandFit {
        band: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("underdetermined fit: {0}")]
    Underdetermined(String),

    #[error("infeasible assignment: {0}")]
    InfeasibleAssignment(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("enumeration too large: {size} exceeds cap {cap}")]
    EnumerationCap { size: f64, cap: f64 },

    #[error("demands cannot be covered: {0}")]
    Uncoverable(String),

    #[error("empty plan")]
    EmptyPlan,

    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("monte-carlo iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
