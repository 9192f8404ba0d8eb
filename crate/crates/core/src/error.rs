use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("objective returned non-finite value {value} at {point:?}")]
    NonFiniteObjective { point: Vec<f64>, value: f64 },

    #[error("objective `{name}` returned {value} below its declared minimum {f_min} at {point:?}")]
    BelowDeclaredMinimum {
        name: String,
        point: Vec<f64>,
        value: f64,
        f_min: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown objective `{name}`; available: {available}")]
    UnknownObjective { name: String, available: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("assumption check requires minimizer set")]
    MissingMinimizerSet,

    #[error("exponent 1/(p-1) undefined for p = 1")]
    DegenerateExponent,

    #[error("particle diverged at step {step}, index {index}")]
    Diverged { step: usize, index: usize },

    #[error("ensemble objective cache is stale")]
    StaleCache,

    #[error("bound degenerate: rho(B_r(v*)) = 0")]
    DegenerateBound,

    #[error("insufficient points for regression (need at least {needed}, got {got})")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("non-positive value {value} at index {index} inside fit window")]
    NonPositiveValue { index: usize, value: f64 },

    #[error("time step {dt} exceeds the stability limit {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
