use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e} after {subdivisions} subdivisions")]
    Accuracy { estimate: f64, error: f64, subdivisions: usize },

    #[error("no sign change in bracket [{lo}, {hi}]")]
    Bracketing { lo: f64, hi: f64 },

    #[error("covariance is not positive semidefinite: eigenvalue {eigenvalue:e} against scale {scale:e}")]
    NotPsd { eigenvalue: f64, scale: f64 },

    #[error("tau = {tau} lies outside the worldline range [{start}, {end}]")]
    OutOfRange { tau: f64, start: f64, end: f64 },

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("unsupported expansion order {0}")]
    UnsupportedOrder(usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("renormalized mass {mass:e} is not positive at r = {r}")]
    Stability { r: f64, mass: f64 },

    #[error("history does not cover the requested lookback (tau = {tau})")]
    HistoryUnderflow { tau: f64 },

    #[error("event lies outside the causal range of the source history")]
    NoIntersection,

    #[error("event coincides with the source worldline")]
    CoincidentParticle,

    #[error("near collision: invariant separation {separation:e} below guard {guard:e}")]
    NearCollision { separation: f64, guard: f64 },

    #[error("scenario key `{key}`: {reason}")]
    Scenario { key: String, reason: String },

    #[error("io: {0}")]
    Io(String),

    #[error("{context}: {source}")]
    Context { context: String, source: Box<Error> },
}

impl Error {
    /// True for errors caused by bad input rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        if let Error::Context { source, .. } = self {
            return source.is_validation();
        }
        matches!(
            self,
            Error::InvalidParameter(_) | Error::Constraint(_) | Error::UnsupportedOrder(_) | Error::Config(_) | Error::Scenario { .. }
        )
    }

    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
