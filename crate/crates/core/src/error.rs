use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("attachment function is not positive at k={k} (value {value})")]
    NonPositiveValue { k: u64, value: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("series diverges at lambda={lambda}: {reason}")]
    DivergentSeries { lambda: f64, reason: String },

    #[error("no Malthusian root: {0}")]
    NoMalthusianRoot(String),

    #[error("derivative -m'(lambda_f) = {value} is too large to certify")]
    DegenerateDerivative { value: f64 },

    #[error("speed objective has no interior maximum: {0}")]
    NoInteriorMaximum(String),

    #[error("centering residual {residual:e} exceeds tolerance")]
    CenteringFailure { residual: f64 },

    #[error("representations disagree: {a} vs {b} (relative gap {rel:e})")]
    RepresentationMismatch { a: f64, b: f64, rel: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
}

impl Error {
    /// Stable machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonPositiveValue { .. } => "NonPositiveValue",
            Error::Domain(_) => "DomainError",
            Error::Parse(_) => "ParseError",
            Error::DivergentSeries { .. } => "DivergentSeries",
            Error::NoMalthusianRoot(_) => "NoMalthusianRoot",
            Error::DegenerateDerivative { .. } => "DegenerateDerivative",
            Error::NoInteriorMaximum(_) => "NoInteriorMaximum",
            Error::CenteringFailure { .. } => "CenteringFailure",
            Error::RepresentationMismatch { .. } => "RepresentationMismatch",
            Error::PreconditionViolation(_) => "PreconditionViolation",
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
