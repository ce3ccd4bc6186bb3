use thiserror::Error;

use crate::special::ZeroKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration field is missing or out of range.
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("Gram matrix is singular or ill-conditioned (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error(
        "quadrature did not converge after {subdivisions} subdivisions \
         (estimate {estimate:.6e}, error estimate {error_estimate:.3e})"
    )]
    QuadratureNotConverged {
        estimate: f64,
        error_estimate: f64,
        subdivisions: usize,
    },

    #[error("bracketed only {found} of {requested} zeros of {kind:?} below x = {bound:.3}")]
    ZeroBracketing {
        kind: ZeroKind,
        found: usize,
        requested: usize,
        bound: f64,
    },

    #[error("series did not converge within {terms} terms (partial sum {partial:.6e}, last term {last_term:.3e})")]
    SeriesNotConverged {
        terms: usize,
        partial: f64,
        last_term: f64,
    },

    #[error("degenerate sample set: {0}")]
    Degenerate(String),

    #[error("trial {trial} failed: {source}")]
    TrialFailed {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Singular { .. }
            | Error::QuadratureNotConverged { .. }
            | Error::ZeroBracketing { .. }
            | Error::SeriesNotConverged { .. }
            | Error::Degenerate(_) => true,
            Error::TrialFailed { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
