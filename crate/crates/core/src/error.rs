use thiserror::Error;

/// Errors raised by the matrix layer, the validators, the probability
/// pipelines and the scenario reader.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (max |m - m^dagger| = {deviation:.3e})")]
    Hermiticity { deviation: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e}, allowed {threshold:.3e})")]
    Negativity { min_eigenvalue: f64, threshold: f64 },

    #[error("trace is {trace} but must be 1")]
    Trace { trace: f64 },

    #[error("POVM effects do not sum to the identity (Frobenius deviation {deviation:.3e})")]
    Completeness { deviation: f64 },

    #[error("Kraus operators are not trace preserving (Frobenius deviation of sum K^dagger K from I is {deviation:.3e})")]
    TracePreservation { deviation: f64 },

    #[error("matrix is numerically singular: {0}")]
    Singularity(String),

    #[error("rank condition violated: {0}")]
    Rank(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("conditioning outcome {index} has marginal probability {marginal:.3e}")]
    ZeroMarginal { index: usize, marginal: f64 },

    #[error("scenario has no alternative POVM on system 1")]
    MissingAltPovm,

    #[error("unknown preset `{0}` (expected stern-gerlach, depolarizing or bell)")]
    UnknownPreset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("internal invariant violated: {0}")]
    InternalInvariant(String),

    #[error("at `{path}`: {source}")]
    Located {
        path: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    /// Attach a field path to this error.
    pub fn at(self, path: impl Into<String>) -> Self {
        Error::Located {
            path: path.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error with any location wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Located { source, .. } => source.root(),
            other => other,
        }
    }

    /// Field path of a located error, outermost first.
    pub fn path(&self) -> Option<String> {
        match self {
            Error::Located { path, source } => match source.path() {
                Some(inner) => Some(format!("{path}.{inner}")),
                None => Some(path.clone()),
            },
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
