use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(
        "truncation insufficient: retained power {retained:.3e} below required {required:.3e}"
    )]
    TruncationInsufficient { retained: f64, required: f64 },

    #[error("nonphysical gain: mask entry {bin} has modulus {modulus} > 1")]
    NonphysicalGain { bin: usize, modulus: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("malformed trace{}: {reason}", .index.map(|i| format!(" #{i}")).unwrap_or_default())]
    MalformedTrace {
        index: Option<usize>,
        reason: String,
    },

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("singular fit: {0}")]
    SingularFit(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("unsupported delay distribution: {0}")]
    UnsupportedDistribution(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by I/O or (de)serialization rather than by the
    /// numerical content of the request.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Csv(_) | Error::Json(_))
    }

    /// True for errors where inputs were well-formed but fell outside the
    /// domain of a numerical routine.
    pub fn is_numerical_domain(&self) -> bool {
        matches!(
            self,
            Error::OutOfRange(_)
                | Error::SingularFit(_)
                | Error::Degenerate(_)
                | Error::TruncationInsufficient { .. }
                | Error::InvalidDensityMatrix(_)
        )
    }

    pub(crate) fn with_trace_index(self, index: usize) -> Self {
        match self {
            Error::MalformedTrace { reason, .. } => Error::MalformedTrace {
                index: Some(index),
                reason,
            },
            other => other,
        }
    }
}
