use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
///
/// Variants map one-to-one onto the error classes the command line tool
/// exposes as distinct exit codes (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid qubit count {0}: at least 2 qubits are required")]
    InvalidQubitCount(usize),

    #[error("search point out of range: {0}")]
    InvalidSearchPoint(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("malformed circuit: {0}")]
    CircuitFormat(String),

    #[error("calibration format error: {0}")]
    CalibrationFormat(String),

    #[error("invalid backend: {0}")]
    InvalidBackend(String),

    #[error("gate {0} has no rewrite rule for this backend")]
    UnsupportedGate(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),

    #[error("circuit failure probability {p_fail} is saturated; effective time is unbounded")]
    ReliabilitySaturated { p_fail: f64 },

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("{n_qubits} qubits exceeds the simulator capacity of {max} qubits")]
    Capacity { n_qubits: usize, max: usize },

    #[error("gradient unsupported: {0}")]
    UnsupportedGradient(String),

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error class. `0` is reserved for success.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Io { .. } => 3,
            Error::Json(_) | Error::Csv(_) | Error::CircuitFormat(_) => 4,
            Error::CalibrationFormat(_) | Error::InvalidCalibration(_) => 5,
            Error::InvalidBackend(_) => 6,
            Error::UnsupportedGate(_) | Error::UnsupportedGradient(_) => 7,
            Error::InvalidQubitCount(_)
            | Error::InvalidSearchPoint(_)
            | Error::DimensionMismatch(_)
            | Error::InvalidArchitecture(_)
            | Error::InvalidInput(_) => 8,
            Error::Capacity { .. } => 9,
            Error::ReliabilitySaturated { .. } => 10,
            Error::TrainingDiverged { .. } => 11,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
