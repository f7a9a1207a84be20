use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported pairing: target `{target}` with kernel `{kernel}`")]
    UnsupportedPairing {
        target: &'static str,
        kernel: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("candidate set is empty")]
    EmptyCandidateSet,

    #[error("near-duplicate point: Schur complement {schur:e} is not above the floor {floor:e}")]
    NearDuplicate { schur: f64, floor: f64 },

    #[error("simplex QP stopped after {iterations} iterations with duality gap {gap:e}")]
    QpNotConverged {
        iterations: usize,
        gap: f64,
        best: Vec<f64>,
    },

    #[error("kernel `{0}` is not strictly positive definite and cannot drive a construction")]
    NotSpd(&'static str),

    #[error("measure has total mass {0}, expected 1")]
    MassNotOne(f64),

    #[error("target `{0}` cannot be sampled")]
    NotSamplable(&'static str),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    CandidateFile { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the configuration or its inputs rather than by a numerical check.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::CandidateFile { .. }
                | Error::Io { .. }
                | Error::UnknownMethod(_)
                | Error::InvalidParameter(_)
                | Error::UnsupportedPairing { .. }
                | Error::NotSamplable(_)
                | Error::NotSpd(_)
                | Error::DimensionMismatch { .. }
                | Error::EmptyCandidateSet
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
