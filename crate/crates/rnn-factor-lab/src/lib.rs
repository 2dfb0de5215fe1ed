//! Driver layer for the `rnn-factor-core` kernels: corpus ingestion and
//! vocabulary construction, JSON run configuration, the training loop with
//! metrics and checkpoints, throughput benchmarking, and the CLI surface.

use std::fmt;

pub mod bench;
pub mod checkpoint;
pub mod config;
pub mod report;
pub mod synth;
pub mod trainer;
pub mod vocab;

/// Failure class, mapped one-to-one onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad command line: exit 1.
    Usage,
    /// Bad configuration (file or values): exit 2.
    Config,
    /// Bad or missing data (corpus, checkpoint): exit 3.
    Data,
    /// Numeric failure (non-finite loss or gradient): exit 4.
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 1,
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }
}

#[derive(Debug)]
pub struct LabError {
    pub kind: ErrorKind,
    pub message: String,
}

impl LabError {
    pub fn usage(message: impl Into<String>) -> Self {
        LabError {
            kind: ErrorKind::Usage,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        LabError {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        LabError {
            kind: ErrorKind::Data,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        LabError {
            kind: ErrorKind::Numeric,
            message: message.into(),
        }
    }
}

impl fmt::Display for LabError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for LabError {}

impl From<rnn_factor_core::CoreError> for LabError {
    fn from(err: rnn_factor_core::CoreError) -> Self {
        use rnn_factor_core::CoreError;
        let kind = match &err {
            CoreError::NonFinite { .. } => ErrorKind::Numeric,
            _ => ErrorKind::Config,
        };
        LabError {
            kind,
            message: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
