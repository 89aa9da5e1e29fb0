// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("sequence contains no 1's")]
    AllZeros,
    #[error("invalid change points: {0}")]
    InvalidChangePoints(String),
    #[error("invalid binary sequence: {0}")]
    InvalidSequence(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("thresholds must satisfy alpha < beta (got alpha={alpha}, beta={beta})")]
    BadThresholds { alpha: f64, beta: f64 },
    #[error("pattern of length {pattern} is longer than the series ({series})")]
    PatternLongerThanSeries { pattern: usize, series: usize },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("k={k} is not in 1..{n}")]
    KTooLarge { k: usize, n: usize },
    #[error("every candidate split has a zero cell expectation")]
    DegenerateCounts,
    #[error("covariance matrix is not positive definite")]
    BadCovariance,
    #[error("bound not applicable: {0}")]
    InvalidRegime(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("input file is empty")]
    EmptyFile,
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::InvalidInput(_) | Error::BadThresholds { .. } | Error::KTooLarge { .. } => {
                ErrorClass::Config
            }
            Error::DegenerateCounts | Error::BadCovariance | Error::InvalidRegime(_) => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }
}
