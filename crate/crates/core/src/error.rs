use thiserror::Error;

use crate::sets::Domain;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("piece {index} is malformed: [{lo}, {hi})")]
    MalformedPiece { index: usize, lo: f64, hi: f64 },

    #[error("domain mismatch: {left:?} vs {right:?}")]
    DomainMismatch { left: Domain, right: Domain },

    #[error("cannot parse {input:?}: {reason}")]
    Parse { input: String, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix is not Hermitian: max deviation {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("eigensolver failed on a {dim}x{dim} matrix: {report}")]
    EigenFailure { dim: usize, report: String },

    #[error("not a projection: {0}")]
    NotProjection(String),

    #[error("not an effect: eigenvalue {eigenvalue} outside [0, 1]")]
    NotEffect { eigenvalue: f64 },

    #[error("state is not normalized: norm {norm}")]
    NotNormalized { norm: f64 },

    #[error("point {point} lies outside the kernel domain {domain}")]
    OutsideKernelDomain { point: f64, domain: String },

    #[error("partition cells {first} and {second} overlap")]
    NonDisjointPartition { first: usize, second: usize },

    #[error("partition does not cover the {0:?} domain")]
    NotACover(Domain),

    #[error("family is not monotone: member {index} is not contained in its predecessor")]
    NonMonotoneFamily { index: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("degenerate probability vector (total mass {total})")]
    DegenerateProbabilities { total: f64 },

    #[error("non-finite sample value {value} at tag {tag}")]
    UnboundedSample { tag: f64, value: f64 },

    #[error("builder failed at dimension {dim}: {reason}")]
    BuilderFailure { dim: usize, reason: String },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub fn parse(input: &str, reason: impl Into<String>) -> Self {
        Error::Parse {
            input: input.to_string(),
            reason: reason.into(),
        }
    }

    /// Errors caused by malformed user input rather than numerical trouble.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::MalformedPiece { .. }
                | Error::InvalidParameter(_)
                | Error::DomainMismatch { .. }
                | Error::NotACover(_)
                | Error::NonDisjointPartition { .. }
                | Error::NonMonotoneFamily { .. }
                | Error::OutsideKernelDomain { .. }
        )
    }
}
