use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate face {face} (area {area:e} <= {epsilon:e})")]
    DegenerateFace { face: usize, area: f64, epsilon: f64 },

    #[error("seed vertex {seed} out of range for mesh with {n} vertices")]
    SeedOutOfRange { seed: usize, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("alpha {0} outside [0, 1]")]
    AlphaOutOfRange(f64),

    #[error("all curvature magnitudes vanish at the upper clip percentile; use alpha = 0")]
    AllZeroCurvature,

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("eigensolver did not converge after {iterations} restarts (residual {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("empty time list")]
    EmptyTimes,

    #[error("degenerate spectrum: lambda_1 = {low:e}, lambda_(k-1) = {high:e}")]
    DegenerateSpectrum { low: f64, high: f64 },

    #[error("least-squares system is singular")]
    SingularSystem,

    #[error("non-finite gradient at iteration {0}")]
    NonFiniteGradient(usize),

    #[error("no spectral domains to fuse")]
    EmptyDomainList,

    #[error("mesh is disconnected: {unreachable} vertices unreachable from vertex {source_vertex}")]
    DisconnectedMesh {
        source_vertex: usize,
        unreachable: usize,
    },

    #[error("ground truth has {got} entries, correspondence has {expected}")]
    GroundTruthMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed cache file {path}: {message}")]
    Cache { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            Io { .. } | Cache { .. } => ErrorClass::Io,
            NotPositiveDefinite { .. }
            | ConvergenceFailure { .. }
            | SingularSystem
            | NonFiniteGradient(_)
            | DegenerateSpectrum { .. }
            | AllZeroCurvature => ErrorClass::Numerical,
            _ => ErrorClass::Validation,
        }
    }
}
