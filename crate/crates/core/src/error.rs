use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-square cells: {0}")]
    NonSquareCells(String),
    #[error("bad resolution: nx = {0} (need at least 4)")]
    BadResolution(usize),
    #[error("point ({x}, {y}) lies outside the domain")]
    OutOfDomain { x: f64, y: f64 },
    #[error("point at radius {radius} exceeds chart validity radius {r_valid}")]
    OutOfChart { radius: f64, r_valid: f64 },

    #[error("unknown coefficient kind `{0}`")]
    UnknownKind(String),
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("negative potential {value} at node {node}")]
    NegativePotential { node: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("stiffness operator is not symmetric (max asymmetry {0:e})")]
    BadK(f64),

    #[error("eigenbasis is stale: residual {residual:e} exceeds {limit:e}")]
    StaleBasis { residual: f64, limit: f64 },
    #[error("degenerate eigenvalue cluster straddles index k = {k} (λ_k = {lambda_k}, λ_k+1 = {lambda_next})")]
    ClusterSplit { k: usize, lambda_k: f64, lambda_next: f64 },
    #[error("backtracking exhausted {0} halvings without descent")]
    NoDescent(usize),
    #[error("thresholded shape is empty")]
    EmptyShape,
    #[error("level set has no boundary")]
    EmptyBoundary,

    #[error("quadrature too coarse: ({n_r}, {n_theta}) below (16, 64)")]
    QuadTooCoarse { n_r: usize, n_theta: usize },
    #[error("rescaled field is degenerate (norm {0:e})")]
    DegenerateField(f64),
    #[error("too few admissible samples: {got} (need {need})")]
    TooFewSamples { got: usize, need: usize },

    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic in {0}")]
    BadMagic(PathBuf),
    #[error("truncated file {0}")]
    TruncatedFile(PathBuf),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Parse(_)
                | Error::Schema { .. }
                | Error::UnknownKind(_)
                | Error::BadParams(_)
                | Error::BadResolution(_)
                | Error::NonSquareCells(_)
        )
    }
}
