use thiserror::Error;

use crate::factor::ParseError;

/// Errors raised while building or evaluating fractal interpolants.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("bivariate expression evaluated at a scalar point")]
    DimensionMismatch,

    #[error("abscissae must be strictly increasing (violated at index {index})")]
    NonIncreasing { index: usize },

    #[error("at least {min} nodes are required, found {found}")]
    TooFewNodes { min: usize, found: usize },

    #[error("{what}: expected {expected}, found {found}")]
    LengthMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("factor {factor} on interval {interval} has sup bound {bound} >= 1{note}")]
    FactorTooLarge {
        interval: String,
        factor: &'static str,
        bound: f64,
        note: String,
    },

    #[error("not contractive: S = {s} >= 1 at interval {interval}")]
    NotContractive { interval: String, s: f64 },

    #[error("endpoint identity violated on interval {interval}: residual {residual:e}")]
    EndpointMismatch { interval: String, residual: f64 },

    #[error("interval index {index} out of range 1..={n}")]
    IntervalIndex { index: usize, n: usize },

    #[error("point-count guard exceeded: {0}")]
    TooManyPoints(String),

    #[error("grid must be uniform ({axis} axis)")]
    NonUniformGrid { axis: &'static str },

    #[error("box size {epsilon} is not aligned to the node mesh")]
    MisalignedEpsilon { epsilon: f64 },

    #[error("undersampled column {column}: {count} samples, need at least {required}")]
    Undersampled {
        column: usize,
        count: usize,
        required: usize,
    },

    #[error("{0}")]
    InvalidInput(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
