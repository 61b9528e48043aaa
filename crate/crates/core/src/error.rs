use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("measure mean is {mean}, expected 1/2")]
    MeanNotHalf { mean: f64 },
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("index {index} outside grid of {steps} steps")]
    IndexOutOfRange { index: usize, steps: usize },
    #[error("registry measure does not induce a flow of maps (u must be 0 or 1)")]
    NotCoalescing,
    #[error("coordinate {0} does not start at the origin")]
    NonzeroStart(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("test function has no one-sided derivative data at a point with zero coordinates")]
    MissingOneSidedLimits,
    #[error("chaos order {0} is not supported (maximum 2)")]
    UnsupportedChaosOrder(usize),
    #[error("sample contains non-finite values")]
    NonFiniteSample,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
