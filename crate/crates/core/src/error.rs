use thiserror::Error;

/// Errors raised by path construction and the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (time, width, horizon).
    #[error("domain error: {0}")]
    Domain(String),
    /// Dimension, horizon or pad-mode mismatch between inputs.
    #[error("shape error: {0}")]
    Shape(String),
    /// An input violates a structural precondition (monotonicity, consistency).
    #[error("contract violation: {0}")]
    Contract(String),
    /// A point does not belong to the thick graph of the path it was checked against.
    #[error("point ({time}, {point:?}) is not on the thick graph")]
    Membership { time: f64, point: Vec<f64> },
    /// A matrix or generator family is singular or rank deficient.
    #[error("rank error: {0}")]
    Rank(String),
    /// A control increment lies outside the admissible cone.
    #[error("inadmissible control increment {increment:?} at t = {time} (residual {residual:.3e})")]
    Admissibility {
        time: f64,
        increment: Vec<f64>,
        residual: f64,
    },
    /// No open half-space contains the given generators.
    #[error("no open half-space contains the cone generators")]
    Infeasible,
}

pub type Result<T> = std::result::Result<T, Error>;
