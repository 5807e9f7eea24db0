use thiserror::Error;

use crate::image::Shape;

/// Errors raised by operators, penalties, solvers and pipelines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: Shape,
        actual: Shape,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("iterates diverged (non-finite values) at iteration {iteration}")]
    Divergence { iteration: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

pub(crate) fn check_shape(context: &'static str, expected: Shape, actual: Shape) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Shape {
            context,
            expected,
            actual,
        })
    }
}
