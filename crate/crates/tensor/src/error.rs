use thiserror::Error;

use crate::tensor::Shape;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("buffer length {got} does not match shape volume {expected}")]
    Length { expected: usize, got: usize },
    #[error("{op}: incompatible shapes {lhs} and {rhs}")]
    Shape { op: &'static str, lhs: Shape, rhs: Shape },
    #[error("empty input")]
    Empty,
}

pub type Result<T, E = TensorError> = std::result::Result<T, E>;
