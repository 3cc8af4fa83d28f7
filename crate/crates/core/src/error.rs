use thiserror::Error;

use crate::expr::ExprError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("metric is singular at {point:?} (condition number {condition:e})")]
    SingularMetric { point: Vec<f64>, condition: f64 },
    #[error("metric signature at {point:?} is {found:?}, expected {expected:?}")]
    Signature {
        point: Vec<f64>,
        expected: Vec<i8>,
        found: Vec<i8>,
    },
    #[error("block {block} is degenerate at {point:?}")]
    DegenerateBlock { block: usize, point: Vec<f64> },
    #[error("invalid splitting: {0}")]
    InvalidSplitting(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;
