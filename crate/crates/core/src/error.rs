use num_complex::Complex64;
use thiserror::Error;

use crate::scalar::ScalarField;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("operator is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("{what} is not self-adjoint (relative residual {residual:.3e})")]
    NotSelfAdjoint { what: &'static str, residual: f64 },

    #[error("{what} is not an orthogonal projection (relative residual {residual:.3e})")]
    NotProjection { what: String, residual: f64 },

    #[error("{what} not invertible (condition estimate {condition:.3e})")]
    NotInvertible { what: &'static str, condition: f64 },

    #[error("hypothesis {0} does not hold")]
    HypothesisFailed(&'static str),

    #[error("value {value} cannot be represented in the {field:?} field")]
    FieldMismatch { value: Complex64, field: ScalarField },

    #[error("z not in domain D: {0:?}")]
    NotInDomain(Vec<Complex64>),

    #[error("structural condition {condition} fails (residual {residual:.3e})")]
    StructuralCondition { condition: String, residual: f64 },

    #[error("decompositions of the two problems differ (residual {residual:.3e})")]
    DecompositionMismatch { residual: f64 },

    #[error("invalid pencil: {0}")]
    InvalidPencil(String),

    #[error("invalid phase map: {0}")]
    InvalidPhaseMap(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dense backend limited to dimension {cap}, requested {dim}")]
    DenseCapExceeded { dim: usize, cap: usize },

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("json: {0}")]
    Json(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
