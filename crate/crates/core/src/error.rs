//! Error type shared by the geometry modules.

use thiserror::Error;

use crate::jet::JetError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("chart dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("degenerate contact form: {0}")]
    Degenerate(String),
    #[error("Levi form is not positive definite (pivot {0:e})")]
    NotPseudoconvex(f64),
    #[error("structure is not partially integrable (defect {0:e})")]
    NotPartiallyIntegrable(f64),
    #[error("singular metric at the evaluation point")]
    SingularMetric,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("argument is not tangent to the contact distribution (θ-component {0:e})")]
    NotHorizontal(f64),
    #[error("unsupported: {0}")]
    Unsupported(String),
}
