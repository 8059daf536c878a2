//! Polynomial-kernel C-SVM trained with SMO, combined one-vs-rest.

mod kernel;
mod multiclass;
mod smo;

pub use kernel::{KernelMatrix, PolyKernel};
pub use multiclass::{train_multiclass, Scaler, SvmConfig, SvmModel, SVM_FORMAT, SVM_VERSION};
pub use smo::{kkt_violations, solve_smo, train_binary_svm, BinarySvm, SmoSolution};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SvmError {
    #[error("training labels contain a single class")]
    SingleClassInput,
    #[error("label {0} is not -1 or +1")]
    InvalidLabel(f64),
    #[error("non-finite feature at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("class '{class}' has {size} rows, need at least 2")]
    ClassTooSmall { class: String, size: usize },
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("SMO did not converge within {0} iterations")]
    NotConverged(usize),
    #[error("label '{0}' is not an integer level")]
    LabelNotLevel(String),
    #[error("unsupported model document: {0}")]
    UnsupportedModel(String),
}
