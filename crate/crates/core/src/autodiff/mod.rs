//! Dense `f64` tensors with tape-based reverse-mode differentiation.

mod checkpoint;
mod gradcheck;
mod optim;
mod params;
mod tape;
mod tensor;

pub use checkpoint::{config_digest, Checkpoint, CheckpointError};
pub use gradcheck::{grad_check, grad_check_params, GradCheckOptions, GradCheckReport, GradFailure, Parameterized};
pub use optim::{adam_step, Adam, AdamState};
pub use params::{Init, ParamId, ParamStore, Parameter};
pub use tape::{sigmoid, Axis, Gradients, Tape, Unary, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("expected a scalar, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("{0}")]
    InvalidArgument(String),
}
