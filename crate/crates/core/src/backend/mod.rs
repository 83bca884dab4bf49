//! Reference execution backend: dense tensors, primitive kernels with
//! vector-Jacobian products, graph evaluation and a reverse-mode tape.

mod exec;
mod gradcheck;
mod kernels;
mod tape;
mod tensor;

pub use exec::{forward, Plan, Run, RunOptions};
pub use gradcheck::{
    grad_check, GradCheckEntry, GradCheckReport, MAX_GRAD_CHECK_PARAMS, REL_ERROR_FLOOR,
};
pub use kernels::{kernel_invocations, Kernel, KernelKind};
pub use tape::{backward, Tape};
pub use tensor::{inverse_permutation, Element, Tensor};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::modulesys::ModuleError;

/// Tensors keyed by name: trainable parameters (`<path>.<name>`) or
/// data-layer outputs (`<instance>.<port>`).
pub type ParamStore<T = f32> = BTreeMap<String, Tensor<T>>;
pub type Batch<T = f32> = BTreeMap<String, Tensor<T>>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("bad tensor: {0}")]
    BadTensor(String),
    #[error("{kernel}: {message}")]
    Kernel {
        kernel: &'static str,
        message: String,
    },
    #[error("shape mismatch at {instance}.{port}: expected {expected}, got {actual:?}")]
    ShapeMismatch {
        instance: String,
        port: String,
        expected: String,
        actual: Vec<usize>,
    },
    #[error("non-finite value produced by `{instance}`")]
    NonFiniteValue { instance: String },
    #[error("sink `{0}` is not a scalar")]
    NonScalarSink(String),
    #[error("unknown sink `{0}`")]
    UnknownSink(String),
    #[error("{0} parameters exceed the gradient-check limit")]
    TooManyParameters(usize),
    #[error("no value for `{0}`")]
    MissingInput(String),
    #[error("no parameter tensor `{0}`")]
    MissingParam(String),
    #[error("graph has not been validated")]
    NotValidated,
    #[error(transparent)]
    Module(#[from] ModuleError),
}

impl BackendError {
    pub fn name(&self) -> &'static str {
        match self {
            BackendError::BadTensor(_) => "BadTensor",
            BackendError::Kernel { .. } => "KernelError",
            BackendError::ShapeMismatch { .. } => "ShapeMismatch",
            BackendError::NonFiniteValue { .. } => "NonFiniteValue",
            BackendError::NonScalarSink(_) => "NonScalarSink",
            BackendError::UnknownSink(_) => "UnknownSink",
            BackendError::TooManyParameters(_) => "TooManyParameters",
            BackendError::MissingInput(_) => "MissingInput",
            BackendError::MissingParam(_) => "MissingParam",
            BackendError::NotValidated => "NotValidated",
            BackendError::Module(_) => "ModuleError",
        }
    }
}
