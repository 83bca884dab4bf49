//! Actions over validated graphs (train, eval, infer), optimizers, data
//! streams, callbacks and checkpoints.

mod actions;
mod callbacks;
mod checkpoint;
mod config;
mod data;
mod optim;

pub use actions::{evaluate, find_loss_sink, infer, train, TrainReport, Trainer};
pub use callbacks::{run_callbacks, Callback, CallbackContext, Event, EventKind};
pub use checkpoint::{Checkpoint, TensorDump, CHECKPOINT_MAGIC, DUMP_MAGIC, FORMAT_VERSION};
pub use config::{ActionConfig, ActionKind, CallbackSpec, OptimizerConfig};
pub use data::{load_dataset, parse_csv, parse_sequences, DataStream, Dataset};
pub use optim::Optimizer;

use thiserror::Error;

use crate::backend::BackendError;
use crate::graph::GraphError;
use crate::modulesys::ModuleError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeError {
    #[error("invalid action config: {0}")]
    InvalidConfig(String),
    #[error("expected exactly one scalar loss sink, found {0}")]
    NoScalarLoss(usize),
    #[error("no scalar metric sinks designated")]
    NoMetrics,
    #[error("data layer `{0}` cannot produce a full batch")]
    DataExhausted(String),
    #[error("{path}: {message}")]
    Data { path: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("cannot load graph: {0}")]
    Load(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Module(#[from] ModuleError),
}

impl RuntimeError {
    pub fn name(&self) -> &'static str {
        match self {
            RuntimeError::InvalidConfig(_) => "InvalidConfig",
            RuntimeError::NoScalarLoss(_) => "NoScalarLoss",
            RuntimeError::NoMetrics => "NoMetrics",
            RuntimeError::DataExhausted(_) => "DataExhausted",
            RuntimeError::Data { .. } => "DataError",
            RuntimeError::Io { .. } => "IoError",
            RuntimeError::Checkpoint(_) => "CheckpointError",
            RuntimeError::Load(_) => "LoadError",
            RuntimeError::Backend(e) => e.name(),
            RuntimeError::Graph(_) => "GraphError",
            RuntimeError::Module(_) => "ModuleError",
        }
    }
}
