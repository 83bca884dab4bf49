//! Neural-module descriptors, their parameter schemas, the registry graphs
//! instantiate from, and lowering to primitive kernel steps.

mod descriptor;
mod instance;
mod lower;
mod params;
mod registry;
mod template;

pub use descriptor::{
    CompositeTemplate, DataSource, DerivedRule, Implementation, ModuleDescriptor, PortDecl,
    PortRule, TemplateNode, TemplateWire,
};
pub use instance::{InnerEnd, InnerWire, InstanceBody, ModuleInstance, PortSpec};
pub use lower::{lower_instance, lower_steps, KernelStep, Lowered, SourceStep, Step};
pub use params::{Constraint, ParamEntry, ParamKind, ParamSchema, ParamValue, Params};
pub(crate) use registry::split_ref;
pub use registry::Registry;

use thiserror::Error;

use crate::typesys::{Comparison, TypeSysError};

/// Nesting bound for composites. Registration makes recursion impossible,
/// so hitting it means the registry was corrupted.
pub const MAX_DEPTH: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModuleError {
    #[error("descriptor `{0}` is already registered")]
    DuplicateDescriptor(String),
    #[error("unknown descriptor `{0}`")]
    UnknownDescriptor(String),
    #[error("invalid descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("invalid composite {0}")]
    InvalidComposite(String),
    #[error("invalid parameter schema: {0}")]
    InvalidSchema(String),
    #[error("invalid identifier `{0}`")]
    InvalidId(String),
    #[error("missing required parameter `{0}`")]
    MissingParam(String),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("parameter `{name}` expects {expected}, got {found}")]
    ParamKind {
        name: String,
        expected: ParamKind,
        found: String,
    },
    #[error("constraint violated: {name} {constraint}")]
    ConstraintViolation { name: String, constraint: String },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("port `{port}`: {message}")]
    PortType { port: String, message: String },
    #[error("{0}")]
    Type(TypeSysError),
    #[error("{0}")]
    CompositeType(Box<InnerMismatch>),
    #[error("composite nesting too deep at `{0}`")]
    RecursionLimit(String),
    #[error("no value bound to input `{0}`")]
    MissingInput(String),
    #[error("{context}: {source}")]
    Nested {
        context: String,
        source: Box<ModuleError>,
    },
}

/// A rejected connection between two ports inside a composite.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{result} inside `{composite}` at {from} -> {to}: {producer} vs {consumer}")]
pub struct InnerMismatch {
    pub composite: String,
    pub from: String,
    pub to: String,
    pub result: Comparison,
    pub producer: String,
    pub consumer: String,
}

impl ModuleError {
    pub(crate) fn within(self, context: &str) -> Self {
        ModuleError::Nested {
            context: context.to_string(),
            source: Box::new(self),
        }
    }

    /// The innermost error, past any nesting context.
    pub fn root(&self) -> &ModuleError {
        match self {
            ModuleError::Nested { source, .. } => source.root(),
            e => e,
        }
    }
}
