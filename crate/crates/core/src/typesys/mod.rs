//! Semantic axis tags, neural types and the type comparison that gates
//! every graph connection.

mod compare;
mod hierarchy;
mod parse;
mod types;

pub use compare::{compare_types, transpose_permutation, Comparison};
pub(crate) use hierarchy::is_identifier;
pub use hierarchy::{Tag, TagHierarchy, BUILTIN_TAGS};
pub use parse::{expand_template, parse_type_expr, render_type_expr, TemplateEnv};
pub use types::{AxisType, NeuralType};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeSysError {
    #[error("tag `{0}` is already defined")]
    DuplicateTag(String),
    #[error("unknown parent tag `{0}`")]
    UnknownParent(String),
    #[error("unknown tag `{0}`")]
    UnknownTag(String),
    #[error("invalid tag name `{0}`")]
    InvalidTagName(String),
    #[error("tag hierarchy is frozen")]
    HierarchyFrozen,
    #[error("tag hierarchy must be frozen before building types")]
    NotFrozen,
    #[error("syntax error at offset {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("invalid dimension {0}; dimensions must be >= 1")]
    InvalidDim(i64),
    #[error("tensor types need at least one axis (use `root`)")]
    EmptyTensor,
    #[error("port template parameter: {0}")]
    Template(String),
    #[error("tags file: {0}")]
    TagsFile(String),
}
