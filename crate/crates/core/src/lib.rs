//! Typed dataflow composition of neural modules: semantic axis types checked
//! at connection time, module descriptors and composites, graph validation,
//! and a lazy reference runtime with reverse-mode autodiff.

pub mod backend;
pub mod graph;
pub mod modulesys;
pub mod runtime;
pub mod stdcollection;
pub mod typesys;
pub mod util;
