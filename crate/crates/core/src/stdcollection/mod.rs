//! The standard collection: data layers and module descriptors for
//! encoder/decoder style graphs, plus the shipped tag hierarchy.

mod descriptors;
pub mod synth;
mod templates;

pub use descriptors::{register_std_descriptors, std_descriptors, STD_DESCRIPTOR_NAMES};
pub use templates::{build_encoder_decoder_template, TemplateParams, Variant};

use std::sync::Arc;

use crate::modulesys::{ModuleError, Registry};
use crate::typesys::TagHierarchy;

/// Tags file shipped with the collection.
pub const SHIPPED_TAGS: &str = include_str!("tags.json");

/// Built-ins plus the shipped tags, frozen.
pub fn shipped_hierarchy() -> TagHierarchy {
    TagHierarchy::from_json(SHIPPED_TAGS).expect("shipped tags file is valid")
}

/// A registry over `h` holding every standard descriptor.
pub fn std_registry(h: TagHierarchy) -> Result<Registry, ModuleError> {
    let mut reg = Registry::new(Arc::new(h))?;
    register_std_descriptors(&mut reg)?;
    Ok(reg)
}
