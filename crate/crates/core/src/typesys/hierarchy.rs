use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use super::TypeSysError;

/// Tags every hierarchy starts with. None of them has a parent.
pub const BUILTIN_TAGS: &[&str] = &[
    "Batch",
    "Time",
    "Channel",
    "Height",
    "Width",
    "Embedding",
    "LogProbs",
    "Label",
    "Length",
    "Loss",
    "Metric",
];

/// A semantic axis tag. Cheap to clone; compares by name.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tag(Arc<str>);

impl Tag {
    pub(crate) fn new(name: &str) -> Self {
        Tag(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tag({})", self.0)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone)]
struct TagEntry {
    tag: Tag,
    parent: Option<Tag>,
}

/// Registry of semantic tags related by single-inheritance is-a edges.
///
/// Tags can only be added before [`TagHierarchy::freeze`]; types can only be
/// built against a frozen hierarchy.
#[derive(Debug, Clone)]
pub struct TagHierarchy {
    entries: Vec<TagEntry>,
    index: HashMap<Arc<str>, usize>,
    frozen: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TagsFile {
    tags: Vec<TagDecl>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TagDecl {
    name: String,
    parent: String,
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Default for TagHierarchy {
    fn default() -> Self {
        Self::new()
    }
}

impl TagHierarchy {
    /// A fresh, unfrozen hierarchy holding only the built-in tags.
    pub fn new() -> Self {
        let mut h = TagHierarchy {
            entries: Vec::new(),
            index: HashMap::new(),
            frozen: false,
        };
        for name in BUILTIN_TAGS {
            h.insert(name, None);
        }
        h
    }

    fn insert(&mut self, name: &str, parent: Option<Tag>) -> Tag {
        let tag = Tag::new(name);
        self.index.insert(tag.0.clone(), self.entries.len());
        self.entries.push(TagEntry {
            tag: tag.clone(),
            parent,
        });
        tag
    }

    /// Parse a tags file (`{"tags": [{"name": .., "parent": ..}]}`) on top of
    /// the built-ins. The result is frozen.
    pub fn from_json(text: &str) -> Result<Self, TypeSysError> {
        let file: TagsFile =
            serde_json::from_str(text).map_err(|e| TypeSysError::TagsFile(e.to_string()))?;
        let mut h = TagHierarchy::new();
        for decl in &file.tags {
            h.define_tag(&decl.name, &decl.parent)?;
        }
        h.freeze();
        Ok(h)
    }

    pub fn from_file(path: &Path) -> Result<Self, TypeSysError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TypeSysError::TagsFile(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Register `name` as a child of `parent`.
    pub fn define_tag(&mut self, name: &str, parent: &str) -> Result<Tag, TypeSysError> {
        if self.frozen {
            return Err(TypeSysError::HierarchyFrozen);
        }
        if !is_identifier(name) {
            return Err(TypeSysError::InvalidTagName(name.to_string()));
        }
        if self.index.contains_key(name) {
            return Err(TypeSysError::DuplicateTag(name.to_string()));
        }
        let parent = self
            .lookup(parent)
            .ok_or_else(|| TypeSysError::UnknownParent(parent.to_string()))?;
        // Parent already exists, so the new edge cannot close a cycle.
        Ok(self.insert(name, Some(parent)))
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    fn lookup(&self, name: &str) -> Option<Tag> {
        self.index.get(name).map(|&i| self.entries[i].tag.clone())
    }

    /// Resolve a registered tag by name. Requires a frozen hierarchy.
    pub fn tag(&self, name: &str) -> Result<Tag, TypeSysError> {
        if !self.frozen {
            return Err(TypeSysError::NotFrozen);
        }
        self.lookup(name)
            .ok_or_else(|| TypeSysError::UnknownTag(name.to_string()))
    }

    pub fn contains(&self, tag: &Tag) -> bool {
        self.index.contains_key(tag.name())
    }

    pub fn parent(&self, tag: &Tag) -> Result<Option<&Tag>, TypeSysError> {
        let i = self.position(tag)?;
        Ok(self.entries[i].parent.as_ref())
    }

    fn position(&self, tag: &Tag) -> Result<usize, TypeSysError> {
        self.index
            .get(tag.name())
            .copied()
            .ok_or_else(|| TypeSysError::UnknownTag(tag.name().to_string()))
    }

    /// True iff `a == b` or `b` is an ancestor of `a`.
    pub fn is_subtag(&self, a: &Tag, b: &Tag) -> Result<bool, TypeSysError> {
        let mut cur = self.position(a)?;
        self.position(b)?;
        loop {
            let entry = &self.entries[cur];
            if entry.tag == *b {
                return Ok(true);
            }
            match &entry.parent {
                Some(p) => cur = self.index[p.name()],
                None => return Ok(false),
            }
        }
    }

    /// All tags in registration order (built-ins first).
    pub fn tags(&self) -> impl Iterator<Item = &Tag> {
        self.entries.iter().map(|e| &e.tag)
    }

    /// User-declared tags with their parents, in registration order.
    pub fn user_tags(&self) -> impl Iterator<Item = (&Tag, &Tag)> {
        self.entries
            .iter()
            .skip(BUILTIN_TAGS.len())
            .filter_map(|e| e.parent.as_ref().map(|p| (&e.tag, p)))
    }
}
