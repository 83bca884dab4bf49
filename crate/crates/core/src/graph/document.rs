//! The graph-description file: a JSON document listing instances, bindings,
//! sinks and optionally an action and callbacks.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use super::{Graph, GraphError, PortRef};
use crate::modulesys::{ModuleError, Registry};
use crate::runtime::{ActionConfig, CallbackSpec};
use crate::typesys::is_identifier;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags_file: Option<String>,
    pub modules: Vec<ModuleDoc>,
    #[serde(default)]
    pub dag: Vec<BindingDoc>,
    #[serde(default)]
    pub sinks: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<ActionConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub callbacks: Vec<CallbackSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleDoc {
    pub id: String,
    pub class: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BindingDoc {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("module `{id}` uses unknown descriptor `{class}`")]
    UnknownDescriptor { id: String, class: String },
    #[error("instance `{id}`: {source}")]
    Module { id: String, source: ModuleError },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl LoadError {
    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        LoadError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Whether the problem is with the document itself rather than the graph it describes.
    pub fn is_schema(&self) -> bool {
        matches!(
            self,
            LoadError::Schema { .. } | LoadError::UnknownDescriptor { .. } | LoadError::Io { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub auto_cast: bool,
    /// Collect connection errors as findings instead of failing on the first.
    pub lenient: bool,
}

impl GraphDocument {
    pub fn from_json(text: &str) -> Result<Self, LoadError> {
        serde_json::from_str(text).map_err(|e| LoadError::schema("$", e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialize")
    }
}

fn port_ref(s: &str, path: &str) -> Result<PortRef, LoadError> {
    s.parse().map_err(|m: String| LoadError::schema(path, m))
}

/// Build a graph from a parsed document. Returns the connection findings
/// (empty unless `opts.lenient`).
pub fn load_graph(
    doc: &GraphDocument,
    registry: &Arc<Registry>,
    opts: LoadOptions,
) -> Result<(Graph, Vec<GraphError>), LoadError> {
    let mut g = Graph::new(registry.clone(), doc.seed);
    g.tags_file = doc.tags_file.clone();
    for (i, m) in doc.modules.iter().enumerate() {
        if !is_identifier(&m.id) {
            return Err(LoadError::schema(
                format!("modules[{i}].id"),
                format!("`{}` is not an identifier", m.id),
            ));
        }
        if g.instance(&m.id).is_some() {
            return Err(LoadError::schema(
                format!("modules[{i}].id"),
                format!("duplicate id `{}`", m.id),
            ));
        }
        if !registry.contains(&m.class) {
            return Err(LoadError::UnknownDescriptor {
                id: m.id.clone(),
                class: m.class.clone(),
            });
        }
        g.add_with(&m.class, &m.params, &m.id)
            .map_err(|e| match e {
                GraphError::Module { id, source } => LoadError::Module { id, source },
                other => LoadError::Graph(other),
            })?;
    }

    let mut findings = Vec::new();
    for (i, b) in doc.dag.iter().enumerate() {
        let from = port_ref(&b.from, &format!("dag[{i}].from"))?;
        let to = port_ref(&b.to, &format!("dag[{i}].to"))?;
        let handle = g
            .handle(&from.instance, &from.port)
            .map_err(|e| LoadError::schema(format!("dag[{i}].from"), e.to_string()))?;
        if g.consumer_type(&to).is_err() {
            return Err(LoadError::schema(
                format!("dag[{i}].to"),
                format!("unknown input port {to}"),
            ));
        }
        if let Err(e) = g.connect(&handle, &to.instance, &to.port, opts.auto_cast) {
            if !opts.lenient {
                return Err(e.into());
            }
            findings.push(e);
        }
    }
    for (i, s) in doc.sinks.iter().enumerate() {
        let path = format!("sinks[{i}]");
        let r = port_ref(s, &path)?;
        g.add_sink_ref(r)
            .map_err(|e| LoadError::schema(path, e.to_string()))?;
    }
    g.action = doc.action.clone();
    g.callbacks = doc.callbacks.clone();
    Ok((g, findings))
}

/// Read and load a graph file; relative data paths resolve against its directory.
pub fn load_graph_file(
    path: &Path,
    registry: &Arc<Registry>,
    opts: LoadOptions,
) -> Result<(Graph, Vec<GraphError>), LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let doc = GraphDocument::from_json(&text)?;
    let (mut g, findings) = load_graph(&doc, registry, opts)?;
    if let Some(dir) = path.parent() {
        g.set_base_dir(dir);
    }
    Ok((g, findings))
}

impl Graph {
    /// Parse and load strictly; any connection error fails the load.
    pub fn from_json(
        text: &str,
        registry: &Arc<Registry>,
        auto_cast: bool,
    ) -> Result<Graph, LoadError> {
        let doc = GraphDocument::from_json(text)?;
        Ok(load_graph(
            &doc,
            registry,
            LoadOptions {
                auto_cast,
                lenient: false,
            },
        )?
        .0)
    }

    pub fn to_document(&self) -> Result<GraphDocument, GraphError> {
        if !self.validated {
            return Err(GraphError::NotValidated);
        }
        Ok(GraphDocument {
            seed: self.seed,
            tags_file: self.tags_file.clone(),
            modules: self
                .instances
                .values()
                .map(|i| ModuleDoc {
                    id: i.id.clone(),
                    class: i.class().to_string(),
                    params: i.params.to_json(),
                })
                .collect(),
            dag: self
                .bindings
                .iter()
                .map(|b| BindingDoc {
                    from: b.from.producer.to_string(),
                    to: b.to.to_string(),
                })
                .collect(),
            sinks: self.sinks.iter().map(PortRef::to_string).collect(),
            action: self.action.clone(),
            callbacks: self.callbacks.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String, GraphError> {
        Ok(self.to_document()?.to_json())
    }
}
