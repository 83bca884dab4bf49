//! Loading a graph file together with its tag hierarchy and registry, and
//! collecting everything wrong with it as findings.

use std::path::Path;
use std::sync::Arc;

use axon_core::graph::{
    load_graph, Graph, GraphDocument, GraphError, LoadError, LoadOptions, PortRef,
};
use axon_core::modulesys::ModuleError;
use axon_core::stdcollection::{shipped_hierarchy, std_registry};
use axon_core::typesys::TagHierarchy;
use serde_json::{json, Value};

use crate::Common;

/// A problem that makes the file unusable: bad JSON, unknown descriptor,
/// invalid parameters, unreadable files.
#[derive(Debug)]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl SchemaError {
    fn new(path: impl Into<String>, message: impl ToString) -> Self {
        SchemaError {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn line(&self) -> String {
        format!("SCHEMA_ERROR at {}: {}", self.path, self.message)
    }

    pub fn to_json(&self) -> Value {
        json!({"code": "SCHEMA_ERROR", "path": self.path, "message": self.message})
    }
}

/// One type or validation finding.
#[derive(Debug, Clone)]
pub struct Finding {
    pub line: String,
    pub detail: Value,
}

impl Finding {
    fn from_graph_error(e: &GraphError) -> Finding {
        let detail = match e {
            GraphError::Type {
                result,
                from,
                to,
                producer,
                consumer,
            } => json!({
                "code": result.as_str(), "from": from.to_string(), "to": to.to_string(),
                "producer": producer.to_string(), "consumer": consumer.to_string(),
            }),
            other => json!({"code": other.code(), "message": other.to_string()}),
        };
        let line = match e {
            GraphError::Type { .. } => format!("ERROR {e}"),
            other => format!("ERROR {} {other}", other.code()),
        };
        Finding { line, detail }
    }

    fn from_validation(line: String) -> Finding {
        let code = line.split(' ').next().unwrap_or_default().to_string();
        Finding {
            detail: json!({"code": code, "message": line}),
            line: format!("ERROR {line}"),
        }
    }

    pub fn to_json(&self) -> Value {
        self.detail.clone()
    }
}

/// A loaded graph and whatever is wrong with it.
pub struct Session {
    pub graph: Graph,
    pub findings: Vec<Finding>,
}

impl Session {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

fn hierarchy(args: &Common, doc: &GraphDocument, base: &Path) -> Result<TagHierarchy, SchemaError> {
    let path = match (&args.tags, &doc.tags_file) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => base.join(p),
        (None, None) => return Ok(shipped_hierarchy()),
    };
    TagHierarchy::from_file(&path).map_err(|e| SchemaError::new(path.display().to_string(), e))
}

/// Load `args.graph` leniently: connection errors and validation problems
/// become findings; anything else is a schema error.
pub fn open(args: &Common) -> Result<Session, SchemaError> {
    let file = args.graph.display().to_string();
    let text = std::fs::read_to_string(&args.graph).map_err(|e| SchemaError::new(&file, e))?;
    let mut doc = GraphDocument::from_json(&text).map_err(|e| to_schema(&file, e))?;
    if let Some(seed) = args.seed {
        doc.seed = seed;
        if let Some(a) = &mut doc.action {
            a.seed = seed;
        }
    }
    let base = args.graph.parent().unwrap_or(Path::new(".")).to_path_buf();
    let h = hierarchy(args, &doc, &base)?;
    let reg = Arc::new(std_registry(h).map_err(|e| SchemaError::new("registry", e))?);
    let opts = LoadOptions {
        auto_cast: args.auto_cast,
        lenient: true,
    };
    let (mut graph, errors) = match load_graph(&doc, &reg, opts) {
        Ok(r) => r,
        Err(LoadError::Module { id, source }) if is_type_error(&source) => {
            // A composite whose own wiring fails to type-check: a finding, not a schema problem.
            let code = type_code(&source);
            let finding = Finding {
                line: format!("ERROR {code} in `{id}`: {source}"),
                detail: json!({"code": code, "instance": id, "message": source.to_string()}),
            };
            return Ok(Session {
                graph: Graph::new(reg.clone(), doc.seed),
                findings: vec![finding],
            });
        }
        Err(e) => return Err(to_schema(&file, e)),
    };
    graph.set_base_dir(&base);

    let mut findings: Vec<Finding> = errors.iter().map(Finding::from_graph_error).collect();
    let failed: Vec<&PortRef> = errors
        .iter()
        .filter_map(|e| match e {
            GraphError::Type { to, .. } => Some(to),
            _ => None,
        })
        .collect();
    let mut report = graph.validate();
    // An input left unbound by a rejected connection was already reported.
    report.unbound_inputs.retain(|p| !failed.contains(&p));
    findings.extend(report.lines().into_iter().map(Finding::from_validation));
    Ok(Session { graph, findings })
}

fn is_type_error(e: &ModuleError) -> bool {
    matches!(e.root(), ModuleError::CompositeType(_))
}

fn type_code(e: &ModuleError) -> &'static str {
    match e.root() {
        ModuleError::CompositeType(m) => m.result.as_str(),
        _ => "MODULE",
    }
}

fn to_schema(file: &str, e: LoadError) -> SchemaError {
    match e {
        LoadError::Schema { path, message } => SchemaError::new(format!("{file}:{path}"), message),
        LoadError::UnknownDescriptor { id, class } => SchemaError::new(
            format!("{file}:{id}"),
            format!("unknown descriptor `{class}`"),
        ),
        LoadError::Module { id, source } => SchemaError::new(format!("{file}:{id}"), source),
        other => SchemaError::new(file, other),
    }
}
