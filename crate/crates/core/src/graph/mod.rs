//! The activation-flow DAG: module instances, type-checked bindings between
//! their ports, validation, and the graph-description file format.

mod document;
mod validate;

pub use document::{
    load_graph, load_graph_file, BindingDoc, GraphDocument, LoadError, LoadOptions, ModuleDoc,
};
pub(crate) use validate::has_cycle;
pub use validate::ValidationReport;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use indexmap::IndexMap;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::backend::{ParamStore, Tensor};
use crate::modulesys::{split_ref, ModuleError, ModuleInstance, Registry};
use crate::runtime::{ActionConfig, CallbackSpec};
use crate::typesys::{
    compare_types, transpose_permutation, Comparison, NeuralType, TagHierarchy, TypeSysError,
};
use crate::util::Fnv64;

/// `instance_id.port_name`
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PortRef {
    pub instance: String,
    pub port: String,
}

impl PortRef {
    pub fn new(instance: &str, port: &str) -> Self {
        PortRef {
            instance: instance.to_string(),
            port: port.to_string(),
        }
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.instance, self.port)
    }
}

impl FromStr for PortRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        split_ref(s)
            .map(|(i, p)| PortRef::new(i, p))
            .ok_or_else(|| format!("`{s}` is not of the form instance.port"))
    }
}

/// An output port value as seen while wiring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorHandle {
    pub producer: PortRef,
    pub ty: NeuralType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub from: TensorHandle,
    pub to: PortRef,
    pub comparison: Comparison,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("{result} at {from} -> {to}: {producer} vs {consumer}")]
    Type {
        result: Comparison,
        from: PortRef,
        to: PortRef,
        producer: NeuralType,
        consumer: NeuralType,
    },
    #[error("input {0} is already bound")]
    PortAlreadyBound(PortRef),
    #[error("unknown port {0}")]
    UnknownPort(PortRef),
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("instance id `{0}` is already used")]
    DuplicateInstance(String),
    #[error("instance `{id}`: {source}")]
    Module { id: String, source: ModuleError },
    #[error(transparent)]
    TypeSys(#[from] TypeSysError),
    #[error("graph has not been validated")]
    NotValidated,
    #[error("implicit cast needs a registered `Transpose` descriptor")]
    CastUnavailable,
    #[error("parameter `{0}` does not exist or has the wrong shape")]
    Parameter(String),
}

impl GraphError {
    /// Short stable name for diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            GraphError::Type { result, .. } => result.as_str(),
            GraphError::PortAlreadyBound(_) => "PORT_ALREADY_BOUND",
            GraphError::UnknownPort(_) => "UNKNOWN_PORT",
            GraphError::UnknownInstance(_) => "UNKNOWN_INSTANCE",
            GraphError::DuplicateInstance(_) => "DUPLICATE_INSTANCE",
            GraphError::Module { .. } => "MODULE",
            GraphError::TypeSys(_) => "TYPE_SYSTEM",
            GraphError::NotValidated => "NOT_VALIDATED",
            GraphError::CastUnavailable => "CAST_UNAVAILABLE",
            GraphError::Parameter(_) => "PARAMETER",
        }
    }
}

/// Module instances wired into a DAG. Building and validating a graph never
/// evaluates a kernel; computation happens only when a runtime action runs.
#[derive(Debug, Clone)]
pub struct Graph {
    seed: u64,
    registry: Arc<Registry>,
    instances: IndexMap<String, ModuleInstance>,
    bindings: Vec<Binding>,
    sinks: Vec<PortRef>,
    validated: bool,
    casts: usize,
    base_dir: Option<PathBuf>,
    tags_file: Option<String>,
    pub action: Option<ActionConfig>,
    pub callbacks: Vec<CallbackSpec>,
}

impl Graph {
    pub fn new(registry: Arc<Registry>, seed: u64) -> Self {
        Graph {
            seed,
            registry,
            instances: IndexMap::new(),
            bindings: Vec::new(),
            sinks: Vec::new(),
            validated: false,
            casts: 0,
            base_dir: None,
            tags_file: None,
            action: None,
            callbacks: Vec::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn registry(&self) -> &Arc<Registry> {
        &self.registry
    }

    pub fn hierarchy(&self) -> &TagHierarchy {
        self.registry.hierarchy()
    }

    /// Directory relative data paths are resolved against.
    pub fn base_dir(&self) -> Option<&Path> {
        self.base_dir.as_deref()
    }

    pub fn set_base_dir(&mut self, dir: impl Into<PathBuf>) {
        self.base_dir = Some(dir.into());
    }

    pub fn tags_file(&self) -> Option<&str> {
        self.tags_file.as_deref()
    }

    pub fn set_tags_file(&mut self, path: Option<String>) {
        self.tags_file = path;
    }

    pub fn instances(&self) -> impl Iterator<Item = &ModuleInstance> {
        self.instances.values()
    }

    pub fn instance(&self, id: &str) -> Option<&ModuleInstance> {
        self.instances.get(id)
    }

    pub fn bindings(&self) -> &[Binding] {
        &self.bindings
    }

    pub fn sinks(&self) -> &[PortRef] {
        &self.sinks
    }

    pub fn is_validated(&self) -> bool {
        self.validated
    }

    /// Number of transposes inserted by auto-cast connections.
    pub fn cast_count(&self) -> usize {
        self.casts
    }

    /// Instantiate `class` as `id` and return handles to its outputs.
    pub fn add(
        &mut self,
        class: &str,
        params: Value,
        id: &str,
    ) -> Result<Vec<TensorHandle>, GraphError> {
        let params = match params {
            Value::Object(m) => m,
            Value::Null => Map::new(),
            other => {
                return Err(GraphError::Module {
                    id: id.to_string(),
                    source: ModuleError::InvalidParams(format!(
                        "parameters must be an object, got {other}"
                    )),
                })
            }
        };
        self.add_with(class, &params, id)
    }

    pub fn add_with(
        &mut self,
        class: &str,
        params: &Map<String, Value>,
        id: &str,
    ) -> Result<Vec<TensorHandle>, GraphError> {
        if self.instances.contains_key(id) {
            return Err(GraphError::DuplicateInstance(id.to_string()));
        }
        let inst = self
            .registry
            .instantiate(class, params, id, self.seed)
            .map_err(|source| GraphError::Module {
                id: id.to_string(),
                source,
            })?;
        let handles = inst
            .outputs
            .iter()
            .map(|p| TensorHandle {
                producer: PortRef::new(id, &p.name),
                ty: p.ty.clone(),
            })
            .collect();
        self.instances.insert(id.to_string(), inst);
        self.validated = false;
        Ok(handles)
    }

    pub fn handle(&self, id: &str, port: &str) -> Result<TensorHandle, GraphError> {
        let inst = self
            .instances
            .get(id)
            .ok_or_else(|| GraphError::UnknownInstance(id.to_string()))?;
        let spec = inst
            .output(port)
            .ok_or_else(|| GraphError::UnknownPort(PortRef::new(id, port)))?;
        Ok(TensorHandle {
            producer: PortRef::new(id, port),
            ty: spec.ty.clone(),
        })
    }

    fn consumer_type(&self, to: &PortRef) -> Result<NeuralType, GraphError> {
        let inst = self
            .instances
            .get(&to.instance)
            .ok_or_else(|| GraphError::UnknownInstance(to.instance.clone()))?;
        inst.input(&to.port)
            .map(|p| p.ty.clone())
            .ok_or_else(|| GraphError::UnknownPort(to.clone()))
    }

    /// Type-check and record a binding from `from` into `to_instance.to_port`.
    ///
    /// With `auto_cast`, a `TRANSPOSE_SAME` mismatch is repaired by inserting
    /// a `Transpose` instance; the returned binding is the one feeding the
    /// consumer.
    pub fn connect(
        &mut self,
        from: &TensorHandle,
        to_instance: &str,
        to_port: &str,
        auto_cast: bool,
    ) -> Result<Binding, GraphError> {
        let to = PortRef::new(to_instance, to_port);
        let consumer = self.consumer_type(&to)?;
        // Use the graph's own view of the producer, not a possibly stale handle.
        let from = self.handle(&from.producer.instance, &from.producer.port)?;
        if self.bindings.iter().any(|b| b.to == to) {
            return Err(GraphError::PortAlreadyBound(to));
        }
        let result = compare_types(self.hierarchy(), &from.ty, &consumer)?;
        if result.is_accepted() {
            return Ok(self.push_binding(from, to, result));
        }
        if result == Comparison::TransposeSame && auto_cast {
            return self.insert_cast(from, to, &consumer);
        }
        Err(GraphError::Type {
            result,
            from: from.producer,
            to,
            producer: from.ty,
            consumer,
        })
    }

    fn push_binding(&mut self, from: TensorHandle, to: PortRef, comparison: Comparison) -> Binding {
        let b = Binding {
            from,
            to,
            comparison,
        };
        self.bindings.push(b.clone());
        self.validated = false;
        b
    }

    fn insert_cast(
        &mut self,
        from: TensorHandle,
        to: PortRef,
        consumer: &NeuralType,
    ) -> Result<Binding, GraphError> {
        if !self.registry.contains("Transpose") {
            return Err(GraphError::CastUnavailable);
        }
        let perm = transpose_permutation(from.ty.axes(), consumer.axes())
            .expect("TRANSPOSE_SAME implies a matching permutation");
        let tags: Vec<&str> = from.ty.axes().iter().map(|a| a.tag.name()).collect();
        let dims: Vec<usize> = from.ty.axes().iter().map(|a| a.dim.unwrap_or(0)).collect();
        let base = format!("{}_{}_cast", to.instance, to.port);
        let mut id = base.clone();
        let mut n = 1;
        while self.instances.contains_key(&id) {
            id = format!("{base}{n}");
            n += 1;
        }
        let out = self.add(
            "Transpose",
            json!({"tags": tags, "dims": dims, "perm": perm}),
            &id,
        )?;
        self.connect(&from, &id, "x", false)?;
        let b = self.connect(&out[0], &to.instance, &to.port, false)?;
        self.casts += 1;
        Ok(b)
    }

    /// Designate an output as a graph result (loss, metric or inference output).
    pub fn add_sink(&mut self, handle: &TensorHandle) -> Result<(), GraphError> {
        self.add_sink_ref(handle.producer.clone())
    }

    pub fn add_sink_ref(&mut self, r: PortRef) -> Result<(), GraphError> {
        self.handle(&r.instance, &r.port)?;
        if !self.sinks.contains(&r) {
            self.sinks.push(r);
        }
        self.validated = false;
        Ok(())
    }

    /// Trainable tensors of every instance, keyed `<instance path>.<name>`.
    pub fn parameters(&self) -> ParamStore {
        let mut out = BTreeMap::new();
        for inst in self.instances.values() {
            for (k, t) in inst.parameters(&inst.id) {
                out.insert(k, t.clone());
            }
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.instances
            .values()
            .map(ModuleInstance::parameter_count)
            .sum()
    }

    /// Replace every trainable tensor; `store` must cover exactly the graph's keys.
    pub fn set_parameters(&mut self, store: &ParamStore) -> Result<(), GraphError> {
        let mine = self.parameters();
        for (k, t) in &mine {
            match store.get(k) {
                Some(v) if v.shape() == t.shape() => {}
                _ => return Err(GraphError::Parameter(k.clone())),
            }
        }
        if let Some(extra) = store.keys().find(|k| !mine.contains_key(*k)) {
            return Err(GraphError::Parameter(extra.clone()));
        }
        self.load_matching(store);
        Ok(())
    }

    /// Copy tensors whose key and shape match; returns how many were copied.
    pub fn load_matching(&mut self, store: &ParamStore) -> usize {
        let mut n = 0;
        for inst in self.instances.values_mut() {
            let id = inst.id.clone();
            inst.for_each_param_mut(&id, &mut |k, t: &mut Tensor| {
                if let Some(v) = store.get(k) {
                    if v.shape() == t.shape() {
                        *t = v.clone();
                        n += 1;
                    }
                }
            });
        }
        n
    }

    pub fn parameter_hash(&self) -> u64 {
        parameter_hash(&self.parameters())
    }
}

/// Bit-exact fingerprint of a parameter store.
pub fn parameter_hash(store: &ParamStore) -> u64 {
    let mut h = Fnv64::default();
    for (k, t) in store {
        h.write(k.as_bytes());
        for v in t.data() {
            h.write(&v.to_bits().to_le_bytes());
        }
    }
    h.finish()
}
