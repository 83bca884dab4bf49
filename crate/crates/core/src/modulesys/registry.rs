use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};

use super::descriptor::{build_kernel, param_shapes};
use super::{
    CompositeTemplate, Implementation, InnerEnd, InnerMismatch, InnerWire, InstanceBody,
    ModuleDescriptor, ModuleError, ModuleInstance, Params, PortSpec,
};
use crate::backend::Tensor;
use crate::typesys::{compare_types, is_identifier, TagHierarchy};
use crate::util::mix_seed;

/// Named module descriptors, all checked against one frozen tag hierarchy.
#[derive(Debug, Clone)]
pub struct Registry {
    hierarchy: Arc<TagHierarchy>,
    descriptors: IndexMap<String, Arc<ModuleDescriptor>>,
}

/// Split `node.port`.
pub(crate) fn split_ref(s: &str) -> Option<(&str, &str)> {
    let (a, b) = s.split_once('.')?;
    (!a.is_empty() && !b.is_empty() && !b.contains('.')).then_some((a, b))
}

impl Registry {
    pub fn new(hierarchy: Arc<TagHierarchy>) -> Result<Self, ModuleError> {
        if !hierarchy.is_frozen() {
            return Err(ModuleError::Type(crate::typesys::TypeSysError::NotFrozen));
        }
        Ok(Registry {
            hierarchy,
            descriptors: IndexMap::new(),
        })
    }

    pub fn hierarchy(&self) -> &Arc<TagHierarchy> {
        &self.hierarchy
    }

    pub fn get(&self, name: &str) -> Result<&Arc<ModuleDescriptor>, ModuleError> {
        self.descriptors
            .get(name)
            .ok_or_else(|| ModuleError::UnknownDescriptor(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.descriptors.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.descriptors.keys().map(String::as_str)
    }

    /// Register a descriptor file (JSON with `name`, `params`, `inputs`, `outputs`, `impl`).
    pub fn register_json(&mut self, text: &str) -> Result<(), ModuleError> {
        self.register(ModuleDescriptor::from_json(text)?)
    }

    pub fn register(&mut self, mut d: ModuleDescriptor) -> Result<(), ModuleError> {
        if self.descriptors.contains_key(&d.name) {
            return Err(ModuleError::DuplicateDescriptor(d.name));
        }
        if !is_identifier(&d.name) {
            return Err(ModuleError::InvalidId(d.name));
        }
        d.params.check()?;
        for (i, p) in d.inputs.iter().enumerate() {
            if d.inputs[..i].iter().any(|q| q.name == p.name) || !is_identifier(&p.name) {
                return Err(ModuleError::InvalidDescriptor(format!(
                    "bad or duplicate input port `{}`",
                    p.name
                )));
            }
        }
        for (i, p) in d.outputs.iter().enumerate() {
            if d.outputs[..i].iter().any(|q| q.name == p.name) || !is_identifier(&p.name) {
                return Err(ModuleError::InvalidDescriptor(format!(
                    "bad or duplicate output port `{}`",
                    p.name
                )));
            }
        }
        d.trainable = match &d.implementation {
            Implementation::Primitive(kind) => {
                let arity = build_arity(*kind);
                if d.inputs.len() != arity || d.outputs.len() != 1 {
                    return Err(ModuleError::InvalidDescriptor(format!(
                        "primitive `{}` needs {arity} inputs and 1 output",
                        d.name
                    )));
                }
                !kind.param_names().is_empty()
            }
            Implementation::DataLayer(_) => {
                if !d.inputs.is_empty() {
                    return Err(ModuleError::InvalidDescriptor(format!(
                        "data layer `{}` cannot have input ports",
                        d.name
                    )));
                }
                false
            }
            Implementation::Composite(t) => self.check_composite(&d, t)?,
        };
        self.descriptors.insert(d.name.clone(), Arc::new(d));
        Ok(())
    }

    /// Structural validation of a composite's sub-graph. Returns whether any
    /// child is trainable.
    fn check_composite(
        &self,
        d: &ModuleDescriptor,
        t: &CompositeTemplate,
    ) -> Result<bool, ModuleError> {
        let bad = |msg: String| ModuleError::InvalidComposite(format!("{}: {msg}", d.name));
        let mut nodes: HashMap<&str, &ModuleDescriptor> = HashMap::new();
        let mut trainable = false;
        for n in &t.nodes {
            if !is_identifier(&n.id) || n.id == "in" || n.id == "out" {
                return Err(bad(format!("invalid node id `{}`", n.id)));
            }
            if n.class == d.name {
                return Err(bad("a composite cannot contain itself".into()));
            }
            let child = self
                .get(&n.class)
                .map_err(|_| bad(format!("node `{}` uses unregistered `{}`", n.id, n.class)))?;
            if child.is_data_layer() {
                return Err(bad(format!("node `{}` is a data layer", n.id)));
            }
            if n.repeat.is_some() && (child.inputs.len() != 1 || child.outputs.len() != 1) {
                return Err(bad(format!(
                    "repeated node `{}` needs exactly one input and one output",
                    n.id
                )));
            }
            if nodes.insert(&n.id, child).is_some() {
                return Err(bad(format!("duplicate node id `{}`", n.id)));
            }
            trainable |= child.trainable;
        }

        let mut bound: HashMap<(String, String), usize> = HashMap::new();
        let mut edges: Vec<(&str, &str)> = Vec::new();
        for w in &t.wiring {
            let (fnode, fport) =
                split_ref(&w.from).ok_or_else(|| bad(format!("bad endpoint `{}`", w.from)))?;
            let (tnode, tport) =
                split_ref(&w.to).ok_or_else(|| bad(format!("bad endpoint `{}`", w.to)))?;
            let from_ok = match fnode {
                "in" => d.input(fport).is_some(),
                "out" => false,
                n => nodes.get(n).is_some_and(|c| c.output(fport).is_some()),
            };
            if !from_ok {
                return Err(bad(format!("`{}` is not a source port", w.from)));
            }
            let to_ok = match tnode {
                "out" => d.output(tport).is_some(),
                "in" => false,
                n => nodes.get(n).is_some_and(|c| c.input(tport).is_some()),
            };
            if !to_ok {
                return Err(bad(format!("`{}` is not a destination port", w.to)));
            }
            *bound
                .entry((tnode.to_string(), tport.to_string()))
                .or_default() += 1;
            if fnode != "in" && tnode != "out" {
                edges.push((fnode, tnode));
            }
        }
        for n in &t.nodes {
            for p in &nodes[n.id.as_str()].inputs {
                match bound.get(&(n.id.clone(), p.name.clone())) {
                    Some(1) => {}
                    Some(_) => {
                        return Err(bad(format!("`{}.{}` bound more than once", n.id, p.name)))
                    }
                    None => return Err(bad(format!("`{}.{}` is unbound", n.id, p.name))),
                }
            }
        }
        for p in &d.outputs {
            if bound.get(&("out".to_string(), p.name.clone())) != Some(&1) {
                return Err(bad(format!(
                    "output `{}` must be bound exactly once",
                    p.name
                )));
            }
        }
        let ids: Vec<&str> = t.nodes.iter().map(|n| n.id.as_str()).collect();
        if crate::graph::has_cycle(&ids, &edges) {
            return Err(bad("sub-graph has a cycle".into()));
        }
        Ok(trainable)
    }

    /// Validate parameters, resolve port types and initialize state.
    pub fn instantiate(
        &self,
        name: &str,
        values: &Map<String, Value>,
        instance_id: &str,
        graph_seed: u64,
    ) -> Result<ModuleInstance, ModuleError> {
        if !is_identifier(instance_id) {
            return Err(ModuleError::InvalidId(instance_id.to_string()));
        }
        self.instantiate_at(name, values, instance_id, instance_id, graph_seed, 0)
    }

    fn instantiate_at(
        &self,
        name: &str,
        values: &Map<String, Value>,
        id: &str,
        path: &str,
        graph_seed: u64,
        depth: usize,
    ) -> Result<ModuleInstance, ModuleError> {
        if depth > super::MAX_DEPTH {
            return Err(ModuleError::RecursionLimit(path.to_string()));
        }
        let descriptor = self.get(name)?.clone();
        let params = descriptor.params.validate(values)?;
        let resolve = |decls: &[super::PortDecl]| -> Result<Vec<PortSpec>, ModuleError> {
            decls
                .iter()
                .map(|p| {
                    Ok(PortSpec {
                        name: p.name.clone(),
                        ty: p.rule.resolve(&self.hierarchy, &params).map_err(|e| {
                            ModuleError::PortType {
                                port: p.name.clone(),
                                message: e.to_string(),
                            }
                        })?,
                    })
                })
                .collect()
        };
        let inputs = resolve(&descriptor.inputs)?;
        let outputs = resolve(&descriptor.outputs)?;

        let body = match &descriptor.implementation {
            Implementation::DataLayer(src) => InstanceBody::DataLayer(*src),
            Implementation::Primitive(kind) => {
                let kernel = build_kernel(*kind, &params)?;
                let zeros =
                    matches!(params.get("init"), Some(super::ParamValue::Str(s)) if s == "zeros");
                let extra = params.int("seed").unwrap_or(0);
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(graph_seed ^ extra as u64, path));
                let mut state = BTreeMap::new();
                for (pname, shape) in kind.param_names().iter().zip(param_shapes(*kind, &params)?) {
                    state.insert(pname.to_string(), init_tensor(&shape, zeros, &mut rng));
                }
                InstanceBody::Primitive { kernel, state }
            }
            Implementation::Composite(t) => self.expand(
                &descriptor,
                t,
                &params,
                &inputs,
                &outputs,
                path,
                graph_seed,
                depth,
            )?,
        };
        Ok(ModuleInstance {
            id: id.to_string(),
            descriptor,
            params,
            inputs,
            outputs,
            body,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn expand(
        &self,
        d: &ModuleDescriptor,
        t: &CompositeTemplate,
        params: &Params,
        inputs: &[PortSpec],
        outputs: &[PortSpec],
        path: &str,
        graph_seed: u64,
        depth: usize,
    ) -> Result<InstanceBody, ModuleError> {
        let mut children: Vec<ModuleInstance> = Vec::new();
        // node id -> indices of its copies, in chain order
        let mut copies: HashMap<&str, Vec<usize>> = HashMap::new();
        for n in &t.nodes {
            let count = match &n.repeat {
                None => 1,
                Some(expr) => {
                    let c = super::template::eval_int(expr, params)?;
                    usize::try_from(c).map_err(|_| {
                        ModuleError::InvalidParams(format!(
                            "node `{}` repeat count {c} is negative",
                            n.id
                        ))
                    })?
                }
            };
            let child_params = super::template::substitute(&n.params, params)?;
            let mut idx = Vec::with_capacity(count);
            for i in 0..count {
                let cid = if n.repeat.is_some() {
                    format!("{}_{i}", n.id)
                } else {
                    n.id.clone()
                };
                let child = self
                    .instantiate_at(
                        &n.class,
                        &child_params,
                        &cid,
                        &format!("{path}/{cid}"),
                        graph_seed,
                        depth + 1,
                    )
                    .map_err(|e| e.within(&format!("{}/{}", d.name, n.id)))?;
                idx.push(children.len());
                children.push(child);
            }
            copies.insert(&n.id, idx);
        }

        let mut wiring = Vec::new();
        for n in &t.nodes {
            for pair in copies[n.id.as_str()].windows(2) {
                let (a, b) = (&children[pair[0]], &children[pair[1]]);
                wiring.push(InnerWire {
                    from: InnerEnd::Child {
                        index: pair[0],
                        port: a.outputs[0].name.clone(),
                    },
                    to: InnerEnd::Child {
                        index: pair[1],
                        port: b.inputs[0].name.clone(),
                    },
                });
            }
        }

        // Source feeding each node's chain input, to pass zero-copy chains through.
        let feeds: HashMap<&str, &str> = t
            .wiring
            .iter()
            .filter_map(|w| split_ref(&w.to).map(|(n, _)| (n, w.from.as_str())))
            .collect();
        let resolve_from = |wire: usize| -> Result<InnerEnd, ModuleError> {
            let mut r = t.wiring[wire].from.as_str();
            for _ in 0..=t.nodes.len() {
                let (node, port) = split_ref(r).expect("checked at registration");
                if node == "in" {
                    return Ok(InnerEnd::Boundary(port.to_string()));
                }
                match copies[node].last() {
                    Some(&i) => {
                        return Ok(InnerEnd::Child {
                            index: i,
                            port: port.to_string(),
                        })
                    }
                    None => r = feeds[node],
                }
            }
            Err(ModuleError::InvalidComposite(format!(
                "{}: pass-through chain does not terminate",
                d.name
            )))
        };
        for (wi, w) in t.wiring.iter().enumerate() {
            let (tnode, tport) = split_ref(&w.to).expect("checked at registration");
            let to = if tnode == "out" {
                InnerEnd::Boundary(tport.to_string())
            } else {
                match copies[tnode].first() {
                    Some(&i) => InnerEnd::Child {
                        index: i,
                        port: tport.to_string(),
                    },
                    None => continue,
                }
            };
            wiring.push(InnerWire {
                from: resolve_from(wi)?,
                to,
            });
        }

        let h = &self.hierarchy;
        for w in &wiring {
            let (src_name, src_ty) = match &w.from {
                InnerEnd::Boundary(p) => (
                    format!("in.{p}"),
                    &inputs.iter().find(|s| &s.name == p).unwrap().ty,
                ),
                InnerEnd::Child { index, port } => {
                    let c = &children[*index];
                    (format!("{}.{port}", c.id), &c.output(port).unwrap().ty)
                }
            };
            let (dst_name, dst_ty) = match &w.to {
                InnerEnd::Boundary(p) => (
                    format!("out.{p}"),
                    &outputs.iter().find(|s| &s.name == p).unwrap().ty,
                ),
                InnerEnd::Child { index, port } => {
                    let c = &children[*index];
                    (format!("{}.{port}", c.id), &c.input(port).unwrap().ty)
                }
            };
            let result = compare_types(h, src_ty, dst_ty).map_err(ModuleError::Type)?;
            if !result.is_accepted() {
                return Err(ModuleError::CompositeType(Box::new(InnerMismatch {
                    composite: d.name.clone(),
                    from: src_name,
                    to: dst_name,
                    result,
                    producer: src_ty.to_string(),
                    consumer: dst_ty.to_string(),
                })));
            }
        }
        Ok(InstanceBody::Composite { children, wiring })
    }
}

fn build_arity(kind: crate::backend::KernelKind) -> usize {
    use crate::backend::KernelKind::*;
    match kind {
        NllLoss | MseLoss | Accuracy | Concat | Add => 2,
        _ => 1,
    }
}

/// Glorot-uniform for matrices (`fan_out = shape[0]`, `fan_in = shape[1]`),
/// zeros for vectors or when `zeros` is set.
fn init_tensor(shape: &[usize], zeros: bool, rng: &mut ChaCha8Rng) -> Tensor {
    if zeros || shape.len() < 2 {
        return Tensor::zeros(shape);
    }
    let (fan_out, fan_in) = (shape[0] as f64, shape[1] as f64);
    let a = (6.0 / (fan_in + fan_out)).sqrt() as f32;
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-a..a)).collect();
    Tensor::new(shape.to_vec(), data).expect("element count matches shape")
}
