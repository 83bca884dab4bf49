use std::collections::BTreeMap;
use std::sync::Arc;

use super::{DataSource, ModuleDescriptor, Params};
use crate::backend::{Kernel, Tensor};
use crate::typesys::NeuralType;
use crate::util::Fnv64;

/// A port with its concrete type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortSpec {
    pub name: String,
    pub ty: NeuralType,
}

/// Endpoint of a wire inside a composite instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InnerEnd {
    /// One of the composite's own ports.
    Boundary(String),
    Child {
        index: usize,
        port: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InnerWire {
    pub from: InnerEnd,
    pub to: InnerEnd,
}

#[derive(Debug, Clone)]
pub enum InstanceBody {
    Primitive {
        kernel: Kernel,
        /// Trainable tensors by parameter name, empty for stateless kernels.
        state: BTreeMap<String, Tensor>,
    },
    Composite {
        children: Vec<ModuleInstance>,
        wiring: Vec<InnerWire>,
    },
    DataLayer(DataSource),
}

/// A descriptor bound to concrete parameter values.
#[derive(Debug, Clone)]
pub struct ModuleInstance {
    pub id: String,
    pub descriptor: Arc<ModuleDescriptor>,
    pub params: Params,
    pub inputs: Vec<PortSpec>,
    pub outputs: Vec<PortSpec>,
    pub body: InstanceBody,
}

impl ModuleInstance {
    pub fn class(&self) -> &str {
        &self.descriptor.name
    }

    pub fn input(&self, port: &str) -> Option<&PortSpec> {
        self.inputs.iter().find(|p| p.name == port)
    }

    pub fn output(&self, port: &str) -> Option<&PortSpec> {
        self.outputs.iter().find(|p| p.name == port)
    }

    pub fn is_data_layer(&self) -> bool {
        matches!(self.body, InstanceBody::DataLayer(_))
    }

    /// Trainable tensors keyed `<path>.<name>`, where nested children
    /// extend the path with `/<child id>`.
    pub fn parameters(&self, path: &str) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        self.collect_params(path, &mut out);
        out
    }

    fn collect_params<'a>(&'a self, path: &str, out: &mut Vec<(String, &'a Tensor)>) {
        match &self.body {
            InstanceBody::Primitive { state, .. } => {
                out.extend(state.iter().map(|(k, t)| (format!("{path}.{k}"), t)));
            }
            InstanceBody::Composite { children, .. } => {
                for c in children {
                    c.collect_params(&format!("{path}/{}", c.id), out);
                }
            }
            InstanceBody::DataLayer(_) => {}
        }
    }

    pub fn for_each_param_mut(&mut self, path: &str, f: &mut dyn FnMut(&str, &mut Tensor)) {
        match &mut self.body {
            InstanceBody::Primitive { state, .. } => {
                for (k, t) in state.iter_mut() {
                    f(&format!("{path}.{k}"), t);
                }
            }
            InstanceBody::Composite { children, .. } => {
                for c in children {
                    let p = format!("{path}/{}", c.id);
                    c.for_each_param_mut(&p, f);
                }
            }
            InstanceBody::DataLayer(_) => {}
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters("").iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_trainable(&self) -> bool {
        self.parameter_count() > 0
    }

    /// Fingerprint of every trainable tensor, bit-exact.
    pub fn state_hash(&self) -> u64 {
        let mut h = Fnv64::default();
        for (k, t) in self.parameters(&self.id) {
            h.write(k.as_bytes());
            for v in t.data() {
                h.write(&v.to_bits().to_le_bytes());
            }
        }
        h.finish()
    }
}
