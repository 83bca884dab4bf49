use std::collections::{BTreeMap, BTreeSet};

use super::{DataSource, InnerEnd, InstanceBody, ModuleError, ModuleInstance, MAX_DEPTH};
use crate::backend::Kernel;

/// One kernel evaluation. Values are named `<instance path>.<port>`;
/// parameters `<instance path>.<param>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelStep {
    pub path: String,
    pub kernel: Kernel,
    pub inputs: Vec<String>,
    pub output: String,
    pub params: Vec<String>,
}

/// A data layer emitting one value per output port.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceStep {
    pub path: String,
    pub source: DataSource,
    pub ports: Vec<String>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone)]
pub enum Step<'a> {
    Kernel(KernelStep),
    Source(SourceStep),
    /// Not yet lowered: evaluate `instance` at `path` with the given input values.
    Module {
        instance: &'a ModuleInstance,
        path: String,
        inputs: BTreeMap<String, String>,
    },
}

impl Step<'_> {
    pub fn name(&self) -> &str {
        match self {
            Step::Kernel(k) => k.kernel.name(),
            Step::Source(_) => "source",
            Step::Module { instance, .. } => instance.class(),
        }
    }

    pub fn is_lowered(&self) -> bool {
        !matches!(self, Step::Module { .. })
    }
}

impl PartialEq for Step<'_> {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Step::Kernel(a), Step::Kernel(b)) => a == b,
            (Step::Source(a), Step::Source(b)) => a == b,
            (
                Step::Module {
                    instance: a,
                    path: pa,
                    inputs: ia,
                },
                Step::Module {
                    instance: b,
                    path: pb,
                    inputs: ib,
                },
            ) => std::ptr::eq(*a, *b) && pa == pb && ia == ib,
            _ => false,
        }
    }
}

/// Result of lowering: primitive steps plus value renames introduced where a
/// composite's output is produced by one of its children.
#[derive(Debug, Clone, Default)]
pub struct Lowered<'a> {
    pub steps: Vec<Step<'a>>,
    pub aliases: BTreeMap<String, String>,
}

impl Lowered<'_> {
    pub fn resolve<'s>(&'s self, name: &'s str) -> &'s str {
        self.aliases.get(name).map_or(name, String::as_str)
    }
}

/// Expand every module step into primitive steps, in order.
pub fn lower_steps<'a>(steps: Vec<Step<'a>>) -> Result<Lowered<'a>, ModuleError> {
    let mut out = Lowered::default();
    for step in steps {
        match step {
            Step::Kernel(mut k) => {
                for i in &mut k.inputs {
                    *i = out.resolve(i).to_string();
                }
                out.steps.push(Step::Kernel(k));
            }
            Step::Source(s) => out.steps.push(Step::Source(s)),
            Step::Module {
                instance,
                path,
                inputs,
            } => {
                let inputs = inputs
                    .into_iter()
                    .map(|(p, v)| {
                        let v = out.resolve(&v).to_string();
                        (p, v)
                    })
                    .collect();
                let (steps, outputs) = lower_instance(instance, &path, &inputs)?;
                out.steps.extend(steps);
                for (port, value) in outputs {
                    let name = format!("{path}.{port}");
                    if name != value {
                        out.aliases.insert(name, value);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Lower one instance given the value names feeding its input ports.
/// Returns the steps and the value name behind each output port.
pub fn lower_instance<'a>(
    inst: &'a ModuleInstance,
    path: &str,
    inputs: &BTreeMap<String, String>,
) -> Result<(Vec<Step<'a>>, BTreeMap<String, String>), ModuleError> {
    let mut steps = Vec::new();
    let outputs = lower_into(inst, path, inputs, &mut steps, 0)?;
    Ok((steps, outputs))
}

fn lower_into<'a>(
    inst: &'a ModuleInstance,
    path: &str,
    inputs: &BTreeMap<String, String>,
    steps: &mut Vec<Step<'a>>,
    depth: usize,
) -> Result<BTreeMap<String, String>, ModuleError> {
    if depth > MAX_DEPTH {
        return Err(ModuleError::RecursionLimit(path.to_string()));
    }
    let own_outputs = || {
        inst.outputs
            .iter()
            .map(|p| (p.name.clone(), format!("{path}.{}", p.name)))
            .collect::<BTreeMap<_, _>>()
    };
    match &inst.body {
        InstanceBody::DataLayer(source) => {
            let outputs = own_outputs();
            steps.push(Step::Source(SourceStep {
                path: path.to_string(),
                source: *source,
                ports: inst.outputs.iter().map(|p| p.name.clone()).collect(),
                outputs: outputs.values().cloned().collect(),
            }));
            Ok(outputs)
        }
        InstanceBody::Primitive { kernel, .. } => {
            let ins = inst
                .inputs
                .iter()
                .map(|p| {
                    inputs
                        .get(&p.name)
                        .cloned()
                        .ok_or_else(|| ModuleError::MissingInput(format!("{path}.{}", p.name)))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let outputs = own_outputs();
            steps.push(Step::Kernel(KernelStep {
                path: path.to_string(),
                kernel: kernel.clone(),
                inputs: ins,
                output: outputs[&inst.outputs[0].name].clone(),
                params: kernel
                    .kind()
                    .param_names()
                    .iter()
                    .map(|n| format!("{path}.{n}"))
                    .collect(),
            }));
            Ok(outputs)
        }
        InstanceBody::Composite { children, wiring } => {
            let edges: Vec<(usize, usize)> = wiring
                .iter()
                .filter_map(|w| match (&w.from, &w.to) {
                    (InnerEnd::Child { index: a, .. }, InnerEnd::Child { index: b, .. }) => {
                        Some((*a, *b))
                    }
                    _ => None,
                })
                .collect();
            let order = child_order(children, &edges)
                .ok_or_else(|| ModuleError::RecursionLimit(format!("{path}: cyclic sub-graph")))?;
            let mut produced: Vec<BTreeMap<String, String>> = vec![BTreeMap::new(); children.len()];
            let source_name = |end: &InnerEnd,
                               produced: &[BTreeMap<String, String>]|
             -> Result<String, ModuleError> {
                match end {
                    InnerEnd::Boundary(p) => inputs
                        .get(p)
                        .cloned()
                        .ok_or_else(|| ModuleError::MissingInput(format!("{path}.{p}"))),
                    InnerEnd::Child { index, port } => Ok(produced[*index][port].clone()),
                }
            };
            for c in order {
                let mut child_inputs = BTreeMap::new();
                for w in wiring {
                    if let InnerEnd::Child { index, port } = &w.to {
                        if *index == c {
                            child_inputs.insert(port.clone(), source_name(&w.from, &produced)?);
                        }
                    }
                }
                let child = &children[c];
                produced[c] = lower_into(
                    child,
                    &format!("{path}/{}", child.id),
                    &child_inputs,
                    steps,
                    depth + 1,
                )?;
            }
            let mut outputs = BTreeMap::new();
            for w in wiring {
                if let InnerEnd::Boundary(p) = &w.to {
                    outputs.insert(p.clone(), source_name(&w.from, &produced)?);
                }
            }
            Ok(outputs)
        }
    }
}

/// Topological order of children, smallest id first among ready ones.
fn child_order(children: &[ModuleInstance], edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indeg = vec![0usize; children.len()];
    for &(_, b) in edges {
        indeg[b] += 1;
    }
    let mut ready: BTreeSet<(&str, usize)> = (0..children.len())
        .filter(|&i| indeg[i] == 0)
        .map(|i| (children[i].id.as_str(), i))
        .collect();
    let mut order = Vec::with_capacity(children.len());
    while let Some(first) = ready.pop_first() {
        let i = first.1;
        order.push(i);
        for &(a, b) in edges {
            if a == i {
                indeg[b] -= 1;
                if indeg[b] == 0 {
                    ready.insert((children[b].id.as_str(), b));
                }
            }
        }
    }
    (order.len() == children.len()).then_some(order)
}

impl ModuleInstance {
    /// Lower this instance on its own, with inputs named `input.<port>`.
    pub fn lower(&self) -> Result<Vec<Step<'_>>, ModuleError> {
        let inputs = self
            .inputs
            .iter()
            .map(|p| (p.name.clone(), format!("input.{}", p.name)))
            .collect();
        Ok(lower_instance(self, &self.id, &inputs)?.0)
    }
}
