use std::collections::BTreeMap;

use super::{BackendError, Batch, Element, ParamStore, Tape, Tensor};
use crate::graph::Graph;
use crate::modulesys::{lower_steps, InstanceBody, KernelStep, ModuleInstance, SourceStep, Step};
use crate::typesys::NeuralType;

#[derive(Debug, Clone)]
pub(crate) enum PlanStep {
    Kernel(KernelStep),
    Source(SourceStep),
}

/// Declared type of a value at some port, checked when the value appears.
#[derive(Debug, Clone)]
struct PortCheck {
    instance: String,
    port: String,
    ty: NeuralType,
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub record: bool,
    pub check_finite: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            record: false,
            check_finite: true,
        }
    }
}

/// A validated graph lowered to a flat list of kernel and source steps.
#[derive(Debug, Clone)]
pub struct Plan {
    steps: Vec<PlanStep>,
    checks: BTreeMap<String, Vec<PortCheck>>,
    sinks: Vec<(String, String)>,
}

/// Outcome of one evaluation: sink values keyed `<instance>.<port>` and the
/// tape when recording.
#[derive(Debug, Clone)]
pub struct Run<T: Element = f32> {
    pub sinks: BTreeMap<String, Tensor<T>>,
    pub tape: Option<Tape<T>>,
}

impl Plan {
    pub fn new(g: &Graph) -> Result<Plan, BackendError> {
        let order = g.topo_order().map_err(|_| BackendError::NotValidated)?;
        let mut steps = Vec::with_capacity(order.len());
        for id in &order {
            let inst = g.instance(id).expect("topo order lists graph instances");
            let inputs = g
                .bindings()
                .iter()
                .filter(|b| &b.to.instance == id)
                .map(|b| (b.to.port.clone(), b.from.producer.to_string()))
                .collect();
            steps.push(Step::Module {
                instance: inst,
                path: id.clone(),
                inputs,
            });
        }
        let lowered = lower_steps(steps)?;

        let mut checks: BTreeMap<String, Vec<PortCheck>> = BTreeMap::new();
        let mut add = |value: &str, instance: &str, port: &str, ty: &NeuralType| {
            checks
                .entry(value.to_string())
                .or_default()
                .push(PortCheck {
                    instance: instance.to_string(),
                    port: port.to_string(),
                    ty: ty.clone(),
                });
        };
        // Producer declarations first, so a bad value is blamed on its source.
        for inst in g.instances() {
            output_checks(
                inst,
                &inst.id,
                &|v| lowered.resolve(v).to_string(),
                &mut add,
            );
        }
        for b in g.bindings() {
            let inst = g.instance(&b.to.instance).unwrap();
            let ty = &inst.input(&b.to.port).unwrap().ty;
            add(
                lowered.resolve(&b.from.producer.to_string()),
                &b.to.instance,
                &b.to.port,
                ty,
            );
        }

        let sinks = g
            .sinks()
            .iter()
            .map(|s| {
                let name = s.to_string();
                let value = lowered.resolve(&name).to_string();
                (name, value)
            })
            .collect();
        let steps = lowered
            .steps
            .into_iter()
            .map(|s| match s {
                Step::Kernel(k) => PlanStep::Kernel(k),
                Step::Source(s) => PlanStep::Source(s),
                Step::Module { .. } => unreachable!("lowering leaves no module steps"),
            })
            .collect();
        Ok(Plan {
            steps,
            checks,
            sinks,
        })
    }

    pub fn sources(&self) -> impl Iterator<Item = &SourceStep> {
        self.steps.iter().filter_map(|s| match s {
            PlanStep::Source(s) => Some(s),
            PlanStep::Kernel(_) => None,
        })
    }

    pub fn kernel_steps(&self) -> impl Iterator<Item = &KernelStep> {
        self.steps.iter().filter_map(|s| match s {
            PlanStep::Kernel(k) => Some(k),
            PlanStep::Source(_) => None,
        })
    }

    /// Sink names, `<instance>.<port>`, in designation order.
    pub fn sink_names(&self) -> impl Iterator<Item = &str> {
        self.sinks.iter().map(|(n, _)| n.as_str())
    }

    fn check<T: Element>(&self, value: &str, t: &Tensor<T>) -> Result<(), BackendError> {
        for c in self.checks.get(value).into_iter().flatten() {
            if !c.ty.accepts_shape(t.shape()) {
                return Err(BackendError::ShapeMismatch {
                    instance: c.instance.clone(),
                    port: c.port.clone(),
                    expected: c.ty.to_string(),
                    actual: t.shape().to_vec(),
                });
            }
        }
        Ok(())
    }

    /// Evaluate every step. `batch` supplies each data-layer output.
    pub fn run<T: Element>(
        &self,
        params: &ParamStore<T>,
        batch: &Batch<T>,
        opts: RunOptions,
    ) -> Result<Run<T>, BackendError> {
        let mut values: BTreeMap<String, Tensor<T>> = BTreeMap::new();
        let mut nodes = Vec::new();
        for step in &self.steps {
            match step {
                PlanStep::Source(s) => {
                    for v in &s.outputs {
                        let t = batch
                            .get(v)
                            .ok_or_else(|| BackendError::MissingInput(v.clone()))?;
                        self.check(v, t)?;
                        values.insert(v.clone(), t.clone());
                    }
                }
                PlanStep::Kernel(k) => {
                    let ins = k
                        .inputs
                        .iter()
                        .map(|n| {
                            values
                                .get(n)
                                .ok_or_else(|| BackendError::MissingInput(n.clone()))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    let ps = k
                        .params
                        .iter()
                        .map(|n| {
                            params
                                .get(n)
                                .ok_or_else(|| BackendError::MissingParam(n.clone()))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    let y = k.kernel.forward(&ins, &ps).map_err(|e| match e {
                        BackendError::Kernel { kernel, message } => BackendError::Kernel {
                            kernel,
                            message: format!("at `{}`: {message}", k.path),
                        },
                        e => e,
                    })?;
                    if opts.check_finite && !y.all_finite() {
                        return Err(BackendError::NonFiniteValue {
                            instance: k.path.clone(),
                        });
                    }
                    self.check(&k.output, &y)?;
                    values.insert(k.output.clone(), y);
                    if opts.record {
                        nodes.push(k.clone());
                    }
                }
            }
        }
        let sinks = self
            .sinks
            .iter()
            .map(|(name, v)| {
                let t = values
                    .get(v)
                    .ok_or_else(|| BackendError::MissingInput(v.clone()))?;
                Ok((name.clone(), t.clone()))
            })
            .collect::<Result<BTreeMap<_, _>, BackendError>>()?;
        let tape = opts.record.then(|| Tape {
            nodes,
            values,
            params: params.clone(),
            sinks: self.sinks.iter().cloned().collect(),
        });
        Ok(Run { sinks, tape })
    }
}

fn output_checks(
    inst: &ModuleInstance,
    path: &str,
    resolve: &dyn Fn(&str) -> String,
    add: &mut dyn FnMut(&str, &str, &str, &NeuralType),
) {
    for p in &inst.outputs {
        add(
            &resolve(&format!("{path}.{}", p.name)),
            path,
            &p.name,
            &p.ty,
        );
    }
    if let InstanceBody::Composite { children, .. } = &inst.body {
        for c in children {
            output_checks(c, &format!("{path}/{}", c.id), resolve, add);
        }
    }
}

/// Evaluate a validated graph with its current parameters. Returns sink
/// values keyed `<instance>.<port>` and, when `record` is set, the tape.
pub fn forward(
    g: &Graph,
    batch: &Batch,
    record: bool,
) -> Result<(BTreeMap<String, Tensor>, Option<Tape>), BackendError> {
    let plan = Plan::new(g)?;
    let run = plan.run(
        &g.parameters(),
        batch,
        RunOptions {
            record,
            check_finite: true,
        },
    )?;
    Ok((run.sinks, run.tape))
}
