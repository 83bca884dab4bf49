use std::collections::BTreeMap;

use super::{BackendError, Element, ParamStore, Tensor};
use crate::modulesys::KernelStep;

/// Record of one forward evaluation: the kernel steps in order, every value
/// they saw or produced, and the parameters they used.
#[derive(Debug, Clone)]
pub struct Tape<T: Element = f32> {
    pub(crate) nodes: Vec<KernelStep>,
    pub(crate) values: BTreeMap<String, Tensor<T>>,
    pub(crate) params: ParamStore<T>,
    pub(crate) sinks: BTreeMap<String, String>,
}

impl<T: Element> Tape<T> {
    pub fn nodes(&self) -> &[KernelStep] {
        &self.nodes
    }

    pub fn value(&self, name: &str) -> Option<&Tensor<T>> {
        self.values.get(name)
    }

    /// Value behind a sink `<instance>.<port>`.
    pub fn sink(&self, name: &str) -> Option<&Tensor<T>> {
        self.sinks.get(name).and_then(|v| self.values.get(v))
    }

    /// Re-evaluate every node from its recorded inputs; true iff each output
    /// is reproduced bit for bit.
    pub fn replay(&self) -> Result<bool, BackendError> {
        for n in &self.nodes {
            let ins: Vec<&Tensor<T>> = n.inputs.iter().map(|i| &self.values[i]).collect();
            let ps: Vec<&Tensor<T>> = n.params.iter().map(|p| &self.params[p]).collect();
            let y = n.kernel.forward(&ins, &ps)?;
            let same = y.shape() == self.values[&n.output].shape()
                && y.data()
                    .iter()
                    .zip(self.values[&n.output].data())
                    .all(|(a, b)| a.as_f64().to_bits() == b.as_f64().to_bits());
            if !same {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Gradient of a scalar sink with respect to every parameter used in the
/// forward pass. Parameters the sink does not depend on get zeros.
pub fn backward<T: Element>(tape: &Tape<T>, sink: &str) -> Result<ParamStore<T>, BackendError> {
    let value = tape
        .sinks
        .get(sink)
        .ok_or_else(|| BackendError::UnknownSink(sink.to_string()))?;
    let y = tape
        .values
        .get(value)
        .ok_or_else(|| BackendError::UnknownSink(sink.to_string()))?;
    if y.len() != 1 {
        return Err(BackendError::NonScalarSink(sink.to_string()));
    }
    let mut grads: BTreeMap<&str, Tensor<T>> = BTreeMap::new();
    grads.insert(value, Tensor::new(y.shape().to_vec(), vec![T::one()])?);

    let mut pgrads: ParamStore<T> = tape
        .params
        .iter()
        .map(|(k, t)| (k.clone(), Tensor::zeros(t.shape())))
        .collect();
    for n in tape.nodes.iter().rev() {
        let Some(dy) = grads.remove(n.output.as_str()) else {
            continue;
        };
        let ins: Vec<&Tensor<T>> = n.inputs.iter().map(|i| &tape.values[i]).collect();
        let ps: Vec<&Tensor<T>> = n.params.iter().map(|p| &tape.params[p]).collect();
        let (dins, dps) = n.kernel.vjp(&ins, &ps, &tape.values[&n.output], &dy)?;
        for (name, d) in n.inputs.iter().zip(dins) {
            if let Some(d) = d {
                match grads.get_mut(name.as_str()) {
                    Some(acc) => acc.add_assign(&d),
                    None => {
                        grads.insert(name, d);
                    }
                }
            }
        }
        for (name, d) in n.params.iter().zip(dps) {
            pgrads
                .get_mut(name)
                .expect("tape holds every used parameter")
                .add_assign(&d);
        }
    }
    Ok(pgrads)
}
