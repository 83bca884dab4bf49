//! Finite-difference verification of the tape's gradients.

use std::collections::BTreeMap;

use super::{backward, BackendError, Batch, ParamStore, Plan, RunOptions, Tensor};
use crate::graph::Graph;

pub const MAX_GRAD_CHECK_PARAMS: usize = 10_000;

/// Denominator floor of the relative error `|a - n| / max(|a|, |n|, floor)`,
/// so gradients near zero are judged on absolute error.
pub const REL_ERROR_FLOOR: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    /// Top-level instance owning the parameters.
    pub instance: String,
    pub max_rel_error: f64,
    pub checked: usize,
    /// Elements skipped because a perturbation crossed a kink.
    pub masked: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.max_rel_error <= self.tol)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.max_rel_error)
            .fold(0.0, f64::max)
    }
}

fn owner(key: &str) -> &str {
    let end = key.find(['/', '.']).unwrap_or(key.len());
    &key[..end]
}

/// Which side of zero each kinked kernel's input lies on.
fn kink_pattern(
    plan: &Plan,
    params: &ParamStore<f64>,
    batch: &Batch<f64>,
) -> Result<Vec<bool>, BackendError> {
    let run = plan.run(
        params,
        batch,
        RunOptions {
            record: true,
            check_finite: true,
        },
    )?;
    let tape = run.tape.expect("recorded");
    let mut out = Vec::new();
    for n in tape.nodes.iter().filter(|n| n.kernel.has_kinks()) {
        out.extend(tape.values[&n.inputs[0]].data().iter().map(|&v| v > 0.0));
    }
    Ok(out)
}

/// Compare tape gradients of the first sink against central differences,
/// evaluating in f64. Elements whose ±`epsilon` perturbation moves any relu
/// input across zero are masked.
pub fn grad_check(
    g: &Graph,
    batch: &Batch,
    epsilon: f64,
    tol: f64,
) -> Result<GradCheckReport, BackendError> {
    let plan = Plan::new(g)?;
    let sink = plan
        .sink_names()
        .next()
        .ok_or_else(|| BackendError::UnknownSink("<none>".into()))?
        .to_string();
    let mut params: ParamStore<f64> = g
        .parameters()
        .iter()
        .map(|(k, t)| (k.clone(), t.cast()))
        .collect();
    let total: usize = params.values().map(Tensor::len).sum();
    if total > MAX_GRAD_CHECK_PARAMS {
        return Err(BackendError::TooManyParameters(total));
    }
    let batch: Batch<f64> = batch.iter().map(|(k, t)| (k.clone(), t.cast())).collect();
    let opts = RunOptions {
        record: false,
        check_finite: true,
    };

    let base = plan.run(
        &params,
        &batch,
        RunOptions {
            record: true,
            check_finite: true,
        },
    )?;
    let analytic = backward(base.tape.as_ref().expect("recorded"), &sink)?;
    let base_kinks = kink_pattern(&plan, &params, &batch)?;

    let loss = |params: &ParamStore<f64>| -> Result<f64, BackendError> {
        Ok(plan.run(params, &batch, opts)?.sinks[&sink].data()[0])
    };
    let mut entries: BTreeMap<String, GradCheckEntry> = BTreeMap::new();
    let keys: Vec<String> = params.keys().cloned().collect();
    for key in keys {
        let inst = owner(&key).to_string();
        let entry = entries
            .entry(inst.clone())
            .or_insert_with(|| GradCheckEntry {
                instance: inst,
                max_rel_error: 0.0,
                checked: 0,
                masked: 0,
            });
        for i in 0..params[&key].len() {
            let orig = params[&key].data()[i];
            params.get_mut(&key).unwrap().data_mut()[i] = orig + epsilon;
            let plus = loss(&params)?;
            let kinked =
                !base_kinks.is_empty() && kink_pattern(&plan, &params, &batch)? != base_kinks;
            params.get_mut(&key).unwrap().data_mut()[i] = orig - epsilon;
            let minus = loss(&params)?;
            let kinked = kinked
                || (!base_kinks.is_empty() && kink_pattern(&plan, &params, &batch)? != base_kinks);
            params.get_mut(&key).unwrap().data_mut()[i] = orig;
            if kinked {
                entry.masked += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic[&key].data()[i];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
            entry.max_rel_error = entry.max_rel_error.max(err);
            entry.checked += 1;
        }
    }
    Ok(GradCheckReport {
        entries: entries.into_values().collect(),
        tol,
    })
}
