use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{evaluate, ActionConfig, CallbackSpec, Checkpoint, Optimizer, RuntimeError};
use crate::backend::ParamStore;
use crate::graph::{load_graph_file, Graph, LoadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Loss,
    Checkpoint,
    Eval,
    Error,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Loss => "loss",
            EventKind::Checkpoint => "checkpoint",
            EventKind::Eval => "eval",
            EventKind::Error => "error",
        }
    }
}

/// Something a callback reported at a step.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub step: u64,
    pub kind: EventKind,
    pub payload: String,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            EventKind::Loss => write!(f, "step={} loss={}", self.step, self.payload),
            k => write!(f, "step={} {} {}", self.step, k.as_str(), self.payload),
        }
    }
}

/// A routine run every `interval` training steps.
#[derive(Debug, Clone)]
pub enum Callback {
    LossLog {
        interval: u64,
        path: Option<PathBuf>,
    },
    /// `{step}` in the path is replaced by the step number.
    Checkpoint { interval: u64, path: PathBuf },
    Evaluator {
        interval: u64,
        graph: Box<Graph>,
        config: ActionConfig,
    },
}

/// Training state visible to callbacks.
pub struct CallbackContext<'a> {
    pub step: u64,
    pub loss: f32,
    pub seed: u64,
    pub params: &'a ParamStore,
    pub optimizer: &'a Optimizer,
    pub batch_size: usize,
}

fn resolve(path: &str, base: Option<&Path>) -> PathBuf {
    match base {
        Some(b) if Path::new(path).is_relative() => b.join(path),
        _ => PathBuf::from(path),
    }
}

impl Callback {
    pub fn interval(&self) -> u64 {
        match self {
            Callback::LossLog { interval, .. }
            | Callback::Checkpoint { interval, .. }
            | Callback::Evaluator { interval, .. } => *interval,
        }
    }

    /// Build a callback; paths resolve against the training graph's directory.
    pub fn from_spec(spec: &CallbackSpec, train: &Graph) -> Result<Callback, RuntimeError> {
        if spec.interval() == 0 {
            return Err(RuntimeError::InvalidConfig(
                "callback interval_steps must be ≥ 1".into(),
            ));
        }
        let base = train.base_dir();
        Ok(match spec {
            CallbackSpec::LossLog {
                interval_steps,
                path,
            } => Callback::LossLog {
                interval: *interval_steps,
                path: path.as_deref().map(|p| resolve(p, base)),
            },
            CallbackSpec::Checkpoint {
                interval_steps,
                path,
            } => Callback::Checkpoint {
                interval: *interval_steps,
                path: resolve(path, base),
            },
            CallbackSpec::Evaluator {
                interval_steps,
                graph,
            } => {
                let file = resolve(graph, base);
                let (mut g, _) =
                    load_graph_file(&file, train.registry(), LoadOptions::default())
                        .map_err(|e| RuntimeError::Load(format!("{}: {e}", file.display())))?;
                let report = g.validate();
                if !report.is_clean() {
                    return Err(RuntimeError::Load(format!(
                        "{}: {}",
                        file.display(),
                        report.lines().join("; ")
                    )));
                }
                let config = g.action.clone().unwrap_or_else(|| ActionConfig::eval(32));
                Callback::Evaluator {
                    interval: *interval_steps,
                    graph: Box::new(g),
                    config,
                }
            }
        })
    }

    /// Callbacks declared in a graph file.
    pub fn from_graph(g: &Graph) -> Result<Vec<Callback>, RuntimeError> {
        g.callbacks
            .iter()
            .map(|s| Callback::from_spec(s, g))
            .collect()
    }

    fn fire(&mut self, ctx: &CallbackContext<'_>) -> Result<Event, RuntimeError> {
        let event = |kind, payload| Event {
            step: ctx.step,
            kind,
            payload,
        };
        match self {
            Callback::LossLog { path, .. } => {
                let e = event(EventKind::Loss, format!("{:.6}", ctx.loss));
                if let Some(p) = path {
                    let io = |err: std::io::Error| RuntimeError::Io {
                        path: p.display().to_string(),
                        message: err.to_string(),
                    };
                    let mut f = std::fs::OpenOptions::new()
                        .create(true)
                        .append(true)
                        .open(&*p)
                        .map_err(io)?;
                    writeln!(f, "{e}").map_err(io)?;
                }
                Ok(e)
            }
            Callback::Checkpoint { path, .. } => {
                let file = PathBuf::from(
                    path.to_string_lossy()
                        .replace("{step}", &ctx.step.to_string()),
                );
                Checkpoint {
                    seed: ctx.seed,
                    params: ctx.params.clone(),
                    optimizer: ctx.optimizer.state(),
                    step: ctx.step,
                }
                .save(&file)?;
                Ok(event(EventKind::Checkpoint, file.display().to_string()))
            }
            Callback::Evaluator { graph, config, .. } => {
                // Evaluate a copy so the evaluation graph keeps its own state.
                let mut g = (**graph).clone();
                g.load_matching(ctx.params);
                let metrics = evaluate(&g, config)?;
                let text: Vec<String> =
                    metrics.iter().map(|(k, v)| format!("{k}={v:.6}")).collect();
                Ok(event(EventKind::Eval, text.join(" ")))
            }
        }
    }
}

/// Fire, in registration order, every callback whose interval divides the
/// step. Failures become error events.
pub fn run_callbacks(callbacks: &mut [Callback], ctx: &CallbackContext<'_>) -> Vec<Event> {
    let mut events = Vec::new();
    for cb in callbacks.iter_mut() {
        if !ctx.step.is_multiple_of(cb.interval()) {
            continue;
        }
        events.push(cb.fire(ctx).unwrap_or_else(|e| Event {
            step: ctx.step,
            kind: EventKind::Error,
            payload: format!("{}: {e}", e.name()),
        }));
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::OptimizerConfig;

    fn ctx<'a>(step: u64, params: &'a ParamStore, opt: &'a Optimizer) -> CallbackContext<'a> {
        CallbackContext {
            step,
            loss: 0.5,
            seed: 1,
            params,
            optimizer: opt,
            batch_size: 4,
        }
    }

    #[test]
    fn loss_log_fires_on_multiples() {
        let params = ParamStore::new();
        let opt = Optimizer::new(OptimizerConfig::default());
        let mut cbs = vec![Callback::LossLog {
            interval: 10,
            path: None,
        }];
        let ev = run_callbacks(&mut cbs, &ctx(30, &params, &opt));
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].to_string(), "step=30 loss=0.500000");
        assert!(run_callbacks(&mut cbs, &ctx(31, &params, &opt)).is_empty());
    }

    #[test]
    fn io_failure_is_an_event() {
        let params = ParamStore::new();
        let opt = Optimizer::new(OptimizerConfig::default());
        let mut cbs = vec![
            Callback::Checkpoint {
                interval: 1,
                path: PathBuf::from("/nonexistent-dir/x/ckpt"),
            },
            Callback::LossLog {
                interval: 1,
                path: None,
            },
        ];
        let ev = run_callbacks(&mut cbs, &ctx(5, &params, &opt));
        assert_eq!(ev.len(), 2);
        assert_eq!(ev[0].kind, EventKind::Error);
        assert_eq!(ev[1].kind, EventKind::Loss);
    }
}
