use serde::{Deserialize, Serialize};

use super::RuntimeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Train,
    Eval,
    Infer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerConfig {
    Sgd {
        lr: f64,
        #[serde(default)]
        momentum: f64,
    },
    Adam {
        lr: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn one() -> usize {
    1
}

impl OptimizerConfig {
    pub fn lr(&self) -> f64 {
        match self {
            OptimizerConfig::Sgd { lr, .. } | OptimizerConfig::Adam { lr, .. } => *lr,
        }
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Sgd {
            lr: 0.1,
            momentum: 0.0,
        }
    }
}

/// Settings for one action run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionConfig {
    #[serde(alias = "action")]
    pub kind: ActionKind,
    #[serde(default)]
    pub max_steps: u64,
    pub batch_size: usize,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "one")]
    pub accumulation_steps: usize,
    #[serde(default)]
    pub seed: u64,
    /// Checkpoint to resume training from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
}

impl ActionConfig {
    pub fn train(max_steps: u64, batch_size: usize, optimizer: OptimizerConfig) -> Self {
        ActionConfig {
            kind: ActionKind::Train,
            max_steps,
            batch_size,
            optimizer,
            accumulation_steps: 1,
            seed: 0,
            checkpoint: None,
        }
    }

    pub fn eval(batch_size: usize) -> Self {
        ActionConfig {
            kind: ActionKind::Eval,
            ..ActionConfig::train(0, batch_size, OptimizerConfig::default())
        }
    }

    pub fn validate(&self) -> Result<(), RuntimeError> {
        let bad = |m: &str| Err(RuntimeError::InvalidConfig(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be ≥ 1");
        }
        if self.accumulation_steps == 0 {
            return bad("accumulation_steps must be ≥ 1");
        }
        if self.optimizer.lr().is_nan() || self.optimizer.lr() <= 0.0 {
            return bad("lr must be > 0");
        }
        if let OptimizerConfig::Adam {
            beta1, beta2, eps, ..
        } = self.optimizer
        {
            if !(0.0..1.0).contains(&beta1)
                || !(0.0..1.0).contains(&beta2)
                || eps.is_nan()
                || eps <= 0.0
            {
                return bad("adam needs 0 ≤ beta < 1 and eps > 0");
            }
        }
        Ok(())
    }
}

/// A callback as written in a graph file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CallbackSpec {
    LossLog {
        interval_steps: u64,
        /// Also append log lines to this file.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<String>,
    },
    Checkpoint {
        interval_steps: u64,
        path: String,
    },
    Evaluator {
        interval_steps: u64,
        /// Graph file of the evaluation graph.
        graph: String,
    },
}

impl CallbackSpec {
    pub fn interval(&self) -> u64 {
        match self {
            CallbackSpec::LossLog { interval_steps, .. }
            | CallbackSpec::Checkpoint { interval_steps, .. }
            | CallbackSpec::Evaluator { interval_steps, .. } => *interval_steps,
        }
    }
}
