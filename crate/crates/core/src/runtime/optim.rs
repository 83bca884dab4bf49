use crate::backend::{ParamStore, Tensor};

use super::{OptimizerConfig, RuntimeError};

/// Optimizer with its per-parameter state.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    config: OptimizerConfig,
    /// SGD: velocity. Adam: first moment.
    first: ParamStore,
    /// Adam only: second moment.
    second: ParamStore,
    steps: u64,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Self {
        Optimizer {
            config,
            first: ParamStore::new(),
            second: ParamStore::new(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Apply one update in place.
    pub fn step(&mut self, params: &mut ParamStore, grads: &ParamStore) {
        self.steps += 1;
        for (key, p) in params.iter_mut() {
            let Some(g) = grads.get(key) else { continue };
            match self.config {
                OptimizerConfig::Sgd { lr, momentum } => {
                    let lr = lr as f32;
                    if momentum == 0.0 {
                        for (w, &d) in p.data_mut().iter_mut().zip(g.data()) {
                            *w -= lr * d;
                        }
                    } else {
                        let mu = momentum as f32;
                        let v = self
                            .first
                            .entry(key.clone())
                            .or_insert_with(|| Tensor::zeros(p.shape()));
                        for ((w, vi), &d) in p.data_mut().iter_mut().zip(v.data_mut()).zip(g.data())
                        {
                            *vi = mu * *vi + d;
                            *w -= lr * *vi;
                        }
                    }
                }
                OptimizerConfig::Adam {
                    lr,
                    beta1,
                    beta2,
                    eps,
                } => {
                    let m = self
                        .first
                        .entry(key.clone())
                        .or_insert_with(|| Tensor::zeros(p.shape()));
                    let v = self
                        .second
                        .entry(key.clone())
                        .or_insert_with(|| Tensor::zeros(p.shape()));
                    let t = self.steps as i32;
                    let c1 = 1.0 - beta1.powi(t);
                    let c2 = 1.0 - beta2.powi(t);
                    let (b1, b2) = (beta1 as f32, beta2 as f32);
                    for (((w, mi), vi), &d) in p
                        .data_mut()
                        .iter_mut()
                        .zip(m.data_mut())
                        .zip(v.data_mut())
                        .zip(g.data())
                    {
                        *mi = b1 * *mi + (1.0 - b1) * d;
                        *vi = b2 * *vi + (1.0 - b2) * d * d;
                        let m_hat = *mi as f64 / c1;
                        let v_hat = *vi as f64 / c2;
                        *w -= (lr * m_hat / (v_hat.sqrt() + eps)) as f32;
                    }
                }
            }
        }
    }

    /// State as named tensors: `first/<key>`, `second/<key>` and `steps`.
    pub fn state(&self) -> ParamStore {
        let mut out = ParamStore::new();
        for (k, t) in &self.first {
            out.insert(format!("first/{k}"), t.clone());
        }
        for (k, t) in &self.second {
            out.insert(format!("second/{k}"), t.clone());
        }
        // Split so counts past 2^24 survive the f32 entry format.
        let (hi, lo) = ((self.steps >> 20) as f32, (self.steps & 0xfffff) as f32);
        out.insert(
            "steps".into(),
            Tensor::new(vec![2], vec![hi, lo]).expect("two elements"),
        );
        out
    }

    pub fn load_state(&mut self, state: &ParamStore) -> Result<(), RuntimeError> {
        self.first.clear();
        self.second.clear();
        self.steps = 0;
        for (k, t) in state {
            if let Some(key) = k.strip_prefix("first/") {
                self.first.insert(key.to_string(), t.clone());
            } else if let Some(key) = k.strip_prefix("second/") {
                self.second.insert(key.to_string(), t.clone());
            } else if k == "steps" && t.len() == 2 {
                self.steps = ((t.data()[0] as u64) << 20) | t.data()[1] as u64;
            } else {
                return Err(RuntimeError::Checkpoint(format!(
                    "unexpected optimizer entry `{k}`"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(v: &[f32]) -> ParamStore {
        ParamStore::from([(
            "w".to_string(),
            Tensor::new(vec![v.len()], v.to_vec()).unwrap(),
        )])
    }

    #[test]
    fn sgd_plain_and_momentum() {
        let mut p = store(&[1.0, 2.0]);
        let g = store(&[0.5, -1.0]);
        Optimizer::new(OptimizerConfig::Sgd {
            lr: 0.1,
            momentum: 0.0,
        })
        .step(&mut p, &g);
        assert_eq!(p["w"].data(), &[0.95, 2.1]);

        let mut p = store(&[0.0]);
        let mut o = Optimizer::new(OptimizerConfig::Sgd {
            lr: 1.0,
            momentum: 0.5,
        });
        o.step(&mut p, &store(&[1.0]));
        o.step(&mut p, &store(&[1.0]));
        // v1 = 1, v2 = 1.5
        assert_eq!(p["w"].data(), &[-2.5]);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = store(&[0.0, 0.0]);
        let mut o = Optimizer::new(OptimizerConfig::Adam {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        });
        o.step(&mut p, &store(&[3.0, -0.2]));
        assert!((p["w"].data()[0] + 0.01).abs() < 1e-6);
        assert!((p["w"].data()[1] - 0.01).abs() < 1e-6);
    }

    #[test]
    fn state_round_trips() {
        let mut p = store(&[0.3]);
        let mut o = Optimizer::new(OptimizerConfig::Adam {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        });
        for _ in 0..3 {
            o.step(&mut p, &store(&[1.0]));
        }
        let mut r = Optimizer::new(o.config);
        r.load_state(&o.state()).unwrap();
        assert_eq!(r, o);
    }
}
