//! Primitive kernels: forward evaluation and vector-Jacobian products.

use std::cell::Cell;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::tensor::{inverse_permutation, Element, Tensor};
use super::BackendError;

thread_local! {
    static INVOCATIONS: Cell<u64> = const { Cell::new(0) };
}

/// Number of kernel forward evaluations performed on this thread.
pub fn kernel_invocations() -> u64 {
    INVOCATIONS.with(|c| c.get())
}

/// Input gradients (`None` for index inputs) and parameter gradients.
pub type Vjp<T> = (Vec<Option<Tensor<T>>>, Vec<Tensor<T>>);

/// Which primitive a descriptor lowers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Linear,
    Relu,
    Tanh,
    LogSoftmax,
    NllLoss,
    MseLoss,
    Accuracy,
    Concat,
    Transpose,
    EmbeddingLookup,
    RnnTanh,
    Add,
}

impl KernelKind {
    /// Names of the trainable tensors, in the order kernels receive them.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            KernelKind::Linear => &["weight", "bias"],
            KernelKind::EmbeddingLookup => &["table"],
            KernelKind::RnnTanh => &["w_in", "w_rec", "bias"],
            _ => &[],
        }
    }
}

/// A configured primitive, ready to evaluate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Kernel {
    Linear,
    Relu,
    Tanh,
    /// Along the last axis, max-subtracted.
    LogSoftmax,
    /// Mean negative log-likelihood over positions whose label is not `ignore_index`.
    NllLoss {
        ignore_index: i64,
    },
    MseLoss,
    Accuracy {
        ignore_index: i64,
    },
    Concat {
        axis: usize,
    },
    /// Output axis `j` is input axis `perm[j]`.
    Transpose {
        perm: Vec<usize>,
    },
    EmbeddingLookup,
    /// `h_t = tanh(W_in x_t + W_rec h_{t-1} + b)`, `h_{-1} = 0`, over the second-to-last axis.
    RnnTanh,
    Add,
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Kernel {
    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Linear => "linear",
            Kernel::Relu => "relu",
            Kernel::Tanh => "tanh",
            Kernel::LogSoftmax => "log_softmax",
            Kernel::NllLoss { .. } => "nll_loss",
            Kernel::MseLoss => "mse_loss",
            Kernel::Accuracy { .. } => "accuracy",
            Kernel::Concat { .. } => "concat",
            Kernel::Transpose { .. } => "transpose",
            Kernel::EmbeddingLookup => "embedding_lookup",
            Kernel::RnnTanh => "rnn_tanh",
            Kernel::Add => "add",
        }
    }

    pub fn kind(&self) -> KernelKind {
        match self {
            Kernel::Linear => KernelKind::Linear,
            Kernel::Relu => KernelKind::Relu,
            Kernel::Tanh => KernelKind::Tanh,
            Kernel::LogSoftmax => KernelKind::LogSoftmax,
            Kernel::NllLoss { .. } => KernelKind::NllLoss,
            Kernel::MseLoss => KernelKind::MseLoss,
            Kernel::Accuracy { .. } => KernelKind::Accuracy,
            Kernel::Concat { .. } => KernelKind::Concat,
            Kernel::Transpose { .. } => KernelKind::Transpose,
            Kernel::EmbeddingLookup => KernelKind::EmbeddingLookup,
            Kernel::RnnTanh => KernelKind::RnnTanh,
            Kernel::Add => KernelKind::Add,
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            Kernel::NllLoss { .. }
            | Kernel::MseLoss
            | Kernel::Accuracy { .. }
            | Kernel::Concat { .. }
            | Kernel::Add => 2,
            _ => 1,
        }
    }

    /// Whether the kernel has points where its derivative jumps.
    pub fn has_kinks(&self) -> bool {
        matches!(self, Kernel::Relu)
    }

    fn fail<V>(&self, message: impl Into<String>) -> Result<V, BackendError> {
        Err(BackendError::Kernel {
            kernel: self.name(),
            message: message.into(),
        })
    }

    fn check_arity<T>(
        &self,
        inputs: &[&Tensor<T>],
        params: &[&Tensor<T>],
    ) -> Result<(), BackendError> {
        let want = self.kind().param_names().len();
        if inputs.len() != self.arity() || params.len() != want {
            return self.fail(format!(
                "expected {} inputs and {want} parameters, got {} and {}",
                self.arity(),
                inputs.len(),
                params.len()
            ));
        }
        Ok(())
    }

    pub fn forward<T: Element>(
        &self,
        inputs: &[&Tensor<T>],
        params: &[&Tensor<T>],
    ) -> Result<Tensor<T>, BackendError> {
        self.check_arity(inputs, params)?;
        INVOCATIONS.with(|c| c.set(c.get() + 1));
        let x = inputs[0];
        match self {
            Kernel::Linear => linear(self, x, params[0], params[1]),
            Kernel::Relu => Ok(x.map(|v| if v > T::zero() { v } else { T::zero() })),
            Kernel::Tanh => Ok(x.map(|v| v.tanh())),
            Kernel::LogSoftmax => {
                let k = last_dim(self, x)?;
                let mut out = x.clone();
                for row in out.data_mut().chunks_mut(k) {
                    let m = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
                    let s = row.iter().fold(T::zero(), |a, &v| a + (v - m).exp());
                    let log_s = s.ln();
                    for v in row.iter_mut() {
                        *v = *v - m - log_s;
                    }
                }
                Ok(out)
            }
            Kernel::NllLoss { ignore_index } => {
                let (rows, k, labels) = class_rows(self, x, inputs[1], *ignore_index)?;
                let mut total = T::zero();
                let mut count = 0usize;
                for (r, label) in labels.iter().enumerate().take(rows) {
                    if let Some(c) = label {
                        total = total + x.data()[r * k + c];
                        count += 1;
                    }
                }
                let loss = if count == 0 {
                    T::zero()
                } else {
                    -total / T::of(count as f64)
                };
                Ok(Tensor::scalar(loss))
            }
            Kernel::Accuracy { ignore_index } => {
                let (_, k, labels) = class_rows(self, x, inputs[1], *ignore_index)?;
                let mut hits = 0usize;
                let mut count = 0usize;
                for (r, label) in labels.iter().enumerate() {
                    if let Some(c) = label {
                        let row = &x.data()[r * k..(r + 1) * k];
                        let mut best = 0;
                        for (i, &v) in row.iter().enumerate() {
                            if v > row[best] {
                                best = i;
                            }
                        }
                        hits += usize::from(best == *c);
                        count += 1;
                    }
                }
                let acc = if count == 0 {
                    0.0
                } else {
                    hits as f64 / count as f64
                };
                Ok(Tensor::scalar(T::of(acc)))
            }
            Kernel::MseLoss => {
                let t = inputs[1];
                if x.len() != t.len() {
                    return self.fail(format!(
                        "prediction {:?} vs target {:?}",
                        x.shape(),
                        t.shape()
                    ));
                }
                let n = x.len().max(1);
                let total = x
                    .data()
                    .iter()
                    .zip(t.data())
                    .fold(T::zero(), |a, (&p, &q)| a + (p - q) * (p - q));
                Ok(Tensor::scalar(total / T::of(n as f64)))
            }
            Kernel::Concat { axis } => x.concat(inputs[1], *axis),
            Kernel::Transpose { perm } => x.transpose(perm),
            Kernel::EmbeddingLookup => {
                let table = params[0];
                let (vocab, dim) = (table.shape()[0], table.shape()[1]);
                let mut data = Vec::with_capacity(x.len() * dim);
                for &id in x.data() {
                    let row = token_index(self, id, vocab)?;
                    data.extend_from_slice(&table.data()[row * dim..(row + 1) * dim]);
                }
                let mut shape = x.shape().to_vec();
                shape.push(dim);
                Tensor::new(shape, data)
            }
            Kernel::RnnTanh => rnn_forward(self, x, params[0], params[1], params[2]),
            Kernel::Add => {
                if x.shape() != inputs[1].shape() {
                    return self.fail(format!("{:?} + {:?}", x.shape(), inputs[1].shape()));
                }
                let mut out = x.clone();
                out.add_assign(inputs[1]);
                Ok(out)
            }
        }
    }

    /// Gradients of a scalar objective with respect to inputs and parameters,
    /// given the gradient `dy` with respect to the output `y`.
    /// Inputs that carry indices or labels get `None`.
    pub fn vjp<T: Element>(
        &self,
        inputs: &[&Tensor<T>],
        params: &[&Tensor<T>],
        y: &Tensor<T>,
        dy: &Tensor<T>,
    ) -> Result<Vjp<T>, BackendError> {
        self.check_arity(inputs, params)?;
        let x = inputs[0];
        let out = match self {
            Kernel::Linear => {
                let (dx, dw, db) = linear_vjp(x, params[0], dy);
                (vec![Some(dx)], vec![dw, db])
            }
            Kernel::Relu => {
                let mut dx = dy.clone();
                for (g, &v) in dx.data_mut().iter_mut().zip(x.data()) {
                    if v <= T::zero() {
                        *g = T::zero();
                    }
                }
                (vec![Some(dx)], vec![])
            }
            Kernel::Tanh => {
                let mut dx = dy.clone();
                for (g, &t) in dx.data_mut().iter_mut().zip(y.data()) {
                    *g = *g * (T::one() - t * t);
                }
                (vec![Some(dx)], vec![])
            }
            Kernel::LogSoftmax => {
                let k = last_dim(self, x)?;
                let mut dx = dy.clone();
                for (g, yr) in dx.data_mut().chunks_mut(k).zip(y.data().chunks(k)) {
                    let s = g.iter().fold(T::zero(), |a, &v| a + v);
                    for (gi, &yi) in g.iter_mut().zip(yr) {
                        *gi = *gi - yi.exp() * s;
                    }
                }
                (vec![Some(dx)], vec![])
            }
            Kernel::NllLoss { ignore_index } => {
                let (_, k, labels) = class_rows(self, x, inputs[1], *ignore_index)?;
                let count = labels.iter().filter(|l| l.is_some()).count();
                let mut dx = Tensor::zeros(x.shape());
                if count > 0 {
                    let g = dy.data()[0] / T::of(count as f64);
                    for (r, label) in labels.iter().enumerate() {
                        if let Some(c) = label {
                            dx.data_mut()[r * k + c] = -g;
                        }
                    }
                }
                (vec![Some(dx), None], vec![])
            }
            Kernel::Accuracy { .. } => (vec![None, None], vec![]),
            Kernel::MseLoss => {
                let t = inputs[1];
                let n = T::of(x.len().max(1) as f64);
                let g = dy.data()[0];
                let two = T::of(2.0);
                let mut dp = x.clone();
                for (d, &q) in dp.data_mut().iter_mut().zip(t.data()) {
                    *d = g * two * (*d - q) / n;
                }
                let dt = dp.map(|v| -v);
                (vec![Some(dp), Some(dt)], vec![])
            }
            Kernel::Concat { axis } => {
                let (a, b) = dy.split(*axis, x.shape()[*axis])?;
                (vec![Some(a), Some(b)], vec![])
            }
            Kernel::Transpose { perm } => (
                vec![Some(dy.transpose(&inverse_permutation(perm))?)],
                vec![],
            ),
            Kernel::EmbeddingLookup => {
                let table = params[0];
                let (vocab, dim) = (table.shape()[0], table.shape()[1]);
                let mut dt = Tensor::zeros(table.shape());
                for (i, &id) in x.data().iter().enumerate() {
                    let row = token_index(self, id, vocab)?;
                    for d in 0..dim {
                        let slot = &mut dt.data_mut()[row * dim + d];
                        *slot = *slot + dy.data()[i * dim + d];
                    }
                }
                (vec![None], vec![dt])
            }
            Kernel::RnnTanh => {
                let (dx, grads) = rnn_vjp(x, params[0], params[1], y, dy);
                (vec![Some(dx)], grads)
            }
            Kernel::Add => (vec![Some(dy.clone()), Some(dy.clone())], vec![]),
        };
        Ok(out)
    }
}

fn last_dim<T: Element>(k: &Kernel, x: &Tensor<T>) -> Result<usize, BackendError> {
    match x.shape().last() {
        Some(&d) if d > 0 => Ok(d),
        _ => k.fail(format!("needs a non-empty last axis, got {:?}", x.shape())),
    }
}

fn token_index<T: Element>(k: &Kernel, id: T, vocab: usize) -> Result<usize, BackendError> {
    let v = id.as_f64();
    if v.fract() != 0.0 || v < 0.0 || v >= vocab as f64 {
        return k.fail(format!("index {v} outside [0, {vocab})"));
    }
    Ok(v as usize)
}

/// Row count, class count and per-row class (None when ignored).
fn class_rows<T: Element>(
    k: &Kernel,
    logp: &Tensor<T>,
    labels: &Tensor<T>,
    ignore_index: i64,
) -> Result<(usize, usize, Vec<Option<usize>>), BackendError> {
    let classes = last_dim(k, logp)?;
    let rows = logp.len() / classes;
    if labels.len() != rows {
        return k.fail(format!(
            "{rows} prediction rows but {} labels",
            labels.len()
        ));
    }
    let mut out = Vec::with_capacity(rows);
    for &l in labels.data() {
        let v = l.as_f64();
        if v == ignore_index as f64 {
            out.push(None);
        } else {
            out.push(Some(token_index(k, l, classes)?));
        }
    }
    Ok((rows, classes, out))
}

fn linear<T: Element>(
    k: &Kernel,
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<Tensor<T>, BackendError> {
    let (out_f, in_f) = (w.shape()[0], w.shape()[1]);
    if x.shape().last() != Some(&in_f) {
        return k.fail(format!("input {:?} does not end in {in_f}", x.shape()));
    }
    let rows = x.len() / in_f;
    let mut data = Vec::with_capacity(rows * out_f);
    for r in 0..rows {
        let xr = &x.data()[r * in_f..(r + 1) * in_f];
        for o in 0..out_f {
            let wr = &w.data()[o * in_f..(o + 1) * in_f];
            let acc = xr
                .iter()
                .zip(wr)
                .fold(b.data()[o], |a, (&xi, &wi)| a + xi * wi);
            data.push(acc);
        }
    }
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = out_f;
    Tensor::new(shape, data)
}

fn linear_vjp<T: Element>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    dy: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let (out_f, in_f) = (w.shape()[0], w.shape()[1]);
    let rows = x.len() / in_f;
    let mut dx = Tensor::zeros(x.shape());
    let mut dw = Tensor::zeros(w.shape());
    let mut db = Tensor::zeros(&[out_f]);
    for r in 0..rows {
        let xr = &x.data()[r * in_f..(r + 1) * in_f];
        let gr = &dy.data()[r * out_f..(r + 1) * out_f];
        for (o, &g) in gr.iter().enumerate() {
            db.data_mut()[o] = db.data()[o] + g;
            for (i, &xi) in xr.iter().enumerate() {
                let slot = &mut dw.data_mut()[o * in_f + i];
                *slot = *slot + g * xi;
                let dslot = &mut dx.data_mut()[r * in_f + i];
                *dslot = *dslot + g * w.data()[o * in_f + i];
            }
        }
    }
    (dx, dw, db)
}

fn rnn_dims<T: Element>(x: &Tensor<T>, w_in: &Tensor<T>) -> (usize, usize, usize, usize) {
    let hidden = w_in.shape()[0];
    let in_f = w_in.shape()[1];
    let steps = x.shape()[x.rank() - 2];
    let seqs = x.len() / (steps * in_f).max(1);
    (seqs, steps, in_f, hidden)
}

fn rnn_forward<T: Element>(
    k: &Kernel,
    x: &Tensor<T>,
    w_in: &Tensor<T>,
    w_rec: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<Tensor<T>, BackendError> {
    if x.rank() < 2 || x.shape().last() != Some(&w_in.shape()[1]) {
        return k.fail(format!(
            "input {:?} is not [.., Time, {}]",
            x.shape(),
            w_in.shape()[1]
        ));
    }
    let (seqs, steps, in_f, hidden) = rnn_dims(x, w_in);
    let mut out = vec![T::zero(); seqs * steps * hidden];
    for s in 0..seqs {
        for t in 0..steps {
            let xt = &x.data()[(s * steps + t) * in_f..(s * steps + t + 1) * in_f];
            for h in 0..hidden {
                let mut acc = b.data()[h];
                for (i, &xi) in xt.iter().enumerate() {
                    acc = acc + w_in.data()[h * in_f + i] * xi;
                }
                if t > 0 {
                    let prev = (s * steps + t - 1) * hidden;
                    for j in 0..hidden {
                        acc = acc + w_rec.data()[h * hidden + j] * out[prev + j];
                    }
                }
                out[(s * steps + t) * hidden + h] = acc.tanh();
            }
        }
    }
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = hidden;
    Tensor::new(shape, out)
}

fn rnn_vjp<T: Element>(
    x: &Tensor<T>,
    w_in: &Tensor<T>,
    w_rec: &Tensor<T>,
    y: &Tensor<T>,
    dy: &Tensor<T>,
) -> (Tensor<T>, Vec<Tensor<T>>) {
    let (seqs, steps, in_f, hidden) = rnn_dims(x, w_in);
    let mut dx = Tensor::zeros(x.shape());
    let mut dw_in = Tensor::zeros(w_in.shape());
    let mut dw_rec = Tensor::zeros(w_rec.shape());
    let mut db = Tensor::zeros(&[hidden]);
    let h = y.data();
    for s in 0..seqs {
        let mut carry = vec![T::zero(); hidden];
        for t in (0..steps).rev() {
            let base = (s * steps + t) * hidden;
            let dpre: Vec<T> = (0..hidden)
                .map(|j| {
                    let ht = h[base + j];
                    (dy.data()[base + j] + carry[j]) * (T::one() - ht * ht)
                })
                .collect();
            let xt = (s * steps + t) * in_f;
            for (j, &g) in dpre.iter().enumerate() {
                db.data_mut()[j] = db.data()[j] + g;
                for i in 0..in_f {
                    let slot = &mut dw_in.data_mut()[j * in_f + i];
                    *slot = *slot + g * x.data()[xt + i];
                    let dslot = &mut dx.data_mut()[xt + i];
                    *dslot = *dslot + g * w_in.data()[j * in_f + i];
                }
            }
            carry = vec![T::zero(); hidden];
            if t > 0 {
                let prev = (s * steps + t - 1) * hidden;
                for (j, &g) in dpre.iter().enumerate() {
                    for m in 0..hidden {
                        let slot = &mut dw_rec.data_mut()[j * hidden + m];
                        *slot = *slot + g * h[prev + m];
                        carry[m] = carry[m] + g * w_rec.data()[j * hidden + m];
                    }
                }
            }
        }
    }
    (dx, vec![dw_in, dw_rec, db])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(shape.to_vec(), data).unwrap()
    }

    #[test]
    fn linear_identity_weights() {
        let x = t(&[2, 3], &[1.0, -2.0, 3.5, 0.25, 0.0, -1.0]);
        let w = t(&[3, 3], &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let b = Tensor::zeros(&[3]);
        let y = Kernel::Linear.forward(&[&x], &[&w, &b]).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn linear_matches_naive_matmul() {
        // y = x · Wᵀ with x 2×3 and Wᵀ 3×2
        let x = [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let wt = [[7.0, 8.0], [9.0, 10.0], [11.0, 12.0]];
        let mut expected = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..3 {
                    expected[i][j] += x[i][k] * wt[k][j];
                }
            }
        }
        let xt = t(&[2, 3], &x.concat());
        let w = t(&[2, 3], &[7.0, 9.0, 11.0, 8.0, 10.0, 12.0]);
        let y = Kernel::Linear
            .forward(&[&xt], &[&w, &Tensor::zeros(&[2])])
            .unwrap();
        assert_eq!(y.data(), &expected.concat()[..]);
        assert_eq!(y.data(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn log_softmax_of_zeros_is_minus_log_k() {
        let x = Tensor::<f32>::zeros(&[1, 4]);
        let y = Kernel::LogSoftmax.forward(&[&x], &[]).unwrap();
        for &v in y.data() {
            assert!((v as f64 + 4f64.ln()).abs() < 1e-6, "{v}");
        }
        assert!((y.data()[0] - (-1.386_294)).abs() < 1e-6);
    }

    #[test]
    fn log_softmax_is_stable_for_large_inputs() {
        let x = t(&[1, 3], &[1000.0, 1000.0, 1000.0]);
        let y = Kernel::LogSoftmax.forward(&[&x], &[]).unwrap();
        assert!(y.all_finite());
    }

    #[test]
    fn nll_of_uniform_is_log_k() {
        let logp = Tensor::<f32>::new(vec![3, 10], vec![-(10f32.ln()); 30]).unwrap();
        let labels = Tensor::<f32>::new(vec![3, 1], vec![0.0, 4.0, 9.0]).unwrap();
        let loss = Kernel::NllLoss { ignore_index: -1 }
            .forward(&[&logp, &labels], &[])
            .unwrap();
        assert!((loss.item().unwrap() - std::f32::consts::LN_10).abs() < 1e-6);
    }

    #[test]
    fn nll_skips_ignored_and_rejects_bad_labels() {
        let logp = t(&[2, 2], &[-0.1, -2.0, -3.0, -0.2]);
        let labels = t(&[2, 1], &[0.0, -1.0]);
        let k = Kernel::NllLoss { ignore_index: -1 };
        assert_eq!(k.forward(&[&logp, &labels], &[]).unwrap().item(), Some(0.1));
        let bad = t(&[2, 1], &[0.0, 2.0]);
        assert!(k.forward(&[&logp, &bad], &[]).is_err());
    }

    #[test]
    fn accuracy_counts_argmax_hits() {
        let logp = t(&[3, 2], &[-0.1, -2.0, -3.0, -0.2, -0.5, -0.6]);
        let labels = t(&[3, 1], &[0.0, 1.0, 1.0]);
        let acc = Kernel::Accuracy { ignore_index: -1 }
            .forward(&[&logp, &labels], &[])
            .unwrap();
        assert!((acc.item().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn mse_of_equal_inputs_has_zero_gradient() {
        let x = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let loss = Kernel::MseLoss.forward(&[&x, &x], &[]).unwrap();
        assert_eq!(loss.item(), Some(0.0));
        let (g, _) = Kernel::MseLoss
            .vjp(&[&x, &x], &[], &loss, &Tensor::scalar(1.0))
            .unwrap();
        assert!(g[0].as_ref().unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn embedding_gathers_rows() {
        let ids = t(&[1, 3], &[2.0, 0.0, 2.0]);
        let table = t(&[3, 2], &[0.0, 0.1, 1.0, 1.1, 2.0, 2.1]);
        let y = Kernel::EmbeddingLookup.forward(&[&ids], &[&table]).unwrap();
        assert_eq!(y.shape(), &[1, 3, 2]);
        assert_eq!(y.data(), &[2.0, 2.1, 0.0, 0.1, 2.0, 2.1]);
        let (_, g) = Kernel::EmbeddingLookup
            .vjp(
                &[&ids],
                &[&table],
                &y,
                &Tensor::from_f64(vec![1, 3, 2], &[1.0; 6]).unwrap(),
            )
            .unwrap();
        assert_eq!(g[0].data(), &[1.0, 1.0, 0.0, 0.0, 2.0, 2.0]);
    }

    #[test]
    fn rnn_with_zero_recurrence_is_per_step() {
        let x = t(&[1, 2, 2], &[0.5, -1.0, 2.0, 0.25]);
        let w_in = t(&[1, 2], &[0.3, -0.7]);
        let w_rec = t(&[1, 1], &[0.0]);
        let b = t(&[1], &[0.1]);
        let y = Kernel::RnnTanh
            .forward(&[&x], &[&w_in, &w_rec, &b])
            .unwrap();
        let step = |a: f64, c: f64| (0.3 * a - 0.7 * c + 0.1f64).tanh();
        for (a, e) in y.data().iter().zip([step(0.5, -1.0), step(2.0, 0.25)]) {
            assert!((a - e).abs() < 1e-12, "{a} vs {e}");
        }
    }

    #[test]
    fn forward_counts_invocations() {
        let before = kernel_invocations();
        let x = t(&[2], &[1.0, -1.0]);
        Kernel::Relu.forward(&[&x], &[]).unwrap();
        assert_eq!(kernel_invocations(), before + 1);
    }

    #[test]
    fn arity_is_checked() {
        let x = t(&[2], &[1.0, -1.0]);
        assert!(Kernel::Add.forward(&[&x], &[]).is_err());
        assert!(Kernel::Linear.forward(&[&x], &[]).is_err());
    }
}
