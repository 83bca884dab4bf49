use std::fmt::Debug;

use num_traits::Float;

use super::BackendError;

/// Floating element type the kernels run on. Models hold `f32`; gradient
/// checking reruns the same kernels in `f64`.
pub trait Element: Float + Default + Debug + Send + Sync + 'static {
    fn of(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Element for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Element for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Dense row-major tensor. A rank-0 tensor holds one scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Element> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self, BackendError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() || shape.contains(&0) && !data.is_empty() {
            return Err(BackendError::BadTensor(format!(
                "shape {shape:?} needs {expected} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); n],
        }
    }

    pub fn scalar(v: T) -> Self {
        Tensor {
            shape: Vec::new(),
            data: vec![v],
        }
    }

    pub fn from_f64(shape: Vec<usize>, data: &[f64]) -> Result<Self, BackendError> {
        Self::new(shape, data.iter().map(|&v| T::of(v)).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Option<T> {
        (self.data.len() == 1).then(|| self.data[0])
    }

    pub fn cast<U: Element>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Tensor<T>) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
    }

    pub fn scale(&mut self, k: T) {
        for a in &mut self.data {
            *a = *a * k;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Reorder axes so that output axis `j` is input axis `perm[j]`.
    pub fn transpose(&self, perm: &[usize]) -> Result<Self, BackendError> {
        let rank = self.rank();
        let mut seen = vec![false; rank];
        if perm.len() != rank
            || perm
                .iter()
                .any(|&p| p >= rank || std::mem::replace(&mut seen[p], true))
        {
            return Err(BackendError::BadTensor(format!(
                "{perm:?} is not a permutation of {rank} axes"
            )));
        }
        let out_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let in_strides = strides(&self.shape);
        let mut out = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; rank];
        for _ in 0..self.data.len() {
            let offset: usize = (0..rank).map(|j| idx[j] * in_strides[perm[j]]).sum();
            out.push(self.data[offset]);
            for j in (0..rank).rev() {
                idx[j] += 1;
                if idx[j] < out_shape[j] {
                    break;
                }
                idx[j] = 0;
            }
        }
        Ok(Tensor {
            shape: out_shape,
            data: out,
        })
    }

    /// Join two tensors along `axis`; all other sizes must agree.
    pub fn concat(&self, other: &Tensor<T>, axis: usize) -> Result<Self, BackendError> {
        let compatible = self.rank() == other.rank()
            && axis < self.rank()
            && (0..self.rank()).all(|i| i == axis || self.shape[i] == other.shape[i]);
        if !compatible {
            return Err(BackendError::BadTensor(format!(
                "cannot concat {:?} and {:?} along axis {axis}",
                self.shape, other.shape
            )));
        }
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let (a_block, b_block) = (self.shape[axis] * inner, other.shape[axis] * inner);
        let mut data = Vec::with_capacity(self.len() + other.len());
        for o in 0..outer {
            data.extend_from_slice(&self.data[o * a_block..(o + 1) * a_block]);
            data.extend_from_slice(&other.data[o * b_block..(o + 1) * b_block]);
        }
        let mut shape = self.shape.clone();
        shape[axis] += other.shape[axis];
        Ok(Tensor { shape, data })
    }

    /// Inverse of [`Tensor::concat`]: cut at `at` along `axis`.
    pub fn split(&self, axis: usize, at: usize) -> Result<(Self, Self), BackendError> {
        if axis >= self.rank() || at > self.shape[axis] {
            return Err(BackendError::BadTensor(format!(
                "cannot split {:?} at {at} along axis {axis}",
                self.shape
            )));
        }
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let block = self.shape[axis] * inner;
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for o in 0..outer {
            let row = &self.data[o * block..(o + 1) * block];
            a.extend_from_slice(&row[..at * inner]);
            b.extend_from_slice(&row[at * inner..]);
        }
        let mut sa = self.shape.clone();
        sa[axis] = at;
        let mut sb = self.shape.clone();
        sb[axis] -= at;
        Ok((Tensor { shape: sa, data: a }, Tensor { shape: sb, data: b }))
    }
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

pub fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (j, &p) in perm.iter().enumerate() {
        inv[p] = j;
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iota(shape: &[usize]) -> Tensor<f32> {
        let n: usize = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|v| v as f32).collect()).unwrap()
    }

    #[test]
    fn new_checks_element_count() {
        assert!(Tensor::<f32>::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert_eq!(
            Tensor::<f32>::new(vec![], vec![1.5]).unwrap().item(),
            Some(1.5)
        );
    }

    #[test]
    fn transpose_2d() {
        let t = iota(&[2, 3]);
        let u = t.transpose(&[1, 0]).unwrap();
        assert_eq!(u.shape(), &[3, 2]);
        assert_eq!(u.data(), &[0.0, 3.0, 1.0, 4.0, 2.0, 5.0]);
        assert!(t.transpose(&[0, 0]).is_err());
    }

    #[test]
    fn concat_middle_axis() {
        let a = iota(&[2, 1, 2]);
        let b = iota(&[2, 2, 2]);
        let c = a.concat(&b, 1).unwrap();
        assert_eq!(c.shape(), &[2, 3, 2]);
        assert_eq!(
            c.data(),
            &[0.0, 1.0, 0.0, 1.0, 2.0, 3.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]
        );
    }

    fn shape_and_perm() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
        prop::collection::vec(1usize..4, 1..5).prop_flat_map(|shape| {
            let n = shape.len();
            (Just(shape), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
        })
    }

    proptest! {
        #[test]
        fn transpose_inverse_roundtrips((shape, perm) in shape_and_perm(), seed in 0u32..1000) {
            let n: usize = shape.iter().product();
            let t = Tensor::<f32>::new(shape.clone(), (0..n).map(|i| (i as f32 + seed as f32) * 0.37).collect()).unwrap();
            let back = t.transpose(&perm).unwrap().transpose(&inverse_permutation(&perm)).unwrap();
            prop_assert_eq!(back.shape(), t.shape());
            let bits = |x: &Tensor<f32>| x.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back), bits(&t));
        }

        #[test]
        fn concat_then_split_recovers(shape in prop::collection::vec(1usize..4, 1..4), extra in 1usize..4, axis_pick in 0usize..4) {
            let axis = axis_pick % shape.len();
            let mut other_shape = shape.clone();
            other_shape[axis] = extra;
            let a = iota(&shape);
            let b = iota(&other_shape).map(|v| -v - 0.5);
            let (a2, b2) = a.concat(&b, axis).unwrap().split(axis, shape[axis]).unwrap();
            prop_assert_eq!(a2, a);
            prop_assert_eq!(b2, b);
        }
    }
}
