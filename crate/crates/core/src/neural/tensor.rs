use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent on newer toolchains
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NeuralError;

/// Dense row-major array of doubles with an optional gradient buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    #[serde(skip)]
    grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, NeuralError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(NeuralError::Shape {
                expected: shape,
                len: data.len(),
            });
        }
        Ok(Self {
            shape,
            data,
            grad: None,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: alloc::vec![0.0; n],
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.shape[axis]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Gradient buffer, allocated on first use.
    pub fn grad_mut(&mut self) -> &mut [f64] {
        let n = self.data.len();
        self.grad.get_or_insert_with(|| alloc::vec![0.0; n])
    }

    /// Values and gradient buffer borrowed together.
    pub fn data_and_grad_mut(&mut self) -> (&[f64], &mut [f64]) {
        let n = self.data.len();
        let g = self.grad.get_or_insert_with(|| alloc::vec![0.0; n]);
        (&self.data, g)
    }

    /// Mutable values next to the (possibly empty) gradient.
    pub fn data_mut_and_grad(&mut self) -> (&mut [f64], &[f64]) {
        (&mut self.data, self.grad.as_deref().unwrap_or(&[]))
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub(crate) fn require_rank(&self, rank: usize, what: &'static str) -> Result<(), NeuralError> {
        if self.shape.len() == rank {
            Ok(())
        } else {
            Err(NeuralError::Rank {
                what,
                expected: rank,
                got: self.shape.len(),
            })
        }
    }
}

/// A named trainable tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
}

impl Param {
    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        let mut value = Tensor::zeros(shape);
        value.grad_mut();
        Self {
            name: name.into(),
            value,
        }
    }

    /// Glorot-uniform initialization, `U(-l, l)` with `l = √(6 / (fan_in + fan_out))`.
    pub fn glorot<R: Rng + ?Sized>(
        name: impl Into<String>,
        shape: &[usize],
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(name, shape);
        let limit = Float::sqrt(6.0 / (fan_in + fan_out) as f64);
        for v in p.value.data_mut() {
            *v = rng.random_range(-limit..limit);
        }
        p
    }

    pub fn data(&self) -> &[f64] {
        self.value.data()
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        self.value.data_mut()
    }

    pub fn grad_mut(&mut self) -> &mut [f64] {
        self.value.grad_mut()
    }

    pub fn data_and_grad_mut(&mut self) -> (&[f64], &mut [f64]) {
        self.value.data_and_grad_mut()
    }

    /// Gradient, empty if nothing has been accumulated yet.
    pub fn grad(&self) -> &[f64] {
        self.value.grad().unwrap_or(&[])
    }

    pub fn zero_grad(&mut self) {
        self.value.zero_grad();
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// `out[m×n] += a[m×k] · b[k×n]`
pub(crate) fn matmul_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `out[k×n] += aᵀ · b` with `a[m×k]`, `b[m×n]`.
pub(crate) fn matmul_at_b_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `out[m×k] += a · bᵀ` with `a[m×n]`, `b[k×n]`.
pub(crate) fn matmul_a_bt_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            let dot: f64 = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
            out[i * k + p] += dot;
        }
    }
}
