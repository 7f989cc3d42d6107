use alloc::format;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{matmul_a_bt_acc, matmul_acc, matmul_at_b_acc};
use super::{NeuralError, Param, Parameters, Tensor};

/// Fully connected layer `y = x·W + b` on `[batch, in]` inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Param,
    pub bias: Param,
    inputs: usize,
    units: usize,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(name: &str, inputs: usize, units: usize, rng: &mut R) -> Self {
        Self {
            weight: Param::glorot(
                format!("{name}.weight"),
                &[inputs, units],
                inputs,
                units,
                rng,
            ),
            bias: Param::zeros(format!("{name}.bias"), &[units]),
            inputs,
            units,
        }
    }

    pub fn units(&self) -> usize {
        self.units
    }

    fn check(&self, x: &Tensor) -> Result<usize, NeuralError> {
        x.require_rank(2, "dense input")?;
        if x.dim(1) != self.inputs {
            return Err(NeuralError::Width {
                what: "dense input",
                expected: self.inputs,
                got: x.dim(1),
            });
        }
        Ok(x.dim(0))
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor, NeuralError> {
        let batch = self.check(x)?;
        let mut out = Vec::with_capacity(batch * self.units);
        for _ in 0..batch {
            out.extend_from_slice(self.bias.data());
        }
        matmul_acc(
            x.data(),
            self.weight.data(),
            &mut out,
            batch,
            self.inputs,
            self.units,
        );
        Tensor::new(alloc::vec![batch, self.units], out)
    }

    pub fn backward(&mut self, x: &Tensor, dy: &Tensor) -> Result<Tensor, NeuralError> {
        let batch = self.check(x)?;
        let (n_in, n_out) = (self.inputs, self.units);
        matmul_at_b_acc(
            x.data(),
            dy.data(),
            self.weight.grad_mut(),
            batch,
            n_in,
            n_out,
        );
        let db = self.bias.grad_mut();
        for row in dy.data().chunks_exact(n_out) {
            for (g, &d) in db.iter_mut().zip(row) {
                *g += d;
            }
        }
        let mut dx = alloc::vec![0.0; batch * n_in];
        matmul_a_bt_acc(dy.data(), self.weight.data(), &mut dx, batch, n_in, n_out);
        Tensor::new(alloc::vec![batch, n_in], dx)
    }
}

impl Parameters for Dense {
    fn params(&self) -> Vec<&Param> {
        alloc::vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        alloc::vec![&mut self.weight, &mut self.bias]
    }
}

pub fn relu(x: &Tensor) -> Tensor {
    let data = x
        .data()
        .iter()
        .map(|&v| if v > 0.0 { v } else { 0.0 })
        .collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

/// Gradient through a ReLU given its output `y`.
pub fn relu_backward(y: &Tensor, dy: &Tensor) -> Tensor {
    let data = y
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::new(y.shape().to_vec(), data).expect("same shape")
}
