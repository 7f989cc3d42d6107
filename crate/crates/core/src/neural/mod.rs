//! Differentiable building blocks for the sequence classifiers.
//!
//! Every layer exposes an explicit `forward` that returns what its `backward`
//! needs, and a `backward` that takes the loss gradient with respect to the
//! layer output, accumulates parameter gradients into the parameters' grad
//! buffers and returns the gradient with respect to the layer input. Chaining
//! the backward calls in reverse order is reverse-mode differentiation of the
//! whole network. Everything runs in `f64`.
//!
//! Sequence tensors are `[batch, time, channels]`, row-major.

mod adam;
mod conv;
mod dense;
mod loss;
mod lstm;
mod pool;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use conv::Conv1d;
pub use dense::{relu, relu_backward, Dense};
pub use loss::{softmax, softmax_cross_entropy};
pub use lstm::{lstm_step, BiLstm, BiLstmCache, Lstm, LstmState, LstmStepCache};
pub use pool::{global_avg_pool, global_avg_pool_backward, MaxPool1d, MaxPoolCache};
pub use tensor::{Param, Tensor};

use alloc::string::String;
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NeuralError {
    #[error("data length {len} does not match shape {expected:?}")]
    Shape { expected: Vec<usize>, len: usize },
    #[error("{what}: expected rank {expected}, got {got}")]
    Rank {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{what}: expected width {expected}, got {got}")]
    Width {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("kernel size must be odd, got {0}")]
    EvenKernel(usize),
    #[error("empty time axis")]
    EmptyTime,
    #[error("non-finite gradient in parameter {0}")]
    NonFiniteGradient(String),
    #[error("adam step counter must start at 1")]
    ZeroStep,
}

/// Read and write access to a layer's trainable parameters.
pub trait Parameters {
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}
