use alloc::format;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NeuralError, Param, Parameters, Tensor};

/// Stride-1, same-padded 1D cross-correlation over the time axis.
///
/// Weight layout is `[kernel, in_channels, filters]`; `(kernel - 1) / 2`
/// zero rows are implied on each side of the sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    pub weight: Param,
    pub bias: Param,
    kernel: usize,
    in_channels: usize,
    filters: usize,
}

impl Conv1d {
    pub fn new<R: Rng + ?Sized>(
        name: &str,
        in_channels: usize,
        filters: usize,
        kernel: usize,
        rng: &mut R,
    ) -> Result<Self, NeuralError> {
        if kernel.is_multiple_of(2) {
            return Err(NeuralError::EvenKernel(kernel));
        }
        Ok(Self {
            weight: Param::glorot(
                format!("{name}.weight"),
                &[kernel, in_channels, filters],
                kernel * in_channels,
                kernel * filters,
                rng,
            ),
            bias: Param::zeros(format!("{name}.bias"), &[filters]),
            kernel,
            in_channels,
            filters,
        })
    }

    pub fn filters(&self) -> usize {
        self.filters
    }

    fn check(&self, x: &Tensor) -> Result<(usize, usize), NeuralError> {
        x.require_rank(3, "conv1d input")?;
        if x.dim(2) != self.in_channels {
            return Err(NeuralError::Width {
                what: "conv1d input channels",
                expected: self.in_channels,
                got: x.dim(2),
            });
        }
        Ok((x.dim(0), x.dim(1)))
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor, NeuralError> {
        let (batch, time) = self.check(x)?;
        let (k, cin, cout) = (self.kernel, self.in_channels, self.filters);
        let pad = (k - 1) / 2;
        let w = self.weight.data();
        let xd = x.data();
        let mut out = Vec::with_capacity(batch * time * cout);
        for _ in 0..batch * time {
            out.extend_from_slice(self.bias.data());
        }
        for b in 0..batch {
            for t in 0..time {
                let orow = &mut out[(b * time + t) * cout..(b * time + t + 1) * cout];
                for j in 0..k {
                    let Some(src) = (t + j).checked_sub(pad).filter(|&s| s < time) else {
                        continue;
                    };
                    let xrow = &xd[(b * time + src) * cin..(b * time + src + 1) * cin];
                    for (ci, &xv) in xrow.iter().enumerate() {
                        if xv == 0.0 {
                            continue;
                        }
                        let wrow = &w[(j * cin + ci) * cout..(j * cin + ci + 1) * cout];
                        for (o, &wv) in orow.iter_mut().zip(wrow) {
                            *o += xv * wv;
                        }
                    }
                }
            }
        }
        Tensor::new(alloc::vec![batch, time, cout], out)
    }

    /// Accumulates weight and bias gradients, returns `∂L/∂x`.
    pub fn backward(&mut self, x: &Tensor, dy: &Tensor) -> Result<Tensor, NeuralError> {
        let (batch, time) = self.check(x)?;
        let (k, cin, cout) = (self.kernel, self.in_channels, self.filters);
        let pad = (k - 1) / 2;
        let xd = x.data();
        let dyd = dy.data();
        let mut dx = alloc::vec![0.0; xd.len()];

        let db = self.bias.grad_mut();
        for row in dyd.chunks_exact(cout) {
            for (g, &d) in db.iter_mut().zip(row) {
                *g += d;
            }
        }

        let (w, dw) = self.weight.data_and_grad_mut();
        for b in 0..batch {
            for t in 0..time {
                let dyrow = &dyd[(b * time + t) * cout..(b * time + t + 1) * cout];
                for j in 0..k {
                    let Some(src) = (t + j).checked_sub(pad).filter(|&s| s < time) else {
                        continue;
                    };
                    let xoff = (b * time + src) * cin;
                    for ci in 0..cin {
                        let woff = (j * cin + ci) * cout;
                        let xv = xd[xoff + ci];
                        let wrow = &w[woff..woff + cout];
                        let dwrow = &mut dw[woff..woff + cout];
                        let mut acc = 0.0;
                        for co in 0..cout {
                            dwrow[co] += xv * dyrow[co];
                            acc += wrow[co] * dyrow[co];
                        }
                        dx[xoff + ci] += acc;
                    }
                }
            }
        }
        Tensor::new(x.shape().to_vec(), dx)
    }
}

impl Parameters for Conv1d {
    fn params(&self) -> Vec<&Param> {
        alloc::vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        alloc::vec![&mut self.weight, &mut self.bias]
    }
}
