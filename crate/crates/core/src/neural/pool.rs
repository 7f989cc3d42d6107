use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{NeuralError, Tensor};

/// Max pooling over time. The last window may run past the end of the
/// sequence; the missing positions are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaxPool1d {
    pub pool: usize,
    pub stride: usize,
}

/// Which input time step won each output cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxPoolCache {
    input_shape: Vec<usize>,
    argmax: Vec<usize>,
}

impl MaxPool1d {
    pub const fn new(pool: usize, stride: usize) -> Self {
        Self { pool, stride }
    }

    pub fn output_len(&self, time: usize) -> usize {
        time.div_ceil(self.stride)
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, MaxPoolCache), NeuralError> {
        x.require_rank(3, "maxpool input")?;
        let (batch, time, ch) = (x.dim(0), x.dim(1), x.dim(2));
        if time == 0 {
            return Err(NeuralError::EmptyTime);
        }
        let out_t = self.output_len(time);
        let xd = x.data();
        let mut out = alloc::vec![f64::NEG_INFINITY; batch * out_t * ch];
        let mut argmax = alloc::vec![0usize; batch * out_t * ch];
        for b in 0..batch {
            for o in 0..out_t {
                let start = o * self.stride;
                let end = (start + self.pool).min(time);
                for t in start..end {
                    for c in 0..ch {
                        let v = xd[(b * time + t) * ch + c];
                        let idx = (b * out_t + o) * ch + c;
                        // Strict comparison: the first maximum wins ties.
                        if v > out[idx] {
                            out[idx] = v;
                            argmax[idx] = t;
                        }
                    }
                }
            }
        }
        Ok((
            Tensor::new(alloc::vec![batch, out_t, ch], out)?,
            MaxPoolCache {
                input_shape: x.shape().to_vec(),
                argmax,
            },
        ))
    }

    pub fn backward(&self, cache: &MaxPoolCache, dy: &Tensor) -> Result<Tensor, NeuralError> {
        let (batch, time, ch) = (
            cache.input_shape[0],
            cache.input_shape[1],
            cache.input_shape[2],
        );
        let out_t = self.output_len(time);
        let mut dx = alloc::vec![0.0; batch * time * ch];
        for b in 0..batch {
            for o in 0..out_t {
                for c in 0..ch {
                    let idx = (b * out_t + o) * ch + c;
                    dx[(b * time + cache.argmax[idx]) * ch + c] += dy.data()[idx];
                }
            }
        }
        Tensor::new(cache.input_shape.clone(), dx)
    }
}

/// Mean over the time axis: `[batch, time, ch] → [batch, ch]`.
///
/// With `lengths` only the first `lengths[b]` steps of each sample are
/// averaged; without it padded steps count like any other.
pub fn global_avg_pool(x: &Tensor, lengths: Option<&[usize]>) -> Result<Tensor, NeuralError> {
    x.require_rank(3, "global average pool input")?;
    let (batch, time, ch) = (x.dim(0), x.dim(1), x.dim(2));
    if time == 0 {
        return Err(NeuralError::EmptyTime);
    }
    let mut out = alloc::vec![0.0; batch * ch];
    for b in 0..batch {
        let n = span(lengths, b, time);
        let orow = &mut out[b * ch..(b + 1) * ch];
        for t in 0..n {
            let xrow = &x.data()[(b * time + t) * ch..(b * time + t + 1) * ch];
            for (o, &v) in orow.iter_mut().zip(xrow) {
                *o += v;
            }
        }
        orow.iter_mut().for_each(|o| *o /= n as f64);
    }
    Tensor::new(alloc::vec![batch, ch], out)
}

pub fn global_avg_pool_backward(
    input_shape: &[usize],
    dy: &Tensor,
    lengths: Option<&[usize]>,
) -> Result<Tensor, NeuralError> {
    let (batch, time, ch) = (input_shape[0], input_shape[1], input_shape[2]);
    let mut dx = alloc::vec![0.0; batch * time * ch];
    for b in 0..batch {
        let n = span(lengths, b, time);
        let g = &dy.data()[b * ch..(b + 1) * ch];
        for t in 0..n {
            for c in 0..ch {
                dx[(b * time + t) * ch + c] = g[c] / n as f64;
            }
        }
    }
    Tensor::new(input_shape.to_vec(), dx)
}

fn span(lengths: Option<&[usize]>, b: usize, time: usize) -> usize {
    lengths.map_or(time, |l| l[b].clamp(1, time))
}
