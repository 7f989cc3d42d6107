use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent on newer toolchains
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{matmul_a_bt_acc, matmul_acc, matmul_at_b_acc};
use super::{NeuralError, Param, Parameters, Tensor};

/// LSTM cell with a forget gate.
///
/// Gate pre-activations are `x·W_x + h·W_h + b`, laid out as four blocks of
/// `units` columns in the order input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub w_x: Param,
    pub w_h: Param,
    pub bias: Param,
    inputs: usize,
    units: usize,
}

/// Hidden and cell state for a batch, each `[batch, units]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(batch: usize, units: usize) -> Self {
        Self {
            h: alloc::vec![0.0; batch * units],
            c: alloc::vec![0.0; batch * units],
        }
    }
}

/// Values from one forward step needed to run it backwards.
#[derive(Debug, Clone)]
pub struct LstmStepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates `[batch, 4·units]`: i, f, g, o.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

impl Lstm {
    /// Glorot-initialized weights, zero biases except a forget-gate bias of 1.
    pub fn new<R: Rng + ?Sized>(name: &str, inputs: usize, units: usize, rng: &mut R) -> Self {
        let mut bias = Param::zeros(format!("{name}.bias"), &[4 * units]);
        bias.data_mut()[units..2 * units]
            .iter_mut()
            .for_each(|b| *b = 1.0);
        Self {
            w_x: Param::glorot(
                format!("{name}.w_x"),
                &[inputs, 4 * units],
                inputs,
                4 * units,
                rng,
            ),
            w_h: Param::glorot(
                format!("{name}.w_h"),
                &[units, 4 * units],
                units,
                4 * units,
                rng,
            ),
            bias,
            inputs,
            units,
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn units(&self) -> usize {
        self.units
    }

    /// Runs the cell over every time step of `[batch, time, inputs]`, in
    /// reverse order when `reverse` is set. Returns the last hidden state and
    /// one cache per processed step.
    pub fn forward_sequence(
        &self,
        x: &Tensor,
        reverse: bool,
    ) -> Result<(Vec<f64>, Vec<LstmStepCache>), NeuralError> {
        x.require_rank(3, "lstm input")?;
        let (batch, time, width) = (x.dim(0), x.dim(1), x.dim(2));
        if width != self.inputs {
            return Err(NeuralError::Width {
                what: "lstm input",
                expected: self.inputs,
                got: width,
            });
        }
        if time == 0 {
            return Err(NeuralError::EmptyTime);
        }
        let mut state = LstmState::zeros(batch, self.units);
        let mut caches = Vec::with_capacity(time);
        let mut xt = alloc::vec![0.0; batch * width];
        for step in 0..time {
            let t = if reverse { time - 1 - step } else { step };
            for b in 0..batch {
                let src = &x.data()[(b * time + t) * width..(b * time + t + 1) * width];
                xt[b * width..(b + 1) * width].copy_from_slice(src);
            }
            let (next, cache) = lstm_step(&xt, &state, self)?;
            state = next;
            caches.push(cache);
        }
        Ok((state.h, caches))
    }

    /// Backpropagation through time from `∂L/∂h_last`. Parameter gradients
    /// are accumulated; input gradients are added into `dx` (`[batch, time,
    /// inputs]`).
    pub fn backward_sequence(
        &mut self,
        caches: &[LstmStepCache],
        dh_last: &[f64],
        dx: &mut [f64],
        reverse: bool,
    ) {
        let h = self.units;
        let g4 = 4 * h;
        let n_in = self.inputs;
        let batch = dh_last.len() / h;
        let time = caches.len();
        let mut dh = dh_last.to_vec();
        let mut dc = alloc::vec![0.0; batch * h];
        let mut dz = alloc::vec![0.0; batch * g4];
        for (step, cache) in caches.iter().enumerate().rev() {
            let t = if reverse { time - 1 - step } else { step };
            for b in 0..batch {
                let gates = &cache.gates[b * g4..(b + 1) * g4];
                for u in 0..h {
                    let k = b * h + u;
                    let (i, f, g, o) = (gates[u], gates[h + u], gates[2 * h + u], gates[3 * h + u]);
                    let tc = cache.tanh_c[k];
                    let dcell = dc[k] + dh[k] * o * (1.0 - tc * tc);
                    let z = &mut dz[b * g4..(b + 1) * g4];
                    z[u] = dcell * g * i * (1.0 - i);
                    z[h + u] = dcell * cache.c_prev[k] * f * (1.0 - f);
                    z[2 * h + u] = dcell * i * (1.0 - g * g);
                    z[3 * h + u] = dh[k] * tc * o * (1.0 - o);
                    dc[k] = dcell * f;
                }
            }
            matmul_at_b_acc(&cache.x, &dz, self.w_x.grad_mut(), batch, n_in, g4);
            matmul_at_b_acc(&cache.h_prev, &dz, self.w_h.grad_mut(), batch, h, g4);
            let db = self.bias.grad_mut();
            for row in dz.chunks_exact(g4) {
                for (gb, &d) in db.iter_mut().zip(row) {
                    *gb += d;
                }
            }
            let mut dxt = alloc::vec![0.0; batch * n_in];
            matmul_a_bt_acc(&dz, self.w_x.data(), &mut dxt, batch, n_in, g4);
            for b in 0..batch {
                let dst = &mut dx[(b * time + t) * n_in..(b * time + t + 1) * n_in];
                for (d, &v) in dst.iter_mut().zip(&dxt[b * n_in..(b + 1) * n_in]) {
                    *d += v;
                }
            }
            dh.iter_mut().for_each(|v| *v = 0.0);
            matmul_a_bt_acc(&dz, self.w_h.data(), &mut dh, batch, h, g4);
        }
    }
}

/// One LSTM step for a batch: `x_t` is `[batch, inputs]`.
///
/// `i, f, o = σ(·)`, `g = tanh(·)`, `c' = f⊙c + i⊙g`, `h' = o⊙tanh(c')`.
pub fn lstm_step(
    x_t: &[f64],
    state: &LstmState,
    cell: &Lstm,
) -> Result<(LstmState, LstmStepCache), NeuralError> {
    let (n_in, h) = (cell.inputs, cell.units);
    let g4 = 4 * h;
    if n_in == 0 || !x_t.len().is_multiple_of(n_in) {
        return Err(NeuralError::Width {
            what: "lstm step input",
            expected: n_in,
            got: x_t.len(),
        });
    }
    let batch = x_t.len() / n_in;
    if state.h.len() != batch * h || state.c.len() != batch * h {
        return Err(NeuralError::Width {
            what: "lstm state",
            expected: batch * h,
            got: state.h.len(),
        });
    }
    let mut gates = Vec::with_capacity(batch * g4);
    for _ in 0..batch {
        gates.extend_from_slice(cell.bias.data());
    }
    matmul_acc(x_t, cell.w_x.data(), &mut gates, batch, n_in, g4);
    matmul_acc(&state.h, cell.w_h.data(), &mut gates, batch, h, g4);

    let mut next = LstmState::zeros(batch, h);
    let mut tanh_c = alloc::vec![0.0; batch * h];
    for b in 0..batch {
        let z = &mut gates[b * g4..(b + 1) * g4];
        for u in 0..h {
            z[u] = sigmoid(z[u]);
            z[h + u] = sigmoid(z[h + u]);
            z[2 * h + u] = z[2 * h + u].tanh();
            z[3 * h + u] = sigmoid(z[3 * h + u]);
            let k = b * h + u;
            let c = z[h + u] * state.c[k] + z[u] * z[2 * h + u];
            let tc = c.tanh();
            next.c[k] = c;
            next.h[k] = z[3 * h + u] * tc;
            tanh_c[k] = tc;
        }
    }
    let cache = LstmStepCache {
        x: x_t.to_vec(),
        h_prev: state.h.clone(),
        c_prev: state.c.clone(),
        gates,
        tanh_c,
    };
    Ok((next, cache))
}

impl Parameters for Lstm {
    fn params(&self) -> Vec<&Param> {
        alloc::vec![&self.w_x, &self.w_h, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        alloc::vec![&mut self.w_x, &mut self.w_h, &mut self.bias]
    }
}

/// Two LSTMs reading the sequence in opposite directions; the output is the
/// forward cell's last state (after step `T`) followed by the backward cell's
/// last state (after step 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstm {
    pub forward: Lstm,
    pub backward: Lstm,
}

/// Caches of both directions from [`BiLstm::forward`].
#[derive(Debug, Clone)]
pub struct BiLstmCache {
    input_shape: Vec<usize>,
    fwd: Vec<LstmStepCache>,
    bwd: Vec<LstmStepCache>,
}

impl BiLstm {
    pub fn new<R: Rng + ?Sized>(name: &str, inputs: usize, units: usize, rng: &mut R) -> Self {
        Self {
            forward: Lstm::new(&format!("{name}.forward"), inputs, units, rng),
            backward: Lstm::new(&format!("{name}.backward"), inputs, units, rng),
        }
    }

    pub fn output_width(&self) -> usize {
        2 * self.forward.units
    }

    /// `[batch, time, inputs] → [batch, 2·units]`.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, BiLstmCache), NeuralError> {
        let (hf, fwd) = self.forward.forward_sequence(x, false)?;
        let (hb, bwd) = self.backward.forward_sequence(x, true)?;
        let batch = x.dim(0);
        let h = self.forward.units;
        let mut out = Vec::with_capacity(batch * 2 * h);
        for b in 0..batch {
            out.extend_from_slice(&hf[b * h..(b + 1) * h]);
            out.extend_from_slice(&hb[b * h..(b + 1) * h]);
        }
        Ok((
            Tensor::new(alloc::vec![batch, 2 * h], out)?,
            BiLstmCache {
                input_shape: x.shape().to_vec(),
                fwd,
                bwd,
            },
        ))
    }

    pub fn backward(&mut self, cache: &BiLstmCache, dy: &Tensor) -> Result<Tensor, NeuralError> {
        let batch = cache.input_shape[0];
        let h = self.forward.units;
        let mut dhf = Vec::with_capacity(batch * h);
        let mut dhb = Vec::with_capacity(batch * h);
        for row in dy.data().chunks_exact(2 * h) {
            dhf.extend_from_slice(&row[..h]);
            dhb.extend_from_slice(&row[h..]);
        }
        let mut dx = alloc::vec![0.0; cache.input_shape.iter().product()];
        self.forward
            .backward_sequence(&cache.fwd, &dhf, &mut dx, false);
        self.backward
            .backward_sequence(&cache.bwd, &dhb, &mut dx, true);
        Tensor::new(cache.input_shape.clone(), dx)
    }
}

impl Parameters for BiLstm {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.forward.params();
        p.extend(self.backward.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.forward.params_mut();
        p.extend(self.backward.params_mut());
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::gradcheck::{max_rel_error, numeric_grad, probe_weights};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cell(inputs: usize, units: usize, seed: u64) -> Lstm {
        Lstm::new("l", inputs, units, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn zero_everything_stays_zero() {
        let mut l = cell(3, 4, 0);
        l.w_x.data_mut().iter_mut().for_each(|v| *v = 0.0);
        l.w_h.data_mut().iter_mut().for_each(|v| *v = 0.0);
        let (s, _) = lstm_step(&[0.0; 3], &LstmState::zeros(1, 4), &l).unwrap();
        assert!(s.c.iter().all(|&v| v == 0.0));
        assert!(s.h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_forget_gate_retains_memory() {
        let mut l = cell(2, 3, 1);
        l.w_x.data_mut().iter_mut().for_each(|v| *v = 0.0);
        l.w_h.data_mut().iter_mut().for_each(|v| *v = 0.0);
        let b = l.bias.data_mut();
        b[..3].iter_mut().for_each(|v| *v = -40.0);
        b[3..6].iter_mut().for_each(|v| *v = 40.0);
        let state = LstmState {
            h: alloc::vec![0.1, -0.2, 0.3],
            c: alloc::vec![0.5, -1.5, 2.0],
        };
        let (s, _) = lstm_step(&[0.7, -0.3], &state, &l).unwrap();
        for (a, b) in s.c.iter().zip(&state.c) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn weighted_sequence_loss(l: &Lstm, x: &Tensor, w: &[f64], reverse: bool) -> f64 {
        let (h, _) = l.forward_sequence(x, reverse).unwrap();
        h.iter().zip(w).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn sequence_gradient_length_seven() {
        for (seed, reverse) in [(0, false), (1, true)] {
            let mut l = cell(5, 4, seed);
            let shape = alloc::vec![2, 7, 5];
            let xs = probe_weights(70, seed + 10);
            let x = Tensor::new(shape.clone(), xs.clone()).unwrap();
            let w = probe_weights(8, seed + 20);
            let (_, caches) = l.forward_sequence(&x, reverse).unwrap();
            let mut dx = alloc::vec![0.0; 70];
            l.backward_sequence(&caches, &w, &mut dx, reverse);
            let num = numeric_grad(&xs, 1e-5, |v| {
                weighted_sequence_loss(
                    &l,
                    &Tensor::new(shape.clone(), v.to_vec()).unwrap(),
                    &w,
                    reverse,
                )
            });
            assert!(max_rel_error(&dx, &num) < 1e-5);

            let wh = l.w_h.data().to_vec();
            let analytic = l.w_h.grad().to_vec();
            let mut probe = l.clone();
            let num = numeric_grad(&wh, 1e-5, |v| {
                probe.w_h.data_mut().copy_from_slice(v);
                weighted_sequence_loss(&probe, &x, &w, reverse)
            });
            assert!(max_rel_error(&analytic, &num) < 1e-5);
        }
    }

    #[test]
    fn bidirectional_width_and_single_step() {
        let bi = BiLstm::new("b", 5, 32, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(bi.output_width(), 64);
        let x = Tensor::new(alloc::vec![1, 1, 5], alloc::vec![0.1, 0.2, 0.3, 1.0, 0.0]).unwrap();
        let (y, _) = bi.forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 64]);
        // One step: both directions see the same vector from a zero state.
        let (hf, _) = bi.forward.forward_sequence(&x, false).unwrap();
        let (hb, _) = bi.forward.forward_sequence(&x, true).unwrap();
        assert_eq!(hf, hb);
        assert_eq!(&y.data()[..32], hf.as_slice());
    }
}
