use alloc::vec::Vec;
#[allow(unused_imports)] // inherent on newer toolchains
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{argmax, check_training, ShallowError};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegOptions {
    pub max_iter: usize,
    /// Stop once the gradient infinity norm drops below this.
    pub tol: f64,
}

impl Default for LogRegOptions {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            tol: 1e-6,
        }
    }
}

/// Multinomial softmax regression.
///
/// Minimizes `Σ_i CE_i + ||W||² / (2C)` with an unpenalized bias. The
/// objective is divided by `n` internally, which leaves the minimizer
/// unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogReg {
    pub c: f64,
    /// `[dims, classes]`, row major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    dims: usize,
    num_classes: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after each accepted step.
    #[serde(skip)]
    pub loss_trace: Vec<f64>,
}

struct Problem<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    k: usize,
    c: f64,
}

impl Problem<'_> {
    fn logits_into(&self, w: &[f64], b: &[f64], row: &[f64], out: &mut [f64]) {
        out.copy_from_slice(b);
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                for (o, wv) in out.iter_mut().zip(&w[j * self.k..(j + 1) * self.k]) {
                    *o += v * wv;
                }
            }
        }
    }

    fn penalty(&self, w: &[f64]) -> f64 {
        w.iter().map(|v| v * v).sum::<f64>() / (2.0 * self.c)
    }

    fn objective(&self, w: &[f64], b: &[f64]) -> f64 {
        let mut z = alloc::vec![0.0; self.k];
        let mut ce = 0.0;
        for (row, &y) in self.x.iter_rows().zip(self.y) {
            self.logits_into(w, b, row, &mut z);
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            ce += lse - z[y];
        }
        (ce + self.penalty(w)) / self.x.rows() as f64
    }

    fn gradient(&self, w: &[f64], b: &[f64], gw: &mut [f64], gb: &mut [f64]) {
        let n = self.x.rows() as f64;
        for (g, v) in gw.iter_mut().zip(w) {
            *g = v / self.c;
        }
        gb.iter_mut().for_each(|g| *g = 0.0);
        let mut z = alloc::vec![0.0; self.k];
        for (row, &y) in self.x.iter_rows().zip(self.y) {
            self.logits_into(w, b, row, &mut z);
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            z.iter_mut().for_each(|v| *v = (*v - max).exp());
            let s: f64 = z.iter().sum();
            z.iter_mut().for_each(|v| *v /= s);
            z[y] -= 1.0;
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    for (g, d) in gw[j * self.k..(j + 1) * self.k].iter_mut().zip(&z) {
                        *g += v * d;
                    }
                }
            }
            for (g, d) in gb.iter_mut().zip(&z) {
                *g += d;
            }
        }
        gw.iter_mut().chain(gb.iter_mut()).for_each(|g| *g /= n);
    }
}

pub fn fit_logreg(
    x: &Matrix,
    y: &[usize],
    c: f64,
    opts: &LogRegOptions,
) -> Result<LogReg, ShallowError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(ShallowError::NonPositive("C"));
    }
    let k = check_training(x, y)?.max(2);
    let d = x.cols();
    let p = Problem { x, y, k, c };
    let mut w = alloc::vec![0.0; d * k];
    let mut b = alloc::vec![0.0; k];
    let mut gw = alloc::vec![0.0; d * k];
    let mut gb = alloc::vec![0.0; k];
    let mut f = p.objective(&w, &b);
    let mut trace = alloc::vec![f];
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    let (mut tw, mut tb) = (w.clone(), b.clone());
    let (mut pgw, mut pgb) = (gw.clone(), gb.clone());
    p.gradient(&w, &b, &mut gw, &mut gb);
    while iterations < opts.max_iter {
        let gmax = gw.iter().chain(&gb).fold(0.0f64, |m, g| m.max(g.abs()));
        if gmax < opts.tol {
            converged = true;
            break;
        }
        let gsq: f64 = gw.iter().chain(&gb).map(|g| g * g).sum();
        let mut accepted = false;
        for _ in 0..60 {
            for ((t, v), g) in tw.iter_mut().zip(&w).zip(&gw) {
                *t = v - step * g;
            }
            for ((t, v), g) in tb.iter_mut().zip(&b).zip(&gb) {
                *t = v - step * g;
            }
            let ft = p.objective(&tw, &tb);
            if ft <= f - 1e-4 * step * gsq {
                f = ft;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // No descent possible at machine precision.
            break;
        }
        core::mem::swap(&mut w, &mut tw);
        core::mem::swap(&mut b, &mut tb);
        core::mem::swap(&mut gw, &mut pgw);
        core::mem::swap(&mut gb, &mut pgb);
        p.gradient(&w, &b, &mut gw, &mut gb);
        trace.push(f);
        iterations += 1;
        // Barzilai-Borwein trial step: |s|² / sᵀy with s = -step·g_prev.
        let sy: f64 = gw
            .iter()
            .chain(&gb)
            .zip(pgw.iter().chain(&pgb))
            .map(|(g, pg)| pg * (pg - g))
            .sum();
        step = if sy > 0.0 {
            (step * gsq / sy).clamp(1e-10, 1e10)
        } else {
            step * 2.0
        };
    }
    Ok(LogReg {
        c,
        weights: w,
        bias: b,
        dims: d,
        num_classes: k,
        iterations,
        converged,
        loss_trace: trace,
    })
}

impl LogReg {
    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn logits(&self, row: &[f64]) -> Vec<f64> {
        let mut z = self.bias.clone();
        for (j, &v) in row.iter().enumerate() {
            for (o, wv) in z
                .iter_mut()
                .zip(&self.weights[j * self.num_classes..(j + 1) * self.num_classes])
            {
                *o += v * wv;
            }
        }
        z
    }

    pub fn probabilities(&self, row: &[f64]) -> Vec<f64> {
        let mut z = self.logits(row);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        z.iter_mut().for_each(|v| *v = (*v - max).exp());
        let s: f64 = z.iter().sum();
        z.iter_mut().for_each(|v| *v /= s);
        z
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        argmax(&self.logits(row))
    }
}
