use alloc::vec::Vec;
#[allow(unused_imports)] // inherent on newer toolchains
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{NeuralError, Param};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam with per-parameter moment buffers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update of every parameter from its accumulated gradient. The
    /// parameter list must be in the same order on every call. Nothing is
    /// modified if any gradient is non-finite.
    pub fn step(&mut self, params: &mut [&mut Param]) -> Result<(), NeuralError> {
        if let Some(p) = params
            .iter()
            .find(|p| p.grad().iter().any(|g| !g.is_finite()))
        {
            return Err(NeuralError::NonFiniteGradient(p.name.clone()));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| alloc::vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        for (i, p) in params.iter_mut().enumerate() {
            let (data, grad) = p.value.data_mut_and_grad();
            adam_step(
                data,
                grad,
                &mut self.m[i],
                &mut self.v[i],
                &self.config,
                self.t,
            )?;
        }
        Ok(())
    }
}

/// Updates `params` in place from `grads` for step `t ≥ 1`.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    cfg: &AdamConfig,
    t: u64,
) -> Result<(), NeuralError> {
    if t == 0 {
        return Err(NeuralError::ZeroStep);
    }
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for (((w, g), m), v) in params
        .iter_mut()
        .zip(grads.iter().copied())
        .zip(m.iter_mut())
        .zip(v.iter_mut())
    {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *w -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Param;

    fn param(values: &[f64]) -> Param {
        let mut p = Param::zeros("p", &[values.len()]);
        p.data_mut().copy_from_slice(values);
        p
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = param(&[1.0, -2.0]);
        let mut adam = Adam::new(AdamConfig::default());
        for _ in 0..10 {
            adam.step(&mut [&mut p]).unwrap();
        }
        assert_eq!(p.data(), &[1.0, -2.0]);
    }

    #[test]
    fn constant_gradient_steps_approach_lr() {
        let mut p = param(&[0.0]);
        let mut adam = Adam::new(AdamConfig::default());
        let mut last = 0.0;
        for _ in 0..1000 {
            let before = p.data()[0];
            p.grad_mut()[0] = 0.37;
            adam.step(&mut [&mut p]).unwrap();
            last = before - p.data()[0];
        }
        assert!((last - 1e-3).abs() < 1e-5, "{last}");
    }

    #[test]
    fn step_size_is_gradient_scale_free() {
        let mut a = param(&[0.0]);
        let mut b = param(&[0.0]);
        let mut adam = Adam::new(AdamConfig::default());
        for _ in 0..200 {
            a.grad_mut()[0] = 0.01;
            b.grad_mut()[0] = 1.0;
            adam.step(&mut [&mut a, &mut b]).unwrap();
        }
        let (da, db) = (a.data()[0].abs(), b.data()[0].abs());
        assert!((da - db).abs() / db < 1e-3, "{da} {db}");
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut p = param(&[0.0]);
        p.name = "head.weight".into();
        p.grad_mut()[0] = f64::NAN;
        let err = Adam::new(AdamConfig::default())
            .step(&mut [&mut p])
            .unwrap_err();
        assert_eq!(err, NeuralError::NonFiniteGradient("head.weight".into()));
        assert_eq!(p.data(), &[0.0]);
        assert_eq!(
            adam_step(
                &mut [0.0],
                &[1.0],
                &mut [0.0],
                &mut [0.0],
                &AdamConfig::default(),
                0
            ),
            Err(NeuralError::ZeroStep)
        );
    }
}
