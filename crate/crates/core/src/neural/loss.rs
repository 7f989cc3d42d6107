use alloc::vec::Vec;

use super::{NeuralError, Tensor};
#[allow(unused_imports)] // inherent on newer toolchains
use num_traits::Float;

/// Row-wise softmax of `[batch, classes]` logits.
pub fn softmax(logits: &Tensor) -> Result<Tensor, NeuralError> {
    logits.require_rank(2, "softmax input")?;
    let k = logits.dim(1);
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.data().chunks_exact(k) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = out.len();
        out.extend(row.iter().map(|&v| (v - max).exp()));
        let z: f64 = out[start..].iter().sum();
        out[start..].iter_mut().for_each(|v| *v /= z);
    }
    Tensor::new(logits.shape().to_vec(), out)
}

/// Mean cross-entropy of softmax(logits) against integer labels.
///
/// Returns `(loss, probabilities, ∂loss/∂logits)`.
pub fn softmax_cross_entropy(
    logits: &Tensor,
    labels: &[usize],
) -> Result<(f64, Tensor, Tensor), NeuralError> {
    let probs = softmax(logits)?;
    let (batch, k) = (logits.dim(0), logits.dim(1));
    if labels.len() != batch {
        return Err(NeuralError::Width {
            what: "label count",
            expected: batch,
            got: labels.len(),
        });
    }
    let mut loss = 0.0;
    let mut grad = probs.data().to_vec();
    for (b, &y) in labels.iter().enumerate() {
        let p = probs.data()[b * k + y];
        loss -= p.max(f64::MIN_POSITIVE).ln();
        grad[b * k + y] -= 1.0;
    }
    let scale = 1.0 / batch as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((
        loss * scale,
        probs,
        Tensor::new(alloc::vec![batch, k], grad)?,
    ))
}
