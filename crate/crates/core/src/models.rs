//! The two deep sequence classifiers and their training loop.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{default_n_bin, Batch};
use crate::exec::Executor;
use crate::harness::Score;
use crate::neural::{
    global_avg_pool, global_avg_pool_backward, relu, relu_backward, softmax, softmax_cross_entropy,
    Adam, AdamConfig, BiLstm, BiLstmCache, Conv1d, Dense, MaxPool1d, MaxPoolCache, NeuralError,
    Param, Parameters, Tensor,
};
use crate::shallow;

pub const VECTOR_WIDTH: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid training configuration: {0}")]
    Config(&'static str),
    #[error("need at least 2 classes, got {0}")]
    Classes(usize),
    #[error("no {0} batches")]
    NoBatches(&'static str),
    #[error("need at least 2 repeats, got {0}")]
    Repeats(usize),
    #[error("non-finite loss {loss} in epoch {epoch}, batch {batch} (length {m_bin})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        m_bin: usize,
        loss: f64,
    },
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

/// A classifier over `[batch, time, 5]` vertex sequences producing logits.
pub trait Network: Parameters + Clone + Send + Sync {
    type Cache;

    fn num_classes(&self) -> usize;

    /// `lengths` is only passed when padded steps should be masked.
    fn forward(
        &self,
        x: &Tensor,
        lengths: Option<&[usize]>,
    ) -> Result<(Tensor, Self::Cache), NeuralError>;

    /// Accumulates parameter gradients from `∂L/∂logits`.
    fn backward(&mut self, cache: &Self::Cache, dlogits: &Tensor) -> Result<(), NeuralError>;

    fn probabilities(&self, x: &Tensor, lengths: Option<&[usize]>) -> Result<Tensor, NeuralError> {
        softmax(&self.forward(x, lengths)?.0)
    }
}

/// conv(32, k5) → ReLU → maxpool(3, 3) → conv(64, k5) → ReLU → global
/// average pool → dense(64) → ReLU → dense(classes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnClassifier {
    pub conv1: Conv1d,
    pub pool: MaxPool1d,
    pub conv2: Conv1d,
    pub dense1: Dense,
    pub head: Dense,
}

pub struct CnnCache {
    x: Tensor,
    a1: Tensor,
    pool: MaxPoolCache,
    p: Tensor,
    a2: Tensor,
    pooled_lengths: Option<Vec<usize>>,
    g: Tensor,
    h1: Tensor,
}

pub fn build_cnn(num_classes: usize, seed: u64) -> Result<CnnClassifier, ModelError> {
    if num_classes < 2 {
        return Err(ModelError::Classes(num_classes));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(CnnClassifier {
        conv1: Conv1d::new("conv1", VECTOR_WIDTH, 32, 5, &mut rng)?,
        pool: MaxPool1d::new(3, 3),
        conv2: Conv1d::new("conv2", 32, 64, 5, &mut rng)?,
        dense1: Dense::new("dense1", 64, 64, &mut rng),
        head: Dense::new("head", 64, num_classes, &mut rng),
    })
}

impl Parameters for CnnClassifier {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.conv1.params();
        p.extend(self.conv2.params());
        p.extend(self.dense1.params());
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.conv1.params_mut();
        p.extend(self.conv2.params_mut());
        p.extend(self.dense1.params_mut());
        p.extend(self.head.params_mut());
        p
    }
}

impl Network for CnnClassifier {
    type Cache = CnnCache;

    fn num_classes(&self) -> usize {
        self.head.units()
    }

    fn forward(
        &self,
        x: &Tensor,
        lengths: Option<&[usize]>,
    ) -> Result<(Tensor, CnnCache), NeuralError> {
        let a1 = relu(&self.conv1.forward(x)?);
        let (p, pool) = self.pool.forward(&a1)?;
        let a2 = relu(&self.conv2.forward(&p)?);
        let pooled_lengths: Option<Vec<usize>> =
            lengths.map(|l| l.iter().map(|&n| self.pool.output_len(n)).collect());
        let g = global_avg_pool(&a2, pooled_lengths.as_deref())?;
        let h1 = relu(&self.dense1.forward(&g)?);
        let logits = self.head.forward(&h1)?;
        Ok((
            logits,
            CnnCache {
                x: x.clone(),
                a1,
                pool,
                p,
                a2,
                pooled_lengths,
                g,
                h1,
            },
        ))
    }

    fn backward(&mut self, c: &CnnCache, dlogits: &Tensor) -> Result<(), NeuralError> {
        let dh1 = self.head.backward(&c.h1, dlogits)?;
        let dg = self.dense1.backward(&c.g, &relu_backward(&c.h1, &dh1))?;
        let da2 = global_avg_pool_backward(c.a2.shape(), &dg, c.pooled_lengths.as_deref())?;
        let dp = self.conv2.backward(&c.p, &relu_backward(&c.a2, &da2))?;
        let da1 = self.pool.backward(&c.pool, &dp)?;
        self.conv1.backward(&c.x, &relu_backward(&c.a1, &da1))?;
        Ok(())
    }
}

/// Bidirectional LSTM (32 units per direction) → dense(classes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnClassifier {
    pub lstm: BiLstm,
    pub head: Dense,
}

pub struct RnnCache {
    lstm: BiLstmCache,
    h: Tensor,
}

pub fn build_rnn(num_classes: usize, seed: u64) -> Result<RnnClassifier, ModelError> {
    if num_classes < 2 {
        return Err(ModelError::Classes(num_classes));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lstm = BiLstm::new("lstm", VECTOR_WIDTH, 32, &mut rng);
    let head = Dense::new("head", lstm.output_width(), num_classes, &mut rng);
    Ok(RnnClassifier { lstm, head })
}

impl Parameters for RnnClassifier {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.lstm.params();
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.lstm.params_mut();
        p.extend(self.head.params_mut());
        p
    }
}

impl Network for RnnClassifier {
    type Cache = RnnCache;

    fn num_classes(&self) -> usize {
        self.head.units()
    }

    /// Padded steps are always fed through the recurrence.
    fn forward(
        &self,
        x: &Tensor,
        _lengths: Option<&[usize]>,
    ) -> Result<(Tensor, RnnCache), NeuralError> {
        let (h, lstm) = self.lstm.forward(x)?;
        let logits = self.head.forward(&h)?;
        Ok((logits, RnnCache { lstm, h }))
    }

    fn backward(&mut self, c: &RnnCache, dlogits: &Tensor) -> Result<(), NeuralError> {
        let dh = self.head.backward(&c.h, dlogits)?;
        self.lstm.backward(&c.lstm, &dh)?;
        Ok(())
    }
}

/// A trained network of either kind, as stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeepModel {
    Cnn(CnnClassifier),
    Rnn(RnnClassifier),
}

impl DeepModel {
    pub fn name(&self) -> &'static str {
        match self {
            DeepModel::Cnn(_) => "cnn",
            DeepModel::Rnn(_) => "rnn",
        }
    }

    pub fn evaluate(
        &self,
        batches: &[Batch],
        mask_padding: bool,
    ) -> Result<Evaluation, ModelError> {
        match self {
            DeepModel::Cnn(m) => evaluate(m, batches, mask_padding),
            DeepModel::Rnn(m) => evaluate(m, batches, mask_padding),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation improvement tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
    pub lr: f64,
    /// Sequences per length bin; `None` means eight batches.
    pub n_bin: Option<usize>,
    /// Exclude padded steps from the CNN's global average pool.
    pub mask_padding: bool,
    /// Deal the sequences of equal-length batches into fresh random batches
    /// every epoch instead of reusing the fixed batches.
    #[serde(default = "yes")]
    pub redeal: bool,
}

fn yes() -> bool {
    true
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            max_epochs: 100,
            patience: 8,
            seed: 0,
            lr: 1e-3,
            n_bin: None,
            mask_padding: false,
            redeal: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.batch_size == 0 {
            return Err(ModelError::Config("batch_size must be at least 1"));
        }
        if self.max_epochs == 0 {
            return Err(ModelError::Config("max_epochs must be at least 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(ModelError::Config("learning rate must be positive"));
        }
        if self.n_bin.is_some_and(|n| n < self.batch_size) {
            return Err(ModelError::Config("n_bin must be at least batch_size"));
        }
        Ok(())
    }

    pub fn n_bin(&self) -> usize {
        self.n_bin.unwrap_or_else(|| default_n_bin(self.batch_size))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub stopped_early: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    pub ids: Vec<String>,
    pub predictions: Vec<usize>,
    pub labels: Vec<usize>,
}

pub fn batch_tensor(b: &Batch) -> Result<Tensor, NeuralError> {
    Tensor::new(alloc::vec![b.len(), b.m_bin, VECTOR_WIDTH], b.to_flat())
}

pub fn evaluate<N: Network>(
    model: &N,
    batches: &[Batch],
    mask_padding: bool,
) -> Result<Evaluation, ModelError> {
    let mut out = Evaluation {
        loss: 0.0,
        accuracy: 0.0,
        ids: Vec::new(),
        predictions: Vec::new(),
        labels: Vec::new(),
    };
    for b in batches.iter().filter(|b| !b.is_empty()) {
        let lengths = mask_padding.then_some(b.lengths.as_slice());
        let (logits, _) = model.forward(&batch_tensor(b)?, lengths)?;
        let (loss, probs, _) = softmax_cross_entropy(&logits, &b.labels)?;
        out.loss += loss * b.len() as f64;
        for (row, s) in probs
            .data()
            .chunks_exact(model.num_classes())
            .zip(&b.sequences)
        {
            out.predictions.push(shallow::argmax(row));
            out.ids.push(s.id.clone());
        }
        out.labels.extend_from_slice(&b.labels);
    }
    if out.labels.is_empty() {
        return Err(ModelError::NoBatches("evaluation"));
    }
    let n = out.labels.len() as f64;
    out.loss /= n;
    out.accuracy = out
        .predictions
        .iter()
        .zip(&out.labels)
        .filter(|(p, l)| p == l)
        .count() as f64
        / n;
    Ok(out)
}

/// One training step's input.
#[derive(Clone)]
struct Dealt {
    input: Tensor,
    labels: Vec<usize>,
    lengths: Vec<usize>,
    m_bin: usize,
}

/// Shuffles the sequences of batches sharing one `m_bin` and deals them
/// back out in batches of the original sizes.
fn redeal(
    train: &[Batch],
    members: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Dealt>, NeuralError> {
    let mut slots: Vec<(usize, usize)> = members
        .iter()
        .flat_map(|&bi| (0..train[bi].len()).map(move |r| (bi, r)))
        .collect();
    slots.shuffle(rng);
    let mut out = Vec::with_capacity(members.len());
    let mut rest = slots.as_slice();
    for &bi in members {
        let (take, tail) = rest.split_at(train[bi].len());
        rest = tail;
        let m_bin = train[bi].m_bin;
        let mut data = Vec::with_capacity(take.len() * m_bin * VECTOR_WIDTH);
        for &(b, r) in take {
            for v in &train[b].sequences[r].vectors {
                data.extend_from_slice(&v.0);
            }
        }
        out.push(Dealt {
            input: Tensor::new(alloc::vec![take.len(), m_bin, VECTOR_WIDTH], data)?,
            labels: take.iter().map(|&(b, r)| train[b].labels[r]).collect(),
            lengths: take.iter().map(|&(b, r)| train[b].lengths[r]).collect(),
            m_bin,
        });
    }
    Ok(out)
}

/// Adam on softmax cross-entropy with early stopping on validation
/// accuracy. The returned model carries the parameters of the best
/// validation epoch.
pub fn train<N: Network>(
    model: N,
    train: &[Batch],
    val: &[Batch],
    cfg: &TrainConfig,
) -> Result<(N, History), ModelError> {
    cfg.validate()?;
    if train.iter().all(|b| b.is_empty()) {
        return Err(ModelError::NoBatches("training"));
    }
    if val.iter().all(|b| b.is_empty()) {
        return Err(ModelError::NoBatches("validation"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut opt = Adam::new(AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    });
    let fixed: Vec<Dealt> = train
        .iter()
        .filter(|b| !b.is_empty())
        .map(|b| {
            Ok(Dealt {
                input: batch_tensor(b)?,
                labels: b.labels.clone(),
                lengths: b.lengths.clone(),
                m_bin: b.m_bin,
            })
        })
        .collect::<Result<_, NeuralError>>()?;
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (bi, b) in train.iter().enumerate().filter(|(_, b)| !b.is_empty()) {
        groups.entry(b.m_bin).or_default().push(bi);
    }
    let mut model = model;
    let mut best = model.clone();
    let mut history = History {
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_accuracy: f64::NEG_INFINITY,
        stopped_early: false,
    };
    let mut stale = 0;
    for epoch in 1..=cfg.max_epochs {
        let mut batches = if cfg.redeal {
            let mut out = Vec::with_capacity(fixed.len());
            for members in groups.values() {
                out.extend(redeal(train, members, &mut rng)?);
            }
            out
        } else {
            fixed.clone()
        };
        batches.shuffle(&mut rng);
        let (mut loss_sum, mut hits, mut seen) = (0.0, 0usize, 0usize);
        for (bi, b) in batches.iter().enumerate() {
            let lengths = cfg.mask_padding.then_some(b.lengths.as_slice());
            model.zero_grad();
            let (logits, cache) = model.forward(&b.input, lengths)?;
            let (loss, probs, dlogits) = softmax_cross_entropy(&logits, &b.labels)?;
            if !loss.is_finite() {
                return Err(ModelError::NonFiniteLoss {
                    epoch,
                    batch: bi,
                    m_bin: b.m_bin,
                    loss,
                });
            }
            model.backward(&cache, &dlogits)?;
            opt.step(&mut model.params_mut())?;
            loss_sum += loss * b.labels.len() as f64;
            seen += b.labels.len();
            hits += probs
                .data()
                .chunks_exact(model.num_classes())
                .zip(&b.labels)
                .filter(|(row, &l)| shallow::argmax(row) == l)
                .count();
        }
        let v = evaluate(&model, val, cfg.mask_padding)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / seen as f64,
            train_accuracy: hits as f64 / seen as f64,
            val_loss: v.loss,
            val_accuracy: v.accuracy,
        });
        if v.accuracy > history.best_val_accuracy {
            history.best_val_accuracy = v.accuracy;
            history.best_epoch = epoch;
            best = model.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale > cfg.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    Ok((best, history))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub test_accuracy: f64,
    pub history: History,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedRuns<N> {
    pub runs: Vec<RunResult>,
    pub score: Score,
    /// Models in seed order.
    pub models: Vec<N>,
}

/// Trains `repeats` models with seeds `cfg.seed + i` (initialization and
/// batch order) and summarizes their test accuracy as mean ± population
/// standard deviation.
#[allow(clippy::too_many_arguments)]
pub fn repeated_runs<N, B, E>(
    build: B,
    train_batches: &[Batch],
    val_batches: &[Batch],
    test_batches: &[Batch],
    cfg: &TrainConfig,
    repeats: usize,
    exec: &E,
) -> Result<RepeatedRuns<N>, ModelError>
where
    N: Network,
    B: Fn(u64) -> Result<N, ModelError> + Sync + Send,
    E: Executor,
{
    if repeats < 2 {
        return Err(ModelError::Repeats(repeats));
    }
    let seeds: Vec<u64> = (0..repeats as u64)
        .map(|i| cfg.seed.wrapping_add(i))
        .collect();
    let outcomes = exec.map(&seeds, |&seed| {
        let run_cfg = TrainConfig { seed, ..*cfg };
        let (model, history) = train(build(seed)?, train_batches, val_batches, &run_cfg)?;
        let test = evaluate(&model, test_batches, cfg.mask_padding)?;
        Ok::<_, ModelError>((model, history, test.accuracy))
    });
    let mut runs = Vec::with_capacity(repeats);
    let mut models = Vec::with_capacity(repeats);
    for (seed, o) in seeds.iter().zip(outcomes) {
        let (model, history, test_accuracy) = o?;
        runs.push(RunResult {
            seed: *seed,
            test_accuracy,
            history,
        });
        models.push(model);
    }
    let acc: Vec<f64> = runs.iter().map(|r| r.test_accuracy).collect();
    Ok(RepeatedRuns {
        runs,
        score: Score::from_runs(&acc),
        models,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, Placement, ShapeClass};
    use crate::encoding::{bin_and_pad, compute_scale_factor, encode};
    use crate::exec::Sequential;
    use crate::harness::split;
    use rand::Rng;

    fn random_input(batch: usize, time: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..batch * time * VECTOR_WIDTH)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        Tensor::new(alloc::vec![batch, time, VECTOR_WIDTH], data).unwrap()
    }

    #[test]
    fn parameter_counts() {
        let cnn = build_cnn(9, 0).unwrap();
        assert_eq!(cnn.conv1.param_count(), 832);
        assert_eq!(cnn.conv2.param_count(), 10_304);
        assert_eq!(cnn.dense1.param_count(), 4_160);
        assert_eq!(cnn.head.param_count(), 585);
        assert_eq!(cnn.param_count(), 15_881);
        let rnn = build_rnn(10, 0).unwrap();
        assert_eq!(rnn.lstm.forward.param_count(), 4 * (32 * (5 + 32) + 32));
        assert_eq!(rnn.head.param_count(), 650);
        assert_eq!(rnn.lstm.output_width(), 64);
        assert!(build_cnn(1, 0).is_err());
    }

    #[test]
    fn outputs_are_distributions() {
        let cnn = build_cnn(2, 1).unwrap();
        let rnn = build_rnn(3, 1).unwrap();
        for x in [random_input(4, 7, 2), random_input(2, 1, 3)] {
            for (p, k) in [
                (cnn.probabilities(&x, None).unwrap(), 2),
                (rnn.probabilities(&x, None).unwrap(), 3),
            ] {
                assert_eq!(p.shape(), &[x.dim(0), k]);
                for row in p.data().chunks(k) {
                    assert!(row.iter().all(|v| v.is_finite()));
                    assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn no_leakage_between_samples() {
        let cnn = build_cnn(4, 5).unwrap();
        let x = random_input(3, 9, 6);
        let p = cnn.probabilities(&x, None).unwrap();
        let mut swapped = x.data().to_vec();
        let row = 9 * VECTOR_WIDTH;
        let (a, b) = swapped.split_at_mut(row);
        a.swap_with_slice(&mut b[..row]);
        let q = cnn
            .probabilities(&Tensor::new(x.shape().to_vec(), swapped).unwrap(), None)
            .unwrap();
        assert_eq!(&p.data()[..4], &q.data()[4..8]);
        assert_eq!(&p.data()[8..], &q.data()[8..]);
    }

    /// End-to-end gradient of the whole CNN against finite differences.
    #[test]
    fn cnn_gradient_matches_differences() {
        let mut cnn = build_cnn(3, 9).unwrap();
        let x = random_input(2, 8, 10);
        let labels = [2, 0];
        cnn.zero_grad();
        let (logits, cache) = cnn.forward(&x, None).unwrap();
        let (_, _, dl) = softmax_cross_entropy(&logits, &labels).unwrap();
        cnn.backward(&cache, &dl).unwrap();
        let analytic = cnn.dense1.weight.grad()[..20].to_vec();
        for (i, &a) in analytic.iter().enumerate() {
            let mut hi = cnn.clone();
            hi.dense1.weight.data_mut()[i] += 1e-6;
            let mut lo = cnn.clone();
            lo.dense1.weight.data_mut()[i] -= 1e-6;
            let f = |m: &CnnClassifier| {
                softmax_cross_entropy(&m.forward(&x, None).unwrap().0, &labels)
                    .unwrap()
                    .0
            };
            let num = (f(&hi) - f(&lo)) / 2e-6;
            assert!(
                (a - num).abs() <= 1e-6 * a.abs().max(num.abs()).max(1e-3),
                "{a} vs {num}"
            );
        }
    }

    fn memorization_batch(seed: u64) -> Vec<Batch> {
        let data = generate(
            &ShapeClass::ALL,
            7,
            seed,
            &Placement::default(),
            &Sequential,
        );
        let geoms: Vec<_> = data.iter().take(32).collect();
        let s = compute_scale_factor(geoms.iter().map(|d| &d.geometry)).unwrap();
        let seqs: Vec<_> = geoms
            .iter()
            .map(|d| encode(&d.geometry, d.label, s))
            .collect();
        bin_and_pad(&seqs, 32, 32).unwrap()
    }

    fn memorize<N: Network>(mut model: N, batches: &[Batch], steps: usize) -> f64 {
        let mut opt = Adam::new(AdamConfig {
            lr: 1e-2,
            ..AdamConfig::default()
        });
        let x = batch_tensor(&batches[0]).unwrap();
        let mut loss = f64::INFINITY;
        for _ in 0..steps {
            model.zero_grad();
            let (logits, cache) = model.forward(&x, None).unwrap();
            let (l, _, dl) = softmax_cross_entropy(&logits, &batches[0].labels).unwrap();
            loss = l;
            if loss < 0.01 {
                break;
            }
            model.backward(&cache, &dl).unwrap();
            opt.step(&mut model.params_mut()).unwrap();
        }
        loss
    }

    #[test]
    fn both_models_memorize_32_samples() {
        let batches = memorization_batch(3);
        assert_eq!(batches[0].len(), 32);
        assert!(memorize(build_cnn(5, 1).unwrap(), &batches, 2000) < 0.01);
        assert!(memorize(build_rnn(5, 1).unwrap(), &batches, 2000) < 0.01);
    }

    fn two_class_task(per_class: usize, seed: u64) -> (Vec<Batch>, Vec<Batch>) {
        let data = generate(
            &[ShapeClass::Triangle, ShapeClass::Star5],
            per_class,
            seed,
            &Placement::default(),
            &Sequential,
        );
        let sp = split(data.len(), seed).unwrap();
        let s = compute_scale_factor(sp.train.iter().map(|&i| &data[i].geometry)).unwrap();
        let enc = |idx: &[usize]| -> Vec<_> {
            idx.iter()
                .map(|&i| encode(&data[i].geometry, data[i].label, s))
                .collect()
        };
        let train = bin_and_pad(&enc(&sp.train), 16, 64).unwrap();
        let val = bin_and_pad(&enc(&sp.val), 16, 64).unwrap();
        (train, val)
    }

    #[test]
    fn separable_pair_trains_and_is_reproducible() {
        let (tr, va) = two_class_task(100, 4);
        let cfg = TrainConfig {
            batch_size: 16,
            max_epochs: 30,
            patience: 29,
            seed: 7,
            lr: 3e-3,
            ..TrainConfig::default()
        };
        let (m1, h1) = train(build_cnn(2, 7).unwrap(), &tr, &va, &cfg).unwrap();
        let (m2, h2) = train(build_cnn(2, 7).unwrap(), &tr, &va, &cfg).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(m1, m2);
        assert!(h1.best_val_accuracy > 0.95, "{h1:?}");
        // Best parameters are restored.
        let again = evaluate(&m1, &va, false).unwrap();
        assert_eq!(again.accuracy, h1.best_val_accuracy);
        assert!(h1.epochs.iter().all(|e| e.val_accuracy <= again.accuracy));
    }

    #[test]
    fn zero_patience_stops_after_first_non_improving_epoch() {
        let (tr, va) = two_class_task(30, 5);
        let cfg = TrainConfig {
            batch_size: 16,
            max_epochs: 50,
            patience: 0,
            ..TrainConfig::default()
        };
        let (_, h) = train(build_cnn(2, 1).unwrap(), &tr, &va, &cfg).unwrap();
        let n = h.epochs.len();
        if h.stopped_early {
            assert!(h.epochs[n - 1].val_accuracy <= h.best_val_accuracy);
            let improving = h.epochs[..n - 1]
                .windows(2)
                .all(|w| w[1].val_accuracy > w[0].val_accuracy);
            assert!(improving);
        } else {
            assert_eq!(n, 50);
        }
    }

    #[test]
    fn config_validation_and_repeats() {
        let bad = TrainConfig {
            max_epochs: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(TrainConfig {
            patience: 500,
            ..TrainConfig::default()
        }
        .validate()
        .is_ok());
        assert!(TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
        let (tr, va) = two_class_task(20, 6);
        let cfg = TrainConfig {
            batch_size: 16,
            max_epochs: 3,
            patience: 1,
            ..TrainConfig::default()
        };
        assert!(matches!(
            repeated_runs(|s| build_cnn(2, s), &tr, &va, &va, &cfg, 1, &Sequential),
            Err(ModelError::Repeats(1))
        ));
        // One batch, no re-dealing and a fixed initialization: every repeat
        // is the same run.
        let all: Vec<_> = tr.iter().flat_map(Batch::unpadded).collect();
        let one = bin_and_pad(&all, all.len(), all.len()).unwrap();
        let forced = TrainConfig {
            batch_size: all.len(),
            redeal: false,
            ..cfg
        };
        let same =
            repeated_runs(|_| build_cnn(2, 3), &one, &va, &va, &forced, 2, &Sequential).unwrap();
        assert_eq!(same.runs.len(), 2);
        assert_eq!(same.runs[0].history, same.runs[1].history);
        assert_eq!(
            same.score,
            Score::MeanStd {
                mean: same.runs[0].test_accuracy,
                std: 0.0
            }
        );
    }

    #[test]
    fn masking_only_changes_padded_batches() {
        let cnn = build_cnn(3, 2).unwrap();
        let x = random_input(1, 6, 8);
        let full = cnn.probabilities(&x, None).unwrap();
        assert_eq!(full, cnn.probabilities(&x, Some(&[6])).unwrap());
        let mut padded = x.data().to_vec();
        padded.extend(core::iter::repeat_n(0.0, 6 * VECTOR_WIDTH));
        let xp = Tensor::new(alloc::vec![1, 12, VECTOR_WIDTH], padded).unwrap();
        assert_ne!(
            cnn.probabilities(&xp, None).unwrap(),
            cnn.probabilities(&xp, Some(&[6])).unwrap()
        );
    }
}
