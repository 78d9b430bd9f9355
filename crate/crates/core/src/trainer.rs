//! Dataset splitting, Adam, and the epoch loop with best-validation-loss
//! model selection.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::EvalReport;
use crate::model::{
    backward, bce_with_logits, forward, init_params, sigmoid, Gradients, ModelConfig, ModelParams,
};

/// Samples scored per forward pass during evaluation.
const EVAL_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.2,
            test: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub threshold: f64,
    pub split: SplitFractions,
    pub seed: u64,
    /// Split per label combination instead of over the whole pool.
    pub stratified: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 16,
            learning_rate: 0.001,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            threshold: 0.5,
            split: SplitFractions::default(),
            seed: 0,
            stratified: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.into()));
        let s = self.split;
        if [s.train, s.val, s.test].iter().any(|f| !(0.0..=1.0).contains(f))
            || (s.train + s.val + s.test - 1.0).abs() > 1e-9
        {
            return fail("split fractions must lie in [0, 1] and sum to 1");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return fail("threshold must lie in (0, 1)");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return fail("Adam betas must lie in [0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return fail("adam_eps must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

fn split_sizes(n: usize, f: SplitFractions) -> (usize, usize, usize) {
    let train = ((f.train * n as f64).round() as usize).min(n);
    let val = ((f.val * n as f64).round() as usize).min(n - train);
    (train, val, n - train - val)
}

/// Shuffles `0..n` with `cfg.seed` and cuts it into train/val/test of sizes
/// `round(0.7 n)`, `round(0.2 n)` and the remainder.
pub fn split_dataset(n: usize, cfg: &TrainConfig) -> Result<Split> {
    if n < 10 {
        return Err(Error::TooFewItems { needed: 10, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let (nt, nv, _) = split_sizes(n, cfg.split);
    let mut split = Split {
        train: order[..nt].to_vec(),
        val: order[nt..nt + nv].to_vec(),
        test: order[nt + nv..].to_vec(),
    };
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Like [`split_dataset`] but keeps each label combination's share close to
/// the split fractions. Totals are identical to the unstratified split.
pub fn split_dataset_stratified(labels: &[Vec<u8>], cfg: &TrainConfig) -> Result<Split> {
    let n = labels.len();
    if n < 10 {
        return Err(Error::TooFewItems { needed: 10, got: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut groups: BTreeMap<&[u8], Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l.as_slice()).or_default().push(i);
    }
    let mut order = Vec::with_capacity(n);
    for members in groups.values_mut() {
        members.shuffle(&mut rng);
        order.extend_from_slice(members);
    }
    // Deal positions to whichever split is furthest behind its quota.
    let (nt, nv, ns) = split_sizes(n, cfg.split);
    let targets = [nt, nv, ns];
    let mut dealt = [0usize; 3];
    let mut split = Split {
        train: Vec::with_capacity(nt),
        val: Vec::with_capacity(nv),
        test: Vec::with_capacity(ns),
    };
    for (k, &item) in order.iter().enumerate() {
        let deficit = |s: usize| targets[s] as f64 * (k + 1) as f64 / n as f64 - dealt[s] as f64;
        let s = (0..3)
            .filter(|&s| dealt[s] < targets[s])
            .max_by(|&a, &b| deficit(a).total_cmp(&deficit(b)).then(b.cmp(&a)))
            .expect("quotas sum to n");
        dealt[s] += 1;
        [&mut split.train, &mut split.val, &mut split.test][s].push(item);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Model inputs stored contiguously, one `sample_len` block per item, with
/// binary targets.
#[derive(Debug, Clone)]
pub struct Dataset {
    inputs: Vec<f64>,
    sample_len: usize,
    targets: Matrix<u8>,
}

impl Dataset {
    pub fn new(inputs: Vec<f64>, sample_len: usize, targets: Matrix<u8>) -> Result<Self> {
        if sample_len == 0 || inputs.len() != sample_len * targets.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} input values for {} samples of length {sample_len}",
                inputs.len(),
                targets.rows()
            )));
        }
        if targets.as_slice().iter().any(|&t| t > 1) {
            return Err(Error::ShapeMismatch("targets must be 0 or 1".into()));
        }
        Ok(Self {
            inputs,
            sample_len,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_classes(&self) -> usize {
        self.targets.cols()
    }

    pub fn sample_len(&self) -> usize {
        self.sample_len
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.sample_len..(i + 1) * self.sample_len]
    }

    pub fn targets(&self) -> &Matrix<u8> {
        &self.targets
    }

    /// Copies the listed items into a batch buffer and a target matrix.
    pub fn gather(&self, idx: &[usize]) -> (Vec<f64>, Matrix<f64>) {
        let mut x = Vec::with_capacity(idx.len() * self.sample_len);
        for &i in idx {
            x.extend_from_slice(self.input(i));
        }
        let y = Matrix::from_fn(idx.len(), self.num_classes(), |r, c| {
            f64::from(self.targets[(idx[r], c)])
        });
        (x, y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(params: &mut ModelParams, grads: &Gradients, state: &mut AdamState, cfg: &TrainConfig) -> Result<()> {
    let shapes_match = params.tensors().len() == grads.tensors.len()
        && state.m.len() == grads.tensors.len()
        && state.v.len() == grads.tensors.len()
        && params
            .tensors()
            .iter()
            .zip(&grads.tensors)
            .zip(state.m.iter().zip(&state.v))
            .all(|((p, g), (m, v))| p.len() == g.len() && m.len() == g.len() && v.len() == g.len());
    if !shapes_match {
        return Err(Error::ShapeMismatch("gradients, moments and parameters disagree".into()));
    }
    state.t += 1;
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let c1 = 1.0 - b1.powf(state.t as f64);
    let c2 = 1.0 - b2.powf(state.t as f64);
    for (((p, g), m), v) in params
        .tensors_mut()
        .iter_mut()
        .zip(&grads.tensors)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        for i in 0..p.data.len() {
            let gi = g.data[i];
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p.data[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Element-wise accuracy in percent.
    pub val_accuracy: f64,
    pub val_macro_f1: f64,
    /// Optimizer steps taken in this epoch.
    pub steps: usize,
}

/// Writes one JSON object per line.
pub fn write_history(history: &[EpochRecord], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for r in history {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| Error::io(path, e))
}

pub fn read_history(path: &Path) -> Result<Vec<EpochRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// Receives progress from the training thread.
pub trait ProgressSink {
    fn on_batch(&mut self, _epoch: usize, _batch: usize, _loss: f64) {}
    fn on_epoch(&mut self, _record: &EpochRecord) {}
}

/// Discards all progress.
pub struct Silent;

impl ProgressSink for Silent {}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Mean loss, probabilities and metrics over `idx`.
pub fn score(params: &ModelParams, data: &Dataset, idx: &[usize], threshold: f64) -> Result<(f64, Matrix<f64>, EvalReport)> {
    if idx.is_empty() {
        return Err(Error::EmptySplit);
    }
    let c = data.num_classes();
    let mut probs = Vec::with_capacity(idx.len() * c);
    let mut loss_sum = 0.0;
    for chunk in idx.chunks(EVAL_CHUNK) {
        let (x, y) = data.gather(chunk);
        let (logits, _) = forward(params, &x, chunk.len())?;
        let (loss, _) = bce_with_logits(&logits, &y)?;
        loss_sum += loss * (chunk.len() * c) as f64;
        probs.extend(logits.as_slice().iter().map(|&z| sigmoid(z)));
    }
    let probs = Matrix::from_vec(idx.len(), c, probs);
    let truth = Matrix::from_fn(idx.len(), c, |r, j| data.targets()[(idx[r], j)]);
    let report = EvalReport::from_probabilities(&probs, &truth, threshold)?;
    Ok((loss_sum / (idx.len() * c) as f64, probs, report))
}

/// Thresholded metrics of `params` on the items `idx`.
pub fn evaluate(params: &ModelParams, data: &Dataset, idx: &[usize], threshold: f64) -> Result<EvalReport> {
    score(params, data, idx, threshold).map(|(_, _, r)| r)
}

/// Runs `cfg.epochs` epochs of shuffled mini-batch Adam on `split.train`,
/// scoring `split.val` after each epoch.
pub fn train(
    data: &Dataset,
    split: &Split,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    sink: &mut dyn ProgressSink,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    model_cfg.validate()?;
    if split.train.is_empty() || split.val.is_empty() {
        return Err(Error::EmptySplit);
    }
    if data.sample_len() != model_cfg.input_len() || data.num_classes() != model_cfg.num_classes {
        return Err(Error::ShapeMismatch(format!(
            "dataset has {} values x {} classes per item, model expects {} x {}",
            data.sample_len(),
            data.num_classes(),
            model_cfg.input_len(),
            model_cfg.num_classes
        )));
    }
    if let Some(&bad) = split.train.iter().chain(&split.val).find(|&&i| i >= data.len()) {
        return Err(Error::ShapeMismatch(format!("split index {bad} out of range")));
    }

    let mut params = init_params(model_cfg)?;
    let mut adam = AdamState::new(&params);
    // Offset from the split seed so shuffling is not the split permutation.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5eed_5eed_5eed);
    let mut order = split.train.clone();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ModelParams)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut seen, mut steps) = (0.0, 0usize, 0usize);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let (x, y) = data.gather(batch);
            let (logits, cache) = forward(&params, &x, batch.len())?;
            let (loss, dlogits) = bce_with_logits(&logits, &y)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b + 1 });
            }
            let grads = backward(&params, &cache, &dlogits)?;
            adam_step(&mut params, &grads, &mut adam, cfg)?;
            if params.tensors().iter().any(|t| t.data.iter().any(|v| !v.is_finite())) {
                return Err(Error::NonFiniteLoss { epoch, batch: b + 1 });
            }
            loss_sum += loss * batch.len() as f64;
            seen += batch.len();
            steps += 1;
            sink.on_batch(epoch, b + 1, loss);
        }
        let (val_loss, _, report) = score(&params, data, &split.val, cfg.threshold)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: 0 });
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / seen as f64,
            val_loss,
            val_accuracy: report.elementwise_accuracy,
            val_macro_f1: report.macro_f1,
            steps,
        };
        sink.on_epoch(&record);
        history.push(record);
        if best.as_ref().is_none_or(|(l, _, _)| val_loss < *l) {
            best = Some((val_loss, epoch, params.clone()));
        }
    }

    let (params, best_epoch) = match best {
        Some((_, e, p)) => (p, e),
        None => (params, 0),
    };
    Ok(TrainOutcome {
        params,
        history,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Tensor;
    use proptest::prelude::*;

    #[test]
    fn split_sizes_follow_rounding() {
        let cfg = TrainConfig::default();
        let s = split_dataset(8000, &cfg).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (5600, 1600, 800));
        let s = split_dataset(10, &cfg).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (7, 2, 1));
        assert!(matches!(split_dataset(9, &cfg), Err(Error::TooFewItems { .. })));
        assert_eq!(split_dataset(600, &cfg).unwrap(), split_dataset(600, &cfg).unwrap());
        let other = TrainConfig { seed: 1, ..cfg };
        assert_ne!(split_dataset(600, &TrainConfig::default()).unwrap(), split_dataset(600, &other).unwrap());
    }

    fn assert_partition(s: &Split, n: usize) {
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 10usize..3000, seed in any::<u64>()) {
            let cfg = TrainConfig { seed, ..TrainConfig::default() };
            let s = split_dataset(n, &cfg).unwrap();
            assert_partition(&s, n);
            let labels: Vec<Vec<u8>> = (0..n).map(|i| vec![(i % 3 == 0) as u8, (i % 5 == 0) as u8]).collect();
            let t = split_dataset_stratified(&labels, &cfg).unwrap();
            assert_partition(&t, n);
            prop_assert_eq!((s.train.len(), s.val.len(), s.test.len()), (t.train.len(), t.val.len(), t.test.len()));
        }
    }

    #[test]
    fn stratified_split_keeps_class_shares() {
        let labels: Vec<Vec<u8>> = (0..1000).map(|i| vec![u8::from(i % 10 == 0)]).collect();
        let s = split_dataset_stratified(&labels, &TrainConfig::default()).unwrap();
        let pos = |idx: &[usize]| idx.iter().filter(|&&i| labels[i][0] == 1).count();
        assert_eq!((pos(&s.train), pos(&s.val), pos(&s.test)), (70, 20, 10));
    }

    fn one_tensor(values: Vec<f64>) -> (ModelParams, Gradients) {
        let cfg = ModelConfig {
            input_channels: 1,
            input_height: 2,
            input_width: 2,
            conv_channels: vec![1],
            kernel_size: 3,
            fc_hidden: 1,
            num_classes: 1,
            weight_init_seed: 0,
        };
        let p = crate::model::init_params(&cfg).unwrap();
        let mut g = Gradients::zeros_like(&p);
        g.tensors[0] = Tensor {
            data: values,
            ..g.tensors[0].clone()
        };
        (p, g)
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let (mut p, g) = one_tensor(vec![0.0; 9]);
        let before = p.clone();
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, &TrainConfig::default()).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn adam_first_step_is_sign_scaled() {
        let g: Vec<f64> = vec![0.3, -2.0, 1e-3, -1e-4, 5.0, -0.7, 1e2, 1e-2, -3.0];
        let (mut p, grads) = one_tensor(g.clone());
        let before = p.tensors()[0].data.clone();
        let cfg = TrainConfig::default();
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &grads, &mut s, &cfg).unwrap();
        for ((a, b), gi) in p.tensors()[0].data.iter().zip(&before).zip(&g) {
            let step = a - b;
            assert_eq!(step.signum(), -gi.signum());
            assert!(step.abs() <= cfg.learning_rate && step.abs() >= 0.999 * cfg.learning_rate);
        }
        // Same inputs, same outputs.
        let (mut q, grads2) = one_tensor(g);
        let mut s2 = AdamState::new(&q);
        adam_step(&mut q, &grads2, &mut s2, &cfg).unwrap();
        assert_eq!(p, q);
        assert_eq!(s, s2);
    }

    #[test]
    fn adam_without_momentum_is_normalized_sgd() {
        let g = vec![0.5, -1e-7, 2.0, 0.0, -3.0, 1e-9, 4.0, -0.25, 1.0];
        let (mut p, grads) = one_tensor(g.clone());
        let before = p.tensors()[0].data.clone();
        let cfg = TrainConfig {
            adam_beta1: 0.0,
            adam_beta2: 0.0,
            ..TrainConfig::default()
        };
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &grads, &mut s, &cfg).unwrap();
        for ((a, b), gi) in p.tensors()[0].data.iter().zip(&before).zip(&g) {
            let expect = -cfg.learning_rate * gi / (gi.abs() + cfg.adam_eps);
            assert!((a - b - expect).abs() < 1e-15, "{gi}");
        }
    }

    fn toy(n: usize) -> (Dataset, ModelConfig) {
        // Class 0 is on when the top half is brighter than the bottom,
        // class 1 when the left half is.
        let cfg = ModelConfig {
            input_channels: 1,
            input_height: 4,
            input_width: 4,
            conv_channels: vec![4],
            kernel_size: 3,
            fc_hidden: 8,
            num_classes: 2,
            weight_init_seed: 1,
        };
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let (a, b) = (i % 2, (i / 2) % 2);
            for r in 0..4 {
                for c in 0..4 {
                    let top = if (r < 2) == (a == 1) { 1.0 } else { -1.0 };
                    let left = if (c < 2) == (b == 1) { 1.0 } else { -1.0 };
                    x.push(top + left + 0.1 * ((i * 7 + r * 3 + c) % 5) as f64);
                }
            }
            y.extend([a as u8, b as u8]);
        }
        (Dataset::new(x, 16, Matrix::from_vec(n, 2, y)).unwrap(), cfg)
    }

    #[test]
    fn one_epoch_counts_steps() {
        let (data, mcfg) = toy(200);
        let split = Split {
            train: (0..160).collect(),
            val: (160..200).collect(),
            test: vec![],
        };
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let out = train(&data, &split, &mcfg, &cfg, &mut Silent).unwrap();
        assert_eq!(out.history.len(), 1);
        assert_eq!(out.history[0].steps, 10);
    }

    #[test]
    fn training_reduces_loss_and_keeps_best_epoch() {
        let (data, mcfg) = toy(200);
        let cfg = TrainConfig {
            epochs: 12,
            learning_rate: 0.01,
            ..TrainConfig::default()
        };
        let split = split_dataset(data.len(), &cfg).unwrap();
        let a = train(&data, &split, &mcfg, &cfg, &mut Silent).unwrap();
        assert!(a.history[9].train_loss < a.history[0].train_loss);
        let min = a.history.iter().map(|r| r.val_loss).fold(f64::INFINITY, f64::min);
        let (best_loss, _, _) = score(&a.params, &data, &split.val, 0.5).unwrap();
        assert!((best_loss - min).abs() < 1e-12);
        assert_eq!(a.history[a.best_epoch - 1].val_loss, min);

        let b = train(&data, &split, &mcfg, &cfg, &mut Silent).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn evaluate_counts_for_perfect_and_empty_predictors() {
        let (data, mcfg) = toy(40);
        let mut p = ModelParams::zeros(&mcfg).unwrap();
        // Zero network with very negative output bias predicts all zeros.
        let last = p.tensors().len() - 1;
        p.tensors_mut()[last].data = vec![-50.0, -50.0];
        let idx: Vec<usize> = (0..40).collect();
        let rep = evaluate(&p, &data, &idx, 0.5).unwrap();
        let q = data.targets().as_slice().iter().filter(|&&t| t == 1).count() as f64 / 80.0;
        assert!((rep.elementwise_accuracy - 100.0 * (1.0 - q)).abs() < 1e-9);
        assert!(matches!(evaluate(&p, &data, &[], 0.5), Err(Error::EmptySplit)));
    }

    #[test]
    fn history_round_trips_through_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.jsonl");
        let h = vec![EpochRecord {
            epoch: 1,
            train_loss: 0.5,
            val_loss: 0.25,
            val_accuracy: 90.0,
            val_macro_f1: 0.8,
            steps: 3,
        }];
        write_history(&h, &path).unwrap();
        assert_eq!(read_history(&path).unwrap(), h);
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 1);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let base = TrainConfig::default();
        for bad in [
            TrainConfig { threshold: 1.0, ..base.clone() },
            TrainConfig { batch_size: 0, ..base.clone() },
            TrainConfig {
                split: SplitFractions { train: 0.8, val: 0.2, test: 0.1 },
                ..base.clone()
            },
        ] {
            assert!(bad.validate().is_err());
        }
        let parsed: TrainConfig = serde_json::from_str(r#"{"epochs": 3}"#).unwrap();
        assert_eq!(parsed.batch_size, 16);
        assert_eq!(parsed.epochs, 3);
    }
}
