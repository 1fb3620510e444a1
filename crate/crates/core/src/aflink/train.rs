//! Mini-batch Adam training with a cosine learning-rate schedule.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{accumulate_gradients, forward_batch};
use super::pairs::LabeledPair;
use super::scalar::Scalar;
use super::weights::AflinkWeights;
use super::window::PairInput;
use crate::error::{Error, Result};

/// Pairs evaluated per forward call when only scores are needed.
const EVAL_CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 64,
            lr_max: 1e-3,
            lr_min: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be positive".into()));
        }
        if !(self.lr_max > 0.0 && self.lr_min >= 0.0 && self.lr_min <= self.lr_max) {
            return Err(Error::Config(format!(
                "learning rates must satisfy 0 <= min <= max, 0 < max (got {} and {})",
                self.lr_min, self.lr_max
            )));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.epsilon > 0.0) {
            return Err(Error::Config("Adam moments must lie in [0, 1) and epsilon be positive".into()));
        }
        Ok(())
    }

    /// Learning rate for optimizer step `step` of `total`.
    pub fn learning_rate(&self, step: usize, total: usize) -> f64 {
        let progress = step as f64 / total.max(1) as f64;
        self.lr_min + 0.5 * (self.lr_max - self.lr_min) * (1.0 + (std::f64::consts::PI * progress).cos())
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Mean cross-entropy per epoch, measured during the epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
    pub elapsed: Duration,
}

struct Adam {
    m: AflinkWeights<f32>,
    v: AflinkWeights<f32>,
    t: i32,
}

impl Adam {
    fn step(&mut self, w: &mut AflinkWeights<f32>, g: &AflinkWeights<f32>, lr: f64, cfg: &TrainConfig) {
        self.t += 1;
        let (b1, b2) = (cfg.beta1 as f32, cfg.beta2 as f32);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let step = lr as f32 / c1;
        let eps = cfg.epsilon as f32;
        let sqrt_c2 = c2.sqrt();
        for (((wt, gt), mt), vt) in w
            .tensors
            .iter_mut()
            .zip(&g.tensors)
            .zip(&mut self.m.tensors)
            .zip(&mut self.v.tensors)
        {
            for (((p, &gr), m), v) in wt.data.iter_mut().zip(&gt.data).zip(&mut mt.data).zip(&mut vt.data) {
                *m = b1 * *m + (1.0 - b1) * gr;
                *v = b2 * *v + (1.0 - b2) * gr * gr;
                *p -= step * *m / (v.sqrt() / sqrt_c2 + eps);
            }
        }
    }
}

/// Trains from a seeded initialisation. Single-threaded and deterministic:
/// the same pairs and config give byte-identical weights.
pub fn train(pairs: &[LabeledPair], config: &TrainConfig) -> Result<(AflinkWeights<f32>, TrainReport)> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::Training("no training pairs".into()));
    }
    let started = Instant::now();
    let inputs: Vec<PairInput<f32>> = pairs.iter().map(LabeledPair::input).collect();
    let mut weights = AflinkWeights::<f32>::init(config.seed);
    let mut grads = AflinkWeights::<f32>::zeros();
    let mut adam = Adam {
        m: AflinkWeights::zeros(),
        v: AflinkWeights::zeros(),
        t: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let batches_per_epoch = pairs.len().div_ceil(config.batch_size);
    let total = batches_per_epoch * config.epochs;
    let mut step = 0;
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<PairInput<f32>> = chunk.iter().map(|&i| inputs[i].clone()).collect();
            let labels: Vec<bool> = chunk.iter().map(|&i| pairs[i].label).collect();
            for t in &mut grads.tensors {
                t.data.fill(0.0);
            }
            let scale = 1.0 / chunk.len() as f32;
            let loss = accumulate_gradients(&weights, &batch, &labels, scale, &mut grads)
                .map_err(|e| Error::Training(format!("epoch {}: {e}", epoch + 1)))?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Training(format!(
                    "loss diverged in epoch {} at step {step}",
                    epoch + 1
                )));
            }
            epoch_loss += f64::from(loss);
            adam.step(&mut weights, &grads, config.learning_rate(step, total), config);
            step += 1;
        }
        epoch_losses.push(epoch_loss / pairs.len() as f64);
    }
    if !weights.is_finite() {
        return Err(Error::Training("weights became non-finite".into()));
    }
    Ok((
        weights,
        TrainReport {
            epoch_losses,
            steps: step,
            elapsed: started.elapsed(),
        },
    ))
}

/// Fraction of pairs classified correctly at a 0.5 threshold.
pub fn accuracy<T: Scalar>(weights: &AflinkWeights<T>, pairs: &[LabeledPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for chunk in pairs.chunks(EVAL_CHUNK) {
        let inputs: Vec<PairInput<T>> = chunk.iter().map(LabeledPair::input).collect();
        let scores = forward_batch(weights, &inputs)?;
        correct += scores
            .iter()
            .zip(chunk)
            .filter(|(s, p)| (s.as_f64() > 0.5) == p.label)
            .count();
    }
    Ok(correct as f64 / pairs.len() as f64)
}
