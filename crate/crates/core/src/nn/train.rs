//! Mini-batch training with a held-out validation split and early stopping
//! that restores the best-validation weights.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::loss::{bce_grad, bce_with_logits};
use super::network::{stack, Network};
use super::ModelSpec;
use crate::data::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub validation_split: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 4,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            validation_split: 1.0 / 8.0,
            patience: 10,
            max_epochs: 200,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config("batch size must be at least 2 for batch normalization".into()));
        }
        if !(0.0 < self.validation_split && self.validation_split < 1.0) {
            return Err(Error::Config(format!(
                "validation split {} outside (0, 1)",
                self.validation_split
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be positive".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub network: Network,
    pub train_log: Vec<EpochLog>,
    /// 0-based epoch whose weights were restored.
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

impl TrainedModel {
    pub fn predict_proba(&self, x: &Array2<f64>) -> Result<f64> {
        self.network.predict_proba(x)
    }

    pub fn predict_batch(&self, xs: &[&Array2<f64>]) -> Result<Vec<f64>> {
        self.network.predict_batch(xs)
    }
}

/// Batches of `size`; a trailing batch of one sample joins the previous
/// batch so batch statistics are always defined.
fn batches(indices: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = indices.chunks(size).collect();
    if out.len() >= 2 && out.last().map(|b| b.len()) == Some(1) {
        out.pop();
        let start = (out.len() - 1) * size;
        *out.last_mut().unwrap() = &indices[start..];
    }
    out
}

/// Mean binary cross-entropy of `net` on the given samples, inference mode.
pub fn evaluate_loss(net: &Network, xs: &[&Array2<f64>], ys: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (xc, yc) in xs.chunks(32).zip(ys.chunks(32)) {
        let logits = net.logits(stack(xc.iter().copied()))?;
        total += logits.iter().zip(yc).map(|(z, y)| bce_with_logits(*z, *y)).sum::<f64>();
    }
    Ok(total / ys.len() as f64)
}

pub fn train(spec: &ModelSpec, xs: &[Array2<f64>], ys: &[Label], cfg: &TrainConfig) -> Result<TrainedModel> {
    cfg.validate()?;
    spec.validate()?;
    if xs.len() != ys.len() {
        return Err(Error::Shape(format!("{} samples but {} labels", xs.len(), ys.len())));
    }
    if let Some(bad) = xs.iter().find(|x| x.dim() != spec.input_shape) {
        return Err(Error::Shape(format!(
            "sample shape {:?} does not match model input {:?}",
            bad.dim(),
            spec.input_shape
        )));
    }
    let positives = ys.iter().filter(|l| **l == Label::FmPlus).count();
    if positives == 0 || positives == ys.len() {
        return Err(Error::Data("training data contains a single class".into()));
    }
    let n_val = ((xs.len() as f64 * cfg.validation_split).round() as usize).max(1);
    if xs.len() < n_val + 2 {
        return Err(Error::Data(format!("{} samples are too few to train with a validation split", xs.len())));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = Network::new(spec, &mut rng)?;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.shuffle(&mut rng);
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    let val_x: Vec<&Array2<f64>> = val_idx.iter().map(|&i| &xs[i]).collect();
    let val_y: Vec<f64> = val_idx.iter().map(|&i| ys[i].as_f64()).collect();

    let mut adam = Adam::new(cfg.adam());
    let mut log = Vec::new();
    let mut best = (f64::INFINITY, 0usize, net.clone());
    let mut since_best = 0usize;

    for epoch in 0..cfg.max_epochs {
        train_idx.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in batches(&train_idx, cfg.batch_size) {
            let x = stack(batch.iter().map(|&i| &xs[i]));
            let y: Vec<f64> = batch.iter().map(|&i| ys[i].as_f64()).collect();
            let logits = net.forward_train(x, &mut rng)?;
            let b = y.len() as f64;
            let batch_loss: f64 = logits.iter().zip(&y).map(|(z, t)| bce_with_logits(*z, *t)).sum();
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            loss_sum += batch_loss;
            let dlogits: Array1<f64> = logits.iter().zip(&y).map(|(z, t)| bce_grad(*z, *t) / b).collect();
            net.backward(&dlogits);
            adam.step(net.params_and_grads());
        }
        let train_loss = loss_sum / train_idx.len() as f64;
        let val_loss = evaluate_loss(&net, &val_x, &val_y)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        log.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best.0 {
            best = (val_loss, epoch, net.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }

    let (best_val_loss, best_epoch, mut network) = best;
    network.ensure_grad_buffers();
    Ok(TrainedModel {
        spec: spec.clone(),
        network,
        train_log: log,
        best_epoch,
        best_val_loss,
    })
}
