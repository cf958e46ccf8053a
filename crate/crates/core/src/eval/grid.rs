use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::crossval::train_with_retries;
use crate::data::{Label, Modality, Snippet, SubjectId};
use crate::error::{Error, Result};
use crate::features::{sensors_for, FeatureCache};
use crate::nn::{ConvSpec, ModelSpec, TrainConfig};
use crate::seed::{derive, stream};

/// Candidate values per conv layer (kernel counts × kernel lengths) and
/// for the fully connected layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpace {
    pub conv: [(Vec<usize>, Vec<usize>); 3],
    pub fc: Vec<usize>,
}

impl Default for GridSpace {
    fn default() -> Self {
        Self {
            conv: [
                (vec![4, 8], vec![13, 17, 25]),
                (vec![8, 16, 32, 64], vec![7, 9, 13, 17, 25]),
                (vec![8, 16, 32, 64], vec![9, 13, 17, 25, 33]),
            ],
            fc: vec![128, 256],
        }
    }
}

impl GridSpace {
    pub fn cardinality(&self) -> usize {
        self.conv.iter().map(|(n, k)| n.len() * k.len()).product::<usize>() * self.fc.len()
    }

    /// Mixed-radix decoding of `index`; the fc choice varies fastest.
    pub fn spec(&self, index: usize, input_shape: (usize, usize)) -> Option<ModelSpec> {
        if index >= self.cardinality() {
            return None;
        }
        let mut rest = index;
        let fc = self.fc[rest % self.fc.len()];
        rest /= self.fc.len();
        let mut convs = [ConvSpec::new(0, 0); 3];
        for layer in (0..3).rev() {
            let (n, k) = &self.conv[layer];
            let kl = k[rest % k.len()];
            rest /= k.len();
            let nk = n[rest % n.len()];
            rest /= n.len();
            convs[layer] = ConvSpec::new(nk, kl);
        }
        Some(ModelSpec::new(convs.to_vec(), fc, input_shape))
    }

    pub fn specs(&self, input_shape: (usize, usize)) -> impl Iterator<Item = ModelSpec> + '_ {
        (0..self.cardinality()).filter_map(move |i| self.spec(i, input_shape))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub modality: Modality,
    /// Evaluate a seeded random subset of this many specs instead of the
    /// whole space.
    pub budget: Option<usize>,
    pub repeats: usize,
    pub top: usize,
    pub seed: u64,
    pub train: TrainConfig,
}

impl GridConfig {
    /// Tuning-stage defaults: 3 repeats, validation split 1/5, patience 10,
    /// top 10.
    pub fn new(modality: Modality, seed: u64) -> Self {
        Self {
            modality,
            budget: None,
            repeats: 3,
            top: 10,
            seed,
            train: TrainConfig {
                validation_split: 0.2,
                patience: 10,
                ..TrainConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSpec {
    pub spec: ModelSpec,
    pub name: String,
    pub mean_val_loss: f64,
    pub val_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub modality: Modality,
    pub space_size: usize,
    pub configs_evaluated: usize,
    pub runs: usize,
    pub ranked: Vec<RankedSpec>,
}

/// Indices of the specs to evaluate, in evaluation order.
pub fn grid_indices(space: &GridSpace, budget: Option<usize>, seed: u64) -> Vec<usize> {
    let n = space.cardinality();
    match budget {
        Some(b) if b < n => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, &[stream::GRID]));
            rand::seq::index::sample(&mut rng, n, b).into_vec()
        }
        _ => (0..n).collect(),
    }
}

/// Trains every candidate `repeats` times on the tuning snippets and ranks
/// candidates by mean best validation loss.
pub fn grid_search(
    space: &GridSpace,
    tuning: &[Snippet],
    cv_subjects: &[SubjectId],
    cfg: &GridConfig,
) -> Result<GridResult> {
    if space.cardinality() == 0 {
        return Err(Error::Config("empty hyperparameter space".into()));
    }
    if cfg.repeats == 0 || cfg.top == 0 {
        return Err(Error::Config("repeats and top must be positive".into()));
    }
    if cfg.budget == Some(0) {
        return Err(Error::Config("grid budget must be positive".into()));
    }
    if tuning.is_empty() {
        return Err(Error::Data("empty tuning set".into()));
    }
    let cv: BTreeSet<&SubjectId> = cv_subjects.iter().collect();
    if let Some(s) = tuning.iter().find(|s| cv.contains(&s.subject)) {
        return Err(Error::Data(format!(
            "tuning subject '{}' overlaps the cross-validation subjects",
            s.subject
        )));
    }
    cfg.train.validate()?;

    let cache = FeatureCache::build(tuning, &sensors_for(cfg.modality))?;
    let all: Vec<usize> = (0..cache.len()).collect();
    let stats = cache.fit_stats(&all)?;
    let xs = cache.matrices(cfg.modality, &stats, &all)?;
    let ys: Vec<Label> = cache.labels.clone();

    let indices = grid_indices(space, cfg.budget, cfg.seed);
    let shape = cfg.modality.feature_shape();
    let jobs: Vec<(usize, usize)> = indices.iter().flat_map(|&i| (0..cfg.repeats).map(move |r| (i, r))).collect();
    let losses: Vec<f64> = jobs
        .par_iter()
        .map(|&(i, r)| {
            let spec = space.spec(i, shape).expect("index in range");
            let seed_of = |a: usize| derive(cfg.seed, &[stream::GRID, i as u64, r as u64, a as u64]);
            let (_, _, m) = train_with_retries(&spec, &xs, &ys, &cfg.train, seed_of)?;
            Ok(m.best_val_loss)
        })
        .collect::<Result<_>>()?;

    let mut ranked: Vec<RankedSpec> = indices
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let spec = space.spec(i, shape).expect("index in range");
            let val_losses = losses[k * cfg.repeats..(k + 1) * cfg.repeats].to_vec();
            RankedSpec {
                name: spec.to_string(),
                mean_val_loss: val_losses.iter().sum::<f64>() / cfg.repeats as f64,
                val_losses,
                spec,
            }
        })
        .collect();
    ranked.sort_by(|a, b| a.mean_val_loss.total_cmp(&b.mean_val_loss).then_with(|| a.name.cmp(&b.name)));
    let mut seen = BTreeSet::new();
    ranked.retain(|r| seen.insert(r.name.clone()));
    if ranked.len() < cfg.top {
        log::warn!("only {} candidate specs evaluated, fewer than the {} requested", ranked.len(), cfg.top);
    }
    ranked.truncate(cfg.top);
    Ok(GridResult {
        modality: cfg.modality,
        space_size: space.cardinality(),
        configs_evaluated: indices.len(),
        runs: jobs.len(),
        ranked,
    })
}
