use std::collections::BTreeMap;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::FoldPlan;
use super::metrics::{compute_metrics, MetricSet};
use super::report::{EvalReport, ReportRow, RunRecord};
use crate::data::{Label, Modality, Snippet};
use crate::error::{Error, ErrorKind, Result};
use crate::features::{sensors_for, FeatureCache};
use crate::fusion::{late_fuse, FusionConfig, FusionMode, DEFAULT_THRESHOLD};
use crate::nn::{train, ModelSpec, TrainConfig, TrainedModel};
use crate::seed::{derive, stream};

pub const MAX_ATTEMPTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossvalConfig {
    /// Sensor modalities under evaluation.
    pub modalities: Vec<Modality>,
    pub fusion: Option<FusionMode>,
    /// Architecture per network; the key is the network's input modality
    /// (`FUSED` for the early-fusion network).
    pub specs: BTreeMap<Modality, ModelSpec>,
    pub train: TrainConfig,
    pub repetitions: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl CrossvalConfig {
    pub fn new(
        modalities: Vec<Modality>,
        fusion: Option<FusionMode>,
        specs: BTreeMap<Modality, ModelSpec>,
        train: TrainConfig,
        repetitions: usize,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            modalities,
            fusion,
            specs,
            train,
            repetitions,
            threshold: DEFAULT_THRESHOLD,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Networks to train, in report order.
    pub fn networks(&self) -> Vec<Modality> {
        match self.fusion {
            Some(FusionMode::Early) => vec![Modality::Fused],
            _ => Modality::SENSORS.into_iter().filter(|m| self.modalities.contains(m)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.modalities.is_empty() {
            return Err(Error::Config("no modality selected".into()));
        }
        match self.fusion {
            Some(mode) => FusionConfig {
                mode,
                modalities: self.modalities.clone(),
                threshold: self.threshold,
            }
            .validate()?,
            None => {
                let mut m = self.modalities.clone();
                m.sort();
                m.dedup();
                if m.len() != self.modalities.len() || m.contains(&Modality::Fused) {
                    return Err(Error::Config("modalities must be distinct sensor modalities".into()));
                }
            }
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be positive".into()));
        }
        for net in self.networks() {
            let spec = self
                .specs
                .get(&net)
                .ok_or_else(|| Error::Config(format!("no model spec for the {net} network")))?;
            if spec.input_shape != net.feature_shape() {
                return Err(Error::Config(format!(
                    "{net} network spec expects {:?} inputs, features are {:?}",
                    spec.input_shape,
                    net.feature_shape()
                )));
            }
            spec.validate()?;
        }
        self.train.validate()
    }
}

/// Name of a report row for a set of network modalities.
pub fn row_name(mode: Option<FusionMode>, nets: &[Modality]) -> String {
    match (mode, nets.len()) {
        (Some(FusionMode::Early), _) => "ALL-1Net".into(),
        (_, 3) => "ALL-3Nets".into(),
        _ => nets.iter().map(|m| m.name()).collect::<Vec<_>>().join("+"),
    }
}

/// Every subset of `nets` of size one, then pairs, then (for three) all.
fn row_sets(mode: Option<FusionMode>, nets: &[Modality]) -> Vec<Vec<Modality>> {
    let mut out: Vec<Vec<Modality>> = nets.iter().map(|m| vec![*m]).collect();
    if mode == Some(FusionMode::Late) {
        for size in 2..=nets.len() {
            for mask in 0u32..(1 << nets.len()) {
                if mask.count_ones() as usize == size {
                    out.push((0..nets.len()).filter(|i| mask >> i & 1 == 1).map(|i| nets[i]).collect());
                }
            }
        }
    }
    out
}

struct FoldData {
    train_idx: Vec<usize>,
    test_idx: Vec<usize>,
    train_x: BTreeMap<Modality, Vec<Array2<f64>>>,
    test_x: BTreeMap<Modality, Vec<Array2<f64>>>,
}

fn split_fold(cache: &FeatureCache, plan: &FoldPlan, f: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let fold = &plan.folds[f];
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (i, s) in cache.subjects.iter().enumerate() {
        if fold.test_subjects.contains(s) {
            test_idx.push(i);
        } else if fold.train_subjects.contains(s) {
            train_idx.push(i);
        } else {
            return Err(Error::Data(format!(
                "snippet '{}' belongs to subject '{s}' outside the fold plan",
                cache.ids[i]
            )));
        }
    }
    fold.check_split(
        train_idx.iter().map(|&i| &cache.subjects[i]),
        test_idx.iter().map(|&i| &cache.subjects[i]),
    )?;
    if test_idx.is_empty() {
        return Err(Error::Data(format!("fold {f} has no test snippets")));
    }
    let pos = train_idx.iter().filter(|&&i| cache.labels[i] == Label::FmPlus).count();
    if pos == 0 || pos == train_idx.len() {
        return Err(Error::Data(format!("training set of fold {f} lacks one of the classes")));
    }
    Ok((train_idx, test_idx))
}

/// Trains one repetition, retrying with the next attempt's seed when
/// training fails numerically.
pub fn train_with_retries(
    spec: &ModelSpec,
    xs: &[Array2<f64>],
    ys: &[Label],
    cfg: &TrainConfig,
    seed_of: impl Fn(usize) -> u64,
) -> Result<(usize, u64, TrainedModel)> {
    let mut last = None;
    for attempt in 0..MAX_ATTEMPTS {
        let seed = seed_of(attempt);
        match train(spec, xs, ys, &cfg.with_seed(seed)) {
            Ok(m) => return Ok((attempt, seed, m)),
            Err(e) if e.kind() == ErrorKind::Numeric => {
                log::warn!("training attempt {} with seed {seed} failed: {e}", attempt + 1);
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::Numeric(format!(
        "training failed after {MAX_ATTEMPTS} attempts: {}",
        last.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// Grouped cross-validation with the repetition-and-selection protocol.
///
/// Per fold: normalization statistics are fitted on the training subjects,
/// each network is trained `repetitions` times and the run with the lowest
/// validation loss is scored on the test subjects.
pub fn run_crossval(snippets: &[Snippet], plan: &FoldPlan, cfg: &CrossvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let networks = cfg.networks();
    let mut sensors: Vec<Modality> = networks.iter().flat_map(|n| sensors_for(*n)).collect();
    sensors.sort();
    sensors.dedup();
    let cache = FeatureCache::build(snippets, &sensors)?;
    let subjects: Vec<_> = {
        let mut s: Vec<_> = cache.subjects.clone();
        s.sort();
        s.dedup();
        s
    };
    plan.validate(&subjects)?;

    let folds: Vec<FoldData> = (0..plan.folds.len())
        .map(|f| {
            let (train_idx, test_idx) = split_fold(&cache, plan, f)?;
            let stats = cache.fit_stats(&train_idx)?;
            let mut train_x = BTreeMap::new();
            let mut test_x = BTreeMap::new();
            for &net in &networks {
                train_x.insert(net, cache.matrices(net, &stats, &train_idx)?);
                test_x.insert(net, cache.matrices(net, &stats, &test_idx)?);
            }
            Ok(FoldData {
                train_idx,
                test_idx,
                train_x,
                test_x,
            })
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize, usize)> = (0..folds.len())
        .flat_map(|f| (0..networks.len()).flat_map(move |n| (0..cfg.repetitions).map(move |r| (f, n, r))))
        .collect();
    let results: Vec<(usize, usize, usize, usize, u64, TrainedModel)> = jobs
        .par_iter()
        .map(|&(f, n, r)| {
            let net = networks[n];
            let fd = &folds[f];
            let ys: Vec<Label> = fd.train_idx.iter().map(|&i| cache.labels[i]).collect();
            let seed_of = |attempt: usize| derive(cfg.seed, &[stream::TRAIN, f as u64, n as u64, r as u64, attempt as u64]);
            let (attempt, seed, model) = train_with_retries(&cfg.specs[&net], &fd.train_x[&net], &ys, &cfg.train, seed_of)
                .map_err(|e| Error::Numeric(format!("fold {f}, {net} network, repetition {r}: {e}")))?;
            log::info!(
                "fold {f} {net} rep {r}: best epoch {} val loss {:.4}",
                model.best_epoch,
                model.best_val_loss
            );
            Ok((f, n, r, attempt, seed, model))
        })
        .collect::<Result<_>>()?;

    // lowest validation loss per (fold, network); ties keep the earlier repetition
    let mut best: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (i, (f, n, _, _, _, m)) in results.iter().enumerate() {
        let e = best.entry((*f, *n)).or_insert(i);
        if m.best_val_loss < results[*e].5.best_val_loss {
            *e = i;
        }
    }
    let mut probs: BTreeMap<(usize, Modality), Vec<f64>> = BTreeMap::new();
    for (&(f, n), &i) in &best {
        let net = networks[n];
        let xs: Vec<&Array2<f64>> = folds[f].test_x[&net].iter().collect();
        probs.insert((f, net), results[i].5.predict_batch(&xs)?);
    }
    let runs: Vec<RunRecord> = results
        .iter()
        .enumerate()
        .map(|(i, (f, n, r, attempt, seed, m))| RunRecord {
            fold: *f,
            network: networks[*n],
            repetition: *r,
            attempt: *attempt,
            seed: *seed,
            best_epoch: m.best_epoch,
            epochs_run: m.train_log.len(),
            best_val_loss: m.best_val_loss,
            selected: best[&(*f, *n)] == i,
        })
        .collect();

    let mut rows = Vec::new();
    for set in row_sets(cfg.fusion, &networks) {
        let per_fold = (0..folds.len())
            .map(|f| {
                let truth: Vec<Label> = folds[f].test_idx.iter().map(|&i| cache.labels[i]).collect();
                let preds = (0..truth.len())
                    .map(|k| {
                        let ps: Vec<f64> = set.iter().map(|net| probs[&(f, *net)][k]).collect();
                        late_fuse(&ps, cfg.threshold).map(|(_, l)| l)
                    })
                    .collect::<Result<Vec<Label>>>()?;
                compute_metrics(&preds, &truth)
            })
            .collect::<Result<Vec<MetricSet>>>()?;
        rows.push(ReportRow::new(row_name(cfg.fusion, &set), per_fold)?);
    }
    let experiment = format!(
        "grouped cross-validation, {} repetition{}, {}",
        cfg.repetitions,
        if cfg.repetitions == 1 { "" } else { "s" },
        match cfg.fusion {
            None => "single modality".to_string(),
            Some(FusionMode::Late) => "late fusion".to_string(),
            Some(FusionMode::Early) => "early fusion".to_string(),
        }
    );
    EvalReport::new(experiment, rows, runs)
}
