//! Per-snippet feature cache. Everything that depends on one snippet only is
//! computed once; train-set statistics are fitted per split and applied on
//! demand.

use ndarray::Array2;
use rayon::prelude::*;

use crate::data::{FeatureMatrix, Label, Modality, Snippet, SubjectId};
use crate::error::{Error, Result};
use crate::fusion::early_fuse_features;
use crate::imu::imu_prenorm;
use crate::mat::finalize_mat_features;
use crate::norm::{fit_norm_stats, NormKind, NormStats};
use crate::video::video_features_prenorm;

/// Sensor modalities a network for `network` consumes.
pub fn sensors_for(network: Modality) -> Vec<Modality> {
    match network {
        Modality::Fused => Modality::SENSORS.to_vec(),
        m => vec![m],
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FittedStats {
    pub vid: Option<NormStats>,
    pub imu: Option<NormStats>,
}

impl FittedStats {
    /// Statistics in the order a checkpoint stores them.
    pub fn for_network(&self, network: Modality) -> Vec<NormStats> {
        let mut out = Vec::new();
        if matches!(network, Modality::Imu | Modality::Fused) {
            out.extend(self.imu);
        }
        if matches!(network, Modality::Vid | Modality::Fused) {
            out.extend(self.vid);
        }
        out
    }

    pub fn from_list(list: &[NormStats]) -> Self {
        Self {
            vid: list.iter().copied().find(|s| s.kind == NormKind::PositionVelocity),
            imu: list.iter().copied().find(|s| s.kind == NormKind::AccelGyro),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeatureCache {
    pub ids: Vec<String>,
    pub subjects: Vec<SubjectId>,
    pub labels: Vec<Label>,
    vid: Option<Vec<Array2<f64>>>,
    imu: Option<Vec<Array2<f64>>>,
    mat: Option<Vec<Array2<f64>>>,
}

fn missing(s: &Snippet, m: Modality) -> Error {
    Error::Data(format!("snippet '{}' has no {m} recording", s.snippet_id))
}

fn per_snippet<F>(snippets: &[Snippet], f: F) -> Result<Vec<Array2<f64>>>
where
    F: Fn(&Snippet) -> Result<Array2<f64>> + Sync,
{
    snippets
        .par_iter()
        .map(|s| f(s).map_err(|e| Error::Data(format!("snippet '{}': {e}", s.snippet_id))))
        .collect()
}

impl FeatureCache {
    pub fn build(snippets: &[Snippet], sensors: &[Modality]) -> Result<Self> {
        let wants = |m: Modality| sensors.contains(&m) || sensors.contains(&Modality::Fused);
        let vid = if wants(Modality::Vid) {
            Some(per_snippet(snippets, |s| {
                video_features_prenorm(s.video_raw.as_ref().ok_or_else(|| missing(s, Modality::Vid))?)
            })?)
        } else {
            None
        };
        let imu = if wants(Modality::Imu) {
            Some(per_snippet(snippets, |s| {
                imu_prenorm(s.imu_raw.as_ref().ok_or_else(|| missing(s, Modality::Imu))?)
            })?)
        } else {
            None
        };
        let mat = if wants(Modality::Mat) {
            Some(per_snippet(snippets, |s| {
                let (fm, warnings) = finalize_mat_features(s.mat_raw.as_ref().ok_or_else(|| missing(s, Modality::Mat))?)?;
                for w in warnings {
                    log::warn!("snippet {}: {w}", s.snippet_id);
                }
                Ok(fm.into_data())
            })?)
        } else {
            None
        };
        Ok(Self {
            ids: snippets.iter().map(|s| s.snippet_id.clone()).collect(),
            subjects: snippets.iter().map(|s| s.subject.clone()).collect(),
            labels: snippets.iter().map(|s| s.label).collect(),
            vid,
            imu,
            mat,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn fit_stats(&self, train_idx: &[usize]) -> Result<FittedStats> {
        let fit = |pre: &Option<Vec<Array2<f64>>>, kind| -> Result<Option<NormStats>> {
            pre.as_ref()
                .map(|all| {
                    let train: Vec<Array2<f64>> = train_idx.iter().map(|&i| all[i].clone()).collect();
                    fit_norm_stats(&train, kind)
                })
                .transpose()
        };
        Ok(FittedStats {
            vid: fit(&self.vid, NormKind::PositionVelocity)?,
            imu: fit(&self.imu, NormKind::AccelGyro)?,
        })
    }

    fn normalized(&self, m: Modality, stats: &FittedStats, i: usize) -> Result<FeatureMatrix> {
        let unavailable = || Error::Config(format!("{m} features were not prepared"));
        let no_stats = || Error::Config(format!("no normalization statistics for {m}"));
        match m {
            Modality::Mat => FeatureMatrix::new(self.mat.as_ref().ok_or_else(unavailable)?[i].clone(), m),
            Modality::Vid => {
                let pre = &self.vid.as_ref().ok_or_else(unavailable)?[i];
                FeatureMatrix::new(stats.vid.ok_or_else(no_stats)?.apply(pre)?, m)
            }
            Modality::Imu => {
                let pre = &self.imu.as_ref().ok_or_else(unavailable)?[i];
                FeatureMatrix::new(stats.imu.ok_or_else(no_stats)?.apply(pre)?, m)
            }
            Modality::Fused => early_fuse_features(
                &self.normalized(Modality::Mat, stats, i)?,
                &self.normalized(Modality::Imu, stats, i)?,
                &self.normalized(Modality::Vid, stats, i)?,
            ),
        }
    }

    /// Classifier inputs for `network` at the given snippet indices.
    pub fn matrices(&self, network: Modality, stats: &FittedStats, idx: &[usize]) -> Result<Vec<Array2<f64>>> {
        idx.par_iter()
            .map(|&i| self.normalized(network, stats, i).map(FeatureMatrix::into_data))
            .collect()
    }
}
