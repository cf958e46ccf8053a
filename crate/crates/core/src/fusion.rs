//! Late fusion (mean of per-modality probabilities) and early fusion
//! (time-aligned concatenation of feature matrices).

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, Label, Modality, FUSED_FEATURES, FUSED_FRAMES};
use crate::error::{Error, Result};
use crate::filters::resample_linear;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    Late,
    Early,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub mode: FusionMode,
    pub modalities: Vec<Modality>,
    pub threshold: f64,
}

impl FusionConfig {
    pub fn new(mode: FusionMode, modalities: Vec<Modality>) -> Result<Self> {
        let cfg = Self {
            mode,
            modalities,
            threshold: DEFAULT_THRESHOLD,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = self.modalities.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.modalities.len() || seen.contains(&Modality::Fused) {
            return Err(Error::Config("fusion modalities must be distinct sensor modalities".into()));
        }
        match self.mode {
            FusionMode::Late if self.modalities.len() < 2 => {
                Err(Error::Config("late fusion needs at least two modalities".into()))
            }
            FusionMode::Early if self.modalities.len() != 3 => {
                Err(Error::Config("early fusion needs all three modalities (mat, imu, vid)".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Mean probability and its label under the `p >= threshold` rule.
pub fn late_fuse(probs: &[f64], threshold: f64) -> Result<(f64, Label)> {
    if probs.is_empty() {
        return Err(Error::Data("late fusion of an empty probability list".into()));
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Data("late fusion probabilities must lie in [0, 1]".into()));
    }
    let avg = probs.iter().sum::<f64>() / probs.len() as f64;
    Ok((avg, Label::from_probability(avg, threshold)))
}

fn resample_matrix(m: &Array2<f64>, frames: usize) -> Array2<f64> {
    let mut out = Array2::zeros((frames, m.ncols()));
    for (c, col) in m.columns().into_iter().enumerate() {
        let r = resample_linear(&col.to_vec(), frames);
        for (f, v) in r.into_iter().enumerate() {
            out[[f, c]] = v;
        }
    }
    out
}

/// MAT and IMU resampled to 250 frames, then columns `MAT | IMU | VID`.
pub fn early_fuse_features(mat: &FeatureMatrix, imu: &FeatureMatrix, vid: &FeatureMatrix) -> Result<FeatureMatrix> {
    for (m, want) in [(mat, Modality::Mat), (imu, Modality::Imu), (vid, Modality::Vid)] {
        if m.modality() != want {
            return Err(Error::Config(format!(
                "early fusion expected a {want} matrix, got {}",
                m.modality()
            )));
        }
    }
    let mat_r = resample_matrix(mat.data(), FUSED_FRAMES);
    let imu_r = resample_matrix(imu.data(), FUSED_FRAMES);
    let mut out = Array2::zeros((FUSED_FRAMES, FUSED_FEATURES));
    let mut offset = 0;
    for block in [&mat_r, &imu_r, vid.data()] {
        let w = block.ncols();
        out.slice_mut(ndarray::s![.., offset..offset + w]).assign(block);
        offset += w;
    }
    FeatureMatrix::new(out, Modality::Fused)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn late_fusion_arithmetic() {
        let (p, l) = late_fuse(&[0.9, 0.6, 0.3], 0.5).unwrap();
        assert!((p - 0.6).abs() < 1e-12);
        assert_eq!(l, Label::FmPlus);
        let (p, l) = late_fuse(&[0.2, 0.2], 0.5).unwrap();
        assert!((p - 0.2).abs() < 1e-12);
        assert_eq!(l, Label::FmMinus);
        let (p, l) = late_fuse(&[0.7, 0.3], 0.5).unwrap();
        assert_eq!(p, 0.5);
        assert_eq!(l, Label::FmPlus);
        assert!(late_fuse(&[], 0.5).is_err());
        assert!(late_fuse(&[1.2], 0.5).is_err());
    }

    #[test]
    fn config_rules() {
        use Modality::*;
        assert!(FusionConfig::new(FusionMode::Late, vec![Mat, Vid]).is_ok());
        assert!(FusionConfig::new(FusionMode::Late, vec![Mat]).is_err());
        assert!(FusionConfig::new(FusionMode::Early, vec![Mat, Vid]).is_err());
        assert!(FusionConfig::new(FusionMode::Early, vec![Mat, Imu, Vid]).is_ok());
        assert!(FusionConfig::new(FusionMode::Late, vec![Mat, Mat]).is_err());
    }

    fn filled(m: Modality, f: impl Fn(usize, usize) -> f64) -> FeatureMatrix {
        let (r, c) = m.feature_shape();
        FeatureMatrix::new(Array2::from_shape_fn((r, c), |(i, j)| f(i, j)), m).unwrap()
    }

    #[test]
    fn early_fusion_layout() {
        let mat = filled(Modality::Mat, |i, _| i as f64 / 499.0);
        let imu = filled(Modality::Imu, |_, j| 2.0 + j as f64);
        let vid = filled(Modality::Vid, |i, j| (i * 100 + j) as f64);
        let fused = early_fuse_features(&mat, &imu, &vid).unwrap();
        let d = fused.data();
        assert_eq!(d.dim(), (250, 102));
        assert_eq!(d[[0, 0]], 0.0);
        assert_eq!(d[[249, 0]], 1.0);
        assert!((d[[100, 3]] - 100.0 / 249.0).abs() < 1e-12);
        assert_eq!(d[[17, 6]], 2.0);
        assert_eq!(d[[17, 41]], 37.0);
        assert_eq!(d[[17, 42]], 1700.0);
        assert_eq!(d[[249, 101]], 24959.0);
        assert!(early_fuse_features(&imu, &mat, &vid).is_err());
    }
}
