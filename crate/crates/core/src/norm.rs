//! Train-set z-score statistics. Each modality has two channel groups
//! (positions/velocities for video, accelerations/angular velocities for the
//! IMU) and every group is pooled over all of its channels and all training
//! snippets.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{IMU_CHANNELS, VID_FEATURES};
use crate::error::{Error, Result};

pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    PositionVelocity,
    AccelGyro,
}

impl NormKind {
    /// Group index (0 or 1) of column `col`.
    pub fn group_of(self, col: usize) -> usize {
        match self {
            NormKind::PositionVelocity => usize::from(col >= VID_FEATURES / 2),
            NormKind::AccelGyro => usize::from(col % 6 >= 3),
        }
    }

    pub fn width(self) -> usize {
        match self {
            NormKind::PositionVelocity => VID_FEATURES,
            NormKind::AccelGyro => IMU_CHANNELS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub kind: NormKind,
    /// Positions (video) or accelerations (IMU).
    pub first: GroupStats,
    /// Velocities (video) or angular velocities (IMU).
    pub second: GroupStats,
}

impl NormStats {
    pub fn group(&self, g: usize) -> GroupStats {
        if g == 0 {
            self.first
        } else {
            self.second
        }
    }

    /// Z-scores `m` in place of a copy, each column with its group's stats.
    pub fn apply(&self, m: &Array2<f64>) -> Result<Array2<f64>> {
        if m.ncols() != self.kind.width() {
            return Err(Error::Shape(format!(
                "normalization expects {} columns, got {}",
                self.kind.width(),
                m.ncols()
            )));
        }
        let mut out = m.clone();
        for (col, mut column) in out.columns_mut().into_iter().enumerate() {
            let g = self.group(self.kind.group_of(col));
            column.mapv_inplace(|v| (v - g.mean) / g.std);
        }
        Ok(out)
    }
}

/// Pools mean and population standard deviation per channel group over
/// every pre-normalization matrix in `train`.
pub fn fit_norm_stats(train: &[Array2<f64>], kind: NormKind) -> Result<NormStats> {
    if train.is_empty() {
        return Err(Error::Data("cannot fit normalization on an empty training set".into()));
    }
    let mut count = [0usize; 2];
    let mut sum = [0.0f64; 2];
    for m in train {
        if m.ncols() != kind.width() {
            return Err(Error::Shape(format!(
                "normalization expects {} columns, got {}",
                kind.width(),
                m.ncols()
            )));
        }
        for (col, column) in m.columns().into_iter().enumerate() {
            let g = kind.group_of(col);
            count[g] += column.len();
            sum[g] += column.sum();
        }
    }
    let mean = [sum[0] / count[0] as f64, sum[1] / count[1] as f64];
    let mut sq = [0.0f64; 2];
    for m in train {
        for (col, column) in m.columns().into_iter().enumerate() {
            let g = kind.group_of(col);
            sq[g] += column.iter().map(|v| (v - mean[g]).powi(2)).sum::<f64>();
        }
    }
    let stats = |g: usize| GroupStats {
        mean: mean[g],
        std: (sq[g] / count[g] as f64).sqrt().max(STD_FLOOR),
    };
    Ok(NormStats {
        kind,
        first: stats(0),
        second: stats(1),
    })
}
