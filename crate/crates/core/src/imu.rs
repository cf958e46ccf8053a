//! IMU samples to the 300×36 IMU feature matrix.

use ndarray::Array2;

use crate::data::{FeatureMatrix, Modality, RawImuFrames, IMU_CHANNELS};
use crate::error::{Error, Result};
use crate::filters::{mean, moving_average, WINDOW};
use crate::norm::{NormKind, NormStats};

/// Smoothed, per-channel mean-removed channels; the input to
/// [`fit_norm_stats`](crate::norm::fit_norm_stats) with
/// [`NormKind::AccelGyro`].
pub fn imu_prenorm(raw: &RawImuFrames) -> Result<Array2<f64>> {
    if raw.frames.ncols() != IMU_CHANNELS {
        return Err(Error::Shape(format!(
            "imu frames need {IMU_CHANNELS} channels, got {}",
            raw.frames.ncols()
        )));
    }
    let mut out = raw.frames.clone();
    for mut column in out.columns_mut() {
        let smoothed = moving_average(&column.to_vec(), WINDOW);
        let m = mean(&smoothed);
        for (dst, v) in column.iter_mut().zip(smoothed) {
            *dst = v - m;
        }
    }
    Ok(out)
}

pub fn finalize_imu_features(raw: &RawImuFrames, stats: &NormStats) -> Result<FeatureMatrix> {
    if stats.kind != NormKind::AccelGyro {
        return Err(Error::Config("imu features need accel/gyro statistics".into()));
    }
    let pre = imu_prenorm(raw)?;
    FeatureMatrix::new(stats.apply(&pre)?, Modality::Imu)
}
