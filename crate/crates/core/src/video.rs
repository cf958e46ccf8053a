//! Skeleton keypoints to the 250×60 VID feature matrix.
//!
//! Stages, in order: smoothing (median then moving average), centering on
//! the mean hip point, rotation of the mean shoulder point onto +Y, scaling
//! of the hip-to-shoulder distance to 1/3, per-channel mean removal,
//! velocities, and z-scoring with train-set statistics.
//!
//! The per-coordinate median does not commute with rotation, so the full
//! pipeline first expresses the raw keypoints in a body frame derived from
//! the raw hip and shoulder means and smooths there. That makes the whole
//! pipeline invariant to similarity transforms of its input.

use ndarray::{s, Array2, Array3, ArrayView3, Axis};

use crate::data::{keypoint, FeatureMatrix, Modality, RawVideoKeypoints, N_KEYPOINTS, VIDEO_RATE_HZ, VID_FEATURES};
use crate::error::{Error, Result};
use crate::filters::{finite_difference, median_filter, moving_average, WINDOW};
use crate::norm::NormStats;

pub const DEGENERATE_FLOOR: f64 = 1e-9;
pub const TORSO_LENGTH: f64 = 1.0 / 3.0;

/// Positions (`frames × 15 × 2`) plus finite-difference velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSeries {
    pub pos: Array3<f64>,
    pub vel: Array3<f64>,
}

fn check_layout(pos: &ArrayView3<f64>) -> Result<()> {
    let (_, points, coords) = pos.dim();
    if points != N_KEYPOINTS || coords != 2 {
        return Err(Error::Shape(format!(
            "keypoint array must be frames x {N_KEYPOINTS} x 2, got {:?}",
            pos.dim()
        )));
    }
    Ok(())
}

/// Across-frames mean of the midpoint of two 1-based keypoints.
fn mean_midpoint(pos: &Array3<f64>, a: usize, b: usize) -> [f64; 2] {
    let n = pos.len_of(Axis(0)) as f64;
    let mut out = [0.0; 2];
    for (c, o) in out.iter_mut().enumerate() {
        let sa: f64 = pos.slice(s![.., a - 1, c]).sum();
        let sb: f64 = pos.slice(s![.., b - 1, c]).sum();
        *o = (sa + sb) / (2.0 * n);
    }
    out
}

pub fn hip_center(pos: &Array3<f64>) -> [f64; 2] {
    mean_midpoint(pos, keypoint::LEFT_HIP, keypoint::RIGHT_HIP)
}

pub fn shoulder_center(pos: &Array3<f64>) -> [f64; 2] {
    mean_midpoint(pos, keypoint::LEFT_SHOULDER, keypoint::RIGHT_SHOULDER)
}

fn map_points(pos: &Array3<f64>, f: impl Fn(f64, f64) -> (f64, f64)) -> Array3<f64> {
    let mut out = pos.clone();
    for mut p in out.lanes_mut(Axis(2)) {
        let (x, y) = f(p[0], p[1]);
        p[0] = x;
        p[1] = y;
    }
    out
}

/// Angle that rotates `v` onto the positive Y axis.
fn angle_to_vertical(v: [f64; 2]) -> f64 {
    v[0].atan2(v[1])
}

fn rotate(pos: &Array3<f64>, angle: f64, origin: [f64; 2]) -> Array3<f64> {
    let (sin, cos) = angle.sin_cos();
    map_points(pos, |x, y| {
        let (dx, dy) = (x - origin[0], y - origin[1]);
        (cos * dx - sin * dy, sin * dx + cos * dy)
    })
}

/// Median filter then centered moving average, both window 5, per coordinate
/// channel.
pub fn smooth_keypoints(raw: &Array3<f64>) -> Array3<f64> {
    let mut out = raw.clone();
    for mut lane in out.lanes_mut(Axis(0)) {
        let series = lane.to_vec();
        let smoothed = moving_average(&median_filter(&series, WINDOW), WINDOW);
        for (dst, v) in lane.iter_mut().zip(smoothed) {
            *dst = v;
        }
    }
    out
}

pub fn center_on_hips(pos: &Array3<f64>) -> Array3<f64> {
    let h = hip_center(pos);
    map_points(pos, |x, y| (x - h[0], y - h[1]))
}

/// Rotates every frame by one angle so the mean shoulder center lies on the
/// positive Y axis. A shoulder center at the origin leaves the input as is
/// and returns a warning.
pub fn rotate_to_vertical(pos: &Array3<f64>) -> (Array3<f64>, Option<String>) {
    let sc = shoulder_center(pos);
    if sc[0].hypot(sc[1]) < DEGENERATE_FLOOR {
        let msg = "shoulder center at origin, rotation skipped".to_string();
        log::warn!("{msg}");
        return (pos.clone(), Some(msg));
    }
    (rotate(pos, angle_to_vertical(sc), [0.0, 0.0]), None)
}

/// Divides every coordinate by `3 |h_y - s_y|` so the hip-to-shoulder
/// vertical distance becomes 1/3.
pub fn scale_torso(pos: &Array3<f64>) -> Result<Array3<f64>> {
    let h = hip_center(pos);
    let sc = shoulder_center(pos);
    let torso = (h[1] - sc[1]).abs();
    if torso < DEGENERATE_FLOOR {
        return Err(Error::Data(format!(
            "degenerate torso: hip-to-shoulder distance {torso:e}"
        )));
    }
    let divisor = torso / TORSO_LENGTH;
    Ok(pos.mapv(|v| v / divisor))
}

/// Smoothing through torso scaling. Returns the scaled positions and any
/// warnings.
pub fn normalize_skeleton(raw: &RawVideoKeypoints) -> Result<(Array3<f64>, Vec<String>)> {
    check_layout(&raw.frames.view())?;
    let mut warnings = Vec::new();
    let h = hip_center(&raw.frames);
    let sc = shoulder_center(&raw.frames);
    let axis = [sc[0] - h[0], sc[1] - h[1]];
    let body_frame = if axis[0].hypot(axis[1]) < DEGENERATE_FLOOR {
        warnings.push("raw shoulder and hip centers coincide, smoothing in image frame".into());
        map_points(&raw.frames, |x, y| (x - h[0], y - h[1]))
    } else {
        rotate(&raw.frames, angle_to_vertical(axis), h)
    };
    let smoothed = smooth_keypoints(&body_frame);
    let centered = center_on_hips(&smoothed);
    let (rotated, warning) = rotate_to_vertical(&centered);
    warnings.extend(warning);
    let scaled = scale_torso(&rotated)?;
    Ok((scaled, warnings))
}

pub fn velocities(pos: &Array3<f64>) -> Array3<f64> {
    let dt = 1.0 / VIDEO_RATE_HZ;
    let mut vel = pos.clone();
    for mut lane in vel.lanes_mut(Axis(0)) {
        let d = finite_difference(&lane.to_vec(), dt);
        for (dst, v) in lane.iter_mut().zip(d) {
            *dst = v;
        }
    }
    vel
}

pub fn skeleton_series(pos: &Array3<f64>) -> SkeletonSeries {
    SkeletonSeries {
        pos: pos.clone(),
        vel: velocities(pos),
    }
}

/// Pre-normalization `frames × 60` matrix: mean-removed positions then
/// velocities, columns `x1, y1, …, y15` per block.
pub fn video_prenorm(pos: &Array3<f64>) -> Result<Array2<f64>> {
    check_layout(&pos.view())?;
    let frames = pos.len_of(Axis(0));
    let vel = velocities(pos);
    let half = VID_FEATURES / 2;
    let mut out = Array2::zeros((frames, VID_FEATURES));
    for k in 0..N_KEYPOINTS {
        for c in 0..2 {
            let col = 2 * k + c;
            let series = pos.slice(s![.., k, c]);
            let m = series.mean().unwrap_or(0.0);
            out.slice_mut(s![.., col]).assign(&series.mapv(|v| v - m));
            out.slice_mut(s![.., half + col]).assign(&vel.slice(s![.., k, c]));
        }
    }
    Ok(out)
}

/// Full raw-to-prenormalization path.
pub fn video_features_prenorm(raw: &RawVideoKeypoints) -> Result<Array2<f64>> {
    let (scaled, _) = normalize_skeleton(raw)?;
    video_prenorm(&scaled)
}

pub fn finalize_video_features(pos: &Array3<f64>, stats: &NormStats) -> Result<FeatureMatrix> {
    let pre = video_prenorm(pos)?;
    FeatureMatrix::new(stats.apply(&pre)?, Modality::Vid)
}
