//! Pressure frames to the 500×6 MAT feature matrix: crop, split into a top
//! (shoulders/head) and bottom (hips) area, per-area center of pressure and
//! mean pressure, smoothing, and per-snippet range normalization shared
//! across the two areas.

use ndarray::{s, Array2, Array3, ArrayView2, ArrayView3};

use crate::data::{FeatureMatrix, Modality, RawMatFrames, MAT_FEATURES};
use crate::error::{Error, Result};
use crate::filters::{moving_average, WINDOW};

/// Crop `[1:29, 4:29]`, 1-based and inclusive.
pub const CROP_ROWS: (usize, usize) = (1, 29);
pub const CROP_COLS: (usize, usize) = (4, 29);
pub const TOP_ROWS: usize = 12;
pub const BOTTOM_ROWS: usize = 17;
pub const AREA_COLS: usize = 26;
pub const RANGE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CoPSeries {
    pub x_t: Vec<f64>,
    pub y_t: Vec<f64>,
    pub p_t: Vec<f64>,
    pub x_b: Vec<f64>,
    pub y_b: Vec<f64>,
    pub p_b: Vec<f64>,
}

impl CoPSeries {
    fn columns(&self) -> [&Vec<f64>; 6] {
        [&self.x_t, &self.y_t, &self.p_t, &self.x_b, &self.y_b, &self.p_b]
    }

    fn map(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        CoPSeries {
            x_t: f(&self.x_t),
            y_t: f(&self.y_t),
            p_t: f(&self.p_t),
            x_b: f(&self.x_b),
            y_b: f(&self.y_b),
            p_b: f(&self.p_b),
        }
    }
}

pub fn crop_and_split(frames: &Array3<f64>) -> Result<(Array3<f64>, Array3<f64>)> {
    let (_, rows, cols) = frames.dim();
    if rows < CROP_ROWS.1 || cols < CROP_COLS.1 {
        return Err(Error::Shape(format!(
            "pressure grid {rows}x{cols} is smaller than the crop window"
        )));
    }
    let r0 = CROP_ROWS.0 - 1;
    let c0 = CROP_COLS.0 - 1;
    let top = frames.slice(s![.., r0..r0 + TOP_ROWS, c0..CROP_COLS.1]).to_owned();
    let bottom = frames
        .slice(s![.., r0 + TOP_ROWS..CROP_ROWS.1, c0..CROP_COLS.1])
        .to_owned();
    Ok((top, bottom))
}

fn frame_cop(area: ArrayView2<f64>) -> Option<(f64, f64, f64)> {
    let (m, n) = area.dim();
    let mut total = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for ((i, j), &p) in area.indexed_iter() {
        total += p;
        sx += (j + 1) as f64 * p;
        sy += (i + 1) as f64 * p;
    }
    if total > 0.0 {
        Some((sx / total, sy / total, total / (m * n) as f64))
    } else {
        None
    }
}

/// Per-frame center of pressure `(x, y)` (1-based column/row units) and mean
/// pressure. Frames with zero total pressure carry the previous CoP forward
/// (the area centroid before any valid frame) with pressure 0.
pub fn compute_cop(area_frames: ArrayView3<f64>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (frames, m, n) = area_frames.dim();
    let mut xs = Vec::with_capacity(frames);
    let mut ys = Vec::with_capacity(frames);
    let mut ps = Vec::with_capacity(frames);
    let mut last = ((n as f64 + 1.0) / 2.0, (m as f64 + 1.0) / 2.0);
    for f in 0..frames {
        match frame_cop(area_frames.slice(s![f, .., ..])) {
            Some((x, y, p)) => {
                last = (x, y);
                xs.push(x);
                ys.push(y);
                ps.push(p);
            }
            None => {
                xs.push(last.0);
                ys.push(last.1);
                ps.push(0.0);
            }
        }
    }
    (xs, ys, ps)
}

fn range(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)))
}

fn shift_scale(v: &[f64], scale: Option<f64>) -> Vec<f64> {
    let (lo, _) = range(v);
    match scale {
        Some(s) => v.iter().map(|x| (x - lo) / s).collect(),
        None => vec![0.0; v.len()],
    }
}

/// Range normalization: positions share `γ` (largest of the four positional
/// ranges), pressures share `β`. A group whose shared range is below the
/// floor becomes all zeros and a warning is returned.
pub fn normalize_cop(series: &CoPSeries) -> (CoPSeries, Vec<String>) {
    let width = |v: &[f64]| {
        let (lo, hi) = range(v);
        hi - lo
    };
    let gamma = [&series.x_t, &series.y_t, &series.x_b, &series.y_b]
        .iter()
        .map(|v| width(v))
        .fold(0.0, f64::max);
    let beta = width(&series.p_t).max(width(&series.p_b));
    let mut warnings = Vec::new();
    let gamma = if gamma < RANGE_FLOOR {
        warnings.push(format!("positional range {gamma:e} below floor, CoP set to zero"));
        None
    } else {
        Some(gamma)
    };
    let beta = if beta < RANGE_FLOOR {
        warnings.push(format!("pressure range {beta:e} below floor, pressure set to zero"));
        None
    } else {
        Some(beta)
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    let out = CoPSeries {
        x_t: shift_scale(&series.x_t, gamma),
        y_t: shift_scale(&series.y_t, gamma),
        p_t: shift_scale(&series.p_t, beta),
        x_b: shift_scale(&series.x_b, gamma),
        y_b: shift_scale(&series.y_b, gamma),
        p_b: shift_scale(&series.p_b, beta),
    };
    (out, warnings)
}

/// CoP series before range normalization (after smoothing).
pub fn smoothed_cop(raw: &RawMatFrames) -> Result<CoPSeries> {
    let (top, bottom) = crop_and_split(&raw.frames)?;
    let (x_t, y_t, p_t) = compute_cop(top.view());
    let (x_b, y_b, p_b) = compute_cop(bottom.view());
    let cop = CoPSeries {
        x_t,
        y_t,
        p_t,
        x_b,
        y_b,
        p_b,
    };
    Ok(cop.map(|v| moving_average(v, WINDOW)))
}

pub fn cop_matrix(series: &CoPSeries) -> Array2<f64> {
    let cols = series.columns();
    let frames = cols[0].len();
    Array2::from_shape_fn((frames, MAT_FEATURES), |(f, c)| cols[c][f])
}

pub fn finalize_mat_features(raw: &RawMatFrames) -> Result<(FeatureMatrix, Vec<String>)> {
    let cop = smoothed_cop(raw)?;
    let (normalized, warnings) = normalize_cop(&cop);
    Ok((FeatureMatrix::new(cop_matrix(&normalized), Modality::Mat)?, warnings))
}
