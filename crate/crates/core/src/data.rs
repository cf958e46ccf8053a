//! Domain types shared by every stage of the pipeline.
//!
//! Raw modality containers are deliberately permissive: they hold whatever
//! was read or generated, and [`validate_snippet`] reports what is wrong with
//! them. [`FeatureMatrix`] is the strict boundary: it cannot be built with a
//! shape that disagrees with its modality tag or with non-finite entries.

use std::fmt;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SNIPPET_SECONDS: f64 = 5.0;

pub const VIDEO_FRAMES: usize = 250;
pub const VIDEO_RATE_HZ: f64 = 50.0;
pub const N_KEYPOINTS: usize = 15;

pub const MAT_FRAMES: usize = 500;
pub const MAT_RATE_HZ: f64 = 100.0;
pub const MAT_GRID: usize = 32;

pub const IMU_FRAMES: usize = 300;
pub const IMU_RATE_HZ: f64 = 60.0;
pub const IMU_SENSORS: usize = 6;
pub const IMU_CHANNELS: usize = IMU_SENSORS * 6;

pub const VID_FEATURES: usize = 4 * N_KEYPOINTS;
pub const MAT_FEATURES: usize = 6;
pub const FUSED_FRAMES: usize = VIDEO_FRAMES;
pub const FUSED_FEATURES: usize = MAT_FEATURES + IMU_CHANNELS + VID_FEATURES;

/// 1-based keypoint indices used by the skeleton geometry.
pub mod keypoint {
    pub const NOSE: usize = 1;
    pub const LEFT_EYE: usize = 2;
    pub const RIGHT_EYE: usize = 3;
    pub const LEFT_SHOULDER: usize = 4;
    pub const RIGHT_SHOULDER: usize = 5;
    pub const LEFT_ELBOW: usize = 6;
    pub const RIGHT_ELBOW: usize = 7;
    pub const LEFT_WRIST: usize = 8;
    pub const RIGHT_WRIST: usize = 9;
    pub const LEFT_HIP: usize = 10;
    pub const RIGHT_HIP: usize = 11;
    pub const LEFT_KNEE: usize = 12;
    pub const RIGHT_KNEE: usize = 13;
    pub const LEFT_ANKLE: usize = 14;
    pub const RIGHT_ANKLE: usize = 15;
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SubjectId(String);

impl SubjectId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::Data("subject id must be non-empty".into()));
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for SubjectId {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        SubjectId::new(value)
    }
}

impl From<SubjectId> for String {
    fn from(value: SubjectId) -> Self {
        value.0
    }
}

impl fmt::Display for SubjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Presence (`FmPlus`) or absence (`FmMinus`) of fidgety movements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "FM+")]
    FmPlus,
    #[serde(rename = "FM-")]
    FmMinus,
}

impl Label {
    pub fn encode(self) -> u8 {
        match self {
            Label::FmPlus => 1,
            Label::FmMinus => 0,
        }
    }

    pub fn decode(value: u8) -> Result<Self> {
        match value {
            1 => Ok(Label::FmPlus),
            0 => Ok(Label::FmMinus),
            other => Err(Error::Data(format!("label code {other} is not 0 or 1"))),
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.encode())
    }

    /// Label assigned to a probability of FM+ under the `p >= threshold` rule.
    pub fn from_probability(p: f64, threshold: f64) -> Self {
        if p >= threshold {
            Label::FmPlus
        } else {
            Label::FmMinus
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::FmPlus => "FM+",
            Label::FmMinus => "FM-",
        })
    }
}

/// Pixel coordinates, `frames × keypoints × (x, y)`, 50 Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct RawVideoKeypoints {
    pub frames: Array3<f64>,
}

/// Pressure images, `frames × rows × cols`, 100 Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMatFrames {
    pub frames: Array3<f64>,
}

/// IMU samples, `frames × 36`, 60 Hz. Channels are sensor-major:
/// accel x, y, z then gyro x, y, z for each of the six sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct RawImuFrames {
    pub frames: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snippet {
    pub snippet_id: String,
    pub subject: SubjectId,
    pub label: Label,
    pub video_raw: Option<RawVideoKeypoints>,
    pub mat_raw: Option<RawMatFrames>,
    pub imu_raw: Option<RawImuFrames>,
}

impl Snippet {
    pub fn has(&self, modality: Modality) -> bool {
        match modality {
            Modality::Mat => self.mat_raw.is_some(),
            Modality::Imu => self.imu_raw.is_some(),
            Modality::Vid => self.video_raw.is_some(),
            Modality::Fused => {
                self.mat_raw.is_some() && self.imu_raw.is_some() && self.video_raw.is_some()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Modality {
    Mat,
    Imu,
    Vid,
    Fused,
}

impl Modality {
    pub const SENSORS: [Modality; 3] = [Modality::Mat, Modality::Imu, Modality::Vid];

    /// `(frames, channels)` of the feature matrix for this modality.
    pub fn feature_shape(self) -> (usize, usize) {
        match self {
            Modality::Mat => (MAT_FRAMES, MAT_FEATURES),
            Modality::Imu => (IMU_FRAMES, IMU_CHANNELS),
            Modality::Vid => (VIDEO_FRAMES, VID_FEATURES),
            Modality::Fused => (FUSED_FRAMES, FUSED_FEATURES),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Mat => "MAT",
            Modality::Imu => "IMU",
            Modality::Vid => "VID",
            Modality::Fused => "FUSED",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mat" => Ok(Modality::Mat),
            "imu" => Ok(Modality::Imu),
            "vid" | "video" => Ok(Modality::Vid),
            "fused" => Ok(Modality::Fused),
            other => Err(Error::Config(format!("unknown modality '{other}'"))),
        }
    }
}

/// `frames × channels` classifier input with a modality-checked shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    data: Array2<f64>,
    modality: Modality,
}

impl FeatureMatrix {
    pub fn new(data: Array2<f64>, modality: Modality) -> Result<Self> {
        let expected = modality.feature_shape();
        if data.dim() != expected {
            return Err(Error::Shape(format!(
                "{modality} feature matrix must be {}x{}, got {}x{}",
                expected.0,
                expected.1,
                data.nrows(),
                data.ncols()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "{modality} feature matrix has a non-finite entry at flat index {pos}"
            )));
        }
        Ok(Self { data, modality })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn channels(&self) -> usize {
        self.data.ncols()
    }
}

/// One broken invariant found by [`validate_snippet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationResult {
    pub violations: Vec<Violation>,
}

impl ValidationResult {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_rule(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    fn push(&mut self, rule: &'static str, detail: String) {
        self.violations.push(Violation { rule, detail });
    }
}

impl fmt::Display for ValidationResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

fn check_finite<'a>(
    values: impl IntoIterator<Item = &'a f64>,
    what: &str,
    out: &mut ValidationResult,
) {
    let bad = values.into_iter().filter(|v| !v.is_finite()).count();
    if bad > 0 {
        out.push("finite values", format!("{what} has {bad} non-finite values"));
    }
}

pub fn validate_video(raw: &RawVideoKeypoints, out: &mut ValidationResult) {
    let (frames, points, coords) = raw.frames.dim();
    if frames != VIDEO_FRAMES {
        out.push(
            "video frame count",
            format!("expected {VIDEO_FRAMES} frames, got {frames}"),
        );
    }
    if points != N_KEYPOINTS || coords != 2 {
        out.push(
            "video keypoint count",
            format!("expected {N_KEYPOINTS}x2 coordinates per frame, got {points}x{coords}"),
        );
    }
    check_finite(raw.frames.iter(), "video", out);
}

pub fn validate_mat(raw: &RawMatFrames, out: &mut ValidationResult) {
    let (frames, rows, cols) = raw.frames.dim();
    if frames != MAT_FRAMES {
        out.push(
            "mat frame count",
            format!("expected {MAT_FRAMES} frames, got {frames}"),
        );
    }
    if rows != MAT_GRID || cols != MAT_GRID {
        out.push(
            "mat grid size",
            format!("expected {MAT_GRID}x{MAT_GRID} grid, got {rows}x{cols}"),
        );
    }
    let negative = raw.frames.iter().filter(|v| **v < 0.0).count();
    if negative > 0 {
        out.push(
            "pressure non-negative",
            format!("{negative} negative pressure values"),
        );
    }
    check_finite(raw.frames.iter(), "mat", out);
}

pub fn validate_imu(raw: &RawImuFrames, out: &mut ValidationResult) {
    let (frames, channels) = raw.frames.dim();
    if frames != IMU_FRAMES {
        out.push(
            "imu frame count",
            format!("expected {IMU_FRAMES} frames, got {frames}"),
        );
    }
    if channels != IMU_CHANNELS {
        out.push(
            "imu channel count",
            format!("expected {IMU_CHANNELS} channels, got {channels}"),
        );
    }
    check_finite(raw.frames.iter(), "imu", out);
}

/// Checks every modality invariant of a snippet. Never fails; the result
/// lists what is wrong.
pub fn validate_snippet(s: &Snippet) -> ValidationResult {
    let mut out = ValidationResult::default();
    if s.snippet_id.is_empty() {
        out.push("snippet id", "snippet id is empty".into());
    }
    if s.video_raw.is_none() && s.mat_raw.is_none() && s.imu_raw.is_none() {
        out.push("modality present", "snippet carries no modality".into());
    }
    if let Some(v) = &s.video_raw {
        validate_video(v, &mut out);
    }
    if let Some(m) = &s.mat_raw {
        validate_mat(m, &mut out);
    }
    if let Some(i) = &s.imu_raw {
        validate_imu(i, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snippet() -> Snippet {
        Snippet {
            snippet_id: "s1".into(),
            subject: SubjectId::new("infant-1").unwrap(),
            label: Label::FmPlus,
            video_raw: Some(RawVideoKeypoints {
                frames: Array3::zeros((VIDEO_FRAMES, N_KEYPOINTS, 2)),
            }),
            mat_raw: None,
            imu_raw: None,
        }
    }

    #[test]
    fn well_formed_snippet_is_ok() {
        assert!(validate_snippet(&snippet()).is_ok());
    }

    #[test]
    fn short_video_is_reported() {
        let mut s = snippet();
        s.video_raw = Some(RawVideoKeypoints {
            frames: Array3::zeros((249, N_KEYPOINTS, 2)),
        });
        let r = validate_snippet(&s);
        assert!(r.has_rule("video frame count"), "{r}");
    }

    #[test]
    fn negative_pressure_is_reported() {
        let mut s = snippet();
        let mut frames = Array3::zeros((MAT_FRAMES, MAT_GRID, MAT_GRID));
        frames[[3, 4, 5]] = -0.1;
        s.mat_raw = Some(RawMatFrames { frames });
        let r = validate_snippet(&s);
        assert!(r.has_rule("pressure non-negative"));
        assert_eq!(r.violations.len(), 1);
    }

    #[test]
    fn nan_and_missing_modalities_are_reported() {
        let mut s = snippet();
        s.video_raw.as_mut().unwrap().frames[[0, 0, 0]] = f64::NAN;
        assert!(validate_snippet(&s).has_rule("finite values"));
        s.video_raw = None;
        assert!(validate_snippet(&s).has_rule("modality present"));
    }

    #[test]
    fn label_round_trips() {
        for l in [Label::FmPlus, Label::FmMinus] {
            assert_eq!(Label::decode(l.encode()).unwrap(), l);
        }
        assert_eq!(Label::FmPlus.encode(), 1);
        assert!(Label::decode(2).is_err());
        assert_eq!(Label::from_probability(0.5, 0.5), Label::FmPlus);
    }

    #[test]
    fn feature_matrix_rejects_wrong_shapes() {
        for m in [Modality::Mat, Modality::Imu, Modality::Vid, Modality::Fused] {
            let (r, c) = m.feature_shape();
            assert!(FeatureMatrix::new(Array2::zeros((r, c)), m).is_ok());
            assert!(FeatureMatrix::new(Array2::zeros((r + 1, c)), m).is_err());
            assert!(FeatureMatrix::new(Array2::zeros((r, c - 1)), m).is_err());
        }
        let mut nan = Array2::zeros((MAT_FRAMES, MAT_FEATURES));
        nan[[1, 1]] = f64::INFINITY;
        assert!(FeatureMatrix::new(nan, Modality::Mat).is_err());
        assert_eq!(Modality::Fused.feature_shape(), (250, 102));
    }

    #[test]
    fn empty_subject_id_rejected() {
        assert!(SubjectId::new("").is_err());
        let parsed: std::result::Result<SubjectId, _> = serde_json::from_str("\"\"");
        assert!(parsed.is_err());
    }
}
