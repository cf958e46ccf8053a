//! Synthetic multimodal datasets.
//!
//! Every snippet is slow baseline motion plus white noise. FM+ snippets add
//! a band-limited oscillation (0.5 to 3 Hz) whose amplitude is proportional
//! to `separability`. Subjects differ in baseline amplitude and noise level.
//! The random draws of a snippet never depend on its label, so with
//! `separability = 0` both classes have the same distribution.

use std::f64::consts::PI;

use ndarray::{Array2, Array3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    Label, Modality, RawImuFrames, RawMatFrames, RawVideoKeypoints, Snippet, SubjectId, IMU_CHANNELS,
    IMU_FRAMES, IMU_RATE_HZ, IMU_SENSORS, MAT_FRAMES, MAT_GRID, MAT_RATE_HZ, N_KEYPOINTS, VIDEO_FRAMES,
    VIDEO_RATE_HZ,
};
use crate::error::{Error, Result};
use crate::seed::{derive, stream};

use super::manifest::{DatasetManifest, SnippetEntry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub snippets_per_subject: usize,
    /// Fraction of FM+ snippets per subject.
    pub class_balance: f64,
    pub seed: u64,
    pub separability: f64,
    /// Per-modality amplitude jitter `w` in [0, 1]. Each snippet and
    /// modality draws `u ~ U(0, 1)`; the fidgety amplitude is `1 - w·u` for
    /// FM+ and `w·u` for FM-. With `w > 0.5` the classes overlap and a
    /// threshold at 0.5 misclassifies a fraction `(w - 0.5) / w` of each
    /// class independently per modality.
    #[serde(default)]
    pub signal_overlap: f64,
    #[serde(default = "all_sensors")]
    pub modalities: Vec<Modality>,
}

fn all_sensors() -> Vec<Modality> {
    Modality::SENSORS.to_vec()
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_subjects: 12,
            snippets_per_subject: 20,
            class_balance: 0.5,
            seed: 0,
            separability: 1.0,
            signal_overlap: 0.0,
            modalities: all_sensors(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 || self.snippets_per_subject == 0 {
            return Err(Error::Config("subject and snippet counts must be positive".into()));
        }
        if !(self.class_balance > 0.0 && self.class_balance < 1.0) {
            return Err(Error::Config(format!("class balance {} outside (0, 1)", self.class_balance)));
        }
        if !(0.0..=1.0).contains(&self.separability) {
            return Err(Error::Config(format!("separability {} outside [0, 1]", self.separability)));
        }
        if !(0.0..=1.0).contains(&self.signal_overlap) {
            return Err(Error::Config(format!(
                "signal overlap {} outside [0, 1]",
                self.signal_overlap
            )));
        }
        if self.modalities.is_empty() || self.modalities.contains(&Modality::Fused) {
            return Err(Error::Config("synthesis needs a non-empty set of sensor modalities".into()));
        }
        Ok(())
    }

    fn wants(&self, m: Modality) -> bool {
        self.modalities.contains(&m)
    }
}

#[derive(Debug, Clone, Copy)]
struct SubjectEffects {
    amplitude: f64,
    noise: f64,
}

/// Sum of sinusoids with random frequencies in `band` and random phases,
/// normalized to unit peak amplitude bound.
struct Oscillation {
    parts: Vec<(f64, f64, f64)>,
}

impl Oscillation {
    fn draw(rng: &mut ChaCha8Rng, band: (f64, f64), n: usize) -> Self {
        let mut parts: Vec<(f64, f64, f64)> = (0..n)
            .map(|_| {
                (
                    rng.random_range(0.5..1.0),
                    rng.random_range(band.0..band.1),
                    rng.random_range(0.0..2.0 * PI),
                )
            })
            .collect();
        let total: f64 = parts.iter().map(|p| p.0).sum();
        for p in &mut parts {
            p.0 /= total;
        }
        Self { parts }
    }

    fn at(&self, t: f64) -> f64 {
        self.parts.iter().map(|(w, f, ph)| w * (2.0 * PI * f * t + ph).sin()).sum()
    }
}

const FM_BAND: (f64, f64) = (0.5, 3.0);
const BASE_BAND: (f64, f64) = (0.05, 0.3);

/// Random draws shared by every modality generator: a baseline and a
/// fidgety component per degree of freedom.
fn motion(rng: &mut ChaCha8Rng) -> (Oscillation, Oscillation) {
    (Oscillation::draw(rng, BASE_BAND, 2), Oscillation::draw(rng, FM_BAND, 3))
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

// Body-frame skeleton with a torso of unit length, y towards the head.
const TEMPLATE: [[f64; 2]; N_KEYPOINTS] = [
    [0.0, 1.45],
    [-0.12, 1.55],
    [0.12, 1.55],
    [-0.35, 1.0],
    [0.35, 1.0],
    [-0.55, 0.6],
    [0.55, 0.6],
    [-0.6, 0.2],
    [0.6, 0.2],
    [-0.2, 0.0],
    [0.2, 0.0],
    [-0.3, -0.5],
    [0.3, -0.5],
    [-0.3, -1.0],
    [0.3, -1.0],
];

fn is_limb(k: usize) -> bool {
    matches!(k + 1, 6..=9 | 12..=15)
}

fn synth_video(rng: &mut ChaCha8Rng, fm: f64, fx: SubjectEffects) -> RawVideoKeypoints {
    let scale = rng.random_range(80.0..160.0);
    let angle: f64 = rng.random_range(-PI..PI);
    let shift = [rng.random_range(200.0..440.0), rng.random_range(150.0..330.0)];
    let (sin, cos) = angle.sin_cos();
    let mut frames = Array3::zeros((VIDEO_FRAMES, N_KEYPOINTS, 2));
    for k in 0..N_KEYPOINTS {
        let (base_amp, fm_amp) = if is_limb(k) { (0.08, 0.05) } else { (0.01, 0.0) };
        for c in 0..2 {
            let (base, fidget) = motion(rng);
            for f in 0..VIDEO_FRAMES {
                let t = f as f64 / VIDEO_RATE_HZ;
                frames[[f, k, c]] = TEMPLATE[k][c]
                    + fx.amplitude * base_amp * base.at(t)
                    + fm * fm_amp * fidget.at(t)
                    + 0.006 * fx.noise * gauss(rng);
            }
        }
    }
    for mut p in frames.lanes_mut(ndarray::Axis(2)) {
        let (x, y) = (p[0], p[1]);
        p[0] = scale * (cos * x - sin * y) + shift[0];
        p[1] = scale * (sin * x + cos * y) + shift[1];
    }
    RawVideoKeypoints { frames }
}

fn synth_mat(rng: &mut ChaCha8Rng, fm: f64, fx: SubjectEffects) -> RawMatFrames {
    // (row, col, sigma, peak) of the upper-body and lower-body blobs.
    let blobs = [(6.0, 16.0, 3.0, 40.0), (20.0, 16.0, 4.0, 30.0)];
    let mut paths = Vec::new();
    for _ in &blobs {
        let dims: Vec<_> = (0..3).map(|_| motion(rng)).collect();
        paths.push(dims);
    }
    let mut frames = Array3::zeros((MAT_FRAMES, MAT_GRID, MAT_GRID));
    for f in 0..MAT_FRAMES {
        let t = f as f64 / MAT_RATE_HZ;
        let mut frame = Array2::<f64>::zeros((MAT_GRID, MAT_GRID));
        for ((r0, c0, sigma, peak), dims) in blobs.iter().zip(&paths) {
            let at = |d: usize, base_amp: f64, fm_amp: f64| {
                fx.amplitude * base_amp * dims[d].0.at(t) + fm * fm_amp * dims[d].1.at(t)
            };
            let r = r0 + at(0, 0.6, 1.0);
            let c = c0 + at(1, 0.6, 1.0);
            let p = peak * fx.amplitude * (1.0 + at(2, 0.05, 0.15));
            let rows: Vec<f64> = (0..MAT_GRID).map(|i| (-(i as f64 - r).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
            let cols: Vec<f64> = (0..MAT_GRID).map(|j| (-(j as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
            for i in 0..MAT_GRID {
                for j in 0..MAT_GRID {
                    frame[[i, j]] += p * rows[i] * cols[j];
                }
            }
        }
        for v in frame.iter_mut() {
            *v = (*v + 0.3 * fx.noise * gauss(rng)).max(0.0);
        }
        frames.slice_mut(ndarray::s![f, .., ..]).assign(&frame);
    }
    RawMatFrames { frames }
}

fn synth_imu(rng: &mut ChaCha8Rng, fm: f64, fx: SubjectEffects) -> RawImuFrames {
    let mut frames = Array2::zeros((IMU_FRAMES, IMU_CHANNELS));
    for s in 0..IMU_SENSORS {
        let g: [f64; 3] = [gauss(rng), gauss(rng), gauss(rng)];
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
        for c in 0..6 {
            let col = 6 * s + c;
            let gyro = c >= 3;
            let offset = g.get(c).map_or(0.0, |v| 9.81 * v / norm);
            let (base_amp, fm_amp, noise) = if gyro { (0.2, 0.5, 0.03) } else { (0.3, 0.4, 0.05) };
            let (base, fidget) = motion(rng);
            for f in 0..IMU_FRAMES {
                let t = f as f64 / IMU_RATE_HZ;
                frames[[f, col]] = offset
                    + fx.amplitude * base_amp * base.at(t)
                    + fm * fm_amp * fidget.at(t)
                    + noise * fx.noise * gauss(rng);
            }
        }
    }
    RawImuFrames { frames }
}

fn modality_tag(m: Modality) -> u64 {
    match m {
        Modality::Vid => 0,
        Modality::Mat => 1,
        Modality::Imu => 2,
        Modality::Fused => 3,
    }
}

fn labels_for_subject(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<Label> {
    let n = cfg.snippets_per_subject;
    let mut pos = (n as f64 * cfg.class_balance).round() as usize;
    if n >= 2 {
        pos = pos.clamp(1, n - 1);
    }
    let mut labels: Vec<Label> = (0..n).map(|i| if i < pos { Label::FmPlus } else { Label::FmMinus }).collect();
    labels.shuffle(rng);
    labels
}

fn synth_snippet(cfg: &SynthConfig, subj: usize, k: usize, label: Label, fx: SubjectEffects) -> Snippet {
    let mut video_raw = None;
    let mut mat_raw = None;
    let mut imu_raw = None;
    for m in Modality::SENSORS {
        if !cfg.wants(m) {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, &[stream::SYNTH, subj as u64, k as u64, modality_tag(m)]));
        let jitter = cfg.signal_overlap * rng.random::<f64>();
        let strength = if label == Label::FmPlus { 1.0 - jitter } else { jitter };
        let fm = cfg.separability * strength;
        match m {
            Modality::Vid => video_raw = Some(synth_video(&mut rng, fm, fx)),
            Modality::Mat => mat_raw = Some(synth_mat(&mut rng, fm, fx)),
            Modality::Imu => imu_raw = Some(synth_imu(&mut rng, fm, fx)),
            Modality::Fused => {}
        }
    }
    Snippet {
        snippet_id: format!("S{:02}-{:03}", subj + 1, k + 1),
        subject: subject_id(subj),
        label,
        video_raw,
        mat_raw,
        imu_raw,
    }
}

fn subject_id(subj: usize) -> SubjectId {
    SubjectId::new(format!("S{:02}", subj + 1)).expect("non-empty id")
}

/// Deterministic in `cfg`. The returned manifest carries no file paths;
/// [`super::write_dataset`] produces an on-disk copy.
pub fn synthesize_dataset(cfg: &SynthConfig) -> Result<(DatasetManifest, Vec<Snippet>)> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    for subj in 0..cfg.n_subjects {
        let mut rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, &[stream::SYNTH, subj as u64, u64::MAX]));
        let fx = SubjectEffects {
            amplitude: rng.random_range(0.7..1.3),
            noise: rng.random_range(0.6..1.4),
        };
        for (k, label) in labels_for_subject(cfg, &mut rng).into_iter().enumerate() {
            jobs.push((subj, k, label, fx));
        }
    }
    let snippets: Vec<Snippet> = jobs
        .par_iter()
        .map(|&(subj, k, label, fx)| synth_snippet(cfg, subj, k, label, fx))
        .collect();
    let manifest = DatasetManifest {
        dataset_name: format!("synthetic-seed{}", cfg.seed),
        subjects: (0..cfg.n_subjects).map(subject_id).collect(),
        snippets: snippets
            .iter()
            .map(|s| SnippetEntry {
                snippet_id: s.snippet_id.clone(),
                subject: s.subject.clone(),
                label: s.label,
                video_path: None,
                mat_path: None,
                imu_path: None,
            })
            .collect(),
        base_dir: Default::default(),
    };
    manifest.validate()?;
    Ok((manifest, snippets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::validate_snippet;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            n_subjects: 2,
            snippets_per_subject: 3,
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic_and_valid() {
        let (m1, a) = synthesize_dataset(&small(1)).unwrap();
        let (m2, b) = synthesize_dataset(&small(1)).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        for s in &a {
            assert!(validate_snippet(s).is_ok(), "{}", validate_snippet(s));
        }
        let (_, c) = synthesize_dataset(&small(2)).unwrap();
        assert_ne!(a[0].video_raw, c[0].video_raw);
    }

    #[test]
    fn both_classes_per_subject() {
        let (_, s) = synthesize_dataset(&small(3)).unwrap();
        for subj in ["S01", "S02"] {
            let labels: Vec<_> = s.iter().filter(|x| x.subject.as_str() == subj).map(|x| x.label).collect();
            assert!(labels.contains(&Label::FmPlus) && labels.contains(&Label::FmMinus));
        }
    }

    #[test]
    fn zero_separability_ignores_labels() {
        let cfg = SynthConfig {
            separability: 0.0,
            ..small(4)
        };
        let (_, s) = synthesize_dataset(&cfg).unwrap();
        let fx = SubjectEffects {
            amplitude: 1.0,
            noise: 1.0,
        };
        let plus = synth_snippet(&cfg, 0, 0, Label::FmPlus, fx);
        let minus = synth_snippet(&cfg, 0, 0, Label::FmMinus, fx);
        assert_eq!(plus.video_raw, minus.video_raw);
        assert_eq!(plus.mat_raw, minus.mat_raw);
        assert_eq!(plus.imu_raw, minus.imu_raw);
        assert!(!s.is_empty());
    }

    #[test]
    fn modality_subset_and_validation() {
        let cfg = SynthConfig {
            modalities: vec![Modality::Imu],
            ..small(5)
        };
        let (_, s) = synthesize_dataset(&cfg).unwrap();
        assert!(s.iter().all(|x| x.imu_raw.is_some() && x.video_raw.is_none() && x.mat_raw.is_none()));
        let full = synthesize_dataset(&small(5)).unwrap().1;
        assert_eq!(s[0].imu_raw, full[0].imu_raw);
        for bad in [
            SynthConfig { separability: 2.0, ..small(0) },
            SynthConfig { class_balance: 1.0, ..small(0) },
            SynthConfig { n_subjects: 0, ..small(0) },
            SynthConfig { modalities: vec![], ..small(0) },
        ] {
            assert!(synthesize_dataset(&bad).is_err());
        }
    }
}
