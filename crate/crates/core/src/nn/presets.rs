//! Named architectures: ten per sensor modality plus ten for the early
//! fusion network, each three conv layers `(kernels, length)` and one FC
//! layer.

use super::{ConvSpec, ModelSpec};
use crate::data::Modality;

type Row = [(usize, usize); 3];

const MAT: [(Row, usize); 10] = [
    ([(8, 13), (64, 17), (16, 25)], 256),
    ([(8, 13), (32, 7), (16, 33)], 128),
    ([(4, 17), (64, 17), (16, 13)], 128),
    ([(4, 17), (16, 13), (8, 33)], 128),
    ([(4, 17), (64, 25), (64, 17)], 256),
    ([(4, 17), (32, 17), (8, 13)], 128),
    ([(4, 17), (8, 7), (8, 33)], 128),
    ([(4, 13), (16, 9), (64, 33)], 256),
    ([(4, 25), (32, 13), (16, 13)], 256),
    ([(4, 17), (64, 7), (16, 9)], 128),
];

const IMU: [(Row, usize); 10] = [
    ([(8, 25), (8, 17), (64, 25)], 256),
    ([(8, 25), (64, 13), (8, 25)], 256),
    ([(4, 13), (64, 17), (32, 33)], 128),
    ([(8, 17), (8, 17), (8, 17)], 128),
    ([(4, 17), (64, 13), (32, 33)], 128),
    ([(8, 25), (32, 17), (64, 33)], 128),
    ([(4, 25), (32, 9), (8, 9)], 128),
    ([(8, 25), (8, 25), (8, 33)], 128),
    ([(8, 25), (32, 25), (8, 33)], 128),
    ([(8, 17), (64, 25), (8, 13)], 128),
];

const VID: [(Row, usize); 10] = [
    ([(4, 13), (32, 25), (16, 25)], 128),
    ([(4, 13), (32, 17), (64, 9)], 256),
    ([(8, 25), (8, 13), (64, 33)], 128),
    ([(4, 25), (64, 7), (32, 17)], 128),
    ([(4, 25), (32, 25), (16, 13)], 256),
    ([(4, 25), (8, 25), (64, 25)], 256),
    ([(4, 13), (8, 7), (64, 13)], 128),
    ([(8, 13), (32, 13), (64, 25)], 256),
    ([(8, 13), (32, 7), (64, 9)], 256),
    ([(4, 13), (16, 25), (64, 13)], 128),
];

const FUSED: [(Row, usize); 10] = [
    ([(4, 25), (16, 7), (64, 33)], 128),
    ([(8, 13), (8, 7), (16, 25)], 256),
    ([(4, 25), (32, 7), (64, 33)], 256),
    ([(4, 13), (16, 7), (64, 17)], 128),
    ([(8, 17), (64, 17), (16, 17)], 256),
    ([(8, 25), (8, 13), (16, 13)], 256),
    ([(8, 17), (8, 9), (8, 9)], 256),
    ([(4, 17), (64, 9), (64, 25)], 256),
    ([(4, 13), (16, 9), (32, 9)], 256),
    ([(8, 17), (8, 9), (8, 17)], 256),
];

fn table(modality: Modality) -> &'static [(Row, usize); 10] {
    match modality {
        Modality::Mat => &MAT,
        Modality::Imu => &IMU,
        Modality::Vid => &VID,
        Modality::Fused => &FUSED,
    }
}

fn prefix(modality: Modality) -> &'static str {
    match modality {
        Modality::Mat => "mat",
        Modality::Imu => "imu",
        Modality::Vid => "vid",
        Modality::Fused => "fusion",
    }
}

/// 1-based preset `index` for `modality`.
pub fn preset_for(modality: Modality, index: usize) -> Option<ModelSpec> {
    let (row, fc) = table(modality).get(index.checked_sub(1)?)?;
    let convs = row.iter().map(|(n, k)| ConvSpec::new(*n, *k)).collect();
    Some(ModelSpec::new(convs, *fc, modality.feature_shape()))
}

/// Looks up names such as `mat-1`, `vid-10` or `fusion-3`.
pub fn preset(name: &str) -> Option<(Modality, ModelSpec)> {
    let (head, idx) = name.rsplit_once('-')?;
    let idx: usize = idx.parse().ok()?;
    let modality = Modality::SENSORS
        .into_iter()
        .chain([Modality::Fused])
        .find(|m| prefix(*m) == head.to_ascii_lowercase())?;
    preset_for(modality, idx).map(|s| (modality, s))
}

pub fn preset_names() -> Vec<String> {
    let mut out = Vec::new();
    for m in [Modality::Mat, Modality::Imu, Modality::Vid, Modality::Fused] {
        for i in 1..=10 {
            out.push(format!("{}-{i}", prefix(m)));
        }
    }
    out
}
