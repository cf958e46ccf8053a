//! Versioned JSON checkpoints. Floats are written with shortest round-trip
//! formatting and parsed with correct rounding, so save/load is exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::train::TrainedModel;
use crate::data::Modality;
use crate::error::{Error, Result};
use crate::norm::NormStats;

pub const CHECKPOINT_FORMAT: &str = "fmsense-model";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub modality: Modality,
    /// Train-set z-score statistics of the model's inputs: none for MAT,
    /// one set for VID or IMU, both for the early-fusion network.
    pub norm_stats: Vec<NormStats>,
    pub model: TrainedModel,
}

impl Checkpoint {
    pub fn new(modality: Modality, norm_stats: Vec<NormStats>, model: TrainedModel) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            modality,
            norm_stats,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Data(format!("serializing checkpoint: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint =
            serde_json::from_str(text).map_err(|e| Error::Data(format!("parsing checkpoint: {e}")))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Data(format!("not a checkpoint file (format '{}')", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Data(format!("unsupported checkpoint version {}", ck.version)));
        }
        let mut ck = ck;
        ck.model.network.ensure_grad_buffers();
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::file(path, e.to_string()))
    }
}
