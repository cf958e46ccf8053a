//! Small deterministic 1-D CNN engine.
//!
//! Architecture: `[Conv → BN → ReLU → Dropout] × k → Flatten →
//! FC → BN → ReLU → Dropout → Dense(1)`, trained with binary cross-entropy
//! on logits and Adam.

pub mod adam;
pub mod checkpoint;
pub mod conv;
pub mod layers;
pub mod loss;
pub mod network;
pub mod presets;
pub mod train;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::{adam_step, Adam, AdamConfig, AdamSlot};
pub use conv::conv1d_forward;
pub use layers::{batchnorm_forward, BatchNorm, Layer, Mode};
pub use loss::{bce_with_logits, sigmoid};
pub use network::Network;
pub use presets::{preset, preset_names};
pub use train::{train, EpochLog, TrainConfig, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConvSpec {
    pub n_kernels: usize,
    pub kernel_len: usize,
}

impl ConvSpec {
    pub const fn new(n_kernels: usize, kernel_len: usize) -> Self {
        Self {
            n_kernels,
            kernel_len,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub conv_layers: Vec<ConvSpec>,
    pub fc_units: usize,
    pub dropout_rate: f64,
    /// `(frames, channels)`
    pub input_shape: (usize, usize),
}

pub const DEFAULT_DROPOUT: f64 = 0.2;

impl ModelSpec {
    pub fn new(conv_layers: Vec<ConvSpec>, fc_units: usize, input_shape: (usize, usize)) -> Self {
        Self {
            conv_layers,
            fc_units,
            dropout_rate: DEFAULT_DROPOUT,
            input_shape,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.conv_layers.len()) {
            return Err(Error::Config(format!(
                "model needs 1 to 3 conv layers, got {}",
                self.conv_layers.len()
            )));
        }
        for c in &self.conv_layers {
            if c.kernel_len % 2 == 0 || c.n_kernels == 0 {
                return Err(Error::Config(format!(
                    "conv layer {}@{} needs a positive kernel count and odd length",
                    c.n_kernels, c.kernel_len
                )));
            }
        }
        if self.fc_units == 0 {
            return Err(Error::Config("fc_units must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout rate {} outside [0, 1)", self.dropout_rate)));
        }
        if self.input_shape.0 == 0 || self.input_shape.1 == 0 {
            return Err(Error::Config("input shape must be non-empty".into()));
        }
        Ok(())
    }

    pub fn with_input_shape(mut self, input_shape: (usize, usize)) -> Self {
        self.input_shape = input_shape;
        self
    }

    /// Same architecture, ignoring the input shape and dropout.
    pub fn same_architecture(&self, other: &ModelSpec) -> bool {
        self.conv_layers == other.conv_layers && self.fc_units == other.fc_units
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.conv_layers {
            write!(f, "{}@{}/", c.n_kernels, c.kernel_len)?;
        }
        write!(f, "FC{}", self.fc_units)
    }
}
