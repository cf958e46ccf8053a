//! Feature extraction, 1-D CNN classifiers, sensor fusion and
//! subject-grouped evaluation for infant fidgety-movement detection from
//! pressure mat, inertial and video recordings.

pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod filters;
pub mod fusion;
pub mod imu;
pub mod ingest;
pub mod mat;
pub mod nn;
pub mod norm;
pub mod seed;
pub mod video;

pub use data::{FeatureMatrix, Label, Modality, Snippet, SubjectId};
pub use error::{Error, ErrorKind, Result};
