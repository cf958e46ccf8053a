//! Dataset manifests, per-modality numeric tables and the synthetic
//! dataset generator.
//!
//! A manifest is a JSON file:
//!
//! ```json
//! {
//!   "dataset_name": "example",
//!   "subjects": ["S01", "S02"],
//!   "snippets": [
//!     {"snippet_id": "S01-001", "subject": "S01", "label": "FM+",
//!      "video_path": "vid/S01-001.csv", "mat_path": "mat/S01-001.csv",
//!      "imu_path": "imu/S01-001.csv"}
//!   ]
//! }
//! ```
//!
//! Paths are relative to the manifest's directory and any of them may be
//! omitted. Modality files hold one frame per row, comma-separated:
//! video has 30 columns `x1,y1,...,x15,y15` with keypoints numbered as in
//! [`crate::data::keypoint`], mat has 1024 columns (the 32×32 grid
//! flattened row-major) and imu has 36 columns (accel x/y/z then gyro
//! x/y/z for each of six sensors).

mod manifest;
mod synth;
mod table;

pub use manifest::{load_manifest, save_manifest, DatasetManifest, SnippetEntry};
pub use synth::{synthesize_dataset, SynthConfig};
pub use table::{
    label_counts, load_all, load_snippet, read_imu, read_mat, read_table, read_video, write_dataset, write_imu,
    write_mat, write_table, write_video,
};
