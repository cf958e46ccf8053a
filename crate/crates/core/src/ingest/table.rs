//! Comma-separated numeric tables, one frame per row.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, Array3};

use crate::data::{
    validate_snippet, Label, Modality, RawImuFrames, RawMatFrames, RawVideoKeypoints, Snippet, MAT_GRID,
    N_KEYPOINTS,
};
use crate::error::{Error, Result};

use super::manifest::DatasetManifest;

pub fn read_table(path: &Path) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::file(path, e.to_string()))?;
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::file(path, e.to_string()))?;
        if *width.get_or_insert(record.len()) != record.len() {
            return Err(Error::file(
                path,
                format!("row {} has {} columns, expected {}", r + 1, record.len(), width.unwrap()),
            ));
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::file(path, format!("row {}: '{field}' is not a number", r + 1)))?;
            values.push(v);
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, width.unwrap_or(0)), values).map_err(|e| Error::file(path, e.to_string()))
}

/// Writes with nine significant digits.
pub fn write_table(path: &Path, rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut line = String::new();
    for row in rows {
        line.clear();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format!("{v:.8e}"));
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn column_error(path: &Path, rule: &str, got: usize, want: usize) -> Error {
    Error::file(path, format!("{rule}: expected {want} columns, got {got}"))
}

pub fn read_video(path: &Path) -> Result<RawVideoKeypoints> {
    let t = read_table(path)?;
    if t.ncols() != 2 * N_KEYPOINTS {
        return Err(column_error(path, "video keypoint count", t.ncols(), 2 * N_KEYPOINTS));
    }
    let frames = t.nrows();
    let frames = t
        .into_shape_with_order((frames, N_KEYPOINTS, 2))
        .map_err(|e| Error::file(path, e.to_string()))?;
    Ok(RawVideoKeypoints { frames })
}

pub fn read_mat(path: &Path) -> Result<RawMatFrames> {
    let t = read_table(path)?;
    if t.ncols() != MAT_GRID * MAT_GRID {
        return Err(column_error(path, "mat grid size", t.ncols(), MAT_GRID * MAT_GRID));
    }
    let frames = t.nrows();
    let frames: Array3<f64> = t
        .into_shape_with_order((frames, MAT_GRID, MAT_GRID))
        .map_err(|e| Error::file(path, e.to_string()))?;
    Ok(RawMatFrames { frames })
}

pub fn read_imu(path: &Path) -> Result<RawImuFrames> {
    Ok(RawImuFrames { frames: read_table(path)? })
}

pub fn write_video(path: &Path, raw: &RawVideoKeypoints) -> Result<()> {
    write_table(path, raw.frames.outer_iter().map(|f| f.iter().copied().collect()))
}

pub fn write_mat(path: &Path, raw: &RawMatFrames) -> Result<()> {
    write_table(path, raw.frames.outer_iter().map(|f| f.iter().copied().collect()))
}

pub fn write_imu(path: &Path, raw: &RawImuFrames) -> Result<()> {
    write_table(path, raw.frames.outer_iter().map(|f| f.to_vec()))
}

/// Reads every modality file of one manifest entry and validates the
/// result.
pub fn load_snippet(manifest: &DatasetManifest, snippet_id: &str) -> Result<Snippet> {
    let e = manifest
        .entry(snippet_id)
        .ok_or_else(|| Error::Data(format!("snippet '{snippet_id}' is not in the manifest")))?;
    let video_raw = e.video_path.as_ref().map(|p| read_video(&manifest.resolve(p))).transpose()?;
    let mat_raw = e.mat_path.as_ref().map(|p| read_mat(&manifest.resolve(p))).transpose()?;
    let imu_raw = e.imu_path.as_ref().map(|p| read_imu(&manifest.resolve(p))).transpose()?;
    let snippet = Snippet {
        snippet_id: e.snippet_id.clone(),
        subject: e.subject.clone(),
        label: e.label,
        video_raw,
        mat_raw,
        imu_raw,
    };
    let report = validate_snippet(&snippet);
    if !report.is_ok() {
        return Err(Error::Data(format!("snippet '{snippet_id}': {report}")));
    }
    Ok(snippet)
}

pub fn load_all(manifest: &DatasetManifest) -> Result<Vec<Snippet>> {
    use rayon::prelude::*;
    manifest
        .snippets
        .par_iter()
        .map(|e| load_snippet(manifest, &e.snippet_id))
        .collect()
}

fn relative(modality: Modality, id: &str) -> std::path::PathBuf {
    Path::new(&modality.name().to_ascii_lowercase()).join(format!("{id}.csv"))
}

/// Writes modality files under `dir` and a `manifest.json` beside them.
pub fn write_dataset(dir: &Path, dataset_name: &str, snippets: &[Snippet]) -> Result<DatasetManifest> {
    use super::manifest::{save_manifest, SnippetEntry};
    use rayon::prelude::*;

    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut subjects = Vec::new();
    for s in snippets {
        if !subjects.contains(&s.subject) {
            subjects.push(s.subject.clone());
        }
    }
    let entries = snippets
        .par_iter()
        .map(|s| {
            let mut e = SnippetEntry {
                snippet_id: s.snippet_id.clone(),
                subject: s.subject.clone(),
                label: s.label,
                video_path: None,
                mat_path: None,
                imu_path: None,
            };
            if let Some(v) = &s.video_raw {
                let rel = relative(Modality::Vid, &s.snippet_id);
                write_video(&dir.join(&rel), v)?;
                e.video_path = Some(rel);
            }
            if let Some(m) = &s.mat_raw {
                let rel = relative(Modality::Mat, &s.snippet_id);
                write_mat(&dir.join(&rel), m)?;
                e.mat_path = Some(rel);
            }
            if let Some(i) = &s.imu_raw {
                let rel = relative(Modality::Imu, &s.snippet_id);
                write_imu(&dir.join(&rel), i)?;
                e.imu_path = Some(rel);
            }
            Ok(e)
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        dataset_name: dataset_name.into(),
        subjects,
        snippets: entries,
        base_dir: dir.to_path_buf(),
    };
    save_manifest(&manifest, &dir.join("manifest.json"))?;
    Ok(manifest)
}

/// Counts per label, `(FM+, FM-)`.
pub fn label_counts(snippets: &[Snippet]) -> (usize, usize) {
    let pos = snippets.iter().filter(|s| s.label == Label::FmPlus).count();
    (pos, snippets.len() - pos)
}
