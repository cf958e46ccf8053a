use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{Label, Modality, SubjectId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnippetEntry {
    pub snippet_id: String,
    pub subject: SubjectId,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mat_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imu_path: Option<PathBuf>,
}

impl SnippetEntry {
    pub fn path(&self, modality: Modality) -> Option<&Path> {
        match modality {
            Modality::Vid => self.video_path.as_deref(),
            Modality::Mat => self.mat_path.as_deref(),
            Modality::Imu => self.imu_path.as_deref(),
            Modality::Fused => None,
        }
    }
}

/// Dataset index. Modality paths are relative to `base_dir`, the directory
/// the manifest was loaded from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset_name: String,
    pub subjects: Vec<SubjectId>,
    pub snippets: Vec<SnippetEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        let mut subjects = HashSet::new();
        for s in &self.subjects {
            if !subjects.insert(s) {
                return Err(Error::Data(format!("duplicate subject '{s}'")));
            }
        }
        let mut ids = HashSet::new();
        for e in &self.snippets {
            if e.snippet_id.is_empty() {
                return Err(Error::Data("empty snippet id".into()));
            }
            if !ids.insert(e.snippet_id.as_str()) {
                return Err(Error::Data(format!("duplicate snippet id '{}'", e.snippet_id)));
            }
            if !subjects.contains(&e.subject) {
                return Err(Error::Data(format!(
                    "dangling subject '{}' in snippet '{}'",
                    e.subject, e.snippet_id
                )));
            }
            for p in [&e.video_path, &e.mat_path, &e.imu_path].into_iter().flatten() {
                if p.is_absolute() {
                    return Err(Error::Data(format!(
                        "snippet '{}' path {} must be relative to the manifest",
                        e.snippet_id,
                        p.display()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn entry(&self, snippet_id: &str) -> Option<&SnippetEntry> {
        self.snippets.iter().find(|e| e.snippet_id == snippet_id)
    }

    pub fn resolve(&self, relative: &Path) -> PathBuf {
        self.base_dir.join(relative)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Data(format!("serializing manifest: {e}")))
    }

    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut m: DatasetManifest =
            serde_json::from_str(text).map_err(|e| Error::Data(format!("parsing manifest: {e}")))?;
        m.base_dir = base_dir.into();
        m.validate()?;
        Ok(m)
    }
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    DatasetManifest::from_json(&text, base).map_err(|e| Error::file(path, e.to_string()))
}

pub fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    manifest.validate()?;
    fs::write(path, manifest.to_json()? + "\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BY_FOUR: &str = r#"{
        "dataset_name": "toy",
        "subjects": ["a", "b"],
        "snippets": [
            {"snippet_id": "a1", "subject": "a", "label": "FM+", "imu_path": "imu/a1.csv"},
            {"snippet_id": "a2", "subject": "a", "label": "FM-", "imu_path": "imu/a2.csv"},
            {"snippet_id": "b1", "subject": "b", "label": "FM+", "video_path": "vid/b1.csv"},
            {"snippet_id": "b2", "subject": "b", "label": "FM-", "mat_path": "mat/b2.csv"}
        ]
    }"#;

    #[test]
    fn parses_well_formed_manifest() {
        let m = DatasetManifest::from_json(TWO_BY_FOUR, "/data").unwrap();
        assert_eq!(m.snippets.len(), 4);
        assert_eq!(m.subjects.len(), 2);
        assert_eq!(m.entry("b2").unwrap().label, Label::FmMinus);
        assert_eq!(
            m.resolve(m.entry("a1").unwrap().path(Modality::Imu).unwrap()),
            PathBuf::from("/data/imu/a1.csv")
        );
    }

    #[test]
    fn rejects_dangling_subject_and_duplicates() {
        let text = TWO_BY_FOUR.replace(r#""subject": "b", "label": "FM-""#, r#""subject": "c", "label": "FM-""#);
        let err = DatasetManifest::from_json(&text, "").unwrap_err().to_string();
        assert!(err.contains("dangling subject"), "{err}");
        let text = TWO_BY_FOUR.replace(r#""snippet_id": "a2""#, r#""snippet_id": "a1""#);
        let err = DatasetManifest::from_json(&text, "").unwrap_err().to_string();
        assert!(err.contains("duplicate snippet id"), "{err}");
        assert!(DatasetManifest::from_json("{", "").is_err());
    }

    #[test]
    fn empty_snippet_list_is_valid() {
        let m = DatasetManifest::from_json(r#"{"dataset_name": "e", "subjects": [], "snippets": []}"#, "").unwrap();
        assert!(m.snippets.is_empty());
    }

    #[test]
    fn json_round_trip() {
        let m = DatasetManifest::from_json(TWO_BY_FOUR, "").unwrap();
        let back = DatasetManifest::from_json(&m.to_json().unwrap(), "").unwrap();
        assert_eq!(m, back);
    }
}
