use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::BoundingBox;
use crate::error::{Error, Result};

/// Expert quality label of a frame.
///
/// `Unrecognized` only exists so that a manifest with a bad label can still
/// be loaded and reported by [`validate_manifest`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Quality {
    Informative,
    Uninformative,
    Unrecognized(String),
}

impl From<String> for Quality {
    fn from(s: String) -> Self {
        match s.as_str() {
            "informative" => Quality::Informative,
            "uninformative" => Quality::Uninformative,
            _ => Quality::Unrecognized(s),
        }
    }
}

impl From<Quality> for String {
    fn from(q: Quality) -> Self {
        match q {
            Quality::Informative => "informative".into(),
            Quality::Uninformative => "uninformative".into(),
            Quality::Unrecognized(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_id: String,
    pub patient_id: String,
    pub quality: Quality,
    pub path: PathBuf,
    #[serde(default)]
    pub gt_boxes: Vec<BoundingBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub records: Vec<FrameRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_note: Option<String>,
    /// Hash of the configuration that produced this manifest, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    /// Directory relative record paths are resolved against.
    #[serde(skip)]
    pub root: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateId { frame_id: String },
    UnresolvablePath { frame_id: String, path: PathBuf },
    DegenerateBox { frame_id: String, index: usize },
    InvalidQuality { frame_id: String, label: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId { frame_id } => write!(f, "duplicate frame_id `{frame_id}`"),
            Violation::UnresolvablePath { frame_id, path } => {
                write!(f, "frame `{frame_id}`: path {} does not exist", path.display())
            }
            Violation::DegenerateBox { frame_id, index } => write!(f, "frame `{frame_id}`: gt box {index} is degenerate"),
            Violation::InvalidQuality { frame_id, label } => write!(f, "frame `{frame_id}`: invalid quality label `{label}`"),
        }
    }
}

impl DatasetManifest {
    pub fn new(name: impl Into<String>, records: Vec<FrameRecord>) -> Self {
        Self {
            name: name.into(),
            records,
            seed_note: None,
            config_hash: None,
            root: None,
        }
    }

    pub fn with_root(mut self, root: impl Into<PathBuf>) -> Self {
        self.root = Some(root.into());
        self
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        match &self.root {
            Some(root) if path.is_relative() => root.join(path),
            _ => path.to_path_buf(),
        }
    }

    pub fn resolved_path(&self, record: &FrameRecord) -> PathBuf {
        self.resolve(&record.path)
    }

    pub fn get(&self, frame_id: &str) -> Option<&FrameRecord> {
        self.records.iter().find(|r| r.frame_id == frame_id)
    }

    pub fn from_json_str(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// Reads a manifest; relative record paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = Self::from_json_str(&text).map_err(|e| Error::format(path, e))?;
        m.root = Some(path.parent().map(Path::to_path_buf).unwrap_or_default());
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }

    /// Writes the manifest to `path` with record paths rewritten so they
    /// still resolve from the new file's directory: relative when the image
    /// lies below it, otherwise as resolved against the old root.
    pub fn save_relocated(&self, path: &Path) -> Result<Self> {
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut out = self.clone();
        for rec in &mut out.records {
            let resolved = self.resolve(&rec.path);
            rec.path = match resolved.strip_prefix(&dir) {
                Ok(rel) => rel.to_path_buf(),
                Err(_) => resolved,
            };
        }
        out.root = Some(dir);
        out.save(path)?;
        Ok(out)
    }

    /// Clips every ground-truth box to its image's bounds, reading only the
    /// image headers. Boxes left empty by clipping are dropped.
    pub fn clip_boxes_to_images(&mut self) -> Result<()> {
        let root = self.root.clone();
        for rec in &mut self.records {
            let path = match &root {
                Some(r) if rec.path.is_relative() => r.join(&rec.path),
                _ => rec.path.clone(),
            };
            let (w, h) = image::image_dimensions(&path).map_err(|e| Error::format(&path, e))?;
            rec.gt_boxes = rec
                .gt_boxes
                .iter()
                .filter_map(|b| b.clipped(w as usize, h as usize).ok())
                .collect();
        }
        Ok(())
    }
}

/// Every problem with the manifest; an empty list means it is valid.
pub fn validate_manifest(manifest: &DatasetManifest) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for rec in &manifest.records {
        if !seen.insert(rec.frame_id.as_str()) {
            out.push(Violation::DuplicateId {
                frame_id: rec.frame_id.clone(),
            });
        }
        if let Quality::Unrecognized(label) = &rec.quality {
            out.push(Violation::InvalidQuality {
                frame_id: rec.frame_id.clone(),
                label: label.clone(),
            });
        }
        for (index, b) in rec.gt_boxes.iter().enumerate() {
            if b.is_degenerate() {
                out.push(Violation::DegenerateBox {
                    frame_id: rec.frame_id.clone(),
                    index,
                });
            }
        }
        let path = manifest.resolved_path(rec);
        if !path.exists() {
            out.push(Violation::UnresolvablePath {
                frame_id: rec.frame_id.clone(),
                path,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, dir: &Path) -> FrameRecord {
        FrameRecord {
            frame_id: id.into(),
            patient_id: "p1".into(),
            quality: Quality::Informative,
            path: dir.join("a.png"),
            gt_boxes: vec![BoundingBox::new(0.0, 0.0, 4.0, 4.0).unwrap()],
        }
    }

    fn fixture() -> (tempfile::TempDir, DatasetManifest) {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.png"), b"x").unwrap();
        let m = DatasetManifest::new("t", vec![record("f0", dir.path()), record("f1", dir.path())]);
        (dir, m)
    }

    #[test]
    fn well_formed_manifest_has_no_violations() {
        let (_dir, m) = fixture();
        assert!(validate_manifest(&m).is_empty());
    }

    #[test]
    fn duplicate_ids_are_reported_once() {
        let (_dir, mut m) = fixture();
        m.records[0].frame_id = "f1".into();
        assert_eq!(validate_manifest(&m), vec![Violation::DuplicateId { frame_id: "f1".into() }]);
    }

    #[test]
    fn degenerate_box_is_reported() {
        let (_dir, mut m) = fixture();
        m.records[1].gt_boxes[0].x_max = 0.0;
        assert_eq!(
            validate_manifest(&m),
            vec![Violation::DegenerateBox {
                frame_id: "f1".into(),
                index: 0
            }]
        );
    }

    #[test]
    fn bad_label_and_missing_path_are_reported() {
        let (dir, _) = fixture();
        let json = format!(
            r#"{{"name":"x","records":[{{"frame_id":"a","patient_id":"p","quality":"blurry","path":"{}","gt_boxes":[]}}]}}"#,
            dir.path().join("missing.png").display()
        );
        let m = DatasetManifest::from_json_str(&json).unwrap();
        let v = validate_manifest(&m);
        assert_eq!(v.len(), 2);
        assert!(matches!(&v[0], Violation::InvalidQuality { label, .. } if label == "blurry"));
        assert!(matches!(&v[1], Violation::UnresolvablePath { .. }));
    }

    #[test]
    fn json_schema_round_trip() {
        let json = r#"{"name":"sun","records":[{"frame_id":"f","patient_id":"p","quality":"uninformative","path":"img/f.png","gt_boxes":[[1,2,3,4]]}]}"#;
        let m = DatasetManifest::from_json_str(json).unwrap();
        assert_eq!(m.records[0].quality, Quality::Uninformative);
        assert_eq!(m.records[0].gt_boxes[0].y_max, 4.0);
        let again = DatasetManifest::from_json_str(&m.to_json_string()).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn relative_paths_resolve_against_manifest_dir() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("img")).unwrap();
        std::fs::write(dir.path().join("img/f.png"), b"x").unwrap();
        let json = r#"{"name":"m","records":[{"frame_id":"f","patient_id":"p","quality":"informative","path":"img/f.png","gt_boxes":[]}]}"#;
        let path = dir.path().join("m.json");
        std::fs::write(&path, json).unwrap();
        let m = DatasetManifest::load(&path).unwrap();
        assert!(validate_manifest(&m).is_empty());
    }
}
