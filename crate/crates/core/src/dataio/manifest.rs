//! Dataset manifests.
//!
//! A manifest is a TOML file next to (or pointing at) a KITTI-layout tree:
//!
//! ```toml
//! format = "extcalib-dataset"
//! version = 1
//! kind = "synthetic"          # or "kitti"
//! split = "train"
//! root = "."                  # relative to the manifest's directory
//!
//! [deviation]
//! max_translation = 0.5       # meters
//! max_rotation = 5.0          # degrees
//!
//! [preprocess]
//! target = [256, 128]
//! padded = [640, 192]
//! depth_norm = 80.0
//!
//! [[frames]]
//! sequence = "00"
//! frame = 0
//! seed = 12345                # synthetic scenes only
//! ```
//!
//! Synthetic datasets are written in the same layout as KITTI odometry, so one loader serves both.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::images::PreprocessConfig;
use super::kitti::{load_kitti_frame, KittiPaths};
use super::sample::{PreparedFrame, RawFrame};
use crate::error::{CalibError, Result};
use crate::geometry::DeviationRange;

pub const MANIFEST_FORMAT: &str = "extcalib-dataset";
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Synthetic,
    Kitti,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRef {
    pub sequence: String,
    pub frame: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub kind: DatasetKind,
    pub split: String,
    pub root: PathBuf,
    pub deviation: DeviationRange,
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub frames: Vec<FrameRef>,
}

impl DatasetManifest {
    pub fn new(
        kind: DatasetKind,
        split: &str,
        root: impl Into<PathBuf>,
        deviation: DeviationRange,
        preprocess: PreprocessConfig,
        frames: Vec<FrameRef>,
    ) -> Self {
        Self {
            format: MANIFEST_FORMAT.to_string(),
            version: MANIFEST_VERSION,
            kind,
            split: split.to_string(),
            root: root.into(),
            deviation,
            preprocess,
            frames,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| CalibError::Config(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()?).map_err(|e| CalibError::io(path, e))
    }

    /// Parses without touching the referenced files.
    pub fn parse(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| CalibError::Config(e.to_string()))?;
        if m.format != MANIFEST_FORMAT {
            return Err(CalibError::Config(format!("unknown manifest format {:?}", m.format)));
        }
        if m.version > MANIFEST_VERSION {
            return Err(CalibError::Config(format!(
                "manifest version {} is newer than supported {MANIFEST_VERSION}",
                m.version
            )));
        }
        Ok(m)
    }
}

/// A manifest with its root resolved and every referenced file checked to exist.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub root: PathBuf,
}

impl Dataset {
    /// Accepts the manifest file itself or a directory containing `manifest.toml`.
    pub fn open(path: &Path) -> Result<Self> {
        let file = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        if !file.is_file() {
            return Err(CalibError::MissingDataset(file.display().to_string()));
        }
        let text = fs::read_to_string(&file).map_err(|e| CalibError::io(&file, e))?;
        let manifest = DatasetManifest::parse(&text)?;
        let base = file.parent().unwrap_or(Path::new("."));
        let root = base.join(&manifest.root);
        for f in &manifest.frames {
            let paths = KittiPaths::new(&root, &f.sequence, f.frame);
            if let Some(missing) = paths.missing() {
                return Err(CalibError::MissingDataset(missing.display().to_string()));
            }
        }
        Ok(Self { manifest, root })
    }

    pub fn len(&self) -> usize {
        self.manifest.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.frames.is_empty()
    }

    pub fn raw_frame(&self, index: usize) -> Result<RawFrame> {
        let f = &self.manifest.frames[index];
        load_kitti_frame(&self.root, &f.sequence, f.frame)
    }

    pub fn prepared_frames(&self) -> Result<Vec<PreparedFrame>> {
        self.prepared_frames_with(&self.manifest.preprocess)
    }

    /// Frames resized to `target` instead of the manifest's own model resolution.
    pub fn prepared_frames_at(&self, target: (usize, usize)) -> Result<Vec<PreparedFrame>> {
        let cfg = PreprocessConfig {
            target,
            ..self.manifest.preprocess
        };
        self.prepared_frames_with(&cfg)
    }

    pub fn prepared_frames_with(&self, cfg: &PreprocessConfig) -> Result<Vec<PreparedFrame>> {
        (0..self.len())
            .map(|i| PreparedFrame::new(&self.raw_frame(i)?, cfg))
            .collect()
    }
}
