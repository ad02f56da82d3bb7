use std::fs;
use std::path::{Path, PathBuf};

use candle_core::DType;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CalibError, Result};
use crate::geometry::DeviationRange;
use crate::losses::{LossWeights, POINTCLOUD_CAP};
use crate::network::NetworkConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl Precision {
    pub fn dtype(self) -> DType {
        match self {
            Precision::F32 => DType::F32,
            Precision::F64 => DType::F64,
        }
    }
}

/// Everything a training run depends on. Loadable from TOML; missing keys take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Stop after this many optimizer steps even if epochs remain.
    pub max_steps: Option<usize>,
    pub deviation: DeviationRange,
    /// Draw a fresh deviation per sample every epoch; when false the epoch-0 draws are reused.
    pub resample_deviations: bool,
    pub seed: u64,
    pub loss: LossWeights,
    pub pointcloud_cap: usize,
    pub grad_clip: Option<f64>,
    pub network: NetworkConfig,
    pub precision: Precision,
    pub train_manifest: Option<PathBuf>,
    pub val_manifest: Option<PathBuf>,
    /// Per-epoch checkpoints go here; `None` keeps training in memory.
    pub checkpoint_dir: Option<PathBuf>,
    /// Line-delimited JSON step log; `None` disables it.
    pub metrics_log: Option<PathBuf>,
    /// Use at most this many frames of the training set.
    pub max_train_frames: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            epochs: 10,
            batch_size: 1,
            max_steps: None,
            deviation: DeviationRange {
                max_translation: 0.5,
                max_rotation: 5.0,
            },
            resample_deviations: true,
            seed: 0,
            loss: LossWeights::default(),
            pointcloud_cap: POINTCLOUD_CAP,
            grad_clip: Some(10.0),
            network: NetworkConfig::desk(),
            precision: Precision::F32,
            train_manifest: None,
            val_manifest: None,
            checkpoint_dir: None,
            metrics_log: None,
            max_train_frames: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(CalibError::Config("batch_size must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(CalibError::Config(format!("lr must be finite and positive, got {}", self.lr)));
        }
        if self.pointcloud_cap == 0 {
            return Err(CalibError::Config("pointcloud_cap must be positive".into()));
        }
        DeviationRange::new(self.deviation.max_translation, self.deviation.max_rotation)?;
        self.loss.validate()?;
        self.network.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CalibError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CalibError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| CalibError::Config(e.to_string()))
    }

    /// First 16 hex digits of SHA-256 over the canonical JSON form.
    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    let digest = Sha256::digest(&json);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_defaults() {
        let cfg = TrainConfig::from_toml("lr = 0.001\nepochs = 3\n[network]\nupsample_rate = 2\n").unwrap();
        assert_eq!(cfg.lr, 0.001);
        assert_eq!(cfg.batch_size, 1);
        assert_eq!(cfg.network.upsample_rate, 2);
        // unspecified network keys come from the full preset (serde default)
        assert_eq!(cfg.network.feature_dim, NetworkConfig::full().feature_dim);
        let back = TrainConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn invalid_values_rejected() {
        let mut cfg = TrainConfig::default();
        cfg.batch_size = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::default();
        cfg.lr = -1.0;
        assert!(cfg.validate().is_err());
        cfg.lr = 0.0;
        assert!(cfg.validate().is_err());
        assert!(TrainConfig::from_toml("lr = \"fast\"").is_err());
    }
}
