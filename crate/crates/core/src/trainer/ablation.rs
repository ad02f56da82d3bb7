use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::eval::{evaluate, measure_latency, validation_loss, LatencyStats, Predictor};
use super::metrics::CalibMetrics;
use super::train::train_on_frames;
use crate::dataio::{CalibrationSample, PreparedFrame};
use crate::error::{CalibError, Result};
use crate::network::NetworkConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationVariant {
    Full,
    NoMultihead,
    NoEncoder,
    NoTransformer,
    Upsample1,
    Upsample2,
    Upsample4,
    Upsample8,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 8] = [
        AblationVariant::Full,
        AblationVariant::NoMultihead,
        AblationVariant::NoEncoder,
        AblationVariant::NoTransformer,
        AblationVariant::Upsample1,
        AblationVariant::Upsample2,
        AblationVariant::Upsample4,
        AblationVariant::Upsample8,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::NoMultihead => "no_multihead",
            Self::NoEncoder => "no_encoder",
            Self::NoTransformer => "no_transformer",
            Self::Upsample1 => "upsample_1",
            Self::Upsample2 => "upsample_2",
            Self::Upsample4 => "upsample_4",
            Self::Upsample8 => "upsample_8",
        }
    }

    pub fn names() -> String {
        Self::ALL.map(Self::name).join(", ")
    }

    /// The base configuration with this variant's switches applied.
    pub fn apply(self, base: &NetworkConfig) -> NetworkConfig {
        let mut cfg = base.clone();
        match self {
            Self::Full => {}
            Self::NoMultihead => cfg.use_multihead = false,
            Self::NoEncoder => cfg.use_encoder = false,
            Self::NoTransformer => {
                cfg.use_encoder = false;
                cfg.use_transformer = false;
            }
            Self::Upsample1 => cfg.upsample_rate = 1,
            Self::Upsample2 => cfg.upsample_rate = 2,
            Self::Upsample4 => cfg.upsample_rate = 4,
            Self::Upsample8 => cfg.upsample_rate = 8,
        }
        // keep the attention window tiling the (possibly smaller) feature map
        let (fw, fh) = cfg.feature_size();
        while cfg.attn_window > 1 && (fw % cfg.attn_window != 0 || fh % cfg.attn_window != 0) {
            cfg.attn_window -= 1;
        }
        cfg
    }
}

impl fmt::Display for AblationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AblationVariant {
    type Err = CalibError;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| CalibError::Usage(format!("unknown variant {s:?}; expected one of {}", Self::names())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub variant: AblationVariant,
    pub seed: u64,
    pub final_train_loss: f64,
    pub val_loss: f64,
    pub metrics: CalibMetrics,
    pub latency: LatencyStats,
}

/// Trains `variant` on `train` and evaluates on the fixed `val` samples.
pub fn run_ablation(
    variant: AblationVariant,
    cfg: &TrainConfig,
    train: &[PreparedFrame],
    val: &[CalibrationSample],
) -> Result<AblationReport> {
    let mut cfg = cfg.clone();
    cfg.network = variant.apply(&cfg.network);
    cfg.checkpoint_dir = cfg.checkpoint_dir.map(|d| d.join(variant.name()));
    let outcome = train_on_frames(&cfg, train, None)?;
    let final_train_loss = outcome.history.last().map(|r| r.loss.total).unwrap_or(f64::NAN);
    let latency = measure_latency(&outcome.model, &val[0], 1, 3)?;
    let predictor = Predictor::Model(Box::new(outcome.model));
    let val_loss = validation_loss(&predictor, val, &cfg.loss, cfg.pointcloud_cap)?;
    let mut metrics = evaluate(&predictor, val)?;
    metrics.latency_ms = Some(latency.mean_ms);
    Ok(AblationReport {
        variant,
        seed: cfg.seed,
        final_train_loss,
        val_loss,
        metrics,
        latency,
    })
}
