use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};

/// Total backbone stride before aggregation.
pub const BACKBONE_STRIDE: usize = 32;

/// Architecture and ablation switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    /// Model input `(width, height)`.
    pub input_size: (usize, usize),
    /// Scales the ResNet-18 stage widths `64·[1, 2, 4, 8]`.
    pub width_multiplier: f64,
    /// Feature upsampling rate; output stride is `32 / upsample_rate`.
    pub upsample_rate: usize,
    /// Feature / token dimension `d_k`.
    pub feature_dim: usize,
    /// Correlation heads `n`.
    pub corr_heads: usize,
    /// Correlation window radius `d`.
    pub corr_window: usize,
    pub attn_heads: usize,
    /// Side of the square attention window in the encoder.
    pub attn_window: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    /// Densely connected convolutions that lift the correlation volume to `feature_dim`.
    pub dense_layers: usize,
    pub dense_growth: usize,
    /// Hidden width of transformer MLPs as a multiple of `feature_dim`.
    pub mlp_ratio: usize,
    pub use_multihead: bool,
    pub use_encoder: bool,
    pub use_transformer: bool,
    /// Deformable convolutions in the aggregation up-path.
    pub deformable: bool,
    /// Give the pose-query branch its own backbone instead of reusing the camera one.
    pub separate_query_backbone: bool,
    /// Use camera features as correlation queries and LiDAR features as keys.
    pub swap_query_key: bool,
    /// Pooling grid `(cols, rows)` for the fully connected ablation regressor.
    pub fc_pool: (usize, usize),
    /// Optional safetensors file with backbone weights.
    pub pretrained: Option<PathBuf>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl NetworkConfig {
    /// Full-size model: 512×256 input, rate 4, window 4, 2 encoder and 6 decoder layers.
    pub fn full() -> Self {
        Self {
            input_size: (512, 256),
            width_multiplier: 1.0,
            upsample_rate: 4,
            feature_dim: 256,
            corr_heads: 4,
            corr_window: 4,
            attn_heads: 8,
            attn_window: 8,
            encoder_layers: 2,
            decoder_layers: 6,
            dense_layers: 3,
            dense_growth: 64,
            mlp_ratio: 4,
            use_multihead: true,
            use_encoder: true,
            use_transformer: true,
            deformable: true,
            separate_query_backbone: true,
            swap_query_key: false,
            fc_pool: (8, 4),
            pretrained: None,
        }
    }

    /// CPU-trainable configuration: 256×128, width 1/4, `d_k = 64`, `n = 2`, `d = 2`.
    pub fn desk() -> Self {
        Self {
            input_size: (256, 128),
            width_multiplier: 0.25,
            feature_dim: 64,
            corr_heads: 2,
            corr_window: 2,
            attn_heads: 4,
            attn_window: 4,
            encoder_layers: 1,
            decoder_layers: 2,
            dense_layers: 2,
            dense_growth: 32,
            mlp_ratio: 2,
            deformable: false,
            separate_query_backbone: false,
            ..Self::full()
        }
    }

    /// Smallest configuration that still exercises every block; used for gradient checks
    /// and the single-core training runs.
    pub fn tiny() -> Self {
        Self {
            input_size: (128, 64),
            width_multiplier: 0.125,
            feature_dim: 32,
            corr_heads: 2,
            corr_window: 2,
            attn_heads: 2,
            attn_window: 4,
            encoder_layers: 1,
            decoder_layers: 2,
            dense_layers: 2,
            dense_growth: 16,
            mlp_ratio: 2,
            deformable: false,
            separate_query_backbone: false,
            fc_pool: (4, 2),
            ..Self::full()
        }
    }

    /// Backbone stage widths.
    pub fn stage_channels(&self) -> [usize; 4] {
        let base = ((64.0 * self.width_multiplier).round() as usize).max(4);
        [base, 2 * base, 4 * base, 8 * base]
    }

    /// Stride of the aggregated feature maps relative to the model input.
    pub fn feature_stride(&self) -> usize {
        BACKBONE_STRIDE / self.upsample_rate
    }

    /// `(cols, rows)` of the aggregated feature maps.
    pub fn feature_size(&self) -> (usize, usize) {
        let s = self.feature_stride();
        (self.input_size.0 / s, self.input_size.1 / s)
    }

    /// Effective correlation heads (1 when multi-head correlation is ablated).
    pub fn effective_corr_heads(&self) -> usize {
        if self.use_multihead {
            self.corr_heads
        } else {
            1
        }
    }

    pub fn corr_channels(&self) -> usize {
        correlation_channels(self.corr_window, self.effective_corr_heads())
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(CalibError::Config(m));
        if ![1, 2, 4, 8].contains(&self.upsample_rate) {
            return err(format!("upsample_rate {} not in {{1,2,4,8}}", self.upsample_rate));
        }
        let (w, h) = self.input_size;
        if w == 0 || h == 0 || w % BACKBONE_STRIDE != 0 || h % BACKBONE_STRIDE != 0 {
            return err(format!("input {w}x{h} not divisible by backbone stride {BACKBONE_STRIDE}"));
        }
        if !(self.width_multiplier > 0.0) {
            return err("width_multiplier must be positive".into());
        }
        if self.feature_dim == 0 || self.corr_heads == 0 || self.attn_heads == 0 {
            return err("feature_dim and head counts must be positive".into());
        }
        if self.use_multihead && self.feature_dim % self.corr_heads != 0 {
            return err(format!(
                "feature_dim {} not divisible by corr_heads {}",
                self.feature_dim, self.corr_heads
            ));
        }
        if self.feature_dim % self.attn_heads != 0 {
            return err(format!(
                "feature_dim {} not divisible by attn_heads {}",
                self.feature_dim, self.attn_heads
            ));
        }
        if self.use_encoder && !self.use_transformer {
            return err("use_encoder requires use_transformer".into());
        }
        let (fw, fh) = self.feature_size();
        if self.use_encoder && (self.attn_window == 0 || fw % self.attn_window != 0 || fh % self.attn_window != 0) {
            return err(format!(
                "feature map {fw}x{fh} not divisible by attention window {}",
                self.attn_window
            ));
        }
        if !self.use_transformer {
            let (pc, pr) = self.fc_pool;
            if pc == 0 || pr == 0 || fw % pc != 0 || fh % pr != 0 {
                return err(format!("feature map {fw}x{fh} not divisible by fc_pool {pc}x{pr}"));
            }
        }
        if self.use_transformer && self.decoder_layers == 0 {
            return err("decoder_layers must be at least 1".into());
        }
        Ok(())
    }
}

/// `(2d+1)²·n`.
pub fn correlation_channels(window: usize, heads: usize) -> usize {
    (2 * window + 1).pow(2) * heads
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for cfg in [NetworkConfig::full(), NetworkConfig::desk(), NetworkConfig::tiny()] {
            cfg.validate().unwrap();
        }
    }

    #[test]
    fn feature_sizes() {
        let mut cfg = NetworkConfig::full();
        assert_eq!(cfg.feature_size(), (64, 32));
        assert_eq!(cfg.feature_stride(), 8);
        cfg.upsample_rate = 1;
        assert_eq!(cfg.feature_size(), (16, 8));
        assert_eq!(correlation_channels(4, 4), 324);
    }

    #[test]
    fn inconsistent_flags_rejected() {
        let mut cfg = NetworkConfig::desk();
        cfg.use_transformer = false;
        assert!(cfg.validate().is_err());
        cfg.use_encoder = false;
        cfg.validate().unwrap();
        cfg.input_size = (250, 128);
        assert!(cfg.validate().is_err());
        let mut cfg = NetworkConfig::desk();
        cfg.upsample_rate = 3;
        assert!(cfg.validate().is_err());
    }
}
