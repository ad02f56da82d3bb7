//! The end-to-end calibration network.

use candle_core::{DType, Device, Module, Tensor, D};
use candle_nn::{linear, Linear, VarBuilder, VarMap};
use nalgebra::Vector3;

use super::backbone::ResNet18;
use super::config::NetworkConfig;
use super::correlation::MultiHeadCorrelation;
use super::decoder::{PoseDecoder, PoseHeads};
use super::dla::FeatureBranch;
use super::encoder::CorrelationEncoder;
use super::init::seeded_var_builder;
use crate::dataio::CalibrationSample;
use crate::error::{CalibError, Result};
use crate::geometry::{Quaternion, SE3Transform};

const CAMERA_MEAN: f64 = 0.45;
const CAMERA_STD: f64 = 0.225;

#[derive(Debug, Clone)]
enum Regressor {
    Transformer {
        query_backbone: Option<ResNet18>,
        query_proj: Linear,
        encoder: CorrelationEncoder,
        decoder: PoseDecoder,
    },
    Pooled {
        pool: (usize, usize),
        fc: Linear,
    },
}

/// Module graph; parameters live in the owning [`CalibModel`]'s `VarMap`.
#[derive(Debug, Clone)]
pub struct CalibrationNet {
    camera: FeatureBranch,
    lidar: FeatureBranch,
    correlation: MultiHeadCorrelation,
    regressor: Regressor,
    heads: PoseHeads,
}

/// Raw network output: translation `(B, 3)` and unit quaternion `(B, 4)` with `w ≥ 0`.
#[derive(Debug, Clone)]
pub struct PoseOutput {
    pub translation: Tensor,
    pub rotation: Tensor,
}

impl CalibrationNet {
    pub fn new(cfg: &NetworkConfig, vb: VarBuilder) -> candle_core::Result<Self> {
        let d = cfg.feature_dim;
        let regressor = if cfg.use_transformer {
            let c4 = cfg.stage_channels()[3];
            Regressor::Transformer {
                query_backbone: if cfg.separate_query_backbone {
                    Some(ResNet18::new(3, cfg.stage_channels(), vb.pp("query_backbone"))?)
                } else {
                    None
                },
                query_proj: linear(c4, d, vb.pp("query_proj"))?,
                encoder: CorrelationEncoder::new(cfg, vb.pp("encoder"))?,
                decoder: PoseDecoder::new(cfg, vb.pp("decoder"))?,
            }
        } else {
            let (pc, pr) = cfg.fc_pool;
            Regressor::Pooled {
                pool: (pr, pc),
                fc: linear(cfg.corr_channels() * pc * pr, d, vb.pp("fc"))?,
            }
        };
        Ok(Self {
            camera: FeatureBranch::new(3, cfg, vb.pp("camera"))?,
            lidar: FeatureBranch::new(2, cfg, vb.pp("lidar"))?,
            correlation: MultiHeadCorrelation::new(cfg, vb.pp("correlation"))?,
            regressor,
            heads: PoseHeads::new(d, vb.pp("heads"))?,
        })
    }

    /// `camera`: `(B, 3, H, W)` normalized; `lidar`: `(B, 2, H, W)`.
    pub fn forward(&self, camera: &Tensor, lidar: &Tensor) -> candle_core::Result<PoseOutput> {
        let (f_cam, cam_last) = self.camera.forward(camera)?;
        let (f_lidar, _) = self.lidar.forward(lidar)?;
        let corr = self.correlation.forward(&f_lidar, &f_cam)?;
        let hidden = match &self.regressor {
            Regressor::Transformer {
                query_backbone,
                query_proj,
                encoder,
                decoder,
            } => {
                let last = match query_backbone {
                    Some(bb) => bb.forward_stages(camera)?.pop().expect("four stages"),
                    None => cam_last,
                };
                let query = query_proj.forward(&last.mean(D::Minus1)?.mean(D::Minus1)?)?;
                let memory = encoder.forward(&corr)?;
                decoder.forward(&query, &memory)?
            }
            Regressor::Pooled { pool, fc } => {
                let (_, _, h, w) = corr.dims4()?;
                let pooled = corr.avg_pool2d((h / pool.0, w / pool.1))?.flatten_from(1)?;
                fc.forward(&pooled)?.relu()?
            }
        };
        let (translation, rotation) = self.heads.forward(&hidden)?;
        Ok(PoseOutput {
            translation,
            rotation,
        })
    }
}

/// Predicted deviation `ΔT̂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosePrediction {
    pub translation: Vector3<f64>,
    pub rotation: Quaternion,
}

impl PosePrediction {
    pub fn identity() -> Self {
        Self {
            translation: Vector3::zeros(),
            rotation: Quaternion::identity(),
        }
    }

    pub fn from_transform(t: &SE3Transform) -> Self {
        Self {
            translation: *t.translation(),
            rotation: t.quaternion(),
        }
    }

    pub fn transform(&self) -> Result<SE3Transform> {
        SE3Transform::from_quat_translation(&self.rotation.normalize(), self.translation)
    }
}

/// A network together with its parameters, dtype and device.
pub struct CalibModel {
    config: NetworkConfig,
    varmap: VarMap,
    net: CalibrationNet,
    dtype: DType,
    device: Device,
}

impl CalibModel {
    /// Fresh model with parameters drawn deterministically from `seed`.
    pub fn new(config: &NetworkConfig, seed: u64, dtype: DType, device: &Device) -> Result<Self> {
        config.validate()?;
        let varmap = VarMap::new();
        let vb = seeded_var_builder(&varmap, seed, dtype, device);
        let net = CalibrationNet::new(config, vb)?;
        let model = Self {
            config: config.clone(),
            varmap,
            net,
            dtype,
            device: device.clone(),
        };
        if let Some(path) = &config.pretrained {
            super::checkpoint::load_backbone_weights(&model, path)?;
        }
        Ok(model)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn varmap(&self) -> &VarMap {
        &self.varmap
    }

    pub fn net(&self) -> &CalibrationNet {
        &self.net
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    /// Trainable variables sorted by name.
    pub fn named_vars(&self) -> Vec<(String, candle_core::Var)> {
        let data = self.varmap.data().lock().expect("var map lock poisoned");
        let mut vars: Vec<_> = data.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        vars.sort_by(|a, b| a.0.cmp(&b.0));
        vars
    }

    pub fn num_parameters(&self) -> usize {
        self.named_vars().iter().map(|(_, v)| v.elem_count()).sum()
    }

    /// Batched, normalized network inputs for `samples`.
    pub fn inputs(&self, samples: &[&CalibrationSample]) -> Result<(Tensor, Tensor)> {
        if samples.is_empty() {
            return Err(CalibError::EmptyInput("batch"));
        }
        let (w, h) = self.config.input_size;
        let mut cams = Vec::with_capacity(samples.len());
        let mut lidars = Vec::with_capacity(samples.len());
        for s in samples {
            if (s.camera.width(), s.camera.height()) != (w, h) || (s.lidar.width(), s.lidar.height()) != (w, h) {
                return Err(CalibError::ResolutionMismatch(format!(
                    "sample is {}x{} (lidar {}x{}), model expects {w}x{h}",
                    s.camera.width(),
                    s.camera.height(),
                    s.lidar.width(),
                    s.lidar.height()
                )));
            }
            cams.push(s.camera.to_tensor(&self.device, self.dtype)?);
            lidars.push(s.lidar.to_tensor(&self.device, self.dtype)?);
        }
        let cam = Tensor::stack(&cams, 0)?.affine(1.0 / CAMERA_STD, -CAMERA_MEAN / CAMERA_STD)?;
        Ok((cam, Tensor::stack(&lidars, 0)?))
    }

    pub fn forward(&self, samples: &[&CalibrationSample]) -> Result<PoseOutput> {
        let (cam, lidar) = self.inputs(samples)?;
        Ok(self.net.forward(&cam, &lidar)?)
    }

    pub fn predict(&self, sample: &CalibrationSample) -> Result<PosePrediction> {
        let out = self.forward(&[sample])?;
        let t: Vec<f64> = out.translation.to_dtype(DType::F64)?.flatten_all()?.to_vec1()?;
        let q: Vec<f64> = out.rotation.to_dtype(DType::F64)?.flatten_all()?.to_vec1()?;
        Ok(PosePrediction {
            translation: Vector3::new(t[0], t[1], t[2]),
            rotation: Quaternion::new(q[0], q[1], q[2], q[3]).canonicalize(),
        })
    }
}

impl std::fmt::Debug for CalibModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CalibModel")
            .field("config", &self.config)
            .field("parameters", &self.num_parameters())
            .field("dtype", &self.dtype)
            .finish()
    }
}
