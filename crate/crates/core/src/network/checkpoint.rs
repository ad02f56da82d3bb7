//! Safetensors checkpoints with configuration and progress in the metadata header.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use candle_core::{DType, Device, Tensor};
use safetensors::SafeTensors;

use super::config::NetworkConfig;
use super::model::CalibModel;
use crate::error::{CalibError, Result};

pub const CHECKPOINT_FORMAT: &str = "extcalib-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

const MODEL_PREFIX: &str = "model.";
const EXTRA_PREFIX: &str = "extra.";

/// Everything in a checkpoint header besides the tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub config: NetworkConfig,
    pub epoch: usize,
    pub step: usize,
    /// Free-form string entries (e.g. training config hash).
    pub extra: BTreeMap<String, String>,
}

impl CheckpointMeta {
    pub fn new(config: &NetworkConfig, epoch: usize, step: usize) -> Self {
        Self {
            config: config.clone(),
            epoch,
            step,
            extra: BTreeMap::new(),
        }
    }
}

fn ckpt_err(path: &Path, reason: impl Into<String>) -> CalibError {
    CalibError::Checkpoint {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Writes model parameters plus any `extra` tensors (optimizer state) to `path`.
pub fn save_checkpoint(
    path: &Path,
    model: &CalibModel,
    meta: &CheckpointMeta,
    extra: &[(String, Tensor)],
) -> Result<()> {
    let mut header = HashMap::new();
    header.insert("format".to_string(), CHECKPOINT_FORMAT.to_string());
    header.insert("version".to_string(), CHECKPOINT_VERSION.to_string());
    header.insert("config".to_string(), serde_json::to_string(&meta.config)?);
    header.insert("epoch".to_string(), meta.epoch.to_string());
    header.insert("step".to_string(), meta.step.to_string());
    header.insert("dtype".to_string(), format!("{:?}", model.dtype()));
    for (k, v) in &meta.extra {
        header.insert(format!("extra.{k}"), v.clone());
    }
    let mut tensors: Vec<(String, Tensor)> = model
        .named_vars()
        .into_iter()
        .map(|(k, v)| (format!("{MODEL_PREFIX}{k}"), v.as_tensor().clone()))
        .collect();
    tensors.extend(extra.iter().map(|(k, t)| (format!("{EXTRA_PREFIX}{k}"), t.clone())));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CalibError::io(dir, e))?;
    }
    safetensors::serialize_to_file(tensors, Some(header), path).map_err(|e| ckpt_err(path, e.to_string()))
}

/// A loaded checkpoint: the rebuilt model, its header and the extra tensors.
#[derive(Debug)]
pub struct LoadedCheckpoint {
    pub model: CalibModel,
    pub meta: CheckpointMeta,
    pub extra: HashMap<String, Tensor>,
}

fn read_header(path: &Path, bytes: &[u8]) -> Result<HashMap<String, String>> {
    let (_, metadata) = SafeTensors::read_metadata(bytes).map_err(|e| ckpt_err(path, e.to_string()))?;
    let header = metadata
        .metadata()
        .clone()
        .ok_or_else(|| ckpt_err(path, "missing metadata header"))?;
    if header.get("format").map(String::as_str) != Some(CHECKPOINT_FORMAT) {
        return Err(ckpt_err(path, "not an extcalib checkpoint"));
    }
    let version: u32 = header
        .get("version")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| ckpt_err(path, "missing version"))?;
    if version != CHECKPOINT_VERSION {
        return Err(ckpt_err(path, format!("unsupported version {version}")));
    }
    Ok(header)
}

pub fn load_checkpoint(path: &Path, dtype: DType, device: &Device) -> Result<LoadedCheckpoint> {
    let bytes = fs::read(path).map_err(|e| CalibError::io(path, e))?;
    let header = read_header(path, &bytes)?;
    let field = |k: &str| header.get(k).ok_or_else(|| ckpt_err(path, format!("missing {k}")));
    let mut config: NetworkConfig = serde_json::from_str(field("config")?)?;
    config.pretrained = None;
    let parse = |k: &str| -> Result<usize> { field(k)?.parse().map_err(|_| ckpt_err(path, format!("bad {k}"))) };
    let meta_extra = header
        .iter()
        .filter_map(|(k, v)| k.strip_prefix("extra.").map(|k| (k.to_string(), v.clone())))
        .collect();
    let meta = CheckpointMeta {
        config: config.clone(),
        epoch: parse("epoch")?,
        step: parse("step")?,
        extra: meta_extra,
    };
    let mut tensors = candle_core::safetensors::load_buffer(&bytes, device)?;
    let model = CalibModel::new(&config, 0, dtype, device)?;
    for (name, var) in model.named_vars() {
        let t = tensors
            .remove(&format!("{MODEL_PREFIX}{name}"))
            .ok_or_else(|| ckpt_err(path, format!("missing parameter {name}")))?;
        if t.dims() != var.dims() {
            return Err(ckpt_err(path, format!("shape mismatch for {name}: {:?} vs {:?}", t.dims(), var.dims())));
        }
        var.set(&t.to_dtype(dtype)?)?;
    }
    let extra = tensors
        .into_iter()
        .filter_map(|(k, t)| k.strip_prefix(EXTRA_PREFIX).map(|k| (k.to_string(), t)))
        .collect();
    Ok(LoadedCheckpoint { model, meta, extra })
}

/// Copies every tensor in `path` whose name and shape match a model parameter.
///
/// Returns the number of parameters initialized; zero matches is an error.
pub fn load_backbone_weights(model: &CalibModel, path: &Path) -> Result<usize> {
    let tensors = candle_core::safetensors::load(path, model.device())?;
    let mut loaded = 0;
    for (name, var) in model.named_vars() {
        if let Some(t) = tensors.get(&name).filter(|t| t.dims() == var.dims()) {
            var.set(&t.to_dtype(model.dtype())?)?;
            loaded += 1;
        }
    }
    if loaded == 0 {
        return Err(ckpt_err(path, "no tensor matches a model parameter"));
    }
    log::info!("initialized {loaded} parameters from {}", path.display());
    Ok(loaded)
}
