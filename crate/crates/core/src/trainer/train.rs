use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use candle_core::Device;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::metrics::append_jsonl;
use super::optim::{Adam, AdamParams};
use crate::dataio::{CalibrationSample, Dataset, PreparedFrame};
use crate::error::{CalibError, Result};
use crate::losses::{batch_loss, LossBreakdown, LossTarget};
use crate::network::{load_checkpoint, save_checkpoint, CalibModel, CheckpointMeta};
use crate::seed;

const STREAM_DEVIATION: u64 = 1;
const STREAM_ORDER: u64 = 2;
const STREAM_SUBSAMPLE: u64 = 3;
const STREAM_INIT: u64 = 4;

/// Loss and gradient statistics of one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    #[serde(flatten)]
    pub loss: LossBreakdown,
    pub grad_norm: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: CalibModel,
    pub history: Vec<StepRecord>,
    /// Per-epoch checkpoints in write order.
    pub checkpoints: Vec<PathBuf>,
    /// Set when training stopped early because of an interrupt.
    pub interrupted: bool,
}

impl TrainOutcome {
    pub fn last_checkpoint(&self) -> Option<&Path> {
        self.checkpoints.last().map(PathBuf::as_path)
    }
}

/// Seed of the deviation applied to frame `index` in `epoch`.
pub fn deviation_seed(cfg: &TrainConfig, epoch: usize, index: usize) -> u64 {
    let e = if cfg.resample_deviations { epoch as u64 } else { 0 };
    seed::derive(seed::derive(seed::derive(cfg.seed, STREAM_DEVIATION), e), index as u64)
}

/// The samples of one epoch, in frame order.
pub fn epoch_samples(cfg: &TrainConfig, frames: &[PreparedFrame], epoch: usize) -> Vec<CalibrationSample> {
    frames
        .iter()
        .enumerate()
        .map(|(i, f)| f.sample(&cfg.deviation, deviation_seed(cfg, epoch, i)))
        .collect()
}

fn epoch_order(cfg: &TrainConfig, n: usize, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed::derive(cfg.seed, STREAM_ORDER), epoch as u64));
    order.shuffle(&mut rng);
    order
}

/// Loads the training frames named by `cfg.train_manifest` at the network's input size.
pub fn load_training_frames(cfg: &TrainConfig) -> Result<Vec<PreparedFrame>> {
    let path = cfg
        .train_manifest
        .as_ref()
        .ok_or_else(|| CalibError::MissingDataset("no train_manifest configured".into()))?;
    let dataset = Dataset::open(path)?;
    let mut frames = dataset.prepared_frames_at(cfg.network.input_size)?;
    if let Some(n) = cfg.max_train_frames {
        frames.truncate(n);
    }
    Ok(frames)
}

/// Trains on the dataset named in `cfg`.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let frames = load_training_frames(cfg)?;
    train_on_frames(cfg, &frames, None)
}

/// The untrained model a run with `cfg` starts from.
pub fn initial_model(cfg: &TrainConfig) -> Result<CalibModel> {
    CalibModel::new(
        &cfg.network,
        seed::derive(cfg.seed, STREAM_INIT),
        cfg.precision.dtype(),
        &Device::Cpu,
    )
}

/// Trains a freshly initialized model on in-memory frames.
pub fn train_on_frames(cfg: &TrainConfig, frames: &[PreparedFrame], stop: Option<&AtomicBool>) -> Result<TrainOutcome> {
    cfg.validate()?;
    Trainer::new(cfg, initial_model(cfg)?)?.run(frames, stop)
}

/// Resumable training state: model, optimizer and progress counters.
pub struct Trainer {
    cfg: TrainConfig,
    model: CalibModel,
    opt: Adam,
    epoch: usize,
}

impl Trainer {
    pub fn new(cfg: &TrainConfig, model: CalibModel) -> Result<Self> {
        let params = AdamParams {
            clip_norm: cfg.grad_clip,
            ..AdamParams::new(cfg.lr)
        };
        let opt = Adam::new(model.named_vars(), params)?;
        Ok(Self {
            cfg: cfg.clone(),
            model,
            opt,
            epoch: 0,
        })
    }

    /// Continues from a checkpoint written by [`Trainer::run`], including optimizer state.
    pub fn resume(cfg: &TrainConfig, checkpoint: &Path) -> Result<Self> {
        let loaded = load_checkpoint(checkpoint, cfg.precision.dtype(), &Device::Cpu)?;
        let mut cfg = cfg.clone();
        cfg.network = loaded.meta.config.clone();
        let mut t = Self::new(&cfg, loaded.model)?;
        let state = loaded
            .extra
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("adam.").map(|k| (k.to_string(), v.clone())))
            .collect();
        t.opt.load_state(&state, loaded.meta.step)?;
        t.epoch = loaded.meta.epoch;
        Ok(t)
    }

    pub fn model(&self) -> &CalibModel {
        &self.model
    }

    pub fn step_count(&self) -> usize {
        self.opt.step_count()
    }

    fn save(&self, dir: &Path, epoch: usize) -> Result<PathBuf> {
        let path = dir.join(format!("epoch_{epoch:04}.safetensors"));
        let mut meta = CheckpointMeta::new(&self.cfg.network, epoch, self.opt.step_count());
        meta.extra.insert("train_config_hash".into(), self.cfg.hash());
        let state: Vec<_> = self
            .opt
            .state()
            .into_iter()
            .map(|(k, t)| (format!("adam.{k}"), t))
            .collect();
        save_checkpoint(&path, &self.model, &meta, &state)?;
        Ok(path)
    }

    /// One optimizer step on `batch`.
    pub fn step(&mut self, batch: &[&CalibrationSample], seeds: &[u64]) -> Result<StepRecord> {
        let targets = batch
            .iter()
            .zip(seeds)
            .map(|(s, &sd)| LossTarget::from_sample(s, self.cfg.pointcloud_cap, sd))
            .collect::<Result<Vec<_>>>()?;
        let out = self.model.forward(batch)?;
        let (loss, parts) = batch_loss(&out, &targets, &self.cfg.loss)?;
        let step = self.opt.step_count();
        if !parts.total.is_finite() {
            return Err(CalibError::NonFiniteLoss {
                step,
                detail: format!("{parts:?}"),
            });
        }
        let grads = loss.backward()?;
        let info = self.opt.step(&grads)?;
        Ok(StepRecord {
            step,
            epoch: self.epoch,
            loss: parts,
            grad_norm: info.grad_norm,
        })
    }

    /// Runs the remaining epochs of the configuration.
    pub fn run(mut self, frames: &[PreparedFrame], stop: Option<&AtomicBool>) -> Result<TrainOutcome> {
        if frames.is_empty() {
            return Err(CalibError::EmptyInput("training frames"));
        }
        let mut history = Vec::new();
        let mut checkpoints = Vec::new();
        let mut interrupted = false;
        let max_steps = self.cfg.max_steps;
        let budget_left = |opt: &Adam| max_steps.is_none_or(|m| opt.step_count() < m);
        'epochs: while self.epoch < self.cfg.epochs && budget_left(&self.opt) {
            let samples = epoch_samples(&self.cfg, frames, self.epoch);
            let order = epoch_order(&self.cfg, frames.len(), self.epoch);
            for chunk in order.chunks(self.cfg.batch_size) {
                if stop.is_some_and(|s| s.load(Ordering::SeqCst)) {
                    interrupted = true;
                    break 'epochs;
                }
                if !budget_left(&self.opt) {
                    break;
                }
                let batch: Vec<&CalibrationSample> = chunk.iter().map(|&i| &samples[i]).collect();
                let seeds: Vec<u64> = chunk
                    .iter()
                    .map(|&i| seed::derive(deviation_seed(&self.cfg, self.epoch, i), STREAM_SUBSAMPLE))
                    .collect();
                let rec = self.step(&batch, &seeds)?;
                log::debug!(
                    "epoch {} step {} loss {:.6} (t {:.5}, r {:.5}, p {:.5}) |g| {:.3}",
                    rec.epoch,
                    rec.step,
                    rec.loss.total,
                    rec.loss.translation,
                    rec.loss.rotation,
                    rec.loss.pointcloud,
                    rec.grad_norm
                );
                if let Some(log) = &self.cfg.metrics_log {
                    append_jsonl(log, &rec)?;
                }
                history.push(rec);
            }
            self.epoch += 1;
            if let Some(dir) = &self.cfg.checkpoint_dir {
                checkpoints.push(self.save(dir, self.epoch)?);
            }
            if let Some(last) = history.last() {
                log::info!("epoch {} done, step {}, loss {:.6}", self.epoch, last.step + 1, last.loss.total);
            }
        }
        if interrupted {
            if let Some(dir) = &self.cfg.checkpoint_dir {
                checkpoints.push(self.save(dir, self.epoch)?);
            }
        }
        Ok(TrainOutcome {
            model: self.model,
            history,
            checkpoints,
            interrupted,
        })
    }
}
