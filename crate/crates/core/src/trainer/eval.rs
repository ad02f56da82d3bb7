use std::path::Path;
use std::time::Instant;

use candle_core::{DType, Device};
use serde::{Deserialize, Serialize};

use super::metrics::{CalibMetrics, SampleErrors};
use crate::dataio::{CalibrationSample, PreparedFrame};
use crate::error::{CalibError, Result};
use crate::losses::{total_loss_with, LossWeights};
use crate::network::{load_checkpoint, save_checkpoint, CalibModel, CheckpointMeta, NetworkConfig, PosePrediction};
use crate::seed;

/// Checkpoint header key naming the predictor kind.
pub const PREDICTOR_KEY: &str = "predictor";

/// Anything that maps a sample to a predicted deviation.
#[derive(Debug)]
pub enum Predictor {
    Model(Box<CalibModel>),
    /// Returns the ground-truth deviation; useful for checking the metric pipeline.
    Oracle,
    /// Predicts no deviation, i.e. keeps the initial extrinsic.
    Identity,
}

impl Predictor {
    pub fn kind(&self) -> &'static str {
        match self {
            Predictor::Model(_) => "model",
            Predictor::Oracle => "oracle",
            Predictor::Identity => "identity",
        }
    }

    pub fn predict(&self, sample: &CalibrationSample) -> Result<PosePrediction> {
        match self {
            Predictor::Model(m) => m.predict(sample),
            Predictor::Oracle => Ok(PosePrediction::from_transform(&sample.t_gt)),
            Predictor::Identity => Ok(PosePrediction::identity()),
        }
    }

    pub fn model(&self) -> Option<&CalibModel> {
        match self {
            Predictor::Model(m) => Some(m),
            _ => None,
        }
    }
}

/// Loads a checkpoint; a header marking it as an oracle or identity predictor is honoured.
pub fn load_predictor(path: &Path, dtype: DType, device: &Device) -> Result<(Predictor, CheckpointMeta)> {
    let loaded = load_checkpoint(path, dtype, device)?;
    let kind = loaded.meta.extra.get(PREDICTOR_KEY).map(String::as_str).unwrap_or("model");
    let predictor = match kind {
        "model" => Predictor::Model(Box::new(loaded.model)),
        "oracle" => Predictor::Oracle,
        "identity" => Predictor::Identity,
        other => {
            return Err(CalibError::Checkpoint {
                path: path.to_path_buf(),
                reason: format!("unknown predictor kind {other}"),
            })
        }
    };
    Ok((predictor, loaded.meta))
}

/// Writes a checkpoint that loads as the given reference predictor (`oracle` or `identity`).
pub fn save_reference_checkpoint(path: &Path, kind: &str, network: &NetworkConfig) -> Result<()> {
    if kind != "oracle" && kind != "identity" {
        return Err(CalibError::Usage(format!("reference predictor must be oracle or identity, got {kind}")));
    }
    let model = CalibModel::new(network, 0, DType::F32, &Device::Cpu)?;
    let mut meta = CheckpointMeta::new(network, 0, 0);
    meta.extra.insert(PREDICTOR_KEY.into(), kind.into());
    save_checkpoint(path, &model, &meta, &[])
}

/// Deterministic evaluation samples: frame `i` gets deviation seed `derive(seed, i)`.
pub fn evaluation_samples(
    frames: &[PreparedFrame],
    range: &crate::geometry::DeviationRange,
    eval_seed: u64,
) -> Vec<CalibrationSample> {
    frames
        .iter()
        .enumerate()
        .map(|(i, f)| f.sample(range, seed::derive(eval_seed, i as u64)))
        .collect()
}

pub fn sample_errors(predictor: &Predictor, samples: &[CalibrationSample]) -> Result<Vec<SampleErrors>> {
    samples
        .iter()
        .map(|s| SampleErrors::compute(&predictor.predict(s)?, s))
        .collect()
}

pub fn evaluate(predictor: &Predictor, samples: &[CalibrationSample]) -> Result<CalibMetrics> {
    CalibMetrics::from_errors(&sample_errors(predictor, samples)?)
}

/// Mean total loss of the predictor's outputs over `samples`.
pub fn validation_loss(
    predictor: &Predictor,
    samples: &[CalibrationSample],
    weights: &LossWeights,
    cap: usize,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(CalibError::EmptyInput("validation samples"));
    }
    let mut sum = 0.0;
    for (i, s) in samples.iter().enumerate() {
        sum += total_loss_with(&predictor.predict(s)?, s, weights, cap, i as u64)?.total;
    }
    Ok(sum / samples.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
    pub runs_ms: Vec<f64>,
    pub device: String,
}

impl LatencyStats {
    pub fn from_runs(runs_ms: Vec<f64>, device: String) -> Result<Self> {
        if runs_ms.is_empty() {
            return Err(CalibError::Usage("latency needs at least one run".into()));
        }
        let mean_ms = runs_ms.iter().sum::<f64>() / runs_ms.len() as f64;
        let mut sorted = runs_ms.clone();
        sorted.sort_by(f64::total_cmp);
        // nearest-rank percentile
        let rank = ((0.95 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
        Ok(Self {
            mean_ms,
            p95_ms: sorted[rank - 1],
            max_ms: sorted[sorted.len() - 1],
            runs_ms,
            device,
        })
    }
}

/// Human-readable tag for the compute device.
pub fn device_tag(device: &Device) -> String {
    match device {
        Device::Cpu => {
            let model = std::fs::read_to_string("/proc/cpuinfo")
                .ok()
                .and_then(|s| {
                    s.lines()
                        .find(|l| l.starts_with("model name"))
                        .and_then(|l| l.split(':').nth(1))
                        .map(|m| m.trim().to_string())
                })
                .unwrap_or_else(|| std::env::consts::ARCH.to_string());
            let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
            format!("cpu: {model} ({threads} threads)")
        }
        other => format!("{other:?}"),
    }
}

/// Wall-clock time per forward pass over `sample`; the first `n_warmup` passes are discarded.
pub fn measure_latency(
    model: &CalibModel,
    sample: &CalibrationSample,
    n_warmup: usize,
    n_runs: usize,
) -> Result<LatencyStats> {
    if n_runs == 0 {
        return Err(CalibError::Usage("n_runs must be at least 1".into()));
    }
    let (cam, lidar) = model.inputs(&[sample])?;
    let run = || -> Result<f64> {
        let start = Instant::now();
        let out = model.net().forward(&cam, &lidar)?;
        // force evaluation to completion
        out.rotation.to_dtype(DType::F64)?.sum_all()?.to_scalar::<f64>()?;
        Ok(start.elapsed().as_secs_f64() * 1e3)
    };
    for _ in 0..n_warmup {
        run()?;
    }
    let runs = (0..n_runs).map(|_| run()).collect::<Result<Vec<_>>>()?;
    LatencyStats::from_runs(runs, device_tag(model.device()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latency_statistics() {
        let s = LatencyStats::from_runs(vec![4.0], "cpu".into()).unwrap();
        assert_eq!((s.mean_ms, s.p95_ms, s.max_ms), (4.0, 4.0, 4.0));
        let runs: Vec<f64> = (1..=20).map(f64::from).collect();
        let s = LatencyStats::from_runs(runs, "cpu".into()).unwrap();
        assert_eq!(s.mean_ms, 10.5);
        assert_eq!(s.p95_ms, 19.0);
        assert!(s.mean_ms <= s.max_ms);
        assert!(LatencyStats::from_runs(vec![], "cpu".into()).is_err());
    }
}
