use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::CalibrationSample;
use crate::error::{CalibError, Result};
use crate::geometry::quat_to_euler;
use crate::network::PosePrediction;

/// Absolute errors of one prediction: translation in cm, rotation in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleErrors {
    pub translation_cm: [f64; 3],
    /// Roll, pitch, yaw of the error rotation `q_gt·q_pred⁻¹`.
    pub rotation_deg: [f64; 3],
}

impl SampleErrors {
    pub fn compute(pred: &PosePrediction, sample: &CalibrationSample) -> Result<Self> {
        let dt = (pred.translation - sample.t_gt.translation()).abs() * 100.0;
        let q_err = sample.t_gt.quaternion() * pred.rotation.normalize().conjugate();
        let e = quat_to_euler(&q_err.normalize())?;
        Ok(Self {
            translation_cm: [dt.x, dt.y, dt.z],
            rotation_deg: [e.roll.abs(), e.pitch.abs(), e.yaw.abs()],
        })
    }
}

/// Aggregated mean absolute errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibMetrics {
    pub translation_mean_cm: f64,
    pub translation_x_cm: f64,
    pub translation_y_cm: f64,
    pub translation_z_cm: f64,
    pub rotation_mean_deg: f64,
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
    pub latency_ms: Option<f64>,
    pub samples: usize,
}

impl CalibMetrics {
    pub fn from_errors(errors: &[SampleErrors]) -> Result<Self> {
        if errors.is_empty() {
            return Err(CalibError::EmptyInput("evaluation samples"));
        }
        let n = errors.len() as f64;
        let mean = |f: &dyn Fn(&SampleErrors) -> f64| errors.iter().map(f).sum::<f64>() / n;
        Ok(Self {
            translation_mean_cm: mean(&|e| e.translation_cm.iter().sum::<f64>() / 3.0),
            translation_x_cm: mean(&|e| e.translation_cm[0]),
            translation_y_cm: mean(&|e| e.translation_cm[1]),
            translation_z_cm: mean(&|e| e.translation_cm[2]),
            rotation_mean_deg: mean(&|e| e.rotation_deg.iter().sum::<f64>() / 3.0),
            roll_deg: mean(&|e| e.rotation_deg[0]),
            pitch_deg: mean(&|e| e.rotation_deg[1]),
            yaw_deg: mean(&|e| e.rotation_deg[2]),
            latency_ms: None,
            samples: errors.len(),
        })
    }

    pub fn translation_columns(&self) -> [f64; 3] {
        [self.translation_x_cm, self.translation_y_cm, self.translation_z_cm]
    }

    pub fn rotation_columns(&self) -> [f64; 3] {
        [self.roll_deg, self.pitch_deg, self.yaw_deg]
    }
}

/// Aligned text table, one row per labelled result.
pub fn format_table(rows: &[(String, CalibMetrics)]) -> String {
    let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(6);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<label_w$} | {:>9} {:>9} {:>9} {:>9} | {:>9} {:>9} {:>9} {:>9} | {:>10} | {:>5}",
        "model", "mean(cm)", "X(cm)", "Y(cm)", "Z(cm)", "mean(°)", "roll(°)", "pitch(°)", "yaw(°)", "latency", "n"
    );
    let _ = writeln!(out, "{}", "-".repeat(label_w + 104));
    for (label, m) in rows {
        let latency = m.latency_ms.map(|l| format!("{l:.2} ms")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:<label_w$} | {:>9.4} {:>9.4} {:>9.4} {:>9.4} | {:>9.4} {:>9.4} {:>9.4} {:>9.4} | {:>10} | {:>5}",
            label,
            m.translation_mean_cm,
            m.translation_x_cm,
            m.translation_y_cm,
            m.translation_z_cm,
            m.rotation_mean_deg,
            m.roll_deg,
            m.pitch_deg,
            m.yaw_deg,
            latency,
            m.samples
        );
    }
    out
}

/// One line of the results log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub command: String,
    pub config_hash: String,
    pub device: String,
    #[serde(flatten)]
    pub metrics: CalibMetrics,
}

pub fn append_jsonl<T: Serialize>(path: &Path, record: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CalibError::io(dir, e))?;
    }
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CalibError::io(path, e))?;
    let line = serde_json::to_string(record)?;
    writeln!(f, "{line}").map_err(|e| CalibError::io(path, e))
}
