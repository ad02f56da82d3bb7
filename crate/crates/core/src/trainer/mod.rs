//! Training, evaluation, latency measurement and ablations.

mod ablation;
mod config;
mod eval;
mod metrics;
pub mod optim;
mod train;

pub use ablation::{run_ablation, AblationReport, AblationVariant};
pub use config::{config_hash, Precision, TrainConfig};
pub use eval::{
    device_tag, evaluate, evaluation_samples, load_predictor, measure_latency, sample_errors,
    save_reference_checkpoint, validation_loss, LatencyStats, Predictor, PREDICTOR_KEY,
};
pub use metrics::{append_jsonl, format_table, CalibMetrics, RunRecord, SampleErrors};
pub use optim::{Adam, AdamParams, StepInfo};
pub use train::{
    deviation_seed, epoch_samples, initial_model, load_training_frames, train, train_on_frames, StepRecord, TrainOutcome,
    Trainer,
};
