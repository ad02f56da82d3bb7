//! Metrics and latency for the reference predictors and an untrained network.
//!
//!     cargo run --release --example evaluate

use candle_core::{DType, Device};
use extcalib::dataio::{synth_scene, PreparedFrame, PreprocessConfig, SynthConfig};
use extcalib::geometry::DeviationRange;
use extcalib::network::{CalibModel, NetworkConfig};
use extcalib::trainer::{evaluate, evaluation_samples, format_table, measure_latency, Predictor};

fn main() -> extcalib::Result<()> {
    let network = NetworkConfig::tiny();
    let pre = PreprocessConfig::synthetic(network.input_size);
    let frames = (0..4)
        .map(|i| PreparedFrame::new(&synth_scene(&SynthConfig::default(), 50 + i, 20000)?, &pre))
        .collect::<extcalib::Result<Vec<_>>>()?;
    let samples = evaluation_samples(&frames, &DeviationRange::new(0.5, 5.0)?, 99);

    let model = CalibModel::new(&network, 0, DType::F32, &Device::Cpu)?;
    let latency = measure_latency(&model, &samples[0], 2, 10)?;
    println!("untrained tiny network: {:.2} ms mean, {:.2} ms p95 on {}", latency.mean_ms, latency.p95_ms, latency.device);

    let mut rows = Vec::new();
    for (name, p) in [
        ("oracle", Predictor::Oracle),
        ("identity", Predictor::Identity),
        ("untrained", Predictor::Model(Box::new(model))),
    ] {
        let mut m = evaluate(&p, &samples)?;
        if name == "untrained" {
            m.latency_ms = Some(latency.mean_ms);
        }
        rows.push((name.to_string(), m));
    }
    print!("{}", format_table(&rows));
    Ok(())
}
