//! Overfit a small model on a handful of fixed synthetic samples.
//!
//!     cargo run --release --example train_overfit -- [steps] [lr] [batch]

use std::time::Instant;

use extcalib::dataio::{synth_scene, PreparedFrame, PreprocessConfig, SynthConfig};
use extcalib::geometry::DeviationRange;
use extcalib::network::NetworkConfig;
use extcalib::trainer::{epoch_samples, evaluate, format_table, train_on_frames, validation_loss, Predictor, TrainConfig};

fn main() -> extcalib::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(1000);
    let lr: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let batch_size: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);

    let network = NetworkConfig::tiny();
    let synth = SynthConfig::default();
    let frames = (0..8)
        .map(|i| PreparedFrame::new(&synth_scene(&synth, 100 + i, 20000)?, &PreprocessConfig::synthetic(network.input_size)))
        .collect::<extcalib::Result<Vec<_>>>()?;

    let cfg = TrainConfig {
        lr,
        epochs: (steps * batch_size).div_ceil(frames.len()),
        batch_size,
        max_steps: Some(steps),
        deviation: DeviationRange::new(0.1, 2.0)?,
        resample_deviations: false,
        network,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let outcome = train_on_frames(&cfg, &frames, None)?;
    let secs = start.elapsed().as_secs_f64();
    let epoch_mean = |e: usize| {
        let l: Vec<f64> = outcome.history.iter().filter(|r| r.epoch == e).map(|r| r.loss.total).collect();
        l.iter().sum::<f64>() / l.len() as f64
    };
    let last = outcome.history.last().map(|r| r.epoch).unwrap_or(0);
    for e in (0..=last).step_by((last / 10).max(1)) {
        println!("epoch {e:4}: mean loss {:.6}", epoch_mean(e));
    }
    println!("{} steps in {secs:.1} s ({:.1} ms/step)", outcome.history.len(), 1e3 * secs / outcome.history.len() as f64);

    let samples = epoch_samples(&cfg, &frames, 0);
    let trained = Predictor::Model(Box::new(outcome.model));
    println!("final loss on the fixed samples {:.6}", validation_loss(&trained, &samples, &cfg.loss, cfg.pointcloud_cap)?);
    let model = evaluate(&trained, &samples)?;
    let identity = evaluate(&Predictor::Identity, &samples)?;
    print!("{}", format_table(&[("trained".into(), model), ("no correction".into(), identity)]));
    Ok(())
}
