//! Build a network preset and time one forward and one forward+backward pass.
//!
//!     cargo run --release --example forward -- [tiny|desk|full]

use std::time::Instant;

use candle_core::{DType, Device};
use extcalib::dataio::{synth_scene, PreparedFrame, PreprocessConfig, SynthConfig};
use extcalib::geometry::DeviationRange;
use extcalib::losses::{batch_loss, LossTarget, LossWeights};
use extcalib::network::{CalibModel, NetworkConfig};

fn main() -> extcalib::Result<()> {
    let preset = std::env::args().nth(1).unwrap_or_else(|| "tiny".into());
    let cfg = match preset.as_str() {
        "desk" => NetworkConfig::desk(),
        "full" => NetworkConfig::full(),
        _ => NetworkConfig::tiny(),
    };
    let model = CalibModel::new(&cfg, 0, DType::F32, &Device::Cpu)?;
    println!("{preset}: {} parameters, features {:?}", model.num_parameters(), cfg.feature_size());

    let raw = synth_scene(&SynthConfig::default(), 1, 20000)?;
    let frame = PreparedFrame::new(&raw, &PreprocessConfig::synthetic(cfg.input_size))?;
    let sample = frame.sample(&DeviationRange::new(0.2, 2.0)?, 7);

    let t = Instant::now();
    let pred = model.predict(&sample)?;
    println!("forward {:.1} ms -> t = {:?}, q = {:?}", t.elapsed().as_secs_f64() * 1e3, pred.translation.as_slice(), pred.rotation);

    let t = Instant::now();
    let out = model.forward(&[&sample])?;
    let target = LossTarget::from_sample(&sample, 4096, 0)?;
    let (loss, parts) = batch_loss(&out, &[target], &LossWeights::default())?;
    let grads = loss.backward()?;
    println!(
        "forward+backward {:.1} ms, loss {:.5}, {} gradient tensors",
        t.elapsed().as_secs_f64() * 1e3,
        parts.total,
        model.named_vars().iter().filter(|(_, v)| grads.get(v.as_tensor()).is_some()).count()
    );
    Ok(())
}
