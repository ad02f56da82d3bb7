//! Train ablation variants on the same data under several seeds and compare median
//! validation losses against the no-correction baseline.
//!
//!     cargo run --release --example ablation -- [steps] [seeds] [variant...]

use extcalib::dataio::{synth_scene, PreparedFrame, PreprocessConfig, SynthConfig};
use extcalib::network::NetworkConfig;
use extcalib::trainer::{
    evaluate, evaluation_samples, format_table, run_ablation, validation_loss, AblationVariant, Predictor, TrainConfig,
};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

fn main() -> extcalib::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(40);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut variants = args.map(|a| a.parse()).collect::<extcalib::Result<Vec<AblationVariant>>>()?;
    if variants.is_empty() {
        variants = vec![AblationVariant::Full, AblationVariant::NoMultihead];
    }

    let network = NetworkConfig::tiny();
    let pre = PreprocessConfig::synthetic(network.input_size);
    let scene = |s| PreparedFrame::new(&synth_scene(&SynthConfig::default(), s, 20000)?, &pre);
    let train = (0..16).map(scene).collect::<extcalib::Result<Vec<_>>>()?;
    let val_frames = (1000..1032).map(scene).collect::<extcalib::Result<Vec<_>>>()?;

    let baseline = TrainConfig::default();
    let val = evaluation_samples(&val_frames, &baseline.deviation, 17);
    let identity = validation_loss(&Predictor::Identity, &val, &baseline.loss, baseline.pointcloud_cap)?;
    println!("no correction   val loss {identity:.5}");
    let mut rows = vec![("no correction".to_string(), evaluate(&Predictor::Identity, &val)?)];
    for v in variants {
        let mut losses = Vec::new();
        for seed in 0..seeds {
            let cfg = TrainConfig {
                seed,
                max_steps: Some(steps),
                epochs: steps.div_ceil(train.len()),
                network: network.clone(),
                ..TrainConfig::default()
            };
            let val = evaluation_samples(&val_frames, &cfg.deviation, 17);
            let r = run_ablation(v, &cfg, &train, &val)?;
            println!("{:<15} seed {seed}: train loss {:.5}  val loss {:.5}", v.name(), r.final_train_loss, r.val_loss);
            losses.push(r.val_loss);
            if seed == 0 {
                rows.push((v.name().to_string(), r.metrics));
            }
        }
        println!("{:<15} median val loss {:.5}", v.name(), median(losses));
    }
    print!("{}", format_table(&rows));
    Ok(())
}
