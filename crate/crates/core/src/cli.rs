//! The `extcalib` command line: `synth`, `render`, `train`, `eval`, `ablate`, `latency`.
//!
//! Exit codes: 0 on success, 1 on usage/configuration errors, 2 on runtime failures.
//! Settings resolve as command-line flag, then `--config` file, then built-in default.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use candle_core::Device;
use clap::{Args, Parser, Subcommand};
use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::dataio::{
    render_lidar_image, synth_scene, write_synthetic_dataset, CalibrationSample, Dataset, PreparedFrame,
    PreprocessConfig, RawFrame, SynthConfig, SynthDatasetSpec,
};
use crate::error::{CalibError, Result};
use crate::geometry::{compose_calibration, sample_deviation, CameraIntrinsics, DeviationRange, PointCloud, SE3Transform};
use crate::network::{NetworkConfig, PosePrediction};
use crate::trainer::{
    append_jsonl, config_hash, device_tag, evaluate, evaluation_samples, format_table, load_predictor,
    measure_latency, run_ablation, AblationVariant, Predictor, RunRecord, TrainConfig, Trainer,
};

/// Depth (m) at the far end of the overlay hue ramp.
pub const OVERLAY_MAX_DEPTH: f64 = 40.0;
/// Hue (degrees) of the nearest points; the farthest points get [`OVERLAY_FAR_HUE`].
pub const OVERLAY_NEAR_HUE: f64 = 0.0;
pub const OVERLAY_FAR_HUE: f64 = 240.0;

#[derive(Debug, Parser)]
#[command(name = "extcalib", version, about = "Learned LiDAR-camera extrinsic calibration")]
pub struct Cli {
    /// Master random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML training/evaluation config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset in KITTI layout.
    Synth(SynthArgs),
    /// Write miscalibrated / predicted / ground-truth projection overlays.
    Render(RenderArgs),
    /// Train a model.
    Train(TrainArgs),
    /// Evaluate a checkpoint and print a metrics table.
    Eval(EvalArgs),
    /// Train and evaluate one ablation variant.
    Ablate(AblateArgs),
    /// Measure forward-pass latency of a checkpoint.
    Latency(LatencyArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub n_scenes: usize,
    #[arg(long, default_value_t = 20000)]
    pub n_points: usize,
    /// Model input width the manifest records.
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    #[arg(long, default_value_t = 128)]
    pub height: usize,
    #[arg(long, default_value = "train")]
    pub split: String,
    /// Deviation bounds recorded in the manifest (m, deg).
    #[arg(long, default_value_t = 0.5)]
    pub deviation_t: f64,
    #[arg(long, default_value_t = 5.0)]
    pub deviation_r: f64,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub frame: usize,
    /// Translation bound (m) of the sampled miscalibration.
    #[arg(long, default_value_t = 0.5)]
    pub deviation_t: f64,
    /// Rotation bound (deg) of the sampled miscalibration.
    #[arg(long, default_value_t = 5.0)]
    pub deviation_r: f64,
    /// Also render the extrinsic recovered by this checkpoint.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Network preset: tiny, desk or full.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_frames: Option<usize>,
    /// Reuse the first epoch's deviations instead of drawing fresh ones each epoch.
    #[arg(long)]
    pub fixed_deviations: bool,
    #[arg(long)]
    pub deviation_t: Option<f64>,
    #[arg(long)]
    pub deviation_r: Option<f64>,
    /// Resume from a checkpoint written by a previous run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Override the manifest's deviation bounds.
    #[arg(long)]
    pub deviation_t: Option<f64>,
    #[arg(long)]
    pub deviation_r: Option<f64>,
    /// Directory for the run manifest and results log.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub variant: String,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Validation dataset; defaults to the training dataset with independent deviations.
    #[arg(long)]
    pub val_dataset: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub max_frames: Option<usize>,
}

#[derive(Debug, Args)]
pub struct LatencyArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub warmup: usize,
    #[arg(long, default_value_t = 20)]
    pub runs: usize,
    /// Use frame 0 of this dataset as input instead of a generated scene.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Provenance record written before a command does its work.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: Vec<String>,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub started_unix: u64,
    pub version: String,
    pub git_commit: Option<String>,
    pub outputs: Vec<PathBuf>,
}

pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";

impl RunManifest {
    pub fn new<T: Serialize>(command: &str, config: &T, outputs: Vec<PathBuf>) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            arguments: std::env::args().collect(),
            config: serde_json::to_value(config)?,
            config_hash: config_hash(config),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            version: env!("CARGO_PKG_VERSION").to_string(),
            git_commit: git_commit(),
            outputs,
        })
    }

    /// Writes `dir/run_manifest.json`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| CalibError::io(dir, e))?;
        let path = dir.join(RUN_MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(self)?).map_err(|e| CalibError::io(&path, e))?;
        Ok(path)
    }
}

fn git_commit() -> Option<String> {
    let out = std::process::Command::new("git")
        .args(["rev-parse", "--short", "HEAD"])
        .output()
        .ok()?;
    out.status
        .success()
        .then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
        .filter(|s| !s.is_empty())
}

fn preset(name: &str) -> Result<NetworkConfig> {
    match name {
        "tiny" => Ok(NetworkConfig::tiny()),
        "desk" => Ok(NetworkConfig::desk()),
        "full" => Ok(NetworkConfig::full()),
        other => Err(CalibError::Usage(format!("unknown preset {other:?}; expected tiny, desk or full"))),
    }
}

fn base_config(cli: &Cli) -> Result<TrainConfig> {
    let mut cfg = match &cli.config {
        Some(path) => TrainConfig::load(path)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn deviation_override(base: DeviationRange, t: Option<f64>, r: Option<f64>) -> Result<DeviationRange> {
    DeviationRange::new(t.unwrap_or(base.max_translation), r.unwrap_or(base.max_rotation))
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let c = v * s;
    let hp = (h / 60.0).rem_euclid(6.0);
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r, g, b].map(|ch| ((ch + m) * 255.0).round() as u8)
}

/// Overlay colour of a point at `depth` meters: red (near) through green to blue (far).
pub fn depth_color(depth: f64) -> [u8; 3] {
    let f = (depth / OVERLAY_MAX_DEPTH).clamp(0.0, 1.0);
    hsv_to_rgb(OVERLAY_NEAR_HUE + f * (OVERLAY_FAR_HUE - OVERLAY_NEAR_HUE), 1.0, 1.0)
}

/// Grayscale `image` with the z-buffered projection of `cloud` under `t` drawn in depth colours.
pub fn render_overlay(image: &RgbImage, cloud: &PointCloud, k: &CameraIntrinsics, t: &SE3Transform) -> RgbImage {
    let (w, h) = image.dimensions();
    let depth_norm = 1000.0;
    let lidar = render_lidar_image(cloud, k, t, w as usize, h as usize, depth_norm);
    let mut out = RgbImage::new(w, h);
    for (x, y, p) in image.enumerate_pixels() {
        let g = (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64).round() as u8;
        out.put_pixel(x, y, Rgb([g, g, g]));
    }
    for (i, (&m, &d)) in lidar.mask().iter().zip(lidar.depth()).enumerate() {
        if m {
            let (x, y) = ((i % w as usize) as u32, (i / w as usize) as u32);
            out.put_pixel(x, y, Rgb(depth_color(d as f64 * depth_norm)));
        }
    }
    out
}

fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path)?;
    Ok(())
}

fn cmd_synth(cli: &Cli, a: &SynthArgs) -> Result<()> {
    let spec = SynthDatasetSpec {
        n_scenes: a.n_scenes,
        n_points: a.n_points,
        seed: cli.seed.unwrap_or(0),
        split: a.split.clone(),
        synth: SynthConfig::default(),
        preprocess: PreprocessConfig::synthetic((a.width, a.height)),
        deviation: DeviationRange::new(a.deviation_t, a.deviation_r)?,
    };
    #[derive(Serialize)]
    struct SynthRun<'a> {
        n_scenes: usize,
        n_points: usize,
        seed: u64,
        split: &'a str,
        synth: &'a SynthConfig,
        preprocess: &'a PreprocessConfig,
        deviation: &'a DeviationRange,
    }
    let run = SynthRun {
        n_scenes: spec.n_scenes,
        n_points: spec.n_points,
        seed: spec.seed,
        split: &spec.split,
        synth: &spec.synth,
        preprocess: &spec.preprocess,
        deviation: &spec.deviation,
    };
    RunManifest::new("synth", &run, vec![a.out.clone()])?.write(&a.out)?;
    let manifest = write_synthetic_dataset(&a.out, &spec)?;
    println!("wrote {} scenes to {}", manifest.frames.len(), a.out.display());
    Ok(())
}

fn cmd_render(cli: &Cli, a: &RenderArgs) -> Result<()> {
    let dataset = Dataset::open(&a.dataset)?;
    if a.frame >= dataset.len() {
        return Err(CalibError::Usage(format!("frame {} out of range (dataset has {})", a.frame, dataset.len())));
    }
    if let Some(ck) = &a.checkpoint {
        if !ck.is_file() {
            return Err(CalibError::Usage(format!("checkpoint {} does not exist", ck.display())));
        }
    }
    let range = DeviationRange::new(a.deviation_t, a.deviation_r)?;
    let seed = cli.seed.unwrap_or(0);
    let mut outputs = vec![a.out.join("miscalibrated.png"), a.out.join("ground_truth.png")];
    if a.checkpoint.is_some() {
        outputs.insert(1, a.out.join("predicted.png"));
    }
    #[derive(Serialize)]
    struct RenderRun<'a> {
        dataset: &'a Path,
        frame: usize,
        deviation: DeviationRange,
        seed: u64,
        checkpoint: Option<&'a Path>,
    }
    let run = RenderRun {
        dataset: &a.dataset,
        frame: a.frame,
        deviation: range,
        seed,
        checkpoint: a.checkpoint.as_deref(),
    };
    RunManifest::new("render", &run, outputs.clone())?.write(&a.out)?;

    let raw: RawFrame = dataset.raw_frame(a.frame)?;
    let deviation = sample_deviation(&range, seed);
    let t_init = deviation.compose(&raw.t_lc);
    save_png(&render_overlay(&raw.image, &raw.cloud, &raw.intrinsics, &t_init), &outputs[0])?;
    if let Some(ck) = &a.checkpoint {
        let (predictor, meta) = load_predictor(ck, candle_core::DType::F32, &Device::Cpu)?;
        let frame = PreparedFrame::new(&raw, &PreprocessConfig {
            target: meta.config.input_size,
            ..dataset.manifest.preprocess
        })?;
        let sample = frame.sample_with(deviation);
        let pred: PosePrediction = predictor.predict(&sample)?;
        let t_hat = compose_calibration(&pred.transform()?, &t_init);
        save_png(&render_overlay(&raw.image, &raw.cloud, &raw.intrinsics, &t_hat), &outputs[1])?;
    }
    save_png(&render_overlay(&raw.image, &raw.cloud, &raw.intrinsics, &raw.t_lc), outputs.last().expect("two outputs"))?;
    for o in &outputs {
        println!("{}", o.display());
    }
    Ok(())
}

fn interrupt_flag() -> Arc<AtomicBool> {
    let flag = Arc::new(AtomicBool::new(false));
    let f = flag.clone();
    if ctrlc::set_handler(move || f.store(true, Ordering::SeqCst)).is_err() {
        log::warn!("could not install interrupt handler");
    }
    flag
}

fn cmd_train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let mut cfg = base_config(cli)?;
    if let Some(p) = &a.preset {
        cfg.network = preset(p)?;
    }
    if let Some(d) = &a.dataset {
        cfg.train_manifest = Some(d.clone());
    }
    cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
    cfg.max_steps = a.max_steps.or(cfg.max_steps);
    cfg.lr = a.lr.unwrap_or(cfg.lr);
    cfg.batch_size = a.batch_size.unwrap_or(cfg.batch_size);
    cfg.max_train_frames = a.max_frames.or(cfg.max_train_frames);
    if a.fixed_deviations {
        cfg.resample_deviations = false;
    }
    cfg.deviation = deviation_override(cfg.deviation, a.deviation_t, a.deviation_r)?;
    cfg.checkpoint_dir = Some(a.out.join("checkpoints"));
    cfg.metrics_log = Some(a.out.join("metrics.jsonl"));
    cfg.validate().map_err(|e| CalibError::Usage(e.to_string()))?;
    if cfg.train_manifest.is_none() {
        return Err(CalibError::Usage("train needs --dataset or train_manifest in --config".into()));
    }
    let frames = crate::trainer::load_training_frames(&cfg)?;
    RunManifest::new("train", &cfg, vec![a.out.join("checkpoints"), a.out.join("metrics.jsonl")])?.write(&a.out)?;
    let trainer = match &a.resume {
        Some(ck) => Trainer::resume(&cfg, ck)?,
        None => Trainer::new(&cfg, crate::trainer::initial_model(&cfg)?)?,
    };
    let stop = interrupt_flag();
    let outcome = trainer.run(&frames, Some(&stop))?;
    if let (Some(first), Some(last)) = (outcome.history.first(), outcome.history.last()) {
        println!(
            "trained {} steps: loss {:.6} -> {:.6}",
            outcome.history.len(),
            first.loss.total,
            last.loss.total
        );
    }
    match outcome.last_checkpoint() {
        Some(p) => println!("checkpoint {}", p.display()),
        None => println!("no checkpoint written (zero epochs)"),
    }
    if outcome.interrupted {
        println!("interrupted; latest state flushed");
    }
    Ok(())
}

fn eval_samples(dataset: &Path, input_size: (usize, usize), range: DeviationRange, seed: u64) -> Result<Vec<CalibrationSample>> {
    let ds = Dataset::open(dataset)?;
    if ds.is_empty() {
        return Err(CalibError::EmptyInput("evaluation dataset"));
    }
    let frames = ds.prepared_frames_at(input_size)?;
    Ok(evaluation_samples(&frames, &range, seed))
}

fn cmd_eval(cli: &Cli, a: &EvalArgs) -> Result<()> {
    let cfg = base_config(cli)?;
    if !a.checkpoint.is_file() {
        return Err(CalibError::Usage(format!("checkpoint {} does not exist", a.checkpoint.display())));
    }
    let ds = Dataset::open(&a.dataset)?;
    let range = deviation_override(ds.manifest.deviation, a.deviation_t, a.deviation_r)?;
    #[derive(Serialize)]
    struct EvalRun<'a> {
        checkpoint: &'a Path,
        dataset: &'a Path,
        deviation: DeviationRange,
        seed: u64,
    }
    let run = EvalRun {
        checkpoint: &a.checkpoint,
        dataset: &a.dataset,
        deviation: range,
        seed: cfg.seed,
    };
    if let Some(out) = &a.out {
        RunManifest::new("eval", &run, vec![out.join("results.jsonl")])?.write(out)?;
    }
    let (predictor, meta) = load_predictor(&a.checkpoint, cfg.precision.dtype(), &Device::Cpu)?;
    let samples = eval_samples(&a.dataset, meta.config.input_size, range, cfg.seed)?;
    let metrics = evaluate(&predictor, &samples)?;
    let label = match &predictor {
        Predictor::Model(_) => a.checkpoint.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        other => other.kind().to_string(),
    };
    print!("{}", format_table(&[(label, metrics.clone())]));
    if let Some(out) = &a.out {
        let record = RunRecord {
            run_id: format!("eval-{}", config_hash(&run)),
            command: "eval".into(),
            config_hash: config_hash(&run),
            device: device_tag(&Device::Cpu),
            metrics,
        };
        append_jsonl(&out.join("results.jsonl"), &record)?;
    }
    Ok(())
}

fn cmd_ablate(cli: &Cli, a: &AblateArgs) -> Result<()> {
    let variant: AblationVariant = a.variant.parse()?;
    let mut cfg = base_config(cli)?;
    if let Some(p) = &a.preset {
        cfg.network = preset(p)?;
    }
    if let Some(d) = &a.dataset {
        cfg.train_manifest = Some(d.clone());
    }
    cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
    cfg.max_steps = a.max_steps.or(cfg.max_steps);
    cfg.max_train_frames = a.max_frames.or(cfg.max_train_frames);
    cfg.checkpoint_dir = Some(a.out.join("checkpoints"));
    cfg.validate().map_err(|e| CalibError::Usage(e.to_string()))?;
    let train_path = cfg
        .train_manifest
        .clone()
        .ok_or_else(|| CalibError::Usage("ablate needs --dataset or train_manifest in --config".into()))?;
    let frames = crate::trainer::load_training_frames(&cfg)?;
    let val_path = a.val_dataset.clone().or(cfg.val_manifest.clone()).unwrap_or(train_path);
    RunManifest::new("ablate", &cfg, vec![a.out.join("ablation.jsonl")])?.write(&a.out)?;
    let val_cfg = variant.apply(&cfg.network);
    let val = eval_samples(&val_path, val_cfg.input_size, cfg.deviation, crate::seed::derive(cfg.seed, 99))?;
    let report = run_ablation(variant, &cfg, &frames, &val)?;
    print!("{}", format_table(&[(variant.name().to_string(), report.metrics.clone())]));
    println!("validation loss {:.6}", report.val_loss);
    append_jsonl(&a.out.join("ablation.jsonl"), &report)?;
    Ok(())
}

fn cmd_latency(cli: &Cli, a: &LatencyArgs) -> Result<()> {
    if a.runs == 0 {
        return Err(CalibError::Usage("--runs must be at least 1".into()));
    }
    if !a.checkpoint.is_file() {
        return Err(CalibError::Usage(format!("checkpoint {} does not exist", a.checkpoint.display())));
    }
    let cfg = base_config(cli)?;
    if let Some(out) = &a.out {
        #[derive(Serialize)]
        struct LatencyRun<'a> {
            checkpoint: &'a Path,
            warmup: usize,
            runs: usize,
        }
        let run = LatencyRun {
            checkpoint: &a.checkpoint,
            warmup: a.warmup,
            runs: a.runs,
        };
        RunManifest::new("latency", &run, vec![out.join("latency.json")])?.write(out)?;
    }
    let (predictor, meta) = load_predictor(&a.checkpoint, cfg.precision.dtype(), &Device::Cpu)?;
    let model = predictor
        .model()
        .ok_or_else(|| CalibError::Usage(format!("{} checkpoints have no network to time", predictor.kind())))?;
    let size = meta.config.input_size;
    let sample = match &a.dataset {
        Some(d) => eval_samples(d, size, DeviationRange::zero(), cfg.seed)?.remove(0),
        None => {
            let raw = synth_scene(&SynthConfig::default(), cfg.seed, 20000)?;
            PreparedFrame::new(&raw, &PreprocessConfig::synthetic(size))?.sample_with(SE3Transform::identity())
        }
    };
    let stats = measure_latency(model, &sample, a.warmup, a.runs)?;
    println!(
        "latency over {} runs: mean {:.3} ms, p95 {:.3} ms [{}]",
        a.runs, stats.mean_ms, stats.p95_ms, stats.device
    );
    if let Some(out) = &a.out {
        fs::write(out.join("latency.json"), serde_json::to_string_pretty(&stats)?)
            .map_err(|e| CalibError::io(out.join("latency.json"), e))?;
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(cli, a),
        Command::Render(a) => cmd_render(cli, a),
        Command::Train(a) => cmd_train(cli, a),
        Command::Eval(a) => cmd_eval(cli, a),
        Command::Ablate(a) => cmd_ablate(cli, a),
        Command::Latency(a) => cmd_latency(cli, a),
    }
}

pub fn exit_code(err: &CalibError) -> i32 {
    match err {
        CalibError::Usage(_) | CalibError::Config(_) => 1,
        _ => 2,
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let CalibError::Usage(_) = e {
                if matches!(cli.command, Command::Ablate(_)) {
                    eprintln!("variants: {}", AblationVariant::names());
                }
            }
            exit_code(&e)
        }
    }
}
