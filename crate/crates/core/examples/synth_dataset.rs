//! Generate a small synthetic dataset in KITTI layout and read it back.
//!
//!     cargo run --release --example synth_dataset -- [out_dir] [n_scenes]

use std::path::PathBuf;

use extcalib::dataio::{write_synthetic_dataset, Dataset, PreprocessConfig, SynthConfig, SynthDatasetSpec};
use extcalib::geometry::DeviationRange;

fn main() -> extcalib::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/synth_example".into()));
    let n_scenes = args.next().and_then(|s| s.parse().ok()).unwrap_or(4);

    let spec = SynthDatasetSpec {
        n_scenes,
        n_points: 20000,
        seed: 7,
        split: "train".into(),
        synth: SynthConfig::default(),
        preprocess: PreprocessConfig::synthetic((256, 128)),
        deviation: DeviationRange::new(0.5, 5.0)?,
    };
    let manifest = write_synthetic_dataset(&out, &spec)?;
    println!("wrote {} scenes to {}", manifest.frames.len(), out.display());

    let ds = Dataset::open(&out)?;
    for i in 0..ds.len() {
        let raw = ds.raw_frame(i)?;
        println!(
            "  {}  image {}x{}  {} points",
            raw.name,
            raw.image.width(),
            raw.image.height(),
            raw.cloud.len()
        );
    }
    Ok(())
}
