//! Load a KITTI odometry sequence (or any manifest) and summarize its frames.
//!
//!     cargo run --release --example kitti_loader -- <manifest.toml | dataset dir>
//!
//! A manifest for real KITTI data looks like:
//!
//!     format = "extcalib-dataset"
//!     version = 1
//!     kind = "kitti"
//!     split = "test"
//!     root = "/data/kitti/odometry/dataset"
//!     [deviation]
//!     max_translation = 0.5
//!     max_rotation = 5.0
//!     [preprocess]
//!     target = [256, 128]
//!     padded = [1280, 384]
//!     depth_norm = 80.0
//!     [[frames]]
//!     sequence = "00"
//!     frame = 0

use std::path::PathBuf;

use extcalib::dataio::Dataset;

fn main() -> extcalib::Result<()> {
    let Some(path) = std::env::args().nth(1).map(PathBuf::from) else {
        eprintln!("usage: kitti_loader <manifest.toml | dataset dir>");
        std::process::exit(1);
    };
    let ds = Dataset::open(&path)?;
    println!("{:?} split {:?}: {} frames", ds.manifest.kind, ds.manifest.split, ds.len());
    for i in 0..ds.len().min(5) {
        let raw = ds.raw_frame(i)?;
        let k = raw.intrinsics;
        println!(
            "  {}: {}x{} image, {} points, fx {:.1}, t_lc {:?}",
            raw.name,
            raw.image.width(),
            raw.image.height(),
            raw.cloud.len(),
            k.fx,
            raw.t_lc.translation().as_slice()
        );
    }
    let frames = ds.prepared_frames()?;
    let Some(first) = frames.first() else {
        return Ok(());
    };
    let sample = first.sample(&ds.manifest.deviation, 0);
    println!(
        "first sample: camera {}x{}, {} LiDAR pixels",
        sample.camera.width(),
        sample.camera.height(),
        sample.lidar.valid_count()
    );
    Ok(())
}
