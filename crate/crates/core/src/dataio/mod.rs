//! Data ingestion and sample assembly.
//!
//! Raw frames come from KITTI odometry or from the procedural generator in
//! [`synth`]; both are written/read in the KITTI directory layout. A
//! [`CalibrationSample`] pairs the preprocessed camera image with a LiDAR
//! image rendered under a randomly perturbed extrinsic.

mod images;
mod kitti;
mod manifest;
mod render;
mod sample;
pub mod synth;

use std::fs;
use std::path::Path;

pub use images::{pad_image, preprocess_camera, CameraImage, PreprocessConfig};
pub use kitti::{
    decode_kitti_cloud, encode_kitti_cloud, kitti_split, load_kitti_calib, load_kitti_cloud,
    load_kitti_frame, parse_kitti_calib, write_kitti_calib, write_kitti_cloud, KittiPaths,
};
pub use manifest::{
    Dataset, DatasetKind, DatasetManifest, FrameRef, MANIFEST_FILE, MANIFEST_FORMAT,
    MANIFEST_VERSION,
};
pub use render::{encode_depth, pixel_of, render_lidar_image, LidarImage};
pub use sample::{make_sample, CalibrationSample, PreparedFrame, RawFrame};
pub use synth::{synth_scene, SynthConfig};

use crate::error::{CalibError, Result};
use crate::geometry::DeviationRange;
use crate::seed;

/// Depth (m) mapped to 1.0 in the LiDAR depth channel.
pub const DEPTH_NORM_METERS: f64 = 80.0;

/// Sequence id under which synthetic scenes are stored.
pub const SYNTH_SEQUENCE: &str = "00";

/// Options for [`write_synthetic_dataset`].
#[derive(Debug, Clone)]
pub struct SynthDatasetSpec {
    pub n_scenes: usize,
    pub n_points: usize,
    pub seed: u64,
    pub split: String,
    pub synth: SynthConfig,
    pub preprocess: PreprocessConfig,
    pub deviation: DeviationRange,
}

/// Seed of scene `index` in a dataset generated with `dataset_seed`.
pub fn scene_seed(dataset_seed: u64, index: usize) -> u64 {
    seed::derive(dataset_seed, index as u64)
}

/// Generates `n_scenes` scenes in KITTI layout under `out` and writes `out/manifest.toml`.
pub fn write_synthetic_dataset(out: &Path, spec: &SynthDatasetSpec) -> Result<DatasetManifest> {
    let seq = out.join("sequences").join(SYNTH_SEQUENCE);
    for dir in [seq.join("velodyne"), seq.join("image_2")] {
        fs::create_dir_all(&dir).map_err(|e| CalibError::io(&dir, e))?;
    }
    write_kitti_calib(&seq.join("calib.txt"), &spec.synth.intrinsics, &spec.synth.t_lc)?;
    let mut frames = Vec::with_capacity(spec.n_scenes);
    for i in 0..spec.n_scenes {
        let s = scene_seed(spec.seed, i);
        let frame = synth_scene(&spec.synth, s, spec.n_points)?;
        let paths = KittiPaths::new(out, SYNTH_SEQUENCE, i as u32);
        write_kitti_cloud(&paths.cloud, &frame.cloud)?;
        frame.image.save(&paths.image)?;
        frames.push(FrameRef {
            sequence: SYNTH_SEQUENCE.to_string(),
            frame: i as u32,
            seed: Some(s),
        });
    }
    let manifest = DatasetManifest::new(
        DatasetKind::Synthetic,
        &spec.split,
        ".",
        spec.deviation,
        spec.preprocess,
        frames,
    );
    manifest.save(&out.join(MANIFEST_FILE))?;
    Ok(manifest)
}
