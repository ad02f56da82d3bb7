//! Learned LiDAR-camera extrinsic calibration.
//!
//! The pipeline projects a point cloud through a perturbed extrinsic into a
//! two-channel LiDAR image, extracts fine-grained features from both the
//! camera and LiDAR images, correlates them with a windowed multi-head
//! correlation volume, and regresses the extrinsic deviation (translation +
//! unit quaternion) with a windowed-attention encoder and a single-query
//! transformer decoder.
//!
//! * [`geometry`]: SE(3), quaternions, Euler angles, projection.
//! * [`dataio`]: KITTI loaders, synthetic scenes, LiDAR rendering, samples.
//! * [`network`]: the model, built on candle.
//! * [`losses`]: smooth-L1 translation, quaternion angular distance, point-cloud distance.
//! * [`trainer`]: Adam training loop, metrics, latency, ablations.
//! * [`cli`]: the `extcalib` command line.

pub mod cli;
pub mod dataio;
pub mod error;
pub mod geometry;
pub mod losses;
pub mod network;
pub mod seed;
pub mod trainer;

pub use error::{CalibError, Result};
