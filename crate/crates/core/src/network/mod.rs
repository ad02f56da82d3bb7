//! The calibration network.
//!
//! Two ResNet-18 branches with deep-layer-aggregation upsampling produce
//! fine-grained LiDAR and camera feature maps. A windowed multi-head
//! correlation compares them, densely connected convolutions lift the volume
//! to token dimension, windowed self-attention refines the tokens, and a
//! single learned query decodes them into translation and rotation.

pub mod attention;
pub mod backbone;
pub mod checkpoint;
pub mod config;
pub mod correlation;
pub mod decoder;
pub mod deform;
pub mod dla;
pub mod encoder;
pub mod init;
pub mod layers;
pub mod model;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, LoadedCheckpoint};
pub use config::{correlation_channels, NetworkConfig};
pub use correlation::{windowed_correlation, MultiHeadCorrelation};
pub use model::{CalibModel, CalibrationNet, PoseOutput, PosePrediction};
