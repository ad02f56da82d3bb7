use image::RgbImage;

use super::images::{preprocess_camera, CameraImage, PreprocessConfig};
use super::render::{render_lidar_image, LidarImage};
use crate::error::Result;
use crate::geometry::{sample_deviation, CameraIntrinsics, DeviationRange, PointCloud, SE3Transform};

/// A frame as it comes off disk (or out of the synthetic generator).
#[derive(Debug, Clone, PartialEq)]
pub struct RawFrame {
    pub name: String,
    pub image: RgbImage,
    pub cloud: PointCloud,
    /// Intrinsics of `image` at its raw resolution.
    pub intrinsics: CameraIntrinsics,
    /// Ground-truth LiDAR→camera extrinsic.
    pub t_lc: SE3Transform,
}

/// A frame after camera preprocessing; everything `make_sample` needs except the deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedFrame {
    pub name: String,
    pub camera: CameraImage,
    pub cloud: PointCloud,
    /// Intrinsics at model resolution.
    pub intrinsics: CameraIntrinsics,
    pub t_lc: SE3Transform,
    pub depth_norm: f64,
}

impl PreparedFrame {
    pub fn new(frame: &RawFrame, cfg: &PreprocessConfig) -> Result<Self> {
        let (camera, intrinsics) = preprocess_camera(&frame.image, cfg, &frame.intrinsics)?;
        Ok(Self {
            name: frame.name.clone(),
            camera,
            cloud: frame.cloud.clone(),
            intrinsics,
            t_lc: frame.t_lc,
            depth_norm: cfg.depth_norm,
        })
    }

    /// Sample with an explicit deviation `ΔT`.
    pub fn sample_with(&self, deviation: SE3Transform) -> CalibrationSample {
        let t_init = deviation.compose(&self.t_lc);
        let lidar = render_lidar_image(
            &self.cloud,
            &self.intrinsics,
            &t_init,
            self.camera.width(),
            self.camera.height(),
            self.depth_norm,
        );
        CalibrationSample {
            camera: self.camera.clone(),
            lidar,
            cloud: self.cloud.clone(),
            intrinsics: self.intrinsics,
            t_init,
            t_gt: deviation,
            depth_norm: self.depth_norm,
        }
    }

    pub fn sample(&self, range: &DeviationRange, seed: u64) -> CalibrationSample {
        self.sample_with(sample_deviation(range, seed))
    }
}

/// One training/evaluation unit.
///
/// `lidar` is always `render_lidar_image(cloud, intrinsics, t_init, ..)`; see [`CalibrationSample::rerender`].
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSample {
    pub camera: CameraImage,
    pub lidar: LidarImage,
    /// LiDAR-frame points.
    pub cloud: PointCloud,
    pub intrinsics: CameraIntrinsics,
    /// Perturbed extrinsic used to render `lidar`, `ΔT · T_LC`.
    pub t_init: SE3Transform,
    /// The deviation `ΔT` the network should predict.
    pub t_gt: SE3Transform,
    pub depth_norm: f64,
}

impl CalibrationSample {
    pub fn rerender(&self) -> LidarImage {
        render_lidar_image(
            &self.cloud,
            &self.intrinsics,
            &self.t_init,
            self.lidar.width(),
            self.lidar.height(),
            self.depth_norm,
        )
    }

    /// Ground-truth extrinsic recovered from the stored pair.
    pub fn t_lc(&self) -> SE3Transform {
        self.t_gt.inverse().compose(&self.t_init)
    }
}

/// `ΔT = sample_deviation(range, seed)`, `T_init = ΔT·T_LC`, LiDAR image rendered at model resolution.
pub fn make_sample(
    frame: &RawFrame,
    cfg: &PreprocessConfig,
    range: &DeviationRange,
    seed: u64,
) -> Result<CalibrationSample> {
    Ok(PreparedFrame::new(frame, cfg)?.sample(range, seed))
}
