use candle_core::{DType, Device, Tensor};

use crate::error::{CalibError, Result};
use crate::geometry::{project_point, CameraIntrinsics, PointCloud, SE3Transform};

/// Two-channel LiDAR raster: normalized projective depth and intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct LidarImage {
    width: usize,
    height: usize,
    depth: Vec<f32>,
    intensity: Vec<f32>,
    mask: Vec<bool>,
}

impl LidarImage {
    pub fn blank(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            depth: vec![0.0; n],
            intensity: vec![0.0; n],
            mask: vec![false; n],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Normalized depth, row-major; 0 where invalid.
    pub fn depth(&self) -> &[f32] {
        &self.depth
    }

    pub fn intensity(&self) -> &[f32] {
        &self.intensity
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// `(2, H, W)` tensor: depth then intensity.
    pub fn to_tensor(&self, device: &Device, dtype: DType) -> Result<Tensor> {
        let mut data = Vec::with_capacity(2 * self.depth.len());
        data.extend_from_slice(&self.depth);
        data.extend_from_slice(&self.intensity);
        Ok(Tensor::from_vec(data, (2, self.height, self.width), device)?.to_dtype(dtype)?)
    }
}

/// Nearest-integer pixel of a projection, if it falls on the `W × H` grid in front of the camera.
pub fn pixel_of(
    p: &nalgebra::Vector3<f64>,
    k: &CameraIntrinsics,
    t: &SE3Transform,
    width: usize,
    height: usize,
) -> Option<(usize, usize, f64)> {
    let proj = match project_point(p, k, t) {
        Ok(proj) => proj,
        Err(CalibError::DegenerateDepth { .. }) => return None,
        Err(_) => unreachable!("project_point only fails on degenerate depth"),
    };
    if proj.depth <= 0.0 || !proj.u.is_finite() || !proj.v.is_finite() {
        return None;
    }
    let (u, v) = (proj.u.round(), proj.v.round());
    if u < 0.0 || v < 0.0 || u >= width as f64 || v >= height as f64 {
        return None;
    }
    Some((u as usize, v as usize, proj.depth))
}

/// Normalized depth channel value.
pub fn encode_depth(depth: f64, depth_norm: f64) -> f32 {
    (depth / depth_norm).clamp(0.0, 1.0) as f32
}

/// Projects `pc` through `k` and `t` onto a `width × height` grid.
///
/// Points behind the camera or off-grid are dropped; collisions keep the nearest point.
/// Ties keep the earlier point.
pub fn render_lidar_image(
    pc: &PointCloud,
    k: &CameraIntrinsics,
    t: &SE3Transform,
    width: usize,
    height: usize,
    depth_norm: f64,
) -> LidarImage {
    let mut img = LidarImage::blank(width, height);
    let mut zbuf = vec![f64::INFINITY; width * height];
    for (p, intensity) in pc.iter() {
        let Some((x, y, d)) = pixel_of(p, k, t, width, height) else {
            continue;
        };
        let i = y * width + x;
        if d < zbuf[i] {
            zbuf[i] = d;
            img.depth[i] = encode_depth(d, depth_norm);
            img.intensity[i] = intensity as f32;
            img.mask[i] = true;
        }
    }
    img
}
