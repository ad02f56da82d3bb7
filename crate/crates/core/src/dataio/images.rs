use candle_core::{DType, Device, Tensor};
use image::{imageops, imageops::FilterType, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::geometry::CameraIntrinsics;

/// Planar RGB image, values in `[0, 1]`, layout `3 × H × W`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl CameraImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != 3 * width * height {
            return Err(CalibError::Dimension(format!(
                "camera image {width}x{height} needs {} values, got {}",
                3 * width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_rgb8(img: &RgbImage) -> Self {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut data = vec![0f32; 3 * w * h];
        for (x, y, px) in img.enumerate_pixels() {
            let idx = y as usize * w + x as usize;
            for c in 0..3 {
                data[c * w * h + idx] = px[c] as f32 / 255.0;
            }
        }
        Self {
            width: w,
            height: h,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let plane = self.width * self.height;
        let i = y * self.width + x;
        [self.data[i], self.data[plane + i], self.data[2 * plane + i]]
    }

    pub fn to_rgb8(&self) -> RgbImage {
        RgbImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            let p = self.pixel(x as usize, y as usize);
            image::Rgb(p.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8))
        })
    }

    /// `(3, H, W)` tensor.
    pub fn to_tensor(&self, device: &Device, dtype: DType) -> Result<Tensor> {
        Ok(Tensor::from_slice(&self.data, (3, self.height, self.width), device)?.to_dtype(dtype)?)
    }
}

/// Resolution handling for camera frames: zero-pad bottom/right, then resize.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    /// Model input `(width, height)`.
    pub target: (usize, usize),
    /// Canvas `(width, height)` the raw frame is padded to before resizing.
    pub padded: (usize, usize),
    /// Depth (m) mapped to 1.0 in the LiDAR depth channel.
    pub depth_norm: f64,
}

impl PreprocessConfig {
    /// KITTI frames: pad to 1280×384, resize to 512×256.
    pub fn kitti() -> Self {
        Self {
            target: (512, 256),
            padded: (1280, 384),
            depth_norm: crate::dataio::DEPTH_NORM_METERS,
        }
    }

    /// Synthetic frames (620×188 at half KITTI resolution): pad to 640×192, resize to `target`.
    pub fn synthetic(target: (usize, usize)) -> Self {
        Self {
            target,
            padded: (640, 192),
            depth_norm: crate::dataio::DEPTH_NORM_METERS,
        }
    }

    pub fn scale(&self) -> (f64, f64) {
        (
            self.target.0 as f64 / self.padded.0 as f64,
            self.target.1 as f64 / self.padded.1 as f64,
        )
    }
}

/// Zero-pads `raw` on the bottom and right to `padded`.
pub fn pad_image(raw: &RgbImage, padded: (usize, usize)) -> Result<RgbImage> {
    let (w, h) = (raw.width() as usize, raw.height() as usize);
    if w > padded.0 || h > padded.1 {
        return Err(CalibError::ResolutionMismatch(format!(
            "raw image {w}x{h} exceeds padded size {}x{}",
            padded.0, padded.1
        )));
    }
    let mut canvas = RgbImage::new(padded.0 as u32, padded.1 as u32);
    imageops::replace(&mut canvas, raw, 0, 0);
    Ok(canvas)
}

/// Pads, resizes and normalizes a raw frame; returns the image with matching intrinsics.
pub fn preprocess_camera(
    raw: &RgbImage,
    cfg: &PreprocessConfig,
    k: &CameraIntrinsics,
) -> Result<(CameraImage, CameraIntrinsics)> {
    let canvas = pad_image(raw, cfg.padded)?;
    let resized = if cfg.target == cfg.padded {
        canvas
    } else {
        imageops::resize(
            &canvas,
            cfg.target.0 as u32,
            cfg.target.1 as u32,
            FilterType::Triangle,
        )
    };
    let (sx, sy) = cfg.scale();
    Ok((CameraImage::from_rgb8(&resized), k.scaled(sx, sy)))
}
