use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::SE3Transform;
use crate::error::{CalibError, Result};

/// Depth magnitude below which projection is rejected.
pub const MIN_PROJECTION_DEPTH: f64 = 1e-9;

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) || !cx.is_finite() || !cy.is_finite() {
            return Err(CalibError::InvalidIntrinsics(format!(
                "fx={fx}, fy={fy}, cx={cx}, cy={cy}"
            )));
        }
        Ok(Self { fx, fy, cx, cy })
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Intrinsics after resizing the image by `sx` horizontally and `sy` vertically.
    pub fn scaled(&self, sx: f64, sy: f64) -> Self {
        Self {
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
        }
    }
}

/// Pixel coordinates and projective depth of a projected point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

/// `d·[u v 1]ᵀ = K·(R·p + t)`. Points behind the camera are returned with `depth <= 0`.
pub fn project_point(p: &Vector3<f64>, k: &CameraIntrinsics, t: &SE3Transform) -> Result<Projection> {
    let c = t.transform_point(p);
    let depth = c.z;
    if depth.abs() < MIN_PROJECTION_DEPTH {
        return Err(CalibError::DegenerateDepth { depth });
    }
    Ok(Projection {
        u: k.fx * c.x / depth + k.cx,
        v: k.fy * c.y / depth + k.cy,
        depth,
    })
}
