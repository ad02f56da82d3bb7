use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use super::quaternion::{check_rotation, quat_to_rotmat, rotmat_to_quat, Quaternion};
use crate::error::Result;

/// Orthonormality tolerance enforced when building a transform from raw parts.
pub const SE3_TOLERANCE: f64 = 1e-6;

/// Rigid transform `x ↦ R·x + t`, translation in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SE3Transform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl SE3Transform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Validates that `rotation` is a proper rotation within [`SE3_TOLERANCE`].
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        check_rotation(&rotation, SE3_TOLERANCE)?;
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Re-orthonormalizes `rotation` (via its quaternion) before building.
    ///
    /// Intended for rotations parsed from text files with a handful of significant digits.
    pub fn new_orthonormalized(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let q = rotmat_to_quat(&rotation)?;
        Self::from_quat_translation(&q, translation)
    }

    pub fn from_quat_translation(q: &Quaternion, translation: Vector3<f64>) -> Result<Self> {
        Ok(Self {
            rotation: quat_to_rotmat(q)?,
            translation,
        })
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn from_rotation(rotation: Matrix3<f64>) -> Result<Self> {
        Self::new(rotation, Vector3::zeros())
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn quaternion(&self) -> Quaternion {
        rotmat_to_quat(&self.rotation).expect("SE3Transform holds a valid rotation")
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self · other`: apply `other` first.
    pub fn compose(&self, other: &SE3Transform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_homogeneous(m: &Matrix4<f64>) -> Result<Self> {
        Self::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }

    /// Largest absolute elementwise difference of the homogeneous matrices.
    pub fn max_abs_diff(&self, other: &SE3Transform) -> f64 {
        (self.to_homogeneous() - other.to_homogeneous()).abs().max()
    }
}

impl Default for SE3Transform {
    fn default() -> Self {
        Self::identity()
    }
}

impl Mul for SE3Transform {
    type Output = SE3Transform;
    fn mul(self, rhs: SE3Transform) -> SE3Transform {
        self.compose(&rhs)
    }
}

impl Mul<&SE3Transform> for &SE3Transform {
    type Output = SE3Transform;
    fn mul(self, rhs: &SE3Transform) -> SE3Transform {
        self.compose(rhs)
    }
}

/// Recover the extrinsic from a perturbed initial guess and a predicted deviation:
/// `T̂_LC = T_pred⁻¹ · T_init`.
pub fn compose_calibration(t_pred: &SE3Transform, t_init: &SE3Transform) -> SE3Transform {
    t_pred.inverse().compose(t_init)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::euler_to_rotmat;

    #[test]
    fn inverse_cancels() {
        let t = SE3Transform::new(euler_to_rotmat(10.0, -3.0, 44.0), Vector3::new(1.0, -2.0, 0.5))
            .unwrap();
        assert!(t.compose(&t.inverse()).max_abs_diff(&SE3Transform::identity()) < 1e-12);
    }

    #[test]
    fn identity_prediction_keeps_init() {
        let init = SE3Transform::new(euler_to_rotmat(1.0, 2.0, 3.0), Vector3::new(0.1, 0.2, 0.3))
            .unwrap();
        assert!(compose_calibration(&SE3Transform::identity(), &init).max_abs_diff(&init) < 1e-15);
    }

    #[test]
    fn rejects_non_rotation() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(SE3Transform::new(m, Vector3::zeros()).is_err());
    }

    #[test]
    fn orthonormalizes_rounded_rotation() {
        let r = euler_to_rotmat(0.3, 89.0, -12.0).map(|v| (v * 1e5).round() / 1e5);
        assert!(SE3Transform::new(r, Vector3::zeros()).is_err());
        let t = SE3Transform::new_orthonormalized(r, Vector3::zeros()).unwrap();
        assert!((t.rotation() - r).abs().max() < 1e-4);
    }
}
