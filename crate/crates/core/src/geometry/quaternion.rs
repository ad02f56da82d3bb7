use std::ops::{Mul, Neg};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};

/// Norm tolerance accepted by [`quat_to_rotmat`].
pub const UNIT_NORM_TOLERANCE: f64 = 1e-3;
/// Orthonormality tolerance accepted by [`rotmat_to_quat`].
pub const ROTATION_TOLERANCE: f64 = 1e-3;
/// Distance from ±90° pitch (degrees) below which Euler extraction is treated as gimbal-locked.
pub const GIMBAL_LOCK_DEG: f64 = 1e-6;

/// Hamilton quaternion `w + xi + yj + zk`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0)
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized). Canonical.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::identity();
        }
        let a = axis / n;
        let (s, c) = (0.5 * angle).sin_cos();
        Self::new(c, a.x * s, a.y * s, a.z * s).canonicalize()
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn imag(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn normalize(&self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    /// Unit norm with `w >= 0`.
    pub fn canonicalize(&self) -> Self {
        let q = self.normalize();
        if q.w < 0.0 {
            -q
        } else {
            q
        }
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn inverse(&self) -> Self {
        let n2 = self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z;
        let c = self.conjugate();
        Self::new(c.w / n2, c.x / n2, c.y / n2, c.z / n2)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        Quaternion::new(-self.w, -self.x, -self.y, -self.z)
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, r: Quaternion) -> Quaternion {
        let l = self;
        Quaternion::new(
            l.w * r.w - l.x * r.x - l.y * r.y - l.z * r.z,
            l.w * r.x + l.x * r.w + l.y * r.z - l.z * r.y,
            l.w * r.y - l.x * r.z + l.y * r.w + l.z * r.x,
            l.w * r.z + l.x * r.y - l.y * r.x + l.z * r.w,
        )
    }
}

/// Roll, pitch and yaw in degrees for the intrinsic X-Y-Z convention, `R = Rx(roll)·Ry(pitch)·Rz(yaw)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    /// Set when pitch is at ±90°; yaw is then pinned to 0.
    pub gimbal_locked: bool,
}

pub fn quat_to_rotmat(q: &Quaternion) -> Result<Matrix3<f64>> {
    let norm = q.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
        return Err(CalibError::InvalidQuaternion { norm });
    }
    let Quaternion { w, x, y, z } = q.normalize();
    Ok(Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    ))
}

/// Checks `R` is a proper rotation within `tol`.
pub fn check_rotation(r: &Matrix3<f64>, tol: f64) -> Result<()> {
    if r.iter().any(|v| !v.is_finite()) {
        return Err(CalibError::InvalidRotation("non-finite entries".into()));
    }
    let det = r.determinant();
    if det < 0.0 {
        return Err(CalibError::InvalidRotation(format!("determinant {det} < 0")));
    }
    let err = (r.transpose() * r - Matrix3::identity()).abs().max();
    if err > tol || (det - 1.0).abs() > tol {
        return Err(CalibError::InvalidRotation(format!(
            "orthonormality error {err:e}, determinant {det}"
        )));
    }
    Ok(())
}

/// Shepperd's method: branch on the largest of `trace` and the diagonal entries.
pub fn rotmat_to_quat(r: &Matrix3<f64>) -> Result<Quaternion> {
    check_rotation(r, ROTATION_TOLERANCE)?;
    let trace = r.trace();
    let (m00, m11, m22) = (r[(0, 0)], r[(1, 1)], r[(2, 2)]);
    let q = if trace >= m00 && trace >= m11 && trace >= m22 {
        let s = 2.0 * (1.0 + trace).sqrt();
        Quaternion::new(
            0.25 * s,
            (r[(2, 1)] - r[(1, 2)]) / s,
            (r[(0, 2)] - r[(2, 0)]) / s,
            (r[(1, 0)] - r[(0, 1)]) / s,
        )
    } else if m00 >= m11 && m00 >= m22 {
        let s = 2.0 * (1.0 + m00 - m11 - m22).sqrt();
        Quaternion::new(
            (r[(2, 1)] - r[(1, 2)]) / s,
            0.25 * s,
            (r[(0, 1)] + r[(1, 0)]) / s,
            (r[(0, 2)] + r[(2, 0)]) / s,
        )
    } else if m11 >= m22 {
        let s = 2.0 * (1.0 - m00 + m11 - m22).sqrt();
        Quaternion::new(
            (r[(0, 2)] - r[(2, 0)]) / s,
            (r[(0, 1)] + r[(1, 0)]) / s,
            0.25 * s,
            (r[(1, 2)] + r[(2, 1)]) / s,
        )
    } else {
        let s = 2.0 * (1.0 - m00 - m11 + m22).sqrt();
        Quaternion::new(
            (r[(1, 0)] - r[(0, 1)]) / s,
            (r[(0, 2)] + r[(2, 0)]) / s,
            (r[(1, 2)] + r[(2, 1)]) / s,
            0.25 * s,
        )
    };
    Ok(q.canonicalize())
}

/// `Rx(roll)·Ry(pitch)·Rz(yaw)`, angles in degrees.
pub fn euler_to_rotmat(roll_deg: f64, pitch_deg: f64, yaw_deg: f64) -> Matrix3<f64> {
    let (sa, ca) = roll_deg.to_radians().sin_cos();
    let (sb, cb) = pitch_deg.to_radians().sin_cos();
    let (sc, cc) = yaw_deg.to_radians().sin_cos();
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, ca, -sa, 0.0, sa, ca);
    let ry = Matrix3::new(cb, 0.0, sb, 0.0, 1.0, 0.0, -sb, 0.0, cb);
    let rz = Matrix3::new(cc, -sc, 0.0, sc, cc, 0.0, 0.0, 0.0, 1.0);
    rx * ry * rz
}

pub fn euler_to_quat(roll_deg: f64, pitch_deg: f64, yaw_deg: f64) -> Quaternion {
    let qx = Quaternion::from_axis_angle(Vector3::x(), roll_deg.to_radians());
    let qy = Quaternion::from_axis_angle(Vector3::y(), pitch_deg.to_radians());
    let qz = Quaternion::from_axis_angle(Vector3::z(), yaw_deg.to_radians());
    (qx * qy * qz).canonicalize()
}

fn wrap_half_open(deg: f64) -> f64 {
    // atan2 may return exactly -180; map it onto +180 so the range is (-180, 180].
    if deg <= -180.0 {
        deg + 360.0
    } else {
        deg
    }
}

pub fn rotmat_to_euler(r: &Matrix3<f64>) -> EulerAngles {
    let cos_pitch = r[(0, 0)].hypot(r[(0, 1)]);
    let pitch = r[(0, 2)].atan2(cos_pitch).to_degrees();
    if 90.0 - pitch.abs() < GIMBAL_LOCK_DEG {
        let roll = r[(2, 1)].atan2(r[(1, 1)]).to_degrees();
        return EulerAngles {
            roll: wrap_half_open(roll),
            pitch: pitch.signum() * 90.0,
            yaw: 0.0,
            gimbal_locked: true,
        };
    }
    let roll = (-r[(1, 2)]).atan2(r[(2, 2)]).to_degrees();
    let yaw = (-r[(0, 1)]).atan2(r[(0, 0)]).to_degrees();
    EulerAngles {
        roll: wrap_half_open(roll),
        pitch,
        yaw: wrap_half_open(yaw),
        gimbal_locked: false,
    }
}

pub fn quat_to_euler(q: &Quaternion) -> Result<EulerAngles> {
    Ok(rotmat_to_euler(&quat_to_rotmat(q)?))
}

/// Geodesic angle between two rotations in `[0, π]`.
///
/// Uses `2·atan2(‖Im(q1·q2⁻¹)‖, |Re(q1·q2⁻¹)|)`; the absolute value on the real part
/// makes `q` and `-q` coincide. The ratio is scale-free, so the conjugate stands in for
/// the inverse.
pub fn quat_angular_distance(q1: &Quaternion, q2: &Quaternion) -> f64 {
    // q1·q2* = (w1·w2 + v1·v2, w2·v1 − w1·v2 − v1×v2), grouped so that q2 = ±q1 cancels exactly
    let (v1, v2) = (q1.imag(), q2.imag());
    let re = q1.w * q2.w + v1.dot(&v2);
    let im = (v1 * q2.w - v2 * q1.w) - v1.cross(&v2);
    2.0 * im.norm().atan2(re.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn rodrigues(axis: Vector3<f64>, angle: f64) -> Matrix3<f64> {
        let a = axis.normalize();
        let k = Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0);
        Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
    }

    #[test]
    fn identity_quaternion_gives_identity_matrix() {
        let r = quat_to_rotmat(&Quaternion::identity()).unwrap();
        assert_abs_diff_eq!(r, Matrix3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn quarter_turn_about_z_matches_rodrigues() {
        let q = Quaternion::new(FRAC_PI_4.cos(), 0.0, 0.0, FRAC_PI_4.sin());
        let r = quat_to_rotmat(&q).unwrap();
        assert_abs_diff_eq!(r, rodrigues(Vector3::z(), FRAC_PI_2), epsilon = 1e-12);
    }

    #[test]
    fn non_unit_quaternion_rejected() {
        let err = quat_to_rotmat(&Quaternion::new(1.01, 0.0, 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, CalibError::InvalidQuaternion { .. }));
        assert!(quat_to_rotmat(&Quaternion::new(1.0005, 0.0, 0.0, 0.0)).is_ok());
    }

    #[test]
    fn half_turn_about_x_uses_stable_branch() {
        let r = rodrigues(Vector3::x(), PI);
        let q = rotmat_to_quat(&r).unwrap();
        assert_abs_diff_eq!(q.w, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q.x.abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(quat_to_rotmat(&q).unwrap(), r, epsilon = 1e-12);
    }

    #[test]
    fn reflection_rejected() {
        let r = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(matches!(
            rotmat_to_quat(&r),
            Err(CalibError::InvalidRotation(_))
        ));
        let skew = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(rotmat_to_quat(&skew).is_err());
    }

    #[test]
    fn euler_of_pure_roll() {
        let e = quat_to_euler(&Quaternion::from_axis_angle(Vector3::x(), 30f64.to_radians())).unwrap();
        assert_abs_diff_eq!(e.roll, 30.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.pitch, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.yaw, 0.0, epsilon = 1e-12);
        let e = quat_to_euler(&Quaternion::identity()).unwrap();
        assert_eq!((e.roll, e.pitch, e.yaw), (0.0, 0.0, 0.0));
    }

    #[test]
    fn gimbal_lock_pins_yaw() {
        let r = euler_to_rotmat(20.0, 90.0, 0.0);
        let e = rotmat_to_euler(&r);
        assert!(e.gimbal_locked);
        assert_eq!(e.yaw, 0.0);
        assert_abs_diff_eq!(e.pitch, 90.0, epsilon = 1e-9);
        assert_abs_diff_eq!(euler_to_rotmat(e.roll, e.pitch, e.yaw), r, epsilon = 1e-9);
    }

    #[test]
    fn euler_quat_matches_matrix_product() {
        let q = euler_to_quat(10.0, -20.0, 35.0);
        assert_abs_diff_eq!(
            quat_to_rotmat(&q).unwrap(),
            euler_to_rotmat(10.0, -20.0, 35.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn angular_distance_cases() {
        let q = euler_to_quat(3.0, 4.0, 5.0);
        assert_eq!(quat_angular_distance(&q, &q), 0.0);
        assert_eq!(quat_angular_distance(&q, &-q), 0.0);
        let qz = Quaternion::from_axis_angle(Vector3::z(), FRAC_PI_2);
        let r = quat_to_rotmat(&qz).unwrap();
        let oracle = ((r.trace() - 1.0) / 2.0).acos();
        assert_abs_diff_eq!(
            quat_angular_distance(&Quaternion::identity(), &qz),
            oracle,
            epsilon = 1e-12
        );
        // Zero real part: 180° apart.
        let qx = Quaternion::new(0.0, 1.0, 0.0, 0.0);
        assert_abs_diff_eq!(
            quat_angular_distance(&Quaternion::identity(), &qx),
            PI,
            epsilon = 1e-15
        );
    }
}
