//! Geometry invariants as plain checks, shared by the property tests and the acceptance run.

use extcalib::geometry::{
    compose_calibration, euler_to_quat, euler_to_rotmat, point_cloud_distance, project_point,
    quat_angular_distance, quat_to_euler, quat_to_rotmat, rotmat_to_euler, rotmat_to_quat,
    sample_deviation, CameraIntrinsics, DeviationRange, PointCloud, Quaternion, SE3Transform,
};
use nalgebra::Vector3;

use super::rotation_of;

pub const TOL: f64 = 1e-6;

type Check = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// quat → matrix agrees with the closed form, and matrix → quat returns ±q.
pub fn quat_roundtrip(q: &Quaternion) -> Check {
    let r = quat_to_rotmat(q).map_err(|e| e.to_string())?;
    let diff = (r - rotation_of(q)).abs().max();
    ensure(diff < TOL, || format!("matrix of {q:?} off by {diff}"))?;
    let back = rotmat_to_quat(&r).map_err(|e| e.to_string())?;
    let d = back
        .to_array()
        .iter()
        .zip(q.to_array())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        .min(back.to_array().iter().zip(q.to_array()).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max));
    ensure(d < TOL, || format!("{q:?} → {back:?}"))
}

/// Euler → matrix → Euler away from gimbal lock, and quaternion/matrix Euler paths agree.
pub fn euler_roundtrip(roll: f64, pitch: f64, yaw: f64) -> Check {
    let e = rotmat_to_euler(&euler_to_rotmat(roll, pitch, yaw));
    let d = (e.roll - roll).abs().max((e.pitch - pitch).abs()).max((e.yaw - yaw).abs());
    ensure(d < TOL, || format!("({roll}, {pitch}, {yaw}) → {e:?}"))?;
    let eq = quat_to_euler(&euler_to_quat(roll, pitch, yaw)).map_err(|e| e.to_string())?;
    let d = (eq.roll - roll).abs().max((eq.pitch - pitch).abs()).max((eq.yaw - yaw).abs());
    ensure(d < TOL, || format!("quat path ({roll}, {pitch}, {yaw}) → {eq:?}"))
}

/// Identity, symmetry, double cover, range, triangle inequality and agreement with the
/// trace formula on rotation matrices.
pub fn angular_metric(a: &Quaternion, b: &Quaternion, c: &Quaternion) -> Check {
    let d = quat_angular_distance;
    ensure(d(a, a) == 0.0, || format!("d(q, q) = {}", d(a, a)))?;
    ensure(d(a, &-*a) == 0.0, || format!("d(q, -q) = {}", d(a, &-*a)))?;
    let (ab, ba) = (d(a, b), d(b, a));
    ensure((ab - ba).abs() < TOL, || format!("asymmetric {ab} vs {ba}"))?;
    ensure((ab - d(a, &-*b)).abs() < TOL, || "sign of second argument matters".into())?;
    ensure((0.0..=std::f64::consts::PI + TOL).contains(&ab), || format!("out of range {ab}"))?;
    ensure(d(a, c) <= ab + d(b, c) + TOL, || "triangle inequality".into())?;
    let rel = rotation_of(a).transpose() * rotation_of(b);
    let cos = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    // acos loses precision near 0 and π; compare through the chord instead
    let expect = cos.acos();
    let chord = |x: f64| (x / 2.0).sin();
    ensure((chord(ab) - chord(expect)).abs() < TOL, || format!("{ab} vs trace formula {expect}"))
}

/// Inverse, composition associativity, homogeneous form and calibration recovery.
pub fn se3_algebra(t: &SE3Transform, u: &SE3Transform, v: &SE3Transform) -> Check {
    let id = SE3Transform::identity();
    ensure(t.compose(&t.inverse()).max_abs_diff(&id) < TOL, || "T·T⁻¹ ≠ I".into())?;
    ensure(t.inverse().compose(t).max_abs_diff(&id) < TOL, || "T⁻¹·T ≠ I".into())?;
    let left = t.compose(u).compose(v);
    let right = t.compose(&u.compose(v));
    ensure(left.max_abs_diff(&right) < TOL, || "composition not associative".into())?;
    let h = SE3Transform::from_homogeneous(&t.to_homogeneous()).map_err(|e| e.to_string())?;
    ensure(h.max_abs_diff(t) < TOL, || "homogeneous round trip".into())?;
    let hm = t.to_homogeneous() * u.to_homogeneous();
    let hc = SE3Transform::from_homogeneous(&hm).map_err(|e| e.to_string())?;
    ensure(hc.max_abs_diff(&t.compose(u)) < TOL, || "compose ≠ matrix product".into())?;
    // a perfect deviation estimate cancels the perturbation
    let t_init = u.compose(t);
    ensure(compose_calibration(u, &t_init).max_abs_diff(t) < TOL, || "compose_calibration".into())
}

/// Projecting then back-projecting with the returned depth recovers the point.
pub fn projection_roundtrip(p: &Vector3<f64>, t: &SE3Transform) -> Check {
    let k = CameraIntrinsics::new(718.856, 718.856, 607.1928, 185.2157).unwrap();
    let c = t.transform_point(p);
    if c.z.abs() < 1e-3 {
        return Ok(());
    }
    let proj = project_point(p, &k, t).map_err(|e| e.to_string())?;
    let back_cam = Vector3::new((proj.u - k.cx) / k.fx * proj.depth, (proj.v - k.cy) / k.fy * proj.depth, proj.depth);
    let back = t.inverse().transform_point(&back_cam);
    let err = (back - p).norm() / p.norm().max(1.0);
    ensure(err < TOL, || format!("{p:?} reprojects to {back:?}"))
}

/// Point-cloud distance vanishes at the truth, is nonnegative and equals |t| for pure translations.
pub fn cloud_distance(t: &SE3Transform, shift: &Vector3<f64>, points: &[Vector3<f64>]) -> Check {
    let pc = PointCloud::new(points.to_vec(), vec![0.0; points.len()]).unwrap();
    let zero = point_cloud_distance(t, t, &pc).map_err(|e| e.to_string())?;
    ensure(zero.abs() < TOL, || format!("distance at truth {zero}"))?;
    let moved = SE3Transform::from_translation(*shift).compose(t);
    // T_gt⁻¹·(S·T_gt) moves every point by R_gtᵀ·s, whose norm is |s|
    let d = point_cloud_distance(t, &moved, &pc).map_err(|e| e.to_string())?;
    ensure((d - shift.norm()).abs() < TOL, || format!("pure shift {} gave {d}", shift.norm()))
}

/// Sampled deviations respect the per-axis bounds.
pub fn deviation_bounds(range: &DeviationRange, seed: u64) -> Check {
    let dev = sample_deviation(range, seed);
    let t = dev.translation();
    ensure(t.iter().all(|x| x.abs() <= range.max_translation + 1e-12), || format!("translation {t:?} exceeds {range:?}"))?;
    let e = rotmat_to_euler(dev.rotation());
    let worst = e.roll.abs().max(e.pitch.abs()).max(e.yaw.abs());
    ensure(worst <= range.max_rotation + TOL, || format!("rotation {e:?} exceeds {range:?}"))?;
    ensure(sample_deviation(range, seed) == dev, || "sampling not deterministic".into())
}
