//! Training objective: weighted smooth-L1 translation, quaternion angular
//! distance and mean point displacement.
//!
//! Plain `f64` functions give reference values; [`batch_loss`] builds the same
//! quantities as differentiable tensors for training.

pub mod ops;

use candle_core::{DType, Device, Tensor, D};
use nalgebra::{Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::dataio::CalibrationSample;
use crate::error::{CalibError, Result};
use crate::geometry::{point_cloud_distance, quat_angular_distance, quat_to_rotmat, PointCloud, Quaternion, SE3Transform};
use crate::network::{PoseOutput, PosePrediction};

pub use ops::{quat_angle, row_norm};

/// Smooth-L1 threshold.
pub const SMOOTH_L1_BETA: f64 = 1.0;
/// Points kept per sample for the point-cloud term.
pub const POINTCLOUD_CAP: usize = 4096;

/// Relative weights of the three loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_t: f64,
    pub lambda_r: f64,
    pub lambda_p: f64,
}

impl Default for LossWeights {
    /// `(1, 1, 0.1)`: a tunable default, balancing meter- and radian-scale terms.
    fn default() -> Self {
        Self {
            lambda_t: 1.0,
            lambda_r: 1.0,
            lambda_p: 0.1,
        }
    }
}

impl LossWeights {
    pub fn new(lambda_t: f64, lambda_r: f64, lambda_p: f64) -> Result<Self> {
        let w = Self {
            lambda_t,
            lambda_r,
            lambda_p,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let ws = [self.lambda_t, self.lambda_r, self.lambda_p];
        if ws.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || ws.iter().all(|&w| w == 0.0) {
            return Err(CalibError::Config(format!(
                "loss weights must be non-negative with at least one positive: {ws:?}"
            )));
        }
        Ok(())
    }

    pub fn combine(&self, translation: f64, rotation: f64, pointcloud: f64) -> LossBreakdown {
        LossBreakdown {
            total: self.lambda_t * translation + self.lambda_r * rotation + self.lambda_p * pointcloud,
            translation,
            rotation,
            pointcloud,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub translation: f64,
    pub rotation: f64,
    pub pointcloud: f64,
}

pub fn smooth_l1(x: f64, beta: f64) -> f64 {
    let a = x.abs();
    if a < beta {
        0.5 * a * a / beta
    } else {
        a - 0.5 * beta
    }
}

/// Smooth-L1 (β = 1) summed over the three components.
pub fn translation_loss(t_gt: &Vector3<f64>, t_pred: &Vector3<f64>) -> f64 {
    (t_pred - t_gt).iter().map(|d| smooth_l1(*d, SMOOTH_L1_BETA)).sum()
}

/// Angular distance in radians; sign-invariant.
pub fn rotation_loss(q_gt: &Quaternion, q_pred: &Quaternion) -> f64 {
    quat_angular_distance(q_gt, q_pred)
}

pub fn pointcloud_loss(t_gt: &SE3Transform, t_pred: &SE3Transform, pc: &PointCloud) -> Result<f64> {
    point_cloud_distance(t_gt, t_pred, pc)
}

/// All three terms against `T_gt = ΔT`, using at most `cap` points chosen with `seed`.
pub fn total_loss_with(
    pred: &PosePrediction,
    sample: &CalibrationSample,
    w: &LossWeights,
    cap: usize,
    seed: u64,
) -> Result<LossBreakdown> {
    let t_pred = pred.transform()?;
    let t_gt = &sample.t_gt;
    let lt = translation_loss(t_gt.translation(), &pred.translation);
    let lr = rotation_loss(&t_gt.quaternion(), &pred.rotation.normalize());
    // route the truth through the quaternion parameterization too, so an exact prediction scores 0
    let t_gt_q = PosePrediction::from_transform(t_gt).transform()?;
    let lp = pointcloud_loss(&t_gt_q, &t_pred, &sample.cloud.subsample(cap, seed))?;
    Ok(w.combine(lt, lr, lp))
}

pub fn total_loss(pred: &PosePrediction, sample: &CalibrationSample, w: &LossWeights) -> Result<LossBreakdown> {
    total_loss_with(pred, sample, w, POINTCLOUD_CAP, 0)
}

/// Ground truth for one batch element, in the form the tensor loss consumes.
#[derive(Debug, Clone)]
pub struct LossTarget {
    pub t_gt: SE3Transform,
    pub points: Vec<Vector3<f64>>,
}

impl LossTarget {
    pub fn new(t_gt: SE3Transform, cloud: &PointCloud) -> Result<Self> {
        if cloud.is_empty() {
            return Err(CalibError::EmptyInput("point cloud"));
        }
        Ok(Self {
            t_gt,
            points: cloud.points().to_vec(),
        })
    }

    pub fn from_sample(sample: &CalibrationSample, cap: usize, seed: u64) -> Result<Self> {
        Self::new(sample.t_gt, &sample.cloud.subsample(cap, seed))
    }
}

/// Matrix `M` with `M·p = q_gt ⊗ conj(p)` for quaternions as `[w, x, y, z]` columns.
fn error_matrix(g: &Quaternion) -> Matrix4<f64> {
    let left = Matrix4::new(
        g.w, -g.x, -g.y, -g.z, //
        g.x, g.w, -g.z, g.y, //
        g.y, g.z, g.w, -g.x, //
        g.z, -g.y, g.x, g.w,
    );
    left * Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, -1.0, -1.0, -1.0))
}

fn mat_tensor<const R: usize, const C: usize>(
    m: &nalgebra::SMatrix<f64, R, C>,
    dtype: DType,
    dev: &Device,
) -> candle_core::Result<Tensor> {
    let rows: Vec<f64> = (0..R).flat_map(|i| (0..C).map(move |j| m[(i, j)])).collect();
    Tensor::from_vec(rows, (R, C), dev)?.to_dtype(dtype)
}

/// Rotation matrices `(B, 3, 3)` of unit quaternions `(B, 4)`.
pub fn quat_to_rotmat_tensor(q: &Tensor) -> candle_core::Result<Tensor> {
    let b = q.dim(0)?;
    let c = |i| q.narrow(1, i, 1);
    let (w, x, y, z) = (c(0)?, c(1)?, c(2)?, c(3)?);
    let one = Tensor::ones_like(&w)?;
    let two = |a: &Tensor, b: &Tensor| (a * b)?.affine(2.0, 0.0);
    let entries = [
        (&one - (two(&y, &y)? + two(&z, &z)?)?)?,
        (two(&x, &y)? - two(&w, &z)?)?,
        (two(&x, &z)? + two(&w, &y)?)?,
        (two(&x, &y)? + two(&w, &z)?)?,
        (&one - (two(&x, &x)? + two(&z, &z)?)?)?,
        (two(&y, &z)? - two(&w, &x)?)?,
        (two(&x, &z)? - two(&w, &y)?)?,
        (two(&y, &z)? + two(&w, &x)?)?,
        (&one - (two(&x, &x)? + two(&y, &y)?)?)?,
    ];
    Tensor::cat(&entries, 1)?.reshape((b, 3, 3))
}

/// Differentiable batch loss (mean over the batch) plus the detached per-term values.
///
/// `out.rotation` need not be normalized; it is normalized here.
pub fn batch_loss(out: &PoseOutput, targets: &[LossTarget], w: &LossWeights) -> Result<(Tensor, LossBreakdown)> {
    let b = out.translation.dim(0)?;
    if b != targets.len() || b == 0 {
        return Err(CalibError::Dimension(format!("{b} predictions for {} targets", targets.len())));
    }
    let dtype = out.translation.dtype();
    let dev = out.translation.device().clone();
    let t_pred = &out.translation;
    let q_pred = out
        .rotation
        .broadcast_div(&out.rotation.sqr()?.sum_keepdim(D::Minus1)?.sqrt()?)?;

    let t_gt_flat: Vec<f64> = targets.iter().flat_map(|t| t.t_gt.translation().iter().copied().collect::<Vec<_>>()).collect();
    let t_gt = Tensor::from_vec(t_gt_flat, (b, 3), &dev)?.to_dtype(dtype)?;
    let diff = (t_pred - &t_gt)?;
    let abs = diff.abs()?;
    // smooth-L1 via min(|x|, β): 0.5·m²/β + (|x| − m)
    let m = abs.clamp(0.0, SMOOTH_L1_BETA)?;
    let sl1 = ((m.sqr()? * (0.5 / SMOOTH_L1_BETA))? + (&abs - &m)?)?;
    let lt = sl1.sum(1)?;

    let mats = targets
        .iter()
        .map(|t| mat_tensor(&error_matrix(&t.t_gt.quaternion()), dtype, &dev))
        .collect::<candle_core::Result<Vec<_>>>()?;
    let err_q = Tensor::stack(&mats, 0)?.matmul(&q_pred.unsqueeze(2)?)?.squeeze(2)?;
    let lr = quat_angle(&err_q)?;

    let r_pred = quat_to_rotmat_tensor(&q_pred)?;
    let mut lp_rows = Vec::with_capacity(b);
    for (i, tgt) in targets.iter().enumerate() {
        if tgt.points.is_empty() {
            return Err(CalibError::EmptyInput("point cloud"));
        }
        let n = tgt.points.len();
        let flat: Vec<f64> = tgt.points.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
        let pts = Tensor::from_vec(flat, (n, 3), &dev)?.to_dtype(dtype)?;
        let r_gt = mat_tensor(&quat_to_rotmat(&tgt.t_gt.quaternion())?, dtype, &dev)?;
        // ‖T_gt⁻¹·T_pred·p − p‖ = ‖(R_pred − R_gt)·p + t_pred − t_gt‖
        let dr = (r_pred.get(i)? - r_gt)?;
        let moved = pts.matmul(&dr.t()?)?.broadcast_add(&diff.get(i)?.unsqueeze(0)?)?;
        lp_rows.push(row_norm(&moved)?.mean(0)?);
    }
    let lp = Tensor::stack(&lp_rows, 0)?;

    let per_sample = ((lt.affine(w.lambda_t, 0.0)? + lr.affine(w.lambda_r, 0.0)?)? + lp.affine(w.lambda_p, 0.0)?)?;
    let total = per_sample.mean(0)?;
    let scalar = |t: &Tensor| -> Result<f64> { Ok(t.mean(0)?.to_dtype(DType::F64)?.to_scalar::<f64>()?) };
    let breakdown = w.combine(scalar(&lt)?, scalar(&lr)?, scalar(&lp)?);
    Ok((total, breakdown))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::euler_to_quat;
    use candle_core::Var;

    #[test]
    fn smooth_l1_branches() {
        // quadratic branch: 0.5²/2; linear branch: 2 − 0.5
        let z = Vector3::zeros();
        assert_eq!(translation_loss(&z, &Vector3::new(0.5, 0.0, 0.0)), 0.125);
        assert_eq!(translation_loss(&z, &Vector3::new(2.0, 0.0, 0.0)), 1.5);
        assert_eq!(translation_loss(&z, &z), 0.0);
    }

    #[test]
    fn error_matrix_matches_hamilton_product() {
        let g = euler_to_quat(10.0, -20.0, 30.0);
        let p = euler_to_quat(-3.0, 7.0, 1.0);
        let e = g * p.conjugate();
        let v = error_matrix(&g) * nalgebra::Vector4::new(p.w, p.x, p.y, p.z);
        for (a, b) in v.iter().zip(e.to_array()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn weights_validation() {
        assert!(LossWeights::new(0.0, 0.0, 0.0).is_err());
        assert!(LossWeights::new(-1.0, 1.0, 0.0).is_err());
        LossWeights::new(1.0, 0.0, 0.0).unwrap();
    }

    #[test]
    fn tensor_loss_matches_reference() {
        let dev = Device::Cpu;
        let t_gt = SE3Transform::from_quat_translation(&euler_to_quat(2.0, -1.0, 3.0), Vector3::new(0.1, -0.2, 0.05)).unwrap();
        let pts: Vec<_> = (0..20).map(|i| Vector3::new(i as f64 * 0.3 - 3.0, 1.0 + (i % 3) as f64, 5.0 + i as f64)).collect();
        let cloud = PointCloud::new(pts, vec![0.0; 20]).unwrap();
        let q = euler_to_quat(1.0, 0.5, 2.0);
        let tp = Vector3::new(0.3, 0.1, -1.4);
        let out = PoseOutput {
            translation: Var::new(&[[tp.x, tp.y, tp.z]], &dev).unwrap().as_tensor().clone(),
            rotation: Tensor::new(&[[q.w * 2.0, q.x * 2.0, q.y * 2.0, q.z * 2.0]], &dev).unwrap(),
        };
        let w = LossWeights::new(1.0, 1.0, 0.5).unwrap();
        let (total, parts) = batch_loss(&out, &[LossTarget::new(t_gt, &cloud).unwrap()], &w).unwrap();
        let t_pred = SE3Transform::from_quat_translation(&q, tp).unwrap();
        let lt = translation_loss(t_gt.translation(), &tp);
        let lr = rotation_loss(&t_gt.quaternion(), &q);
        let lp = pointcloud_loss(&t_gt, &t_pred, &cloud).unwrap();
        assert!((parts.translation - lt).abs() < 1e-12);
        assert!((parts.rotation - lr).abs() < 1e-12);
        assert!((parts.pointcloud - lp).abs() < 1e-12);
        let tv = total.to_scalar::<f64>().unwrap();
        assert!((tv - (lt + lr + 0.5 * lp)).abs() < 1e-12);
    }
}
