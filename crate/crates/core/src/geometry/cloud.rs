use nalgebra::Vector3;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::SE3Transform;
use crate::error::{CalibError, Result};

/// LiDAR points in meters with per-point intensity in `[0, 1]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Vector3<f64>>,
    intensity: Vec<f64>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>, intensity: Vec<f64>) -> Result<Self> {
        if points.len() != intensity.len() {
            return Err(CalibError::Dimension(format!(
                "{} points but {} intensities",
                points.len(),
                intensity.len()
            )));
        }
        let finite = points.iter().all(|p| p.iter().all(|v| v.is_finite()))
            && intensity.iter().all(|i| i.is_finite());
        if !finite {
            return Err(CalibError::Dimension("non-finite point cloud values".into()));
        }
        Ok(Self { points, intensity })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vector3<f64>, f64)> {
        self.points.iter().zip(self.intensity.iter().copied())
    }

    pub fn transformed(&self, t: &SE3Transform) -> Self {
        Self {
            points: self.points.iter().map(|p| t.transform_point(p)).collect(),
            intensity: self.intensity.clone(),
        }
    }

    /// At most `cap` points chosen without replacement, order preserved; deterministic in `seed`.
    pub fn subsample(&self, cap: usize, seed: u64) -> Self {
        if self.len() <= cap {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample(&mut rng, self.len(), cap).into_vec();
        idx.sort_unstable();
        Self {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            intensity: idx.iter().map(|&i| self.intensity[i]).collect(),
        }
    }
}

/// Mean displacement `(1/N)·Σ‖T_gt⁻¹·T_pred·p − p‖` in meters.
///
/// Evaluated as `‖(R_pred − R_gt)·p + t_pred − t_gt‖`, the same norm rotated by `R_gtᵀ`,
/// which is exactly zero when the two transforms coincide.
pub fn point_cloud_distance(t_gt: &SE3Transform, t_pred: &SE3Transform, pc: &PointCloud) -> Result<f64> {
    if pc.is_empty() {
        return Err(CalibError::EmptyInput("point cloud"));
    }
    let dr = t_pred.rotation() - t_gt.rotation();
    let dt = t_pred.translation() - t_gt.translation();
    let sum: f64 = pc.points().iter().map(|p| (dr * p + dt).norm()).sum();
    Ok(sum / pc.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud() -> PointCloud {
        PointCloud::new(
            vec![
                Vector3::new(1.0, 2.0, 3.0),
                Vector3::new(-4.0, 0.5, 10.0),
                Vector3::new(0.0, 0.0, 1.0),
            ],
            vec![0.1, 0.2, 0.3],
        )
        .unwrap()
    }

    #[test]
    fn zero_at_truth_and_pure_translation() {
        let t = SE3Transform::from_translation(Vector3::new(0.1, 0.0, 0.0));
        assert_eq!(point_cloud_distance(&t, &t, &cloud()).unwrap(), 0.0);
        let d = point_cloud_distance(&SE3Transform::identity(), &t, &cloud()).unwrap();
        assert!((d - 0.1).abs() < 1e-15);
    }

    #[test]
    fn empty_cloud_rejected() {
        let t = SE3Transform::identity();
        assert!(matches!(
            point_cloud_distance(&t, &t, &PointCloud::empty()),
            Err(CalibError::EmptyInput(_))
        ));
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(PointCloud::new(vec![Vector3::zeros()], vec![]).is_err());
        assert!(PointCloud::new(vec![Vector3::new(f64::NAN, 0.0, 0.0)], vec![0.0]).is_err());
    }

    #[test]
    fn subsample_is_deterministic() {
        let pts: Vec<_> = (0..100).map(|i| Vector3::new(i as f64, 0.0, 1.0)).collect();
        let pc = PointCloud::new(pts, vec![0.5; 100]).unwrap();
        let a = pc.subsample(10, 3);
        assert_eq!(a.len(), 10);
        assert_eq!(a, pc.subsample(10, 3));
        assert_eq!(pc.subsample(200, 3), pc);
    }
}
