//! Procedural desk-scale scenes standing in for KITTI frames.
//!
//! A scene is a bounded ground plane, a back wall at the far end of the frustum
//! and a handful of yawed boxes resting on the ground. The camera image is ray
//! cast from the camera origin with Lambertian shading over checker-textured
//! albedo; the point cloud is ray cast from the LiDAR origin with a
//! Velodyne-like elevation band, and point intensity is the surface albedo.
//! Sky pixels are pure black, surfaces never are.

use image::RgbImage;
use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RawFrame;
use crate::error::Result;
use crate::geometry::{euler_to_rotmat, CameraIntrinsics, PointCloud, SE3Transform};
use crate::seed;

/// Generator parameters. Changing any default changes every generated scene, so bump
/// [`SynthConfig::VERSION`] alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub version: u32,
    /// Raw image `(width, height)`.
    pub image_size: (usize, usize),
    pub intrinsics: CameraIntrinsics,
    /// Ground-truth LiDAR→camera extrinsic.
    pub t_lc: SE3Transform,
    pub camera_height: f64,
    /// Far end of the scene frustum (m); the back wall sits here.
    pub depth_max: f64,
    pub wall_height: f64,
    pub min_boxes: usize,
    pub max_boxes: usize,
    /// LiDAR elevation band (deg).
    pub lidar_elevation: (f64, f64),
    /// LiDAR azimuth half-width around the forward axis (deg).
    pub lidar_azimuth: f64,
    pub lidar_max_range: f64,
    /// Half-width of uniform intensity noise.
    pub intensity_noise: f64,
}

impl SynthConfig {
    pub const VERSION: u32 = 1;
}

/// KITTI-like axes: LiDAR x forward / y left / z up, camera x right / y down / z forward.
pub fn kitti_like_extrinsic() -> SE3Transform {
    let axes = nalgebra::Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0);
    SE3Transform::new(
        euler_to_rotmat(0.4, -0.3, 0.2) * axes,
        Vector3::new(-0.012, -0.054, -0.292),
    )
    .expect("valid rotation")
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            version: Self::VERSION,
            image_size: (620, 188),
            intrinsics: CameraIntrinsics {
                fx: 359.428,
                fy: 359.428,
                cx: 303.596,
                cy: 92.608,
            },
            t_lc: kitti_like_extrinsic(),
            camera_height: 1.65,
            depth_max: 30.0,
            wall_height: 7.0,
            min_boxes: 4,
            max_boxes: 10,
            lidar_elevation: (-24.9, 2.0),
            lidar_azimuth: 50.0,
            lidar_max_range: 80.0,
            intensity_noise: 0.03,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Material {
    color: [f64; 3],
    period: f64,
    contrast: f64,
}

impl Material {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        Self {
            color: [
                rng.random_range(0.25..1.0),
                rng.random_range(0.25..1.0),
                rng.random_range(0.25..1.0),
            ],
            period: rng.random_range(0.3..1.5),
            contrast: rng.random_range(0.2..0.45),
        }
    }

    /// Checker-modulated albedo at surface coordinates `uv` (m).
    fn albedo(&self, uv: Vector2<f64>) -> [f64; 3] {
        let cell = (uv.x / self.period).floor() as i64 + (uv.y / self.period).floor() as i64;
        let f = if cell.rem_euclid(2) == 0 {
            1.0
        } else {
            1.0 - 2.0 * self.contrast
        };
        self.color.map(|c| c * f)
    }
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    /// `y = height`, bounded in x and z.
    Ground { height: f64, x_half: f64, z_max: f64 },
    /// `z = depth`, bounded in x and y.
    Wall { depth: f64, x_half: f64, y_top: f64, y_bottom: f64 },
    /// Box yawed about the camera y axis.
    Cuboid { center: Vector3<f64>, half: Vector3<f64>, yaw: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Surface {
    shape: Shape,
    material: Material,
}

struct Hit {
    t: f64,
    normal: Vector3<f64>,
    albedo: [f64; 3],
}

impl Surface {
    fn intersect(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<Hit> {
        const EPS: f64 = 1e-9;
        match self.shape {
            Shape::Ground { height, x_half, z_max } => {
                if d.y.abs() < EPS {
                    return None;
                }
                let t = (height - o.y) / d.y;
                let p = o + d * t;
                (t > EPS && p.x.abs() <= x_half && p.z >= 0.0 && p.z <= z_max).then(|| Hit {
                    t,
                    normal: Vector3::new(0.0, -1.0, 0.0),
                    albedo: self.material.albedo(Vector2::new(p.x, p.z)),
                })
            }
            Shape::Wall { depth, x_half, y_top, y_bottom } => {
                if d.z.abs() < EPS {
                    return None;
                }
                let t = (depth - o.z) / d.z;
                let p = o + d * t;
                (t > EPS && p.x.abs() <= x_half && p.y >= y_top && p.y <= y_bottom).then(|| Hit {
                    t,
                    normal: Vector3::new(0.0, 0.0, -1.0),
                    albedo: self.material.albedo(Vector2::new(p.x, p.y)),
                })
            }
            Shape::Cuboid { center, half, yaw } => {
                let (s, c) = yaw.sin_cos();
                // world → box frame: rotate by -yaw about y
                let to_local = |v: Vector3<f64>| Vector3::new(c * v.x - s * v.z, v.y, s * v.x + c * v.z);
                let lo = to_local(o - center);
                let ld = to_local(*d);
                let (mut tmin, mut tmax) = (f64::NEG_INFINITY, f64::INFINITY);
                let mut axis = 0;
                for a in 0..3 {
                    if ld[a].abs() < EPS {
                        if lo[a].abs() > half[a] {
                            return None;
                        }
                        continue;
                    }
                    let t1 = (-half[a] - lo[a]) / ld[a];
                    let t2 = (half[a] - lo[a]) / ld[a];
                    let (near, far) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
                    if near > tmin {
                        tmin = near;
                        axis = a;
                    }
                    tmax = tmax.min(far);
                }
                if tmin > tmax || tmin <= EPS {
                    return None;
                }
                let lp = lo + ld * tmin;
                let mut ln = Vector3::zeros();
                ln[axis] = lp[axis].signum();
                // box frame → world: rotate by +yaw
                let normal = Vector3::new(c * ln.x + s * ln.z, ln.y, -s * ln.x + c * ln.z);
                let uv = match axis {
                    0 => Vector2::new(lp.z, lp.y),
                    1 => Vector2::new(lp.x, lp.z),
                    _ => Vector2::new(lp.x, lp.y),
                };
                Some(Hit {
                    t: tmin,
                    normal,
                    albedo: self.material.albedo(uv),
                })
            }
        }
    }
}

/// Scene geometry in the camera frame.
#[derive(Debug, Clone)]
pub struct SynthScene {
    surfaces: Vec<Surface>,
}

impl SynthScene {
    pub fn generate(cfg: &SynthConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, 0));
        let x_half = cfg.depth_max * 2.0;
        let mut surfaces = vec![
            Surface {
                shape: Shape::Ground {
                    height: cfg.camera_height,
                    x_half,
                    z_max: cfg.depth_max,
                },
                material: Material {
                    color: [0.45, 0.45, 0.42],
                    period: rng.random_range(0.8..2.0),
                    contrast: 0.15,
                },
            },
            Surface {
                shape: Shape::Wall {
                    depth: cfg.depth_max,
                    x_half,
                    y_top: cfg.camera_height - cfg.wall_height,
                    y_bottom: cfg.camera_height,
                },
                material: Material::random(&mut rng),
            },
        ];
        let (w, _) = cfg.image_size;
        let tan_half = (w as f64 / 2.0) / cfg.intrinsics.fx;
        let n_boxes = rng.random_range(cfg.min_boxes..=cfg.max_boxes.max(cfg.min_boxes));
        for _ in 0..n_boxes {
            let z = rng.random_range(5.0..cfg.depth_max - 3.0);
            let reach = 0.9 * z * tan_half;
            let half = Vector3::new(
                rng.random_range(0.25..1.5),
                rng.random_range(0.25..1.75),
                rng.random_range(0.25..1.5),
            );
            surfaces.push(Surface {
                shape: Shape::Cuboid {
                    center: Vector3::new(rng.random_range(-reach..reach), cfg.camera_height - half.y, z),
                    half,
                    yaw: rng.random_range(-0.8..0.8),
                },
                material: Material::random(&mut rng),
            });
        }
        Self { surfaces }
    }

    fn cast(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<Hit> {
        self.surfaces
            .iter()
            .filter_map(|s| s.intersect(o, d))
            .min_by(|a, b| a.t.total_cmp(&b.t))
    }

    /// Shaded RGB from the camera origin; sky is black.
    pub fn render_image(&self, cfg: &SynthConfig) -> RgbImage {
        let k = &cfg.intrinsics;
        let light = Vector3::new(0.3, -1.0, -0.4).normalize();
        let origin = Vector3::zeros();
        RgbImage::from_fn(cfg.image_size.0 as u32, cfg.image_size.1 as u32, |x, y| {
            let d = Vector3::new((x as f64 - k.cx) / k.fx, (y as f64 - k.cy) / k.fy, 1.0).normalize();
            match self.cast(&origin, &d) {
                None => image::Rgb([0, 0, 0]),
                Some(hit) => {
                    let shade = 0.3 + 0.7 * hit.normal.dot(&light).max(0.0);
                    image::Rgb(hit.albedo.map(|a| ((a * shade).clamp(0.0, 1.0) * 255.0).round().max(1.0) as u8))
                }
            }
        })
    }

    /// `n_points` returns in the LiDAR frame.
    pub fn scan(&self, cfg: &SynthConfig, n_points: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, 1));
        let r_lc = cfg.t_lc.rotation();
        let origin = *cfg.t_lc.translation();
        let lidar_from_cam = cfg.t_lc.inverse();
        let mut points = Vec::with_capacity(n_points);
        let mut intensity = Vec::with_capacity(n_points);
        let max_attempts = 100 * n_points.max(1);
        for _ in 0..max_attempts {
            if points.len() == n_points {
                break;
            }
            let az = rng.random_range(-cfg.lidar_azimuth..cfg.lidar_azimuth).to_radians();
            let el = rng
                .random_range(cfg.lidar_elevation.0..cfg.lidar_elevation.1)
                .to_radians();
            let noise = rng.random_range(-cfg.intensity_noise..=cfg.intensity_noise);
            let d_lidar = Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
            let d = r_lc * d_lidar;
            let Some(hit) = self.cast(&origin, &d) else { continue };
            if hit.t > cfg.lidar_max_range {
                continue;
            }
            let p_cam = origin + d * hit.t;
            points.push(lidar_from_cam.transform_point(&p_cam));
            let albedo = (hit.albedo[0] + hit.albedo[1] + hit.albedo[2]) / 3.0;
            intensity.push((albedo + noise).clamp(0.0, 1.0));
        }
        PointCloud::new(points, intensity).expect("finite synthetic returns")
    }
}

/// One synthetic frame: RGB image, LiDAR scan, intrinsics and ground-truth extrinsic.
pub fn synth_scene(cfg: &SynthConfig, seed: u64, n_points: usize) -> Result<RawFrame> {
    let scene = SynthScene::generate(cfg, seed);
    Ok(RawFrame {
        name: format!("synth-{seed}"),
        image: scene.render_image(cfg),
        cloud: scene.scan(cfg, n_points, seed),
        intrinsics: cfg.intrinsics,
        t_lc: cfg.t_lc,
    })
}
