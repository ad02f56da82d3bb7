//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use extcalib::dataio::{synth_scene, PreparedFrame, PreprocessConfig, SynthConfig};
use extcalib::geometry::{CameraIntrinsics, PointCloud, Quaternion, SE3Transform};
use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub mod invariants;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

pub fn kitti_fixture_calib() -> PathBuf {
    fixture_dir().join("kitti/sequences/00/calib.txt")
}

/// Uniform on the 3-sphere (normalized Gaussian 4-vector).
pub fn random_quaternion(rng: &mut ChaCha8Rng) -> Quaternion {
    loop {
        let v: [f64; 4] = std::array::from_fn(|_| gaussian(rng));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return Quaternion::from_array(v.map(|x| x / n));
        }
    }
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Rotation from a unit quaternion, written out independently of the library.
pub fn rotation_of(q: &Quaternion) -> Matrix3<f64> {
    let [w, x, y, z] = q.to_array();
    Matrix3::new(
        w * w + x * x - y * y - z * z,
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        w * w - x * x + y * y - z * z,
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        w * w - x * x - y * y + z * z,
    )
}

pub fn random_transform(rng: &mut ChaCha8Rng, max_t: f64) -> SE3Transform {
    let t = Vector3::new(
        rng.random_range(-max_t..max_t),
        rng.random_range(-max_t..max_t),
        rng.random_range(-max_t..max_t),
    );
    SE3Transform::new_orthonormalized(rotation_of(&random_quaternion(rng)), t).unwrap()
}

/// Reference z-buffer raster: every pixel scans the whole cloud and keeps the nearest
/// point that lands on it (earliest on ties).
pub fn raster_oracle(
    pc: &PointCloud,
    k: &CameraIntrinsics,
    t: &SE3Transform,
    width: usize,
    height: usize,
    depth_norm: f64,
) -> (Vec<f32>, Vec<f32>, Vec<bool>) {
    let n = width * height;
    let (mut depth, mut intensity, mut mask) = (vec![0f32; n], vec![0f32; n], vec![false; n]);
    for y in 0..height {
        for x in 0..width {
            let mut best: Option<(f64, f64)> = None;
            for (p, i) in pc.iter() {
                let c = t.rotation() * p + t.translation();
                if c.z.abs() < 1e-9 || c.z <= 0.0 {
                    continue;
                }
                let u = (k.fx * c.x / c.z + k.cx).round();
                let v = (k.fy * c.y / c.z + k.cy).round();
                if u == x as f64 && v == y as f64 && best.is_none_or(|(d, _)| c.z < d) {
                    best = Some((c.z, i));
                }
            }
            if let Some((d, i)) = best {
                let at = y * width + x;
                depth[at] = (d / depth_norm).clamp(0.0, 1.0) as f32;
                intensity[at] = i as f32;
                mask[at] = true;
            }
        }
    }
    (depth, intensity, mask)
}

/// Loop reference for windowed correlation on one image: `q`, `k` are `(C, H, W)` row-major,
/// the result is `(heads·(2d+1)², H, W)`.
pub fn correlation_oracle(q: &[f64], k: &[f64], c: usize, h: usize, w: usize, heads: usize, d: usize) -> Vec<f64> {
    let side = 2 * d + 1;
    let dh = c / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut out = vec![0.0; heads * side * side * h * w];
    for head in 0..heads {
        for oy in 0..side {
            for ox in 0..side {
                for y in 0..h {
                    for x in 0..w {
                        let (ky, kx) = (y as isize + oy as isize - d as isize, x as isize + ox as isize - d as isize);
                        if ky < 0 || kx < 0 || ky >= h as isize || kx >= w as isize {
                            continue;
                        }
                        let mut acc = 0.0;
                        for ch in head * dh..(head + 1) * dh {
                            acc += q[(ch * h + y) * w + x] * k[(ch * h + ky as usize) * w + kx as usize];
                        }
                        let channel = head * side * side + oy * side + ox;
                        out[(channel * h + y) * w + x] = acc * scale;
                    }
                }
            }
        }
    }
    out
}

/// `|a − b| / max(|a|, |b|)`, or the absolute difference when both are below `floor`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m < floor {
        (a - b).abs()
    } else {
        (a - b).abs() / m
    }
}

pub fn synthetic_frames(seeds: impl IntoIterator<Item = u64>, target: (usize, usize)) -> Vec<PreparedFrame> {
    let pre = PreprocessConfig::synthetic(target);
    seeds
        .into_iter()
        .map(|s| PreparedFrame::new(&synth_scene(&SynthConfig::default(), s, 20000).unwrap(), &pre).unwrap())
        .collect()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
