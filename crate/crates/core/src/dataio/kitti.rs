//! KITTI odometry layout:
//!
//! ```text
//! sequences/<NN>/velodyne/<FFFFFF>.bin   little-endian f32 (x, y, z, reflectance)
//! sequences/<NN>/image_2/<FFFFFF>.png
//! sequences/<NN>/calib.txt               rows "P2:" and "Tr:", 12 decimals each
//! ```

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Matrix3x4, Vector3};

use super::RawFrame;
use crate::error::{CalibError, Result};
use crate::geometry::{CameraIntrinsics, PointCloud, SE3Transform};

const RECORD_BYTES: usize = 16;

pub fn load_kitti_cloud(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|e| CalibError::io(path, e))?;
    decode_kitti_cloud(&bytes).map_err(|reason| CalibError::MalformedFile {
        path: path.to_path_buf(),
        reason,
    })
}

pub fn decode_kitti_cloud(bytes: &[u8]) -> std::result::Result<PointCloud, String> {
    if bytes.len() % RECORD_BYTES != 0 {
        return Err(format!(
            "size {} is not a multiple of {RECORD_BYTES}",
            bytes.len()
        ));
    }
    let n = bytes.len() / RECORD_BYTES;
    let mut points = Vec::with_capacity(n);
    let mut intensity = Vec::with_capacity(n);
    for rec in bytes.chunks_exact(RECORD_BYTES) {
        let f = |i: usize| f32::from_le_bytes(rec[4 * i..4 * i + 4].try_into().unwrap()) as f64;
        points.push(Vector3::new(f(0), f(1), f(2)));
        intensity.push(f(3));
    }
    PointCloud::new(points, intensity).map_err(|e| e.to_string())
}

pub fn encode_kitti_cloud(pc: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(pc.len() * RECORD_BYTES);
    for (p, i) in pc.iter() {
        for v in [p.x, p.y, p.z, i] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn write_kitti_cloud(path: &Path, pc: &PointCloud) -> Result<()> {
    fs::write(path, encode_kitti_cloud(pc)).map_err(|e| CalibError::io(path, e))
}

fn parse_rows(text: &str) -> HashMap<String, Vec<f64>> {
    text.lines()
        .filter_map(|line| {
            let (key, rest) = line.split_once(':')?;
            let vals: std::result::Result<Vec<f64>, _> =
                rest.split_whitespace().map(str::parse::<f64>).collect();
            Some((key.trim().to_string(), vals.ok()?))
        })
        .collect()
}

fn row_3x4(rows: &HashMap<String, Vec<f64>>, key: &str) -> std::result::Result<Matrix3x4<f64>, String> {
    let vals = rows.get(key).ok_or_else(|| format!("missing {key}: row"))?;
    if vals.len() != 12 {
        return Err(format!("{key}: expected 12 values, found {}", vals.len()));
    }
    Ok(Matrix3x4::from_row_slice(vals))
}

/// Intrinsics of camera 2 and the velodyne→rectified-camera-2 transform.
///
/// `P2 = K·[I | b]`; the baseline `b = K⁻¹·P2[:, 3]` is folded into `Tr`, giving
/// `T_LC = [I | b] · Tr`.
pub fn parse_kitti_calib(text: &str) -> std::result::Result<(CameraIntrinsics, SE3Transform), String> {
    let rows = parse_rows(text);
    let p2 = row_3x4(&rows, "P2")?;
    let tr = row_3x4(&rows, "Tr")?;
    let k = CameraIntrinsics::new(p2[(0, 0)], p2[(1, 1)], p2[(0, 2)], p2[(1, 2)])
        .map_err(|e| e.to_string())?;
    let kmat: Matrix3<f64> = p2.fixed_view::<3, 3>(0, 0).into_owned();
    let kinv = kmat
        .try_inverse()
        .ok_or_else(|| "P2 intrinsic block is singular".to_string())?;
    let baseline: Vector3<f64> = kinv * p2.column(3);
    let velo_to_cam = SE3Transform::new_orthonormalized(
        tr.fixed_view::<3, 3>(0, 0).into_owned(),
        tr.column(3).into_owned(),
    )
    .map_err(|e| format!("Tr: {e}"))?;
    Ok((
        k,
        SE3Transform::from_translation(baseline).compose(&velo_to_cam),
    ))
}

pub fn load_kitti_calib(path: &Path) -> Result<(CameraIntrinsics, SE3Transform)> {
    let text = fs::read_to_string(path).map_err(|e| CalibError::io(path, e))?;
    parse_kitti_calib(&text).map_err(|reason| CalibError::MalformedCalib {
        path: path.to_path_buf(),
        reason,
    })
}

/// Writes a calib file with `P2 = [K | 0]` and `Tr = T_LC`.
pub fn write_kitti_calib(path: &Path, k: &CameraIntrinsics, t_lc: &SE3Transform) -> Result<()> {
    let row = |vals: [f64; 12]| {
        vals.iter()
            .map(|v| format!("{v:.12e}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let p2 = [k.fx, 0.0, k.cx, 0.0, 0.0, k.fy, k.cy, 0.0, 0.0, 0.0, 1.0, 0.0];
    let (r, t) = (t_lc.rotation(), t_lc.translation());
    let tr = [
        r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
        r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
        r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
    ];
    let mut f = fs::File::create(path).map_err(|e| CalibError::io(path, e))?;
    writeln!(f, "P2: {}", row(p2))
        .and_then(|_| writeln!(f, "Tr: {}", row(tr)))
        .map_err(|e| CalibError::io(path, e))
}

/// Paths of one frame inside a KITTI-layout root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KittiPaths {
    pub cloud: PathBuf,
    pub image: PathBuf,
    pub calib: PathBuf,
}

impl KittiPaths {
    pub fn new(root: &Path, sequence: &str, frame: u32) -> Self {
        let seq = root.join("sequences").join(sequence);
        Self {
            cloud: seq.join("velodyne").join(format!("{frame:06}.bin")),
            image: seq.join("image_2").join(format!("{frame:06}.png")),
            calib: seq.join("calib.txt"),
        }
    }

    pub fn missing(&self) -> Option<&Path> {
        [&self.cloud, &self.image, &self.calib]
            .into_iter()
            .find(|p| !p.is_file())
            .map(PathBuf::as_path)
    }
}

pub fn load_kitti_frame(root: &Path, sequence: &str, frame: u32) -> Result<RawFrame> {
    let paths = KittiPaths::new(root, sequence, frame);
    let cloud = load_kitti_cloud(&paths.cloud)?;
    let (intrinsics, t_lc) = load_kitti_calib(&paths.calib)?;
    let image = image::open(&paths.image)?.to_rgb8();
    Ok(RawFrame {
        name: format!("{sequence}/{frame:06}"),
        image,
        cloud,
        intrinsics,
        t_lc,
    })
}

/// Sequence ids for a named split: `train` = 01–19, `val` = 20–21, `test` = 00.
pub fn kitti_split(name: &str) -> Result<Vec<String>> {
    let ids: Vec<u32> = match name {
        "train" => (1..=19).collect(),
        "val" => vec![20, 21],
        "test" => vec![0],
        other => {
            return Err(CalibError::Usage(format!(
                "unknown KITTI split {other:?} (expected train, val or test)"
            )))
        }
    };
    Ok(ids.into_iter().map(|i| format!("{i:02}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_record() {
        let mut bytes = Vec::new();
        for v in [1f32, 2.0, 3.0, 0.5] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let pc = decode_kitti_cloud(&bytes).unwrap();
        assert_eq!(pc.len(), 1);
        assert_eq!(pc.points()[0], Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(pc.intensity()[0], 0.5);
    }

    #[test]
    fn empty_and_truncated() {
        assert!(decode_kitti_cloud(&[]).unwrap().is_empty());
        assert!(decode_kitti_cloud(&[0u8; 17]).is_err());
    }

    #[test]
    fn identity_calib() {
        let text = "P0: 1 0 0 0 0 1 0 0 0 0 1 0\n\
                    P2: 100 0 50 0 0 100 50 0 0 0 1 0\n\
                    Tr: 1 0 0 0 0 1 0 0 0 0 1 0\n";
        let (k, t) = parse_kitti_calib(text).unwrap();
        assert_eq!((k.fx, k.fy, k.cx, k.cy), (100.0, 100.0, 50.0, 50.0));
        assert!(t.max_abs_diff(&SE3Transform::identity()) < 1e-15);
    }

    #[test]
    fn tr_translation_carried() {
        let text = "P2: 100 0 50 0 0 100 50 0 0 0 1 0\nTr: 1 0 0 0 0 1 0 0 0 0 1 0.1\n";
        let (_, t) = parse_kitti_calib(text).unwrap();
        assert!((t.translation() - Vector3::new(0.0, 0.0, 0.1)).norm() < 1e-15);
    }

    #[test]
    fn missing_rows() {
        let err = parse_kitti_calib("P2: 100 0 50 0 0 100 50 0 0 0 1 0\n").unwrap_err();
        assert!(err.contains("Tr"));
        assert!(parse_kitti_calib("P2: 1 2 3\nTr: 1 0 0 0 0 1 0 0 0 0 1 0").is_err());
    }

    #[test]
    fn splits() {
        assert_eq!(kitti_split("train").unwrap().len(), 19);
        assert_eq!(kitti_split("val").unwrap(), vec!["20", "21"]);
        assert_eq!(kitti_split("test").unwrap(), vec!["00"]);
        assert!(kitti_split("bogus").is_err());
    }
}
