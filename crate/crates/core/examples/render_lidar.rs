//! Render the LiDAR depth image of a synthetic scene under the true and a perturbed
//! extrinsic, and write both next to the camera image.
//!
//!     cargo run --release --example render_lidar -- [out_dir]

use std::path::PathBuf;

use extcalib::dataio::{synth_scene, LidarImage, PreparedFrame, PreprocessConfig, SynthConfig};
use extcalib::geometry::{DeviationRange, SE3Transform};
use image::GrayImage;

fn depth_png(img: &LidarImage) -> GrayImage {
    GrayImage::from_fn(img.width() as u32, img.height() as u32, |x, y| {
        let i = y as usize * img.width() + x as usize;
        // near points bright, empty pixels black
        let v = if img.mask()[i] { 255.0 * (1.0 - img.depth()[i]) } else { 0.0 };
        image::Luma([v as u8])
    })
}

fn main() -> extcalib::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/render_example".into()));
    std::fs::create_dir_all(&out).map_err(|e| extcalib::CalibError::io(&out, e))?;

    let raw = synth_scene(&SynthConfig::default(), 3, 40000)?;
    let frame = PreparedFrame::new(&raw, &PreprocessConfig::synthetic((512, 160)))?;
    let exact = frame.sample_with(SE3Transform::identity());
    let perturbed = frame.sample(&DeviationRange::new(0.5, 5.0)?, 11);

    frame.camera.to_rgb8().save(out.join("camera.png"))?;
    for (name, s) in [("lidar_true.png", &exact), ("lidar_perturbed.png", &perturbed)] {
        depth_png(&s.lidar).save(out.join(name))?;
        println!("{name}: {} of {} pixels hit", s.lidar.valid_count(), s.lidar.width() * s.lidar.height());
    }
    println!("deviation: t = {:?} m", perturbed.t_gt.translation().as_slice());
    println!("images in {}", out.display());
    Ok(())
}
