//! The three loss terms for a handful of predictions against one sample.
//!
//!     cargo run --release --example losses

use extcalib::dataio::{synth_scene, PreparedFrame, PreprocessConfig, SynthConfig};
use extcalib::geometry::{euler_to_quat, DeviationRange, Quaternion};
use extcalib::losses::{total_loss, LossWeights};
use extcalib::network::PosePrediction;
use nalgebra::Vector3;

fn main() -> extcalib::Result<()> {
    let raw = synth_scene(&SynthConfig::default(), 5, 20000)?;
    let frame = PreparedFrame::new(&raw, &PreprocessConfig::synthetic((256, 128)))?;
    let sample = frame.sample(&DeviationRange::new(0.3, 3.0)?, 1);
    let truth = PosePrediction::from_transform(&sample.t_gt);
    let w = LossWeights::default();

    let candidates = [
        ("ground truth", truth),
        ("ground truth, -q", PosePrediction { rotation: -truth.rotation, ..truth }),
        ("identity", PosePrediction::identity()),
        (
            "5 cm off in z",
            PosePrediction { translation: truth.translation + Vector3::new(0.0, 0.0, 0.05), ..truth },
        ),
        (
            "1° off in yaw",
            PosePrediction { rotation: euler_to_quat(0.0, 0.0, 1.0) * truth.rotation, ..truth },
        ),
        ("180° flip", PosePrediction { rotation: Quaternion::from_array([0.0, 1.0, 0.0, 0.0]), ..truth }),
    ];
    println!("{:<18} {:>10} {:>12} {:>10} {:>12}", "prediction", "total", "translation", "rotation", "point cloud");
    for (name, pred) in candidates {
        let l = total_loss(&pred, &sample, &w)?;
        println!(
            "{name:<18} {:>10.5} {:>12.5} {:>10.5} {:>12.5}",
            l.total, l.translation, l.rotation, l.pointcloud
        );
    }
    Ok(())
}
