//! Pinhole projection, extrinsic composition and the miscalibration round trip.
//!
//!     cargo run --example projection

use extcalib::geometry::{
    compose_calibration, euler_to_quat, project_point, quat_angular_distance, sample_deviation,
    CameraIntrinsics, DeviationRange, SE3Transform,
};
use nalgebra::Vector3;

fn main() -> extcalib::Result<()> {
    let k = CameraIntrinsics::new(718.856, 718.856, 607.1928, 185.2157)?;
    let t_lc = extcalib::dataio::synth::kitti_like_extrinsic();
    let p = Vector3::new(12.0, 1.5, -0.8); // LiDAR frame: 12 m ahead, slightly left and below

    let truth = project_point(&p, &k, &t_lc)?;
    println!("true projection      u = {:8.2}  v = {:8.2}  depth = {:.2} m", truth.u, truth.v, truth.depth);

    let dev = sample_deviation(&DeviationRange::new(0.5, 5.0)?, 42);
    let t_init = dev.compose(&t_lc);
    let off = project_point(&p, &k, &t_init)?;
    println!(
        "miscalibrated        u = {:8.2}  v = {:8.2}  ({:.1} px off)",
        off.u,
        off.v,
        ((off.u - truth.u).powi(2) + (off.v - truth.v).powi(2)).sqrt()
    );

    // a perfect prediction of the deviation cancels it exactly
    let recovered = compose_calibration(&dev, &t_init);
    println!("recovered extrinsic max |Δ| = {:.2e}", recovered.max_abs_diff(&t_lc));

    let q1 = euler_to_quat(10.0, 0.0, 0.0);
    let q2 = euler_to_quat(0.0, 10.0, 0.0);
    println!("angle between 10° roll and 10° pitch: {:.3}°", quat_angular_distance(&q1, &q2).to_degrees());
    println!("angle between q and -q: {}", quat_angular_distance(&q1, &(-q1)));

    let identity = SE3Transform::identity();
    println!("identity inverse is identity: {}", identity.inverse().max_abs_diff(&identity) == 0.0);
    Ok(())
}
