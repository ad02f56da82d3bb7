//! Rigid-body, quaternion and pinhole-projection math.
//!
//! Everything here is `f64` and pure. Euler angles follow the intrinsic X-Y-Z
//! (roll-pitch-yaw) convention everywhere, and quaternions are kept in the
//! canonical `w >= 0` hemisphere.

mod camera;
mod cloud;
mod deviation;
mod quaternion;
mod transform;

pub use camera::{project_point, CameraIntrinsics, Projection, MIN_PROJECTION_DEPTH};
pub use cloud::{point_cloud_distance, PointCloud};
pub use deviation::{sample_deviation, DeviationRange};
pub use quaternion::{
    check_rotation, euler_to_quat, euler_to_rotmat, quat_angular_distance, quat_to_euler,
    quat_to_rotmat, rotmat_to_euler, rotmat_to_quat, EulerAngles, Quaternion, GIMBAL_LOCK_DEG,
    ROTATION_TOLERANCE, UNIT_NORM_TOLERANCE,
};
pub use transform::{compose_calibration, SE3Transform, SE3_TOLERANCE};
