use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{euler_to_rotmat, SE3Transform};
use crate::error::{CalibError, Result};

/// Symmetric per-axis bounds for random miscalibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationRange {
    /// Meters, applied independently to x, y and z.
    pub max_translation: f64,
    /// Degrees, applied independently to roll, pitch and yaw.
    pub max_rotation: f64,
}

impl DeviationRange {
    pub fn new(max_translation: f64, max_rotation: f64) -> Result<Self> {
        if !(max_translation >= 0.0 && max_rotation >= 0.0) {
            return Err(CalibError::Config(format!(
                "deviation range must be nonnegative, got ({max_translation} m, {max_rotation} deg)"
            )));
        }
        Ok(Self {
            max_translation,
            max_rotation,
        })
    }

    pub fn zero() -> Self {
        Self {
            max_translation: 0.0,
            max_rotation: 0.0,
        }
    }
}

fn symmetric(rng: &mut ChaCha8Rng, bound: f64) -> f64 {
    if bound == 0.0 {
        // still consume a draw so the stream layout does not depend on the range
        let _: f64 = rng.random();
        0.0
    } else {
        rng.random_range(-bound..=bound)
    }
}

/// Uniform random deviation `ΔT`.
///
/// Draw order is tx, ty, tz, roll, pitch, yaw from a ChaCha8 stream seeded with `seed`;
/// the rotation is `Rx(roll)·Ry(pitch)·Rz(yaw)`.
pub fn sample_deviation(range: &DeviationRange, seed: u64) -> SE3Transform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = Vector3::new(
        symmetric(&mut rng, range.max_translation),
        symmetric(&mut rng, range.max_translation),
        symmetric(&mut rng, range.max_translation),
    );
    let roll = symmetric(&mut rng, range.max_rotation);
    let pitch = symmetric(&mut rng, range.max_rotation);
    let yaw = symmetric(&mut rng, range.max_rotation);
    SE3Transform::new(euler_to_rotmat(roll, pitch, yaw), t)
        .expect("Euler product is a proper rotation")
}
