mod common;

use common::invariants;
use extcalib::geometry::{DeviationRange, Quaternion, SE3Transform};
use nalgebra::Vector3;
use proptest::prelude::*;

fn quaternion() -> impl Strategy<Value = Quaternion> {
    prop::array::uniform4(-1.0f64..1.0)
        .prop_filter("non-degenerate", |a| a.iter().map(|x| x * x).sum::<f64>() > 1e-4)
        .prop_map(|a| {
            let n = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            Quaternion::from_array(a.map(|x| x / n))
        })
}

fn vector(bound: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-bound..bound).prop_map(Vector3::from)
}

fn transform() -> impl Strategy<Value = SE3Transform> {
    (quaternion(), vector(5.0)).prop_map(|(q, t)| SE3Transform::new_orthonormalized(common::rotation_of(&q), t).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn quaternion_matrix_roundtrip(q in quaternion()) {
        invariants::quat_roundtrip(&q).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn euler_roundtrip(roll in -179.9f64..180.0, pitch in -89.0f64..89.0, yaw in -179.9f64..180.0) {
        invariants::euler_roundtrip(roll, pitch, yaw).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn angular_distance_is_a_metric(a in quaternion(), b in quaternion(), c in quaternion()) {
        invariants::angular_metric(&a, &b, &c).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn se3_group_laws(t in transform(), u in transform(), v in transform()) {
        invariants::se3_algebra(&t, &u, &v).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn projection_inverts(p in vector(30.0), t in transform()) {
        invariants::projection_roundtrip(&p, &t).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn cloud_distance_properties(t in transform(), shift in vector(1.0), pts in prop::collection::vec(vector(30.0), 1..16)) {
        invariants::cloud_distance(&t, &shift, &pts).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn deviation_within_bounds(max_t in 0.0f64..2.0, max_r in 0.0f64..30.0, seed in any::<u64>()) {
        let range = DeviationRange::new(max_t, max_r).unwrap();
        invariants::deviation_bounds(&range, seed).map_err(TestCaseError::fail)?;
    }
}
