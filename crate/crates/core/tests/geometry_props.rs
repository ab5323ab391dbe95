use proptest::prelude::*;
use surfel_lio::geometry::{Pose, Rotation, Vec3};

fn tangent(max_norm: f64) -> impl Strategy<Value = Vec3> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, 0.0..max_norm).prop_filter_map("zero axis", |(x, y, z, r)| {
        Vec3::new(x, y, z).try_normalize(1e-6).map(|a| a * r)
    })
}

fn point() -> impl Strategy<Value = Vec3> {
    (-50.0f64..50.0, -50.0f64..50.0, -50.0f64..50.0).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn pose() -> impl Strategy<Value = Pose> {
    (tangent(std::f64::consts::PI - 0.01), point()).prop_map(|(t, p)| Pose::new(Rotation::exp(&t), p))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn exp_log_roundtrip(theta in tangent(std::f64::consts::PI - 0.01)) {
        let r = Rotation::exp(&theta);
        let back = Rotation::exp(&r.log());
        prop_assert!((r.matrix() - back.matrix()).norm() < 1e-9);
        prop_assert!(r.orthogonality_error() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn transform_is_an_isometry(t in pose(), a in point(), b in point()) {
        let d0 = (a - b).norm();
        let d1 = (t.transform_point(&a) - t.transform_point(&b)).norm();
        prop_assert!((d0 - d1).abs() < 1e-9);
    }

    #[test]
    fn compose_with_inverse_is_identity(t in pose(), p in point()) {
        let id = t.compose(&t.inverse());
        prop_assert!((id.rotation.matrix() - Rotation::identity().matrix()).norm() < 1e-9);
        prop_assert!(id.translation.norm() < 1e-9);
        let q = t.inverse().compose(&t).transform_point(&p);
        prop_assert!((q - p).norm() < 1e-9);
    }

    #[test]
    fn interpolation_hits_endpoints(a in pose(), b in pose()) {
        let p0 = a.interpolate(&b, 0.0);
        let p1 = a.interpolate(&b, 1.0);
        prop_assert!((p0.translation - a.translation).norm() < 1e-9);
        prop_assert!((p1.translation - b.translation).norm() < 1e-9);
        prop_assert!((p1.rotation.matrix() - b.rotation.matrix()).norm() < 1e-7);
    }
}

#[test]
fn quaternion_roundtrip_through_half_turn() {
    for theta in [Vec3::new(0.0, 0.0, std::f64::consts::PI), Vec3::new(1.0, -2.0, 0.5).normalize() * 3.1] {
        let r = Rotation::exp(&theta);
        let [x, y, z, w] = r.to_quaternion();
        let back = Rotation::from_quaternion(x, y, z, w);
        assert!((r.matrix() - back.matrix()).norm() < 1e-12);
    }
}
