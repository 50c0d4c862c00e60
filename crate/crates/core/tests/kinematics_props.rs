mod common;

use common::{curvature_derivative_error, halving_ratios, rotation_derivative_error};
use cosserat::energy::fp;
use cosserat::kinematics::{
    cross, hmul, norm, quat_from_rotation, rotation, rotation_euler, EulerAngles, Mat3, Quaternion,
    Vec3,
};
use proptest::prelude::*;

const TOL: f64 = 1e-12;

fn unit_quaternion() -> impl Strategy<Value = Quaternion> {
    prop::array::uniform4(-1.0f64..1.0)
        .prop_filter("away from zero", |a| a.iter().map(|v| v * v).sum::<f64>() > 1e-2)
        .prop_map(|a| Quaternion::from_array(a).normalized().unwrap())
}

fn unit_vector() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-1.0f64..1.0)
        .prop_filter("away from zero", |v| norm(*v) > 1e-2)
        .prop_map(|v| {
            let n = norm(v);
            [v[0] / n, v[1] / n, v[2] / n]
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rotation_is_an_algebra_homomorphism(p in unit_quaternion(), q in unit_quaternion()) {
        let lhs = rotation(hmul(p, q)).unwrap();
        let rhs = rotation(p).unwrap() * rotation(q).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= TOL);
    }

    #[test]
    fn rotation_lies_in_so3(q in unit_quaternion()) {
        let r = rotation(q).unwrap();
        prop_assert!((r.transpose() * r).max_abs_diff(&Mat3::IDENTITY) <= TOL);
        prop_assert!((r.det() - 1.0).abs() <= TOL);
    }

    #[test]
    fn antipodal_quaternions_give_the_same_rotation(q in unit_quaternion()) {
        let r = rotation(q).unwrap();
        prop_assert!(rotation(-q).unwrap().max_abs_diff(&r) <= TOL);
    }

    #[test]
    fn quaternion_extraction_inverts_rotation(q in unit_quaternion()) {
        let r = rotation(q).unwrap();
        let back = quat_from_rotation(r).unwrap();
        prop_assert!(rotation(back).unwrap().max_abs_diff(&r) <= 1e-10);
        prop_assert!(back.w >= 0.0);
        // double cover: the extracted quaternion is ±q
        let d = back.dot(q).abs();
        prop_assert!((d - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn euler_gimbal_lock_loses_one_angle(a in -3.0f64..3.0, c in -3.0f64..3.0, delta in -1.0f64..1.0) {
        // with R3(α3) R2(π/2) R1(α1) only α1 − α3 survives
        let half_pi = std::f64::consts::FRAC_PI_2;
        let r0 = rotation_euler(EulerAngles([a, half_pi, c]));
        let r1 = rotation_euler(EulerAngles([a + delta, half_pi, c + delta]));
        prop_assert!(r0.max_abs_diff(&r1) <= TOL);
    }

    #[test]
    fn plastic_tensor_preserves_volume(gamma in -5.0f64..5.0, m in unit_vector(), v in unit_vector()) {
        // normal orthogonal to the slip direction
        let c = cross(m, v);
        prop_assume!(norm(c) > 1e-2);
        let n = {
            let l = norm(c);
            [c[0] / l, c[1] / l, c[2] / l]
        };
        prop_assert!((fp(gamma, m, n).det() - 1.0).abs() <= 1e-14);
    }
}

fn assert_second_order(label: &str, err: impl Fn(f64) -> f64) {
    for ratio in halving_ratios(err) {
        assert!((3.5..=4.5).contains(&ratio), "{label}: error ratio {ratio}");
    }
}

#[test]
fn rotation_derivative_converges_at_second_order() {
    for (a, x) in [(1.7, 0.35), (0.6, -1.2), (3.0, 0.9)] {
        assert_second_order("rotation derivative", |eta| rotation_derivative_error(a, x, eta));
    }
}

#[test]
fn curvature_derivative_converges_at_second_order() {
    for (a, x) in [(1.7, 0.35), (0.6, -1.2), (3.0, 0.9)] {
        assert_second_order("curvature derivative", |eta| curvature_derivative_error(a, x, eta));
    }
}
