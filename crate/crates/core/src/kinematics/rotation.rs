//! Rotation parameterizations and conversions.
//!
//! Two charts of SO(3) are provided: the Euler-Rodrigues map of a unit
//! quaternion (with a scale-invariant variant usable off the unit sphere) and
//! a product of three elementary rotations by Euler angles. Both come with
//! analytic Jacobians, which the energy assembly needs for its gradient.

use super::mat3::{Mat3, Vec3};
use super::quaternion::{hmul, Quaternion};
use crate::error::{Error, Result};

/// Tolerance on `| |q| − 1 |` accepted by [`rotation`].
pub const UNIT_NORM_TOL: f64 = 1e-8;

/// Tolerance on orthogonality and determinant for inputs of [`quat_from_rotation`].
pub const SO3_TOL: f64 = 1e-8;

/// Real part below which [`quat_from_rotation`] treats a quaternion as pure.
const PURE_THRESHOLD: f64 = 1e-12;

/// Three Euler angles (radians) for the product `R3(α3) R2(α2) R1(α1)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerAngles(pub [f64; 3]);

/// Vector part of `2 q̄ ∂q`, plus the real part kept as a drift diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CurvatureVector {
    pub vector: Vec3,
    pub real_part: f64,
}

/// Alternating tensor: `eps_skew(v) w = v × w`.
pub fn eps_skew(v: Vec3) -> Mat3 {
    Mat3([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])
}

/// Homogeneous quadratic Euler-Rodrigues matrix; equals `|q|² · rotation(q/|q|)`.
pub fn rotation_unscaled(q: Quaternion) -> Mat3 {
    let Quaternion { w, x, y, z } = q;
    Mat3([
        [
            w * w + x * x - y * y - z * z,
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            w * w - x * x + y * y - z * z,
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            w * w - x * x - y * y + z * z,
        ],
    ])
}

/// Euler-Rodrigues rotation of a unit quaternion.
pub fn rotation(q: Quaternion) -> Result<Mat3> {
    let n = q.modulus();
    if !((n - 1.0).abs() <= UNIT_NORM_TOL) {
        return Err(Error::Contract(format!(
            "rotation() expects a unit quaternion, |q| = {n}"
        )));
    }
    Ok(rotation_unscaled(q))
}

/// Scale-invariant rotation `rotation_unscaled(q) / |q|²`, defined for every `q ≠ 0`.
pub fn rotation_normalized(q: Quaternion) -> Result<Mat3> {
    let n2 = q.modulus_sq();
    if n2 == 0.0 || !n2.is_finite() {
        return Err(Error::Domain(
            "normalized rotation of the zero quaternion".into(),
        ));
    }
    Ok(rotation_unscaled(q) * (1.0 / n2))
}

/// Derivatives of [`rotation_unscaled`] with respect to (w, x, y, z).
pub fn rotation_unscaled_jacobian(q: Quaternion) -> [Mat3; 4] {
    let Quaternion { w, x, y, z } = q;
    let t = |m: [[f64; 3]; 3]| Mat3(m) * 2.0;
    [
        t([[w, -z, y], [z, w, -x], [-y, x, w]]),
        t([[x, y, z], [y, -x, -w], [z, w, -x]]),
        t([[-y, x, w], [x, y, z], [-w, z, -y]]),
        t([[-z, -w, x], [w, -z, y], [x, y, z]]),
    ]
}

/// [`rotation_normalized`] together with its four partial derivatives.
///
/// Caller guarantees `q ≠ 0`.
pub fn rotation_normalized_with_jacobian(q: Quaternion) -> (Mat3, [Mat3; 4]) {
    let inv = 1.0 / q.modulus_sq();
    let r = rotation_unscaled(q) * inv;
    let mut jac = rotation_unscaled_jacobian(q);
    let comps = q.to_array();
    for (b, d) in jac.iter_mut().enumerate() {
        *d = (*d - r * (2.0 * comps[b])) * inv;
    }
    (r, jac)
}

fn euler_factors(a: EulerAngles) -> ([Mat3; 3], [Mat3; 3]) {
    let [a1, a2, a3] = a.0;
    let (s1, c1) = a1.sin_cos();
    let (s2, c2) = a2.sin_cos();
    let (s3, c3) = a3.sin_cos();
    let r1 = Mat3([[c1, s1, 0.0], [-s1, c1, 0.0], [0.0, 0.0, 1.0]]);
    let r2 = Mat3([[c2, 0.0, -s2], [0.0, 1.0, 0.0], [s2, 0.0, c2]]);
    let r3 = Mat3([[1.0, 0.0, 0.0], [0.0, c3, s3], [0.0, -s3, c3]]);
    let d1 = Mat3([[-s1, c1, 0.0], [-c1, -s1, 0.0], [0.0, 0.0, 0.0]]);
    let d2 = Mat3([[-s2, 0.0, -c2], [0.0, 0.0, 0.0], [c2, 0.0, -s2]]);
    let d3 = Mat3([[0.0, 0.0, 0.0], [0.0, -s3, c3], [0.0, -c3, -s3]]);
    ([r1, r2, r3], [d1, d2, d3])
}

/// `R3(α3) R2(α2) R1(α1)` with the elementary factors in their literal form.
pub fn rotation_euler(a: EulerAngles) -> Mat3 {
    let ([r1, r2, r3], _) = euler_factors(a);
    r3 * r2 * r1
}

/// [`rotation_euler`] and its partial derivatives with respect to (α1, α2, α3).
pub fn rotation_euler_with_jacobian(a: EulerAngles) -> (Mat3, [Mat3; 3]) {
    let ([r1, r2, r3], [d1, d2, d3]) = euler_factors(a);
    let r32 = r3 * r2;
    (
        r32 * r1,
        [r32 * d1, r3 * d2 * r1, d3 * r2 * r1],
    )
}

/// Curvature (Darboux) vector `2 q̄ dq` for a discrete directional derivative `dq`.
pub fn curvature_vector(qbar: Quaternion, dq: Quaternion) -> CurvatureVector {
    let k = hmul(qbar, dq).scale(2.0);
    CurvatureVector {
        vector: k.vector(),
        real_part: k.w,
    }
}

/// Polar decomposition `F = R U` by the Newton iteration `R ← (R + R⁻ᵀ)/2`.
pub fn polar_decompose(f: Mat3) -> Result<(Mat3, Mat3)> {
    if !f.is_finite() {
        return Err(Error::Domain("polar decomposition of a non-finite tensor".into()));
    }
    let det = f.det();
    let scale = f.frobenius_norm();
    if !(det > 1e-14 * scale.powi(3)) {
        return Err(Error::Domain(format!(
            "polar decomposition needs det(F) > 0, got {det:e}"
        )));
    }
    let mut r = f;
    for _ in 0..100 {
        let inv_t = r
            .inverse_transpose()
            .ok_or_else(|| Error::Domain("singular iterate in polar decomposition".into()))?;
        let next = (r + inv_t) * 0.5;
        let change = (next - r).frobenius_norm();
        r = next;
        if change <= 1e-12 {
            let u = (r.transpose() * f).sym();
            return Ok((r, u));
        }
    }
    Err(Error::Domain("polar decomposition did not converge".into()))
}

/// Unit quaternion `q` with `rotation(q) = R`, using the largest-pivot extraction.
///
/// Sign convention: `q.w ≥ 0`; for half-turns (`q.w = 0`) the first nonzero
/// vector component is positive.
pub fn quat_from_rotation(r: Mat3) -> Result<Quaternion> {
    if !r.is_finite() {
        return Err(Error::Domain("non-finite rotation matrix".into()));
    }
    let orth = (r.transpose() * r - Mat3::IDENTITY).frobenius_norm();
    let det = r.det();
    if orth > SO3_TOL || (det - 1.0).abs() > SO3_TOL {
        return Err(Error::Domain(format!(
            "matrix is not a rotation (‖RᵀR − I‖ = {orth:e}, det = {det})"
        )));
    }
    let m = &r.0;
    let tr = r.trace();
    let pivots = [tr, m[0][0], m[1][1], m[2][2]];
    let best = (0..4)
        .max_by(|&a, &b| pivots[a].total_cmp(&pivots[b]))
        .unwrap_or(0);
    let q = match best {
        0 => {
            let w = 0.5 * (1.0 + tr).sqrt();
            let f = 0.25 / w;
            [w, (m[2][1] - m[1][2]) * f, (m[0][2] - m[2][0]) * f, (m[1][0] - m[0][1]) * f]
        }
        1 => {
            let x = 0.5 * (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt();
            let f = 0.25 / x;
            [(m[2][1] - m[1][2]) * f, x, (m[0][1] + m[1][0]) * f, (m[0][2] + m[2][0]) * f]
        }
        2 => {
            let y = 0.5 * (1.0 - m[0][0] + m[1][1] - m[2][2]).sqrt();
            let f = 0.25 / y;
            [(m[0][2] - m[2][0]) * f, (m[0][1] + m[1][0]) * f, y, (m[1][2] + m[2][1]) * f]
        }
        _ => {
            let z = 0.5 * (1.0 - m[0][0] - m[1][1] + m[2][2]).sqrt();
            let f = 0.25 / z;
            [(m[1][0] - m[0][1]) * f, (m[0][2] + m[2][0]) * f, (m[1][2] + m[2][1]) * f, z]
        }
    };
    let mut q = Quaternion::from_array(q).normalized()?;
    if q.w.abs() <= PURE_THRESHOLD {
        q.w = 0.0;
        let first = q.vector().into_iter().find(|c| *c != 0.0).unwrap_or(1.0);
        if first < 0.0 {
            q = -q;
        }
    } else if q.w < 0.0 {
        q = -q;
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::mat3::cross;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    /// Rodrigues' axis-angle formula, independent of the quaternion path.
    fn axis_angle(axis: Vec3, angle: f64) -> Mat3 {
        let k = eps_skew(axis);
        Mat3::IDENTITY + k * angle.sin() + (k * k) * (1.0 - angle.cos())
    }

    #[test]
    fn eps_skew_examples() {
        assert_eq!(
            eps_skew([1.0, 0.0, 0.0]),
            Mat3([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
        );
        assert_eq!(eps_skew([0.0; 3]), Mat3::ZERO);
        let v = eps_skew([1.0, 2.0, 3.0]).mul_vec([4.0, 5.0, 6.0]);
        assert_eq!(v, cross([1.0, 2.0, 3.0], [4.0, 5.0, 6.0]));
        assert_eq!(v, [-3.0, 6.0, -3.0]);
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(rotation(Quaternion::IDENTITY).unwrap(), Mat3::IDENTITY);
        let h = 0.5 * 2f64.sqrt();
        let r = rotation(Quaternion::new(h, 0.0, 0.0, h)).unwrap();
        let oracle = axis_angle([0.0, 0.0, 1.0], FRAC_PI_2);
        assert!(r.max_abs_diff(&oracle) < 1e-15);
        assert!(r.max_abs_diff(&Mat3([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])) < 1e-15);
        assert!(matches!(
            rotation(Quaternion::new(2.0, 0.0, 0.0, 0.0)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn closed_form_matches_quadratic_form() {
        let q = Quaternion::new(0.4, -0.2, 0.7, 0.1);
        let n2 = q.modulus_sq();
        let v = q.vector();
        let alt = Mat3::scaled_identity(2.0 * q.w * q.w - n2)
            + Mat3::outer(v, v) * 2.0
            + eps_skew(v) * (2.0 * q.w);
        assert!(rotation_unscaled(q).max_abs_diff(&alt) < 1e-15);
    }

    #[test]
    fn rotation_normalized_examples() {
        assert_eq!(
            rotation_normalized(Quaternion::new(2.0, 0.0, 0.0, 0.0)).unwrap(),
            Mat3::IDENTITY
        );
        let r = rotation_normalized(Quaternion::new(2f64.sqrt(), 2f64.sqrt(), 0.0, 0.0)).unwrap();
        assert!(r.max_abs_diff(&axis_angle([1.0, 0.0, 0.0], FRAC_PI_2)) < 1e-15);
        assert!(matches!(
            rotation_normalized(Quaternion::ZERO),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let q = Quaternion::new(0.9, -0.3, 0.25, 0.6);
        let (_, jac) = rotation_normalized_with_jacobian(q);
        let h = 1e-6;
        for b in 0..4 {
            let mut p = q.to_array();
            let mut m = q.to_array();
            p[b] += h;
            m[b] -= h;
            let fd = (rotation_normalized(Quaternion::from_array(p)).unwrap()
                - rotation_normalized(Quaternion::from_array(m)).unwrap())
                * (0.5 / h);
            assert!(fd.max_abs_diff(&jac[b]) < 1e-8, "component {b}");
        }
        let a = EulerAngles([0.3, -1.1, 2.0]);
        let (_, ej) = rotation_euler_with_jacobian(a);
        for i in 0..3 {
            let mut p = a;
            let mut m = a;
            p.0[i] += h;
            m.0[i] -= h;
            let fd = (rotation_euler(p) - rotation_euler(m)) * (0.5 / h);
            assert!(fd.max_abs_diff(&ej[i]) < 1e-8, "angle {i}");
        }
    }

    #[test]
    fn euler_examples() {
        assert!(rotation_euler(EulerAngles([0.0; 3])).max_abs_diff(&Mat3::IDENTITY) < 1e-16);
        let r = rotation_euler(EulerAngles([FRAC_PI_2, 0.0, 0.0]));
        let r1 = Mat3([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(r.max_abs_diff(&r1) < 1e-15);
    }

    #[test]
    fn curvature_vector_of_constant_and_twisting_fields() {
        let q = Quaternion::new(0.6, 0.0, 0.8, 0.0);
        let k = curvature_vector(q.conjugate(), Quaternion::ZERO);
        assert_eq!(k.vector, [0.0; 3]);
        // q(x) = (cos(a x/2), 0, 0, sin(a x/2)) has K = (0, 0, a) everywhere.
        let (a, x) = (1.7f64, 0.35f64);
        let q = Quaternion::new((0.5 * a * x).cos(), 0.0, 0.0, (0.5 * a * x).sin());
        let dq = Quaternion::new(-0.5 * a * (0.5 * a * x).sin(), 0.0, 0.0, 0.5 * a * (0.5 * a * x).cos());
        let k = curvature_vector(q.conjugate(), dq);
        assert!((k.vector[0]).abs() < 1e-15 && (k.vector[1]).abs() < 1e-15);
        assert!((k.vector[2] - a).abs() < 1e-14);
        assert!(k.real_part.abs() < 1e-15);
    }

    #[test]
    fn polar_examples() {
        let rz = axis_angle([0.0, 0.0, 1.0], FRAC_PI_4);
        let (r, u) = polar_decompose(rz).unwrap();
        assert!(r.max_abs_diff(&rz) < 1e-12 && u.max_abs_diff(&Mat3::IDENTITY) < 1e-12);

        let (r, u) = polar_decompose(Mat3::scaled_identity(2.0)).unwrap();
        assert!(r.max_abs_diff(&Mat3::IDENTITY) < 1e-12);
        assert!(u.max_abs_diff(&Mat3::scaled_identity(2.0)) < 1e-12);

        let stretch = Mat3::from_diagonal([2.0, 1.0, 1.0]);
        let f = rz * stretch;
        let (r, u) = polar_decompose(f).unwrap();
        assert!(r.max_abs_diff(&rz) < 1e-12);
        assert!(u.max_abs_diff(&stretch) < 1e-12);
        assert!((r * u - f).frobenius_norm() <= 1e-10 * f.frobenius_norm());

        assert!(polar_decompose(Mat3::from_diagonal([1.0, 1.0, -1.0])).is_err());
        assert!(polar_decompose(Mat3::from_diagonal([1.0, 1.0, 0.0])).is_err());
    }

    #[test]
    fn quat_from_rotation_examples() {
        assert_eq!(quat_from_rotation(Mat3::IDENTITY).unwrap(), Quaternion::IDENTITY);
        let r = Mat3([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        let q = quat_from_rotation(r).unwrap();
        let h = 0.5 * 2f64.sqrt();
        assert!((q - Quaternion::new(h, 0.0, 0.0, h)).modulus() < 1e-15);
        // half-turn about -x: sign convention picks +x
        let q = quat_from_rotation(axis_angle([-1.0, 0.0, 0.0], PI)).unwrap();
        assert!((q - Quaternion::new(0.0, 1.0, 0.0, 0.0)).modulus() < 1e-15);
        assert!(quat_from_rotation(Mat3::scaled_identity(2.0)).is_err());
        assert!(quat_from_rotation(Mat3::from_diagonal([1.0, 1.0, -1.0])).is_err());
    }
}
