//! Dirichlet data of the shear and bending benchmarks.

use std::f64::consts::PI;

use crate::energy::{fp_inverse, stretch_energy, MaterialParams};
use crate::error::{Error, Result};
use crate::kinematics::{polar_decompose, quat_from_rotation, Mat3, Quaternion, Vec3};

/// Simple shear `x ↦ (x1 + β x2, x2, x3)` with identity micro-rotation.
pub fn shear_bc(x: Vec3, beta: f64) -> (Vec3, Quaternion) {
    ([x[0] + beta * x[1], x[1], x[2]], Quaternion::IDENTITY)
}

/// Constant deformation gradient `I + β m⊗n` of [`shear_bc`].
pub fn shear_gradient(beta: f64, m: Vec3, n: Vec3) -> Mat3 {
    Mat3::IDENTITY + Mat3::outer(m, n) * beta
}

/// Bending map: the `x2` coordinate is lifted by
/// `(2L1/π)[sin(3π/2 + π x1/(2L1)) + 1] β`.
pub fn bending_map(x: Vec3, l1: f64, beta: f64) -> Vec3 {
    let lift = 2.0 * l1 / PI * ((1.5 * PI + 0.5 * PI * x[0] / l1).sin() + 1.0) * beta;
    [x[0], x[1] + lift, x[2]]
}

/// Closed-form gradient of [`bending_map`]: `I + β sin(π x1/(2L1)) e2⊗e1`.
pub fn bending_gradient(x: Vec3, l1: f64, beta: f64) -> Mat3 {
    let mut g = Mat3::IDENTITY;
    g.0[1][0] = beta * (0.5 * PI * x[0] / l1).sin();
    g
}

/// Unit quaternion of the polar rotation of `F Fp(γ)⁻¹`.
pub fn elastic_rotation(f: Mat3, gamma: f64, m: Vec3, n: Vec3) -> Result<Quaternion> {
    let fe = f * fp_inverse(gamma, m, n);
    let (r, _) = polar_decompose(fe).map_err(|e| Error::BoundaryCondition(format!("polar decomposition: {e}")))?;
    quat_from_rotation(r).map_err(|e| Error::BoundaryCondition(format!("rotation to quaternion: {e}")))
}

/// Bending data at `x` for slip `γ`: `(g_D(x), q_D(x))`.
pub fn bending_bc(x: Vec3, l1: f64, beta: f64, gamma: f64, p: &MaterialParams) -> Result<(Vec3, Quaternion)> {
    let f = bending_gradient(x, l1, beta);
    Ok((bending_map(x, l1, beta), elastic_rotation(f, gamma, p.slip, p.normal)?))
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Slip minimizing the stretch energy of the polar stretch of `F Fp(γ)⁻¹`,
/// i.e. the slip for which the prescribed deformation is closest to an
/// elastically unstretched state.
pub fn compatible_slip(f: Mat3, p: &MaterialParams) -> Result<f64> {
    let w = |gamma: f64| -> Result<f64> {
        let fe = f * fp_inverse(gamma, p.slip, p.normal);
        let (_, u) = polar_decompose(fe).map_err(|e| Error::BoundaryCondition(e.to_string()))?;
        Ok(stretch_energy(&u, p))
    };
    // shear of Fe along the slip system is about (mᵀ F n) − γ
    let guess = crate::kinematics::dot(p.slip, f.mul_vec(p.normal)) - crate::kinematics::dot(p.slip, p.normal);
    let half = 0.5 * guess.abs() + 0.1;
    let (mut a, mut b) = (guess - half, guess + half);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (w(c)?, w(d)?);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (1.0 + guess.abs()) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = w(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = w(d)?;
        }
    }
    let g = 0.5 * (a + b);
    if !g.is_finite() {
        return Err(Error::BoundaryCondition("compatible slip is not finite".into()));
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shear_examples() {
        let x = [0.3, 0.8, 0.1];
        assert_eq!(shear_bc(x, 0.0).0, x);
        let (g, q) = shear_bc(x, 0.25);
        assert_eq!(g, [0.3 + 0.25 * 0.8, 0.8, 0.1]);
        assert_eq!(q, Quaternion::IDENTITY);
    }

    #[test]
    fn bending_map_examples() {
        let l1 = 5.0;
        let beta = 0.025;
        let x = [0.0, 0.4, 1.3];
        let g = bending_map(x, l1, beta);
        assert!((g[1] - x[1]).abs() < 1e-16 && g[0] == x[0] && g[2] == x[2]);
        let g = bending_map([l1, 0.4, 1.3], l1, beta);
        assert!((g[1] - 0.4 - 2.0 * l1 / PI * beta).abs() < 1e-15);
    }

    #[test]
    fn bending_gradient_matches_differences() {
        let (l1, beta) = (5.0, 0.2);
        let x = [1.7, 0.3, 0.9];
        let h = 1e-6;
        let fd = (bending_map([x[0] + h, x[1], x[2]], l1, beta)[1] - bending_map([x[0] - h, x[1], x[2]], l1, beta)[1]) / (2.0 * h);
        let g = bending_gradient(x, l1, beta);
        assert!((g.0[1][0] - fd).abs() < 1e-9);
        assert_eq!(g.0[0], [1.0, 0.0, 0.0]);
    }

    #[test]
    fn bending_rotation_is_planar() {
        let p = MaterialParams::bending_benchmark();
        let (l1, beta) = (5.0, 0.025);
        for x1 in [0.0, 1.0, 2.5, 5.0] {
            let a = beta * (0.5 * PI * x1 / l1).sin();
            let (_, q) = bending_bc([x1, 0.0, 0.0], l1, beta, a, &p).unwrap();
            assert!(q.x.abs() < 1e-15 && q.y.abs() < 1e-15);
            assert!((q.modulus() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn compatible_slip_of_simple_shear() {
        let p = MaterialParams::shear_benchmark();
        let f = shear_gradient(0.13, p.slip, p.normal);
        assert!((compatible_slip(f, &p).unwrap() - 0.13).abs() < 1e-7);
    }

    #[test]
    fn compatible_slip_of_bending() {
        let p = MaterialParams::bending_benchmark();
        let a = 0.025;
        let mut f = Mat3::IDENTITY;
        f.0[1][0] = a;
        let g = compatible_slip(f, &p).unwrap();
        // second-order close to the shear amplitude
        assert!((g - a).abs() < 2.0 * a * a * a);
        let w = |gamma: f64| {
            let (_, u) = polar_decompose(f * fp_inverse(gamma, p.slip, p.normal)).unwrap();
            stretch_energy(&u, &p)
        };
        assert!(w(g) <= w(g + 1e-6) && w(g) <= w(g - 1e-6));
    }
}
