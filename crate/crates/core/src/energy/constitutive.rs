//! Pointwise constitutive relations.

use super::params::MaterialParams;
use crate::kinematics::{Mat3, Vec3};

/// Plastic tensor `I + γ m⊗n`.
pub fn fp(gamma: f64, m: Vec3, n: Vec3) -> Mat3 {
    Mat3::IDENTITY + Mat3::outer(m, n) * gamma
}

/// `I − γ m⊗n`, the exact inverse of [`fp`] since `(m⊗n)² = 0` for `m ⟂ n`.
pub fn fp_inverse(gamma: f64, m: Vec3, n: Vec3) -> Mat3 {
    Mat3::IDENTITY - Mat3::outer(m, n) * gamma
}

/// Stretch energy `μ‖sym U − I‖² + μ_c‖skw(U − I)‖² + λ/2 tr(U − I)²`.
pub fn stretch_energy(ue: &Mat3, p: &MaterialParams) -> f64 {
    let e = *ue - Mat3::IDENTITY;
    let tr = e.trace();
    p.mu * e.sym().frobenius_norm_sq() + p.mu_c * e.skw().frobenius_norm_sq() + 0.5 * p.lambda * tr * tr
}

/// Stretch energy and its derivative `∂W/∂U`.
pub fn stretch_energy_and_stress(ue: &Mat3, p: &MaterialParams) -> (f64, Mat3) {
    let e = *ue - Mat3::IDENTITY;
    let sym = e.sym();
    let skw = e.skw();
    let tr = e.trace();
    let w = p.mu * sym.frobenius_norm_sq() + p.mu_c * skw.frobenius_norm_sq() + 0.5 * p.lambda * tr * tr;
    let s = sym * (2.0 * p.mu) + skw * (2.0 * p.mu_c) + Mat3::scaled_identity(p.lambda * tr);
    (w, s)
}

/// Smoothed modulus: `|x|` outside `[−ε, ε]`, `x²/ε` inside.
pub fn reg_abs(x: f64, eps: f64) -> f64 {
    if x > eps {
        x
    } else if x < -eps {
        -x
    } else {
        x * x / eps
    }
}

/// Derivative of [`reg_abs`] (one-sided choice at `±ε` follows the outer branch).
pub fn reg_abs_derivative(x: f64, eps: f64) -> f64 {
    if x > eps {
        1.0
    } else if x < -eps {
        -1.0
    } else {
        2.0 * x / eps
    }
}

/// Dislocation density after a step: `κ = κ⁰ − |γ − γ⁰|`.
pub fn hardening_update(gamma: f64, gamma0: f64, kappa0: f64) -> f64 {
    kappa0 - (gamma - gamma0).abs()
}
