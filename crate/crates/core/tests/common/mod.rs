//! Oracles shared by the property suites and the acceptance run.
#![allow(dead_code)]

use cosserat::energy::{total_energy, total_gradient, CurvatureVariant, MaterialParams, PlasticHistory};
use cosserat::grid::{pack, unpack, DofLayout, FieldState, Grid3, Parameterization};
use cosserat::kinematics::{curvature_vector, eps_skew, hmul, norm, rotation, Mat3, Quaternion, Vec3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn matvec(a: &Dense, v: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Explicit inverse BFGS update `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`.
pub fn bfgs_update(h: &Dense, s: &[f64], y: &[f64]) -> Dense {
    let n = s.len();
    let rho = 1.0 / dot(s, y);
    let mut left = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            left[i][j] = f64::from(u8::from(i == j)) - rho * s[i] * y[j];
        }
    }
    let mut lh = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            lh[i][j] = (0..n).map(|k| left[i][k] * h[k][j]).sum();
        }
    }
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            // right factor is the transpose of the left one
            out[i][j] = (0..n).map(|k| lh[i][k] * left[j][k]).sum::<f64>() + rho * s[i] * s[j];
        }
    }
    out
}

/// `BᵀB + I` for a square `B`.
pub fn spd_from(b: &Dense) -> Dense {
    let n = b.len();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = (0..n).map(|k| b[k][i] * b[k][j]).sum::<f64>() + f64::from(u8::from(i == j));
        }
    }
    a
}

/// Twisting field `(cos(a x/2), 0, 0, sin(a x/2))` along one axis.
pub fn twist(a: f64, x: f64) -> Quaternion {
    Quaternion::new((0.5 * a * x).cos(), 0.0, 0.0, (0.5 * a * x).sin())
}

fn central(f: impl Fn(f64) -> Quaternion, x: f64, eta: f64) -> Quaternion {
    (f(x + eta) - f(x - eta)).scale(0.5 / eta)
}

fn second(f: impl Fn(f64) -> Quaternion, x: f64, eta: f64) -> Quaternion {
    (f(x + eta) - f(x).scale(2.0) + f(x - eta)).scale(1.0 / (eta * eta))
}

/// `‖ΔR − R eps(K)‖` with both derivatives taken by central differences.
pub fn rotation_derivative_error(a: f64, x: f64, eta: f64) -> f64 {
    let r = |s: f64| rotation(twist(a, s)).unwrap();
    let dr = (r(x + eta) - r(x - eta)) * (0.5 / eta);
    let q = twist(a, x);
    let k = curvature_vector(q.conjugate(), central(|s| twist(a, s), x, eta));
    (dr - r(x) * eps_skew(k.vector)).frobenius_norm()
}

/// Mismatch between the differenced curvature vector and
/// `2 q̄ (∂∂q − ∂q q̄ ∂q)` with every derivative differenced.
pub fn curvature_derivative_error(a: f64, x: f64, eta: f64) -> f64 {
    let k_at = |s: f64| {
        let q = twist(a, s);
        curvature_vector(q.conjugate(), central(|t| twist(a, t), s, eta)).vector
    };
    let (kp, km) = (k_at(x + eta), k_at(x - eta));
    let dk: Vec3 = [0, 1, 2].map(|i| (kp[i] - km[i]) / (2.0 * eta));
    let q = twist(a, x);
    let dq = central(|s| twist(a, s), x, eta);
    let ddq = second(|s| twist(a, s), x, eta);
    let rhs = hmul(q.conjugate(), ddq - hmul(hmul(dq, q.conjugate()), dq)).scale(2.0);
    let v = rhs.vector();
    let diff = [dk[0] - v[0], dk[1] - v[1], dk[2] - v[2]];
    (norm(diff).powi(2) + rhs.w * rhs.w).sqrt()
}

/// Error ratios under three successive halvings of the spacing, from 0.1.
pub fn halving_ratios(err: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut eta = 0.1;
    let mut out = Vec::new();
    for _ in 0..3 {
        out.push(err(eta) / err(0.5 * eta));
        eta *= 0.5;
    }
    out
}

pub fn random_unit_quaternion(rng: &mut ChaCha8Rng) -> Quaternion {
    loop {
        let q = Quaternion::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        if q.modulus_sq() > 1e-2 {
            return q.normalized().unwrap();
        }
    }
}

pub fn random_state(grid: &Grid3, param: Parameterization, rng: &mut ChaCha8Rng, unit: bool) -> FieldState {
    let mut s = FieldState::reference(grid, param);
    for n in 0..grid.node_count() {
        for a in 0..3 {
            s.phi[n][a] += 0.05 * rng.gen_range(-1.0..1.0);
        }
        s.gamma[n] = 0.05 * rng.gen_range(-1.0..1.0);
        match param {
            Parameterization::Quaternion => {
                let q = Quaternion::new(
                    1.0 + 0.3 * rng.gen_range(-1.0..1.0),
                    0.3 * rng.gen_range(-1.0..1.0),
                    0.3 * rng.gen_range(-1.0..1.0),
                    0.3 * rng.gen_range(-1.0..1.0),
                );
                let q = q.normalized().unwrap();
                let scale = if unit { 1.0 } else { 1.0 + 0.05 * rng.gen_range(-1.0..1.0) };
                s.rot[n] = q.scale(scale).to_array();
            }
            Parameterization::Euler => {
                for b in 0..3 {
                    s.rot[n][b] = 0.4 * rng.gen_range(-1.0..1.0);
                }
            }
        }
    }
    s
}

/// Fourth-order central difference along one unknown.
fn difference_quotient(x: &[f64], k: usize, h: f64, eval: &dyn Fn(&[f64]) -> f64) -> f64 {
    let mut y = x.to_vec();
    let mut at = |t: f64| {
        y[k] = x[k] + t;
        eval(&y)
    };
    (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h)
}

/// Worst relative mismatch between the analytic gradient and differences
/// over `samples` random unknowns of a perturbed state with hardening,
/// body force and external couple switched on.
pub fn gradient_check(variant: CurvatureVariant, rng: &mut ChaCha8Rng, samples: usize) -> f64 {
    let grid = Grid3::new([1.0, 1.2, 0.9], [4, 4, 4]).unwrap();
    let p = MaterialParams {
        curvature: variant,
        rho: 50.0,
        sigma_y: 3.0,
        f_ext: [0.4, -1.1, 0.3],
        m_ext: Mat3([[0.2, -0.1, 0.0], [0.5, 0.3, 0.1], [-0.2, 0.0, 0.4]]),
        ..MaterialParams::shear_benchmark()
    };
    let param = p.parameterization();
    let state = random_state(&grid, param, rng, false);
    // γ⁰ keeps |γ − γ⁰| clear of the regularization kink at ±ε
    let gamma0: Vec<f64> = state.gamma.iter().map(|g| g - 0.01 - 0.02 * rng.gen::<f64>()).collect();
    let kappa0: Vec<f64> = (0..grid.node_count()).map(|_| -0.1 * rng.gen::<f64>()).collect();
    let hist = PlasticHistory::new(gamma0, kappa0).unwrap();
    let layout = DofLayout::full(&grid, param);
    let x = pack(&state, &layout).unwrap();
    let g = total_gradient(&state, &hist, &grid, &p, &layout).unwrap();
    let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let eval = |y: &[f64]| {
        let s = unpack(y, &layout, &state).unwrap();
        total_energy(&s, &hist, &grid, &p).unwrap()
    };
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let k = rng.gen_range(0..layout.len());
        let fd = difference_quotient(&x, k, 1e-4, &eval);
        // relative to the component, floored at a small fraction of the largest one
        worst = worst.max((fd - g[k]).abs() / g[k].abs().max(1e-3 * gmax));
    }
    worst
}
