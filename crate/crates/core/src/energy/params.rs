use crate::error::{Error, Result};
use crate::grid::Parameterization;
use crate::kinematics::{dot, norm, Mat3, Vec3};

/// Which curvature energy is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurvatureVariant {
    /// `μ₂ Σ_l ‖∂_l R(q)‖²` with the normalized quaternion rotation.
    Full,
    /// `2μ₂ Σ_l |∂_l q|²`.
    Simplified,
    /// `2μ₂ Σ_l |∂_l α|²` over Euler angles.
    Euler,
}

impl CurvatureVariant {
    pub fn parameterization(self) -> Parameterization {
        match self {
            CurvatureVariant::Full | CurvatureVariant::Simplified => Parameterization::Quaternion,
            CurvatureVariant::Euler => Parameterization::Euler,
        }
    }
}

/// Constitutive and loading constants of the energy functional.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialParams {
    pub mu: f64,
    pub lambda: f64,
    /// Cosserat couple modulus.
    pub mu_c: f64,
    /// Curvature modulus `μ L_c² / 2`.
    pub mu2: f64,
    /// Dislocation energy constant.
    pub rho: f64,
    pub sigma_y: f64,
    /// Weight of the unit-norm penalty `Λ(|q|² − 1)²`.
    pub penalty: f64,
    /// Half-width of the smoothed modulus.
    pub reg_eps: f64,
    /// Slip direction `m`.
    pub slip: Vec3,
    /// Slip-plane normal `n`.
    pub normal: Vec3,
    pub f_ext: Vec3,
    pub m_ext: Mat3,
    pub curvature: CurvatureVariant,
}

impl MaterialParams {
    /// Simple-shear benchmark set on the unit cube.
    pub fn shear_benchmark() -> Self {
        MaterialParams {
            mu: 1e4,
            lambda: 1e3,
            mu_c: 2e4,
            mu2: 100.0,
            rho: 0.0,
            sigma_y: 0.0,
            penalty: 20.0,
            reg_eps: 1e-4,
            slip: [1.0, 0.0, 0.0],
            normal: [0.0, 1.0, 0.0],
            f_ext: [0.0; 3],
            m_ext: Mat3::ZERO,
            curvature: CurvatureVariant::Full,
        }
    }

    /// Bending-rod set on `(0,5)×(0,1)×(0,2)`.
    pub fn bending_benchmark() -> Self {
        MaterialParams {
            mu: 0.025,
            lambda: 0.025,
            mu_c: 0.4,
            mu2: 0.02,
            curvature: CurvatureVariant::Simplified,
            ..MaterialParams::shear_benchmark()
        }
    }

    pub fn parameterization(&self) -> Parameterization {
        self.curvature.parameterization()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mu", self.mu),
            ("lambda", self.lambda),
            ("mu_c", self.mu_c),
            ("mu2", self.mu2),
            ("penalty", self.penalty),
            ("reg_eps", self.reg_eps),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("rho", self.rho), ("sigma_y", self.sigma_y)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        let tol = 1e-12;
        if (norm(self.slip) - 1.0).abs() > tol || (norm(self.normal) - 1.0).abs() > tol {
            return Err(Error::Config("slip vector and normal must be unit vectors".into()));
        }
        if dot(self.slip, self.normal).abs() > tol {
            return Err(Error::Config("slip vector must be orthogonal to the slip normal".into()));
        }
        if !(self.f_ext.iter().all(|v| v.is_finite()) && self.m_ext.is_finite()) {
            return Err(Error::Config("external loads must be finite".into()));
        }
        Ok(())
    }
}

/// Slip and dislocation density of the previous time step, per node.
#[derive(Debug, Clone, PartialEq)]
pub struct PlasticHistory {
    pub gamma0: Vec<f64>,
    pub kappa0: Vec<f64>,
}

impl PlasticHistory {
    /// Dislocation-free, unslipped history.
    pub fn zeros(nodes: usize) -> Self {
        PlasticHistory {
            gamma0: vec![0.0; nodes],
            kappa0: vec![0.0; nodes],
        }
    }

    /// Checked constructor: lengths must agree and `κ⁰ ≤ 0` everywhere.
    pub fn new(gamma0: Vec<f64>, kappa0: Vec<f64>) -> Result<Self> {
        if gamma0.len() != kappa0.len() {
            return Err(Error::Structure {
                expected: gamma0.len(),
                actual: kappa0.len(),
            });
        }
        if let Some(k) = kappa0.iter().find(|k| !(**k <= 0.0)) {
            return Err(Error::Contract(format!(
                "dislocation density must be non-positive, got {k}"
            )));
        }
        if gamma0.iter().any(|g| !g.is_finite()) {
            return Err(Error::Evaluation("previous slip".into()));
        }
        Ok(PlasticHistory { gamma0, kappa0 })
    }

    pub fn len(&self) -> usize {
        self.gamma0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma0.is_empty()
    }
}
