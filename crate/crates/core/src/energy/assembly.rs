//! Discrete energy and analytic gradient on the structured grid.
//!
//! Assembly runs in three node-parallel passes so that no pass writes to a
//! neighbour's slot:
//!
//! 1. rotation matrix (and its parameter Jacobian) at every node;
//! 2. pointwise energy density plus the sensitivities of that density with
//!    respect to the local difference quotients `Dφ` and `∂_l X`, where `X` is
//!    the field entering the curvature energy;
//! 3. a transposed-stencil gather that turns those sensitivities into the
//!    gradient with respect to nodal unknowns.
//!
//! Per-node energies are summed in node order, so results do not depend on
//! the number of worker threads.

use rayon::prelude::*;

use super::constitutive::{fp_inverse, reg_abs, reg_abs_derivative, stretch_energy_and_stress};
use super::params::{CurvatureVariant, MaterialParams, PlasticHistory};
use crate::error::{Error, Result};
use crate::grid::{DofLayout, FieldState, Grid3, Parameterization};
use crate::kinematics::{
    dot, rotation_euler, rotation_euler_with_jacobian, rotation_normalized, rotation_normalized_with_jacobian,
    Mat3, Quaternion, Vec3,
};

const MIN_PAR_LEN: usize = 512;

/// Integrated energy split by term.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub stretch: f64,
    pub curvature: f64,
    /// `∫ Λ(|q|² − 1)²`; zero for Euler angles.
    pub penalty: f64,
    /// `−∫ f·φ + M : R`.
    pub external: f64,
    /// `∫ ρ(γ−γ⁰)² + r_ε(γ−γ⁰)(σ_Y − 2ρκ⁰)`.
    pub plastic: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.stretch + self.curvature + self.penalty + self.external + self.plastic
    }

    fn add(&mut self, e: &[f64; 5]) {
        self.stretch += e[0];
        self.curvature += e[1];
        self.penalty += e[2];
        self.external += e[3];
        self.plastic += e[4];
    }
}

/// Gradient with respect to every nodal unknown, fixed or not.
#[derive(Debug, Clone, Default)]
pub struct NodalGradient {
    pub phi: Vec<Vec3>,
    pub rot: Vec<[f64; 4]>,
    pub gamma: Vec<f64>,
}

impl NodalGradient {
    /// Restrict to the free unknowns of `layout`.
    pub fn gather(&self, layout: &DofLayout, out: &mut [f64]) {
        let rd = layout.parameterization().rot_dim();
        for n in 0..layout.node_count() {
            let s = layout.slots(n);
            if let Some(o) = s.phi {
                out[o..o + 3].copy_from_slice(&self.phi[n]);
            }
            if let Some(o) = s.rot {
                out[o..o + rd].copy_from_slice(&self.rot[n][..rd]);
            }
            if let Some(o) = s.gamma {
                out[o] = self.gamma[n];
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct NodeLocal {
    energy: [f64; 5],
    /// `ω ∂e/∂(Dφ)`, indexed `[component][axis]`.
    d_f: Mat3,
    /// `ω ∂e/∂(∂_l X)` per axis `l`.
    d_x: [[f64; 9]; 3],
    /// Local part of `∂e/∂R` (stretch and external couple).
    d_r: Mat3,
    /// Local part of the rotation-parameter gradient (penalty).
    d_rot: [f64; 4],
    d_gamma: f64,
}

/// Energy functional of one time step on a fixed grid.
#[derive(Debug, Clone)]
pub struct CosseratEnergy {
    grid: Grid3,
    params: MaterialParams,
    history: PlasticHistory,
    weights: Vec<f64>,
    rot: Vec<Mat3>,
    local: Vec<NodeLocal>,
}

impl CosseratEnergy {
    pub fn new(grid: Grid3, params: MaterialParams, history: PlasticHistory) -> Result<Self> {
        params.validate()?;
        if history.len() != grid.node_count() {
            return Err(Error::Structure {
                expected: grid.node_count(),
                actual: history.len(),
            });
        }
        let weights = grid.quadrature_weights();
        let n = grid.node_count();
        Ok(CosseratEnergy {
            grid,
            params,
            history,
            weights,
            rot: vec![Mat3::IDENTITY; n],
            local: vec![NodeLocal::default(); n],
        })
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn params(&self) -> &MaterialParams {
        &self.params
    }

    pub fn history(&self) -> &PlasticHistory {
        &self.history
    }

    pub fn set_history(&mut self, history: PlasticHistory) -> Result<()> {
        if history.len() != self.grid.node_count() {
            return Err(Error::Structure {
                expected: self.grid.node_count(),
                actual: history.len(),
            });
        }
        self.history = history;
        Ok(())
    }

    fn check_state(&self, state: &FieldState) -> Result<()> {
        if state.node_count() != self.grid.node_count() {
            return Err(Error::Structure {
                expected: self.grid.node_count(),
                actual: state.node_count(),
            });
        }
        if state.param != self.params.parameterization() {
            return Err(Error::Contract(
                "state parameterization does not match the curvature variant".into(),
            ));
        }
        if !state.is_finite() {
            return Err(Error::Evaluation("field state".into()));
        }
        Ok(())
    }

    /// Integrated energy.
    pub fn energy(&mut self, state: &FieldState) -> Result<EnergyBreakdown> {
        self.run(state, None)
    }

    /// Integrated energy and its gradient with respect to all nodal unknowns.
    pub fn energy_and_gradient(
        &mut self,
        state: &FieldState,
        grad: &mut NodalGradient,
    ) -> Result<EnergyBreakdown> {
        self.run(state, Some(grad))
    }

    fn run(&mut self, state: &FieldState, grad: Option<&mut NodalGradient>) -> Result<EnergyBreakdown> {
        self.check_state(state)?;
        let n = self.grid.node_count();

        // pass 1: rotations
        let param = state.param;
        let rot_result: Result<()> = self
            .rot
            .par_iter_mut()
            .with_min_len(MIN_PAR_LEN)
            .enumerate()
            .try_for_each(|(i, slot)| {
                *slot = node_rotation_matrix(state, param, i)?;
                Ok(())
            });
        rot_result?;

        // pass 2: local densities and sensitivities
        {
            let grid = &self.grid;
            let params = &self.params;
            let hist = &self.history;
            let weights = &self.weights;
            let rot = &self.rot;
            self.local
                .par_iter_mut()
                .with_min_len(MIN_PAR_LEN)
                .enumerate()
                .for_each(|(i, slot)| {
                    *slot = node_local(grid, params, hist, weights[i], rot, state, i);
                });
        }

        let mut total = EnergyBreakdown::default();
        for l in &self.local {
            total.add(&l.energy);
        }
        if !total.total().is_finite() {
            return Err(Error::Evaluation("energy".into()));
        }

        if let Some(g) = grad {
            g.phi.resize(n, [0.0; 3]);
            g.rot.resize(n, [0.0; 4]);
            g.gamma.resize(n, 0.0);
            let grid = &self.grid;
            let params = &self.params;
            let weights = &self.weights;
            let local = &self.local;
            g.phi
                .par_iter_mut()
                .zip(g.rot.par_iter_mut())
                .zip(g.gamma.par_iter_mut())
                .with_min_len(MIN_PAR_LEN)
                .enumerate()
                .for_each(|(i, ((gp, gr), gg))| {
                    let (p, r, y) = node_gradient(grid, params, weights[i], state, local, i);
                    *gp = p;
                    *gr = r;
                    *gg = y;
                });
            let finite = g.phi.iter().flatten().chain(g.rot.iter().flatten()).chain(&g.gamma).all(|v| v.is_finite());
            if !finite {
                return Err(Error::Evaluation("gradient".into()));
            }
        }
        Ok(total)
    }
}

fn node_rotation_matrix(state: &FieldState, param: Parameterization, i: usize) -> Result<Mat3> {
    match param {
        Parameterization::Quaternion => {
            rotation_normalized(state.quaternion(i))
                .map_err(|_| Error::Evaluation(format!("zero quaternion at node {i}")))
        }
        Parameterization::Euler => Ok(rotation_euler(state.euler(i))),
    }
}

/// Rotation and its parameter Jacobian; the quaternion is nonzero after pass 1.
fn node_rotation_jacobian(state: &FieldState, param: Parameterization, i: usize) -> [Mat3; 4] {
    match param {
        Parameterization::Quaternion => rotation_normalized_with_jacobian(state.quaternion(i)).1,
        Parameterization::Euler => {
            let (_, j) = rotation_euler_with_jacobian(state.euler(i));
            [j[0], j[1], j[2], Mat3::ZERO]
        }
    }
}

/// Components of the field differentiated by the curvature energy.
#[inline]
fn curvature_field(variant: CurvatureVariant, rot: &[Mat3], state: &FieldState, i: usize) -> [f64; 9] {
    let mut x = [0.0; 9];
    match variant {
        CurvatureVariant::Full => {
            let r = &rot[i].0;
            for a in 0..3 {
                x[3 * a..3 * a + 3].copy_from_slice(&r[a]);
            }
        }
        CurvatureVariant::Simplified => x[..4].copy_from_slice(&state.rot[i]),
        CurvatureVariant::Euler => x[..3].copy_from_slice(&state.rot[i][..3]),
    }
    x
}

fn curvature_dim(variant: CurvatureVariant) -> usize {
    match variant {
        CurvatureVariant::Full => 9,
        CurvatureVariant::Simplified => 4,
        CurvatureVariant::Euler => 3,
    }
}

/// Coefficient `c` in `W_c = c Σ_l |∂_l X|²`.
fn curvature_coefficient(p: &MaterialParams) -> f64 {
    match p.curvature {
        CurvatureVariant::Full => p.mu2,
        CurvatureVariant::Simplified | CurvatureVariant::Euler => 2.0 * p.mu2,
    }
}

fn node_local(
    grid: &Grid3,
    p: &MaterialParams,
    hist: &PlasticHistory,
    omega: f64,
    rot: &[Mat3],
    state: &FieldState,
    i: usize,
) -> NodeLocal {
    let ijk = grid.ijk(i);
    let strides = grid.strides();

    // deformation gradient F[a][l] = ∂_l φ_a
    let mut f = Mat3::ZERO;
    for l in 0..3 {
        for (o, c) in grid.diff_stencil(ijk[l], l) {
            let j = (i as isize + o * strides[l] as isize) as usize;
            let ph = state.phi[j];
            for a in 0..3 {
                f.0[a][l] += c * ph[a];
            }
        }
    }

    let r = rot[i];
    let gamma = state.gamma[i];
    let pinv = fp_inverse(gamma, p.slip, p.normal);
    let fp = f * pinv;
    let ue = r.transpose() * fp;
    let (w_st, s) = stretch_energy_and_stress(&ue, p);

    // curvature
    let variant = p.curvature;
    let xd = curvature_dim(variant);
    let coef = curvature_coefficient(p);
    let mut w_c = 0.0;
    let mut d_x = [[0.0; 9]; 3];
    for l in 0..3 {
        let mut dx = [0.0; 9];
        for (o, c) in grid.diff_stencil(ijk[l], l) {
            let j = (i as isize + o * strides[l] as isize) as usize;
            let xj = curvature_field(variant, rot, state, j);
            for t in 0..xd {
                dx[t] += c * xj[t];
            }
        }
        for t in 0..xd {
            w_c += coef * dx[t] * dx[t];
            d_x[l][t] = omega * 2.0 * coef * dx[t];
        }
    }

    // unit-norm penalty
    let mut w_pen = 0.0;
    let mut d_rot = [0.0; 4];
    if state.param == Parameterization::Quaternion {
        let q = state.rot[i];
        let dev = q.iter().map(|v| v * v).sum::<f64>() - 1.0;
        w_pen = p.penalty * dev * dev;
        for b in 0..4 {
            d_rot[b] = omega * p.penalty * 4.0 * dev * q[b];
        }
    }

    let w_ext = -dot(p.f_ext, state.phi[i]) - p.m_ext.inner(&r);

    let dg = gamma - hist.gamma0[i];
    let c_dis = p.sigma_y - 2.0 * p.rho * hist.kappa0[i];
    let w_pl = p.rho * dg * dg + c_dis * reg_abs(dg, p.reg_eps);

    // sensitivities: Ue = Rᵀ F P
    let d_f = r * s * pinv.transpose() * omega;
    let d_r = (fp * s.transpose() - p.m_ext) * omega;
    let d_p = f.transpose() * r * s;
    let d_gamma_st = -dot(p.slip, d_p.mul_vec(p.normal));
    let d_gamma = omega * (d_gamma_st + 2.0 * p.rho * dg + c_dis * reg_abs_derivative(dg, p.reg_eps));

    NodeLocal {
        energy: [omega * w_st, omega * w_c, omega * w_pen, omega * w_ext, omega * w_pl],
        d_f,
        d_x,
        d_r,
        d_rot,
        d_gamma,
    }
}

fn node_gradient(
    grid: &Grid3,
    p: &MaterialParams,
    omega: f64,
    state: &FieldState,
    local: &[NodeLocal],
    i: usize,
) -> (Vec3, [f64; 4], f64) {
    let ijk = grid.ijk(i);
    let dims = grid.intervals();
    let strides = grid.strides();
    let xd = curvature_dim(p.curvature);

    let mut g_phi = [-omega * p.f_ext[0], -omega * p.f_ext[1], -omega * p.f_ext[2]];
    let mut g_x = [0.0; 9];
    for l in 0..3 {
        let il = ijk[l];
        let lo = il.saturating_sub(1);
        let hi = (il + 1).min(dims[l]);
        for ip in lo..=hi {
            let offset = il as isize - ip as isize;
            let coeff = grid
                .diff_stencil(ip, l)
                .iter()
                .find(|(o, _)| *o == offset)
                .map(|&(_, c)| c);
            let Some(c) = coeff else { continue };
            let j = (i as isize - offset * strides[l] as isize) as usize;
            let nl = &local[j];
            for a in 0..3 {
                g_phi[a] += c * nl.d_f.0[a][l];
            }
            for t in 0..xd {
                g_x[t] += c * nl.d_x[l][t];
            }
        }
    }

    let own = &local[i];
    let jac = node_rotation_jacobian(state, state.param, i);
    let mut g_rot = own.d_rot;
    match p.curvature {
        CurvatureVariant::Full => {
            let mut d_r = own.d_r;
            for a in 0..3 {
                for b in 0..3 {
                    d_r.0[a][b] += g_x[3 * a + b];
                }
            }
            for b in 0..4 {
                g_rot[b] += d_r.inner(&jac[b]);
            }
        }
        CurvatureVariant::Simplified => {
            for b in 0..4 {
                g_rot[b] += own.d_r.inner(&jac[b]) + g_x[b];
            }
        }
        CurvatureVariant::Euler => {
            for b in 0..3 {
                g_rot[b] += own.d_r.inner(&jac[b]) + g_x[b];
            }
        }
    }
    (g_phi, g_rot, own.d_gamma)
}

/// Integrated energy `E_ε` of a state.
pub fn total_energy(
    state: &FieldState,
    hist: &PlasticHistory,
    grid: &Grid3,
    p: &MaterialParams,
) -> Result<f64> {
    let mut e = CosseratEnergy::new(grid.clone(), p.clone(), hist.clone())?;
    Ok(e.energy(state)?.total())
}

/// Gradient of `E_ε` with respect to the free unknowns of `layout`.
pub fn total_gradient(
    state: &FieldState,
    hist: &PlasticHistory,
    grid: &Grid3,
    p: &MaterialParams,
    layout: &DofLayout,
) -> Result<Vec<f64>> {
    let mut e = CosseratEnergy::new(grid.clone(), p.clone(), hist.clone())?;
    let mut g = NodalGradient::default();
    e.energy_and_gradient(state, &mut g)?;
    let mut out = vec![0.0; layout.len()];
    g.gather(layout, &mut out);
    Ok(out)
}

/// Curvature energy density at one node.
pub fn curvature_energy_at_node(
    state: &FieldState,
    node: usize,
    grid: &Grid3,
    p: &MaterialParams,
) -> Result<f64> {
    if node >= grid.node_count() {
        return Err(Error::Index {
            index: grid.ijk(node),
            dims: grid.intervals(),
        });
    }
    let ijk = grid.ijk(node);
    let strides = grid.strides();
    let fetch = |j: usize| -> Result<[f64; 9]> {
        let mut x = [0.0; 9];
        match p.curvature {
            CurvatureVariant::Full => {
                let r = rotation_normalized(state.quaternion(j))?;
                for a in 0..3 {
                    x[3 * a..3 * a + 3].copy_from_slice(&r.0[a]);
                }
            }
            CurvatureVariant::Simplified => x[..4].copy_from_slice(&state.rot[j]),
            CurvatureVariant::Euler => x[..3].copy_from_slice(&state.rot[j][..3]),
        }
        Ok(x)
    };
    let coef = curvature_coefficient(p);
    let mut w = 0.0;
    for l in 0..3 {
        let mut dx = [0.0; 9];
        for (o, c) in grid.diff_stencil(ijk[l], l) {
            let xj = fetch((node as isize + o * strides[l] as isize) as usize)?;
            for t in 0..9 {
                dx[t] += c * xj[t];
            }
        }
        w += coef * dx.iter().map(|v| v * v).sum::<f64>();
    }
    Ok(w)
}

/// `∫ Λ(|q|² − 1)²` by nodal quadrature; zero for Euler angles.
pub fn constraint_violation(state: &FieldState, grid: &Grid3, penalty: f64) -> f64 {
    if state.param != Parameterization::Quaternion {
        return 0.0;
    }
    grid.quadrature_weights()
        .iter()
        .zip(&state.rot)
        .map(|(w, q)| {
            let d = q.iter().map(|v| v * v).sum::<f64>() - 1.0;
            w * penalty * d * d
        })
        .sum()
}

/// `Σ_l |K_e^l|²` at a node, with the same difference stencil as the energy.
pub fn curvature_vector_norm_sq(state: &FieldState, node: usize, grid: &Grid3) -> f64 {
    let ijk = grid.ijk(node);
    let strides = grid.strides();
    let q = state.quaternion(node);
    let mut s = 0.0;
    for l in 0..3 {
        let mut dq = Quaternion::ZERO;
        for (o, c) in grid.diff_stencil(ijk[l], l) {
            let j = (node as isize + o * strides[l] as isize) as usize;
            dq = dq + state.quaternion(j).scale(c);
        }
        let k = crate::kinematics::curvature_vector(q.conjugate(), dq);
        s += dot(k.vector, k.vector);
    }
    s
}

/// Full curvature density with the rotation derivative taken by the chain
/// rule, `μ₂ Σ_l ‖R'(q)[Δ_l q]‖²`, where `Δ_l q` is the grid difference quotient.
pub fn curvature_density_chain_rule(
    state: &FieldState,
    node: usize,
    grid: &Grid3,
    p: &MaterialParams,
) -> f64 {
    let ijk = grid.ijk(node);
    let strides = grid.strides();
    let (_, jac) = rotation_normalized_with_jacobian(state.quaternion(node));
    let mut w = 0.0;
    for l in 0..3 {
        let mut dr = Mat3::ZERO;
        for (o, c) in grid.diff_stencil(ijk[l], l) {
            let q = state.rot[(node as isize + o * strides[l] as isize) as usize];
            for b in 0..4 {
                dr += jac[b] * (c * q[b]);
            }
        }
        w += p.mu2 * dr.frobenius_norm_sq();
    }
    w
}
