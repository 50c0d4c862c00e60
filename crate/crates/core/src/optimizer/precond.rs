use super::pairs::{cholesky_scale, two_loop, CurvaturePairs};
use super::vecops::{all_finite, dot, norm};
use crate::error::{Error, Result};
use crate::grid::{DofLayout, Grid3};

/// How the band matrix enters the two-loop recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandMode {
    /// `r = Z g`.
    Multiply,
    /// `r = Z⁻¹ g`.
    Solve,
}

/// Initial matrix `H⁰` of the two-loop recursion.
#[derive(Debug, Clone)]
pub enum Preconditioner {
    Identity,
    /// `δ I` with `δ` from the most recent pair of the running history.
    CholeskyScaling,
    BandZ(BandZ),
    WarmPairs(WarmPairs),
}

impl Preconditioner {
    /// Write `H⁰ g` to `out`. `history` is the pair buffer of the calling recursion.
    pub fn apply(&self, g: &[f64], history: &CurvaturePairs, out: &mut [f64]) -> Result<()> {
        if g.len() != out.len() {
            return Err(Error::Structure {
                expected: g.len(),
                actual: out.len(),
            });
        }
        match self {
            Preconditioner::Identity => out.copy_from_slice(g),
            Preconditioner::CholeskyScaling => {
                let d = cholesky_scale(history.last());
                for (o, v) in out.iter_mut().zip(g) {
                    *o = d * v;
                }
            }
            Preconditioner::BandZ(z) => z.apply(g, out)?,
            Preconditioner::WarmPairs(w) => w.apply(g, history, out)?,
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preconditioner::Identity => "identity",
            Preconditioner::CholeskyScaling => "cholesky",
            Preconditioner::BandZ(z) => match z.mode {
                BandMode::Multiply => "band-z-multiply",
                BandMode::Solve => "band-z-solve",
            },
            Preconditioner::WarmPairs(_) => "warm-pairs",
        }
    }
}

/// Band matrix with diagonal 2 and −1 at index offsets ±2 along active axes,
/// acting componentwise on the rotation slots of a DOF layout. Other slots
/// pass through unchanged. Neighbours without free rotation slots are omitted.
#[derive(Debug, Clone)]
pub struct BandZ {
    nodes: [usize; 3],
    strides: [usize; 3],
    /// Rotation offset per grid node.
    rot: Vec<Option<usize>>,
    comps: usize,
    axes: [bool; 3],
    prefactor: [f64; 3],
    mode: BandMode,
    len: usize,
}

const CG_TOL: f64 = 1e-12;

impl BandZ {
    pub fn new(
        grid: &Grid3,
        layout: &DofLayout,
        axes: [bool; 3],
        prefactor: [f64; 3],
        mode: BandMode,
    ) -> Result<Self> {
        if !axes.iter().any(|a| *a) {
            return Err(Error::Config("band preconditioner needs an active axis".into()));
        }
        if prefactor.iter().zip(axes).any(|(p, a)| a && !(*p > 0.0 && p.is_finite())) {
            return Err(Error::Config("band prefactors must be positive".into()));
        }
        if layout.node_count() != grid.node_count() {
            return Err(Error::Structure {
                expected: grid.node_count(),
                actual: layout.node_count(),
            });
        }
        let rot = (0..grid.node_count()).map(|n| layout.slots(n).rot).collect();
        Ok(BandZ {
            nodes: grid.nodes_per_axis(),
            strides: grid.strides(),
            rot,
            comps: layout.parameterization().rot_dim(),
            axes,
            prefactor,
            mode,
            len: layout.len(),
        })
    }

    /// Prefactors `w μ₂ / η_l²` on the active axes.
    pub fn curvature_prefactors(grid: &Grid3, mu2: f64) -> [f64; 3] {
        let eta = grid.spacing();
        let w = grid.cell_volume();
        [0, 1, 2].map(|l| w * mu2 / (eta[l] * eta[l]))
    }

    pub fn mode(&self) -> BandMode {
        self.mode
    }

    pub fn active_axes(&self) -> [bool; 3] {
        self.axes
    }

    fn n_active(&self) -> f64 {
        self.axes.iter().filter(|a| **a).count() as f64
    }

    fn neighbour(&self, node: usize, axis: usize, forward: bool) -> Option<usize> {
        let s = self.strides[axis];
        let i = (node / s) % self.nodes[axis];
        let j = if forward {
            if i + 2 >= self.nodes[axis] {
                return None;
            }
            node + 2 * s
        } else {
            if i < 2 {
                return None;
            }
            node - 2 * s
        };
        self.rot[j]
    }

    /// `Z g` on the rotation slots; other slots of `out` are left untouched.
    fn multiply_rot(&self, g: &[f64], out: &mut [f64]) {
        let diag = 2.0 / self.n_active();
        for (node, off) in self.rot.iter().enumerate() {
            let Some(o) = *off else { continue };
            for b in 0..self.comps {
                out[o + b] = 0.0;
            }
            for l in 0..3 {
                if !self.axes[l] {
                    continue;
                }
                let p = self.prefactor[l];
                for b in 0..self.comps {
                    let mut acc = diag * g[o + b];
                    if let Some(nb) = self.neighbour(node, l, true) {
                        acc -= g[nb + b];
                    }
                    if let Some(nb) = self.neighbour(node, l, false) {
                        acc -= g[nb + b];
                    }
                    out[o + b] += p * acc;
                }
            }
        }
    }

    /// Apply `Z` or `Z⁻¹` according to the mode.
    pub fn apply(&self, g: &[f64], out: &mut [f64]) -> Result<()> {
        if g.len() != self.len || out.len() != self.len {
            return Err(Error::Structure {
                expected: self.len,
                actual: g.len(),
            });
        }
        out.copy_from_slice(g);
        match self.mode {
            BandMode::Multiply => {
                self.multiply_rot(g, out);
                Ok(())
            }
            BandMode::Solve => self.solve_rot(g, out),
        }
    }

    /// Plain `Z g`, regardless of mode.
    pub fn multiply(&self, g: &[f64]) -> Result<Vec<f64>> {
        if g.len() != self.len {
            return Err(Error::Structure {
                expected: self.len,
                actual: g.len(),
            });
        }
        let mut out = g.to_vec();
        self.multiply_rot(g, &mut out);
        Ok(out)
    }

    /// Plain `Z⁻¹ g`, regardless of mode.
    pub fn solve(&self, g: &[f64]) -> Result<Vec<f64>> {
        if g.len() != self.len {
            return Err(Error::Structure {
                expected: self.len,
                actual: g.len(),
            });
        }
        let mut out = g.to_vec();
        self.solve_rot(g, &mut out)?;
        Ok(out)
    }

    fn solve_rot(&self, g: &[f64], out: &mut [f64]) -> Result<()> {
        let active: Vec<usize> = (0..3).filter(|l| self.axes[*l]).collect();
        if active.len() == 1 {
            self.solve_chains(active[0], g, out)
        } else {
            self.solve_cg(g, out)
        }
    }

    /// Single axis: independent tridiagonal chains of stride 2, solved directly.
    fn solve_chains(&self, axis: usize, g: &[f64], out: &mut [f64]) -> Result<()> {
        let p = self.prefactor[axis];
        let mut chain = Vec::new();
        let mut c = Vec::new();
        let mut d = Vec::new();
        for (node, off) in self.rot.iter().enumerate() {
            if off.is_none() || self.neighbour(node, axis, false).is_some() {
                continue;
            }
            chain.clear();
            let mut cur = node;
            chain.push(off.unwrap());
            while let Some(nb) = self.neighbour(cur, axis, true) {
                chain.push(nb);
                cur += 2 * self.strides[axis];
            }
            let n = chain.len();
            for b in 0..self.comps {
                // Thomas sweep for diag 2p, off-diagonal −p.
                c.clear();
                d.clear();
                let (a_off, diag) = (-p, 2.0 * p);
                let mut denom = diag;
                c.push(a_off / denom);
                d.push(g[chain[0] + b] / denom);
                for i in 1..n {
                    denom = diag - a_off * c[i - 1];
                    if denom.abs() <= f64::EPSILON * diag {
                        return Err(Error::Preconditioner("singular band system".into()));
                    }
                    c.push(a_off / denom);
                    d.push((g[chain[i] + b] - a_off * d[i - 1]) / denom);
                }
                let mut x = d[n - 1];
                out[chain[n - 1] + b] = x;
                for i in (0..n - 1).rev() {
                    x = d[i] - c[i] * x;
                    out[chain[i] + b] = x;
                }
            }
        }
        Ok(())
    }

    /// Several axes: conjugate gradients restricted to rotation slots.
    fn solve_cg(&self, g: &[f64], out: &mut [f64]) -> Result<()> {
        let mask: Vec<usize> = self
            .rot
            .iter()
            .flatten()
            .flat_map(|o| (0..self.comps).map(move |b| o + b))
            .collect();
        let gather = |v: &[f64]| -> Vec<f64> { mask.iter().map(|i| v[*i]).collect() };
        let b = gather(g);
        let bnorm = norm(&b);
        if bnorm == 0.0 {
            for i in &mask {
                out[*i] = 0.0;
            }
            return Ok(());
        }
        let mut full = vec![0.0; self.len];
        let mut zfull = vec![0.0; self.len];
        let mut op = |v: &[f64]| -> Vec<f64> {
            for (k, i) in mask.iter().enumerate() {
                full[*i] = v[k];
            }
            self.multiply_rot(&full, &mut zfull);
            gather(&zfull)
        };
        let mut x = vec![0.0; b.len()];
        let mut r = b.clone();
        let mut dir = r.clone();
        let mut rr = dot(&r, &r);
        for _ in 0..(10 * b.len()).max(100) {
            let zd = op(&dir);
            let curv = dot(&dir, &zd);
            if !(curv > 0.0) {
                return Err(Error::Preconditioner(
                    "band matrix is not positive definite on the free rotation slots".into(),
                ));
            }
            let a = rr / curv;
            for k in 0..x.len() {
                x[k] += a * dir[k];
                r[k] -= a * zd[k];
            }
            let rr_new = dot(&r, &r);
            if rr_new.sqrt() <= CG_TOL * bnorm {
                for (k, i) in mask.iter().enumerate() {
                    out[*i] = x[k];
                }
                return if all_finite(&x) {
                    Ok(())
                } else {
                    Err(Error::Preconditioner("non-finite band solve".into()))
                };
            }
            let beta = rr_new / rr;
            rr = rr_new;
            for k in 0..dir.len() {
                dir[k] = r[k] + beta * dir[k];
            }
        }
        Err(Error::Preconditioner("band solve did not converge".into()))
    }
}

/// Pairs from an earlier run on a subspace, embedded into a larger problem.
#[derive(Debug, Clone)]
pub struct WarmPairs {
    pub pairs: CurvaturePairs,
    /// `H⁰` of the embedded recursion.
    pub inner: Box<Preconditioner>,
    /// Position of each subspace coordinate in the full vector.
    pub embedding: Vec<usize>,
}

impl WarmPairs {
    /// Subspace coordinates get the stored recursion, the rest `δ I` from the
    /// running history.
    fn apply(&self, g: &[f64], history: &CurvaturePairs, out: &mut [f64]) -> Result<()> {
        let d = cholesky_scale(history.last());
        for (o, v) in out.iter_mut().zip(g) {
            *o = d * v;
        }
        if self.embedding.iter().any(|i| *i >= g.len()) {
            return Err(Error::Structure {
                expected: g.len(),
                actual: self.embedding.iter().copied().max().unwrap_or(0) + 1,
            });
        }
        let sub: Vec<f64> = self.embedding.iter().map(|i| g[*i]).collect();
        let r = two_loop(&sub, &self.pairs, &self.inner)?;
        for (i, v) in self.embedding.iter().zip(r) {
            out[*i] = v;
        }
        Ok(())
    }

    /// Map rotation slots of `from` onto those of `to`, node by node.
    pub fn rotation_embedding(from: &DofLayout, to: &DofLayout) -> Result<Vec<usize>> {
        if from.node_count() != to.node_count() || from.parameterization() != to.parameterization() {
            return Err(Error::Contract("layouts describe different grids".into()));
        }
        let comps = from.parameterization().rot_dim();
        let mut map = vec![usize::MAX; from.len()];
        for node in 0..from.node_count() {
            if let (Some(a), Some(b)) = (from.slots(node).rot, to.slots(node).rot) {
                for c in 0..comps {
                    map[a + c] = b + c;
                }
            }
        }
        if map.iter().any(|v| *v == usize::MAX) {
            return Err(Error::Contract("subspace has slots other than rotations".into()));
        }
        Ok(map)
    }
}
