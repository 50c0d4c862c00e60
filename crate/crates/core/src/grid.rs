//! Structured box discretization, nodal fields and the packing of free
//! unknowns into a flat optimization vector.

use std::io::Write;

use crate::error::{Error, Result};
use crate::kinematics::{quat_from_rotation, rotation_euler, EulerAngles, Quaternion, Vec3};

/// Uniform grid on `(0,L1)×(0,L2)×(0,L3)` with `d_l` intervals per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid3 {
    intervals: [usize; 3],
    lengths: [f64; 3],
    spacing: [f64; 3],
    strides: [usize; 3],
}

impl Grid3 {
    pub fn new(lengths: [f64; 3], intervals: [usize; 3]) -> Result<Self> {
        for l in 0..3 {
            if intervals[l] < 2 {
                return Err(Error::Config(format!(
                    "axis {} needs at least 2 intervals, got {}",
                    l + 1,
                    intervals[l]
                )));
            }
            if !(lengths[l] > 0.0 && lengths[l].is_finite()) {
                return Err(Error::Config(format!(
                    "axis {} length must be positive, got {}",
                    l + 1,
                    lengths[l]
                )));
            }
        }
        let spacing = [0, 1, 2].map(|l| lengths[l] / intervals[l] as f64);
        let n0 = intervals[0] + 1;
        let n1 = intervals[1] + 1;
        Ok(Grid3 {
            intervals,
            lengths,
            spacing,
            strides: [1, n0, n0 * n1],
        })
    }

    pub fn intervals(&self) -> [usize; 3] {
        self.intervals
    }

    pub fn lengths(&self) -> [f64; 3] {
        self.lengths
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn strides(&self) -> [usize; 3] {
        self.strides
    }

    /// Integration factor `η1 η2 η3`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn nodes_per_axis(&self) -> [usize; 3] {
        self.intervals.map(|d| d + 1)
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_axis().iter().product()
    }

    /// Number of nodes on `∂Ω`.
    pub fn boundary_node_count(&self) -> usize {
        let interior: usize = self.intervals.iter().map(|d| d - 1).product();
        self.node_count() - interior
    }

    pub fn index(&self, [i, j, k]: [usize; 3]) -> usize {
        i + self.strides[1] * j + self.strides[2] * k
    }

    pub fn checked_index(&self, ijk: [usize; 3]) -> Result<usize> {
        if (0..3).any(|l| ijk[l] > self.intervals[l]) {
            return Err(Error::Index {
                index: ijk,
                dims: self.intervals,
            });
        }
        Ok(self.index(ijk))
    }

    pub fn ijk(&self, n: usize) -> [usize; 3] {
        let n0 = self.strides[1];
        let n1 = self.intervals[1] + 1;
        [n % n0, (n / n0) % n1, n / self.strides[2]]
    }

    pub fn coords(&self, [i, j, k]: [usize; 3]) -> Vec3 {
        [
            i as f64 * self.spacing[0],
            j as f64 * self.spacing[1],
            k as f64 * self.spacing[2],
        ]
    }

    pub fn node_coords(&self, n: usize) -> Vec3 {
        self.coords(self.ijk(n))
    }

    pub fn is_boundary(&self, ijk: [usize; 3]) -> bool {
        (0..3).any(|l| ijk[l] == 0 || ijk[l] == self.intervals[l])
    }

    pub fn is_boundary_node(&self, n: usize) -> bool {
        self.is_boundary(self.ijk(n))
    }

    /// Trapezoidal product weight `N_ijk ∈ {1, 2, 4, 8}`.
    pub fn newton_cotes_weight(&self, ijk: [usize; 3]) -> Result<u32> {
        self.checked_index(ijk)?;
        Ok(self.weight_unchecked(ijk))
    }

    pub(crate) fn weight_unchecked(&self, ijk: [usize; 3]) -> u32 {
        (0..3)
            .map(|l| if ijk[l] == 0 || ijk[l] == self.intervals[l] { 1 } else { 2 })
            .product()
    }

    /// Quadrature weight `(w/8) N_ijk` of every node, in node order.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let w8 = self.cell_volume() / 8.0;
        (0..self.node_count())
            .map(|n| w8 * self.weight_unchecked(self.ijk(n)) as f64)
            .collect()
    }

    /// Difference stencil for `∂_axis` at index `i`: central in the interior,
    /// first-order one-sided at the two ends. Returns `(index offset, coefficient)` pairs.
    pub fn diff_stencil(&self, i: usize, axis: usize) -> [(isize, f64); 2] {
        let d = self.intervals[axis];
        let h = self.spacing[axis];
        if i == 0 {
            [(1, 1.0 / h), (0, -1.0 / h)]
        } else if i == d {
            [(0, 1.0 / h), (-1, -1.0 / h)]
        } else {
            [(1, 0.5 / h), (-1, -0.5 / h)]
        }
    }

    /// Discrete derivative of a nodal scalar field at node `n` along `axis`.
    pub fn derivative(&self, field: &[f64], n: usize, axis: usize) -> f64 {
        let i = self.ijk(n)[axis];
        let s = self.strides[axis] as isize;
        self.diff_stencil(i, axis)
            .iter()
            .map(|&(o, c)| c * field[(n as isize + o * s) as usize])
            .sum()
    }
}

/// Central difference `(f₊ − f₋) / 2η`.
pub fn central_diff(f_minus: f64, f_plus: f64, eta: f64) -> f64 {
    (f_plus - f_minus) / (2.0 * eta)
}

/// How micro-rotations are represented at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parameterization {
    /// Four quaternion components.
    Quaternion,
    /// Three Euler angles.
    Euler,
}

impl Parameterization {
    pub fn rot_dim(self) -> usize {
        match self {
            Parameterization::Quaternion => 4,
            Parameterization::Euler => 3,
        }
    }
}

/// Which nodal unknowns participate in an optimization vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofSelection {
    pub phi: bool,
    pub rot: bool,
    pub gamma: bool,
}

impl DofSelection {
    pub const ALL: DofSelection = DofSelection {
        phi: true,
        rot: true,
        gamma: true,
    };
    pub const ROTATION_ONLY: DofSelection = DofSelection {
        phi: false,
        rot: true,
        gamma: false,
    };
}

/// Per-node slot map. `φ` and rotation slots are fixed on boundary nodes;
/// `γ` is free everywhere. Slots of one node are contiguous.
#[derive(Debug, Clone)]
pub struct DofLayout {
    param: Parameterization,
    selection: DofSelection,
    offsets: Vec<usize>,
    boundary: Vec<bool>,
    len: usize,
}

/// Offsets of the free slots of a node inside the packed vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeSlots {
    pub phi: Option<usize>,
    pub rot: Option<usize>,
    pub gamma: Option<usize>,
}

impl DofLayout {
    pub fn new(grid: &Grid3, param: Parameterization, selection: DofSelection) -> Self {
        let n = grid.node_count();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut boundary = Vec::with_capacity(n);
        let mut len = 0;
        let rd = param.rot_dim();
        for node in 0..n {
            let b = grid.is_boundary_node(node);
            offsets.push(len);
            boundary.push(b);
            if !b {
                if selection.phi {
                    len += 3;
                }
                if selection.rot {
                    len += rd;
                }
            }
            if selection.gamma {
                len += 1;
            }
        }
        offsets.push(len);
        DofLayout {
            param,
            selection,
            offsets,
            boundary,
            len,
        }
    }

    pub fn full(grid: &Grid3, param: Parameterization) -> Self {
        DofLayout::new(grid, param, DofSelection::ALL)
    }

    /// Number of free unknowns `D`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn parameterization(&self) -> Parameterization {
        self.param
    }

    pub fn selection(&self) -> DofSelection {
        self.selection
    }

    pub fn node_count(&self) -> usize {
        self.boundary.len()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn slots(&self, node: usize) -> NodeSlots {
        let mut at = self.offsets[node];
        let interior = !self.boundary[node];
        let mut take = |on: bool, width: usize| {
            if on {
                let s = at;
                at += width;
                Some(s)
            } else {
                None
            }
        };
        let phi = take(interior && self.selection.phi, 3);
        let rot = take(interior && self.selection.rot, self.param.rot_dim());
        let gamma = take(self.selection.gamma, 1);
        NodeSlots { phi, rot, gamma }
    }
}

/// Nodal unknowns: deformation `φ`, rotation parameters and plastic slip `γ`.
///
/// Rotation parameters always occupy four slots; with Euler angles the last
/// slot is unused and stays zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub param: Parameterization,
    pub phi: Vec<Vec3>,
    pub rot: Vec<[f64; 4]>,
    pub gamma: Vec<f64>,
}

impl FieldState {
    /// Undeformed state `φ = id`, identity rotation, zero slip.
    pub fn reference(grid: &Grid3, param: Parameterization) -> Self {
        let n = grid.node_count();
        let identity = match param {
            Parameterization::Quaternion => [1.0, 0.0, 0.0, 0.0],
            Parameterization::Euler => [0.0; 4],
        };
        FieldState {
            param,
            phi: (0..n).map(|i| grid.node_coords(i)).collect(),
            rot: vec![identity; n],
            gamma: vec![0.0; n],
        }
    }

    pub fn node_count(&self) -> usize {
        self.phi.len()
    }

    pub fn quaternion(&self, n: usize) -> Quaternion {
        Quaternion::from_array(self.rot[n])
    }

    pub fn euler(&self, n: usize) -> EulerAngles {
        let r = self.rot[n];
        EulerAngles([r[0], r[1], r[2]])
    }

    /// Micro-rotation at a node expressed as a unit quaternion (for output).
    pub fn unit_quaternion(&self, n: usize) -> Quaternion {
        match self.param {
            Parameterization::Quaternion => {
                self.quaternion(n).normalized().unwrap_or(Quaternion::IDENTITY)
            }
            Parameterization::Euler => quat_from_rotation(rotation_euler(self.euler(n)))
                .unwrap_or(Quaternion::IDENTITY),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.phi.iter().flatten().all(|v| v.is_finite())
            && self.rot.iter().flatten().all(|v| v.is_finite())
            && self.gamma.iter().all(|v| v.is_finite())
    }
}

fn check_shape(state: &FieldState, layout: &DofLayout) -> Result<()> {
    if state.node_count() != layout.node_count() {
        return Err(Error::Structure {
            expected: layout.node_count(),
            actual: state.node_count(),
        });
    }
    if state.param != layout.param {
        return Err(Error::Contract(
            "state and layout use different rotation parameterizations".into(),
        ));
    }
    Ok(())
}

/// Gather the free unknowns of `state` into a flat vector.
pub fn pack(state: &FieldState, layout: &DofLayout) -> Result<Vec<f64>> {
    check_shape(state, layout)?;
    let mut v = vec![0.0; layout.len()];
    let rd = layout.param.rot_dim();
    for n in 0..layout.node_count() {
        let s = layout.slots(n);
        if let Some(o) = s.phi {
            v[o..o + 3].copy_from_slice(&state.phi[n]);
        }
        if let Some(o) = s.rot {
            v[o..o + rd].copy_from_slice(&state.rot[n][..rd]);
        }
        if let Some(o) = s.gamma {
            v[o] = state.gamma[n];
        }
    }
    Ok(v)
}

/// Scatter free unknowns into `state`; fixed entries are left untouched.
pub fn unpack_into(v: &[f64], layout: &DofLayout, state: &mut FieldState) -> Result<()> {
    check_shape(state, layout)?;
    if v.len() != layout.len() {
        return Err(Error::Structure {
            expected: layout.len(),
            actual: v.len(),
        });
    }
    let rd = layout.param.rot_dim();
    for n in 0..layout.node_count() {
        let s = layout.slots(n);
        if let Some(o) = s.phi {
            state.phi[n].copy_from_slice(&v[o..o + 3]);
        }
        if let Some(o) = s.rot {
            state.rot[n][..rd].copy_from_slice(&v[o..o + rd]);
        }
        if let Some(o) = s.gamma {
            state.gamma[n] = v[o];
        }
    }
    Ok(())
}

/// Rebuild a state from free unknowns; everything else (Dirichlet data and
/// unselected fields) is taken from `template`.
pub fn unpack(v: &[f64], layout: &DofLayout, template: &FieldState) -> Result<FieldState> {
    let mut s = template.clone();
    unpack_into(v, layout, &mut s)?;
    Ok(s)
}

/// Write one line per node: `i j k x1 x2 x3 φ1 φ2 φ3 q0 q1 q2 q3 γ κ`.
pub fn write_field_dump<W: Write>(
    mut out: W,
    grid: &Grid3,
    state: &FieldState,
    kappa: &[f64],
) -> Result<()> {
    for n in 0..grid.node_count() {
        let [i, j, k] = grid.ijk(n);
        let x = grid.node_coords(n);
        let p = state.phi[n];
        let q = match state.param {
            Parameterization::Quaternion => state.quaternion(n),
            Parameterization::Euler => state.unit_quaternion(n),
        };
        writeln!(
            out,
            "{i} {j} {k} {:.10e} {:.10e} {:.10e} {:.15e} {:.15e} {:.15e} {:.15e} {:.15e} {:.15e} {:.15e} {:.15e} {:.15e}",
            x[0], x[1], x[2], p[0], p[1], p[2], q.w, q.x, q.y, q.z, state.gamma[n], kappa[n]
        )?;
    }
    Ok(())
}
