//! Time stepping: per-step predictor/corrector minimization, hardening update
//! and benchmark orchestration.

mod bc;

use std::time::Instant;

pub use bc::{
    bending_bc, bending_gradient, bending_map, compatible_slip, elastic_rotation, shear_bc,
    shear_gradient,
};

use crate::energy::{
    constraint_violation, hardening_update, CosseratEnergy, CurvatureVariant, EnergyBreakdown,
    MaterialParams, NodalGradient, PlasticHistory,
};
use crate::error::{Error, Result};
use crate::grid::{pack, unpack_into, DofLayout, DofSelection, FieldState, Grid3, Parameterization};
use crate::optimizer::{
    minimize, BandMode, BandZ, LbfgsConfig, MinimizeResult, Objective, Preconditioner,
    Termination, TraceRecord, WarmPairs,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Shear,
    Bending,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioning {
    /// One L-BFGS run over all unknowns with Cholesky scaling.
    Off,
    /// Rotation-only predictor with the band matrix, then a corrector warm
    /// started with the predictor's curvature pairs.
    TwoPass,
}

/// Band-matrix settings of the predictor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandOptions {
    pub mode: BandMode,
    /// `None` picks the axes from the curvature variant: `x1` only for the
    /// full curvature energy, all axes otherwise.
    pub axes: Option<[bool; 3]>,
}

impl Default for BandOptions {
    fn default() -> Self {
        BandOptions {
            mode: BandMode::Multiply,
            axes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// Load parameter `β(t) = beta_rate · t`.
    pub beta_rate: f64,
    pub time_step: f64,
    pub final_time: f64,
    pub lengths: [f64; 3],
    pub intervals: [usize; 3],
    pub params: MaterialParams,
    pub lbfgs: LbfgsConfig,
    pub preconditioning: Preconditioning,
    pub band: BandOptions,
}

impl ScenarioSpec {
    /// Simple shear of the unit cube.
    pub fn shear(d: usize) -> Self {
        ScenarioSpec {
            kind: ScenarioKind::Shear,
            beta_rate: 0.25,
            time_step: 0.1,
            final_time: 1.0,
            lengths: [1.0; 3],
            intervals: [d; 3],
            params: MaterialParams::shear_benchmark(),
            lbfgs: LbfgsConfig::default(),
            preconditioning: Preconditioning::Off,
            band: BandOptions::default(),
        }
    }

    /// Bending of the rod `(0,5)×(0,1)×(0,2)`.
    pub fn bending(d: usize) -> Self {
        ScenarioSpec {
            kind: ScenarioKind::Bending,
            lengths: [5.0, 1.0, 2.0],
            params: MaterialParams::bending_benchmark(),
            preconditioning: Preconditioning::TwoPass,
            ..ScenarioSpec::shear(d)
        }
    }

    pub fn beta(&self, t: f64) -> f64 {
        self.beta_rate * t
    }

    /// Number of steps `t = h, 2h, …` up to `T` (with a small tolerance so
    /// that `T = 10 h` is not lost to rounding).
    pub fn step_count(&self) -> usize {
        ((self.final_time / self.time_step) * (1.0 + 1e-12)).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.lbfgs.validate()?;
        if !(self.time_step > 0.0 && self.time_step.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {}", self.time_step)));
        }
        if !(self.final_time.is_finite()) || self.step_count() == 0 {
            return Err(Error::Config(format!(
                "final time {} is shorter than one time step {}",
                self.final_time, self.time_step
            )));
        }
        if !self.beta_rate.is_finite() {
            return Err(Error::Config("load rate must be finite".into()));
        }
        if self.kind == ScenarioKind::Bending && self.params.curvature == CurvatureVariant::Euler {
            return Err(Error::Config("the bending scenario needs a quaternion parameterization".into()));
        }
        Grid3::new(self.lengths, self.intervals)?;
        Ok(())
    }
}

/// Summary of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub t: f64,
    pub pred_iters: usize,
    pub corr_iters: usize,
    pub energy: f64,
    pub grad_norm: f64,
    /// `∫ Λ(|q|² − 1)²`.
    pub constraint_violation: f64,
    pub wall_ms: f64,
    pub converged: bool,
}

impl StepReport {
    pub fn total_iters(&self) -> usize {
        self.pred_iters + self.corr_iters
    }
}

/// Header of the per-step CSV.
pub const STEP_CSV_HEADER: &str = "step,t,pred_iters,corr_iters,energy,gradnorm,constraint_violation,wall_ms";

impl StepReport {
    /// One CSV row; `wall_ms` is written as 0 when `reproducible`.
    pub fn csv_row(&self, reproducible: bool) -> String {
        let wall = if reproducible { 0.0 } else { self.wall_ms };
        format!(
            "{},{},{},{},{:e},{:e},{:e},{:.3}",
            self.step, self.t, self.pred_iters, self.corr_iters, self.energy, self.grad_norm, self.constraint_violation, wall
        )
    }
}

/// Prescribed data at every node: the Dirichlet values on the boundary and
/// their natural extension into the interior.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    pub phi: Vec<[f64; 3]>,
    pub rot: Vec<[f64; 4]>,
    /// Slip the prescribed rotations were computed for.
    pub gamma: Vec<f64>,
}

/// Boundary data of `spec` at time `t`.
pub fn boundary_data(spec: &ScenarioSpec, grid: &Grid3, t: f64) -> Result<BoundaryData> {
    let beta = spec.beta(t);
    let n = grid.node_count();
    let param = spec.params.parameterization();
    let mut data = BoundaryData {
        phi: Vec::with_capacity(n),
        rot: Vec::with_capacity(n),
        gamma: Vec::with_capacity(n),
    };
    match spec.kind {
        ScenarioKind::Shear => {
            for i in 0..n {
                let (g, q) = shear_bc(grid.node_coords(i), beta);
                data.phi.push(g);
                data.rot.push(match param {
                    Parameterization::Quaternion => q.to_array(),
                    Parameterization::Euler => [0.0; 4],
                });
                data.gamma.push(0.0);
            }
        }
        ScenarioKind::Bending => {
            if param != Parameterization::Quaternion {
                return Err(Error::BoundaryCondition("bending data needs quaternions".into()));
            }
            let l1 = grid.lengths()[0];
            // the data depends on x1 only
            let per_i: Vec<(f64, [f64; 4])> = (0..grid.nodes_per_axis()[0])
                .map(|i| {
                    let x = grid.coords([i, 0, 0]);
                    let g = compatible_slip(bending_gradient(x, l1, beta), &spec.params)?;
                    let (_, q) = bending_bc(x, l1, beta, g, &spec.params)?;
                    Ok((g, q.to_array()))
                })
                .collect::<Result<_>>()?;
            for node in 0..n {
                let x = grid.node_coords(node);
                let (g, q) = per_i[grid.ijk(node)[0]];
                data.phi.push(bending_map(x, l1, beta));
                data.rot.push(q);
                data.gamma.push(g);
            }
        }
    }
    Ok(data)
}

/// Write the Dirichlet values into the boundary nodes of `state`.
pub fn apply_boundary(state: &mut FieldState, grid: &Grid3, data: &BoundaryData) {
    for n in 0..grid.node_count() {
        if grid.is_boundary_node(n) {
            state.phi[n] = data.phi[n];
            state.rot[n] = data.rot[n];
        }
    }
}

/// The energy restricted to the free unknowns of a layout.
pub struct StepObjective<'a> {
    energy: &'a mut CosseratEnergy,
    layout: &'a DofLayout,
    state: FieldState,
    grad: NodalGradient,
    pub evaluations: usize,
}

impl<'a> StepObjective<'a> {
    pub fn new(energy: &'a mut CosseratEnergy, layout: &'a DofLayout, template: FieldState) -> Self {
        StepObjective {
            energy,
            layout,
            state: template,
            grad: NodalGradient::default(),
            evaluations: 0,
        }
    }

    /// State holding the unknowns `x`.
    pub fn state_at(&mut self, x: &[f64]) -> Result<FieldState> {
        unpack_into(x, self.layout, &mut self.state)?;
        Ok(self.state.clone())
    }
}

impl Objective for StepObjective<'_> {
    fn evaluate(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.evaluations += 1;
        unpack_into(x, self.layout, &mut self.state)?;
        let e = self.energy.energy_and_gradient(&self.state, &mut self.grad)?;
        self.grad.gather(self.layout, grad);
        Ok(e.total())
    }
}

/// Result of the rotation-only pass.
#[derive(Debug, Clone)]
pub struct PredictorOutput {
    pub state: FieldState,
    pub result: MinimizeResult,
    /// `H⁰` in effect when the run ended, kept for embedding into the corrector.
    pub h0: Preconditioner,
}

/// Band matrix for the rotation-only layout of `grid`.
pub fn predictor_band(grid: &Grid3, layout: &DofLayout, p: &MaterialParams, band: &BandOptions) -> Result<BandZ> {
    let axes = band.axes.unwrap_or(match p.curvature {
        CurvatureVariant::Full => [true, false, false],
        _ => [true, true, true],
    });
    BandZ::new(grid, layout, axes, BandZ::curvature_prefactors(grid, p.mu2), band.mode)
}

/// Minimize over rotations with `φ`, `γ` frozen.
pub fn predictor(
    state: &FieldState,
    energy: &mut CosseratEnergy,
    cfg: &LbfgsConfig,
    band: &BandOptions,
) -> Result<PredictorOutput> {
    let grid = energy.grid().clone();
    let layout = DofLayout::new(&grid, state.param, DofSelection::ROTATION_ONLY);
    let h0 = Preconditioner::BandZ(predictor_band(&grid, &layout, energy.params(), band)?);
    let x0 = pack(state, &layout)?;
    let mut obj = StepObjective::new(energy, &layout, state.clone());
    let result = minimize(&mut obj, x0, cfg, &h0)?;
    let state = obj.state_at(&result.x)?;
    // the matrix actually in use at the end of the run
    let h0 = if result.preconditioner_fallback {
        Preconditioner::CholeskyScaling
    } else {
        h0
    };
    Ok(PredictorOutput { state, result, h0 })
}

/// Minimize over all free unknowns, warm started with the predictor pairs.
pub fn corrector(
    pred: &PredictorOutput,
    energy: &mut CosseratEnergy,
    cfg: &LbfgsConfig,
) -> Result<(FieldState, MinimizeResult)> {
    let grid = energy.grid().clone();
    let param = pred.state.param;
    let sub = DofLayout::new(&grid, param, DofSelection::ROTATION_ONLY);
    let full = DofLayout::full(&grid, param);
    let h0 = Preconditioner::WarmPairs(WarmPairs {
        pairs: pred.result.pairs.clone(),
        inner: Box::new(pred.h0.clone()),
        embedding: WarmPairs::rotation_embedding(&sub, &full)?,
    });
    single_pass_with(&pred.state, energy, cfg, &full, &h0)
}

/// One L-BFGS run over all free unknowns with Cholesky scaling.
pub fn single_pass(
    state: &FieldState,
    energy: &mut CosseratEnergy,
    cfg: &LbfgsConfig,
) -> Result<(FieldState, MinimizeResult)> {
    let layout = DofLayout::full(energy.grid(), state.param);
    single_pass_with(state, energy, cfg, &layout, &Preconditioner::CholeskyScaling)
}

fn single_pass_with(
    state: &FieldState,
    energy: &mut CosseratEnergy,
    cfg: &LbfgsConfig,
    layout: &DofLayout,
    h0: &Preconditioner,
) -> Result<(FieldState, MinimizeResult)> {
    let x0 = pack(state, layout)?;
    let mut obj = StepObjective::new(energy, layout, state.clone());
    let result = minimize(&mut obj, x0, cfg, h0)?;
    let state = obj.state_at(&result.x)?;
    Ok((state, result))
}

/// Everything produced by one time step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: FieldState,
    pub history: PlasticHistory,
    pub report: StepReport,
    pub breakdown: EnergyBreakdown,
    pub predictor_trace: Vec<TraceRecord>,
    pub corrector_trace: Vec<TraceRecord>,
    pub termination: Termination,
}

/// Advance from `state` (converged at `t − h`) to time `t`.
pub fn run_time_step(
    state: &FieldState,
    hist: &PlasticHistory,
    grid: &Grid3,
    spec: &ScenarioSpec,
    step: usize,
    t: f64,
) -> Result<StepOutcome> {
    let start = Instant::now();
    let data = boundary_data(spec, grid, t)?;
    let mut current = state.clone();
    apply_boundary(&mut current, grid, &data);
    let mut energy = CosseratEnergy::new(grid.clone(), spec.params.clone(), hist.clone())?;

    let (new_state, pred_iters, pred_trace, result) = match spec.preconditioning {
        Preconditioning::Off => {
            let (s, r) = single_pass(&current, &mut energy, &spec.lbfgs)?;
            (s, 0, Vec::new(), r)
        }
        Preconditioning::TwoPass => {
            let pred = predictor(&current, &mut energy, &spec.lbfgs, &spec.band)?;
            let (s, r) = corrector(&pred, &mut energy, &spec.lbfgs)?;
            (s, pred.result.iterations, pred.result.trace, r)
        }
    };
    if result.termination != Termination::Converged {
        log::warn!(
            "step {step} (t = {t}): minimization ended with {:?} at |g| = {:e}",
            result.termination,
            result.grad_norm
        );
    }
    let breakdown = energy.energy(&new_state)?;

    let kappa: Vec<f64> = (0..grid.node_count())
        .map(|n| hardening_update(new_state.gamma[n], hist.gamma0[n], hist.kappa0[n]))
        .collect();
    let history = PlasticHistory::new(new_state.gamma.clone(), kappa)?;

    let report = StepReport {
        step,
        t,
        pred_iters,
        corr_iters: result.iterations,
        energy: breakdown.total(),
        grad_norm: result.grad_norm,
        constraint_violation: constraint_violation(&new_state, grid, spec.params.penalty),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        converged: result.converged(),
    };
    Ok(StepOutcome {
        state: new_state,
        history,
        report,
        breakdown,
        predictor_trace: pred_trace,
        corrector_trace: result.trace,
        termination: result.termination,
    })
}

/// Incremental driver over `t = h, 2h, …, T`.
#[derive(Debug, Clone)]
pub struct Simulation {
    spec: ScenarioSpec,
    grid: Grid3,
    state: FieldState,
    history: PlasticHistory,
    step: usize,
    reports: Vec<StepReport>,
}

impl Simulation {
    /// Initial state `φ₀ = id`, `κ⁰ = γ⁰ = 0`. Rotations start from the
    /// extension of the first step's boundary rotations.
    pub fn new(spec: ScenarioSpec) -> Result<Self> {
        spec.validate()?;
        let grid = Grid3::new(spec.lengths, spec.intervals)?;
        let param = spec.params.parameterization();
        let mut state = FieldState::reference(&grid, param);
        let history = PlasticHistory::zeros(grid.node_count());
        let first = boundary_data(&spec, &grid, spec.time_step)?;
        state.rot.clone_from(&first.rot);
        // Cauchy-Born extension of the first step's deformation
        state.phi.clone_from(&first.phi);
        Ok(Simulation {
            spec,
            grid,
            state,
            history,
            step: 0,
            reports: Vec::new(),
        })
    }

    /// Add uniform noise of the given amplitude to the interior rotation
    /// parameters of the initial state.
    pub fn perturb_interior_rotations<R: rand::Rng>(&mut self, amplitude: f64, rng: &mut R) -> Result<()> {
        if self.step > 0 {
            return Err(Error::Contract("perturbation applies to the initial state only".into()));
        }
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::Config(format!("perturbation amplitude must be non-negative, got {amplitude}")));
        }
        if amplitude == 0.0 {
            return Ok(());
        }
        let rd = self.state.param.rot_dim();
        for n in 0..self.grid.node_count() {
            if !self.grid.is_boundary_node(n) {
                for v in &mut self.state.rot[n][..rd] {
                    *v += rng.gen_range(-amplitude..=amplitude);
                }
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn state(&self) -> &FieldState {
        &self.state
    }

    pub fn history(&self) -> &PlasticHistory {
        &self.history
    }

    pub fn reports(&self) -> &[StepReport] {
        &self.reports
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.spec.step_count()
    }

    /// Time after the next step.
    pub fn next_time(&self) -> f64 {
        (self.step + 1) as f64 * self.spec.time_step
    }

    /// Run one time step; the simulation is left unchanged on error.
    pub fn advance(&mut self) -> Result<StepOutcome> {
        if self.is_finished() {
            return Err(Error::Contract("simulation already reached its final time".into()));
        }
        let t = self.next_time();
        let out = run_time_step(&self.state, &self.history, &self.grid, &self.spec, self.step + 1, t)?;
        self.step += 1;
        self.state = out.state.clone();
        self.history = out.history.clone();
        self.reports.push(out.report.clone());
        Ok(out)
    }
}

/// Completed (or aborted) run: reports and fields of the last finished step.
#[derive(Debug)]
pub struct SimulationOutcome {
    pub reports: Vec<StepReport>,
    pub state: FieldState,
    pub history: PlasticHistory,
    pub grid: Grid3,
    /// The error that stopped the run early, if any.
    pub failure: Option<Error>,
}

/// Run every time step of `spec`, calling `observe` after each one.
pub fn run_simulation_with<F>(spec: ScenarioSpec, mut observe: F) -> Result<SimulationOutcome>
where
    F: FnMut(&Simulation, &StepOutcome) -> Result<()>,
{
    let mut sim = Simulation::new(spec)?;
    let mut failure = None;
    while !sim.is_finished() {
        match sim.advance().and_then(|out| observe(&sim, &out)) {
            Ok(()) => {}
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    Ok(SimulationOutcome {
        reports: sim.reports.clone(),
        state: sim.state,
        history: sim.history,
        grid: sim.grid,
        failure,
    })
}

pub fn run_simulation(spec: ScenarioSpec) -> Result<SimulationOutcome> {
    run_simulation_with(spec, |_, _| Ok(()))
}
