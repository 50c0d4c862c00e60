//! Command-line front end: `run` and `compare`.

mod config;

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{parse_config, RunConfig};

use crate::error::{Error, Result};
use crate::grid::{write_field_dump, DofLayout, Grid3};
use crate::optimizer::write_trace;
use crate::solver::{run_simulation_with, Preconditioning, Simulation, StepReport, STEP_CSV_HEADER};

#[derive(Debug, Parser)]
#[command(name = "cosserat", about = "Cosserat plasticity benchmarks with preconditioned L-BFGS")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario configuration.
    Run {
        config: PathBuf,
        /// Output directory (overrides the `output` key).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed of the optional initial perturbation.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for energy assembly.
        #[arg(long)]
        threads: Option<usize>,
        /// Write wall times as 0 so reruns give identical files.
        #[arg(long)]
        reproducible: bool,
    },
    /// Run two configurations and tabulate them side by side.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        reproducible: bool,
    },
}

/// Free unknowns and nodes of a configuration's grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofCount {
    pub unknowns: usize,
    pub nodes: usize,
}

impl DofCount {
    pub fn of(cfg: &RunConfig) -> Result<Self> {
        let grid = Grid3::new(cfg.scenario.lengths, cfg.scenario.intervals)?;
        let layout = DofLayout::full(&grid, cfg.scenario.params.parameterization());
        Ok(DofCount {
            unknowns: layout.len(),
            nodes: grid.node_count(),
        })
    }

    /// Storage of the unknowns in MiB at 64-bit precision.
    pub fn memory_mib(&self) -> f64 {
        self.unknowns as f64 * 8.0 / (1024.0 * 1024.0)
    }
}

/// Outcome of one configuration run.
#[derive(Debug)]
pub struct RunSummary {
    pub config: RunConfig,
    pub dofs: DofCount,
    pub reports: Vec<StepReport>,
    pub failure: Option<String>,
}

impl RunSummary {
    pub fn mean_iterations(&self) -> f64 {
        if self.reports.is_empty() {
            return 0.0;
        }
        self.reports.iter().map(|r| r.total_iters() as f64).sum::<f64>() / self.reports.len() as f64
    }

    pub fn total_wall_ms(&self) -> f64 {
        self.reports.iter().map(|r| r.wall_ms).sum()
    }

    pub fn max_constraint_violation(&self) -> f64 {
        self.reports.iter().map(|r| r.constraint_violation).fold(0.0, f64::max)
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

/// Run `cfg`, writing step reports, traces, field dumps and a summary into `out`.
/// Artifacts of completed steps are kept when a later step fails.
pub fn execute(cfg: &RunConfig, out: &Path) -> Result<RunSummary> {
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let dofs = DofCount::of(cfg)?;
    let reproducible = cfg.reproducible;
    let steps_path = out.join("steps.csv");
    let mut steps = create(&steps_path)?;
    writeln!(steps, "{STEP_CSV_HEADER}")?;
    steps.flush()?;

    let mut sim = Simulation::new(cfg.scenario.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    sim.perturb_interior_rotations(cfg.perturbation, &mut rng)?;

    let mut observe = |sim: &Simulation, o: &crate::solver::StepOutcome| -> Result<()> {
        let k = o.report.step;
        writeln!(steps, "{}", o.report.csv_row(reproducible))?;
        steps.flush()?;
        if !o.predictor_trace.is_empty() {
            let mut w = create(&out.join(format!("trace_pred_{k:03}.csv")))?;
            write_trace(&mut w, &o.predictor_trace)?;
            w.flush()?;
        }
        let mut w = create(&out.join(format!("trace_{k:03}.csv")))?;
        write_trace(&mut w, &o.corrector_trace)?;
        w.flush()?;
        let mut w = create(&out.join(format!("fields_{k:03}.txt")))?;
        write_field_dump(&mut w, sim.grid(), &o.state, &o.history.kappa0)?;
        w.flush()?;
        Ok(())
    };
    let mut failure = None;
    while !sim.is_finished() {
        match sim.advance() {
            Ok(o) => {
                observe(&sim, &o)?;
                if !o.report.converged {
                    failure = Some(format!(
                        "step {} (t = {}) did not converge: {:?} at gradient norm {:e}",
                        o.report.step, o.report.t, o.termination, o.report.grad_norm
                    ));
                    break;
                }
            }
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        }
    }
    let summary = RunSummary {
        config: cfg.clone(),
        dofs,
        reports: sim.reports().to_vec(),
        failure,
    };
    let text = summary_table(&summary, reproducible);
    fs::write(out.join("summary.txt"), &text).map_err(|e| io_err(out, e))?;
    Ok(summary)
}

/// Same as [`execute`] through the library driver, without file output.
pub fn execute_in_memory(cfg: &RunConfig) -> Result<RunSummary> {
    let dofs = DofCount::of(cfg)?;
    let out = run_simulation_with(cfg.scenario.clone(), |_, _| Ok(()))?;
    Ok(RunSummary {
        config: cfg.clone(),
        dofs,
        reports: out.reports,
        failure: out.failure.map(|e| e.to_string()),
    })
}

fn iterations_cell(r: &StepReport, two_pass: bool) -> String {
    if two_pass {
        format!("{}/{}", r.pred_iters, r.corr_iters)
    } else {
        r.corr_iters.to_string()
    }
}

/// Aligned plain-text summary; every figure comes from a step report or
/// the DOF count.
pub fn summary_table(s: &RunSummary, reproducible: bool) -> String {
    let c = &s.config;
    let sc = &c.scenario;
    let two_pass = sc.preconditioning == Preconditioning::TwoPass;
    let mut t = String::new();
    let _ = writeln!(t, "run            {}", c.name);
    let _ = writeln!(t, "parameterization {}", c.parameterization_name());
    let _ = writeln!(
        t,
        "resolution     ({},{},{})",
        sc.intervals[0], sc.intervals[1], sc.intervals[2]
    );
    let _ = writeln!(t, "unknowns       {}", s.dofs.unknowns);
    let _ = writeln!(t, "nodes          {}", s.dofs.nodes);
    let _ = writeln!(t, "memory (MiB)   {:.2}", s.dofs.memory_mib());
    let _ = writeln!(t, "tolerance      {:e}", sc.lbfgs.tolerance);
    let pre = if two_pass {
        match sc.band.mode {
            crate::optimizer::BandMode::Multiply => "two_pass (band multiply)",
            crate::optimizer::BandMode::Solve => "two_pass (band solve)",
        }
    } else {
        "off"
    };
    let _ = writeln!(t, "preconditioning {pre}");
    let _ = writeln!(t);
    let _ = writeln!(
        t,
        "{:>5} {:>6} {:>14} {:>13} {:>13} {:>13} {:>10}",
        "step", "t", if two_pass { "iter pred/corr" } else { "iterations" }, "energy", "gradnorm", "constraint", "time (s)"
    );
    for r in &s.reports {
        let wall = if reproducible { 0.0 } else { r.wall_ms / 1e3 };
        let _ = writeln!(
            t,
            "{:>5} {:>6.3} {:>14} {:>13.4e} {:>13.4e} {:>13.4e} {:>10.2}{}",
            r.step,
            r.t,
            iterations_cell(r, two_pass),
            r.energy,
            r.grad_norm,
            r.constraint_violation,
            wall,
            if r.converged { "" } else { "  (not converged)" }
        );
    }
    let _ = writeln!(t);
    let total = if reproducible { 0.0 } else { s.total_wall_ms() / 1e3 };
    let _ = writeln!(t, "mean iterations {:.1} over {} steps ({:.2} s)", s.mean_iterations(), s.reports.len(), total);
    if let Some(f) = &s.failure {
        let _ = writeln!(t, "FAILED: {f}");
    }
    t
}

/// Side-by-side table of two runs.
pub fn comparison_table(a: &RunSummary, b: &RunSummary, reproducible: bool) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "{:<22} {:>22} {:>22}", "", a.config.name, b.config.name);
    let row = |t: &mut String, label: &str, x: String, y: String| {
        let _ = writeln!(t, "{label:<22} {x:>22} {y:>22}");
    };
    row(&mut t, "parameterization", a.config.parameterization_name().into(), b.config.parameterization_name().into());
    let res = |s: &RunSummary| {
        let d = s.config.scenario.intervals;
        format!("({},{},{})", d[0], d[1], d[2])
    };
    row(&mut t, "resolution", res(a), res(b));
    row(&mut t, "unknowns", a.dofs.unknowns.to_string(), b.dofs.unknowns.to_string());
    row(&mut t, "nodes", a.dofs.nodes.to_string(), b.dofs.nodes.to_string());
    row(&mut t, "steps", a.reports.len().to_string(), b.reports.len().to_string());
    row(&mut t, "mean iterations", format!("{:.1}", a.mean_iterations()), format!("{:.1}", b.mean_iterations()));
    let time = |s: &RunSummary| if reproducible { "0.00".to_string() } else { format!("{:.2}", s.total_wall_ms() / 1e3) };
    row(&mut t, "time (s)", time(a), time(b));
    row(
        &mut t,
        "max constraint",
        format!("{:.4e}", a.max_constraint_violation()),
        format!("{:.4e}", b.max_constraint_violation()),
    );
    let _ = writeln!(t);
    let _ = writeln!(t, "{:>5} {:>14} {:>14}", "step", a.config.name, b.config.name);
    for (ra, rb) in a.reports.iter().zip(&b.reports) {
        let two_a = a.config.scenario.preconditioning == Preconditioning::TwoPass;
        let two_b = b.config.scenario.preconditioning == Preconditioning::TwoPass;
        let _ = writeln!(t, "{:>5} {:>14} {:>14}", ra.step, iterations_cell(ra, two_a), iterations_cell(rb, two_b));
    }
    t
}

fn load(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_config(&text)
}

fn set_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

/// Execute a parsed command line; returns the process exit code.
pub fn dispatch(cli: Cli) -> i32 {
    match try_dispatch(cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn try_dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            threads,
            reproducible,
        } => {
            set_threads(threads)?;
            let mut cfg = load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.reproducible |= reproducible;
            let out = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
            let s = execute(&cfg, &out)?;
            print!("{}", summary_table(&s, cfg.reproducible));
            if let Some(f) = &s.failure {
                eprintln!("error: {f}");
                return Ok(false);
            }
            Ok(true)
        }
        Command::Compare {
            a,
            b,
            out,
            threads,
            reproducible,
        } => {
            set_threads(threads)?;
            let mut ca = load(&a)?;
            let mut cb = load(&b)?;
            ca.reproducible |= reproducible;
            cb.reproducible |= reproducible;
            if ca.name == cb.name {
                ca.name = format!("{}-a", ca.name);
                cb.name = format!("{}-b", cb.name);
            }
            let sa = execute(&ca, &out.join(&ca.name))?;
            let sb = execute(&cb, &out.join(&cb.name))?;
            let table = comparison_table(&sa, &sb, reproducible || (ca.reproducible && cb.reproducible));
            fs::write(out.join("comparison.txt"), &table).map_err(|e| io_err(&out, e))?;
            print!("{table}");
            Ok(sa.failure.is_none() && sb.failure.is_none())
        }
    }
}
