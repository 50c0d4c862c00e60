//! Line-oriented `key = value` run configuration.

use std::path::PathBuf;

use crate::energy::CurvatureVariant;
use crate::error::{Error, Result};
use crate::optimizer::BandMode;
use crate::solver::{Preconditioning, ScenarioKind, ScenarioSpec};

/// Parsed run configuration: the scenario plus output options.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub scenario: ScenarioSpec,
    pub output: Option<PathBuf>,
    pub reproducible: bool,
    /// Amplitude of a seeded random perturbation of the initial interior
    /// rotations; 0 disables it.
    pub perturbation: f64,
    pub seed: u64,
}

impl RunConfig {
    pub fn defaults(kind: ScenarioKind) -> Self {
        let (name, scenario) = match kind {
            ScenarioKind::Shear => ("shear", ScenarioSpec::shear(10)),
            ScenarioKind::Bending => ("bending", ScenarioSpec::bending(10)),
        };
        RunConfig {
            name: name.to_string(),
            scenario,
            output: None,
            reproducible: false,
            perturbation: 0.0,
            seed: 0,
        }
    }

    pub fn parameterization_name(&self) -> &'static str {
        match self.scenario.params.curvature {
            CurvatureVariant::Full => "quaternion_full",
            CurvatureVariant::Simplified => "quaternion_simple",
            CurvatureVariant::Euler => "euler",
        }
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn split(line: &str) -> Option<(&str, &str)> {
    let (k, v) = line.split_once('=')?;
    Some((k.trim(), v.trim()))
}

struct Line<'a> {
    no: usize,
    key: &'a str,
    value: &'a str,
}

impl Line<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.no,
            message: message.into(),
        }
    }

    fn float(&self) -> Result<f64> {
        let v: f64 = self
            .value
            .parse()
            .map_err(|_| self.err(format!("{}: expected a number, got `{}`", self.key, self.value)))?;
        if !v.is_finite() {
            return Err(self.err(format!("{}: value must be finite", self.key)));
        }
        Ok(v)
    }

    fn floats<const N: usize>(&self) -> Result<[f64; N]> {
        let parts: Vec<&str> = self.value.split_whitespace().collect();
        if parts.len() != N {
            return Err(self.err(format!("{}: expected {N} numbers, got {}", self.key, parts.len())));
        }
        let mut out = [0.0; N];
        for (o, p) in out.iter_mut().zip(parts) {
            *o = p
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| self.err(format!("{}: `{p}` is not a finite number", self.key)))?;
        }
        Ok(out)
    }

    fn uint(&self) -> Result<usize> {
        self.value
            .parse()
            .map_err(|_| self.err(format!("{}: expected a non-negative integer, got `{}`", self.key, self.value)))
    }

    fn boolean(&self) -> Result<bool> {
        match self.value {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            v => Err(self.err(format!("{}: expected true or false, got `{v}`", self.key))),
        }
    }
}

/// Parse a configuration. Unset keys take the defaults of the chosen
/// scenario (`scenario = shear` unless given).
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = strip_comment(raw).trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = split(body).ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected `key = value`, got `{body}`"),
        })?;
        if key.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                message: "missing key".into(),
            });
        }
        lines.push(Line { no: i + 1, key, value });
    }

    let mut kind = ScenarioKind::Shear;
    for l in lines.iter().filter(|l| l.key == "scenario") {
        kind = match l.value {
            "shear" => ScenarioKind::Shear,
            "bending" => ScenarioKind::Bending,
            v => return Err(l.err(format!("unknown scenario `{v}` (expected shear or bending)"))),
        };
    }
    let mut cfg = RunConfig::defaults(kind);
    let mut penalty_line = None;
    let mut variant_line = None;

    for l in &lines {
        let s = &mut cfg.scenario;
        match l.key {
            "scenario" => {}
            "name" => cfg.name = l.value.to_string(),
            "resolution" => {
                let parts: Vec<&str> = l.value.split_whitespace().collect();
                let d: Vec<usize> = parts
                    .iter()
                    .map(|p| p.parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| l.err(format!("resolution: expected integers, got `{}`", l.value)))?;
                s.intervals = match d.as_slice() {
                    [a] => [*a; 3],
                    [a, b, c] => [*a, *b, *c],
                    _ => return Err(l.err("resolution: expected one or three integers")),
                };
                if s.intervals.iter().any(|d| *d < 2) {
                    return Err(l.err("resolution: at least 2 intervals per axis"));
                }
            }
            "lengths" => s.lengths = l.floats::<3>()?,
            "parameterization" => {
                s.params.curvature = match l.value {
                    "quaternion_full" => CurvatureVariant::Full,
                    "quaternion_simple" => CurvatureVariant::Simplified,
                    "euler" => CurvatureVariant::Euler,
                    v => {
                        return Err(l.err(format!(
                            "unknown parameterization `{v}` (expected quaternion_full, quaternion_simple or euler)"
                        )))
                    }
                };
                variant_line = Some(l.no);
            }
            "preconditioning" => {
                s.preconditioning = match l.value {
                    "off" => Preconditioning::Off,
                    "two_pass" | "on" => Preconditioning::TwoPass,
                    v => return Err(l.err(format!("unknown preconditioning `{v}` (expected off or two_pass)"))),
                }
            }
            "band_mode" => {
                s.band.mode = match l.value {
                    "multiply" => BandMode::Multiply,
                    "solve" => BandMode::Solve,
                    v => return Err(l.err(format!("unknown band mode `{v}` (expected multiply or solve)"))),
                }
            }
            "band_axes" => {
                let mut axes = [false; 3];
                for p in l.value.split_whitespace() {
                    match p {
                        "1" | "x1" => axes[0] = true,
                        "2" | "x2" => axes[1] = true,
                        "3" | "x3" => axes[2] = true,
                        v => return Err(l.err(format!("band_axes: unknown axis `{v}`"))),
                    }
                }
                if !axes.iter().any(|a| *a) {
                    return Err(l.err("band_axes: at least one axis"));
                }
                s.band.axes = Some(axes);
            }
            "mu" => s.params.mu = l.float()?,
            "lambda" => s.params.lambda = l.float()?,
            "mu_c" => s.params.mu_c = l.float()?,
            "mu2" => s.params.mu2 = l.float()?,
            "rho" => s.params.rho = l.float()?,
            "sigma_y" => s.params.sigma_y = l.float()?,
            "penalty" => {
                s.params.penalty = l.float()?;
                penalty_line = Some(l.no);
            }
            "epsilon" | "reg_eps" => s.params.reg_eps = l.float()?,
            "slip" => s.params.slip = l.floats::<3>()?,
            "normal" => s.params.normal = l.floats::<3>()?,
            "f_ext" => s.params.f_ext = l.floats::<3>()?,
            "m_ext" => {
                let v = l.floats::<9>()?;
                s.params.m_ext = crate::kinematics::Mat3([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]]);
            }
            "beta_rate" => s.beta_rate = l.float()?,
            "time_step" => s.time_step = l.float()?,
            "final_time" => s.final_time = l.float()?,
            "history" => s.lbfgs.history = l.uint()?,
            "tolerance" | "eps0" => s.lbfgs.tolerance = l.float()?,
            "max_iter" => s.lbfgs.max_iter = l.uint()?,
            "c1" => s.lbfgs.c1 = l.float()?,
            "c2" => s.lbfgs.c2 = l.float()?,
            "skip_threshold" => s.lbfgs.skip_threshold = l.float()?,
            "max_line_search" => s.lbfgs.max_line_search = l.uint()?,
            "output" => cfg.output = Some(PathBuf::from(l.value)),
            "reproducible" => cfg.reproducible = l.boolean()?,
            "perturbation" => cfg.perturbation = l.float()?,
            "seed" => {
                cfg.seed = l
                    .value
                    .parse()
                    .map_err(|_| l.err(format!("seed: expected an integer, got `{}`", l.value)))?
            }
            other => return Err(l.err(format!("unknown key `{other}`"))),
        }
    }

    let euler = cfg.scenario.params.curvature == CurvatureVariant::Euler;
    if euler {
        if let Some(no) = penalty_line {
            return Err(Error::Parse {
                line: no,
                message: "penalty has no effect with the euler parameterization".into(),
            });
        }
        if kind == ScenarioKind::Bending {
            return Err(Error::Parse {
                line: variant_line.unwrap_or(1),
                message: "the bending scenario needs a quaternion parameterization".into(),
            });
        }
    }
    if !(cfg.perturbation >= 0.0) {
        return Err(Error::Parse {
            line: lines.iter().find(|l| l.key == "perturbation").map_or(1, |l| l.no),
            message: "perturbation must be non-negative".into(),
        });
    }
    cfg.scenario.validate()?;
    Ok(cfg)
}
