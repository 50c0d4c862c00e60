use super::vecops::{all_finite, dot, norm};
use super::{LbfgsConfig, Objective};
use crate::error::{Error, Result};

/// Accepted step and the objective data at `x + α d`.
#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    pub alpha: f64,
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub evaluations: usize,
}

const ALPHA_MAX: f64 = 1e20;

struct Probe {
    alpha: f64,
    f: f64,
    /// Directional derivative; `None` when the trial point was not finite.
    slope: Option<f64>,
}

struct Search<'a, O: Objective + ?Sized> {
    obj: &'a mut O,
    x: &'a [f64],
    d: &'a [f64],
    f0: f64,
    slope0: f64,
    cfg: &'a LbfgsConfig,
    trials: usize,
    xt: Vec<f64>,
    gt: Vec<f64>,
}

impl<O: Objective + ?Sized> Search<'_, O> {
    fn probe(&mut self, alpha: f64) -> Result<Probe> {
        self.trials += 1;
        for ((t, xi), di) in self.xt.iter_mut().zip(self.x).zip(self.d) {
            *t = xi + alpha * di;
        }
        match self.obj.evaluate(&self.xt, &mut self.gt) {
            Ok(f) if f.is_finite() && all_finite(&self.gt) => Ok(Probe {
                alpha,
                f,
                slope: Some(dot(&self.gt, self.d)),
            }),
            Ok(_) | Err(Error::Evaluation(_)) => Ok(Probe {
                alpha,
                f: f64::INFINITY,
                slope: None,
            }),
            Err(e) => Err(e),
        }
    }

    fn armijo_fails(&self, p: &Probe) -> bool {
        !(p.f <= self.f0 + self.cfg.c1 * p.alpha * self.slope0)
    }

    fn curvature_holds(&self, slope: f64) -> bool {
        slope.abs() <= -self.cfg.c2 * self.slope0
    }

    fn accept(&self, p: &Probe) -> LineSearchOutcome {
        LineSearchOutcome {
            alpha: p.alpha,
            x: self.xt.clone(),
            f: p.f,
            grad: self.gt.clone(),
            evaluations: self.trials,
        }
    }

    fn zoom(&mut self, mut lo: Probe, mut hi: Probe) -> Result<LineSearchOutcome> {
        let dnorm = norm(self.d);
        let xnorm = norm(self.x);
        while self.trials < self.cfg.max_line_search {
            let width = (hi.alpha - lo.alpha).abs();
            if width * dnorm <= f64::EPSILON * (1.0 + xnorm) {
                break;
            }
            let a = interpolate(&lo, &hi);
            let p = self.probe(a)?;
            if self.armijo_fails(&p) || p.f >= lo.f {
                hi = p;
                continue;
            }
            let slope = p.slope.expect("finite probe has a slope");
            if self.curvature_holds(slope) {
                return Ok(self.accept(&p));
            }
            if slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = p;
        }
        if lo.alpha > 0.0 {
            // Bracket collapsed at roundoff level: keep the sufficient decrease.
            let alpha = lo.alpha;
            let p = self.probe(alpha)?;
            if p.f <= lo.f {
                return Ok(self.accept(&p));
            }
        }
        Err(Error::LineSearch(format!(
            "no strong Wolfe step after {} trials",
            self.trials
        )))
    }
}

/// Safeguarded cubic (falling back to quadratic, then bisection) minimizer
/// inside the bracket.
fn interpolate(lo: &Probe, hi: &Probe) -> f64 {
    let (a0, a1) = (lo.alpha, hi.alpha);
    let left = a0.min(a1);
    let w = (a1 - a0).abs();
    let (min, max) = (left + 0.1 * w, left + 0.9 * w);
    let s0 = lo.slope.unwrap_or(0.0);
    let mut cand = f64::NAN;
    if let Some(s1) = hi.slope {
        let d1 = s0 + s1 - 3.0 * (lo.f - hi.f) / (a0 - a1);
        let disc = d1 * d1 - s0 * s1;
        if disc >= 0.0 {
            let d2 = (a1 - a0).signum() * disc.sqrt();
            cand = a1 - (a1 - a0) * (s1 + d2 - d1) / (s1 - s0 + 2.0 * d2);
        }
    }
    if !(cand.is_finite() && cand >= min && cand <= max) && hi.f.is_finite() {
        let h = a1 - a0;
        let denom = 2.0 * (hi.f - lo.f - s0 * h);
        if denom > 0.0 {
            cand = a0 - s0 * h * h / denom;
        }
    }
    if cand.is_finite() && cand >= min && cand <= max {
        cand
    } else {
        0.5 * (a0 + a1)
    }
}

/// Strong Wolfe line search along the descent direction `d` from `x`, starting
/// with trial step `alpha0`. `f0`, `grad0` are the objective data at `x`.
pub fn line_search<O: Objective + ?Sized>(
    obj: &mut O,
    x: &[f64],
    f0: f64,
    grad0: &[f64],
    d: &[f64],
    alpha0: f64,
    cfg: &LbfgsConfig,
) -> Result<LineSearchOutcome> {
    if x.len() != d.len() || grad0.len() != d.len() {
        return Err(Error::Structure {
            expected: x.len(),
            actual: d.len(),
        });
    }
    let slope0 = dot(grad0, d);
    if !(slope0 < 0.0) {
        return Err(Error::Contract(format!(
            "search direction is not a descent direction (slope {slope0})"
        )));
    }
    if !(alpha0 > 0.0 && alpha0.is_finite()) {
        return Err(Error::Contract(format!("initial step must be positive, got {alpha0}")));
    }
    let mut s = Search {
        obj,
        x,
        d,
        f0,
        slope0,
        cfg,
        trials: 0,
        xt: vec![0.0; x.len()],
        gt: vec![0.0; x.len()],
    };
    let mut prev = Probe {
        alpha: 0.0,
        f: f0,
        slope: Some(slope0),
    };
    let mut alpha = alpha0;
    while s.trials < cfg.max_line_search {
        let p = s.probe(alpha)?;
        if s.armijo_fails(&p) || (prev.alpha > 0.0 && p.f >= prev.f) {
            return s.zoom(prev, p);
        }
        let slope = p.slope.expect("finite probe has a slope");
        if s.curvature_holds(slope) {
            return Ok(s.accept(&p));
        }
        if slope >= 0.0 {
            return s.zoom(p, prev);
        }
        if alpha >= ALPHA_MAX {
            break;
        }
        prev = p;
        alpha = (4.0 * alpha).min(ALPHA_MAX);
    }
    Err(Error::LineSearch(format!("no strong Wolfe step after {} trials", s.trials)))
}
