//! Limited-memory BFGS with pluggable initial matrices.

mod line_search;
mod pairs;
mod precond;
mod vecops;

use std::io::Write;

pub use line_search::{line_search, LineSearchOutcome};
pub use pairs::{cholesky_scale, two_loop, CurvaturePairs, Pair};
pub use precond::{BandMode, BandZ, Preconditioner, WarmPairs};
pub use vecops::{axpy, dot, norm};

use crate::error::{Error, Result};
use vecops::all_finite;

/// A differentiable objective. Implementations write `∇f(x)` into `grad`
/// and return `f(x)`.
pub trait Objective {
    fn evaluate(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64>;
}

impl<F> Objective for F
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    fn evaluate(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        Ok(self(x, grad))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsConfig {
    /// Number of stored curvature pairs `m`.
    pub history: usize,
    /// Stop tolerance `ε₀`.
    pub tolerance: f64,
    pub max_iter: usize,
    pub c1: f64,
    pub c2: f64,
    /// Pairs with `yᵀs ≤ threshold·|y||s|` are dropped.
    pub skip_threshold: f64,
    /// Objective evaluations allowed per line search.
    pub max_line_search: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            history: 5,
            tolerance: 1e-7,
            max_iter: 10_000_000,
            c1: 1e-4,
            c2: 0.9,
            skip_threshold: 1e-10,
            max_line_search: 60,
        }
    }
}

impl LbfgsConfig {
    pub fn with_tolerance(tolerance: f64) -> Self {
        LbfgsConfig {
            tolerance,
            ..LbfgsConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.history == 0 {
            return Err(Error::Config("history length must be at least 1".into()));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::Config(format!(
                "line-search constants need 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.c1, self.c2
            )));
        }
        if !(self.skip_threshold >= 0.0) {
            return Err(Error::Config("skip threshold must be non-negative".into()));
        }
        if self.max_line_search == 0 {
            return Err(Error::Config("line search needs at least one trial".into()));
        }
        Ok(())
    }
}

/// Stop rule `|∇f| < ε₀·max(1, |x|)`.
pub fn stop_criterion(grad_norm: f64, x_norm: f64, tolerance: f64) -> bool {
    grad_norm < tolerance * x_norm.max(1.0)
}

/// Objective value and gradient norm at one iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub f: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// Line search failed along steepest descent as well.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    pub trace: Vec<TraceRecord>,
    /// Final curvature-pair buffer, usable as a warm start elsewhere.
    pub pairs: CurvaturePairs,
    /// Set when the configured `H⁰` was replaced by Cholesky scaling.
    pub preconditioner_fallback: bool,
}

impl MinimizeResult {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

/// Minimize `obj` from `x0` with L-BFGS and initial matrix `h0`.
pub fn minimize<O: Objective + ?Sized>(
    obj: &mut O,
    x0: Vec<f64>,
    cfg: &LbfgsConfig,
    h0: &Preconditioner,
) -> Result<MinimizeResult> {
    cfg.validate()?;
    let n = x0.len();
    let mut x = x0;
    let mut grad = vec![0.0; n];
    let mut trace = Vec::new();
    let mut f = match obj.evaluate(&x, &mut grad) {
        Ok(f) => f,
        Err(Error::Evaluation(what)) => {
            return Err(Error::Divergence {
                reason: format!("non-finite {what} at the initial point"),
                trace,
            })
        }
        Err(e) => return Err(e),
    };
    if !(f.is_finite() && all_finite(&grad)) {
        return Err(Error::Divergence {
            reason: "non-finite objective at the initial point".into(),
            trace,
        });
    }
    let mut evaluations = 1;
    let mut pairs = CurvaturePairs::new(cfg.history, cfg.skip_threshold);
    let mut fallback = false;
    let mut gnorm = norm(&grad);
    trace.push(TraceRecord { iter: 0, f, grad_norm: gnorm });
    let mut k = 0;
    let termination = loop {
        if stop_criterion(gnorm, norm(&x), cfg.tolerance) {
            break Termination::Converged;
        }
        if k >= cfg.max_iter {
            break Termination::MaxIterations;
        }
        let active: &Preconditioner = if fallback { &Preconditioner::CholeskyScaling } else { h0 };
        let mut d = match two_loop(&grad, &pairs, active) {
            Ok(r) => r,
            Err(Error::Preconditioner(msg)) => {
                log::warn!("initial matrix failed ({msg}); using Cholesky scaling");
                fallback = true;
                two_loop(&grad, &pairs, &Preconditioner::CholeskyScaling)?
            }
            Err(e) => return Err(e),
        };
        d.iter_mut().for_each(|v| *v = -*v);
        let mut slope = dot(&d, &grad);
        if !(slope < 0.0) || !all_finite(&d) {
            log::debug!("iteration {k}: preconditioned direction is not descent; restarting");
            if !fallback && !matches!(active, Preconditioner::CholeskyScaling | Preconditioner::Identity) {
                fallback = true;
            }
            pairs.clear();
            d = grad.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        let alpha0 = if pairs.is_empty() { initial_step(&d, slope, gnorm) } else { 1.0 };
        let outcome = match line_search(obj, &x, f, &grad, &d, alpha0, cfg) {
            Ok(o) => o,
            Err(Error::LineSearch(msg)) => {
                log::debug!("iteration {k}: {msg}; restarting along steepest descent");
                pairs.clear();
                let sd: Vec<f64> = grad.iter().map(|v| -v).collect();
                match line_search(obj, &x, f, &grad, &sd, 1.0 / gnorm.max(1.0), cfg) {
                    Ok(o) => o,
                    Err(Error::LineSearch(_)) => break Termination::Stalled,
                    Err(e) => return Err(with_trace(e, trace)),
                }
            }
            Err(e) => return Err(with_trace(e, trace)),
        };
        evaluations += outcome.evaluations;
        if !(outcome.f.is_finite() && all_finite(&outcome.grad)) {
            return Err(Error::Divergence {
                reason: format!("non-finite objective at iteration {}", k + 1),
                trace,
            });
        }
        let s: Vec<f64> = outcome.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = outcome.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        pairs.push(s, y);
        x = outcome.x;
        grad = outcome.grad;
        f = outcome.f;
        gnorm = norm(&grad);
        k += 1;
        trace.push(TraceRecord { iter: k, f, grad_norm: gnorm });
    };
    Ok(MinimizeResult {
        x,
        f,
        grad,
        grad_norm: gnorm,
        iterations: k,
        evaluations,
        termination,
        trace,
        pairs,
        preconditioner_fallback: fallback,
    })
}

/// First trial step without curvature information: unit step scaled so the
/// displacement is at most 1, unless the direction is already small.
fn initial_step(d: &[f64], _slope: f64, _gnorm: f64) -> f64 {
    let dn = norm(d);
    if dn > 1.0 {
        1.0 / dn
    } else {
        1.0
    }
}

fn with_trace(e: Error, trace: Vec<TraceRecord>) -> Error {
    match e {
        Error::Evaluation(what) => Error::Divergence {
            reason: format!("non-finite {what}"),
            trace,
        },
        other => other,
    }
}

/// Trace CSV with header `iter,energy,gradnorm`.
pub fn write_trace<W: Write>(out: &mut W, trace: &[TraceRecord]) -> std::io::Result<()> {
    writeln!(out, "iter,energy,gradnorm")?;
    for r in trace {
        writeln!(out, "{},{:e},{:e}", r.iter, r.f, r.grad_norm)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense inverse-BFGS recursion `H ← VᵀHV + ρ s sᵀ`, `V = I − ρ y sᵀ`.
    fn dense_h(n: usize, h0: f64, pairs: &[(Vec<f64>, Vec<f64>)]) -> Vec<Vec<f64>> {
        let mut h: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { h0 } else { 0.0 }).collect())
            .collect();
        for (s, y) in pairs {
            let rho = 1.0 / dot(s, y);
            let v: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| (if i == j { 1.0 } else { 0.0 }) - rho * y[i] * s[j]).collect())
                .collect();
            let mut hv = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    hv[i][j] = (0..n).map(|l| h[i][l] * v[l][j]).sum();
                }
            }
            for i in 0..n {
                for j in 0..n {
                    h[i][j] = (0..n).map(|l| v[l][i] * hv[l][j]).sum::<f64>() + rho * s[i] * s[j];
                }
            }
        }
        h
    }

    #[test]
    fn two_loop_matches_dense_recursion() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for n in [1, 3, 8, 12] {
            for m in 1..=3 {
                let mut buf = CurvaturePairs::new(m, 1e-10);
                let mut raw = Vec::new();
                while raw.len() < m {
                    let s: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let y: Vec<f64> = s.iter().map(|v| 2.0 * v + rng.gen_range(-0.3..0.3)).collect();
                    if buf.push(s.clone(), y.clone()) {
                        raw.push((s, y));
                    }
                }
                let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let r = two_loop(&g, &buf, &Preconditioner::Identity).unwrap();
                let h = dense_h(n, 1.0, &raw);
                for i in 0..n {
                    let hg: f64 = (0..n).map(|j| h[i][j] * g[j]).sum();
                    assert!((hg - r[i]).abs() < 1e-12 * (1.0 + hg.abs()));
                }
                let delta = cholesky_scale(buf.last());
                let r = two_loop(&g, &buf, &Preconditioner::CholeskyScaling).unwrap();
                let h = dense_h(n, delta, &raw);
                for i in 0..n {
                    let hg: f64 = (0..n).map(|j| h[i][j] * g[j]).sum();
                    assert!((hg - r[i]).abs() < 1e-12 * (1.0 + hg.abs()));
                }
            }
        }
    }

    #[test]
    fn single_pair_secant_equation() {
        let s = vec![1.0, 2.0, -1.0];
        let y = s.clone();
        let mut buf = CurvaturePairs::new(3, 1e-10);
        assert!(buf.push(s.clone(), y.clone()));
        // H y = s for any BFGS update
        let r = two_loop(&y, &buf, &Preconditioner::Identity).unwrap();
        for (a, b) in r.iter().zip(&s) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn quadratic_converges_to_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 5;
        let b_mat: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = (0..n).map(|l| b_mat[l][i] * b_mat[l][j]).sum::<f64>() + if i == j { 1.0 } else { 0.0 };
            }
        }
        let xstar: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        // ½xᵀAx − bᵀx with b = A x*, shifted by its minimum ½x*ᵀAx* so the
        // value is evaluated without cancellation.
        let mut f = |x: &[f64], g: &mut [f64]| -> f64 {
            let mut v = 0.0;
            for i in 0..n {
                let ae: f64 = (0..n).map(|j| a[i][j] * (x[j] - xstar[j])).sum();
                g[i] = ae;
                v += 0.5 * (x[i] - xstar[i]) * ae;
            }
            v
        };
        let cfg = LbfgsConfig::with_tolerance(1e-10);
        let r = minimize(&mut f, vec![0.0; n], &cfg, &Preconditioner::CholeskyScaling).unwrap();
        assert!(r.converged(), "{:?} after {} iterations, |g| = {:e}", r.termination, r.iterations, r.grad_norm);
        assert!(r.iterations <= 50);
        for (xi, si) in r.x.iter().zip(&xstar) {
            assert!((xi - si).abs() < 1e-8);
        }
        for w in r.trace.windows(2) {
            assert!(w[1].f <= w[0].f);
        }
    }

    #[test]
    fn rosenbrock() {
        let mut f = |x: &[f64], g: &mut [f64]| -> f64 {
            let (a, b) = (1.0 - x[0], x[1] - x[0] * x[0]);
            g[0] = -2.0 * a - 400.0 * x[0] * b;
            g[1] = 200.0 * b;
            a * a + 100.0 * b * b
        };
        let cfg = LbfgsConfig::with_tolerance(1e-10);
        let r = minimize(&mut f, vec![-1.2, 1.0], &cfg, &Preconditioner::CholeskyScaling).unwrap();
        assert!(r.converged());
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn already_converged_takes_no_iterations() {
        let mut f = |x: &[f64], g: &mut [f64]| -> f64 {
            g[0] = 2.0 * x[0];
            x[0] * x[0]
        };
        let r = minimize(&mut f, vec![0.0], &LbfgsConfig::default(), &Preconditioner::Identity).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.x, vec![0.0]);
        assert_eq!(r.trace.len(), 1);
    }

    #[test]
    fn non_finite_start_diverges() {
        let mut f = |_: &[f64], g: &mut [f64]| -> f64 {
            g[0] = 0.0;
            f64::NAN
        };
        let r = minimize(&mut f, vec![1.0], &LbfgsConfig::default(), &Preconditioner::Identity);
        assert!(matches!(r, Err(Error::Divergence { .. })));
    }

    #[test]
    fn stop_rule_guard() {
        assert!(stop_criterion(0.9e-7, 0.5, 1e-7));
        assert!(!stop_criterion(1.1e-7, 0.5, 1e-7));
        assert!(stop_criterion(1.9e-7, 2.0, 1e-7));
        // translating x inside the unit ball does not change the verdict
        for xn in [0.0, 0.3, 1.0] {
            assert_eq!(stop_criterion(5e-8, xn, 1e-7), stop_criterion(5e-8, 0.0, 1e-7));
        }
    }

    #[test]
    fn trace_csv_format() {
        let mut buf = Vec::new();
        write_trace(&mut buf, &[TraceRecord { iter: 0, f: 1.5, grad_norm: 0.25 }]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iter,energy,gradnorm\n0,1.5e0,2.5e-1\n");
    }

    #[test]
    fn config_validation() {
        assert!(LbfgsConfig::default().validate().is_ok());
        let bad = LbfgsConfig {
            c1: 0.95,
            ..LbfgsConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
