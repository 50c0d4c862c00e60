use std::collections::VecDeque;

use super::precond::Preconditioner;
use super::vecops::{dot, norm};
use crate::error::Result;

/// One stored update `(s, y)` with `ρ = 1 / yᵀs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    pub rho: f64,
}

/// Ring buffer of the `m` most recent curvature pairs, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvaturePairs {
    capacity: usize,
    skip_threshold: f64,
    pairs: VecDeque<Pair>,
}

impl CurvaturePairs {
    pub fn new(capacity: usize, skip_threshold: f64) -> Self {
        CurvaturePairs {
            capacity: capacity.max(1),
            skip_threshold,
            pairs: VecDeque::with_capacity(capacity.max(1)),
        }
    }

    /// Store a pair unless `yᵀs ≤ threshold·|y||s|`. Returns whether it was kept.
    pub fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let sy = dot(&s, &y);
        let bound = self.skip_threshold * norm(&s) * norm(&y);
        if !(sy > bound) || !(sy > 0.0) || !sy.is_finite() {
            return false;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back(Pair { s, y, rho: 1.0 / sy });
        true
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    pub fn last(&self) -> Option<&Pair> {
        self.pairs.back()
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &Pair> {
        self.pairs.iter()
    }

    pub fn dim(&self) -> Option<usize> {
        self.pairs.front().map(|p| p.s.len())
    }
}

/// Initial scaling `δ = sᵀy / yᵀy` of the most recent pair; 1 without history.
pub fn cholesky_scale(pair: Option<&Pair>) -> f64 {
    match pair {
        Some(p) => {
            let yy = dot(&p.y, &p.y);
            if yy > 0.0 {
                dot(&p.s, &p.y) / yy
            } else {
                1.0
            }
        }
        None => 1.0,
    }
}

/// `H g` by the two-loop recursion, with `h0` applied between the loops.
pub fn two_loop(g: &[f64], pairs: &CurvaturePairs, h0: &Preconditioner) -> Result<Vec<f64>> {
    let mut q = g.to_vec();
    let mut alpha = Vec::with_capacity(pairs.len());
    for p in pairs.iter().rev() {
        let a = p.rho * dot(&p.s, &q);
        for (qi, yi) in q.iter_mut().zip(&p.y) {
            *qi -= a * yi;
        }
        alpha.push(a);
    }
    let mut r = vec![0.0; g.len()];
    h0.apply(&q, pairs, &mut r)?;
    for (p, a) in pairs.iter().zip(alpha.iter().rev()) {
        let b = p.rho * dot(&p.y, &r);
        for (ri, si) in r.iter_mut().zip(&p.s) {
            *ri += (a - b) * si;
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skips_non_positive_curvature() {
        let mut p = CurvaturePairs::new(3, 1e-10);
        assert!(!p.push(vec![1.0, 0.0], vec![-1.0, 0.0]));
        assert!(!p.push(vec![1.0, 0.0], vec![0.0, 1.0]));
        assert!(p.push(vec![1.0, 0.0], vec![2.0, 0.0]));
        assert_eq!(p.len(), 1);
        assert_eq!(p.last().unwrap().rho, 0.5);
    }

    #[test]
    fn ring_buffer_drops_oldest() {
        let mut p = CurvaturePairs::new(2, 0.0);
        for k in 1..=3 {
            p.push(vec![k as f64], vec![1.0]);
        }
        let s: Vec<f64> = p.iter().map(|q| q.s[0]).collect();
        assert_eq!(s, vec![2.0, 3.0]);
    }

    #[test]
    fn cholesky_examples() {
        let y = vec![1.0, -2.0, 0.5];
        let pair = |s: Vec<f64>| Pair { s, y: y.clone(), rho: 0.0 };
        assert_eq!(cholesky_scale(Some(&pair(y.clone()))), 1.0);
        assert_eq!(cholesky_scale(Some(&pair(y.iter().map(|v| 2.0 * v).collect()))), 2.0);
        let s = vec![0.3, 0.1, -0.7];
        let direct = (0.3 - 0.2 - 0.35) / (1.0 + 4.0 + 0.25);
        assert!((cholesky_scale(Some(&pair(s))) - direct).abs() < 1e-16);
        assert_eq!(cholesky_scale(Some(&Pair { s: vec![1.0], y: vec![0.0], rho: 0.0 })), 1.0);
        assert_eq!(cholesky_scale(None), 1.0);
    }

    #[test]
    fn empty_history_applies_h0() {
        let g = vec![1.0, -2.0, 3.0];
        let pairs = CurvaturePairs::new(5, 1e-10);
        assert_eq!(two_loop(&g, &pairs, &Preconditioner::Identity).unwrap(), g);
    }
}
