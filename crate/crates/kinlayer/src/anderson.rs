//! Anderson-accelerated fixed-point iteration.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Accel {
    None,
    Anderson { depth: usize },
}

impl Default for Accel {
    fn default() -> Self {
        Accel::Anderson { depth: 5 }
    }
}

#[derive(Clone, Debug)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub accel: Accel,
}

#[derive(Clone, Debug)]
pub struct FixedPointOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residuals: Vec<f64>,
    pub converged: bool,
}

struct History {
    depth: usize,
    dg: VecDeque<Vec<f64>>,
    df: VecDeque<Vec<f64>>,
    last: Option<(Vec<f64>, Vec<f64>)>,
}

impl History {
    fn new(depth: usize) -> Self {
        History {
            depth,
            dg: VecDeque::new(),
            df: VecDeque::new(),
            last: None,
        }
    }

    fn clear(&mut self) {
        self.dg.clear();
        self.df.clear();
        self.last = None;
    }

    /// Next iterate from the map value `g` and residual `f = g - x`.
    fn next(&mut self, g: &[f64], f: &[f64]) -> Vec<f64> {
        if let Some((g0, f0)) = self.last.take() {
            self.dg
                .push_back(g.iter().zip(&g0).map(|(a, b)| a - b).collect());
            self.df
                .push_back(f.iter().zip(&f0).map(|(a, b)| a - b).collect());
            if self.dg.len() > self.depth {
                self.dg.pop_front();
                self.df.pop_front();
            }
        }
        self.last = Some((g.to_vec(), f.to_vec()));
        let m = self.df.len();
        if m == 0 {
            return g.to_vec();
        }
        let n = f.len();
        let a = DMatrix::from_fn(n, m, |i, j| self.df[j][i]);
        let b = DVector::from_column_slice(f);
        let gamma = match a.svd(true, true).solve(&b, 1e-13) {
            Ok(v) => v,
            Err(_) => return g.to_vec(),
        };
        let mut out = g.to_vec();
        for j in 0..m {
            let c = gamma[j];
            for (o, d) in out.iter_mut().zip(&self.dg[j]) {
                *o -= c * d;
            }
        }
        out
    }
}

/// Iterates `x ← map(x)` until the sup-norm change drops below `tol`.
///
/// The returned iterate is the last map value, so an exact fixed point of the
/// map is reported after a single application.
pub fn fixed_point<F>(x0: Vec<f64>, opts: &FixedPointOptions, mut map: F) -> FixedPointOutcome
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let depth = match opts.accel {
        Accel::None => 0,
        Accel::Anderson { depth } => depth,
    };
    let mut hist = History::new(depth);
    let mut x = x0;
    let mut residuals = Vec::new();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for it in 1..=opts.max_iter {
        let g = map(&x);
        let f: Vec<f64> = g.iter().zip(&x).map(|(a, b)| a - b).collect();
        let r = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        residuals.push(r);
        if !r.is_finite() {
            break;
        }
        if r < opts.tol {
            return FixedPointOutcome {
                x: g,
                iterations: it,
                residuals,
                converged: true,
            };
        }
        match &best {
            Some((rb, _)) if *rb <= r => {
                if r > 1e4 * rb {
                    hist.clear();
                }
            }
            _ => best = Some((r, g.clone())),
        }
        x = if depth == 0 { g } else { hist.next(&g, &f) };
    }
    let x = best.map(|(_, g)| g).unwrap_or(x);
    FixedPointOutcome {
        x,
        iterations: residuals.len(),
        residuals,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_map(x: &[f64]) -> Vec<f64> {
        // contraction with spectral radius 0.99 and fixed point (1, 2)
        vec![0.99 * x[0] + 0.01, 0.5 * x[1] + 0.01 * x[0] + 0.99]
    }

    #[test]
    fn anderson_beats_plain_iteration() {
        let opts = |accel| FixedPointOptions {
            tol: 1e-12,
            max_iter: 10_000,
            accel,
        };
        let plain = fixed_point(vec![0.0, 0.0], &opts(Accel::None), linear_map);
        let fast = fixed_point(
            vec![0.0, 0.0],
            &opts(Accel::Anderson { depth: 3 }),
            linear_map,
        );
        assert!(plain.converged && fast.converged);
        assert!(fast.iterations * 20 < plain.iterations);
        assert!((fast.x[0] - 1.0).abs() < 1e-10);
        assert!((fast.x[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn exact_fixed_point_takes_one_iteration() {
        let opts = FixedPointOptions {
            tol: 1e-12,
            max_iter: 5,
            accel: Accel::default(),
        };
        let out = fixed_point(vec![1.0, 2.0], &opts, linear_map);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn non_convergence_is_flagged() {
        let opts = FixedPointOptions {
            tol: 1e-12,
            max_iter: 5,
            accel: Accel::None,
        };
        let out = fixed_point(vec![1.0], &opts, |x| vec![2.0 * x[0] + 1.0]);
        assert!(!out.converged);
        assert_eq!(out.iterations, 5);
    }
}
