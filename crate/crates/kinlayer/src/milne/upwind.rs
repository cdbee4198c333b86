//! Upwind finite differences for the layer problem
//!
//! `sinφ ∂η f + F cosφ ∂φ f + f − f̄ = S`
//!
//! on the same nodes as the characteristic solver, with second-order backward
//! differences in both variables. For a frozen average the
//! upwind graph is acyclic: the half `sinφ > 0` is swept outward from the wall,
//! then the half `sinφ < 0` inward from `η = L` starting from the reflected
//! values. The average is updated by source iteration.

use super::{Inflow, MilneConfig, MilneField, SolveMeta, Source};
use crate::anderson::{fixed_point, Accel, FixedPointOptions};
use crate::error::{Error, Result};
use std::f64::consts::{PI, TAU};

struct Grid {
    n: usize,
    m: usize,
    d_eta: f64,
    d_phi: f64,
    eta: Vec<f64>,
    phi: Vec<f64>,
    sin: Vec<f64>,
    /// `F(η_i)`.
    force: Vec<f64>,
    /// `cos` at the face `φ_j − Δφ/2`; index `m` is the top face.
    cos_face: Vec<f64>,
    source: Vec<f64>,
    inflow: Vec<f64>,
}

impl Grid {
    fn new(cfg: &MilneConfig, h: Inflow, s: Source) -> Self {
        let geo = cfg.geometry();
        let eta = cfg.eta_grid();
        let phi = cfg.phi_grid();
        let (n, m) = (eta.len(), phi.len());
        let source = match s {
            Some(s) => eta
                .iter()
                .flat_map(|&e| phi.iter().map(move |&p| s(e, p)))
                .collect(),
            None => vec![0.0; n * m],
        };
        let d_phi = TAU / m as f64;
        Grid {
            n,
            m,
            d_eta: cfg.length / (n - 1) as f64,
            d_phi,
            sin: phi.iter().map(|p| p.sin()).collect(),
            inflow: phi
                .iter()
                .map(|&p| if p.sin() > 0.0 { h(p) } else { 0.0 })
                .collect(),
            force: eta.iter().map(|&e| geo.force(e)).collect(),
            cos_face: (0..=m)
                .map(|j| {
                    let c = (-PI + j as f64 * d_phi).cos();
                    // faces at ±π/2 carry no drift
                    if c.abs() < 1e-12 {
                        0.0
                    } else {
                        c
                    }
                })
                .collect(),
            source,
            eta,
            phi,
        }
    }

    fn node(&self, f: &mut [f64], fbar: &[f64], i: usize, j: usize) {
        let (n, m) = (self.n, self.m);
        let s = self.sin[j];
        if s > 0.0 && i == 0 {
            f[j] = self.inflow[j];
            return;
        }
        if s < 0.0 && i + 1 == n {
            f[i * m + j] = f[i * m + (m - 1 - j)];
            return;
        }
        let a = s.abs() / self.d_eta;
        let (near, far) = if s > 0.0 {
            (i.checked_sub(1), i.checked_sub(2))
        } else {
            (Some(i + 1), (i + 2 < n).then_some(i + 2))
        };
        let near = f[near.unwrap() * m + j];
        let (diag, up_eta) = match far {
            Some(k) => (1.5 * a, a * (2.0 * near - 0.5 * f[k * m + j])),
            None => (a, a * near),
        };
        // face-signed speeds: no coupling across faces where the drift turns
        let drift = |k: usize| self.force[i] * self.cos_face[k % m];
        let at = |k: usize| f[i * m + k % m];
        let lo = drift(j).max(0.0) / self.d_phi;
        let hi = -drift(j + 1).min(0.0) / self.d_phi;
        let (mut diag_phi, mut up_phi) = (0.0, 0.0);
        if lo > 0.0 {
            let near = at(j + m - 1);
            if drift(j + m - 1) > 0.0 {
                diag_phi += 1.5 * lo;
                up_phi += lo * (2.0 * near - 0.5 * at(j + m - 2));
            } else {
                diag_phi += lo;
                up_phi += lo * near;
            }
        }
        if hi > 0.0 {
            let near = at(j + 1);
            if drift(j + 2) < 0.0 {
                diag_phi += 1.5 * hi;
                up_phi += hi * (2.0 * near - 0.5 * at(j + 2));
            } else {
                diag_phi += hi;
                up_phi += hi * near;
            }
        }
        f[i * m + j] =
            (up_eta + up_phi + fbar[i] + self.source[i * m + j]) / (1.0 + diag + diag_phi);
    }

    /// Exact solve of the discrete transport step for a frozen average.
    fn sweep(&self, fbar: &[f64]) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        let mut f = vec![0.0; n * m];
        let (q1, q2, q3) = (m / 4, m / 2, 3 * m / 4);
        for i in 0..n {
            for j in (q2..q3).rev() {
                self.node(&mut f, fbar, i, j);
            }
            for j in q3..m {
                self.node(&mut f, fbar, i, j);
            }
        }
        for i in (0..n).rev() {
            for j in (q1..q2).rev() {
                self.node(&mut f, fbar, i, j);
            }
            for j in 0..q1 {
                self.node(&mut f, fbar, i, j);
            }
        }
        f
    }

    fn average(&self, f: &[f64]) -> Vec<f64> {
        f.chunks(self.m)
            .map(|r| r.iter().sum::<f64>() / self.m as f64)
            .collect()
    }
}

/// Independent grid solver used to cross-check the characteristic solver.
pub fn upwind_solve(cfg: &MilneConfig, h: Inflow, s: Source) -> Result<MilneField> {
    cfg.validate()?;
    let grid = Grid::new(cfg, h, s);
    let flux_mean = {
        let num: f64 = grid
            .sin
            .iter()
            .zip(&grid.inflow)
            .map(|(s, v)| s.max(0.0) * v)
            .sum();
        let den: f64 = grid.sin.iter().map(|v| v.max(0.0)).sum();
        num / den
    };
    let opts = FixedPointOptions {
        tol: cfg.tol,
        max_iter: cfg.max_iter.max(2000),
        accel: Accel::Anderson { depth: 10 },
    };
    let out = fixed_point(vec![flux_mean; grid.n], &opts, |fbar| {
        grid.average(&grid.sweep(fbar))
    });
    if !out.converged {
        return Err(Error::NonConvergence {
            what: "upwind source iteration".into(),
            iterations: out.iterations,
            residual: out.residuals.last().copied().unwrap_or(f64::NAN),
        });
    }
    let f = grid.sweep(&out.x);
    let p0 = -0.5
        * grid
            .sin
            .iter()
            .enumerate()
            .filter(|(_, s)| **s < 0.0)
            .map(|(j, s)| s * f[j])
            .sum::<f64>()
        * grid.d_phi;
    let meta = SolveMeta {
        solver: "upwind".into(),
        iterations: out.iterations,
        residuals: out.residuals,
        converged: true,
        normalization: Some(p0),
        ..SolveMeta::default()
    };
    let mut field = MilneField::from_grid(cfg, grid.eta.clone(), grid.phi.clone(), f, meta);
    field.fbar_nodes = out.x;
    Ok(field)
}
