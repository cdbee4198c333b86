//! Characteristic (mild) solver for the layer problem.
//!
//! The average `f̄` is represented by piecewise-linear hats on the `η` grid and
//! determined by a Galerkin projection weighted with `e^{−V}`. Because the
//! mild solution carries flux exactly, the projected equations telescope into
//! a discrete flux balance. The affine map `c ↦ Tc + t` on hat coefficients is
//! assembled once per configuration and reused for every data set.

use super::trace::Path;
use super::{Inflow, LayerGeometry, MilneConfig, MilneField, SolveMeta, Source};
use crate::anderson::{fixed_point, Accel, FixedPointOptions};
use crate::error::{Error, Result};
use crate::quad::{self, Grade};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::{PI, TAU};

/// Functional `Σ row·c + Σ weight·h(entry)` produced by tracing a set of points.
#[derive(Clone, Debug)]
struct Traced {
    row: Vec<f64>,
    entries: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
struct PointSet {
    /// `(η, φ, weight)` of each traced point.
    points: Vec<(f64, f64, f64)>,
}

pub struct MilneOperator {
    cfg: MilneConfig,
    geo: LayerGeometry,
    eta: Vec<f64>,
    phi: Vec<f64>,
    dh: f64,
    iter_matrix: DMatrix<f64>,
    gal: DMatrix<f64>,
    avg_sets: Vec<PointSet>,
    avg: Vec<Traced>,
    grid_rows: Vec<f64>,
    grid_entries: Vec<(f64, f64)>,
    norm_set: PointSet,
    norm: Traced,
}

/// Angular rule at depth `η`, split at the grazing directions and the Region III wedges.
pub(crate) fn phi_rule(geo: &LayerGeometry, eta: f64) -> Vec<(f64, f64)> {
    let res = &geo.res;
    let order = res.phi_order;
    let mut out = Vec::new();
    let mut push = |a: f64, b: f64, panels: usize, grade: Grade| {
        let (x, w) = quad::composite(a, b, panels, order, grade);
        out.extend(x.into_iter().zip(w));
    };
    // directions leaving the wall
    if eta > 0.0 {
        let mut breaks = vec![0.0];
        let mut b = 0.25 * eta;
        while b < 0.4 {
            breaks.push(b);
            b *= 4.0;
        }
        for w in breaks.windows(2) {
            push(w[0], w[1], 1, Grade::None);
            push(PI - w[1], PI - w[0], 1, Grade::None);
        }
        let edge = *breaks.last().unwrap();
        push(edge, PI - edge, res.phi_panels, Grade::None);
    } else {
        push(0.0, PI, res.phi_panels, Grade::Both);
    }
    // directions toward the wall
    let a = geo.wedge(eta);
    if a > 1e-9 {
        push(-a, 0.0, res.wedge_panels, Grade::Both);
        push(-PI, -PI + a, res.wedge_panels, Grade::Both);
        push(-PI + a, -a, res.phi_panels, Grade::Both);
    } else {
        push(-PI, 0.0, res.phi_panels, Grade::Both);
    }
    out
}

/// Rule on `(0, π)` for in-flow moments.
pub(crate) fn inflow_rule() -> (Vec<f64>, Vec<f64>) {
    quad::composite(0.0, PI, 16, 8, Grade::Both)
}

fn eta_rule(eta: &[f64], order: usize, wall_levels: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let rule = quad::gauss(order);
    for k in 0..eta.len() - 1 {
        let (a, b) = (eta[k], eta[k + 1]);
        if k == 0 && wall_levels > 0 {
            let mut edges = vec![a];
            for l in (1..=wall_levels).rev() {
                edges.push(a + (b - a) * 0.25_f64.powi(l as i32));
            }
            edges.push(b);
            for w in edges.windows(2) {
                out.extend(rule.mapped(w[0], w[1]));
            }
        } else {
            out.extend(rule.mapped(a, b));
        }
    }
    out
}

impl MilneOperator {
    pub fn new(cfg: &MilneConfig) -> Result<Self> {
        cfg.validate()?;
        let geo = cfg.geometry();
        let eta = cfg.eta_grid();
        let phi = cfg.phi_grid();
        let n = eta.len();
        let dh = eta[1] - eta[0];
        let exec = cfg.exec;

        let quad_eta = eta_rule(&eta, geo.res.eta_order, geo.res.wall_levels);
        let avg_sets: Vec<PointSet> = quad_eta
            .iter()
            .map(|&(e, _)| PointSet {
                points: phi_rule(&geo, e)
                    .into_iter()
                    .map(|(p, w)| (e, p, w / TAU))
                    .collect(),
            })
            .collect();
        let avg: Vec<Traced> = exec.map(avg_sets.len(), |q| trace_set(&geo, dh, n, &avg_sets[q]));

        let nq = quad_eta.len();
        let mut mass = DMatrix::<f64>::zeros(n, n);
        let mut b = DMatrix::<f64>::zeros(n, nq);
        for (q, &(e, w)) in quad_eta.iter().enumerate() {
            let ww = w * geo.weight(e);
            let (k, t) = hat(e, dh, n);
            let vals = [(k, 1.0 - t), (k + 1, t)];
            for &(i, vi) in &vals {
                b[(i, q)] += ww * vi;
                for &(j, vj) in &vals {
                    mass[(i, j)] += ww * vi * vj;
                }
            }
        }
        let lu = mass.lu();
        let gal = lu
            .solve(&b)
            .ok_or_else(|| Error::Singular("layer mass matrix".into()))?;
        let g = DMatrix::from_fn(nq, n, |q, j| avg[q].row[j]);
        let iter_matrix = &gal * g;

        let n_phi = phi.len();
        let grid: Vec<Traced> = exec.map(n * n_phi, |idx| {
            let set = PointSet {
                points: vec![(eta[idx / n_phi], phi[idx % n_phi], 1.0)],
            };
            trace_set(&geo, dh, n, &set)
        });
        let mut grid_rows = Vec::with_capacity(n * n * n_phi);
        let mut grid_entries = Vec::with_capacity(n * n_phi);
        for t in grid {
            grid_rows.extend_from_slice(&t.row);
            grid_entries.push(t.entries.first().copied().unwrap_or((0.0, 0.0)));
        }

        let norm_set = PointSet {
            points: phi_rule(&geo, 0.0)
                .into_iter()
                .filter(|(p, _)| *p < 0.0)
                .map(|(p, w)| (0.0, p, -0.5 * w * p.sin()))
                .collect(),
        };
        let norm = trace_set(&geo, dh, n, &norm_set);

        Ok(MilneOperator {
            cfg: cfg.clone(),
            geo,
            eta,
            phi,
            dh,
            iter_matrix,
            gal,
            avg_sets,
            avg,
            grid_rows,
            grid_entries,
            norm_set,
            norm,
        })
    }

    pub fn config(&self) -> &MilneConfig {
        &self.cfg
    }

    pub fn geometry(&self) -> &LayerGeometry {
        &self.geo
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    fn functional(&self, set: &PointSet, tr: &Traced, c: &[f64], h: Inflow, s: Source) -> f64 {
        let mut v: f64 = tr.row.iter().zip(c).map(|(a, b)| a * b).sum();
        v += tr.entries.iter().map(|&(p, w)| w * h(p)).sum::<f64>();
        if let Some(s) = s {
            v += source_part(&self.geo, self.dh, set, s);
        }
        v
    }

    /// Mild evaluation on the output grid for given hat coefficients of `f̄`.
    pub fn mild_apply(&self, h: Inflow, s: Source, fbar_nodes: &[f64]) -> Vec<f64> {
        let n = self.eta.len();
        let n_phi = self.phi.len();
        let rows = &self.grid_rows;
        let entries = &self.grid_entries;
        self.cfg.exec.map(n * n_phi, |idx| {
            let row = &rows[idx * n..(idx + 1) * n];
            let (p, att) = entries[idx];
            let mut v: f64 = row.iter().zip(fbar_nodes).map(|(a, b)| a * b).sum();
            if att > 0.0 {
                v += att * h(p);
            }
            if let Some(s) = s {
                let pt = (self.eta[idx / n_phi], self.phi[idx % n_phi], 1.0);
                v += source_part(&self.geo, self.dh, &PointSet { points: vec![pt] }, s);
            }
            v
        })
    }

    /// Mild evaluation at arbitrary points.
    pub fn evaluate_at(
        &self,
        points: &[(f64, f64)],
        h: Inflow,
        s: Source,
        fbar_nodes: &[f64],
    ) -> Vec<f64> {
        let n = self.eta.len();
        self.cfg.exec.map(points.len(), |i| {
            let set = PointSet {
                points: vec![(points[i].0, points[i].1, 1.0)],
            };
            let tr = trace_set(&self.geo, self.dh, n, &set);
            self.functional(&set, &tr, fbar_nodes, h, s)
        })
    }

    /// `(1/2)∫_{sinφ>0} h sinφ dφ`, the value a constant solution would take.
    fn flux_mean(h: Inflow) -> f64 {
        let (x, w) = inflow_rule();
        0.5 * x
            .iter()
            .zip(&w)
            .map(|(p, w)| w * p.sin() * h(*p))
            .sum::<f64>()
    }

    /// Solves with in-flow data only (no compatibility requirement).
    pub fn solve_inflow(&self, h: Inflow, s: Source) -> Result<MilneField> {
        let n = self.eta.len();
        let a: Vec<f64> = self.cfg.exec.map(self.avg.len(), |q| {
            self.functional(&self.avg_sets[q], &self.avg[q], &vec![0.0; n], h, s)
        });
        let t = &self.gal * DVector::from_vec(a);
        let c0 = vec![Self::flux_mean(h); n];
        let opts = FixedPointOptions {
            tol: self.cfg.tol,
            max_iter: self.cfg.max_iter,
            accel: Accel::Anderson { depth: 5 },
        };
        let tm = &self.iter_matrix;
        let out = fixed_point(c0, &opts, |c| {
            let v = tm * DVector::from_column_slice(c) + &t;
            v.as_slice().to_vec()
        });
        let mut meta = SolveMeta {
            solver: "characteristics".into(),
            iterations: out.iterations,
            residuals: out.residuals,
            converged: out.converged,
            ..SolveMeta::default()
        };
        let mut c = out.x;
        if !out.converged {
            let m = DMatrix::<f64>::identity(n, n) - tm;
            if let Some(sol) = m.lu().solve(&t) {
                let res = (tm * &sol + &t - &sol).amax();
                if res < self.cfg.tol {
                    c = sol.as_slice().to_vec();
                    meta.direct_fallback = true;
                    meta.converged = true;
                    meta.residuals.push(res);
                }
            }
        }
        if !meta.converged {
            return Err(Error::NonConvergence {
                what: "layer fixed point".into(),
                iterations: meta.iterations,
                residual: meta.residuals.last().copied().unwrap_or(f64::NAN),
            });
        }
        meta.normalization = Some(self.functional(&self.norm_set, &self.norm, &c, h, s));
        let f = self.mild_apply(h, s, &c);
        let mut field =
            MilneField::from_grid(&self.cfg, self.eta.clone(), self.phi.clone(), f, meta);
        field.meta.solver = "characteristics".into();
        field.fbar_nodes = c;
        Ok(field)
    }

    /// Solves the diffusive-boundary problem: data must be compatible, and the
    /// normalization `P[f](0) = 0` is checked afterwards.
    pub fn solve_diffusive(&self, h: Inflow, s: Source) -> Result<MilneField> {
        let defect = compatibility_defect(&self.cfg, h, s);
        if defect.abs() > self.cfg.tol_compat {
            return Err(Error::Incompatible {
                defect,
                tol: self.cfg.tol_compat,
            });
        }
        let field = self.solve_inflow(h, s)?;
        let p = field.meta.normalization.unwrap_or(f64::NAN);
        let limit = 100.0 * self.cfg.tol;
        if !(p.abs() < limit) {
            return Err(Error::Normalization {
                value: p,
                tol: limit,
            });
        }
        Ok(field)
    }
}

#[inline]
fn hat(eta: f64, dh: f64, n: usize) -> (usize, f64) {
    let s = eta / dh;
    let k = (s.floor() as usize).min(n - 2);
    (k, (s - k as f64).clamp(0.0, 1.0))
}

fn trace_set(geo: &LayerGeometry, dh: f64, n: usize, set: &PointSet) -> Traced {
    let mut row = vec![0.0; n];
    let mut entries = Vec::with_capacity(set.points.len());
    for &(e, p, w) in &set.points {
        let path = Path::new(geo, e, p);
        let att = path.integrate(geo, dh, |eta, _, wt| {
            let (k, t) = hat(eta, dh, n);
            row[k] += w * wt * (1.0 - t);
            row[k + 1] += w * wt * t;
        });
        entries.push((path.entry_phi, w * att));
    }
    Traced { row, entries }
}

fn source_part(
    geo: &LayerGeometry,
    dh: f64,
    set: &PointSet,
    s: &(dyn Fn(f64, f64) -> f64 + Sync),
) -> f64 {
    let mut acc = 0.0;
    for &(e, p, w) in &set.points {
        let path = Path::new(geo, e, p);
        let mut part = 0.0;
        path.integrate(geo, dh, |eta, phi, wt| part += wt * s(eta, phi));
        acc += w * part;
    }
    acc
}

/// `∫_{sinφ>0} h sinφ dφ + ∫₀^L ∫ e^{−V} S dφ dη`.
pub fn compatibility_defect(cfg: &MilneConfig, h: Inflow, s: Source) -> f64 {
    let (x, w) = inflow_rule();
    let mut d: f64 = x.iter().zip(&w).map(|(p, w)| w * p.sin() * h(*p)).sum();
    if let Some(s) = s {
        let geo = cfg.geometry();
        let panels = ((cfg.length * 4.0).ceil() as usize).max(8);
        let (ex, ew) = quad::composite(0.0, cfg.length, panels, 6, Grade::Left);
        let (px, pw) = quad::composite(-PI, PI, 32, 6, Grade::None);
        for (e, we) in ex.iter().zip(&ew) {
            let inner: f64 = px.iter().zip(&pw).map(|(p, wp)| wp * s(*e, *p)).sum();
            d += we * geo.weight(*e) * inner;
        }
    }
    d
}
