//! Reference solver for `ε w·∇u + u − ū = f` in `Ω × S¹` with diffusive
//! reflection `u = P[u] + h` on incoming boundary directions.
//!
//! The unknowns are the average `ū` at the grid nodes and the out-flux moment
//! `P[u]` at the boundary nodes. Along the backward characteristic from a node,
//! in scaled time `t = s/ε`,
//!
//! `u(x, w) = e^{−t_b}(P[u] + h)(x_b, w) + ∫₀^{t_b} e^{−t}(ū + f)(x − εtw) dt`,
//!
//! which is affine in `(ū, P[u])`. The map is assembled once as a sparse matrix.
//! Its fixed point, with the mean of `ū` projected out, is found by GMRES or by
//! accelerated source iteration.

mod grid;
#[cfg(test)]
mod tests;

pub use grid::{BoundaryNode, PolarGrid, Stencil};

use crate::anderson::{self, fixed_point, FixedPointOptions};
use crate::data::{BoundarySource, GSpec};
use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, Shape};
use crate::krylov::gmres;
use crate::par::Exec;
use crate::quad;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

const BREAKS: [f64; 13] = [
    0.0, 0.5, 1.0, 2.0, 3.0, 4.5, 6.5, 9.0, 12.5, 17.0, 23.0, 30.0, 40.0,
];
const ORDER: usize = 4;
const CHUNK: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Accel {
    None,
    Anderson { depth: usize },
    Gmres { restart: usize },
}

impl Default for Accel {
    fn default() -> Self {
        Accel::Gmres { restart: 100 }
    }
}

/// Where the mean of `ū` is removed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Projection {
    #[default]
    EachSweep,
    Final,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TransportConfig {
    pub eps: f64,
    pub domain: DomainSpec,
    pub g: GSpec,
    pub n_dir: usize,
    pub n_r: usize,
    pub n_theta: usize,
    /// Width of the cell at the wall; `ε/4` when absent.
    pub first_cell: Option<f64>,
    /// Stopping tolerance relative to the sup of the data.
    pub tol: f64,
    pub max_iter: usize,
    pub accel: Accel,
    pub projection: Projection,
    /// Scaled time beyond which rays are truncated.
    pub t_max: f64,
    pub exec: Exec,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig {
            eps: 0.1,
            domain: DomainSpec::circle(1.0).expect("unit disk"),
            g: GSpec::default(),
            n_dir: 96,
            n_r: 48,
            n_theta: 96,
            first_cell: None,
            tol: 1e-9,
            max_iter: 2000,
            accel: Accel::default(),
            projection: Projection::default(),
            t_max: 30.0,
            exec: Exec::default(),
        }
    }
}

impl TransportConfig {
    pub fn new(eps: f64, domain: DomainSpec) -> Self {
        TransportConfig {
            eps,
            domain,
            ..Self::default()
        }
    }

    pub fn with_grid(mut self, n_r: usize, n_theta: usize, n_dir: usize) -> Self {
        self.n_r = n_r;
        self.n_theta = n_theta;
        self.n_dir = n_dir;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad(format!("ε must lie in (0, 1), got {}", self.eps));
        }
        if self.n_dir < 4 || self.n_dir % 2 != 0 {
            return bad(format!(
                "n_dir must be even and at least 4, got {}",
                self.n_dir
            ));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return bad("tol and max_iter must be positive".into());
        }
        if !(self.t_max >= 1.0) {
            return bad(format!("t_max must be at least 1, got {}", self.t_max));
        }
        match self.accel {
            Accel::Anderson { depth: 0 } | Accel::Gmres { restart: 0 } => {
                bad("acceleration window must be positive".into())
            }
            _ => Ok(()),
        }
    }

    pub fn grid(&self) -> Result<PolarGrid> {
        PolarGrid::new(
            &self.domain,
            self.n_r,
            self.n_theta,
            self.first_cell.unwrap_or(0.25 * self.eps),
        )
    }

    /// Staggered uniform ordinate angles.
    pub fn ordinates(&self) -> Vec<f64> {
        ordinates(self.n_dir)
    }
}

pub fn ordinates(n_dir: usize) -> Vec<f64> {
    (0..n_dir)
        .map(|k| TAU * (k as f64 + 0.5) / n_dir as f64)
        .collect()
}

/// Trapezoidal moments `∫dw`, `∫w dw` and `∫w⊗w dw` as `[m0, m1x, m1y, m2xx, m2xy, m2yy]`.
pub fn angular_moments(n_dir: usize) -> [f64; 6] {
    let dw = TAU / n_dir as f64;
    let mut m = [0.0; 6];
    for a in ordinates(n_dir) {
        let (s, c) = a.sin_cos();
        for (mi, v) in m.iter_mut().zip([1.0, c, s, c * c, c * s, s * s]) {
            *mi += v * dw;
        }
    }
    m
}

/// In-flow data `h(τ, w)` added to `P[u]` on incoming directions.
pub type InflowFn<'a> = &'a (dyn Fn(f64, [f64; 2]) -> f64 + Sync);
/// Volumetric source `f(x, w)`.
pub type SourceFn<'a> = &'a (dyn Fn([f64; 2], [f64; 2]) -> f64 + Sync);

pub struct Problem<'a> {
    pub inflow: InflowFn<'a>,
    pub source: Option<SourceFn<'a>>,
}

#[derive(Clone, Debug)]
pub struct TransportField {
    pub eps: f64,
    pub domain: DomainSpec,
    pub grid: PolarGrid,
    pub ordinates: Vec<f64>,
    /// `u[node·n_dir + k]`.
    pub u: Vec<f64>,
    pub ubar: Vec<f64>,
    /// `P[u]` on the boundary ring.
    pub outflux: Vec<f64>,
    pub mass: f64,
    /// Mean of `ū` removed after the iteration.
    pub drift: f64,
    /// Constant defect `Ax + b − x` of the projected fixed point.
    pub compatibility: f64,
    /// Arclength mean removed from the wall source.
    pub g_projection: f64,
    pub iterations: usize,
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub nnz: usize,
    /// `sup|u|` over the bound `max(sup|P[u]| + sup|h|, sup|ū| + sup|f|)`.
    pub max_principle: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransportSummary {
    pub eps: f64,
    pub n_r: usize,
    pub n_theta: usize,
    pub n_dir: usize,
    pub beta: f64,
    pub nodes: usize,
    pub nnz: usize,
    pub mass_defect: f64,
    pub drift: f64,
    pub compatibility: f64,
    pub g_projection: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residuals: Vec<f64>,
    pub max_principle: f64,
    pub energy_defect: Option<f64>,
}

impl TransportField {
    pub fn n_dir(&self) -> usize {
        self.ordinates.len()
    }

    pub fn at(&self, node: usize, k: usize) -> f64 {
        self.u[node * self.n_dir() + k]
    }

    pub fn velocity(&self, k: usize) -> [f64; 2] {
        let (s, c) = self.ordinates[k].sin_cos();
        [c, s]
    }

    /// `ū` interpolated at a point of the domain.
    pub fn ubar_at(&self, y: [f64; 2]) -> f64 {
        self.grid.interpolate(&self.domain, &self.ubar, y)
    }

    pub fn summary(&self, energy_defect: Option<f64>) -> TransportSummary {
        TransportSummary {
            eps: self.eps,
            n_r: self.grid.n_r,
            n_theta: self.grid.n_theta,
            n_dir: self.n_dir(),
            beta: self.grid.beta,
            nodes: self.grid.len(),
            nnz: self.nnz,
            mass_defect: mass_defect(self),
            drift: self.drift,
            compatibility: self.compatibility,
            g_projection: self.g_projection,
            iterations: self.iterations,
            converged: self.converged,
            residuals: self.residuals.clone(),
            max_principle: self.max_principle,
            energy_defect,
        }
    }

    /// CSV with columns `x1,x2,angle,u`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "x1,x2,angle,u")?;
        for (i, x) in self.grid.nodes.iter().enumerate() {
            for (k, a) in self.ordinates.iter().enumerate() {
                writeln!(out, "{},{},{},{}", x[0], x[1], a, self.at(i, k))?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// `∬ u dw dx` by the node and ordinate quadrature.
pub fn mass_defect(field: &TransportField) -> f64 {
    let dw = TAU / field.n_dir() as f64;
    field
        .grid
        .area
        .iter()
        .enumerate()
        .map(|(i, a)| {
            a * dw
                * field.u[i * field.n_dir()..(i + 1) * field.n_dir()]
                    .iter()
                    .sum::<f64>()
        })
        .sum()
}

/// Half-range weights `(w·n)_+`, normalized to reproduce constants.
fn reflect_weights(dirs: &[[f64; 2]], normal: [f64; 2]) -> Vec<f64> {
    let mut c: Vec<f64> = dirs
        .iter()
        .map(|w| {
            let wn = w[0] * normal[0] + w[1] * normal[1];
            if wn > 1e-8 {
                wn
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = c.iter().sum();
    c.iter_mut().for_each(|v| *v /= total);
    c
}

/// `P[u]` at boundary node `j` from the stored outgoing values.
pub fn diffusive_reflect(field: &TransportField, j: usize) -> f64 {
    let dirs: Vec<[f64; 2]> = (0..field.n_dir()).map(|k| field.velocity(k)).collect();
    let c = reflect_weights(&dirs, field.grid.boundary[j].normal);
    let node = (field.grid.n_r - 1) * field.grid.n_theta + j;
    c.iter()
        .enumerate()
        .map(|(k, c)| c * field.at(node, k))
        .sum()
}

/// `(ε/2)∫_Γ u²(w·n) + ‖u − ū‖² − ∬ f u` by the discrete quadratures.
pub fn energy_identity_defect(field: &TransportField, f: Option<SourceFn>) -> f64 {
    let nd = field.n_dir();
    let dw = TAU / nd as f64;
    let g = &field.grid;
    let first = (g.n_r - 1) * g.n_theta;
    let mut wall = 0.0;
    for (j, b) in g.boundary.iter().enumerate() {
        for k in 0..nd {
            let w = field.velocity(k);
            let u = field.at(first + j, k);
            wall += b.ds * dw * u * u * (w[0] * b.normal[0] + w[1] * b.normal[1]);
        }
    }
    let mut bulk = 0.0;
    let mut work = 0.0;
    for (i, x) in g.nodes.iter().enumerate() {
        for k in 0..nd {
            let u = field.at(i, k);
            bulk += g.area[i] * dw * (u - field.ubar[i]).powi(2);
            if let Some(f) = f {
                work += g.area[i] * dw * f(*x, field.velocity(k)) * u;
            }
        }
    }
    0.5 * field.eps * wall + bulk - work
}

#[derive(Default)]
struct Ray {
    idx: Vec<u32>,
    w: Vec<f64>,
    konst: f64,
}

impl Ray {
    fn clear(&mut self) {
        self.idx.clear();
        self.w.clear();
        self.konst = 0.0;
    }

    fn push(&mut self, i: u32, w: f64) {
        self.idx.push(i);
        self.w.push(w);
    }

    fn dot(&self, x: &[f64]) -> f64 {
        self.idx
            .iter()
            .zip(&self.w)
            .map(|(i, w)| w * x[*i as usize])
            .sum::<f64>()
            + self.konst
    }
}

struct Row {
    idx: Vec<u32>,
    val: Vec<f64>,
    konst: f64,
}

struct Scratch {
    dense: Vec<f64>,
    mark: Vec<bool>,
    touched: Vec<u32>,
    konst: f64,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            dense: vec![0.0; n],
            mark: vec![false; n],
            touched: Vec::new(),
            konst: 0.0,
        }
    }

    fn add(&mut self, ray: &Ray, c: f64) {
        for (&i, &w) in ray.idx.iter().zip(&ray.w) {
            let iu = i as usize;
            if !self.mark[iu] {
                self.mark[iu] = true;
                self.touched.push(i);
            }
            self.dense[iu] += c * w;
        }
        self.konst += c * ray.konst;
    }

    fn take(&mut self) -> Row {
        self.touched.sort_unstable();
        let mut row = Row {
            idx: Vec::with_capacity(self.touched.len()),
            val: Vec::with_capacity(self.touched.len()),
            konst: self.konst,
        };
        for &i in &self.touched {
            let iu = i as usize;
            row.idx.push(i);
            row.val.push(self.dense[iu]);
            self.dense[iu] = 0.0;
            self.mark[iu] = false;
        }
        self.touched.clear();
        self.konst = 0.0;
        row
    }
}

struct Csr {
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl Csr {
    fn rows(&self) -> usize {
        self.indptr.len() - 1
    }

    fn apply(&self, x: &[f64], exec: Exec) -> Vec<f64> {
        let n = self.rows();
        let block = 256;
        exec.map(n.div_ceil(block), |b| {
            (b * block..((b + 1) * block).min(n))
                .map(|r| {
                    let (lo, hi) = (self.indptr[r], self.indptr[r + 1]);
                    self.indices[lo..hi]
                        .iter()
                        .zip(&self.values[lo..hi])
                        .map(|(i, v)| v * x[*i as usize])
                        .sum::<f64>()
                })
                .collect::<Vec<f64>>()
        })
        .concat()
    }
}

struct Tracer<'a> {
    eps: f64,
    t_max: f64,
    domain: &'a DomainSpec,
    circle: bool,
    grid: &'a PolarGrid,
    dirs: Vec<[f64; 2]>,
    reflect: Vec<Vec<f64>>,
    problem: &'a Problem<'a>,
    breaks: Vec<f64>,
}

impl<'a> Tracer<'a> {
    fn new(cfg: &'a TransportConfig, grid: &'a PolarGrid, problem: &'a Problem<'a>) -> Self {
        let dirs: Vec<[f64; 2]> = cfg
            .ordinates()
            .iter()
            .map(|a| {
                let (s, c) = a.sin_cos();
                [c, s]
            })
            .collect();
        let reflect = grid
            .boundary
            .iter()
            .map(|b| reflect_weights(&dirs, b.normal))
            .collect();
        let mut breaks: Vec<f64> = BREAKS.iter().cloned().filter(|&t| t < cfg.t_max).collect();
        breaks.push(cfg.t_max);
        Tracer {
            eps: cfg.eps,
            t_max: cfg.t_max,
            domain: &cfg.domain,
            circle: matches!(cfg.domain.shape(), Shape::Circle { .. }),
            grid,
            dirs,
            reflect,
            problem,
            breaks,
        }
    }

    fn dim(&self) -> usize {
        self.grid.len() + self.grid.n_theta
    }

    fn tau_of(&self, theta: f64) -> f64 {
        if self.circle {
            theta
        } else {
            self.domain.frame(theta).tau
        }
    }

    fn sample(&self, ray: &mut Ray, y: [f64; 2], w: [f64; 2], weight: f64) {
        let mut st: Stencil = [(0, 0.0); 16];
        self.grid.stencil(self.domain, y, &mut st);
        for (i, v) in st {
            ray.push(i, weight * v);
        }
        if let Some(f) = self.problem.source {
            ray.konst += weight * f(y, w);
        }
    }

    /// Affine representation of `u(x_node, w_k)` in the unknowns.
    fn trace(&self, node: usize, k: usize, ray: &mut Ray) -> Result<()> {
        ray.clear();
        let x = self.grid.nodes[node];
        let w = self.dirs[k];
        let offset = self.grid.len();
        if let Some(j) = self.grid.boundary_index(node) {
            let b = &self.grid.boundary[j];
            if w[0] * b.normal[0] + w[1] * b.normal[1] <= 0.0 {
                ray.push((offset + j) as u32, 1.0);
                ray.konst = (self.problem.inflow)(b.tau, w);
                return Ok(());
            }
        }
        let exit = self.domain.ray_exit(x, w)?;
        let tb = exit.s / self.eps;
        let end = tb.min(self.t_max);
        let rule = quad::gauss(ORDER);
        let mut last = x;
        for pair in self.breaks.windows(2) {
            let a = pair[0];
            if a >= end {
                break;
            }
            let b = pair[1].min(end);
            let mass = -(-a).exp() * (a - b).exp_m1();
            let raw: f64 = rule.mapped(a, b).map(|(t, wt)| wt * (-t).exp()).sum();
            for (t, wt) in rule.mapped(a, b) {
                let y = [x[0] - self.eps * t * w[0], x[1] - self.eps * t * w[1]];
                self.sample(ray, y, w, wt * (-t).exp() * mass / raw);
                last = y;
            }
        }
        if tb > self.t_max {
            self.sample(ray, last, w, (-self.t_max).exp() - (-tb).exp());
        }
        let wb = (-tb).exp();
        if wb > 0.0 {
            let mut bs = [(0, 0.0); 4];
            self.grid.boundary_stencil(exit.theta, offset, &mut bs);
            for (i, v) in bs {
                ray.push(i, wb * v);
            }
            ray.konst += wb * (self.problem.inflow)(self.tau_of(exit.theta), w);
        }
        Ok(())
    }

    fn assemble(&self, exec: Exec) -> Result<(Csr, Vec<f64>)> {
        let n = self.grid.len();
        let nd = self.dirs.len();
        let blocks = exec.map(n.div_ceil(CHUNK), |c| -> Result<Vec<(Row, Option<Row>)>> {
            let mut avg = Scratch::new(self.dim());
            let mut refl = Scratch::new(self.dim());
            let mut ray = Ray::default();
            let mut out = Vec::with_capacity(CHUNK);
            for node in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let bj = self.grid.boundary_index(node);
                for k in 0..nd {
                    self.trace(node, k, &mut ray)?;
                    avg.add(&ray, 1.0 / nd as f64);
                    if let Some(j) = bj {
                        let c = self.reflect[j][k];
                        if c > 0.0 {
                            refl.add(&ray, c);
                        }
                    }
                }
                out.push((avg.take(), bj.map(|_| refl.take())));
            }
            Ok(out)
        });
        let mut rows = Vec::with_capacity(n);
        let mut flux = Vec::with_capacity(self.grid.n_theta);
        for block in blocks {
            for (a, p) in block? {
                rows.push(a);
                if let Some(p) = p {
                    flux.push(p);
                }
            }
        }
        rows.extend(flux);
        let nnz = rows.iter().map(|r| r.idx.len()).sum();
        let mut csr = Csr {
            indptr: Vec::with_capacity(rows.len() + 1),
            indices: Vec::with_capacity(nnz),
            values: Vec::with_capacity(nnz),
        };
        csr.indptr.push(0);
        let mut b = Vec::with_capacity(rows.len());
        for r in rows {
            csr.indices.extend(r.idx);
            csr.values.extend(r.val);
            csr.indptr.push(csr.indices.len());
            b.push(r.konst);
        }
        Ok((csr, b))
    }

    fn reconstruct(&self, x: &[f64], exec: Exec) -> Result<Vec<f64>> {
        let nd = self.dirs.len();
        let n = self.grid.len();
        let blocks = exec.map(n.div_ceil(CHUNK), |c| -> Result<Vec<f64>> {
            let mut ray = Ray::default();
            let mut out = Vec::with_capacity(CHUNK * nd);
            for node in c * CHUNK..((c + 1) * CHUNK).min(n) {
                for k in 0..nd {
                    self.trace(node, k, &mut ray)?;
                    out.push(ray.dot(x));
                }
            }
            Ok(out)
        });
        let mut u = Vec::with_capacity(n * nd);
        for b in blocks {
            u.extend(b?);
        }
        Ok(u)
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Solves the transport problem with wall data `h = εg`.
pub fn solve(cfg: &TransportConfig) -> Result<TransportField> {
    cfg.validate()?;
    let g = BoundarySource::new(cfg.g.clone(), &cfg.domain)?;
    let g_projection = g.projection;
    let eps = cfg.eps;
    let inflow = move |tau: f64, w: [f64; 2]| eps * g.at_velocity(tau, w);
    let mut field = solve_problem(
        cfg,
        &Problem {
            inflow: &inflow,
            source: None,
        },
    )?;
    field.g_projection = g_projection;
    Ok(field)
}

/// Solves the problem with general in-flow data and volumetric source.
pub fn solve_problem(cfg: &TransportConfig, problem: &Problem) -> Result<TransportField> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let tracer = Tracer::new(cfg, &grid, problem);
    let n = grid.len();
    let dim = tracer.dim();
    let (a, b) = tracer.assemble(cfg.exec)?;
    let nnz = a.indices.len();
    let measure = grid.measure();
    let mean = |v: &[f64]| {
        v[..n]
            .iter()
            .zip(&grid.area)
            .map(|(x, a)| x * a)
            .sum::<f64>()
            / measure
    };
    let project = |v: &mut Vec<f64>| {
        let m = mean(v);
        v.iter_mut().for_each(|x| *x -= m);
    };
    let scale = sup(&b);
    let mut x = vec![0.0; dim];
    let (mut iterations, mut residuals, mut converged) = (0, Vec::new(), true);
    if scale > 0.0 {
        let tol = cfg.tol * scale;
        let each = cfg.projection == Projection::EachSweep;
        let map = |v: &[f64]| {
            let mut y = a.apply(v, cfg.exec);
            y.iter_mut().zip(&b).for_each(|(y, b)| *y += b);
            if each {
                project(&mut y);
            }
            y
        };
        match cfg.accel {
            Accel::Gmres { restart } => {
                let mut rhs = b.clone();
                if each {
                    project(&mut rhs);
                }
                let apply = |v: &[f64], out: &mut [f64]| {
                    let mut av = a.apply(v, cfg.exec);
                    if each {
                        project(&mut av);
                    }
                    for i in 0..dim {
                        out[i] = v[i] - av[i];
                    }
                };
                let out = gmres(apply, &rhs, x, restart, cfg.max_iter, tol, |_, r| {
                    sup(r) < tol
                });
                x = out.x;
                iterations = out.iterations;
                residuals = out.residuals;
                converged = out.converged;
            }
            Accel::None | Accel::Anderson { .. } => {
                let accel = match cfg.accel {
                    Accel::Anderson { depth } => anderson::Accel::Anderson { depth },
                    _ => anderson::Accel::None,
                };
                let opts = FixedPointOptions {
                    tol,
                    max_iter: cfg.max_iter,
                    accel,
                };
                let out = fixed_point(x, &opts, map);
                x = out.x;
                iterations = out.iterations;
                residuals = out.residuals;
                converged = out.converged;
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                what: "transport iteration".into(),
                iterations,
                residual: residuals.last().copied().unwrap_or(f64::NAN),
            });
        }
    }
    let drift = mean(&x);
    project(&mut x);
    let mut ax = a.apply(&x, cfg.exec);
    ax.iter_mut().zip(&b).for_each(|(y, b)| *y += b);
    let compatibility = mean(&ax);

    let nd = cfg.n_dir;
    let mut u = tracer.reconstruct(&x, cfg.exec)?;
    u.iter_mut().for_each(|v| *v -= compatibility);
    let mut ubar: Vec<f64> = u
        .chunks(nd)
        .map(|c| c.iter().sum::<f64>() / nd as f64)
        .collect();
    let shift = mean(&ubar);
    u.iter_mut().for_each(|v| *v -= shift);
    ubar.iter_mut().for_each(|v| *v -= shift);

    let h_sup = {
        let first = (grid.n_r - 1) * grid.n_theta;
        let mut m = 0.0_f64;
        for (j, bn) in grid.boundary.iter().enumerate() {
            for (k, w) in tracer.dirs.iter().enumerate() {
                if w[0] * bn.normal[0] + w[1] * bn.normal[1] <= 0.0 {
                    m = m.max((u[(first + j) * nd + k] - x[n + j]).abs());
                }
            }
        }
        m
    };
    let f_sup = match problem.source {
        Some(f) => grid
            .nodes
            .iter()
            .flat_map(|&y| tracer.dirs.iter().map(move |&w| f(y, w).abs()))
            .fold(0.0, f64::max),
        None => 0.0,
    };
    let bound = (sup(&x[n..]) + h_sup).max(sup(&x[..n]) + f_sup);
    let max_principle = if bound > 0.0 { sup(&u) / bound } else { 0.0 };
    let mut field = TransportField {
        eps: cfg.eps,
        domain: cfg.domain.clone(),
        ordinates: cfg.ordinates(),
        outflux: x[n..].to_vec(),
        grid: grid.clone(),
        u,
        ubar,
        mass: 0.0,
        drift,
        compatibility,
        g_projection: 0.0,
        iterations,
        residuals,
        converged,
        nnz,
        max_principle,
    };
    field.mass = mass_defect(&field);
    Ok(field)
}
