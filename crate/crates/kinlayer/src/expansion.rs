//! The matched approximation `Q + Q̄B`: interior terms `Ū₀ + εU₁ + ε²U₂` plus the
//! cut-off first-order layer `εψ₀(√ε·η)(f₁ − f₁,L)`. The zeroth-order layer
//! vanishes identically and is not represented.

use crate::data::{layer_angle, velocity, BoundarySource, GSpec};
use crate::elliptic::{solve_neumann, HarmonicSolution};
use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::interp;
use crate::milne::{config_at, write_field_csv, MilneConfig, MilneField, MilneOperator};
use crate::par::Exec;
use crate::transport::TransportField;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, PI, TAU};
use std::path::Path;

/// Support of the cut-off in the scaled distance `y = √ε·η`.
pub const CUTOFF_INNER: f64 = 0.5;
pub const CUTOFF_OUTER: f64 = 0.75;

/// `ψ₀(y)`: one on `[0, 1/2]`, zero on `[3/4, ∞)`, a smooth bump quotient in between.
pub fn cutoff(y: f64) -> f64 {
    let t = (CUTOFF_OUTER - y) / (CUTOFF_OUTER - CUTOFF_INNER);
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

/// In-flow data of the first-order layer at one boundary point.
#[derive(Clone, Debug)]
pub struct LayerBc {
    pub tau: f64,
    /// `∇Ū₀` at the boundary point.
    pub gradient: [f64; 2],
    /// `P[w·∇Ū₀] = (π/4)·∂Ū₀/∂n`.
    pub flux: f64,
    pub g: BoundarySource,
    /// Constant removed on `sinφ > 0` to make the data exactly compatible.
    pub shift: f64,
}

impl LayerBc {
    /// `g₁(φ) = w·∇Ū₀ − P[w·∇Ū₀] + g` before projection.
    pub fn raw(&self, phi: f64) -> f64 {
        let w = velocity(self.tau, phi);
        w[0] * self.gradient[0] + w[1] * self.gradient[1] - self.flux + self.g.value(self.tau, phi)
    }

    pub fn value(&self, phi: f64) -> f64 {
        self.raw(phi) - self.shift
    }

    /// `∫_{sinφ>0} g₁ sinφ dφ` of the projected data.
    pub fn compatibility_defect(&self) -> f64 {
        let cfg = MilneConfig::new(0.5, 1.0);
        crate::milne::compatibility_defect(&cfg, &|p| self.value(p), None)
    }
}

/// Builds `g₁` at normal angle `tau`, projecting out the incompatible part.
pub fn layer_bc(
    domain: &DomainSpec,
    sol: &HarmonicSolution,
    g: &BoundarySource,
    tau: f64,
) -> LayerBc {
    let f = domain.frame(domain.theta_of_tau(tau));
    let gradient = sol.gradient(f.point);
    let dn = gradient[0] * f.normal[0] + gradient[1] * f.normal[1];
    let mut bc = LayerBc {
        tau,
        gradient,
        flux: FRAC_PI_4 * dn,
        g: g.clone(),
        shift: 0.0,
    };
    bc.shift = 0.5 * bc.compatibility_defect();
    bc
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpansionConfig {
    pub n_tau: usize,
    pub n_phi: usize,
    /// Layer nodes in `η`; sixteen per unit length when absent.
    pub n_eta: Option<usize>,
    pub tol: f64,
    /// Largest accepted projection of `g₁`.
    pub tol_compat: f64,
    pub exec: Exec,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig {
            n_tau: 32,
            n_phi: 64,
            n_eta: None,
            tol: 1e-9,
            tol_compat: 1e-6,
            exec: Exec::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExpansionSet {
    pub eps: f64,
    pub domain: DomainSpec,
    pub g: BoundarySource,
    pub interior: HarmonicSolution,
    /// Uniform normal angles of the layer solves.
    pub taus: Vec<f64>,
    /// `f₁` at each `τ`.
    pub layers: Vec<MilneField>,
    /// Projection applied to `g₁` at each `τ`.
    pub shifts: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerEntry {
    pub tau: f64,
    pub file: String,
    pub r_kappa: f64,
    pub f_l: f64,
    pub shift: f64,
    pub normalization: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpansionManifest {
    pub eps: f64,
    pub domain: DomainSpec,
    pub g: GSpec,
    pub g_projection: f64,
    pub cutoff_inner: f64,
    pub cutoff_outer: f64,
    /// Cut-off support in the distance to the wall, `(3/4)√ε`.
    pub layer_depth: f64,
    pub n_tau: usize,
    pub n_eta: usize,
    pub n_phi: usize,
    pub length: f64,
    pub interior: String,
    pub layers: Vec<LayerEntry>,
}

/// Solves the interior problem and the layer at every `τ` node.
pub fn build(
    domain: &DomainSpec,
    eps: f64,
    g: GSpec,
    cfg: &ExpansionConfig,
) -> Result<ExpansionSet> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "ε must lie in (0, 1), got {eps}"
        )));
    }
    if cfg.n_tau < 4 {
        return Err(Error::InvalidConfig("n_tau must be at least 4".into()));
    }
    let depth = CUTOFF_OUTER * eps.sqrt();
    if depth >= domain.validity_radius() {
        return Err(Error::InvalidConfig(format!(
            "layer depth {depth:.3} exceeds the validity radius {:.3}",
            domain.validity_radius()
        )));
    }
    let g = BoundarySource::new(g, domain)?;
    let interior = solve_neumann(domain, &|t| 0.5 * g.profile(t))?;
    build_layer(domain, eps, interior, g, cfg)
}

/// Layer solves for a given interior term.
pub fn build_layer(
    domain: &DomainSpec,
    eps: f64,
    interior: HarmonicSolution,
    g: BoundarySource,
    cfg: &ExpansionConfig,
) -> Result<ExpansionSet> {
    let taus: Vec<f64> = (0..cfg.n_tau)
        .map(|k| TAU * k as f64 / cfg.n_tau as f64)
        .collect();
    let mut base = MilneConfig::new(eps, 1.0);
    base.n_phi = cfg.n_phi;
    if let Some(n) = cfg.n_eta {
        base.n_eta = n;
    }
    base.tol = cfg.tol;
    base.exec = Exec::Sequential;
    let shared = if domain.is_circle() {
        Some(MilneOperator::new(&config_at(&base, domain, 0.0))?)
    } else {
        None
    };
    let results = cfg.exec.map(taus.len(), |k| -> Result<(MilneField, f64)> {
        let tau = taus[k];
        let bc = layer_bc(domain, &interior, &g, tau);
        if bc.shift.abs() > cfg.tol_compat {
            return Err(Error::Incompatible {
                defect: 2.0 * bc.shift,
                tol: cfg.tol_compat,
            });
        }
        let h = |p: f64| bc.value(p);
        let mut field = match &shared {
            Some(op) => op.solve_diffusive(&h, None)?,
            None => {
                MilneOperator::new(&config_at(&base, domain, tau))?.solve_diffusive(&h, None)?
            }
        };
        field.tau = tau;
        Ok((field, bc.shift))
    });
    let mut layers = Vec::with_capacity(taus.len());
    let mut shifts = Vec::with_capacity(taus.len());
    for r in results {
        let (f, s) = r?;
        layers.push(f);
        shifts.push(s);
    }
    Ok(ExpansionSet {
        eps,
        domain: domain.clone(),
        g,
        interior,
        taus,
        layers,
        shifts,
    })
}

/// Norms of `R = u^ε − Q − Q̄B` and of `u^ε − Ū₀` over the transport nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RemainderNorms {
    pub sup_remainder: f64,
    pub l2_remainder: f64,
    pub sup_error: f64,
    pub l2_error: f64,
    /// `sup|εU₁ + ε²U₂ + εŪB₁|`.
    pub sup_correction: f64,
}

impl ExpansionSet {
    pub fn is_zero(&self) -> bool {
        self.interior.is_zero() && self.g.is_zero()
    }

    /// Depth below which the layer contributes.
    pub fn layer_depth(&self) -> f64 {
        CUTOFF_OUTER * self.eps.sqrt()
    }

    /// `f₁ − f₁,L` at `(τ, η, φ)`, periodic cubic in `τ`.
    pub fn layer_value(&self, tau: f64, eta: f64, phi: f64) -> f64 {
        let n = self.taus.len();
        let mut w = [0.0; 4];
        let base = interp::periodic_stencil(0.0, TAU / n as f64, tau.rem_euclid(TAU), &mut w);
        w.iter()
            .enumerate()
            .map(|(q, wq)| {
                let f = &self.layers[(base + q as isize).rem_euclid(n as isize) as usize];
                wq * (f.interpolate(eta, phi) - f.f_l)
            })
            .sum()
    }

    /// `(Q, Q̄B)` at `(x, w)`.
    pub fn parts(&self, x: [f64; 2], w: [f64; 2]) -> (f64, f64) {
        let t = self.interior.interior_terms(x, w);
        let eps = self.eps;
        let q = t.u0 + eps * t.u1 + eps * eps * t.u2;
        let Ok(local) = self.domain.from_cartesian(x) else {
            return (q, 0.0);
        };
        if local.mu >= self.layer_depth() {
            return (q, 0.0);
        }
        let tau = self.domain.frame(local.theta).tau;
        let eta = local.mu / eps;
        let psi = cutoff(eps.sqrt() * eta);
        (
            q,
            eps * psi * self.layer_value(tau, eta, layer_angle(tau, w)),
        )
    }

    pub fn evaluate(&self, x: [f64; 2], w: [f64; 2]) -> f64 {
        let (q, b) = self.parts(x, w);
        q + b
    }

    /// `sup |R − P[R]|` over incoming directions at the layer nodes, from the
    /// identity `u − P[u] = εg` of the exact solution. The outgoing layer trace
    /// enters through the solver's own normalization functional.
    pub fn boundary_defect(&self) -> f64 {
        let eps = self.eps;
        let mut worst = 0.0_f64;
        let (x, w) = crate::quad::composite(-PI, 0.0, 16, 8, crate::quad::Grade::None);
        for (k, &tau) in self.taus.iter().enumerate() {
            let x0 = self.domain.frame(self.domain.theta_of_tau(tau)).point;
            let f = &self.layers[k];
            let q = |p: f64| {
                let t = self.interior.interior_terms(x0, velocity(tau, p));
                t.u0 + eps * t.u1 + eps * eps * t.u2
            };
            let p_q = -0.5
                * x.iter()
                    .zip(&w)
                    .map(|(p, wt)| wt * p.sin() * q(*p))
                    .sum::<f64>();
            let p_e = p_q + eps * (f.meta.normalization.unwrap_or(0.0) - f.f_l);
            for (j, &p) in f.phi.iter().enumerate() {
                if p.sin() > 0.0 {
                    let e = q(p) + eps * (f.at(0, j) - f.f_l);
                    worst = worst.max((eps * self.g.value(tau, p) - (e - p_e)).abs());
                }
            }
        }
        worst
    }

    /// Analytic form `ε² sup|U₂ − P[U₂]|` of the boundary defect at the same nodes.
    pub fn boundary_defect_leading(&self) -> f64 {
        let eps = self.eps;
        let mut worst = 0.0_f64;
        let (x, w) = crate::quad::composite(-PI, 0.0, 16, 8, crate::quad::Grade::None);
        for &tau in &self.taus {
            let x0 = self.domain.frame(self.domain.theta_of_tau(tau)).point;
            let u2 = |p: f64| self.interior.interior_terms(x0, velocity(tau, p)).u2;
            let p_u2 = -0.5
                * x.iter()
                    .zip(&w)
                    .map(|(p, wt)| wt * p.sin() * u2(*p))
                    .sum::<f64>();
            for j in 0..64 {
                let p = PI * (j as f64 + 0.5) / 64.0;
                worst = worst.max((u2(p) - p_u2).abs());
            }
        }
        eps * eps * worst
    }

    pub fn manifest(&self) -> ExpansionManifest {
        let f0 = &self.layers[0];
        ExpansionManifest {
            eps: self.eps,
            domain: self.domain.clone(),
            g: self.g.spec.clone(),
            g_projection: self.g.projection,
            cutoff_inner: CUTOFF_INNER,
            cutoff_outer: CUTOFF_OUTER,
            layer_depth: self.layer_depth(),
            n_tau: self.taus.len(),
            n_eta: f0.n_eta(),
            n_phi: f0.n_phi(),
            length: f0.length,
            interior: "interior.json".into(),
            layers: self
                .layers
                .iter()
                .enumerate()
                .map(|(k, f)| LayerEntry {
                    tau: self.taus[k],
                    file: format!("layer_{k:03}.csv"),
                    r_kappa: f.r_kappa,
                    f_l: f.f_l,
                    shift: self.shifts[k],
                    normalization: f.meta.normalization,
                })
                .collect(),
        }
    }

    /// Writes `interior.json`, one `layer_NNN.csv` per `τ` and `manifest.json`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let manifest = self.manifest();
        self.interior.write_json(&dir.join(&manifest.interior))?;
        for (entry, f) in manifest.layers.iter().zip(&self.layers) {
            write_field_csv(f, &dir.join(&entry.file))?;
        }
        std::fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        Ok(())
    }
}

/// Compares a transport solution with the expansion at every node and ordinate.
pub fn remainder_norms(u: &TransportField, exp: &ExpansionSet) -> RemainderNorms {
    if (u.eps - exp.eps).abs() > 1e-14 * exp.eps {
        panic!(
            "transport ε = {} differs from expansion ε = {}",
            u.eps, exp.eps
        );
    }
    let nd = u.n_dir();
    let dw = TAU / nd as f64;
    let rows = exp_rows(u, exp);
    let mut n = RemainderNorms::default();
    let (mut l2r, mut l2e) = (0.0, 0.0);
    for (i, row) in rows.iter().enumerate() {
        let a = u.grid.area[i];
        for (k, &(u0, q, b)) in row.iter().enumerate() {
            let v = u.at(i, k);
            let r = v - q - b;
            n.sup_remainder = n.sup_remainder.max(r.abs());
            n.sup_error = n.sup_error.max((v - u0).abs());
            n.sup_correction = n.sup_correction.max((q + b - u0).abs());
            l2r += a * dw * r * r;
            l2e += a * dw * (v - u0).powi(2);
        }
    }
    n.l2_remainder = l2r.sqrt();
    n.l2_error = l2e.sqrt();
    n
}

fn exp_rows(u: &TransportField, exp: &ExpansionSet) -> Vec<Vec<(f64, f64, f64)>> {
    let nd = u.n_dir();
    Exec::default().map(u.grid.len(), |i| {
        let x = u.grid.nodes[i];
        let u0 = exp.interior.value(x);
        (0..nd)
            .map(|k| {
                let (q, b) = exp.parts(x, u.velocity(k));
                (u0, q, b)
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cutoff_profile() {
        assert_eq!(cutoff(0.25), 1.0);
        assert_eq!(cutoff(0.5), 1.0);
        assert_eq!(cutoff(1.0), 0.0);
        assert_eq!(cutoff(0.75), 0.0);
        assert_abs_diff_eq!(cutoff(0.625), 0.5, epsilon = 1e-15);
        let mut last = 1.0;
        for k in 0..=100 {
            let v = cutoff(0.5 + 0.25 * k as f64 / 100.0);
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn layer_bc_for_a_linear_interior_term() {
        let d = DomainSpec::circle(1.0).unwrap();
        // Ū₀ = x₁ from D = cosτ
        let sol = solve_neumann(&d, &|t| t.cos()).unwrap();
        let bc = layer_bc(&d, &sol, &BoundarySource::zero(), 0.7);
        for &p in &[0.3, 1.2, 2.9] {
            let expect = -(p - 0.7_f64).sin() - FRAC_PI_4 * 0.7_f64.cos();
            assert_abs_diff_eq!(bc.raw(p), expect, epsilon = 1e-12);
        }
        // compatible once g carries the same Neumann data
        let g = BoundarySource::new(
            GSpec::LegendreFlux {
                a1: 2.0,
                b1: 0.0,
                a2: 0.0,
            },
            &d,
        )
        .unwrap();
        let bc = layer_bc(&d, &sol, &g, 0.7);
        assert!(bc.shift.abs() < 1e-12);
        // P of w·∇Ū₀ by quadrature over sinφ < 0
        let (x, w) = crate::quad::composite(-PI, 0.0, 8, 8, crate::quad::Grade::None);
        let p: f64 = -0.5
            * x.iter()
                .zip(&w)
                .map(|(p, w)| w * p.sin() * -(p - 0.7).sin())
                .sum::<f64>();
        assert_abs_diff_eq!(p, bc.flux, epsilon = 1e-13);
        let zero = layer_bc(&d, &HarmonicSolution::zero(), &BoundarySource::zero(), 0.0);
        assert_eq!(zero.value(1.0), 0.0);
    }

    fn small() -> ExpansionConfig {
        ExpansionConfig {
            n_tau: 8,
            n_phi: 32,
            ..ExpansionConfig::default()
        }
    }

    #[test]
    fn zero_data_gives_a_zero_expansion() {
        let d = DomainSpec::circle(1.0).unwrap();
        let e = build(&d, 0.1, GSpec::Zero, &small()).unwrap();
        assert!(e.is_zero());
        assert_eq!(e.evaluate([0.9, 0.1], [0.0, 1.0]), 0.0);
        assert!(e.layers.iter().all(|f| f.f.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn layer_is_local_to_the_wall() {
        let d = DomainSpec::circle(1.0).unwrap();
        let e = build(&d, 0.1, GSpec::default(), &small()).unwrap();
        let w = [0.6, 0.8];
        let x = [0.0, 0.5];
        let t = e.interior.interior_terms(x, w);
        assert_eq!(e.evaluate(x, w), t.u0 + 0.1 * t.u1 + 0.01 * t.u2);
        let (_, b) = e.parts([0.0, 0.99], [0.0, -1.0]);
        assert!(b != 0.0);
    }

    #[test]
    fn rotated_data_gives_rotated_layers() {
        let d = DomainSpec::circle(1.0).unwrap();
        let cfg = small();
        let dt = TAU / cfg.n_tau as f64;
        let a = build(
            &d,
            0.1,
            GSpec::LegendreFlux {
                a1: 1.0,
                b1: 0.0,
                a2: 0.0,
            },
            &cfg,
        )
        .unwrap();
        let b = build(
            &d,
            0.1,
            GSpec::LegendreFlux {
                a1: dt.cos(),
                b1: dt.sin(),
                a2: 0.0,
            },
            &cfg,
        )
        .unwrap();
        for k in 0..cfg.n_tau {
            let (p, q) = (&a.layers[k], &b.layers[(k + 1) % cfg.n_tau]);
            let diff =
                p.f.iter()
                    .zip(&q.f)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
            assert!(diff < 1e-8, "{k}: {diff}");
        }
    }

    #[test]
    fn boundary_defect_matches_its_leading_term() {
        let d = DomainSpec::circle(1.0).unwrap();
        let e = build(&d, 0.05, GSpec::default(), &small()).unwrap();
        let (a, b) = (e.boundary_defect(), e.boundary_defect_leading());
        assert!(b > 0.0);
        assert!((a - b).abs() < 0.05 * b, "{a} {b}");
    }

    #[test]
    fn writes_a_directory() {
        let d = DomainSpec::circle(1.0).unwrap();
        let e = build(&d, 0.1, GSpec::default(), &small()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        e.write_dir(dir.path()).unwrap();
        let m: ExpansionManifest = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("manifest.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(m.layers.len(), 8);
        assert!(dir.path().join("layer_007.csv").exists());
        let back = HarmonicSolution::read_json(&dir.path().join("interior.json")).unwrap();
        assert_eq!(back, e.interior);
    }
}
