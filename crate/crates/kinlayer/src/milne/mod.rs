//! The ε-Milne layer problem at a fixed boundary point:
//!
//! `sinφ ∂η f + F(η) cosφ ∂φ f + f − f̄ = S` on `0 ≤ η ≤ L`, `φ ∈ (−π, π]`,
//! with in-flow data `f(0, φ) = h(φ)` for `sinφ > 0` and specular reflection
//! `f(L, φ) = f(L, −φ)`. The force is `F = −ε/(R_κ − εη)`; the classical mode
//! sets `F ≡ 0`.

mod diagnostics;
mod io;
mod solver;
mod trace;
mod upwind;

pub use diagnostics::{
    config_at, curvature_refinement, decay_rate, default_k0, tangential_agreement,
    tangential_derivative, weighted_derivatives, Decay, DerivativeReport, TangentialAgreement,
    TangentialFamily, TangentialReport,
};
pub use io::{read_profile_csv, write_field_csv, write_summary_json, MilneSummary};
pub use solver::{compatibility_defect, MilneOperator};
pub use trace::{CharacteristicTrace, Region, TraceSample};
pub use upwind::upwind_solve;

use crate::error::{Error, Result};
use crate::par::Exec;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// In-flow data `h(φ)` on `sinφ > 0`.
pub type Inflow<'a> = &'a (dyn Fn(f64) -> f64 + Sync);
/// Interior source `S(η, φ)`.
pub type Source<'a> = Option<&'a (dyn Fn(f64, f64) -> f64 + Sync)>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Corrected,
    Classical,
}

/// Internal quadrature resolution of the characteristic solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Resolution {
    /// Gauss points per `η` element for the projected average.
    pub eta_order: usize,
    /// Geometric refinements of the element touching the wall.
    pub wall_levels: usize,
    pub phi_order: usize,
    pub phi_panels: usize,
    pub wedge_panels: usize,
    pub sigma_order: usize,
    pub sigma_step: f64,
    /// Optical depth beyond which characteristics are truncated.
    pub sigma_cut: f64,
    /// Factor already applied to `n_eta` and `wedge_panels` for wall curvature.
    pub curvature_refine: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution {
            eta_order: 3,
            wall_levels: 5,
            phi_order: 6,
            phi_panels: 8,
            wedge_panels: 8,
            sigma_order: 4,
            sigma_step: 0.5,
            sigma_cut: 40.0,
            curvature_refine: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MilneConfig {
    pub eps: f64,
    pub tau: f64,
    pub r_kappa: f64,
    pub r_kappa_prime: f64,
    pub length: f64,
    pub length_overridden: bool,
    pub n_eta: usize,
    pub n_phi: usize,
    pub mode: Mode,
    pub penalty: f64,
    pub tol: f64,
    /// Largest compatibility defect accepted by the diffusive solve.
    pub tol_compat: f64,
    pub max_iter: usize,
    #[serde(default)]
    pub resolution: Resolution,
    #[serde(default)]
    pub exec: Exec,
}

impl MilneConfig {
    /// Defaults: `L = ε^{−1/2}`, sixteen `η` nodes per unit length, 64 angles.
    pub fn new(eps: f64, r_kappa: f64) -> Self {
        let length = eps.powf(-0.5);
        MilneConfig {
            eps,
            tau: 0.0,
            r_kappa,
            r_kappa_prime: 0.0,
            length,
            length_overridden: false,
            n_eta: default_n_eta(length),
            n_phi: 64,
            mode: Mode::Corrected,
            penalty: 0.0,
            tol: 1e-9,
            tol_compat: 1e-8,
            max_iter: 500,
            resolution: Resolution::default(),
            exec: Exec::default(),
        }
    }

    pub fn with_length(mut self, length: f64) -> Self {
        self.length = length;
        self.length_overridden = true;
        self.n_eta = default_n_eta(length);
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_grid(mut self, n_eta: usize, n_phi: usize) -> Self {
        self.n_eta = n_eta;
        self.n_phi = n_phi;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad(format!("eps must lie in (0, 1), got {}", self.eps));
        }
        if !(self.r_kappa.is_finite() && self.r_kappa > 0.0) {
            return bad(format!(
                "radius of curvature must be positive, got {}",
                self.r_kappa
            ));
        }
        if !(self.length.is_finite() && self.length > 0.0) {
            return bad(format!(
                "layer length must be positive, got {}",
                self.length
            ));
        }
        if self.mode == Mode::Corrected && self.eps * self.length >= self.r_kappa {
            return bad(format!(
                "εL = {} reaches the radius of curvature {}",
                self.eps * self.length,
                self.r_kappa
            ));
        }
        if self.n_eta < 3 {
            return bad("n_eta must be at least 3".into());
        }
        if self.n_phi < 8 || self.n_phi % 4 != 0 {
            return bad(format!(
                "n_phi must be a multiple of 4 and at least 8, got {}",
                self.n_phi
            ));
        }
        if !(self.penalty >= 0.0) || !(self.tol > 0.0) || self.max_iter == 0 {
            return bad("penalty must be ≥ 0, tol > 0 and max_iter > 0".into());
        }
        let r = &self.resolution;
        if r.sigma_order == 0 || r.sigma_order > 16 || r.eta_order == 0 || r.phi_order == 0 {
            return bad("quadrature orders must lie in 1..=16".into());
        }
        if r.curvature_refine == 0 {
            return bad("curvature_refine must be at least 1".into());
        }
        if !(r.sigma_step > 0.0 && r.sigma_cut > 0.0) {
            return bad("sigma_step and sigma_cut must be positive".into());
        }
        Ok(())
    }

    pub fn geometry(&self) -> LayerGeometry {
        LayerGeometry {
            eps: self.eps,
            r_kappa: self.r_kappa,
            length: self.length,
            mode: self.mode,
            rate: 1.0 + self.penalty,
            res: self.resolution.clone(),
        }
    }

    pub fn eta_grid(&self) -> Vec<f64> {
        let h = self.length / (self.n_eta - 1) as f64;
        (0..self.n_eta).map(|i| i as f64 * h).collect()
    }

    pub fn phi_grid(&self) -> Vec<f64> {
        phi_grid(self.n_phi)
    }

    /// `V(η) = ln(R_κ/(R_κ − εη))`, zero in classical mode.
    pub fn potential(&self, eta: f64) -> Result<f64> {
        if self.mode == Mode::Corrected && self.eps * eta >= self.r_kappa {
            return Err(Error::InvalidConfig(format!(
                "εη = {} reaches the radius of curvature {}",
                self.eps * eta,
                self.r_kappa
            )));
        }
        Ok(self.geometry().potential(eta))
    }

    /// `ζ = √(1 − (e^{−V(η)} cosφ)²)`.
    pub fn kinetic_distance(&self, eta: f64, phi: f64) -> f64 {
        self.geometry().zeta(eta, phi)
    }

    pub fn force(&self, eta: f64) -> f64 {
        self.geometry().force(eta)
    }

    pub fn trace(&self, eta: f64, phi: f64) -> CharacteristicTrace {
        CharacteristicTrace::new(&self.geometry(), eta, phi, 65)
    }
}

fn default_n_eta(length: f64) -> usize {
    ((16.0 * length).ceil() as usize + 1).max(33)
}

pub fn phi_grid(n: usize) -> Vec<f64> {
    let h = TAU / n as f64;
    (0..n).map(|j| -PI + (j as f64 + 0.5) * h).collect()
}

/// Geometry of one layer problem, shared by solvers and traces.
#[derive(Clone, Debug)]
pub struct LayerGeometry {
    pub eps: f64,
    pub r_kappa: f64,
    pub length: f64,
    pub mode: Mode,
    /// Attenuation rate `1 + λ`.
    pub rate: f64,
    pub res: Resolution,
}

impl LayerGeometry {
    /// `e^{−V(η)}`.
    #[inline]
    pub fn weight(&self, eta: f64) -> f64 {
        match self.mode {
            Mode::Corrected => 1.0 - self.eps * eta / self.r_kappa,
            Mode::Classical => 1.0,
        }
    }

    pub fn potential(&self, eta: f64) -> f64 {
        match self.mode {
            Mode::Corrected => -(-self.eps * eta / self.r_kappa).ln_1p(),
            Mode::Classical => 0.0,
        }
    }

    #[inline]
    pub fn force(&self, eta: f64) -> f64 {
        match self.mode {
            Mode::Corrected => -self.eps / (self.r_kappa - self.eps * eta),
            Mode::Classical => 0.0,
        }
    }

    #[inline]
    pub fn zeta(&self, eta: f64, phi: f64) -> f64 {
        let e = (self.weight(eta) * phi.cos()).abs();
        ((1.0 - e) * (1.0 + e)).max(0.0).sqrt()
    }

    /// Half-width of the Region III wedges at depth `η`: `arccos(e^{V(η) − V(L)})`.
    pub fn wedge(&self, eta: f64) -> f64 {
        match self.mode {
            Mode::Corrected => {
                let ratio = (self.weight(self.length) / self.weight(eta)).min(1.0);
                ratio.acos()
            }
            Mode::Classical => 0.0,
        }
    }
}

/// Per-solve bookkeeping.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SolveMeta {
    pub solver: String,
    pub iterations: usize,
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// The fixed point was finished by a direct solve after the iteration stalled.
    pub direct_fallback: bool,
    /// `P[f](0)` evaluated with the solver's own quadrature.
    pub normalization: Option<f64>,
    /// Incompatible part removed from the data, when projected.
    pub projection: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MilneField {
    pub eps: f64,
    pub tau: f64,
    pub r_kappa: f64,
    pub mode: Mode,
    pub length: f64,
    pub length_overridden: bool,
    pub eta: Vec<f64>,
    pub phi: Vec<f64>,
    /// Row-major values `f[i·n_phi + j] = f(η_i, φ_j)`.
    pub f: Vec<f64>,
    pub fbar: Vec<f64>,
    pub f_l: f64,
    /// Nodal values of the average used inside the characteristic solver.
    #[serde(default)]
    pub fbar_nodes: Vec<f64>,
    pub meta: SolveMeta,
}

impl MilneField {
    pub(crate) fn from_grid(
        cfg: &MilneConfig,
        eta: Vec<f64>,
        phi: Vec<f64>,
        f: Vec<f64>,
        meta: SolveMeta,
    ) -> Self {
        let n_phi = phi.len();
        let fbar = f
            .chunks(n_phi)
            .map(|row| row.iter().sum::<f64>() / n_phi as f64)
            .collect();
        let mut field = MilneField {
            eps: cfg.eps,
            tau: cfg.tau,
            r_kappa: cfg.r_kappa,
            mode: cfg.mode,
            length: cfg.length,
            length_overridden: cfg.length_overridden,
            eta,
            phi,
            f,
            fbar,
            f_l: 0.0,
            fbar_nodes: Vec::new(),
            meta,
        };
        field.f_l = limit_value(&field);
        field
    }

    pub fn n_eta(&self) -> usize {
        self.eta.len()
    }

    pub fn n_phi(&self) -> usize {
        self.phi.len()
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.f[i * self.phi.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.phi.len();
        &self.f[i * n..(i + 1) * n]
    }

    /// `max_φ |f(L, φ) − f(L, −φ)|` on the last row.
    pub fn reflection_residual(&self) -> f64 {
        let n = self.phi.len();
        let row = self.row(self.eta.len() - 1);
        (0..n)
            .map(|j| (row[j] - row[n - 1 - j]).abs())
            .fold(0.0, f64::max)
    }

    /// Linear in `η`, periodic cubic in `φ`.
    pub fn interpolate(&self, eta: f64, phi: f64) -> f64 {
        let n_eta = self.eta.len();
        let eta = eta.clamp(self.eta[0], self.eta[n_eta - 1]);
        let k = self.eta.partition_point(|&e| e <= eta).clamp(1, n_eta - 1);
        let t = (eta - self.eta[k - 1]) / (self.eta[k] - self.eta[k - 1]);
        let n = self.phi.len() as isize;
        let h = TAU / n as f64;
        let mut w = [0.0; 4];
        let base = crate::interp::periodic_stencil(self.phi[0], h, phi, &mut w);
        let mut out = 0.0;
        for (q, wq) in w.iter().enumerate() {
            let j = (base + q as isize).rem_euclid(n) as usize;
            out += wq * ((1.0 - t) * self.at(k - 1, j) + t * self.at(k, j));
        }
        out
    }
}

/// `f_L = ∫ sin²φ f(L, φ) dφ / π` on the last row.
pub fn limit_value(field: &MilneField) -> f64 {
    let n = field.phi.len();
    let h = TAU / n as f64;
    let row = field.row(field.eta.len() - 1);
    let num: f64 = field
        .phi
        .iter()
        .zip(row)
        .map(|(p, v)| p.sin().powi(2) * v)
        .sum::<f64>()
        * h;
    let den: f64 = field.phi.iter().map(|p| p.sin().powi(2)).sum::<f64>() * h;
    num / den
}

#[cfg(test)]
mod tests;
