//! Decay rates and weighted derivative norms of solved layer fields.

use super::{MilneConfig, MilneField, MilneOperator};
use crate::error::Result;
use crate::fit;
use crate::geometry::DomainSpec;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Decay {
    /// `f − f_L` is below the noise floor everywhere.
    Exact,
    Rate {
        k_est: f64,
        r_squared: f64,
    },
}

impl Decay {
    pub fn rate(&self) -> Option<f64> {
        match self {
            Decay::Exact => None,
            Decay::Rate { k_est, .. } => Some(*k_est),
        }
    }
}

/// Exponential rate of `sup_φ |f − f_L|` fitted on `η ∈ [L/10, L/2]`.
pub fn decay_rate(field: &MilneField) -> Decay {
    let scale = field.f.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let floor = 1e-12 * scale;
    let sup: Vec<f64> = (0..field.n_eta())
        .map(|i| {
            field
                .row(i)
                .iter()
                .map(|v| (v - field.f_l).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let len = field.length;
    let (xs, ys): (Vec<f64>, Vec<f64>) = field
        .eta
        .iter()
        .zip(&sup)
        .filter(|(e, v)| **e >= 0.1 * len - 1e-12 && **e <= 0.5 * len + 1e-12 && **v > floor)
        .map(|(e, v)| (*e, v.ln()))
        .unzip();
    if xs.len() < 3 {
        return Decay::Exact;
    }
    match fit::line(&xs, &ys) {
        Some(f) => Decay::Rate {
            k_est: -f.slope,
            r_squared: f.r_squared,
        },
        None => Decay::Exact,
    }
}

/// Weight exponent used for derivative norms: `min(K_est/2, 1/2)`.
pub fn default_k0(decay: &Decay) -> f64 {
    match decay.rate() {
        Some(k) if k > 0.0 => (0.5 * k).min(0.5),
        _ => 0.5,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub sup_weighted_eta: f64,
    pub sup_weighted_phi: f64,
    /// Filled by [`tangential_derivative`]; zero otherwise.
    pub sup_tangential: f64,
    pub sup_eta: f64,
    pub sup_phi: f64,
    pub k0_used: f64,
}

/// Centred differences of `v = f − f_L` over every grid row, one-sided at `η = 0` and `η = L`.
pub fn weighted_derivatives(cfg: &MilneConfig, field: &MilneField, k0: f64) -> DerivativeReport {
    let geo = cfg.geometry();
    let (n, m) = (field.n_eta(), field.n_phi());
    let d_phi = TAU / m as f64;
    let mut r = DerivativeReport {
        k0_used: k0,
        ..DerivativeReport::default()
    };
    for i in 0..n {
        let eta = field.eta[i];
        for j in 0..m {
            let de = d_eta(field, i, j);
            let dp = (field.at(i, (j + 1) % m) - field.at(i, (j + m - 1) % m)) / (2.0 * d_phi);
            let w = (k0 * eta).exp() * geo.zeta(eta, field.phi[j]);
            r.sup_eta = r.sup_eta.max(de.abs());
            r.sup_phi = r.sup_phi.max(dp.abs());
            r.sup_weighted_eta = r.sup_weighted_eta.max(w * de.abs());
            r.sup_weighted_phi = r.sup_weighted_phi.max(w * dp.abs());
        }
    }
    r
}

fn d_eta(field: &MilneField, i: usize, j: usize) -> f64 {
    let n = field.n_eta();
    let e = &field.eta;
    let v = |k: usize| field.at(k, j);
    if i == 0 {
        let h = e[1] - e[0];
        (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h)
    } else if i + 1 == n {
        let h = e[n - 1] - e[n - 2];
        (3.0 * v(n - 1) - 4.0 * v(n - 2) + v(n - 3)) / (2.0 * h)
    } else {
        (v(i + 1) - v(i - 1)) / (e[i + 1] - e[i - 1])
    }
}

/// Centred `φ` differences of `f` on the grid.
fn phi_derivative(field: &MilneField) -> Vec<f64> {
    let (n, m) = (field.n_eta(), field.n_phi());
    let d_phi = TAU / m as f64;
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            out[i * m + j] =
                (field.at(i, (j + 1) % m) - field.at(i, (j + m - 1) % m)) / (2.0 * d_phi);
        }
    }
    out
}

/// A `τ`-dependent data family for the tangential derivative.
pub struct TangentialFamily<'a> {
    /// `h(τ, φ)`.
    pub h: &'a (dyn Fn(f64, f64) -> f64 + Sync),
    /// `S(τ, η, φ)`.
    pub s: Option<&'a (dyn Fn(f64, f64, f64) -> f64 + Sync)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentialReport {
    /// `sup e^{K₀η}|∂τ v|` from the centred difference of two solves.
    pub sup_difference_path: f64,
    /// Same from the direct solve of the differentiated equation.
    pub sup_direct_path: f64,
    /// `sup e^{K₀η}|w_fd − w_direct|`.
    pub sup_discrepancy: f64,
    pub k0_used: f64,
    pub dtau: f64,
    pub r_kappa: f64,
    pub r_kappa_prime: f64,
}

pub fn config_at(base: &MilneConfig, domain: &DomainSpec, tau: f64) -> MilneConfig {
    let theta = domain.theta_of_tau(tau);
    let mut cfg = base.clone();
    cfg.tau = tau;
    cfg.r_kappa = domain.frame(theta).r_kappa;
    cfg.r_kappa_prime = domain.r_kappa_prime(theta);
    let want = curvature_refinement(cfg.eps, cfg.length, domain.validity_radius());
    let have = cfg.resolution.curvature_refine.max(1);
    if want != have && (cfg.n_eta - 1) % have == 0 && cfg.resolution.wedge_panels % have == 0 {
        cfg.n_eta = (cfg.n_eta - 1) / have * want + 1;
        cfg.resolution.wedge_panels = cfg.resolution.wedge_panels / have * want;
        cfg.resolution.curvature_refine = want;
    }
    cfg
}

/// Grid factor for strongly curved layers, `εL > R_min/3`.
///
/// The wall element and the grazing wedge carry most of the discretization
/// error once the force is no longer small against the collision rate. The
/// factor depends on the domain and not on `τ`, so neighbouring boundary
/// points share one grid.
pub fn curvature_refinement(eps: f64, length: f64, r_min: f64) -> usize {
    if 3.0 * eps * length > r_min {
        2
    } else {
        1
    }
}

/// Both routes to `∂v/∂τ` on the grid of `cfg`.
struct TangentialFields {
    center: MilneField,
    difference: Vec<f64>,
    direct: Vec<f64>,
    r_kappa: f64,
    r_kappa_prime: f64,
}

fn tangential_fields(
    cfg: &MilneConfig,
    domain: &DomainSpec,
    family: &TangentialFamily,
    dtau: f64,
) -> Result<TangentialFields> {
    let tau = cfg.tau;
    let solve = |t: f64| -> Result<MilneField> {
        let c = config_at(cfg, domain, t);
        let op = MilneOperator::new(&c)?;
        let h = |p: f64| (family.h)(t, p);
        let s = family.s.map(|s| move |e: f64, p: f64| s(t, e, p));
        match &s {
            Some(s) => op.solve_inflow(&h, Some(s)),
            None => op.solve_inflow(&h, None),
        }
    };
    let plus = solve(tau + 0.5 * dtau)?;
    let minus = solve(tau - 0.5 * dtau)?;
    let center_cfg = config_at(cfg, domain, tau);
    let op = MilneOperator::new(&center_cfg)?;
    let h0 = |p: f64| (family.h)(tau, p);
    let s0 = family.s.map(|s| move |e: f64, p: f64| s(tau, e, p));
    let center = match &s0 {
        Some(s) => op.solve_inflow(&h0, Some(s))?,
        None => op.solve_inflow(&h0, None)?,
    };

    let geo = center_cfg.geometry();
    let rk = center_cfg.r_kappa;
    let rkp = center_cfg.r_kappa_prime;
    let mut dphi_field = center.clone();
    dphi_field.f = phi_derivative(&center);
    let delta = 1e-4;
    let dh = |p: f64| ((family.h)(tau + delta, p) - (family.h)(tau - delta, p)) / (2.0 * delta);
    let source = |e: f64, p: f64| {
        let mut v =
            rkp / (rk - geo.eps * e) * geo.force(e) * p.cos() * dphi_field.interpolate(e, p);
        if let Some(s) = family.s {
            v += (s(tau + delta, e, p) - s(tau - delta, e, p)) / (2.0 * delta);
        }
        v
    };
    let direct = op.solve_inflow(&dh, Some(&source))?;
    let difference = plus
        .f
        .iter()
        .zip(&minus.f)
        .map(|(a, b)| ((a - plus.f_l) - (b - minus.f_l)) / dtau)
        .collect();
    let direct = direct.f.iter().map(|v| v - direct.f_l).collect();
    Ok(TangentialFields {
        center,
        difference,
        direct,
        r_kappa: rk,
        r_kappa_prime: rkp,
    })
}

/// `∂v/∂τ` at `cfg.tau` by two independent routes.
///
/// The difference path solves at `τ ± dτ/2`. The direct path solves the
/// differentiated problem, whose source is `∂τS + R′_κ/(R_κ − εη)·F cosφ ∂φv`
/// and whose wall data is `∂τh`, then subtracts its own limit value.
pub fn tangential_derivative(
    cfg: &MilneConfig,
    domain: &DomainSpec,
    family: &TangentialFamily,
    dtau: f64,
    k0: f64,
) -> Result<TangentialReport> {
    let t = tangential_fields(cfg, domain, family, dtau)?;
    let m = t.center.n_phi();
    let mut report = TangentialReport {
        sup_difference_path: 0.0,
        sup_direct_path: 0.0,
        sup_discrepancy: 0.0,
        k0_used: k0,
        dtau,
        r_kappa: t.r_kappa,
        r_kappa_prime: t.r_kappa_prime,
    };
    for (idx, (fd, dv)) in t.difference.iter().zip(&t.direct).enumerate() {
        let w = (k0 * t.center.eta[idx / m]).exp();
        report.sup_difference_path = report.sup_difference_path.max(w * fd.abs());
        report.sup_direct_path = report.sup_direct_path.max(w * dv.abs());
        report.sup_discrepancy = report.sup_discrepancy.max(w * (fd - dv).abs());
    }
    Ok(report)
}

/// Agreement of the two tangential routes against their own error estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentialAgreement {
    /// `sup e^{K₀η}|w_fd − w_direct|` on the base grid.
    pub discrepancy: f64,
    /// Richardson estimate of the `dτ` truncation, from `dτ` and `dτ/2`.
    pub tol_difference: f64,
    /// Twice the change of the direct route on a grid refined by 2 in `η`
    /// and 3 in `φ` (nested nodes), a first-order error estimate.
    pub tol_direct: f64,
    /// Ten times the solver tolerance.
    pub tol_solver: f64,
    pub combined: f64,
    pub agree: bool,
    pub k0_used: f64,
}

pub fn tangential_agreement(
    cfg: &MilneConfig,
    domain: &DomainSpec,
    family: &TangentialFamily,
    dtau: f64,
    k0: f64,
) -> Result<TangentialAgreement> {
    let base = tangential_fields(cfg, domain, family, dtau)?;
    let half = tangential_fields(cfg, domain, family, 0.5 * dtau)?;
    let mut fine_cfg = cfg.clone();
    fine_cfg.n_eta = 2 * (cfg.n_eta - 1) + 1;
    fine_cfg.n_phi = 3 * cfg.n_phi;
    let fine = tangential_fields(&fine_cfg, domain, family, dtau)?;
    let (m, mf) = (cfg.n_phi, fine_cfg.n_phi);
    let mut a = TangentialAgreement {
        discrepancy: 0.0,
        tol_difference: 0.0,
        tol_direct: 0.0,
        tol_solver: 10.0 * cfg.tol,
        combined: 0.0,
        agree: false,
        k0_used: k0,
    };
    for (i, eta) in base.center.eta.iter().enumerate() {
        let w = (k0 * eta).exp();
        for j in 0..m {
            let (idx, fine_idx) = (i * m + j, 2 * i * mf + 3 * j + 1);
            let (fd, dv) = (base.difference[idx], base.direct[idx]);
            a.discrepancy = a.discrepancy.max(w * (fd - dv).abs());
            a.tol_difference = a
                .tol_difference
                .max(w * (fd - half.difference[idx]).abs() * 4.0 / 3.0);
            a.tol_direct = a
                .tol_direct
                .max(2.0 * w * (dv - fine.direct[fine_idx]).abs());
        }
    }
    a.combined = a.tol_difference + a.tol_direct + a.tol_solver;
    a.agree = a.discrepancy <= a.combined;
    Ok(a)
}
