//! Corrected against classical (`F ≡ 0`) layer solves on identical data.

use super::emit::{num, Artifact, Table};
use super::ExperimentConfig;
use crate::data::{BoundarySource, Inflow};
use crate::elliptic::solve_neumann;
use crate::error::Result;
use crate::expansion::layer_bc;
use crate::milne::{
    decay_rate, default_k0, weighted_derivatives, Decay, MilneField, MilneOperator, Mode,
};
use crate::par::Exec;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeDiagnostics {
    pub f_l: f64,
    pub decay: Decay,
    pub sup_eta: f64,
    pub sup_phi: f64,
    pub sup_weighted_eta: f64,
    pub sup_weighted_phi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalRow {
    pub eps: f64,
    pub corrected: ModeDiagnostics,
    pub classical: ModeDiagnostics,
    /// `|f_L − f_L^classical| / √ε`.
    pub f_l_gap_scaled: f64,
    /// `max|F|` over the corrected grid.
    pub force_max: f64,
    /// `ε/(R_min − √ε)`.
    pub force_bound: f64,
    /// Both fields vanish identically.
    pub both_zero: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassicalReport {
    pub tau: f64,
    pub rows: Vec<ClassicalRow>,
}

fn diagnostics(cfg: &crate::milne::MilneConfig, f: &MilneField) -> ModeDiagnostics {
    let decay = decay_rate(f);
    let k0 = default_k0(&decay);
    let d = weighted_derivatives(cfg, f, k0);
    ModeDiagnostics {
        f_l: f.f_l,
        decay,
        sup_eta: d.sup_eta,
        sup_phi: d.sup_phi,
        sup_weighted_eta: d.sup_weighted_eta,
        sup_weighted_phi: d.sup_weighted_phi,
    }
}

/// Both modes with in-flow data `cfg.inflow` at `cfg.milne.tau`, for every `ε`.
pub fn run_classical_comparison(cfg: &ExperimentConfig) -> Result<ClassicalReport> {
    let inflow = Inflow::new(cfg.inflow.clone())?;
    let tau = cfg.milne.tau;
    let r_min = cfg.domain.validity_radius();
    let rows = Exec::default().map(cfg.eps_list.len(), |k| -> Result<ClassicalRow> {
        let eps = cfg.eps_list[k];
        let solve = |mode| -> Result<(ModeDiagnostics, MilneField, crate::milne::MilneConfig)> {
            let mc = cfg.milne_config(eps, tau, mode);
            let f = MilneOperator::new(&mc)?.solve_inflow(&|p| inflow.value(p), None)?;
            Ok((diagnostics(&mc, &f), f, mc))
        };
        let (corrected, fc, mc) = solve(Mode::Corrected)?;
        let (classical, fk, _) = solve(Mode::Classical)?;
        let geo = mc.geometry();
        let force_max = fc
            .eta
            .iter()
            .map(|e| geo.force(*e).abs())
            .fold(0.0, f64::max);
        Ok(ClassicalRow {
            eps,
            f_l_gap_scaled: (corrected.f_l - classical.f_l).abs() / eps.sqrt(),
            force_max,
            force_bound: eps / (r_min - eps.sqrt()),
            both_zero: fc.f.iter().chain(&fk.f).all(|v| *v == 0.0),
            corrected,
            classical,
        })
    });
    Ok(ClassicalReport {
        tau,
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}

/// `φ`-refinement contrast at one `(ε, τ)` with layer data from `cfg.g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContrastReport {
    pub eps: f64,
    pub tau: f64,
    pub n_phi: Vec<usize>,
    /// Unweighted `sup|∂φf|` of the classical solves.
    pub classical_sup_phi: Vec<f64>,
    pub classical_sup_eta: Vec<f64>,
    /// `sup e^{K₀η}ζ|∂φf|` of the corrected solves.
    pub corrected_weighted_phi: Vec<f64>,
    pub corrected_weighted_eta: Vec<f64>,
    /// Finest over coarsest classical sup.
    pub classical_growth: f64,
    /// Largest over smallest corrected weighted sup.
    pub corrected_change: f64,
}

pub fn refinement_contrast(cfg: &ExperimentConfig) -> Result<ContrastReport> {
    let eps = cfg.eps_list[0];
    let tau = cfg.milne.tau;
    let g = BoundarySource::new(cfg.g.clone(), &cfg.domain)?;
    let interior = solve_neumann(&cfg.domain, &|t| 0.5 * g.profile(t))?;
    let bc = layer_bc(&cfg.domain, &interior, &g, tau);
    let grids = cfg.regularity.contrast_n_phi.clone();
    let runs = Exec::default().map(2 * grids.len(), |k| -> Result<(f64, f64)> {
        let mode = if k % 2 == 0 {
            Mode::Classical
        } else {
            Mode::Corrected
        };
        let mut mc = cfg.milne_config(eps, tau, mode);
        mc.n_phi = grids[k / 2];
        let f = MilneOperator::new(&mc)?.solve_inflow(&|p| bc.value(p), None)?;
        let d = weighted_derivatives(&mc, &f, default_k0(&decay_rate(&f)));
        Ok(match mode {
            Mode::Classical => (d.sup_phi, d.sup_eta),
            Mode::Corrected => (d.sup_weighted_phi, d.sup_weighted_eta),
        })
    });
    let runs: Vec<(f64, f64)> = runs.into_iter().collect::<Result<_>>()?;
    let pick = |m: usize, second: bool| -> Vec<f64> {
        runs.iter()
            .skip(m)
            .step_by(2)
            .map(|r| if second { r.1 } else { r.0 })
            .collect()
    };
    let classical_sup_phi = pick(0, false);
    let corrected_weighted_phi = pick(1, false);
    let lo = corrected_weighted_phi
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let hi = corrected_weighted_phi.iter().cloned().fold(0.0, f64::max);
    Ok(ContrastReport {
        eps,
        tau,
        classical_growth: classical_sup_phi[classical_sup_phi.len() - 1] / classical_sup_phi[0],
        corrected_change: hi / lo,
        n_phi: grids,
        classical_sup_eta: pick(0, true),
        corrected_weighted_eta: pick(1, true),
        classical_sup_phi,
        corrected_weighted_phi,
    })
}

impl Artifact for ClassicalReport {
    fn tables(&self) -> Vec<Table> {
        let mut t = Table::new(
            "classical",
            &[
                "eps",
                "f_l_corrected",
                "f_l_classical",
                "f_l_gap_scaled",
                "k_est_corrected",
                "k_est_classical",
                "sup_phi_corrected",
                "sup_phi_classical",
                "sup_weighted_phi_corrected",
                "sup_weighted_phi_classical",
                "sup_eta_corrected",
                "sup_eta_classical",
                "force_max",
                "force_bound",
            ],
        );
        let k = |d: &Decay| d.rate().map(num).unwrap_or_default();
        for r in &self.rows {
            let (a, b) = (&r.corrected, &r.classical);
            t.push(vec![
                num(r.eps),
                num(a.f_l),
                num(b.f_l),
                num(r.f_l_gap_scaled),
                k(&a.decay),
                k(&b.decay),
                num(a.sup_phi),
                num(b.sup_phi),
                num(a.sup_weighted_phi),
                num(b.sup_weighted_phi),
                num(a.sup_eta),
                num(b.sup_eta),
                num(r.force_max),
                num(r.force_bound),
            ]);
        }
        vec![t]
    }

    fn report_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or_default()
    }
}

impl Artifact for ContrastReport {
    fn tables(&self) -> Vec<Table> {
        let mut t = Table::new(
            "contrast",
            &[
                "n_phi",
                "classical_sup_phi",
                "classical_sup_eta",
                "corrected_weighted_phi",
                "corrected_weighted_eta",
            ],
        );
        for (k, n) in self.n_phi.iter().enumerate() {
            t.push(vec![
                n.to_string(),
                num(self.classical_sup_phi[k]),
                num(self.classical_sup_eta[k]),
                num(self.corrected_weighted_phi[k]),
                num(self.corrected_weighted_eta[k]),
            ]);
        }
        vec![t]
    }

    fn report_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::InflowSpec;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            eps_list: vec![0.2, 0.1],
            ..ExperimentConfig::default()
        };
        cfg.milne.n_phi = 32;
        cfg
    }

    #[test]
    fn zero_data_gives_zero_in_both_modes() {
        let cfg = ExperimentConfig {
            inflow: InflowSpec::Constant { value: 0.0 },
            ..small()
        };
        let r = run_classical_comparison(&cfg).unwrap();
        for row in &r.rows {
            assert!(row.both_zero);
            assert_eq!(row.corrected.f_l, 0.0);
            assert_eq!(row.classical.f_l, 0.0);
        }
    }

    #[test]
    fn force_stays_below_its_bound_and_limits_are_close() {
        let cfg = ExperimentConfig {
            inflow: InflowSpec::Fourier {
                c0: 0.0,
                cos: vec![0.0, 1.0],
                sin: vec![1.0],
            },
            ..small()
        };
        let r = run_classical_comparison(&cfg).unwrap();
        for row in &r.rows {
            // attained at η = L on the unit disk
            assert!(row.force_max <= row.force_bound * (1.0 + 1e-12), "{row:?}");
            assert!(row.f_l_gap_scaled < 1.0, "{row:?}");
            assert!(row.f_l_gap_scaled > 0.0);
        }
    }
}
