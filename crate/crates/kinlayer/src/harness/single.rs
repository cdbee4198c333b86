//! Single layer and transport solves, and the layer sweep over `ε`.

use super::emit::{num, Artifact, Table};
use super::ExperimentConfig;
use crate::data::Inflow;
use crate::error::{Error, Result};
use crate::milne::{
    decay_rate, default_k0, weighted_derivatives, write_field_csv, write_summary_json, MilneField,
    MilneOperator, MilneSummary,
};
use crate::par::Exec;
use crate::transport::{self, energy_identity_defect, TransportField, TransportSummary};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub struct SingleMilne {
    pub field: MilneField,
    pub summary: MilneSummary,
}

fn solve_layer(cfg: &ExperimentConfig, eps: f64) -> Result<(MilneField, MilneSummary)> {
    let inflow = Inflow::new(cfg.inflow.clone())?;
    let mc = cfg.milne_config(eps, cfg.milne.tau, cfg.milne.mode);
    let field = MilneOperator::new(&mc)?.solve_inflow(&|p| inflow.value(p), None)?;
    let decay = decay_rate(&field);
    let d = weighted_derivatives(&mc, &field, default_k0(&decay));
    let summary = MilneSummary::new(&field, decay, d);
    Ok((field, summary))
}

/// Layer solve with `cfg.inflow` at the first `ε` and `cfg.milne.tau`.
pub fn run_milne_single(cfg: &ExperimentConfig) -> Result<SingleMilne> {
    let (field, summary) = solve_layer(cfg, cfg.eps_list[0])?;
    Ok(SingleMilne { field, summary })
}

impl SingleMilne {
    /// `field.csv` and `summary.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_field_csv(&self.field, &dir.join("field.csv"))?;
        write_summary_json(&self.summary, &dir.join("summary.json"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MilneSweepRow {
    pub eps: f64,
    pub length: f64,
    pub n_eta: usize,
    pub f_l: f64,
    pub k_est: Option<f64>,
    pub r_squared: Option<f64>,
    pub sup_weighted_eta: f64,
    pub sup_weighted_phi: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MilneSweepReport {
    pub rows: Vec<MilneSweepRow>,
}

pub fn run_milne_sweep(cfg: &ExperimentConfig) -> Result<MilneSweepReport> {
    let rows = Exec::default().map(cfg.eps_list.len(), |k| -> Result<MilneSweepRow> {
        let (f, s) = solve_layer(cfg, cfg.eps_list[k])?;
        let (k_est, r_squared) = match s.decay {
            crate::milne::Decay::Rate { k_est, r_squared } => (Some(k_est), Some(r_squared)),
            crate::milne::Decay::Exact => (None, None),
        };
        Ok(MilneSweepRow {
            eps: s.eps,
            length: s.length,
            n_eta: s.n_eta,
            f_l: f.f_l,
            k_est,
            r_squared,
            sup_weighted_eta: s.derivatives.sup_weighted_eta,
            sup_weighted_phi: s.derivatives.sup_weighted_phi,
            iterations: s.iterations,
        })
    });
    Ok(MilneSweepReport {
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}

impl Artifact for MilneSweepReport {
    fn tables(&self) -> Vec<Table> {
        let mut t = Table::new(
            "milne_sweep",
            &[
                "eps",
                "length",
                "n_eta",
                "f_l",
                "k_est",
                "r_squared",
                "sup_weighted_eta",
                "sup_weighted_phi",
                "iterations",
            ],
        );
        for r in &self.rows {
            t.push(vec![
                num(r.eps),
                num(r.length),
                r.n_eta.to_string(),
                num(r.f_l),
                r.k_est.map(num).unwrap_or_default(),
                r.r_squared.map(num).unwrap_or_default(),
                num(r.sup_weighted_eta),
                num(r.sup_weighted_phi),
                r.iterations.to_string(),
            ]);
        }
        vec![t]
    }

    fn report_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or_default()
    }
}

pub struct SingleTransport {
    pub field: TransportField,
    pub summary: TransportSummary,
}

/// Transport solve with `cfg.g` at the first `ε`.
pub fn run_transport_single(cfg: &ExperimentConfig) -> Result<SingleTransport> {
    let eps = cfg.eps_list[0];
    let field = transport::solve(&cfg.transport_config(eps))?;
    if !field.converged {
        return Err(Error::NonConvergence {
            what: format!("transport at ε = {eps}"),
            iterations: field.iterations,
            residual: field.residuals.last().copied().unwrap_or(f64::NAN),
        });
    }
    let summary = field.summary(Some(energy_identity_defect(&field, None)));
    Ok(SingleTransport { field, summary })
}

impl SingleTransport {
    /// `field.csv` and `summary.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.field.write_csv(&dir.join("field.csv"))?;
        std::fs::write(
            dir.join("summary.json"),
            serde_json::to_string_pretty(&self.summary)?,
        )?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::InflowSpec;

    #[test]
    fn constant_inflow_is_reproduced() {
        let mut cfg = ExperimentConfig {
            inflow: InflowSpec::Constant { value: 2.5 },
            eps_list: vec![0.1],
            ..ExperimentConfig::default()
        };
        cfg.milne.n_phi = 32;
        let s = run_milne_single(&cfg).unwrap();
        assert!(s.field.f.iter().all(|v| (v - 2.5).abs() < 1e-9));
        let dir = tempfile::tempdir().unwrap();
        s.write(dir.path()).unwrap();
        assert!(dir.path().join("field.csv").exists());
        cfg.eps_list = vec![0.2, 0.1];
        let sweep = run_milne_sweep(&cfg).unwrap();
        assert_eq!(sweep.rows.len(), 2);
        assert!(sweep.rows.iter().all(|r| (r.f_l - 2.5).abs() < 1e-9));
    }

    #[test]
    fn transport_single_reports_a_summary() {
        let mut cfg = ExperimentConfig {
            eps_list: vec![0.2],
            ..ExperimentConfig::default()
        };
        cfg.transport.n_r = 8;
        cfg.transport.n_theta = 16;
        cfg.transport.n_dir = 16;
        let s = run_transport_single(&cfg).unwrap();
        assert!(s.summary.converged);
        assert!(s.summary.mass_defect.abs() < 1e-9 * std::f64::consts::PI);
        cfg.transport.max_iter = 1;
        assert_eq!(
            run_transport_single(&cfg).err().map(|e| e.exit_code()),
            Some(2)
        );
    }
}
