use super::{Decay, DerivativeReport, MilneField};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MilneSummary {
    pub eps: f64,
    pub tau: f64,
    pub r_kappa: f64,
    pub mode: super::Mode,
    pub length: f64,
    pub length_overridden: bool,
    pub n_eta: usize,
    pub n_phi: usize,
    pub f_l: f64,
    pub decay: Decay,
    pub derivatives: DerivativeReport,
    pub iterations: usize,
    pub residuals: Vec<f64>,
    pub normalization: Option<f64>,
    pub reflection_residual: f64,
}

impl MilneSummary {
    pub fn new(field: &MilneField, decay: Decay, derivatives: DerivativeReport) -> Self {
        MilneSummary {
            eps: field.eps,
            tau: field.tau,
            r_kappa: field.r_kappa,
            mode: field.mode,
            length: field.length,
            length_overridden: field.length_overridden,
            n_eta: field.n_eta(),
            n_phi: field.n_phi(),
            f_l: field.f_l,
            decay,
            derivatives,
            iterations: field.meta.iterations,
            residuals: field.meta.residuals.clone(),
            normalization: field.meta.normalization,
            reflection_residual: field.reflection_residual(),
        }
    }
}

/// Long-format CSV with columns `eta,phi,f`.
pub fn write_field_csv(field: &MilneField, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["eta", "phi", "f"])?;
    for (i, e) in field.eta.iter().enumerate() {
        for (j, p) in field.phi.iter().enumerate() {
            w.write_record(&[
                format!("{e:.17e}"),
                format!("{p:.17e}"),
                format!("{:.17e}", field.at(i, j)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_json(summary: &MilneSummary, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(summary)?)?;
    Ok(())
}

/// Reads a tabulated angular profile with columns `phi,h`; rows must be sorted by angle.
pub fn read_profile_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let get = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::InvalidConfig(format!("bad profile row {rec:?}")))
        };
        out.push((get(0)?, get(1)?));
    }
    if out.len() < 2 || out.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidConfig(
            "profile needs at least two rows sorted by angle".into(),
        ));
    }
    Ok(out)
}
