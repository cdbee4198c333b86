//! Weighted derivative sups of the first-order layer over `ε` and boundary samples.

use super::emit::{num, Artifact, LogLogPlot, Table};
use super::ExperimentConfig;
use crate::data::BoundarySource;
use crate::elliptic::{solve_neumann, HarmonicSolution};
use crate::error::Result;
use crate::expansion::layer_bc;
use crate::fit::{self, LineFit};
use crate::milne::{
    decay_rate, default_k0, tangential_derivative, weighted_derivatives, Decay, MilneOperator,
    Mode, TangentialFamily,
};
use crate::par::Exec;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Largest values over the boundary samples at one `ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityRow {
    pub eps: f64,
    pub samples: usize,
    pub sup_weighted_eta: f64,
    pub sup_weighted_phi: f64,
    /// `sup e^{K₀η}|∂τ(f − f_L)|` for layer data that follows `τ`.
    pub sup_tangential: f64,
    /// The same with the data frozen at the sample point, so only the
    /// geometry varies with `τ`.
    pub sup_tangential_frozen: f64,
    /// Smallest fitted decay rate; `None` if some sample had no measurable decay.
    pub k_est_min: Option<f64>,
    pub r_squared_min: Option<f64>,
    pub k0_min: f64,
    /// `max|P[f](0)|` of the diffusive solves.
    pub normalization_max: f64,
}

/// Fit of `sup ≈ c·|ln ε|^p` for one quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dominance {
    pub quantity: String,
    /// Smallest `c` with `sup ≤ c|ln ε|⁸` on every row.
    pub c: f64,
    /// Fitted power `p`; `None` when the values are not all positive.
    pub power: Option<LineFit>,
    /// All values finite and the fitted power at most 8.
    pub dominated: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub taus: Vec<f64>,
    pub rows: Vec<RegularityRow>,
    pub dominance: Vec<Dominance>,
}

/// Boundary samples: `n` uniform angles plus `extra` seeded random ones.
pub fn sample_taus(n: usize, extra: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t: Vec<f64> = (0..n).map(|k| TAU * (k as f64 + 0.25) / n as f64).collect();
    t.extend((0..extra).map(|_| rng.random_range(0.0..TAU)));
    t
}

struct Sample {
    weighted_eta: f64,
    weighted_phi: f64,
    tangential: f64,
    frozen: f64,
    decay: Decay,
    k0: f64,
    normalization: f64,
}

fn sample(
    cfg: &ExperimentConfig,
    interior: &HarmonicSolution,
    g: &BoundarySource,
    eps: f64,
    tau: f64,
) -> Result<Sample> {
    let mc = cfg.milne_config(eps, tau, Mode::Corrected);
    let bc = layer_bc(&cfg.domain, interior, g, tau);
    let field = MilneOperator::new(&mc)?.solve_diffusive(&|p| bc.value(p), None)?;
    let decay = decay_rate(&field);
    let k0 = default_k0(&decay);
    let d = weighted_derivatives(&mc, &field, k0);
    let dtau = cfg.regularity.dtau;
    let moving = |t: f64, p: f64| layer_bc(&cfg.domain, interior, g, t).value(p);
    let frozen = |_: f64, p: f64| bc.value(p);
    let tangential = tangential_derivative(
        &mc,
        &cfg.domain,
        &TangentialFamily {
            h: &moving,
            s: None,
        },
        dtau,
        k0,
    )?;
    let frozen = tangential_derivative(
        &mc,
        &cfg.domain,
        &TangentialFamily {
            h: &frozen,
            s: None,
        },
        dtau,
        k0,
    )?;
    Ok(Sample {
        weighted_eta: d.sup_weighted_eta,
        weighted_phi: d.sup_weighted_phi,
        tangential: tangential.sup_difference_path,
        frozen: frozen.sup_difference_path,
        decay,
        k0,
        normalization: field.meta.normalization.unwrap_or(0.0).abs(),
    })
}

/// Layer data `g₁` from the interior term of `cfg.g`, solved in corrected mode
/// at every `(ε, τ)` sample.
pub fn run_regularity_study(cfg: &ExperimentConfig) -> Result<RegularityReport> {
    let g = BoundarySource::new(cfg.g.clone(), &cfg.domain)?;
    let interior = solve_neumann(&cfg.domain, &|t| 0.5 * g.profile(t))?;
    let r = &cfg.regularity;
    let taus = sample_taus(r.n_tau, r.random_taus, cfg.seed);
    let nt = taus.len();
    let results = Exec::default().map(cfg.eps_list.len() * nt, |k| {
        sample(cfg, &interior, &g, cfg.eps_list[k / nt], taus[k % nt])
    });
    let mut rows = Vec::new();
    let mut it = results.into_iter();
    for &eps in &cfg.eps_list {
        let s: Vec<Sample> = it.by_ref().take(nt).collect::<Result<_>>()?;
        let max = |f: fn(&Sample) -> f64| s.iter().map(f).fold(0.0, f64::max);
        let rates: Option<Vec<(f64, f64)>> = s
            .iter()
            .map(|x| match x.decay {
                Decay::Rate { k_est, r_squared } => Some((k_est, r_squared)),
                Decay::Exact => None,
            })
            .collect();
        rows.push(RegularityRow {
            eps,
            samples: nt,
            sup_weighted_eta: max(|x| x.weighted_eta),
            sup_weighted_phi: max(|x| x.weighted_phi),
            sup_tangential: max(|x| x.tangential),
            sup_tangential_frozen: max(|x| x.frozen),
            k_est_min: rates
                .as_ref()
                .map(|v| v.iter().map(|r| r.0).fold(f64::INFINITY, f64::min)),
            r_squared_min: rates.map(|v| v.iter().map(|r| r.1).fold(f64::INFINITY, f64::min)),
            k0_min: s.iter().map(|x| x.k0).fold(f64::INFINITY, f64::min),
            normalization_max: max(|x| x.normalization),
        });
    }
    let dominance = vec![
        dominance("weighted_eta", &rows, |r| r.sup_weighted_eta),
        dominance("weighted_phi", &rows, |r| r.sup_weighted_phi),
        dominance("tangential", &rows, |r| r.sup_tangential),
    ];
    Ok(RegularityReport {
        taus,
        rows,
        dominance,
    })
}

pub fn dominance(name: &str, rows: &[RegularityRow], f: fn(&RegularityRow) -> f64) -> Dominance {
    let logs: Vec<f64> = rows.iter().map(|r| r.eps.ln().abs()).collect();
    let vals: Vec<f64> = rows.iter().map(f).collect();
    let c = vals
        .iter()
        .zip(&logs)
        .map(|(v, l)| v / l.powi(8))
        .fold(0.0, f64::max);
    let power = fit::log_log(&logs, &vals);
    let finite = vals.iter().all(|v| v.is_finite());
    Dominance {
        quantity: name.into(),
        c,
        dominated: finite && power.as_ref().map_or(true, |p| p.slope <= 8.0),
        power,
    }
}

impl Artifact for RegularityReport {
    fn tables(&self) -> Vec<Table> {
        let mut t = Table::new(
            "regularity",
            &[
                "eps",
                "sup_weighted_eta",
                "sup_weighted_phi",
                "sup_tangential",
                "sup_tangential_frozen",
                "k_est_min",
                "r_squared_min",
                "k0_min",
                "normalization_max",
            ],
        );
        for r in &self.rows {
            t.push(vec![
                num(r.eps),
                num(r.sup_weighted_eta),
                num(r.sup_weighted_phi),
                num(r.sup_tangential),
                num(r.sup_tangential_frozen),
                r.k_est_min.map(num).unwrap_or_default(),
                r.r_squared_min.map(num).unwrap_or_default(),
                num(r.k0_min),
                num(r.normalization_max),
            ]);
        }
        vec![t]
    }

    fn plots(&self) -> Vec<LogLogPlot> {
        self.dominance
            .iter()
            .zip([
                (|r: &RegularityRow| r.sup_weighted_eta) as fn(&RegularityRow) -> f64,
                |r| r.sup_weighted_phi,
                |r| r.sup_tangential,
            ])
            .map(|(d, f)| LogLogPlot {
                name: format!("regularity_{}", d.quantity),
                x_label: "|ln ε|".into(),
                y_label: d.quantity.clone(),
                points: self.rows.iter().map(|r| (r.eps.ln().abs(), f(r))).collect(),
                fit: d.power.clone(),
            })
            .collect()
    }

    fn report_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;

    #[test]
    fn samples_are_seeded() {
        let a = sample_taus(4, 3, 11);
        assert_eq!(a, sample_taus(4, 3, 11));
        assert_ne!(a, sample_taus(4, 3, 12));
        assert_eq!(a.len(), 7);
        assert!(a.iter().all(|t| (0.0..TAU).contains(t)));
    }

    #[test]
    fn circle_with_frozen_data_has_no_tangential_derivative() {
        let mut cfg = ExperimentConfig {
            domain: DomainSpec::circle(1.0).unwrap(),
            eps_list: vec![0.2, 0.1],
            ..ExperimentConfig::default()
        };
        cfg.regularity.n_tau = 2;
        cfg.milne.n_phi = 32;
        let r = run_regularity_study(&cfg).unwrap();
        for row in &r.rows {
            assert!(row.sup_tangential_frozen <= 10.0 * cfg.milne.tol, "{row:?}");
            assert!(row.sup_tangential > 0.0);
            assert!(row.k_est_min.unwrap() > 0.0);
            assert!(row.normalization_max < 100.0 * cfg.milne.tol);
        }
        assert!(r.dominance.iter().all(|d| d.c.is_finite()));
    }

    #[test]
    fn dominance_flags_fast_growth() {
        let row = |eps: f64, v: f64| RegularityRow {
            eps,
            samples: 1,
            sup_weighted_eta: v,
            sup_weighted_phi: v,
            sup_tangential: v,
            sup_tangential_frozen: 0.0,
            k_est_min: None,
            r_squared_min: None,
            k0_min: 0.5,
            normalization_max: 0.0,
        };
        let mild: Vec<_> = [0.1, 0.01, 0.001]
            .iter()
            .map(|e| row(*e, e.ln().abs().powi(2)))
            .collect();
        let d = dominance("x", &mild, |r| r.sup_weighted_eta);
        assert!(d.dominated);
        assert!((d.power.unwrap().slope - 2.0).abs() < 1e-9);
        let steep: Vec<_> = [0.1, 0.01, 0.001]
            .iter()
            .map(|e| row(*e, e.ln().abs().powi(9)))
            .collect();
        assert!(!dominance("x", &steep, |r| r.sup_weighted_eta).dominated);
    }
}
