//! Diffusive-limit study: transport solve, expansion and remainder norms per `ε`.

use super::emit::{num, opt, Artifact, LogLogPlot, Table};
use super::{timed, ExperimentConfig};
use crate::error::{Error, Result};
use crate::expansion::{self, ExpansionSet};
use crate::fit::{self, LineFit};
use crate::par::Exec;
use crate::transport::{self, TransportField};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub eps: f64,
    /// `sup|u^ε − Ū₀|` over nodes and ordinates.
    pub sup_err: f64,
    pub l2_err: f64,
    /// `sup|R|` with `R = u^ε − Q − Q̄B`.
    pub sup_remainder: f64,
    pub l2_remainder: f64,
    /// `sup|εU₁ + ε²U₂ + εŪB₁|`.
    pub sup_correction: f64,
    /// `ε sup|f₁ − f₁,L|` over the layer grids.
    pub sup_layer: f64,
    /// `sup_err − (sup_remainder − sup_correction)`, non-negative by the triangle inequality.
    pub consistency: f64,
    /// `sup|R − P[R]|` on the incoming half of the wall.
    pub boundary_defect: f64,
    /// Its analytic leading part `ε² sup|U₂ − P[U₂]|`.
    pub boundary_defect_leading: f64,
    pub iterations: usize,
    pub converged: bool,
    pub mass_defect: f64,
    /// Fitted slope over this and all coarser rows; `None` for the first row.
    pub slope_running: Option<f64>,
    /// Wall times in seconds; kept out of the CSV.
    pub transport_seconds: f64,
    pub expansion_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub eps: f64,
    pub message: String,
    pub exit_code: i32,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Completed runs in the order of the `ε` list.
    pub rows: Vec<LimitRow>,
    /// Fit of `ln sup_err` against `ln ε` (at least three points).
    pub fit: Option<LineFit>,
    pub fit_l2: Option<LineFit>,
    pub fit_boundary: Option<LineFit>,
    /// False when fewer than three rows have a positive error, e.g. for `g = 0`.
    pub slope_defined: bool,
    pub failures: Vec<RunFailure>,
}

impl ErrorReport {
    pub fn partial(&self) -> bool {
        !self.failures.is_empty()
    }

    /// `1 − slope`, the exponent loss of the fitted rate.
    pub fn delta(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| 1.0 - f.slope)
    }

    /// Exit code of the first failure, zero when complete.
    pub fn exit_code(&self) -> i32 {
        self.failures.first().map_or(0, |f| f.exit_code)
    }
}

/// One `ε` run.
pub fn limit_row(
    cfg: &ExperimentConfig,
    eps: f64,
) -> Result<(LimitRow, TransportField, ExpansionSet)> {
    let tcfg = cfg.transport_config(eps);
    let (u, t_transport) = timed(|| transport::solve(&tcfg));
    let u = u?;
    if !u.converged {
        return Err(Error::NonConvergence {
            what: format!("transport at ε = {eps}"),
            iterations: u.iterations,
            residual: u.residuals.last().copied().unwrap_or(f64::NAN),
        });
    }
    let (exp, t_exp) = timed(|| expansion::build(&cfg.domain, eps, cfg.g.clone(), &cfg.expansion));
    let exp = exp?;
    let n = expansion::remainder_norms(&u, &exp);
    let sup_layer = eps
        * exp
            .layers
            .iter()
            .flat_map(|f| f.f.iter().map(move |v| (v - f.f_l).abs()))
            .fold(0.0, f64::max);
    let (boundary_defect, leading) = if exp.is_zero() {
        (0.0, 0.0)
    } else {
        (exp.boundary_defect(), exp.boundary_defect_leading())
    };
    let row = LimitRow {
        eps,
        sup_err: n.sup_error,
        l2_err: n.l2_error,
        sup_remainder: n.sup_remainder,
        l2_remainder: n.l2_remainder,
        sup_correction: n.sup_correction,
        sup_layer,
        consistency: n.sup_error - (n.sup_remainder - n.sup_correction),
        boundary_defect,
        boundary_defect_leading: leading,
        iterations: u.iterations,
        converged: u.converged,
        mass_defect: transport::mass_defect(&u),
        slope_running: None,
        transport_seconds: t_transport,
        expansion_seconds: t_exp,
    };
    Ok((row, u, exp))
}

/// Runs every `ε` of the list, in parallel across `ε`.
///
/// A failed run is recorded in `failures` and leaves the other rows intact.
pub fn run_limit_study(cfg: &ExperimentConfig) -> ErrorReport {
    run_with(&cfg.eps_list, |eps| {
        limit_row(cfg, eps).map(|(row, _, _)| row)
    })
}

fn run_with(eps_list: &[f64], run: impl Fn(f64) -> Result<LimitRow> + Sync + Send) -> ErrorReport {
    let results = Exec::default().map(eps_list.len(), |k| run(eps_list[k]));
    let mut report = ErrorReport::default();
    for (eps, r) in eps_list.iter().zip(results) {
        match r {
            Ok(row) => report.rows.push(row),
            Err(e) => report.failures.push(RunFailure {
                eps: *eps,
                message: e.to_string(),
                exit_code: e.exit_code(),
            }),
        }
    }
    finish(&mut report);
    report
}

/// Fills the running slopes and the fits from the completed rows.
pub fn finish(report: &mut ErrorReport) {
    let eps: Vec<f64> = report.rows.iter().map(|r| r.eps).collect();
    let sup: Vec<f64> = report.rows.iter().map(|r| r.sup_err).collect();
    for k in 0..report.rows.len() {
        report.rows[k].slope_running = if k >= 1 {
            fit::log_log(&eps[..=k], &sup[..=k]).map(|f| f.slope)
        } else {
            None
        };
    }
    let fit3 = |ys: Vec<f64>| fit::log_log(&eps, &ys).filter(|f| f.points >= 3);
    report.fit = fit3(sup);
    report.fit_l2 = fit3(report.rows.iter().map(|r| r.l2_err).collect());
    report.fit_boundary = fit3(report.rows.iter().map(|r| r.boundary_defect).collect());
    report.slope_defined = report.fit.is_some();
}

impl Artifact for ErrorReport {
    fn tables(&self) -> Vec<Table> {
        let mut t = Table::new("limit", &["eps", "sup_err", "l2_err", "slope_running"]);
        let mut d = Table::new(
            "limit_detail",
            &[
                "eps",
                "sup_remainder",
                "l2_remainder",
                "sup_correction",
                "sup_layer",
                "consistency",
                "boundary_defect",
                "boundary_defect_leading",
                "iterations",
                "mass_defect",
            ],
        );
        for r in &self.rows {
            t.push(vec![
                num(r.eps),
                num(r.sup_err),
                num(r.l2_err),
                opt(r.slope_running),
            ]);
            d.push(vec![
                num(r.eps),
                num(r.sup_remainder),
                num(r.l2_remainder),
                num(r.sup_correction),
                num(r.sup_layer),
                num(r.consistency),
                num(r.boundary_defect),
                num(r.boundary_defect_leading),
                r.iterations.to_string(),
                num(r.mass_defect),
            ]);
        }
        vec![t, d]
    }

    fn plots(&self) -> Vec<LogLogPlot> {
        let pts = |f: fn(&LimitRow) -> f64| self.rows.iter().map(|r| (r.eps, f(r))).collect();
        vec![
            LogLogPlot {
                name: "limit".into(),
                x_label: "ε".into(),
                y_label: "sup|u − Ū₀|".into(),
                points: pts(|r| r.sup_err),
                fit: self.fit.clone(),
            },
            LogLogPlot {
                name: "boundary_defect".into(),
                x_label: "ε".into(),
                y_label: "sup|R − P[R]|".into(),
                points: pts(|r| r.boundary_defect),
                fit: self.fit_boundary.clone(),
            },
        ]
    }

    fn report_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::GSpec;

    fn row(eps: f64, sup: f64) -> LimitRow {
        LimitRow {
            eps,
            sup_err: sup,
            l2_err: sup,
            sup_remainder: 0.0,
            l2_remainder: 0.0,
            sup_correction: 0.0,
            sup_layer: 0.0,
            consistency: sup,
            boundary_defect: eps * eps,
            boundary_defect_leading: eps * eps,
            iterations: 1,
            converged: true,
            mass_defect: 0.0,
            slope_running: None,
            transport_seconds: 0.0,
            expansion_seconds: 0.0,
        }
    }

    #[test]
    fn fits_need_three_points() {
        let mut r = ErrorReport {
            rows: vec![row(0.1, 0.3), row(0.05, 0.15)],
            ..ErrorReport::default()
        };
        finish(&mut r);
        assert!(!r.slope_defined);
        assert_eq!(r.rows[0].slope_running, None);
        assert!((r.rows[1].slope_running.unwrap() - 1.0).abs() < 1e-12);
        r.rows.push(row(0.025, 0.075));
        finish(&mut r);
        assert!((r.fit.as_ref().unwrap().slope - 1.0).abs() < 1e-12);
        assert!((r.fit_boundary.as_ref().unwrap().slope - 2.0).abs() < 1e-12);
        assert_eq!(r.delta().map(|d| d.abs() < 1e-12), Some(true));
    }

    #[test]
    fn zero_data_gives_zero_errors_and_no_slope() {
        let cfg = ExperimentConfig {
            g: GSpec::Zero,
            eps_list: vec![0.2, 0.1, 0.05],
            transport: super::super::TransportOptions {
                n_r: 8,
                n_theta: 16,
                n_dir: 16,
                ..Default::default()
            },
            expansion: crate::expansion::ExpansionConfig {
                n_tau: 4,
                n_phi: 16,
                ..Default::default()
            },
            ..ExperimentConfig::default()
        };
        let r = run_limit_study(&cfg);
        assert!(r.failures.is_empty(), "{:?}", r.failures);
        assert_eq!(r.rows.len(), 3);
        for row in &r.rows {
            assert_eq!(row.sup_err, 0.0);
            assert_eq!(row.l2_err, 0.0);
        }
        assert!(!r.slope_defined);
        assert!(r.fit.is_none());
    }

    #[test]
    fn a_failed_eps_leaves_other_rows_intact() {
        let eps = [0.1, 0.05, 0.025, 0.0125];
        let ok = run_with(&eps, |e| Ok(row(e, 3.0 * e)));
        let bad = run_with(&eps, |e| {
            if e == 0.05 {
                Err(Error::NonConvergence {
                    what: "test".into(),
                    iterations: 1,
                    residual: 1.0,
                })
            } else {
                Ok(row(e, 3.0 * e))
            }
        });
        assert!(bad.partial());
        assert_eq!(bad.exit_code(), 2);
        assert_eq!(bad.failures[0].eps, 0.05);
        let kept: Vec<_> = ok
            .rows
            .iter()
            .filter(|r| r.eps != 0.05)
            .map(|r| (r.eps, r.sup_err))
            .collect();
        let got: Vec<_> = bad.rows.iter().map(|r| (r.eps, r.sup_err)).collect();
        assert_eq!(kept, got);
        assert!((bad.fit.as_ref().unwrap().slope - 1.0).abs() < 1e-12);
    }
}
