//! Experiment orchestration: configuration, the studies, and artifact output.
//!
//! A run is described by one JSON [`ExperimentConfig`]. Values are resolved as
//! command line flags over the file over built-in defaults ([`Overrides`]).

mod classical;
mod emit;
mod geom;
mod limit;
mod regularity;
mod single;

pub use classical::{
    refinement_contrast, run_classical_comparison, ClassicalReport, ClassicalRow, ContrastReport,
    ModeDiagnostics,
};
pub use emit::{emit, render_svg, Artifact, Bundle, Format, LogLogPlot, Table};
pub use geom::{geometry_report, GeometryReport};
pub use limit::{limit_row, run_limit_study, ErrorReport, LimitRow, RunFailure};
pub use regularity::{
    dominance, run_regularity_study, sample_taus, Dominance, RegularityReport, RegularityRow,
};
pub use single::{
    run_milne_single, run_milne_sweep, run_transport_single, MilneSweepReport, MilneSweepRow,
    SingleMilne, SingleTransport,
};

use crate::data::{GSpec, InflowSpec};
use crate::error::{Error, Result};
use crate::expansion::ExpansionConfig;
use crate::geometry::DomainSpec;
use crate::milne::{MilneConfig, Mode};
use crate::transport::{Accel, Projection, TransportConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Limit,
    Regularity,
    ClassicalCompare,
    MilneSingle,
    TransportSingle,
}

impl std::str::FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.into()))
            .map_err(|_| Error::InvalidConfig(format!("unknown experiment {s:?}")))
    }
}

/// Grid and solver settings of the transport runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportOptions {
    pub n_r: usize,
    pub n_theta: usize,
    pub n_dir: usize,
    /// Wall cell width; `ε/4` when absent.
    pub first_cell: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub accel: Accel,
    pub projection: Projection,
    pub t_max: f64,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions {
            n_r: 32,
            n_theta: 64,
            n_dir: 64,
            first_cell: None,
            tol: 1e-9,
            max_iter: 2000,
            accel: Accel::default(),
            projection: Projection::default(),
            t_max: 30.0,
        }
    }
}

/// Layer solver settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MilneOptions {
    /// Sixteen nodes per unit length when absent.
    pub n_eta: Option<usize>,
    pub n_phi: usize,
    /// Overrides `L = ε^{−1/2}`.
    pub length: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub penalty: f64,
    /// Mode of single solves.
    pub mode: Mode,
    /// Boundary point of single solves and comparisons.
    pub tau: f64,
}

impl Default for MilneOptions {
    fn default() -> Self {
        MilneOptions {
            n_eta: None,
            n_phi: 64,
            length: None,
            tol: 1e-9,
            max_iter: 500,
            penalty: 0.0,
            mode: Mode::Corrected,
            tau: 0.7,
        }
    }
}

/// Settings of the regularity sweep and the refinement contrast.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularityOptions {
    /// Uniform boundary samples per `ε`.
    pub n_tau: usize,
    /// Extra samples drawn from the seeded generator.
    pub random_taus: usize,
    pub dtau: f64,
    /// Run the corrected against classical `φ`-refinement contrast too.
    pub contrast: bool,
    /// Angular grid sizes of the contrast runs, finest last.
    pub contrast_n_phi: Vec<usize>,
}

impl Default for RegularityOptions {
    fn default() -> Self {
        RegularityOptions {
            n_tau: 4,
            random_taus: 0,
            dtau: 0.05,
            contrast: true,
            contrast_n_phi: vec![64, 256, 1024],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub domain: DomainSpec,
    pub g: GSpec,
    /// In-flow data of single layer solves and of the classical comparison.
    pub inflow: InflowSpec,
    pub eps_list: Vec<f64>,
    pub transport: TransportOptions,
    pub expansion: ExpansionConfig,
    pub milne: MilneOptions,
    pub regularity: RegularityOptions,
    pub out: PathBuf,
    pub seed: u64,
    /// Worker threads; all available cores when absent.
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::Limit,
            domain: DomainSpec::circle(1.0).expect("unit disk"),
            g: GSpec::default(),
            inflow: InflowSpec::default(),
            eps_list: vec![0.1, 0.05, 0.025, 0.0125],
            transport: TransportOptions::default(),
            expansion: ExpansionConfig::default(),
            milne: MilneOptions::default(),
            regularity: RegularityOptions::default(),
            out: PathBuf::from("out"),
            seed: 0,
            workers: None,
        }
    }
}

/// Values given on the command line; each one replaces the file value.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub experiment: Option<Experiment>,
    pub eps: Option<Vec<f64>>,
    pub domain: Option<DomainSpec>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Reads `path` if given, applies `over`, and validates.
    pub fn load(path: Option<&Path>, over: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::from_json(&std::fs::read_to_string(p)?)?,
            None => Self::default(),
        };
        cfg.apply(over);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, over: &Overrides) {
        if let Some(e) = over.experiment {
            self.experiment = e;
        }
        if let Some(e) = &over.eps {
            self.eps_list = e.clone();
        }
        if let Some(d) = &over.domain {
            self.domain = d.clone();
        }
        if let Some(o) = &over.out {
            self.out = o.clone();
        }
        if over.workers.is_some() {
            self.workers = over.workers;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.eps_list.is_empty() {
            return bad("eps_list is empty".into());
        }
        if let Some(e) = self.eps_list.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return bad(format!("every ε must lie in (0, 1), got {e}"));
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return bad("eps_list must be strictly decreasing".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        if self.regularity.n_tau + self.regularity.random_taus == 0 {
            return bad("the regularity sweep needs at least one boundary sample".into());
        }
        if self.regularity.contrast_n_phi.len() < 2 {
            return bad("the refinement contrast needs at least two grids".into());
        }
        if !(self.regularity.dtau > 0.0) {
            return bad("dtau must be positive".into());
        }
        Ok(())
    }

    pub fn transport_config(&self, eps: f64) -> TransportConfig {
        let t = &self.transport;
        TransportConfig {
            eps,
            domain: self.domain.clone(),
            g: self.g.clone(),
            n_dir: t.n_dir,
            n_r: t.n_r,
            n_theta: t.n_theta,
            first_cell: t.first_cell,
            tol: t.tol,
            max_iter: t.max_iter,
            accel: t.accel,
            projection: t.projection,
            t_max: t.t_max,
            ..TransportConfig::default()
        }
    }

    /// Layer configuration at boundary angle `tau` of the domain.
    pub fn milne_config(&self, eps: f64, tau: f64, mode: Mode) -> MilneConfig {
        let m = &self.milne;
        let mut c = MilneConfig::new(eps, 1.0).with_mode(mode);
        if let Some(l) = m.length {
            c = c.with_length(l);
        }
        if let Some(n) = m.n_eta {
            c.n_eta = n;
        }
        c.n_phi = m.n_phi;
        c.tol = m.tol;
        c.max_iter = m.max_iter;
        c.penalty = m.penalty;
        crate::milne::config_at(&c, &self.domain, tau)
    }
}

/// Parses `circle:a`, `ellipse:a,b` or a JSON domain object.
pub fn parse_domain(s: &str) -> Result<DomainSpec> {
    let s = s.trim();
    if s.starts_with('{') {
        return serde_json::from_str(s).map_err(|e| Error::InvalidConfig(format!("domain: {e}")));
    }
    let (kind, args) = s.split_once(':').unwrap_or((s, ""));
    let nums: Vec<f64> = args
        .split(',')
        .filter(|a| !a.trim().is_empty())
        .map(|a| a.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidConfig(format!("domain {s:?}: {e}")))?;
    match (kind, nums.as_slice()) {
        ("circle", []) => DomainSpec::circle(1.0),
        ("circle", [a]) => DomainSpec::circle(*a),
        ("ellipse", [a, b]) => DomainSpec::ellipse(*a, *b),
        _ => Err(Error::InvalidConfig(format!(
            "domain {s:?}: expected circle:a, ellipse:a,b or a JSON object"
        ))),
    }
}

/// Parses a comma separated list of `ε` values.
pub fn parse_eps_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidConfig(format!("eps {v:?}: {e}")))
        })
        .collect()
}

/// Label written next to the wall source in every manifest.
pub const G_ORIGIN: &str =
    "our choice: shipped test family, not prescribed by the model beyond smoothness and compatibility";

/// Manifest body: the resolved configuration, the `g` label and the effective
/// solver settings of every run.
pub fn manifest(cfg: &ExperimentConfig) -> serde_json::Value {
    let layer: Vec<MilneConfig> = cfg
        .eps_list
        .iter()
        .map(|e| cfg.milne_config(*e, cfg.milne.tau, cfg.milne.mode))
        .collect();
    let transport: Vec<TransportConfig> = cfg
        .eps_list
        .iter()
        .map(|e| cfg.transport_config(*e))
        .collect();
    json!({
        "experiment": cfg.experiment,
        "config": cfg,
        "g_family": {"spec": cfg.g, "origin": G_ORIGIN},
        "effective": {
            "layer": layer,
            "transport": transport,
            "expansion": cfg.expansion,
        },
    })
}

/// Elapsed wall time of `f` in seconds.
fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = std::time::Instant::now();
    let out = f();
    (out, t.elapsed().as_secs_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_override_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"eps_list":[0.2,0.1],"seed":7,"domain":{"kind":"ellipse","a":2.0,"b":1.0}}"#,
        )
        .unwrap();
        assert_eq!(cfg.eps_list, vec![0.2, 0.1]);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.transport, TransportOptions::default());
        assert!(!cfg.domain.is_circle());
        let mut c2 = cfg.clone();
        c2.apply(&Overrides {
            eps: Some(vec![0.05]),
            domain: Some(parse_domain("circle:2").unwrap()),
            ..Overrides::default()
        });
        assert_eq!(c2.eps_list, vec![0.05]);
        assert!(c2.domain.is_circle());
        assert_eq!(c2.seed, 7);
    }

    #[test]
    fn rejects_bad_eps_lists() {
        for list in [vec![], vec![0.1, 0.2], vec![0.1, 0.1], vec![1.5], vec![0.0]] {
            let cfg = ExperimentConfig {
                eps_list: list.clone(),
                ..ExperimentConfig::default()
            };
            assert!(
                matches!(cfg.validate(), Err(Error::InvalidConfig(_))),
                "{list:?}"
            );
        }
        assert!(ExperimentConfig::from_json(r#"{"nonsense":1}"#).is_err());
    }

    #[test]
    fn domain_shorthands() {
        assert!(parse_domain("circle").unwrap().is_circle());
        assert!(
            (parse_domain("ellipse:2,1").unwrap().area() - 2.0 * std::f64::consts::PI).abs()
                < 1e-12
        );
        assert!(parse_domain(r#"{"kind":"circle","a":1.0}"#).is_ok());
        assert!(parse_domain("square:1").is_err());
        assert!(parse_domain("ellipse:2").is_err());
        assert_eq!(parse_eps_list("0.1, 0.05").unwrap(), vec![0.1, 0.05]);
        assert_eq!(
            "classical-compare".parse::<Experiment>().unwrap(),
            Experiment::ClassicalCompare
        );
    }
}
