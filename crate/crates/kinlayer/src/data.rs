//! Boundary data families: the wall source `g(τ, φ)` of the transport problem
//! and inflow profiles `h(φ)` for single layer solves.
//!
//! Angles follow the layer convention: at the boundary point with normal angle
//! `τ` the velocity is `w = (−sin(φ − τ), −cos(φ − τ))`, so `w·n = −sinφ` and the
//! incoming half is `sinφ > 0`.

use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::interp;
use crate::milne::read_profile_csv;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::path::PathBuf;

/// Wall source families, all of the form `g = sinφ·T(τ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GSpec {
    Zero,
    /// `T(τ) = a₁cosτ + b₁sinτ + a₂cos2τ`.
    LegendreFlux {
        #[serde(default)]
        a1: f64,
        #[serde(default)]
        b1: f64,
        #[serde(default)]
        a2: f64,
    },
    /// `T` sampled at `τ_k = 2πk/n`, interpolated by periodic cubics.
    Tabulated {
        values: Vec<f64>,
    },
}

impl Default for GSpec {
    fn default() -> Self {
        GSpec::LegendreFlux {
            a1: 1.0,
            b1: 0.0,
            a2: 0.5,
        }
    }
}

/// A wall source made compatible with a domain.
///
/// The arclength mean of `T` is removed, which makes the total incoming flux
/// `∮∫_{sinφ>0} g sinφ dφ ds` vanish. The removed amount is kept in `projection`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundarySource {
    pub spec: GSpec,
    pub projection: f64,
}

impl BoundarySource {
    pub fn new(spec: GSpec, domain: &DomainSpec) -> Result<Self> {
        if let GSpec::Tabulated { values } = &spec {
            if values.len() < 4 || values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(
                    "tabulated g needs at least 4 finite values".into(),
                ));
            }
        }
        let mut out = BoundarySource {
            spec,
            projection: 0.0,
        };
        let n = 4096;
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..n {
            let theta = TAU * k as f64 / n as f64;
            let r = domain.radius(theta);
            let ds = r.r.hypot(r.r1);
            num += out.profile(domain.frame(theta).tau) * ds;
            den += ds;
        }
        let mean = num / den;
        let scale = out.scale();
        if mean.abs() > 1e-14 * scale.max(1.0) {
            out.projection = mean;
        }
        Ok(out)
    }

    pub fn zero() -> Self {
        BoundarySource {
            spec: GSpec::Zero,
            projection: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.scale() == 0.0 && self.projection == 0.0
    }

    fn scale(&self) -> f64 {
        match &self.spec {
            GSpec::Zero => 0.0,
            GSpec::LegendreFlux { a1, b1, a2 } => a1.abs() + b1.abs() + a2.abs(),
            GSpec::Tabulated { values } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// `T(τ)` after projection.
    pub fn profile(&self, tau: f64) -> f64 {
        let raw = match &self.spec {
            GSpec::Zero => 0.0,
            GSpec::LegendreFlux { a1, b1, a2 } => {
                a1 * tau.cos() + b1 * tau.sin() + a2 * (2.0 * tau).cos()
            }
            GSpec::Tabulated { values } => {
                let n = values.len();
                let mut w = [0.0; 4];
                let base =
                    interp::periodic_stencil(0.0, TAU / n as f64, tau.rem_euclid(TAU), &mut w);
                w.iter()
                    .enumerate()
                    .map(|(k, w)| w * values[(base + k as isize).rem_euclid(n as isize) as usize])
                    .sum()
            }
        };
        raw - self.projection
    }

    pub fn value(&self, tau: f64, phi: f64) -> f64 {
        phi.sin() * self.profile(tau)
    }

    /// Value at velocity `w` on the boundary point with normal angle `tau`.
    pub fn at_velocity(&self, tau: f64, w: [f64; 2]) -> f64 {
        self.value(tau, layer_angle(tau, w))
    }
}

/// Layer angle `φ` of the velocity `w` at normal angle `tau`.
pub fn layer_angle(tau: f64, w: [f64; 2]) -> f64 {
    crate::geometry::wrap_angle(tau + (-w[0]).atan2(-w[1]))
}

/// Velocity of layer angle `phi` at normal angle `tau`.
pub fn velocity(tau: f64, phi: f64) -> [f64; 2] {
    [-(phi - tau).sin(), -(phi - tau).cos()]
}

/// Inflow profiles `h(φ)` for single layer solves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InflowSpec {
    Constant {
        value: f64,
    },
    /// `c0 + Σ cos[k−1]·cos kφ + sin[k−1]·sin kφ`.
    Fourier {
        #[serde(default)]
        c0: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
    /// CSV with columns `phi,h`, linear in between and constant beyond the ends.
    Tabulated {
        path: PathBuf,
    },
}

impl Default for InflowSpec {
    fn default() -> Self {
        InflowSpec::Fourier {
            c0: 0.0,
            cos: vec![],
            sin: vec![0.0, 0.5],
        }
    }
}

/// A loaded inflow profile.
#[derive(Clone, Debug)]
pub struct Inflow {
    spec: InflowSpec,
    table: Option<(Vec<f64>, Vec<f64>)>,
}

impl Inflow {
    pub fn new(spec: InflowSpec) -> Result<Self> {
        let table = match &spec {
            InflowSpec::Tabulated { path } => {
                let rows = read_profile_csv(path)?;
                if rows.iter().any(|(p, _)| !(-PI..=PI).contains(p)) {
                    return Err(Error::InvalidConfig(
                        "profile angles must lie in [−π, π]".into(),
                    ));
                }
                Some(rows.into_iter().unzip())
            }
            _ => None,
        };
        Ok(Inflow { spec, table })
    }

    pub fn value(&self, phi: f64) -> f64 {
        match &self.spec {
            InflowSpec::Constant { value } => *value,
            InflowSpec::Fourier { c0, cos, sin } => {
                let c: f64 = cos
                    .iter()
                    .enumerate()
                    .map(|(k, a)| a * ((k + 1) as f64 * phi).cos())
                    .sum();
                let s: f64 = sin
                    .iter()
                    .enumerate()
                    .map(|(k, b)| b * ((k + 1) as f64 * phi).sin())
                    .sum();
                c0 + c + s
            }
            InflowSpec::Tabulated { .. } => {
                let (xs, ys) = self.table.as_ref().expect("table loaded");
                interp::linear(xs, ys, phi)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn legendre_flux_is_compatible_on_the_disk() {
        let d = DomainSpec::circle(1.0).unwrap();
        let g = BoundarySource::new(
            GSpec::LegendreFlux {
                a1: 1.0,
                b1: -0.3,
                a2: 0.5,
            },
            &d,
        )
        .unwrap();
        assert_eq!(g.projection, 0.0);
        assert_abs_diff_eq!(g.value(0.0, FRAC_PI_2), 1.5, epsilon = 1e-15);
    }

    #[test]
    fn projection_removes_arclength_mean() {
        let d = DomainSpec::ellipse(2.0, 1.0).unwrap();
        let g = BoundarySource::new(
            GSpec::LegendreFlux {
                a1: 0.0,
                b1: 0.0,
                a2: 1.0,
            },
            &d,
        )
        .unwrap();
        assert!(g.projection.abs() > 1e-3);
        let n = 2048;
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..n {
            let t = TAU * k as f64 / n as f64;
            let r = d.radius(t);
            num += g.profile(d.frame(t).tau) * r.r.hypot(r.r1);
            den += r.r.hypot(r.r1);
        }
        assert!((num / den).abs() < 1e-12);
    }

    #[test]
    fn tabulated_reproduces_nodes() {
        let d = DomainSpec::circle(1.0).unwrap();
        let values: Vec<f64> = (0..16).map(|k| (TAU * k as f64 / 16.0).cos()).collect();
        let g = BoundarySource::new(
            GSpec::Tabulated {
                values: values.clone(),
            },
            &d,
        )
        .unwrap();
        for (k, v) in values.iter().enumerate() {
            assert_abs_diff_eq!(g.profile(TAU * k as f64 / 16.0), v, epsilon = 1e-12);
        }
        assert!(BoundarySource::new(GSpec::Tabulated { values: vec![1.0] }, &d).is_err());
    }

    #[test]
    fn layer_angle_round_trip() {
        for &(tau, phi) in &[(0.3, 1.0), (-2.0, -0.4), (3.0, 2.9)] {
            let w = velocity(tau, phi);
            assert_abs_diff_eq!(layer_angle(tau, w), phi, epsilon = 1e-13);
            let n = [tau.cos(), tau.sin()];
            assert_abs_diff_eq!(w[0] * n[0] + w[1] * n[1], -phi.sin(), epsilon = 1e-14);
        }
    }

    #[test]
    fn inflow_profiles() {
        let h = Inflow::new(InflowSpec::default()).unwrap();
        assert_abs_diff_eq!(h.value(0.7), 0.7_f64.sin() * 0.7_f64.cos(), epsilon = 1e-15);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        std::fs::write(&path, "phi,h\n0.0,1.0\n1.0,3.0\n").unwrap();
        let t = Inflow::new(InflowSpec::Tabulated { path }).unwrap();
        assert_abs_diff_eq!(t.value(0.25), 1.5, epsilon = 1e-15);
        assert_eq!(
            Inflow::new(InflowSpec::Constant { value: 2.0 })
                .unwrap()
                .value(1.0),
            2.0
        );
    }
}
