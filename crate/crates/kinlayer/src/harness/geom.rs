//! Seeded self-checks of a domain's local coordinates and ray exits.

use super::emit::{num, Artifact, Table};
use crate::error::Result;
use crate::geometry::{DomainSpec, LocalPoint};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeometryReport {
    pub domain: DomainSpec,
    pub area: f64,
    /// Area of a fine inscribed polygon.
    pub polygon_area: f64,
    pub perimeter: f64,
    pub validity_radius: f64,
    pub r_max: f64,
    pub samples: usize,
    /// `max|x − X(Y(x))|` over random points of the validity strip.
    pub round_trip: f64,
    /// `max μ` of random ray exit points, zero on the boundary.
    pub exit_depth: f64,
    /// Smallest curvature found on the boundary samples.
    pub kappa_min: f64,
}

impl GeometryReport {
    pub fn ok(&self, tol: f64) -> bool {
        self.round_trip <= tol && self.exit_depth <= tol && self.kappa_min > 0.0
    }
}

pub fn geometry_report(domain: &DomainSpec, samples: usize, seed: u64) -> Result<GeometryReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let strip = 0.9 * domain.validity_radius();
    let mut round_trip = 0.0_f64;
    let mut exit_depth = 0.0_f64;
    let mut kappa_min = f64::INFINITY;
    for _ in 0..samples {
        let p = LocalPoint {
            mu: rng.random_range(0.0..strip),
            theta: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        };
        let x = domain.to_cartesian(p)?;
        let back = domain.to_cartesian(domain.from_cartesian(x)?)?;
        round_trip = round_trip.max((back[0] - x[0]).hypot(back[1] - x[1]));
        kappa_min = kappa_min.min(domain.frame(p.theta).kappa);

        let a: f64 = rng.random_range(0.0..TAU);
        let w = [a.cos(), a.sin()];
        let exit = domain.ray_exit(x, w)?;
        let q = [exit.point[0] * (1.0 - 1e-14), exit.point[1] * (1.0 - 1e-14)];
        exit_depth = exit_depth.max(domain.from_cartesian(q)?.mu);
    }
    let n = 4096;
    let pts: Vec<[f64; 2]> = (0..n)
        .map(|k| domain.boundary_point(TAU * k as f64 / n as f64))
        .collect();
    let polygon_area = 0.5
        * (0..n)
            .map(|k| {
                let (a, b) = (pts[k], pts[(k + 1) % n]);
                a[0] * b[1] - a[1] * b[0]
            })
            .sum::<f64>();
    Ok(GeometryReport {
        domain: domain.clone(),
        area: domain.area(),
        polygon_area,
        perimeter: domain.perimeter(),
        validity_radius: domain.validity_radius(),
        r_max: domain.r_max(),
        samples,
        round_trip,
        exit_depth,
        kappa_min,
    })
}

impl Artifact for GeometryReport {
    fn tables(&self) -> Vec<Table> {
        let mut t = Table::new("geometry", &["quantity", "value"]);
        for (k, v) in [
            ("area", self.area),
            ("polygon_area", self.polygon_area),
            ("perimeter", self.perimeter),
            ("validity_radius", self.validity_radius),
            ("r_max", self.r_max),
            ("round_trip", self.round_trip),
            ("exit_depth", self.exit_depth),
            ("kappa_min", self.kappa_min),
        ] {
            t.push(vec![k.into(), num(v)]);
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

    #[test]
    fn ellipse_passes_its_checks() {
        let d = DomainSpec::ellipse(2.0, 1.0).unwrap();
        let r = geometry_report(&d, 200, 3).unwrap();
        assert!(r.ok(1e-9), "{r:?}");
        assert!((r.polygon_area - r.area).abs() < 1e-5);
        assert_eq!(
            r.round_trip,
            geometry_report(&d, 200, 3).unwrap().round_trip
        );
    }
}
