//! Smooth convex planar domains described by a polar radius `r(θ)` about the origin.
//!
//! Boundary-fitted coordinates `(μ, θ)` place a point at depth `μ` along the
//! inward normal of the boundary point with polar angle `θ`. The normal angle
//! `τ` is the tangential variable used by the boundary layer.

mod jet;

use crate::error::{Error, Result};
use jet::Jet;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

const SAMPLES: usize = 4096;

/// Serialized form of a domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Circle {
        a: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    /// `r(θ) = c0 + Σ cos[k-1]·cos kθ + sin[k-1]·sin kθ`.
    Fourier {
        c0: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
}

/// A validated strictly convex domain.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "Shape", into = "Shape")]
pub struct DomainSpec {
    shape: Shape,
    r_min_curv: f64,
    r_max: f64,
    perimeter: f64,
    area: f64,
}

/// `r` and its first three derivatives in `θ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Radius {
    pub r: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryFrame {
    pub theta: f64,
    pub point: [f64; 2],
    pub normal: [f64; 2],
    pub tau: f64,
    pub kappa: f64,
    pub r_kappa: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalPoint {
    pub mu: f64,
    pub theta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayExit {
    /// Geometric distance travelled backwards along `-w`.
    pub s: f64,
    pub point: [f64; 2],
    /// Polar angle of the exit point.
    pub theta: f64,
    pub grazing: bool,
}

impl TryFrom<Shape> for DomainSpec {
    type Error = Error;

    fn try_from(shape: Shape) -> Result<Self> {
        DomainSpec::new(shape)
    }
}

impl From<DomainSpec> for Shape {
    fn from(d: DomainSpec) -> Shape {
        d.shape
    }
}

fn finite_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidDomain(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

impl DomainSpec {
    pub fn circle(a: f64) -> Result<Self> {
        Self::new(Shape::Circle { a })
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        Self::new(Shape::Ellipse { a, b })
    }

    pub fn fourier(c0: f64, cos: Vec<f64>, sin: Vec<f64>) -> Result<Self> {
        Self::new(Shape::Fourier { c0, cos, sin })
    }

    pub fn new(shape: Shape) -> Result<Self> {
        match &shape {
            Shape::Circle { a } => finite_positive("radius", *a)?,
            Shape::Ellipse { a, b } => {
                finite_positive("semi-axis a", *a)?;
                finite_positive("semi-axis b", *b)?;
            }
            Shape::Fourier { c0, cos, sin } => {
                finite_positive("c0", *c0)?;
                if cos.iter().chain(sin).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidDomain(
                        "non-finite Fourier coefficient".into(),
                    ));
                }
            }
        }
        let mut d = DomainSpec {
            shape,
            r_min_curv: 0.0,
            r_max: 0.0,
            perimeter: 0.0,
            area: 0.0,
        };
        let h = TAU / SAMPLES as f64;
        let mut r_max: f64 = 0.0;
        let mut perimeter = 0.0;
        let mut area = 0.0;
        let mut worst = (f64::INFINITY, 0.0);
        for k in 0..SAMPLES {
            let th = k as f64 * h;
            let rd = d.radius(th);
            if rd.r <= 0.0 {
                return Err(Error::InvalidDomain(format!(
                    "r(θ) = {} ≤ 0 at θ = {th}",
                    rd.r
                )));
            }
            r_max = r_max.max(rd.r);
            perimeter += h * rd.r.hypot(rd.r1);
            area += 0.5 * h * rd.r * rd.r;
            let n = convexity_numerator(&rd);
            if n < worst.0 {
                worst = (n, th);
            }
        }
        let refined = golden_min(
            |t| convexity_numerator(&d.radius(t)),
            worst.1 - h,
            worst.1 + h,
        );
        let n_min = worst.0.min(convexity_numerator(&d.radius(refined)));
        if n_min <= 0.0 {
            return Err(Error::InvalidDomain(format!(
                "curvature is not strictly positive (numerator {n_min:.3e} near θ = {refined:.4})"
            )));
        }
        d.r_max = r_max;
        d.perimeter = perimeter;
        d.area = area;
        d.r_min_curv = d.scan_min_r_kappa();
        Ok(d)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn is_circle(&self) -> bool {
        matches!(self.shape, Shape::Circle { .. })
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.r_max
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    fn jet(&self, theta: f64) -> Jet {
        let t = Jet::var(theta);
        match &self.shape {
            Shape::Circle { a } => Jet::constant(*a),
            Shape::Ellipse { a, b } => {
                let c = t.cos();
                let s = t.sin();
                let q = (c * c).scale(b * b) + (s * s).scale(a * a);
                q.powf(-0.5).scale(a * b)
            }
            Shape::Fourier { c0, cos, sin } => {
                let mut r = Jet::constant(*c0);
                for (k, ck) in cos.iter().enumerate() {
                    r = r + t.scale((k + 1) as f64).cos().scale(*ck);
                }
                for (k, sk) in sin.iter().enumerate() {
                    r = r + t.scale((k + 1) as f64).sin().scale(*sk);
                }
                r
            }
        }
    }

    pub fn radius(&self, theta: f64) -> Radius {
        let [r, r1, r2, r3] = self.jet(theta).0;
        Radius { r, r1, r2, r3 }
    }

    pub fn boundary_point(&self, theta: f64) -> [f64; 2] {
        let r = self.radius(theta).r;
        let (s, c) = theta.sin_cos();
        [r * c, r * s]
    }

    pub fn frame(&self, theta: f64) -> BoundaryFrame {
        let rd = self.radius(theta);
        let (s, c) = theta.sin_cos();
        let p = rd.r.hypot(rd.r1);
        let normal = [(rd.r * c + rd.r1 * s) / p, (rd.r * s - rd.r1 * c) / p];
        let kappa = convexity_numerator(&rd) / (p * p * p);
        BoundaryFrame {
            theta,
            point: [rd.r * c, rd.r * s],
            normal,
            tau: normal[1].atan2(normal[0]),
            kappa,
            r_kappa: 1.0 / kappa,
        }
    }

    /// `dτ/dθ = κ·√(r²+r′²)`.
    pub fn dtau_dtheta(&self, theta: f64) -> f64 {
        let rd = self.radius(theta);
        convexity_numerator(&rd) / (rd.r * rd.r + rd.r1 * rd.r1)
    }

    /// Derivative of the radius of curvature with respect to `τ` at boundary parameter `θ`.
    pub fn r_kappa_prime(&self, theta: f64) -> f64 {
        let Radius { r, r1, r2, r3 } = self.radius(theta);
        let p2 = r * r + r1 * r1;
        let dp2 = 2.0 * r * r1 + 2.0 * r1 * r2;
        let n = r * r + 2.0 * r1 * r1 - r * r2;
        let dn = 2.0 * r * r1 + 3.0 * r1 * r2 - r * r3;
        let dr_dtheta = (1.5 * p2.sqrt() * dp2 * n - p2.powf(1.5) * dn) / (n * n);
        dr_dtheta / (n / p2)
    }

    /// Inverts `τ(θ)` by safeguarded Newton iteration.
    pub fn theta_of_tau(&self, tau: f64) -> f64 {
        if self.is_circle() {
            return wrap_angle(tau);
        }
        let mut th = tau;
        for _ in 0..60 {
            let d = wrap_angle(self.frame(th).tau - tau);
            let step = (d / self.dtau_dtheta(th)).clamp(-0.5, 0.5);
            th -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        wrap_angle(th)
    }

    /// Smallest radius of curvature: local coordinates are one-to-one for `μ` below it.
    pub fn validity_radius(&self) -> f64 {
        self.r_min_curv
    }

    fn scan_min_r_kappa(&self) -> f64 {
        let h = TAU / SAMPLES as f64;
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..SAMPLES {
            let th = k as f64 * h;
            let rk = self.frame(th).r_kappa;
            if rk < best.0 {
                best = (rk, th);
            }
        }
        let t = golden_min(|t| self.frame(t).r_kappa, best.1 - h, best.1 + h);
        best.0.min(self.frame(t).r_kappa)
    }

    /// Area element factor of the map `(μ, θ) ↦ x`.
    pub fn jacobian(&self, p: LocalPoint) -> f64 {
        let rd = self.radius(p.theta);
        let p2 = rd.r * rd.r + rd.r1 * rd.r1;
        p2.sqrt() + p.mu * (rd.r * rd.r2 - rd.r * rd.r - 2.0 * rd.r1 * rd.r1) / p2
    }

    pub fn to_cartesian(&self, p: LocalPoint) -> Result<[f64; 2]> {
        if !(p.mu >= 0.0 && p.mu < self.r_min_curv) {
            return Err(Error::TooDeep {
                mu: p.mu,
                limit: self.r_min_curv,
            });
        }
        let f = self.frame(p.theta);
        Ok([
            f.point[0] - p.mu * f.normal[0],
            f.point[1] - p.mu * f.normal[1],
        ])
    }

    /// Polar-angle test for membership in the closed domain.
    pub fn contains(&self, x: [f64; 2], slack: f64) -> bool {
        let rho = x[0].hypot(x[1]);
        rho <= self.radius(x[1].atan2(x[0])).r + slack
    }

    pub fn from_cartesian(&self, x: [f64; 2]) -> Result<LocalPoint> {
        let diam = self.diameter();
        if !self.contains(x, 1e-12 * diam) {
            return Err(Error::OutsideDomain(x[0], x[1]));
        }
        let mut th = if x[0] == 0.0 && x[1] == 0.0 {
            0.0
        } else {
            x[1].atan2(x[0])
        };
        let mut converged = false;
        for _ in 0..100 {
            let Radius { r, r1, r2, .. } = self.radius(th);
            let (s, c) = th.sin_cos();
            let b = [r * c, r * s];
            let db = [r1 * c - r * s, r1 * s + r * c];
            let ddb = [(r2 - r) * c - 2.0 * r1 * s, (r2 - r) * s + 2.0 * r1 * c];
            let d = [x[0] - b[0], x[1] - b[1]];
            let f = d[0] * db[0] + d[1] * db[1];
            let df = -(db[0] * db[0] + db[1] * db[1]) + d[0] * ddb[0] + d[1] * ddb[1];
            let step = if df < 0.0 { f / df } else { -f.signum() * 0.1 };
            let step = step.clamp(-0.5, 0.5);
            th -= step;
            if step.abs() < 1e-15 {
                converged = true;
                break;
            }
        }
        let f = self.frame(th);
        let mu = (f.point[0] - x[0]) * f.normal[0] + (f.point[1] - x[1]) * f.normal[1];
        let rebuilt = [f.point[0] - mu * f.normal[0], f.point[1] - mu * f.normal[1]];
        let err = (rebuilt[0] - x[0]).hypot(rebuilt[1] - x[1]);
        if !converged && err > 1e-10 * diam {
            return Err(Error::NonConvergence {
                what: "boundary projection".into(),
                iterations: 100,
                residual: err,
            });
        }
        if mu >= self.r_min_curv {
            return Err(Error::TooDeep {
                mu,
                limit: self.r_min_curv,
            });
        }
        Ok(LocalPoint {
            mu: mu.max(0.0),
            theta: wrap_angle(th),
        })
    }

    fn level(&self, p: [f64; 2]) -> f64 {
        p[0].hypot(p[1]) - self.radius(p[1].atan2(p[0])).r
    }

    /// First boundary crossing of the backward ray `x − s·w`, `s > 0`.
    pub fn ray_exit(&self, x: [f64; 2], w: [f64; 2]) -> Result<RayExit> {
        let diam = self.diameter();
        if !self.contains(x, 1e-12 * diam) {
            return Err(Error::OutsideDomain(x[0], x[1]));
        }
        let s = match &self.shape {
            Shape::Circle { a } => {
                let xw = x[0] * w[0] + x[1] * w[1];
                let c = (x[0] * x[0] + x[1] * x[1] - a * a).min(0.0);
                let disc = xw * xw - c;
                (xw + disc.sqrt()).max(0.0)
            }
            _ => self.ray_exit_numeric(x, w),
        };
        let point = [x[0] - s * w[0], x[1] - s * w[1]];
        let theta = point[1].atan2(point[0]);
        let n = self.frame(theta).normal;
        let grazing = (n[0] * w[0] + n[1] * w[1]).abs() < 1e-8;
        Ok(RayExit {
            s,
            point,
            theta,
            grazing,
        })
    }

    fn ray_exit_numeric(&self, x: [f64; 2], w: [f64; 2]) -> f64 {
        let diam = self.diameter();
        let at = |s: f64| self.level([x[0] - s * w[0], x[1] - s * w[1]]);
        let mut lo = 0.0;
        if at(0.0) > -1e-13 * diam {
            let probe = 1e-9 * diam;
            if at(probe) >= 0.0 {
                return 0.0;
            }
            lo = probe;
        }
        let mut hi = x[0].hypot(x[1]) + self.r_max * 1.01 + diam * 1e-3;
        for _ in 0..30 {
            let mid = 0.5 * (lo + hi);
            if at(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        // secant refinement inside the bracket
        let (mut a, mut fa, mut b, mut fb) = (lo, at(lo), hi, at(hi));
        for _ in 0..40 {
            if (b - a).abs() < 1e-15 * diam {
                break;
            }
            let mut m = b - fb * (b - a) / (fb - fa);
            if !(m > a && m < b) {
                m = 0.5 * (a + b);
            }
            let fm = at(m);
            if fm == 0.0 {
                return m;
            }
            if fm > 0.0 {
                b = m;
                fb = fm;
            } else {
                a = m;
                fa = fm;
            }
            if fm.abs() < 1e-15 * diam {
                return m;
            }
        }
        0.5 * (a + b)
    }
}

/// `r² + 2r′² − r·r″`, the numerator of the curvature.
fn convexity_numerator(rd: &Radius) -> f64 {
    rd.r * rd.r + 2.0 * rd.r1 * rd.r1 - rd.r * rd.r2
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
