//! Zero-mean Neumann problems for the leading interior term.
//!
//! Every solution is stored as a harmonic polynomial
//! `U = c + Σ_k (r/s)^k (p_k cos kθ + q_k sin kθ) = c + Re Σ_k (p_k − i q_k)(z/s)^k`,
//! exact on the disk and fitted by boundary least squares on other convex
//! domains. Harmonicity therefore holds to rounding everywhere.

use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::quad;
use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::path::Path;

/// How the coefficients were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    /// Exact Fourier solution on a disk.
    Disk,
    /// Boundary least squares over harmonic polynomials.
    Trefftz,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicSolution {
    pub representation: Representation,
    pub scale: f64,
    pub constant: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
    /// Arnoldi recurrence of the orthogonal basis; empty for monomials `(z/s)^k`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub recurrence: Vec<Vec<[f64; 2]>>,
    /// `max |∂U/∂n − D|` on a boundary sample denser than the fit.
    pub neumann_residual: f64,
    /// Arclength mean removed from `D` before solving.
    pub flux_projection: f64,
}

/// The three interior terms `(U₀, U₁, U₂)` at one phase-space point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InteriorTerms {
    pub u0: f64,
    pub u1: f64,
    pub u2: f64,
}

/// `D(τ) = (1/π)∫_{sinφ>0} g(τ, φ) sinφ dφ` at each `τ`.
pub fn neumann_data(g: &dyn Fn(f64, f64) -> f64, taus: &[f64]) -> Vec<f64> {
    let (x, w) = quad::composite(0.0, PI, 16, 8, quad::Grade::None);
    taus.iter()
        .map(|&t| {
            x.iter()
                .zip(&w)
                .map(|(p, w)| w * g(t, *p) * p.sin())
                .sum::<f64>()
                / PI
        })
        .collect()
}

const FLUX_TOL: f64 = 1e-8;

/// Solves `ΔU = 0`, `∂U/∂n = D(τ)`, `∫_Ω U = 0`, with `D` given as a function of the normal angle.
pub fn solve_neumann(domain: &DomainSpec, d: &dyn Fn(f64) -> f64) -> Result<HarmonicSolution> {
    let n = 2048;
    let samples: Vec<(f64, f64, f64)> = (0..n)
        .map(|k| {
            let theta = TAU * k as f64 / n as f64;
            let r = domain.radius(theta);
            (theta, d(domain.frame(theta).tau), r.r.hypot(r.r1))
        })
        .collect();
    let flux: f64 = samples.iter().map(|(_, v, ds)| v * ds).sum::<f64>() * TAU / n as f64;
    let size: f64 = samples.iter().map(|(_, v, ds)| v.abs() * ds).sum::<f64>() * TAU / n as f64;
    if flux.abs() > FLUX_TOL * size.max(f64::MIN_POSITIVE) {
        return Err(Error::IllPosedNeumann { flux });
    }
    let projection = flux / domain.perimeter();
    let dp = |tau: f64| d(tau) - projection;
    let mut sol = if domain.is_circle() {
        disk(domain.r_max(), &dp)
    } else {
        trefftz(domain, &dp)?
    };
    sol.flux_projection = projection;
    sol.constant = -sol.integral(domain) / domain.area();
    sol.neumann_residual = sol.boundary_residual(domain, &dp, 4096);
    Ok(sol)
}

fn disk(a: f64, d: &dyn Fn(f64) -> f64) -> HarmonicSolution {
    let n = 1024;
    let vals: Vec<f64> = (0..n).map(|k| d(TAU * k as f64 / n as f64)).collect();
    let kmax = n / 2 - 1;
    let (mut cos, mut sin) = (Vec::with_capacity(kmax), Vec::with_capacity(kmax));
    for k in 1..=kmax {
        let (mut ak, mut bk) = (0.0, 0.0);
        for (j, v) in vals.iter().enumerate() {
            let t = TAU * (k * j % n) as f64 / n as f64;
            ak += v * t.cos();
            bk += v * t.sin();
        }
        let s = 2.0 / n as f64;
        cos.push(a * ak * s / k as f64);
        sin.push(a * bk * s / k as f64);
    }
    let top = cos.iter().chain(&sin).fold(0.0_f64, |m, v| m.max(v.abs()));
    let keep = (0..kmax)
        .rev()
        .find(|&k| cos[k].abs().max(sin[k].abs()) > 1e-15 * top.max(f64::MIN_POSITIVE))
        .map_or(0, |k| k + 1);
    cos.truncate(keep);
    sin.truncate(keep);
    for v in cos.iter_mut().chain(sin.iter_mut()) {
        if v.abs() <= 1e-15 * top {
            *v = 0.0;
        }
    }
    HarmonicSolution {
        representation: Representation::Disk,
        scale: a,
        constant: 0.0,
        cos,
        sin,
        recurrence: vec![],
        neumann_residual: 0.0,
        flux_projection: 0.0,
    }
}

/// Recurrence coefficients, basis values and basis derivatives on the sample points.
type ArnoldiBasis = (
    Vec<Vec<[f64; 2]>>,
    Vec<Vec<Complex<f64>>>,
    Vec<Vec<Complex<f64>>>,
);

/// Arnoldi recurrence `q_{k+1} = (z q_k − Σ_{j≤k} H_{jk} q_j)/H_{k+1,k}`, `q_0 = 1`, orthonormal on `zs`.
fn arnoldi(zs: &[Complex<f64>], kmax: usize) -> ArnoldiBasis {
    let m = zs.len();
    let one = Complex::new(1.0, 0.0);
    let zero = Complex::new(0.0, 0.0);
    let mut q = vec![vec![one; m]];
    let mut dq = vec![vec![zero; m]];
    let mut rec = Vec::with_capacity(kmax);
    for k in 0..kmax {
        let mut v: Vec<Complex<f64>> = zs.iter().zip(&q[k]).map(|(z, q)| z * q).collect();
        let mut h = vec![zero; k + 2];
        for _ in 0..2 {
            for j in 0..=k {
                let c: Complex<f64> = q[j]
                    .iter()
                    .zip(&v)
                    .map(|(a, b)| a.conj() * b)
                    .sum::<Complex<f64>>()
                    / m as f64;
                h[j] += c;
                for (vi, qi) in v.iter_mut().zip(&q[j]) {
                    *vi -= c * qi;
                }
            }
        }
        let norm = (v.iter().map(|c| c.norm_sqr()).sum::<f64>() / m as f64).sqrt();
        h[k + 1] = Complex::new(norm, 0.0);
        let dv: Vec<Complex<f64>> = (0..m)
            .map(|i| {
                let mut d = q[k][i] + zs[i] * dq[k][i];
                for j in 0..=k {
                    d -= h[j] * dq[j][i];
                }
                d / norm
            })
            .collect();
        q.push(v.into_iter().map(|c| c / norm).collect());
        dq.push(dv);
        rec.push(h.iter().map(|c| [c.re, c.im]).collect());
    }
    (rec, q, dq)
}

fn trefftz(domain: &DomainSpec, d: &dyn Fn(f64) -> f64) -> Result<HarmonicSolution> {
    let target = d_scale(domain, d);
    let mut best: Option<HarmonicSolution> = None;
    for kmax in [16usize, 32, 48, 64, 96] {
        let m = 8 * kmax;
        let frames: Vec<_> = (0..m)
            .map(|i| domain.frame(TAU * i as f64 / m as f64))
            .collect();
        let zs: Vec<Complex<f64>> = frames
            .iter()
            .map(|f| Complex::new(f.point[0], f.point[1]))
            .collect();
        let (rec, _, dq) = arnoldi(&zs, kmax);
        let mut a = DMatrix::zeros(m, 2 * kmax);
        let mut b = DVector::zeros(m);
        for (i, f) in frames.iter().enumerate() {
            let r = domain.radius(f.theta);
            let sw = r.r.hypot(r.r1).sqrt();
            for k in 1..=kmax {
                // gradient of Re(c q_k) is (Re c q_k′, −Im c q_k′)
                let dk = dq[k][i];
                let grad_c = [dk.re, -dk.im];
                let grad_s = [dk.im, dk.re];
                a[(i, k - 1)] = sw * (grad_c[0] * f.normal[0] + grad_c[1] * f.normal[1]);
                a[(i, kmax + k - 1)] = sw * (grad_s[0] * f.normal[0] + grad_s[1] * f.normal[1]);
            }
            b[i] = sw * d(f.tau);
        }
        let svd = a.svd(true, true);
        let x = svd
            .solve(&b, 1e-14)
            .map_err(|e| Error::Singular(e.into()))?;
        let sol = HarmonicSolution {
            representation: Representation::Trefftz,
            scale: 1.0,
            constant: 0.0,
            cos: x.rows(0, kmax).iter().copied().collect(),
            sin: x.rows(kmax, kmax).iter().copied().collect(),
            recurrence: rec,
            neumann_residual: 0.0,
            flux_projection: 0.0,
        };
        let res = sol.boundary_residual(domain, d, 2048);
        let better = best.as_ref().map_or(true, |b| res < b.neumann_residual);
        if better {
            best = Some(HarmonicSolution {
                neumann_residual: res,
                ..sol
            });
        }
        if res < 1e-12 * target.max(1.0) {
            break;
        }
    }
    best.ok_or_else(|| Error::Singular("no Neumann fit".into()))
}

fn d_scale(domain: &DomainSpec, d: &dyn Fn(f64) -> f64) -> f64 {
    (0..256)
        .map(|k| d(domain.frame(TAU * k as f64 / 256.0).tau).abs())
        .fold(0.0, f64::max)
}

impl HarmonicSolution {
    pub fn zero() -> Self {
        HarmonicSolution {
            representation: Representation::Disk,
            scale: 1.0,
            constant: 0.0,
            cos: vec![],
            sin: vec![],
            recurrence: vec![],
            neumann_residual: 0.0,
            flux_projection: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.cos.iter().chain(&self.sin).all(|v| *v == 0.0)
    }

    /// `f(z), f′(z), f″(z)` of the analytic part.
    fn analytic(&self, x: [f64; 2]) -> [Complex<f64>; 3] {
        if self.recurrence.is_empty() {
            self.horner(x)
        } else {
            self.orthogonal(x)
        }
    }

    fn horner(&self, x: [f64; 2]) -> [Complex<f64>; 3] {
        let z = Complex::new(x[0], x[1]) / self.scale;
        let s = self.scale;
        let zero = Complex::new(0.0, 0.0);
        let (mut f0, mut f1, mut f2) = (zero, zero, zero);
        for k in (1..=self.cos.len()).rev() {
            let c = Complex::new(self.cos[k - 1], -self.sin[k - 1]);
            let kf = k as f64;
            f0 = f0 * z + c;
            f1 = f1 * z + c * kf;
            if k >= 2 {
                f2 = f2 * z + c * (kf * (kf - 1.0));
            }
        }
        [f0 * z, f1 / s, f2 / (s * s)]
    }

    fn orthogonal(&self, x: [f64; 2]) -> [Complex<f64>; 3] {
        let z = Complex::new(x[0], x[1]);
        let n = self.recurrence.len();
        let zero = Complex::new(0.0, 0.0);
        let mut q = Vec::with_capacity(n + 1);
        let mut d1 = Vec::with_capacity(n + 1);
        let mut d2 = Vec::with_capacity(n + 1);
        q.push(Complex::new(1.0, 0.0));
        d1.push(zero);
        d2.push(zero);
        let mut out = [zero; 3];
        for (k, h) in self.recurrence.iter().enumerate() {
            let (mut a, mut b, mut c) = (z * q[k], q[k] + z * d1[k], 2.0 * d1[k] + z * d2[k]);
            for j in 0..=k {
                let hj = Complex::new(h[j][0], h[j][1]);
                a -= hj * q[j];
                b -= hj * d1[j];
                c -= hj * d2[j];
            }
            let norm = h[k + 1][0];
            q.push(a / norm);
            d1.push(b / norm);
            d2.push(c / norm);
            let coef = Complex::new(self.cos[k], -self.sin[k]);
            out[0] += coef * q[k + 1];
            out[1] += coef * d1[k + 1];
            out[2] += coef * d2[k + 1];
        }
        out
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.constant + self.analytic(x)[0].re
    }

    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let f1 = self.analytic(x)[1];
        [f1.re, -f1.im]
    }

    /// `[[∂₁₁, ∂₁₂], [∂₁₂, ∂₂₂]]`.
    pub fn hessian(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        let f2 = self.analytic(x)[2];
        [[f2.re, -f2.im], [-f2.im, -f2.re]]
    }

    pub fn laplacian(&self, x: [f64; 2]) -> f64 {
        let h = self.hessian(x);
        h[0][0] + h[1][1]
    }

    /// `U₀ = Ū₀`, `U₁ = −w·∇Ū₀`, `U₂ = (w·∇)²Ū₀`.
    pub fn interior_terms(&self, x: [f64; 2], w: [f64; 2]) -> InteriorTerms {
        let [f0, f1, f2] = self.analytic(x);
        let g = [f1.re, -f1.im];
        let h = [[f2.re, -f2.im], [-f2.im, -f2.re]];
        InteriorTerms {
            u0: self.constant + f0.re,
            u1: -(w[0] * g[0] + w[1] * g[1]),
            u2: w[0] * (h[0][0] * w[0] + h[0][1] * w[1]) + w[1] * (h[1][0] * w[0] + h[1][1] * w[1]),
        }
    }

    /// `∫_Ω U dx` by Gauss–Legendre in radius and the trapezoid rule in angle.
    pub fn integral(&self, domain: &DomainSpec) -> f64 {
        let n_theta = 512;
        let rule = quad::gauss(24);
        let mut total = 0.0;
        for k in 0..n_theta {
            let theta = TAU * k as f64 / n_theta as f64;
            let rb = domain.radius(theta).r;
            let (c, s) = (theta.cos(), theta.sin());
            for (rho, w) in rule.mapped(0.0, rb) {
                total += w * rho * self.value([rho * c, rho * s]);
            }
        }
        total * TAU / n_theta as f64
    }

    /// `max |∂U/∂n − D|` on `n` uniform boundary angles.
    pub fn boundary_residual(&self, domain: &DomainSpec, d: &dyn Fn(f64) -> f64, n: usize) -> f64 {
        (0..n)
            .map(|k| {
                let f = domain.frame(TAU * (k as f64 + 0.5) / n as f64);
                let g = self.gradient(f.point);
                (g[0] * f.normal[0] + g[1] * f.normal[1] - d(f.tau)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `−∫_{S¹} w·∇U₀ dw` and `∫_{S¹} (w·∇)²U₀ dw` by `n_dir` uniform ordinates: the
    /// sources of the first and second order interior Neumann problems.
    pub fn angular_sources(&self, x: [f64; 2], n_dir: usize) -> (f64, f64) {
        let dw = TAU / n_dir as f64;
        let (mut s1, mut s2) = (0.0, 0.0);
        for k in 0..n_dir {
            let a = (k as f64 + 0.5) * dw;
            let t = self.interior_terms(x, [a.cos(), a.sin()]);
            s1 += t.u1 * dw;
            s2 += t.u2 * dw;
        }
        (s1, s2)
    }

    pub fn sup_norm(&self, domain: &DomainSpec) -> f64 {
        let mut m = 0.0_f64;
        for k in 0..256 {
            let theta = TAU * k as f64 / 256.0;
            let rb = domain.radius(theta).r;
            for j in 0..=16 {
                let rho = rb * j as f64 / 16.0;
                m = m.max(self.value([rho * theta.cos(), rho * theta.sin()]).abs());
            }
        }
        m
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Nodal values `x1,x2,u` on a polar sample of the domain.
    pub fn write_nodal_csv(
        &self,
        domain: &DomainSpec,
        n_r: usize,
        n_theta: usize,
        path: &Path,
    ) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x1", "x2", "u"])?;
        for k in 0..n_theta {
            let theta = TAU * k as f64 / n_theta as f64;
            let rb = domain.radius(theta).r;
            for j in 1..=n_r {
                let rho = rb * j as f64 / n_r as f64;
                let x = [rho * theta.cos(), rho * theta.sin()];
                w.write_record(&[
                    format!("{:.17e}", x[0]),
                    format!("{:.17e}", x[1]),
                    format!("{:.17e}", self.value(x)),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit() -> DomainSpec {
        DomainSpec::circle(1.0).unwrap()
    }

    #[test]
    fn neumann_data_quadrature() {
        let taus = [0.0, 0.4, 2.0];
        assert!(neumann_data(&|_, _| 0.0, &taus).iter().all(|v| *v == 0.0));
        for (t, v) in taus
            .iter()
            .zip(neumann_data(&|t: f64, p: f64| p.sin() * t.cos(), &taus))
        {
            assert_abs_diff_eq!(v, t.cos() / 2.0, epsilon = 1e-14);
        }
        for v in neumann_data(&|_, _| 0.7, &taus) {
            assert_abs_diff_eq!(v, 1.4 / PI, epsilon = 1e-14);
        }
    }

    #[test]
    fn disk_modes() {
        let s = solve_neumann(&unit(), &|t: f64| t.cos()).unwrap();
        for &x in &[[0.3, 0.2], [-0.5, 0.7], [0.0, 0.0]] {
            assert_abs_diff_eq!(s.value(x), x[0], epsilon = 1e-14);
            let g = s.gradient(x);
            assert_abs_diff_eq!(g[0], 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(g[1], 0.0, epsilon = 1e-14);
        }
        let s3 = solve_neumann(&unit(), &|t: f64| (3.0 * t).cos()).unwrap();
        let x = [0.5, 0.0];
        assert_abs_diff_eq!(s3.value(x), 0.125 / 3.0, epsilon = 1e-15);
        let g = s3.gradient(x);
        assert_abs_diff_eq!(g[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(g[1], 0.0, epsilon = 1e-15);
        let z = solve_neumann(&unit(), &|_| 0.0).unwrap();
        assert!(z.is_zero());
        assert_eq!(z.gradient([0.1, 0.2]), [0.0, 0.0]);
    }

    #[test]
    fn radius_scaling() {
        let d = DomainSpec::circle(2.0).unwrap();
        let s = solve_neumann(&d, &|t: f64| (2.0 * t).sin()).unwrap();
        // U = r² sin2θ / 4 has ∂_r U = sin2θ at r = 2
        let x = [0.6, -0.9];
        assert_abs_diff_eq!(s.value(x), 2.0 * x[0] * x[1] / 4.0, epsilon = 1e-14);
        assert!(s.neumann_residual < 1e-13);
    }

    #[test]
    fn interior_terms_of_linear_profile() {
        let s = solve_neumann(&unit(), &|t: f64| t.cos()).unwrap();
        let t = s.interior_terms([0.2, 0.1], [1.0, 0.0]);
        assert_abs_diff_eq!(t.u0, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(t.u1, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.u2, 0.0, epsilon = 1e-15);
        let (s1, s2) = s.angular_sources([0.3, -0.4], 64);
        assert!(s1.abs() < 1e-14 && s2.abs() < 1e-14);
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let s = solve_neumann(&unit(), &|t: f64| {
            t.cos() + 0.3 * (2.0 * t).sin() - 0.2 * (4.0 * t).cos()
        })
        .unwrap();
        let x = [0.31, -0.22];
        let h = 1e-5;
        let hs = s.hessian(x);
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let (gp, gm) = (s.gradient(xp), s.gradient(xm));
            for j in 0..2 {
                assert_abs_diff_eq!((gp[j] - gm[j]) / (2.0 * h), hs[i][j], epsilon = 1e-8);
            }
        }
        assert!(s.laplacian(x).abs() < 1e-14);
        assert!(s.laplacian([0.0, 0.0]).abs() < 1e-14);
    }

    #[test]
    fn ellipse_least_squares() {
        let d = DomainSpec::ellipse(2.0, 1.0).unwrap();
        let s = solve_neumann(&d, &|t: f64| t.cos() + 0.5 * (2.0 * t).sin()).unwrap();
        assert_eq!(s.representation, Representation::Trefftz);
        assert!(s.neumann_residual < 1e-10, "{}", s.neumann_residual);
        assert!(s.integral(&d).abs() < 1e-10 * d.area() * s.sup_norm(&d));
        let p = solve_neumann(&d, &|_| 1.0);
        assert!(matches!(p, Err(Error::IllPosedNeumann { .. })));
    }

    #[test]
    fn json_round_trip() {
        let s = solve_neumann(&unit(), &|t: f64| t.sin()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u0.json");
        s.write_json(&p).unwrap();
        assert_eq!(HarmonicSolution::read_json(&p).unwrap(), s);
    }
}
