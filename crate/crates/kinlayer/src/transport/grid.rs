//! Scaled-polar node set `x = ρ·r(θ)·(cosθ, sinθ)` graded toward the wall.

use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::interp;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Entries of one interpolation stencil: unknown index and weight.
pub type Stencil = [(u32, f64); 16];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryNode {
    pub theta: f64,
    pub tau: f64,
    pub normal: [f64; 2],
    /// Arclength element `|dx/dθ|·Δθ`.
    pub ds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolarGrid {
    pub n_r: usize,
    pub n_theta: usize,
    /// Grading strength of `ρ(s) = tanh(βs)/tanh β`.
    pub beta: f64,
    pub rho: Vec<f64>,
    pub theta: Vec<f64>,
    /// Node `i·n_theta + j` sits at radius index `i`, angle index `j`.
    pub nodes: Vec<[f64; 2]>,
    pub area: Vec<f64>,
    /// Outermost ring, one entry per angle.
    pub boundary: Vec<BoundaryNode>,
    radius: Vec<f64>,
    /// `ρ` extended by four rows reflected through the origin.
    ext: Vec<f64>,
    circle: Option<f64>,
}

fn rho_of(beta: f64, s: f64) -> f64 {
    if beta < 1e-6 {
        s
    } else {
        (beta * s).tanh() / beta.tanh()
    }
}

impl PolarGrid {
    /// Builds the grid; `beta` is the smallest grading for which the cell at the
    /// wall is at most `first_cell` wide.
    pub fn new(domain: &DomainSpec, n_r: usize, n_theta: usize, first_cell: f64) -> Result<Self> {
        if n_r < 6 || n_theta < 8 || n_theta % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "polar grid needs n_r ≥ 6 and even n_theta ≥ 8, got {n_r}×{n_theta}"
            )));
        }
        if !(first_cell > 0.0) {
            return Err(Error::InvalidConfig(
                "first cell width must be positive".into(),
            ));
        }
        let s: Vec<f64> = (0..n_r)
            .map(|i| (i as f64 + 0.5) / (n_r as f64 - 0.5))
            .collect();
        let theta: Vec<f64> = (0..n_theta)
            .map(|j| TAU * j as f64 / n_theta as f64)
            .collect();
        let radius: Vec<f64> = theta.iter().map(|&t| domain.radius(t).r).collect();
        let r_min = radius.iter().cloned().fold(f64::INFINITY, f64::min);
        let wall = |beta: f64| (1.0 - rho_of(beta, s[n_r - 2])) * r_min;
        let beta = if wall(0.0) <= first_cell {
            0.0
        } else {
            let (mut lo, mut hi) = (0.0, 40.0);
            if wall(hi) > first_cell {
                return Err(Error::InvalidConfig(format!(
                    "{n_r} radial nodes cannot resolve a wall cell of {first_cell:.3e}"
                )));
            }
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if wall(mid) > first_cell {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        };
        let rho: Vec<f64> = s.iter().map(|&s| rho_of(beta, s)).collect();
        let d_theta = TAU / n_theta as f64;
        let mut edges = vec![0.0];
        edges.extend(rho.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        edges.push(1.0);
        let mut nodes = Vec::with_capacity(n_r * n_theta);
        let mut area = Vec::with_capacity(n_r * n_theta);
        for i in 0..n_r {
            for j in 0..n_theta {
                let (sn, cs) = theta[j].sin_cos();
                let r = rho[i] * radius[j];
                nodes.push([r * cs, r * sn]);
                area.push(
                    0.5 * (edges[i + 1].powi(2) - edges[i].powi(2)) * radius[j].powi(2) * d_theta,
                );
            }
        }
        let boundary = theta
            .iter()
            .map(|&t| {
                let f = domain.frame(t);
                let rd = domain.radius(t);
                BoundaryNode {
                    theta: t,
                    tau: f.tau,
                    normal: f.normal,
                    ds: rd.r.hypot(rd.r1) * d_theta,
                }
            })
            .collect();
        let mut ext: Vec<f64> = rho[..4].iter().rev().map(|r| -r).collect();
        ext.extend(&rho);
        let circle = match domain.shape() {
            crate::geometry::Shape::Circle { a } => Some(*a),
            _ => None,
        };
        Ok(PolarGrid {
            n_r,
            n_theta,
            beta,
            rho,
            theta,
            nodes,
            area,
            boundary,
            radius,
            ext,
            circle,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.area.iter().sum()
    }

    /// Boundary index of a node on the outermost ring.
    pub fn boundary_index(&self, node: usize) -> Option<usize> {
        let first = (self.n_r - 1) * self.n_theta;
        (node >= first).then(|| node - first)
    }

    pub fn d_theta(&self) -> f64 {
        TAU / self.n_theta as f64
    }

    fn r_at(&self, domain: &DomainSpec, theta: f64) -> f64 {
        match self.circle {
            Some(a) => a,
            None => domain.radius(theta).r,
        }
    }

    /// Bicubic weights for the nodal values at `y`; points slightly outside
    /// are clamped to the wall.
    pub fn stencil(&self, domain: &DomainSpec, y: [f64; 2], out: &mut Stencil) {
        let nt = self.n_theta as isize;
        let th = y[1].atan2(y[0]).rem_euclid(TAU);
        let rho = (y[0].hypot(y[1]) / self.r_at(domain, th)).min(1.0);
        let start = interp::bracket_stencil(&self.ext, rho, 4);
        let mut xs = [0.0; 4];
        xs.copy_from_slice(&self.ext[start..start + 4]);
        if start < 4 {
            // reflected rows carry the radius of the opposite ray
            let scale = self.r_at(domain, th + PI) / self.r_at(domain, th);
            for x in xs.iter_mut().take(4 - start) {
                *x *= scale;
            }
        }
        let mut wr = [0.0; 4];
        interp::lagrange_weights(&xs, rho, &mut wr);
        let mut wt = [0.0; 4];
        let mut wt_ref = [0.0; 4];
        let base = interp::periodic_stencil(0.0, self.d_theta(), th, &mut wt);
        let base_ref = if start < 4 {
            interp::periodic_stencil(0.0, self.d_theta(), (th + PI).rem_euclid(TAU), &mut wt_ref)
        } else {
            0
        };
        let mut k = 0;
        for a in 0..4 {
            let e = start + a;
            let (row, b0, w) = if e < 4 {
                (3 - e, base_ref, &wt_ref)
            } else {
                (e - 4, base, &wt)
            };
            for (b, wb) in w.iter().enumerate() {
                let j = (b0 + b as isize).rem_euclid(nt) as usize;
                out[k] = ((row * self.n_theta + j) as u32, wr[a] * wb);
                k += 1;
            }
        }
    }

    /// Periodic cubic weights in the polar angle for boundary values.
    pub fn boundary_stencil(&self, theta: f64, offset: usize, out: &mut [(u32, f64); 4]) {
        let mut w = [0.0; 4];
        let base = interp::periodic_stencil(0.0, self.d_theta(), theta.rem_euclid(TAU), &mut w);
        for (b, wb) in w.iter().enumerate() {
            let j = (base + b as isize).rem_euclid(self.n_theta as isize) as usize;
            out[b] = ((offset + j) as u32, *wb);
        }
    }

    /// Interpolates nodal values at a point.
    pub fn interpolate(&self, domain: &DomainSpec, values: &[f64], y: [f64; 2]) -> f64 {
        let mut st = [(0, 0.0); 16];
        self.stencil(domain, y, &mut st);
        st.iter().map(|(i, w)| w * values[*i as usize]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn areas_sum_to_the_domain_measure() {
        let d = DomainSpec::circle(1.5).unwrap();
        let g = PolarGrid::new(&d, 24, 32, 0.01).unwrap();
        assert_abs_diff_eq!(g.measure(), PI * 2.25, epsilon = 1e-12);
        assert!((1.0 - g.rho[g.n_r - 2]) * 1.5 <= 0.01 + 1e-12);
        let e = DomainSpec::ellipse(2.0, 1.0).unwrap();
        let g = PolarGrid::new(&e, 24, 128, 0.05).unwrap();
        assert!((g.measure() - e.area()).abs() < 2e-3 * e.area());
    }

    #[test]
    fn stencil_reproduces_cubics() {
        for d in [
            DomainSpec::circle(1.0).unwrap(),
            DomainSpec::ellipse(1.5, 1.0).unwrap(),
        ] {
            let g = PolarGrid::new(&d, 20, 32, 0.02).unwrap();
            let f = |x: [f64; 2]| 1.0 + x[0] - 0.5 * x[1] + 0.3 * x[0] * x[1];
            let vals: Vec<f64> = g.nodes.iter().map(|&x| f(x)).collect();
            for &y in &[[0.01, -0.02], [0.3, 0.2], [-0.5, 0.6], [0.0, 0.99]] {
                let err = (g.interpolate(&d, &vals, y) - f(y)).abs();
                assert!(err < 5e-3, "{y:?}: {err}");
            }
            let mut st = [(0, 0.0); 16];
            g.stencil(&d, [0.02, 0.01], &mut st);
            assert_abs_diff_eq!(st.iter().map(|s| s.1).sum::<f64>(), 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn rejects_odd_angle_counts() {
        let d = DomainSpec::circle(1.0).unwrap();
        assert!(PolarGrid::new(&d, 20, 33, 0.1).is_err());
        assert!(PolarGrid::new(&d, 8, 16, 0.0).is_err());
    }
}
