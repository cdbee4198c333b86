//! Characteristics of the layer operator `sinφ ∂η + F cosφ ∂φ`.
//!
//! With the curvature force, a characteristic is a straight line in a disk of
//! radius `R_κ/ε` seen from its rim: with `ρ = R_κ − εη` and `ℓ` the arc length
//! (in `η` units) measured from the point of closest approach to the centre,
//! `ρ² = b² + ε²ℓ²`, `sinφ = −εℓ/ρ` and `ρ cosφ = ±b`. The optical depth along
//! the path is the elapsed `ℓ`, so every quantity below is closed form.

use super::{LayerGeometry, Mode};
use crate::quad;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Region {
    /// Moving away from the wall.
    I,
    /// Moving toward the wall, reflected at `η = L`.
    II,
    /// Moving toward the wall, turning before `η = L`.
    III,
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Piece {
    /// `ℓ(σ) = l_start − (σ − sigma0)`.
    Line {
        sigma0: f64,
        sigma1: f64,
        l_start: f64,
    },
    /// `η(σ) = eta_start − (σ − sigma0)·s` at fixed `φ`.
    Straight {
        sigma0: f64,
        sigma1: f64,
        eta_start: f64,
        s: f64,
        phi: f64,
    },
}

impl Piece {
    fn bounds(&self) -> (f64, f64) {
        match *self {
            Piece::Line { sigma0, sigma1, .. } | Piece::Straight { sigma0, sigma1, .. } => {
                (sigma0, sigma1)
            }
        }
    }
}

/// Constants of a corrected characteristic line.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Line {
    eps: f64,
    r: f64,
    eta0: f64,
    rho0: f64,
    /// `ρ cosφ`, conserved.
    m: f64,
    l0: f64,
}

impl Line {
    fn new(g: &LayerGeometry, eta: f64, phi: f64) -> Self {
        let rho0 = g.r_kappa - g.eps * eta;
        let (s, c) = phi.sin_cos();
        Line {
            eps: g.eps,
            r: g.r_kappa,
            eta0: eta,
            rho0,
            m: rho0 * c,
            l0: -rho0 * s / g.eps,
        }
    }

    /// `(η, φ)` at line coordinate `ℓ`.
    #[inline]
    pub(crate) fn at(&self, l: f64) -> (f64, f64) {
        let el = self.eps * l;
        let rho = self.m.hypot(el);
        let eta = self.eta0 + self.eps * (self.l0 - l) * (self.l0 + l) / (self.rho0 + rho);
        (eta, (-el).atan2(self.m))
    }

    /// `ℓ²` at depth `η` on this line (negative when the line does not reach it).
    #[inline]
    fn l_sq_at(&self, eta: f64) -> f64 {
        let rho = self.r - self.eps * eta;
        self.l0 * self.l0 - (eta - self.eta0) * (rho + self.rho0) / self.eps
    }
}

/// Backward characteristic from a point, split into pieces on which `η` is monotone.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Path {
    pub region: Region,
    pieces: [Option<Piece>; 2],
    line: Option<Line>,
    /// Optical depth to the wall (infinite for an exactly tangential classical ray).
    pub total: f64,
    /// Incoming angle at the wall.
    pub entry_phi: f64,
}

impl Path {
    pub(crate) fn new(g: &LayerGeometry, eta: f64, phi: f64) -> Self {
        match g.mode {
            Mode::Corrected => Self::corrected(g, eta, phi),
            Mode::Classical => Self::classical(g, eta, phi),
        }
    }

    fn corrected(g: &LayerGeometry, eta: f64, phi: f64) -> Self {
        let line = Line::new(g, eta, phi);
        let rho_l = g.r_kappa - g.eps * g.length;
        let l_r = line.l_sq_at(0.0).max(0.0).sqrt();
        let entry_phi = (g.eps * l_r).atan2(line.m);
        let l0 = line.l0;
        let (region, pieces, total) = if l0 < 0.0 {
            let p = Piece::Line {
                sigma0: 0.0,
                sigma1: l0 + l_r,
                l_start: l0,
            };
            (Region::I, [Some(p), None], l0 + l_r)
        } else if line.m.abs() < rho_l && l0 > 0.0 {
            let l_l = line.l_sq_at(g.length).max(0.0).sqrt();
            let s1 = l0 - l_l;
            let p1 = Piece::Line {
                sigma0: 0.0,
                sigma1: s1,
                l_start: l0,
            };
            let p2 = Piece::Line {
                sigma0: s1,
                sigma1: s1 + l_r - l_l,
                l_start: -l_l,
            };
            (Region::II, [Some(p1), Some(p2)], s1 + l_r - l_l)
        } else {
            let p1 = Piece::Line {
                sigma0: 0.0,
                sigma1: l0,
                l_start: l0,
            };
            let p2 = Piece::Line {
                sigma0: l0,
                sigma1: l0 + l_r,
                l_start: 0.0,
            };
            (Region::III, [Some(p1), Some(p2)], l0 + l_r)
        };
        Path {
            region,
            pieces,
            line: Some(line),
            total,
            entry_phi,
        }
    }

    fn classical(g: &LayerGeometry, eta: f64, phi: f64) -> Self {
        let s = phi.sin();
        if s > 0.0 {
            let total = eta / s;
            let p = Piece::Straight {
                sigma0: 0.0,
                sigma1: total,
                eta_start: eta,
                s,
                phi,
            };
            Path {
                region: Region::I,
                pieces: [Some(p), None],
                line: None,
                total,
                entry_phi: phi,
            }
        } else if s < 0.0 {
            let a = -s;
            let s1 = (g.length - eta) / a;
            let total = s1 + g.length / a;
            let p1 = Piece::Straight {
                sigma0: 0.0,
                sigma1: s1,
                eta_start: eta,
                s,
                phi,
            };
            let p2 = Piece::Straight {
                sigma0: s1,
                sigma1: total,
                eta_start: g.length,
                s: a,
                phi: -phi,
            };
            Path {
                region: Region::II,
                pieces: [Some(p1), Some(p2)],
                line: None,
                total,
                entry_phi: -phi,
            }
        } else {
            let p = Piece::Straight {
                sigma0: 0.0,
                sigma1: f64::INFINITY,
                eta_start: eta,
                s: 0.0,
                phi,
            };
            Path {
                region: Region::II,
                pieces: [Some(p), None],
                line: None,
                total: f64::INFINITY,
                entry_phi: phi,
            }
        }
    }

    /// Quadrature of `∫ e^{−rate·σ} (·) dσ` along the path.
    ///
    /// `visit(η, φ, weight)` is called for every sample; breakpoints are placed
    /// where the path crosses a node of the uniform grid `k·dh` so piecewise
    /// linear data in `η` is integrated without kinks. Weights on each
    /// sub-interval are rescaled to integrate the exponential exactly. Returns
    /// the attenuation `e^{−rate·total}` applied to the wall value, or zero
    /// when the path is truncated.
    pub(crate) fn integrate<F: FnMut(f64, f64, f64)>(
        &self,
        g: &LayerGeometry,
        dh: f64,
        mut visit: F,
    ) -> f64 {
        let res = &g.res;
        let rule = quad::gauss(res.sigma_order);
        let cut = res.sigma_cut / g.rate;
        let mut cuts: Vec<f64> = Vec::with_capacity(64);
        for piece in self.pieces.iter().flatten() {
            let (s0, s1) = piece.bounds();
            if s0 >= cut {
                break;
            }
            let s1c = s1.min(cut);
            cuts.clear();
            cuts.push(s0);
            match *piece {
                Piece::Line {
                    sigma0, l_start, ..
                } => {
                    let line = self.line.as_ref().expect("corrected path");
                    let (ea, _) = line.at(l_start);
                    let (eb, _) = line.at(l_start - (s1 - sigma0));
                    let sign = if l_start - 0.5 * (s1 - sigma0) >= 0.0 {
                        1.0
                    } else {
                        -1.0
                    };
                    push_crossings(ea, eb, dh, &mut cuts, |e| {
                        sigma0 + l_start - sign * line.l_sq_at(e).max(0.0).sqrt()
                    });
                }
                Piece::Straight {
                    sigma0,
                    eta_start,
                    s,
                    ..
                } => {
                    if s != 0.0 {
                        let eb = eta_start - (s1.min(1e300) - sigma0) * s;
                        push_crossings(eta_start, eb, dh, &mut cuts, |e| {
                            sigma0 + (eta_start - e) / s
                        });
                    }
                }
            }
            cuts.push(s1c);
            cuts.retain(|v| *v <= s1c);
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for win in cuts.windows(2) {
                let (a, b) = (win[0], win[1]);
                if b <= a {
                    continue;
                }
                let panels = ((b - a) / res.sigma_step).ceil().max(1.0) as usize;
                let h = (b - a) / panels as f64;
                for p in 0..panels {
                    let pa = a + p as f64 * h;
                    let pb = if p + 1 == panels { b } else { pa + h };
                    let exact = ((-g.rate * pa).exp() - (-g.rate * pb).exp()) / g.rate;
                    let mut raw = [0.0_f64; 16];
                    let mut sum = 0.0;
                    for (k, (sg, w)) in rule.mapped(pa, pb).enumerate() {
                        raw[k] = w * (-g.rate * sg).exp();
                        sum += raw[k];
                    }
                    let scale = if sum > 0.0 { exact / sum } else { 0.0 };
                    for (k, (sg, _)) in rule.mapped(pa, pb).enumerate() {
                        let (eta, phi) = self.position(piece, sg);
                        visit(eta.clamp(0.0, g.length), phi, raw[k] * scale);
                    }
                }
            }
        }
        if self.total <= cut {
            (-g.rate * self.total).exp()
        } else {
            0.0
        }
    }

    #[inline]
    fn position(&self, piece: &Piece, sigma: f64) -> (f64, f64) {
        match *piece {
            Piece::Line {
                sigma0, l_start, ..
            } => self
                .line
                .as_ref()
                .expect("corrected path")
                .at(l_start - (sigma - sigma0)),
            Piece::Straight {
                sigma0,
                eta_start,
                s,
                phi,
                ..
            } => (eta_start - (sigma - sigma0) * s, phi),
        }
    }
}

fn push_crossings<F: Fn(f64) -> f64>(ea: f64, eb: f64, dh: f64, cuts: &mut Vec<f64>, sigma_of: F) {
    let (lo, hi) = if ea < eb { (ea, eb) } else { (eb, ea) };
    let mut k = (lo / dh).floor() as i64 + 1;
    while (k as f64) * dh < hi {
        let e = k as f64 * dh;
        if e > lo {
            cuts.push(sigma_of(e));
        }
        k += 1;
    }
}

/// Public view of a characteristic through `(η, φ)`.
#[derive(Clone, Debug, Serialize)]
pub struct CharacteristicTrace {
    pub region: Region,
    /// `e^{−V(η)} cosφ`.
    pub energy: f64,
    pub zeta: f64,
    /// Turning depth for Region III.
    pub eta_plus: Option<f64>,
    /// Samples `(η′, φ′(η′), G(η′, 0))` on the branch `sinφ′ ≥ 0`.
    pub samples: Vec<TraceSample>,
    #[serde(skip)]
    kind: TraceKind,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TraceSample {
    pub eta: f64,
    pub phi: f64,
    pub g: f64,
}

#[derive(Clone, Copy, Debug)]
enum TraceKind {
    Line { line: Line },
    Straight { phi: f64 },
}

impl CharacteristicTrace {
    pub(crate) fn new(g: &LayerGeometry, eta: f64, phi: f64, n_samples: usize) -> Self {
        let path = Path::new(g, eta, phi);
        let weight = g.weight(eta);
        let energy = weight * phi.cos();
        let zeta = ((1.0 - energy.abs()) * (1.0 + energy.abs()))
            .max(0.0)
            .sqrt();
        let (kind, top, eta_plus) = match path.line {
            Some(line) => {
                let (top, plus) = match path.region {
                    Region::I => (eta, None),
                    Region::II => (g.length, None),
                    Region::III => {
                        let ep = g.r_kappa * (1.0 - energy.abs()) / g.eps;
                        (ep, Some(ep))
                    }
                };
                (TraceKind::Line { line }, top, plus)
            }
            None => {
                let top = if phi.sin() > 0.0 { eta } else { g.length };
                (
                    TraceKind::Straight {
                        phi: phi.sin().abs().atan2(phi.cos()),
                    },
                    top,
                    None,
                )
            }
        };
        let mut t = CharacteristicTrace {
            region: path.region,
            energy,
            zeta,
            eta_plus,
            samples: Vec::new(),
            kind,
        };
        let n = n_samples.max(2);
        t.samples = (0..n)
            .map(|i| {
                let e = top * (std::f64::consts::FRAC_PI_2 * i as f64 / (n - 1) as f64).sin();
                TraceSample {
                    eta: e,
                    phi: t.phi_at(e),
                    g: t.g(e, 0.0),
                }
            })
            .collect();
        t
    }

    /// Angle at depth `η′` on the branch with `sinφ′ ≥ 0`.
    pub fn phi_at(&self, eta: f64) -> f64 {
        match self.kind {
            TraceKind::Line { line } => {
                let l = line.l_sq_at(eta).max(0.0).sqrt();
                (line.eps * l).atan2(line.m)
            }
            TraceKind::Straight { phi } => phi,
        }
    }

    /// `∫_s^t dξ / sinφ′(ξ)` for `t ≥ s`.
    pub fn g(&self, t: f64, s: f64) -> f64 {
        match self.kind {
            TraceKind::Line { line } => {
                line.l_sq_at(s).max(0.0).sqrt() - line.l_sq_at(t).max(0.0).sqrt()
            }
            TraceKind::Straight { phi } => (t - s) / phi.sin(),
        }
    }
}
