//! Third-order truncated Taylor arithmetic, enough for `r, r′, r″, r‴`.

use std::ops::{Add, Mul, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet(pub [f64; 4]);

impl Jet {
    pub fn var(x: f64) -> Self {
        Jet([x, 1.0, 0.0, 0.0])
    }

    pub fn constant(c: f64) -> Self {
        Jet([c, 0.0, 0.0, 0.0])
    }

    pub fn scale(self, s: f64) -> Self {
        let [a, b, c, d] = self.0;
        Jet([s * a, s * b, s * c, s * d])
    }

    /// Composition with a scalar function given its value and first three derivatives at `self.0[0]`.
    fn compose(self, g: [f64; 4]) -> Self {
        let [_, u1, u2, u3] = self.0;
        Jet([
            g[0],
            g[1] * u1,
            g[2] * u1 * u1 + g[1] * u2,
            g[3] * u1 * u1 * u1 + 3.0 * g[2] * u1 * u2 + g[1] * u3,
        ])
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.0[0].sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.0[0].sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn powf(self, p: f64) -> Self {
        let x = self.0[0];
        self.compose([
            x.powf(p),
            p * x.powf(p - 1.0),
            p * (p - 1.0) * x.powf(p - 2.0),
            p * (p - 1.0) * (p - 2.0) * x.powf(p - 3.0),
        ])
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let (a, b) = (self.0, o.0);
        Jet([a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]])
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        let (a, b) = (self.0, o.0);
        Jet([a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]])
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let (a, b) = (self.0, o.0);
        Jet([
            a[0] * b[0],
            a[1] * b[0] + a[0] * b[1],
            a[2] * b[0] + 2.0 * a[1] * b[1] + a[0] * b[2],
            a[3] * b[0] + 3.0 * a[2] * b[1] + 3.0 * a[1] * b[2] + a[0] * b[3],
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_closed_forms() {
        let x = 0.7;
        let j = Jet::var(x);
        let f = (j * j).sin() * j.cos().powf(-0.5);
        // finite-difference oracle on the value channel
        let val = |t: f64| (t * t).sin() * t.cos().powf(-0.5);
        let h = 1e-3;
        let d1 = (val(x + h) - val(x - h)) / (2.0 * h);
        let d2 = (val(x + h) - 2.0 * val(x) + val(x - h)) / (h * h);
        let d3 = (val(x + 2.0 * h) - 2.0 * val(x + h) + 2.0 * val(x - h) - val(x - 2.0 * h))
            / (2.0 * h * h * h);
        assert!((f.0[0] - val(x)).abs() < 1e-14);
        assert!((f.0[1] - d1).abs() < 1e-5);
        assert!((f.0[2] - d2).abs() < 1e-4);
        assert!((f.0[3] - d3).abs() < 1e-3);
    }
}
