//! Small Lagrange interpolation kernels used along characteristics and rays.

/// Lagrange basis weights for nodes `xs` evaluated at `x`.
pub fn lagrange_weights(xs: &[f64], x: f64, out: &mut [f64]) {
    let n = xs.len();
    for i in 0..n {
        let mut w = 1.0;
        for j in 0..n {
            if j != i {
                w *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        out[i] = w;
    }
}

/// Stencil on a uniform periodic grid `x_j = x0 + j*h`, `j = 0..n`.
///
/// Returns the index of the first stencil node (may be negative or exceed `n`;
/// callers wrap with `rem_euclid`) and fills `out` with `out.len()` weights.
pub fn periodic_stencil(x0: f64, h: f64, x: f64, out: &mut [f64]) -> isize {
    let m = out.len();
    let s = (x - x0) / h;
    let base = s.floor() as isize - (m as isize - 1) / 2;
    let t = s - base as f64;
    for i in 0..m {
        let mut w = 1.0;
        for j in 0..m {
            if j != i {
                w *= (t - j as f64) / (i as f64 - j as f64);
            }
        }
        out[i] = w;
    }
    base
}

/// First index of an `m`-point stencil around `x` in the sorted array `xs`, clamped to the array.
pub fn bracket_stencil(xs: &[f64], x: f64, m: usize) -> usize {
    let n = xs.len();
    let k = xs.partition_point(|&v| v <= x);
    let start = k as isize - (m as isize) / 2;
    start.clamp(0, (n - m) as isize) as usize
}

/// Linear interpolation on a sorted grid with constant extension outside.
pub fn linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = xs.partition_point(|&v| v <= x).clamp(1, n - 1);
    let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    ys[k - 1] + t * (ys[k] - ys[k - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lagrange_reproduces_cubics() {
        let xs = [0.1, 0.4, 0.45, 1.0];
        let mut w = [0.0; 4];
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x * x;
        lagrange_weights(&xs, 0.7, &mut w);
        let v: f64 = xs.iter().zip(&w).map(|(x, w)| w * f(*x)).sum();
        assert!((v - f(0.7)).abs() < 1e-13);
    }

    #[test]
    fn periodic_stencil_is_centered_and_exact_for_trig() {
        let n = 32;
        let h = std::f64::consts::TAU / n as f64;
        let mut w = [0.0; 6];
        let x = 6.2;
        let base = periodic_stencil(0.0, h, x, &mut w);
        let v: f64 = (0..6)
            .map(|i| {
                let j = (base + i as isize).rem_euclid(n as isize) as f64;
                w[i] * (j * h).cos()
            })
            .sum();
        assert!((v - x.cos()).abs() < 1e-6);
        let s: f64 = w.iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bracket_clamps() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(bracket_stencil(&xs, -1.0, 4), 0);
        assert_eq!(bracket_stencil(&xs, 9.5, 4), 6);
        assert_eq!(bracket_stencil(&xs, 4.5, 4), 3);
    }
}
