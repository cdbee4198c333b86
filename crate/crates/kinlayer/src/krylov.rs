//! Restarted GMRES for nonsymmetric operators given as closures.

/// Outcome of [`gmres`].
#[derive(Clone, Debug)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Euclidean residual estimate after each inner step.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

/// Solves `A x = b` from `x0` with restart length `restart`.
///
/// `apply(v, out)` writes `A v` into `out`. Stops when `accept(x, r)` holds for the
/// true residual `r = b − A x`, checked at every restart and whenever the inner
/// residual estimate falls below `inner_tol`.
pub fn gmres<A, C>(
    apply: A,
    b: &[f64],
    x0: Vec<f64>,
    restart: usize,
    max_iter: usize,
    inner_tol: f64,
    mut accept: C,
) -> GmresOutcome
where
    A: Fn(&[f64], &mut [f64]),
    C: FnMut(&[f64], &[f64]) -> bool,
{
    let n = b.len();
    let m = restart.max(1);
    let mut x = x0;
    let mut r = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut residuals = Vec::new();
    let mut iterations = 0;
    loop {
        apply(&x, &mut tmp);
        for i in 0..n {
            r[i] = b[i] - tmp[i];
        }
        if accept(&x, &r) {
            return GmresOutcome {
                x,
                iterations,
                residuals,
                converged: true,
            };
        }
        if iterations >= max_iter {
            return GmresOutcome {
                x,
                iterations,
                residuals,
                converged: false,
            };
        }
        let beta = norm(&r);
        if beta == 0.0 {
            return GmresOutcome {
                x,
                iterations,
                residuals,
                converged: false,
            };
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && iterations < max_iter {
            let mut w = vec![0.0; n];
            apply(&v[k], &mut w);
            iterations += 1;
            for _ in 0..2 {
                for (j, vj) in v.iter().enumerate() {
                    let c = dot(&w, vj);
                    h[j][k] += c;
                    for (wi, vi) in w.iter_mut().zip(vj) {
                        *wi -= c * vi;
                    }
                }
            }
            h[k + 1][k] = norm(&w);
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            residuals.push(g[k + 1].abs());
            let hk1 = norm(&w);
            if hk1 > 0.0 {
                v.push(w.iter().map(|x| x / hk1).collect());
            }
            k += 1;
            if g[k].abs() < inner_tol || hk1 == 0.0 {
                break;
            }
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&v[j]) {
                *xi += yj * vi;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
