//! Gauss–Legendre rules and composite/graded variants built from them.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Rule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (c + h * x, h * w))
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const CACHED: usize = 24;

/// Cached rule of order `n` (orders above the cache size are built on demand and leaked once).
pub fn gauss(n: usize) -> &'static Rule {
    static CACHE: OnceLock<Vec<Rule>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| (1..=CACHED).map(Rule::new).collect());
    if (1..=CACHED).contains(&n) {
        &cache[n - 1]
    } else {
        Box::leak(Box::new(Rule::new(n)))
    }
}

/// Clustering applied to the panel parameter of a composite rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Grade {
    None,
    Left,
    Right,
    Both,
}

fn grade_map(grade: Grade, t: f64) -> (f64, f64) {
    match grade {
        Grade::None => (t, 1.0),
        Grade::Both => (t * t * (3.0 - 2.0 * t), 6.0 * t * (1.0 - t)),
        Grade::Left => (t * t, 2.0 * t),
        Grade::Right => (1.0 - (1.0 - t) * (1.0 - t), 2.0 * (1.0 - t)),
    }
}

/// Composite rule on `[a, b]` with `panels` equal panels in a graded parameter.
///
/// The grading maps are polynomial of degree at most three, so the rule
/// integrates constants exactly whenever `order >= 2`.
pub fn composite(
    a: f64,
    b: f64,
    panels: usize,
    order: usize,
    grade: Grade,
) -> (Vec<f64>, Vec<f64>) {
    let rule = gauss(order);
    let mut x = Vec::with_capacity(panels * order);
    let mut w = Vec::with_capacity(panels * order);
    let len = b - a;
    for p in 0..panels {
        let t0 = p as f64 / panels as f64;
        let t1 = (p + 1) as f64 / panels as f64;
        for (t, wt) in rule.mapped(t0, t1) {
            let (s, ds) = grade_map(grade, t);
            x.push(a + len * s);
            w.push(len * ds * wt);
        }
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        for n in 1..=12 {
            let r = gauss(n);
            for k in 0..(2 * n) {
                let exact = if k % 2 == 0 {
                    2.0 / (k as f64 + 1.0)
                } else {
                    0.0
                };
                let got: f64 = r
                    .nodes
                    .iter()
                    .zip(&r.weights)
                    .map(|(x, w)| w * x.powi(k as i32))
                    .sum();
                assert!((got - exact).abs() < 1e-14, "n={n} k={k}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn large_order_is_built_on_demand() {
        let r = gauss(40);
        let s: f64 = r.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-13);
    }

    #[test]
    fn graded_composite_keeps_constants_and_resolves_sqrt() {
        for grade in [Grade::None, Grade::Left, Grade::Right, Grade::Both] {
            let (x, w) = composite(0.0, PI, 6, 5, grade);
            let s: f64 = w.iter().sum();
            assert!((s - PI).abs() < 1e-13);
            let sin2: f64 = x.iter().zip(&w).map(|(x, w)| w * x.sin().powi(2)).sum();
            assert!((sin2 - PI / 2.0).abs() < 1e-8);
        }
        let (x, w) = composite(0.0, 1.0, 8, 6, Grade::Both);
        let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.sqrt()).sum();
        assert!((got - 2.0 / 3.0).abs() < 1e-8);
    }
}
