use super::*;
use approx::assert_abs_diff_eq;
use std::f64::consts::{FRAC_PI_4, PI};

fn disk(eps: f64) -> TransportConfig {
    TransportConfig::new(eps, DomainSpec::circle(1.0).unwrap()).with_grid(16, 32, 32)
}

#[test]
fn angular_moments_are_exact() {
    let m = angular_moments(64);
    for (v, e) in m.iter().zip([TAU, 0.0, 0.0, PI, 0.0, PI]) {
        assert_abs_diff_eq!(*v, e, epsilon = 1e-12);
    }
}

#[test]
fn zero_data_gives_zero() {
    let mut cfg = disk(0.2);
    cfg.g = GSpec::Zero;
    let f = solve(&cfg).unwrap();
    assert!(f.u.iter().all(|v| *v == 0.0));
    assert_eq!(f.iterations, 0);
}

/// `u = x₁ − εw₁` solves the problem with `h = −εw₁ + (επ/4)n₁`.
fn linear_problem(cfg: &TransportConfig) -> TransportField {
    let eps = cfg.eps;
    let inflow = move |tau: f64, w: [f64; 2]| -eps * w[0] + eps * FRAC_PI_4 * tau.cos();
    solve_problem(
        cfg,
        &Problem {
            inflow: &inflow,
            source: None,
        },
    )
    .unwrap()
}

#[test]
fn reproduces_an_exact_solution() {
    let cfg = disk(0.2);
    let f = linear_problem(&cfg);
    assert!(f.converged);
    for (i, x) in f.grid.nodes.iter().enumerate() {
        assert!(
            (f.ubar[i] - x[0]).abs() < 1e-3,
            "node {i}: {} vs {}",
            f.ubar[i],
            x[0]
        );
        for k in 0..f.n_dir() {
            let exact = x[0] - cfg.eps * f.velocity(k)[0];
            assert!(
                (f.at(i, k) - exact).abs() < 1e-3,
                "{i} {k}: {} {exact}",
                f.at(i, k)
            );
        }
    }
    assert!(f.compatibility.abs() < 1e-4);
    assert!(f.mass.abs() < 1e-9 * PI);
    for (j, b) in f.grid.boundary.iter().enumerate() {
        let exact = b.normal[0] * (1.0 - cfg.eps * FRAC_PI_4);
        assert!((diffusive_reflect(&f, j) - exact).abs() < 1e-3);
    }
}

#[test]
fn average_matches_the_angular_quadrature() {
    let f = solve(&disk(0.1)).unwrap();
    let nd = f.n_dir();
    for (i, ub) in f.ubar.iter().enumerate() {
        let q: f64 = (0..nd).map(|k| f.at(i, k)).sum::<f64>() / nd as f64;
        assert!((q - ub).abs() < 1e-12);
    }
    assert!(f.mass.abs() < 1e-9 * PI);
    assert!(f.max_principle <= 1.05, "{}", f.max_principle);
}

#[test]
fn accelerators_agree() {
    let base = solve(&disk(0.2)).unwrap();
    for accel in [Accel::Anderson { depth: 5 }, Accel::None] {
        let mut cfg = disk(0.2);
        cfg.accel = accel;
        cfg.max_iter = 20_000;
        let f = solve(&cfg).unwrap();
        let d = f
            .ubar
            .iter()
            .zip(&base.ubar)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(d < 1e-7, "{accel:?}: {d}");
    }
}

#[test]
fn final_projection_only_shifts_the_mean() {
    let base = solve(&disk(0.2)).unwrap();
    let mut cfg = disk(0.2);
    cfg.projection = Projection::Final;
    let f = solve(&cfg).unwrap();
    let d = f
        .ubar
        .iter()
        .zip(&base.ubar)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(d < 1e-6, "{d}");
    assert!(f.drift.is_finite());
}

#[test]
fn rotated_data_gives_rotated_solution() {
    let mut cfg = disk(0.2);
    let mut rot = cfg.clone();
    let dt = TAU / cfg.n_theta as f64;
    cfg.g = GSpec::LegendreFlux {
        a1: 1.0,
        b1: 0.0,
        a2: 0.0,
    };
    rot.g = GSpec::LegendreFlux {
        a1: dt.cos(),
        b1: dt.sin(),
        a2: 0.0,
    };
    let a = solve(&cfg).unwrap();
    let b = solve(&rot).unwrap();
    let nt = cfg.n_theta;
    for i in 0..cfg.n_r {
        for j in 0..nt {
            let (p, q) = (a.ubar[i * nt + j], b.ubar[i * nt + (j + 1) % nt]);
            assert!((p - q).abs() < 1e-8, "{i} {j}: {p} {q}");
        }
    }
}

#[test]
fn reflection_weights_reproduce_constants() {
    let mut f = solve(&disk(0.2)).unwrap();
    f.u.iter_mut().for_each(|v| *v = 3.0);
    assert_abs_diff_eq!(diffusive_reflect(&f, 5), 3.0, epsilon = 1e-13);
    // odd in the tangential component
    let first = (f.grid.n_r - 1) * f.grid.n_theta;
    let t = [-f.grid.boundary[5].normal[1], f.grid.boundary[5].normal[0]];
    let nd = f.n_dir();
    for k in 0..nd {
        let w = f.velocity(k);
        f.u[(first + 5) * nd + k] = 1.0 + (w[0] * t[0] + w[1] * t[1]);
    }
    assert_abs_diff_eq!(diffusive_reflect(&f, 5), 1.0, epsilon = 1e-12);
}

#[test]
fn energy_identity_improves_under_refinement() {
    let source = |x: [f64; 2], w: [f64; 2]| x[0] + w[0] * x[1];
    let inflow = |_: f64, _: [f64; 2]| 0.0;
    let p = Problem {
        inflow: &inflow,
        source: Some(&source),
    };
    let defect = |n: usize| {
        let cfg =
            TransportConfig::new(0.2, DomainSpec::circle(1.0).unwrap()).with_grid(n, 2 * n, 2 * n);
        let f = solve_problem(&cfg, &p).unwrap();
        energy_identity_defect(&f, Some(&source)).abs()
    };
    let (a, b) = (defect(8), defect(16));
    assert!(b < a, "{a} {b}");
}

#[test]
fn rejects_bad_configurations() {
    let mut cfg = disk(0.2);
    cfg.n_dir = 31;
    assert!(matches!(solve(&cfg), Err(Error::InvalidConfig(_))));
    cfg.n_dir = 32;
    cfg.eps = 1.5;
    assert!(solve(&cfg).is_err());
}
