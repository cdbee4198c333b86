use super::*;
use approx::assert_abs_diff_eq;
use std::f64::consts::{FRAC_PI_2, PI};

fn small(eps: f64) -> MilneConfig {
    let mut c = MilneConfig::new(eps, 1.0);
    c.n_phi = 32;
    c
}

#[test]
fn potential_closed_forms() {
    let c = MilneConfig::new(0.01, 1.0);
    assert_eq!(c.potential(0.0).unwrap(), 0.0);
    assert_abs_diff_eq!(
        c.potential(10.0).unwrap(),
        (10.0_f64 / 9.0).ln(),
        epsilon = 1e-14
    );
    let d = MilneConfig::new(0.04, 2.0);
    assert_abs_diff_eq!(d.length, 5.0, epsilon = 1e-14);
    assert_abs_diff_eq!(
        (-d.potential(d.length).unwrap()).exp(),
        0.9,
        epsilon = 1e-14
    );
    assert!(c.clone().with_mode(Mode::Classical).potential(5.0).unwrap() == 0.0);
    assert!(MilneConfig::new(0.5, 0.1).potential(1.0).is_err());
}

#[test]
fn kinetic_distance_values() {
    let c = MilneConfig::new(0.01, 1.0);
    for p in [0.3, -1.2, 2.9] {
        assert_abs_diff_eq!(c.kinetic_distance(0.0, p), p.sin().abs(), epsilon = 1e-15);
    }
    assert_eq!(c.kinetic_distance(0.0, 0.0), 0.0);
    assert_abs_diff_eq!(
        c.kinetic_distance(10.0, 0.0),
        (1.0_f64 - 0.81).sqrt(),
        epsilon = 1e-14
    );
}

#[test]
fn config_validation() {
    assert!(MilneConfig::new(0.1, 1.0).validate().is_ok());
    assert!(MilneConfig::new(1.5, 1.0).validate().is_err());
    assert!(MilneConfig::new(0.1, 1.0)
        .with_grid(17, 30)
        .validate()
        .is_err());
    assert!(MilneConfig::new(0.5, 0.5).validate().is_err());
    let o = MilneConfig::new(0.1, 1.0).with_length(2.0);
    assert!(o.length_overridden);
}

#[test]
fn region_classification_and_turning_point() {
    let c = MilneConfig::new(0.1, 1.0);
    assert_eq!(c.trace(1.0, 0.5).region, Region::I);
    let g = c.trace(0.0, 0.0);
    assert_eq!(g.eta_plus, Some(0.0));
    // E = 0.95 from η = 0.2 (e^{−V} = 0.98)
    let phi = -(0.95_f64 / 0.98).acos();
    let t = c.trace(0.2, phi);
    assert_eq!(t.region, Region::III);
    let ep = t.eta_plus.unwrap();
    assert_abs_diff_eq!(ep, 0.5, epsilon = 1e-12);
    assert_abs_diff_eq!((-c.potential(ep).unwrap()).exp(), 0.95, epsilon = 1e-14);
    // steep downward direction reaches η = L
    assert_eq!(c.trace(0.2, -FRAC_PI_2).region, Region::II);
    assert_eq!(
        c.clone()
            .with_mode(Mode::Classical)
            .trace(0.2, -0.01)
            .region,
        Region::II
    );
}

#[test]
fn trace_invariants() {
    for mode in [Mode::Corrected, Mode::Classical] {
        let c = MilneConfig::new(0.05, 1.3).with_mode(mode);
        let g = c.geometry();
        for &(e, p) in &[
            (0.0, 0.4),
            (1.0, -0.3),
            (3.0, -2.9),
            (4.0, 1.0),
            (2.0, -0.05),
        ] {
            let t = c.trace(e, p);
            for s in &t.samples {
                let energy = g.weight(s.eta) * s.phi.cos();
                if mode == Mode::Corrected {
                    assert_abs_diff_eq!(energy, t.energy, epsilon = 1e-10);
                    assert_abs_diff_eq!(g.zeta(s.eta, s.phi), t.zeta, epsilon = 1e-10);
                }
                assert!(s.phi.sin() >= -1e-15);
            }
            for w in t.samples.windows(2) {
                assert!(t.g(w[1].eta, w[0].eta) >= (w[1].eta - w[0].eta) - 1e-12);
            }
        }
    }
}

/// `G(t, s)` against direct quadrature of `1/sinφ′`, using `u = √(η⁺ − ξ)` near the turn.
#[test]
fn optical_depth_matches_quadrature() {
    let c = MilneConfig::new(0.1, 1.0);
    let phi = -(0.95_f64 / 0.98).acos();
    let t = c.trace(0.2, phi);
    let ep = t.eta_plus.unwrap();
    let inv_sin = |xi: f64| 1.0 / t.phi_at(xi).sin();
    // G(η⁺, 0) = ∫₀^{η⁺} dξ / sinφ′ = ∫₀^{√η⁺} 2u / sinφ′(η⁺ − u²) du
    let umax = ep.sqrt();
    let (x, w) = crate::quad::composite(0.0, umax, 40, 10, crate::quad::Grade::None);
    let num: f64 = x
        .iter()
        .zip(&w)
        .map(|(u, w)| {
            if *u > 0.0 {
                w * 2.0 * u * inv_sin(ep - u * u)
            } else {
                0.0
            }
        })
        .sum();
    assert_abs_diff_eq!(t.g(ep, 0.0), num, epsilon = 1e-9);
    let (x, w) = crate::quad::composite(0.1, 0.3, 8, 10, crate::quad::Grade::None);
    let mid: f64 = x.iter().zip(&w).map(|(xi, w)| w * inv_sin(*xi)).sum();
    assert_abs_diff_eq!(t.g(0.3, 0.1), mid, epsilon = 1e-10);
}

#[test]
fn constants_and_zero_are_exact() {
    for mode in [Mode::Corrected, Mode::Classical] {
        let cfg = small(0.1).with_mode(mode);
        let op = MilneOperator::new(&cfg).unwrap();
        let f = op.solve_inflow(&|_| 2.5, None).unwrap();
        assert_eq!(f.meta.iterations, 1);
        assert!(f.f.iter().all(|v| (v - 2.5).abs() < 1e-12));
        assert_abs_diff_eq!(f.f_l, 2.5, epsilon = 1e-12);
        let z = op.solve_inflow(&|_| 0.0, None).unwrap();
        assert!(z.f.iter().all(|v| *v == 0.0));
        let u = upwind_solve(&cfg, &|_| 2.5, None).unwrap();
        assert!(u.f.iter().all(|v| (v - 2.5).abs() < 1e-12));
    }
}

#[test]
fn inflow_data_is_reproduced_at_the_wall() {
    let cfg = MilneConfig::new(0.01, 1.0);
    let op = MilneOperator::new(&cfg).unwrap();
    let f = op.mild_apply(&|p: f64| p.sin(), None, &vec![0.0; cfg.n_eta]);
    for (j, p) in cfg.phi_grid().iter().enumerate() {
        if p.sin() > 0.0 {
            assert_abs_diff_eq!(f[j], p.sin(), epsilon = 1e-14);
        }
    }
}

#[test]
fn compatibility_defects() {
    let cfg = MilneConfig::new(0.1, 1.0);
    assert_eq!(compatibility_defect(&cfg, &|_| 0.0, None), 0.0);
    assert_abs_diff_eq!(
        compatibility_defect(&cfg, &|p: f64| p.sin(), None),
        FRAC_PI_2,
        epsilon = 1e-12
    );
    assert_abs_diff_eq!(
        compatibility_defect(&cfg, &|p: f64| p.sin() * p.cos(), None),
        0.0,
        epsilon = 1e-13
    );
    let op = MilneOperator::new(&small(0.1)).unwrap();
    assert!(matches!(
        op.solve_diffusive(&|p: f64| p.sin(), None),
        Err(crate::Error::Incompatible { .. })
    ));
}

#[test]
fn limit_value_moments() {
    let cfg = small(0.1);
    let eta = cfg.eta_grid();
    let phi = cfg.phi_grid();
    let make = |g: &dyn Fn(f64) -> f64| {
        let f: Vec<f64> = eta.iter().flat_map(|_| phi.iter().map(|p| g(*p))).collect();
        MilneField::from_grid(&cfg, eta.clone(), phi.clone(), f, SolveMeta::default())
    };
    assert_abs_diff_eq!(make(&|_| 3.0).f_l, 3.0, epsilon = 1e-14);
    assert_abs_diff_eq!(make(&|p| p.cos()).f_l, 0.0, epsilon = 1e-14);
    let den: f64 = phi.iter().map(|p| p.sin().powi(2)).sum::<f64>() * (2.0 * PI / phi.len() as f64);
    assert_abs_diff_eq!(den, PI, epsilon = 1e-12);
}

#[test]
fn compatible_data_is_normalized() {
    for mode in [Mode::Corrected, Mode::Classical] {
        let cfg = MilneConfig::new(0.05, 1.0).with_mode(mode);
        let op = MilneOperator::new(&cfg).unwrap();
        let f = op
            .solve_diffusive(&|p: f64| p.sin() * p.cos(), None)
            .unwrap();
        let p0 = f.meta.normalization.unwrap();
        assert!(p0.abs() < 100.0 * cfg.tol, "{mode:?}: P[f](0) = {p0:e}");
        assert!(f.reflection_residual() < 10.0 * cfg.tol);
        assert!(decay_rate(&f).rate().unwrap() > 0.0);
    }
}

#[test]
fn decay_of_constant_is_exact() {
    let op = MilneOperator::new(&small(0.1)).unwrap();
    let f = op.solve_inflow(&|_| 1.0, None).unwrap();
    assert_eq!(decay_rate(&f), Decay::Exact);
    let d = weighted_derivatives(op.config(), &f, 0.5);
    assert!(d.sup_weighted_eta < 1e-9 && d.sup_weighted_phi < 1e-9);
}

#[test]
fn circle_has_no_tangential_derivative() {
    let domain = crate::geometry::DomainSpec::circle(1.0).unwrap();
    let cfg = small(0.1);
    let fam = TangentialFamily {
        h: &|_, p: f64| p.sin() * p.cos() + 0.3 * p.cos(),
        s: None,
    };
    let r = tangential_derivative(&cfg, &domain, &fam, 0.05, 0.25).unwrap();
    assert_eq!(r.sup_difference_path, 0.0);
    assert!(r.sup_direct_path < 1e-12);
}

#[test]
fn curvature_refinement_is_idempotent_and_uniform_in_tau() {
    let d = crate::geometry::DomainSpec::ellipse(2.0, 1.0).unwrap();
    let base = MilneConfig::new(0.1, 1.0);
    let a = config_at(&base, &d, 0.4);
    assert_eq!(a.resolution.curvature_refine, 2);
    assert_eq!(a.n_eta, 2 * (base.n_eta - 1) + 1);
    assert_eq!(a.resolution.wedge_panels, 2 * base.resolution.wedge_panels);
    let b = config_at(&a, &d, 2.0);
    assert_eq!(
        (b.n_eta, b.resolution.wedge_panels),
        (a.n_eta, a.resolution.wedge_panels)
    );
    // the unit disk at this ε keeps the base grid, even after an ellipse pass
    let disk = crate::geometry::DomainSpec::circle(1.0).unwrap();
    let c = config_at(&a, &disk, 0.4);
    assert_eq!(
        (c.n_eta, c.resolution.wedge_panels),
        (base.n_eta, base.resolution.wedge_panels)
    );
}
