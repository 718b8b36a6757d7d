use std::sync::Arc;

use hymlab::base_manifold::*;
use hymlab::bundle_geometry::*;
use hymlab::hym_flow::*;
use hymlab::linalg_hermitian::*;

fn cp1(n: usize, degrees: Vec<i32>) -> Bundle {
    Bundle::new(Arc::new(build_cp1(n).unwrap()), BundlePresentation::Cp1Split { degrees }).unwrap()
}

fn params(n: usize) -> CatalogParams {
    CatalogParams { n, ..Default::default() }
}

#[test]
fn rank_one_flow_is_scalar_heat() {
    // H = e^{-phi} on a trivial line bundle: phi_t = 2 laplacian(phi), step for step.
    let b = cp1(16, vec![0]);
    let phi = sample(&b.mesh, |c| {
        let x = unit_pos(c);
        (3.0 * x[0]).sin() + x[2]
    });
    let h = MetricField { h: phi.iter().map(|p| CMat::from_real_diag(&[(-p).exp()])).collect() };
    let dt = 0.4 * b.mesh.heat_dt_bound();
    let mut s = FlowState::new(&b, h, false).unwrap();
    let steps = 60;
    for _ in 0..steps {
        s = flow_step(&b, &s, dt).unwrap();
    }
    let heat = scalar_heat_run(&b.mesh, &phi, steps as f64 * dt, dt).unwrap();
    for (hi, p) in s.h.h.iter().zip(&heat.final_u) {
        assert!((-hi[(0, 0)].re.ln() - p).abs() < 1e-11);
    }
}

#[test]
fn conformal_family_stays_conformal() {
    // e^f K with K flat and constant: theta = -laplacian(f) Id, so f solves the heat equation.
    let b = cp1(16, vec![0, 0]);
    let k = CMat::from_rows(&[vec![C64::new(2.0, 0.0), C64::new(0.3, -0.2)], vec![C64::new(0.3, 0.2), C64::new(0.7, 0.0)]]);
    let f = sample(&b.mesh, |c| 0.8 * unit_pos(c)[1] * unit_pos(c)[0]);
    let h = MetricField { h: f.iter().map(|v| k.scale_re(v.exp())).collect() };
    let dt = 0.4 * b.mesh.heat_dt_bound();
    let mut s = FlowState::new(&b, h, false).unwrap();
    assert!(s.lambda.abs() < 1e-12);
    for _ in 0..40 {
        s = flow_step(&b, &s, dt).unwrap();
    }
    let heat = scalar_heat_run(&b.mesh, &f, 40.0 * dt, dt).unwrap();
    for (hi, fi) in s.h.h.iter().zip(&heat.final_u) {
        assert!((hi - &k.scale_re(fi.exp())).max_abs() < 1e-10);
    }
}

#[test]
fn einstein_metrics_are_fixed_points() {
    let b = cp1(16, vec![0, 0, 0]);
    let h = MetricField { h: vec![CMat::from_real_diag(&[1.0, 2.0, 0.5]); b.len()] };
    let s = FlowState::new(&b, h.clone(), true).unwrap();
    let n = flow_step(&b, &s, stable_dt(&b, &s)).unwrap();
    for (a, c) in n.h.h.iter().zip(&h.h) {
        assert!((a - c).max_abs() < 1e-12);
    }
    assert!(energy_dtheta(&b, &s) < 1e-20);
}

#[test]
fn trace_normalization_and_conservation() {
    let e = catalog_bundle("CP1:O(1)⊕O(-1)", &params(16)).unwrap();
    let b = &e.bundle;
    let mut s = FlowState::new(b, e.h0.clone(), true).unwrap();
    for p in s.phi() {
        assert!(p.trace().norm() < 1e-8);
    }
    let (det, tr) = monitor_conservation(b, &s);
    assert!(det == 0.0 && tr < 1e-14);
    let dt = stable_dt(b, &s);
    for _ in 0..100 {
        s = flow_step(b, &s, dt).unwrap();
        let (det, tr) = monitor_conservation(b, &s);
        assert!(det < 1e-6 && tr < 1e-8, "{det} {tr}");
    }
}

#[test]
fn unnormalized_rank_one_determinant() {
    // Rank one without normalization: log det(H0^{-1} H) = -2 integral of tr Phi in time.
    let e = catalog_bundle("CP1:O(1)", &CatalogParams { n: 16, amplitude: 1.0, ..Default::default() }).unwrap();
    let b = &e.bundle;
    let mut s = FlowState::new(b, e.h0.clone(), false).unwrap();
    let dt = stable_dt(b, &s);
    let mut acc = vec![0.0; b.len()];
    for _ in 0..50 {
        for (a, p) in acc.iter_mut().zip(s.phi()) {
            *a += -2.0 * dt * p.trace().re;
        }
        s = flow_step(b, &s, dt).unwrap();
    }
    let (det, _) = monitor_conservation(b, &s);
    let expect = acc.iter().map(|a| a.exp_m1().abs()).fold(0.0, f64::max);
    assert!(det > 1e-3);
    assert!((det - expect).abs() < 1e-10 * (1.0 + expect));
}

#[test]
fn maximum_principles_and_energy_bound() {
    let e = catalog_bundle("CP1:O(1)⊕O(-1)", &params(16)).unwrap();
    let b = &e.bundle;
    let mut s = FlowState::new(b, e.h0.clone(), true).unwrap();
    let half_l2 = 0.5 * theta_l2_sq(b, &s.h, &s.theta);
    let dt = stable_dt(b, &s);
    let sup_theta = |s: &FlowState| b.norm_sq_field(&s.theta, &s.h).into_iter().fold(0.0, f64::max);
    let mut prev = (s.sup_phi_sq, sup_theta(&s));
    for _ in 0..300 {
        s = flow_step(b, &s, dt).unwrap();
        let cur = (s.sup_phi_sq, sup_theta(&s));
        assert!(cur.0 <= prev.0 * (1.0 + 1e-8) + 1e-8);
        assert!(cur.1 <= prev.1 * (1.0 + 1e-8) + 1e-8);
        prev = cur;
    }
    assert!(s.energy_integral <= 1.05 * half_l2);
    assert!(s.energy_integral > 0.0);
}

#[test]
fn short_run_is_monotone() {
    let cfg = FlowConfig { t_end: 0.05, record_every: 5, ..Default::default() };
    let (series, _, _) = run_flow("CP1:O(1)⊕O(-1)", &params(16), &cfg).unwrap();
    assert!(series.aborted.is_none());
    assert_eq!(series.monotonicity(1e-8).total(), 0);
    for w in series.rows.windows(2) {
        assert!(w[1].t > w[0].t);
        assert!(w[1].energy_integral >= w[0].energy_integral);
    }
    let (u, l) = partial_sum_targets(&series.targets);
    for row in &series.rows {
        assert!(row.stats.m_u[0] >= u[0] - 1e-2 && row.stats.m_l[0] <= l[0] + 1e-2);
    }
}

#[test]
fn flow_reaches_the_sandwich() {
    let cfg = FlowConfig { t_end: 1.0, record_every: 50, stop_fraction: Some(0.05), ..Default::default() };
    let (series, state, b) = run_flow("CP1:O(1)⊕O(-1)", &params(16), &cfg).unwrap();
    let spec = b.spectrum_field(&state.theta, &state.h).unwrap();
    let delta = 0.1 * 2.0 * std::f64::consts::PI / b.mesh.volume();
    let t = &series.targets;
    assert_eq!(sandwich_violations(&spec, t[1], t[0], delta), 0);
    assert!(series.trend_last_quarter(|r| r.energy) < 0.0);
}

#[test]
fn rejects_bad_steps() {
    let b = cp1(16, vec![1, 0]);
    let s = FlowState::new(&b, fubini_study_metric(&b).unwrap(), false).unwrap();
    assert!(matches!(flow_step(&b, &s, 3.0 * b.mesh.heat_dt_bound()), Err(FlowError::StepTooLarge { .. })));
    assert!(matches!(flow_step(&b, &s, -1.0), Err(FlowError::StepTooLarge { .. })));
}

#[test]
fn comparison_trivial_cases() {
    let e = catalog_bundle("CP1:O(1)⊕O(-1)", &params(16)).unwrap();
    let b = &e.bundle;
    let same = two_solution_compare(b, e.h0.clone(), b, e.h0.clone(), 0.01, 5).unwrap();
    for r in &same.rows {
        assert!(r.sup_tr.abs() < 1e-12 && r.int_a_sq < 1e-20 && r.int_theta_diff_sq < 1e-20);
        assert_eq!(r.bound_violations, 0);
    }
    let c = 2.5;
    let scaled = MetricField { h: e.h0.h.iter().map(|h| h.scale_re(c)).collect() };
    let sc = two_solution_compare(b, e.h0.clone(), b, scaled, 0.01, 5).unwrap();
    let expect = 2.0 * (c + 1.0 / c) - 4.0;
    for r in &sc.rows {
        assert!((r.sup_tr - expect).abs() < 1e-10);
        assert!(r.int_a_sq < 1e-18 && r.int_theta_diff_sq < 1e-18);
    }
    let rebuilt = cp1(16, vec![1, -1]);
    assert!(two_solution_compare(b, e.h0.clone(), &rebuilt, e.h0.clone(), 0.01, 5).is_ok());
    for other in [cp1(8, vec![1, -1]), cp1(16, vec![2, -2])] {
        let h = fubini_study_metric(&other).unwrap();
        assert!(matches!(two_solution_compare(b, e.h0.clone(), &other, h, 0.01, 5), Err(FlowError::PresentationMismatch)));
    }
}

#[test]
fn comparison_of_generic_pair() {
    let e1 = catalog_bundle("CP1:O(1)⊕O(-1)", &params(16)).unwrap();
    let e2 = catalog_bundle("CP1:O(1)⊕O(-1)", &CatalogParams { n: 16, seed: 9, ..Default::default() }).unwrap();
    let cmp = two_solution_compare(&e1.bundle, e1.h0, &e1.bundle, e2.h0, 0.1, 10).unwrap();
    assert_eq!(cmp.sup_tr_increases(1e-8), 0);
    assert!(cmp.rows.iter().all(|r| r.bound_violations == 0 && r.cond_violations == 0));
    let first = &cmp.rows[0];
    let last = cmp.rows.last().unwrap();
    assert!(last.int_theta_diff_sq < first.int_theta_diff_sq && last.sup_tr < first.sup_tr);
}

#[test]
fn negativize_rough_negative_line_bundle() {
    let e = catalog_bundle("CP1:O(-1)", &CatalogParams { n: 16, amplitude: 6.0, ..Default::default() }).unwrap();
    let b = &e.bundle;
    let spec = b.spectrum_field(&b.mean_curvature(&e.h0), &e.h0).unwrap();
    assert!(sup_lambda_u(&spec) > 0.0 && spec.stats.m_u[0] < 0.0);
    let h = conformal_negativize(b, &e.h0).unwrap();
    let spec = b.spectrum_field(&b.mean_curvature(&h), &h).unwrap();
    assert!(sup_lambda_u(&spec) < 0.0);
    // Already negative input is returned unchanged.
    let again = conformal_negativize(b, &h).unwrap();
    assert_eq!(again, h);
}

#[test]
fn positivize_through_the_dual() {
    let e = catalog_bundle("CP1:O(1)", &CatalogParams { n: 16, amplitude: 6.0, ..Default::default() }).unwrap();
    let b = &e.bundle;
    let spec = b.spectrum_field(&b.mean_curvature(&e.h0), &e.h0).unwrap();
    assert!(inf_lambda_l(&spec) < 0.0);
    let h = conformal_positivize(b, &e.h0).unwrap();
    let spec = b.spectrum_field(&b.mean_curvature(&h), &h).unwrap();
    assert!(inf_lambda_l(&spec) > 0.0);
    let split = catalog_bundle("CP1:O(1)⊕O(-1)", &params(16)).unwrap();
    assert!(matches!(conformal_negativize(&split.bundle, &split.h0), Err(FlowError::Infeasible(_))));
}
