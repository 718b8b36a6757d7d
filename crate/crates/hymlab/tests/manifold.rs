use std::f64::consts::PI;

use hymlab::base_manifold::*;
use hymlab::linalg_hermitian::C64;
use proptest::prelude::*;

fn torus(n: usize) -> BaseManifold {
    build_torus(C64::new(0.0, 1.0), n).unwrap()
}

fn sup(f: &[f64]) -> f64 {
    f.iter().cloned().fold(f64::MIN, f64::max)
}

fn inf(f: &[f64]) -> f64 {
    f.iter().cloned().fold(f64::MAX, f64::min)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Eigenvalue of minus the discrete operator on cos(2 pi x) with spacing h.
fn kappa(h: f64) -> f64 {
    (1.0 - (2.0 * PI * h).cos()) / (h * h)
}

#[test]
fn volumes() {
    for n in [16, 32, 64] {
        let m = build_cp1(n).unwrap();
        assert!((m.volume() - PI).abs() < 0.01 * PI);
        assert!((integrate(&m, &vec![1.0; m.len()]).unwrap() - m.volume()).abs() < 1e-12);
    }
    let t = torus(32);
    assert!((t.volume() - 1.0).abs() < 1e-15);
    assert!((integrate(&t, &vec![1.0; t.len()]).unwrap() - 1.0).abs() < 1e-13);
    let sheared = build_torus(C64::new(0.5, 0.8), 16).unwrap();
    assert!((integrate(&sheared, &vec![1.0; sheared.len()]).unwrap() - 0.8).abs() < 1e-13);
}

#[test]
fn construction_errors() {
    assert_eq!(build_cp1(4).unwrap_err(), ManifoldError::GridTooCoarse(4));
    assert!(matches!(build_torus(C64::new(0.0, -1.0), 16), Err(ManifoldError::InvalidModulus(_))));
    assert!(matches!(build_torus(C64::new(0.0, 1.0), 4), Err(ManifoldError::GridTooCoarse(4))));
    let m = torus(16);
    assert!(matches!(laplacian(&m, &[1.0; 3]), Err(ManifoldError::FieldLength { .. })));
    assert!(matches!(poisson_solve(&m, &vec![1.0; m.len()]), Err(ManifoldError::NonZeroMean(_))));
}

#[test]
fn torus_fourier_eigenvalue() {
    for n in [16, 32, 64] {
        let m = torus(n);
        let f = sample(&m, |c| (2.0 * PI * c.pos[0]).cos());
        let l = laplacian(&m, &f).unwrap();
        let k = kappa(1.0 / n as f64);
        for (a, b) in l.iter().zip(&f) {
            assert!((a + k * b).abs() < 1e-9);
        }
    }
    // Discrete eigenvalue approaches 2 pi^2 at second order.
    let e: Vec<f64> = [16, 32, 64].iter().map(|&n| (kappa(1.0 / n as f64) - 2.0 * PI * PI).abs()).collect();
    assert!((e[0] / e[1] - 4.0).abs() < 0.05 && (e[1] / e[2] - 4.0).abs() < 0.05);
}

#[test]
fn sphere_harmonic_is_second_order() {
    // The height function is a first spherical harmonic: half the Laplacian is -4 Z on radius 1/2.
    let errs: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let m = build_cp1(n).unwrap();
            let z = sample(&m, |c| unit_pos(c)[2]);
            let l = laplacian(&m, &z).unwrap();
            let exact: Vec<f64> = z.iter().map(|v| -4.0 * v).collect();
            max_diff(&l, &exact)
        })
        .collect();
    assert!(errs[2] < 0.02, "{errs:?}");
    assert!(errs[0] / errs[1] > 2.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
}

#[test]
fn poisson_fourier_oracle_and_round_trip() {
    let m = torus(32);
    let rho = sample(&m, |c| (2.0 * PI * c.pos[0]).cos());
    let f = poisson_solve(&m, &rho).unwrap();
    let k = kappa(1.0 / 32.0);
    for (a, b) in f.iter().zip(&rho) {
        assert!((a + b / k).abs() < 1e-10);
    }
    let zero = poisson_solve(&m, &vec![0.0; m.len()]).unwrap();
    assert!(zero.iter().all(|v| *v == 0.0));

    let s = build_cp1(32).unwrap();
    let raw = sample(&s, |c| {
        let x = unit_pos(c);
        (3.0 * x[0]).sin() + x[1] * x[2]
    });
    let mu = mean(&s, &raw).unwrap();
    let rho: Vec<f64> = raw.iter().map(|v| v - mu).collect();
    let f = poisson_solve(&s, &rho).unwrap();
    assert!(max_diff(&laplacian(&s, &f).unwrap(), &rho) < 1e-8);
    assert!(integrate(&s, &f).unwrap().abs() < 1e-10);
}

#[test]
fn helmholtz_residual_and_positivity() {
    let m = build_cp1(16).unwrap();
    let rho = sample(&m, |c| 1.0 + unit_pos(c)[0].powi(2));
    for eps in [1.0, 1e-2, 1e-4] {
        let u = helmholtz_solve(&m, eps, &rho).unwrap();
        let l = laplacian(&m, &u).unwrap();
        let res: Vec<f64> = u.iter().zip(&l).map(|(a, b)| eps * a - b).collect();
        assert!(max_diff(&res, &rho) < 1e-9 * (1.0 + 1.0 / eps));
        assert!(u.iter().all(|v| *v > 0.0));
    }
    assert!(matches!(helmholtz_solve(&m, 0.0, &rho), Err(ManifoldError::NonPositiveShift(_))));
}

#[test]
fn heat_constant_and_conservation() {
    let m = build_cp1(16).unwrap();
    let dt = 0.9 * m.heat_dt_bound();
    let run = scalar_heat_run(&m, &vec![2.5; m.len()], 50.0 * dt, dt).unwrap();
    assert!(run.final_u.iter().all(|v| (v - 2.5).abs() < 1e-13));
    let u0 = sample(&m, |c| (4.0 * unit_pos(c)[0]).exp());
    let run = scalar_heat_run(&m, &u0, 200.0 * dt, dt).unwrap();
    let m0 = run.means[0];
    for w in run.means.windows(2) {
        assert!((w[1] - w[0]).abs() <= 1e-10 * m0.abs());
    }
    for i in 1..run.sups.len() {
        assert!(run.sups[i] <= run.sups[i - 1] + 1e-12);
        assert!(run.infs[i] >= run.infs[i - 1] - 1e-12);
    }
    assert!(scalar_heat_run(&m, &u0, 1.0, 2.0 * m.heat_dt_bound()).is_err());
}

#[test]
fn heat_fourier_decay() {
    // Each explicit step multiplies the cos(2 pi x) mode by 1 - 2 kappa dt.
    let mut errs = Vec::new();
    for n in [16, 32, 64] {
        let m = torus(n);
        let dt = 0.5 * m.heat_dt_bound();
        let steps = (0.02 / dt).round();
        let t = steps * dt;
        let u0 = sample(&m, |c| (2.0 * PI * c.pos[0]).cos());
        let run = scalar_heat_run(&m, &u0, t, dt).unwrap();
        let osc0 = sup(&u0) - inf(&u0);
        let osc = sup(&run.final_u) - inf(&run.final_u);
        let k = kappa(1.0 / n as f64);
        let discrete = (1.0 - 2.0 * k * dt).powf(steps);
        assert!((osc / osc0 - discrete).abs() < 1e-12);
        errs.push((osc / osc0 - (-4.0 * PI * PI * t).exp()).abs());
    }
    assert!(errs[0] / errs[1] > 3.0 && errs[1] / errs[2] > 3.0, "{errs:?}");
}

#[test]
fn super_solutions_have_non_decreasing_inf() {
    let m = build_cp1(16).unwrap();
    let dt = 0.9 * m.heat_dt_bound();
    let u0 = sample(&m, |c| unit_pos(c)[0] * 3.0 + (5.0 * unit_pos(c)[1]).sin());
    let run = scalar_heat_run_with_source(&m, &u0, 300.0 * dt, dt, |t, i, _| (1.0 + (i % 5) as f64) * (-t).exp()).unwrap();
    for w in run.infs.windows(2) {
        assert!(w[1] >= w[0] - 1e-13);
    }
}

#[test]
fn harnack_constant_is_positive() {
    let m = build_cp1(16).unwrap();
    let dt = 0.9 * m.heat_dt_bound();
    // Non-negative data concentrated near one pole.
    let u0 = sample(&m, |c| (-40.0 * (1.0 - 2.0 * unit_pos(c)[2])).exp());
    let run = scalar_heat_run(&m, &u0, 0.2, dt).unwrap();
    let t1 = run.times.iter().position(|t| *t >= 0.05).unwrap();
    let delta = run.infs.last().unwrap() / run.sups[t1];
    assert!(delta > 0.0 && delta.is_finite());
}

#[test]
fn weak_harnack_limit_of_super_solution() {
    // u_t - L u = s >= 0 with s decaying: inf and mean reach the same limit.
    let m = build_cp1(16).unwrap();
    let dt = 0.9 * m.heat_dt_bound();
    let u0 = sample(&m, |c| unit_pos(c)[0]);
    let s = sample(&m, |c| (1.0 + unit_pos(c)[2]).powi(2));
    let run = scalar_heat_run_with_source(&m, &u0, 3.0, dt, |t, i, _| s[i] * (-3.0 * t).exp()).unwrap();
    let (mu, lo) = (run.means.last().unwrap(), run.infs.last().unwrap());
    assert!((mu - lo).abs() < 1e-4, "{mu} {lo}");
    assert!(*run.means.last().unwrap() > run.means[0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn laplacian_integrates_to_zero(c in prop::collection::vec(-3.0f64..3.0, 6), n in prop::sample::select(vec![8usize, 16, 24])) {
        let m = build_cp1(n).unwrap();
        let f = sample(&m, |cell| {
            let x = unit_pos(cell);
            c[0] * (c[1] * x[0]).sin() + c[2] * x[1] * x[2] + c[3] * (c[4] * x[2]).exp() + c[5]
        });
        let norm = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let l = laplacian(&m, &f).unwrap();
        prop_assert!(integrate(&m, &l).unwrap().abs() <= 1e-8 * norm.max(1.0));
    }

    #[test]
    fn integrate_is_linear(a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let m = torus(8);
        let f = sample(&m, |c| c.pos[0].sin());
        let g = sample(&m, |c| c.pos[1] * c.pos[0]);
        let h: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
        let lhs = integrate(&m, &h).unwrap();
        let rhs = a * integrate(&m, &f).unwrap() + b * integrate(&m, &g).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-13 * (1.0 + a.abs() + b.abs()));
    }
}
