use std::f64::consts::PI;

use hymlab::base_manifold::*;
use hymlab::bundle_geometry::*;
use hymlab::hn_algebra::{vec_ak, vec_sk, vec_t, vec_tk, DescendingVector};
use hymlab::linalg_hermitian::*;

fn entry(tag: &str, n: usize) -> CatalogEntry {
    catalog_bundle(tag, &CatalogParams { n, ..Default::default() }).unwrap()
}

fn area_weighted<F: FnMut(usize) -> f64>(m: &BaseManifold, mut f: F) -> f64 {
    m.cells.iter().enumerate().map(|(i, c)| c.area * f(i)).sum()
}

fn smooth(m: &BaseManifold) -> Vec<f64> {
    sample(m, |c| {
        let x = unit_pos(c);
        (2.0 * x[0]).sin() + 3.0 * x[1] * x[2]
    })
}

#[test]
fn catalog_hn_types_and_targets() {
    let e = entry("CP1:O(1)⊕O(-1)", 16);
    assert_eq!(e.hn_type.values(), &[1.0, -1.0]);
    let v = e.bundle.mesh.volume();
    let t = e.targets();
    assert!((t[0] - 2.0 * PI / v).abs() < 1e-14 && (t[1] + 2.0 * PI / v).abs() < 1e-14);
    let a = entry("Torus:Atiyah-F2", 16);
    assert_eq!(a.hn_type.values(), &[0.0, 0.0]);
    assert!(a.bundle.degree(&a.h0).abs() < 1e-12);
    let z = entry("CP1:O(0)⊕O(0)", 16);
    let flat = MetricField { h: vec![CMat::identity(2); z.bundle.len()] };
    assert!(z.bundle.mean_curvature(&flat).iter().all(|t| t.max_abs() < 1e-12));
    assert!(matches!(
        catalog_bundle("CP1:O(x)", &CatalogParams { n: 16, ..Default::default() }),
        Err(BundleError::UnknownTag(_))
    ));
}

#[test]
fn fubini_study_curvature_is_constant() {
    // O(d) with (1+|z|^2)^{-d} has theta = 2d in this normalization.
    let mut l1 = Vec::new();
    for n in [16, 32, 64] {
        let e = entry("CP1:O(1)⊕O(-1)", n);
        let b = &e.bundle;
        let th = b.mean_curvature(&fubini_study_metric(b).unwrap());
        let target = CMat::from_real_diag(&[2.0, -2.0]);
        let err = area_weighted(&b.mesh, |i| (&th[i] - &target).max_abs());
        let sup = th.iter().map(|t| (t - &target).max_abs()).fold(0.0, f64::max);
        assert!(sup < 1.5 / n as f64, "{sup}");
        l1.push(err);
    }
    assert!(l1[1] / l1[2] > 3.5, "{l1:?}");
    let e = entry("CP1:O(2)", 32);
    let th = e.bundle.mean_curvature(&fubini_study_metric(&e.bundle).unwrap());
    assert!((integrate(&e.bundle.mesh, &th.iter().map(|t| t[(0, 0)].re).collect::<Vec<_>>()).unwrap() - 4.0 * PI).abs() < 1e-2);
}

#[test]
fn flat_torus_metric_has_zero_curvature() {
    let e = catalog_bundle("Torus:Trivial", &CatalogParams { n: 16, rank: 3, ..Default::default() }).unwrap();
    let h = MetricField { h: vec![CMat::identity(3); e.bundle.len()] };
    assert!(e.bundle.mean_curvature(&h).iter().all(|t| t.max_abs() < 1e-13));
    assert!(e.bundle.degree(&e.h0).abs() < 1e-3);
}

#[test]
fn theta_is_self_adjoint() {
    for tag in ["CP1:O(1)⊕O(-1)", "Torus:Atiyah-F2", "CP1:O(2)⊕O(0)⊕O(-1)"] {
        let e = entry(tag, 16);
        let th = e.bundle.mean_curvature(&e.h0);
        for (t, h) in th.iter().zip(&e.h0.h) {
            assert!((h * t).hermitian_defect() < 1e-8);
        }
    }
}

#[test]
fn degrees() {
    let e = entry("CP1:O(1)", 64);
    let d_fs = e.bundle.degree(&fubini_study_metric(&e.bundle).unwrap());
    let d_pert = e.bundle.degree(&e.h0);
    assert!((d_fs - 1.0).abs() < 0.01);
    assert!((d_fs - d_pert).abs() < 1e-8);
    let errs: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let e = entry("CP1:O(1)", n);
            (e.bundle.degree(&e.h0) - 1.0).abs()
        })
        .collect();
    assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
    let s = entry("CP1:O(2)⊕O(-3)", 32);
    assert!((s.bundle.degree(&s.h0) + 1.0).abs() < 0.01);
}

#[test]
fn subsheaf_degrees() {
    let e = entry("CP1:O(1)⊕O(-1)", 32);
    let b = &e.bundle;
    let id = vec![CMat::identity(2); b.len()];
    assert!((b.subsheaf_degree(&e.h0, &id).unwrap() - b.degree(&e.h0)).abs() < 1e-10);
    let zero = vec![CMat::zeros(2); b.len()];
    assert_eq!(b.subsheaf_degree(&e.h0, &zero).unwrap(), 0.0);
    // Constant projection onto the O(1) summand with a block-diagonal metric.
    let diag = catalog_bundle("CP1:O(1)⊕O(-1)", &CatalogParams { n: 32, offdiag: 0.0, ..Default::default() }).unwrap();
    let pi = vec![CMat::from_real_diag(&[1.0, 0.0]); b.len()];
    assert!((diag.bundle.subsheaf_degree(&diag.h0, &pi).unwrap() - 1.0).abs() < 2e-3);
    // Orthogonal projection onto the O(1) frame for a coupled metric: the second fundamental
    // form only lowers the degree.
    let p = b.projection_onto_frame_span(&e.h0, &[0]);
    let th = b.mean_curvature(&e.h0);
    let tr: Vec<f64> = p.iter().zip(&th).map(|(a, t)| a.trace_prod_re(t)).collect();
    let upper = integrate(&b.mesh, &tr).unwrap() / (2.0 * PI);
    let d = b.subsheaf_degree(&e.h0, &p).unwrap();
    assert!(d <= upper);
    assert!((d - 1.0).abs() < 0.01, "{d}");
    let bad = vec![CMat::from_real_diag(&[2.0, 0.0]); b.len()];
    assert!(matches!(b.subsheaf_degree(&e.h0, &bad), Err(BundleError::NotAProjection { .. })));
}

#[test]
fn conformal_law_is_second_order() {
    // theta(e^f H) - theta(H) = -laplacian(f) Id in this sign convention.
    let mut errs = Vec::new();
    for n in [16, 32, 64] {
        let e = entry("CP1:O(1)⊕O(-1)", n);
        let b = &e.bundle;
        let f = smooth(&b.mesh);
        let t1 = b.mean_curvature(&e.h0);
        let t2 = b.mean_curvature(&b.conformal(&e.h0, &f));
        let lf = laplacian(&b.mesh, &f).unwrap();
        let mut trace_err = 0.0f64;
        errs.push(area_weighted(&b.mesh, |i| {
            let mut d = &t2[i] - &t1[i];
            d.add_identity(lf[i]);
            trace_err = trace_err.max(d.trace().norm());
            d.max_abs()
        }));
        assert!(trace_err < 1e-9);
    }
    assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
}

#[test]
fn chern_connection_oracles() {
    let e = catalog_bundle("Torus:Trivial", &CatalogParams { n: 16, rank: 2, ..Default::default() }).unwrap();
    let c = MetricField { h: vec![CMat::from_real_diag(&[2.0, 0.5]); e.bundle.len()] };
    assert!(e.bundle.chern_connection(&c).iter().all(|a| a.max_abs() < 1e-12));
    // Rank one, H = e^{-phi}: the connection is -d phi / dz.
    let mut errs = Vec::new();
    for n in [16, 32, 64] {
        let e = catalog_bundle("Torus:Trivial", &CatalogParams { n, rank: 1, ..Default::default() }).unwrap();
        let b = &e.bundle;
        let phi = sample(&b.mesh, |c| (2.0 * PI * c.pos[0]).sin() * (2.0 * PI * c.pos[1]).cos());
        let h = MetricField { h: phi.iter().map(|v| CMat::from_real_diag(&[(-v).exp()])).collect() };
        let a = b.chern_connection(&h);
        let err = b
            .mesh
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let (x, y) = (2.0 * PI * c.pos[0], 2.0 * PI * c.pos[1]);
                let dz = C64::new(PI * x.cos() * y.cos(), PI * x.sin() * y.sin());
                (a[i][(0, 0)] + dz).norm()
            })
            .fold(0.0, f64::max);
        errs.push(err);
    }
    assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
}

#[test]
fn spectrum_field_examples() {
    let e = entry("CP1:O(1)⊕O(-1)", 16);
    let b = &e.bundle;
    let c = vec![CMat::scalar(2, 0.7); b.len()];
    let s = b.spectrum_field(&c, &e.h0).unwrap();
    for k in 0..2 {
        assert!((s.stats.m_l[k] - 0.7 * (k + 1) as f64).abs() < 1e-12);
        assert!((s.stats.m_u[k] - 0.7 * (k + 1) as f64).abs() < 1e-12);
    }
    let id = MetricField { h: vec![CMat::identity(2); b.len()] };
    let d = vec![CMat::from_real_diag(&[-0.5, 1.5]); b.len()];
    let s = b.spectrum_field(&d, &id).unwrap();
    assert!((s.stats.hat_u[0] - 1.5).abs() < 1e-14 && (s.stats.hat_l[0] + 0.5).abs() < 1e-14);
    let th = b.mean_curvature(&e.h0);
    let s = b.spectrum_field(&th, &e.h0).unwrap();
    for (l, t) in s.lambdas.iter().zip(&th) {
        assert!(l[0] >= l[1]);
        assert!((l[0] + l[1] - t.trace().re).abs() < 1e-10);
    }
}

#[test]
fn donaldson_identity() {
    let e = entry("CP1:O(1)⊕O(-1)", 16);
    let b = &e.bundle;
    assert!(b.donaldson_identity_residual(&e.h0, &e.h0) < 1e-20);
    let scaled = MetricField { h: e.h0.h.iter().map(|h| h.scale_re(0.4f64.exp())).collect() };
    assert!(b.donaldson_identity_residual(&e.h0, &scaled) < 1e-8);
    let errs: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let e = entry("CP1:O(1)⊕O(-1)", n);
            e.bundle.donaldson_identity_residual(&fubini_study_metric(&e.bundle).unwrap(), &e.h0)
        })
        .collect();
    assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
}

#[test]
fn induced_spectra_follow_the_maps() {
    let e = entry("CP1:O(2)⊕O(0)⊕O(-1)", 16);
    let b = &e.bundle;
    let th = b.mean_curvature(&e.h0);
    let lam = b.spectrum_field(&th, &e.h0).unwrap().lambdas;
    let f = entry("CP1:O(1)⊕O(-1)", 16);
    let th2 = f.bundle.mean_curvature(&f.h0);
    let lam2 = f.bundle.spectrum_field(&th2, &f.h0).unwrap().lambdas;
    let cases: Vec<(InducedOp, Box<dyn Fn(&DescendingVector, &DescendingVector) -> DescendingVector>)> = vec![
        (InducedOp::Tensor, Box::new(|x, y| vec_t(x, y))),
        (InducedOp::TensorPow(2), Box::new(|x, _| vec_tk(x, 2).unwrap())),
        (InducedOp::SymPow(3), Box::new(|x, _| vec_sk(x, 3).unwrap())),
        (InducedOp::ExtPow(2), Box::new(|x, _| vec_ak(x, 2).unwrap())),
    ];
    for (op, map) in cases {
        let second = (op == InducedOp::Tensor).then_some((&f.bundle, &f.h0));
        let (ib, ih) = induced_metric(op, b, &e.h0, second).unwrap();
        let ti = induced_mean_curvature(op, &th, second.map(|_| th2.as_slice()));
        let spec = ib.spectrum_field(&ti, &ih).unwrap();
        for i in 0..b.len() {
            let x = DescendingVector::new(lam[i].clone()).unwrap();
            let y = DescendingVector::new(lam2[i].clone()).unwrap();
            let expect = map(&x, &y);
            for (p, q) in spec.lambdas[i].iter().zip(expect.values()) {
                assert!((p - q).abs() < 1e-8, "{op:?}");
            }
        }
    }
    assert!(matches!(induced_metric(InducedOp::ExtPow(4), b, &e.h0, None), Err(BundleError::RankTooSmall { .. })));
}

#[test]
fn induced_metric_curvature_matches_algebraic_form() {
    // The discrete curvature of an induced metric tends to the derivation action of theta.
    let errs: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let e = entry("CP1:O(1)⊕O(-1)", n);
            let b = &e.bundle;
            let (ib, ih) = induced_metric(InducedOp::SymPow(2), b, &e.h0, None).unwrap();
            let direct = ib.mean_curvature(&ih);
            let alg = induced_mean_curvature(InducedOp::SymPow(2), &b.mean_curvature(&e.h0), None);
            area_weighted(&b.mesh, |i| (&direct[i] - &alg[i]).max_abs())
        })
        .collect();
    assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
    // Top exterior power is the determinant line: its curvature is tr theta.
    let e = entry("CP1:O(1)⊕O(-1)", 16);
    let (ib, ih) = induced_metric(InducedOp::ExtPow(2), &e.bundle, &e.h0, None).unwrap();
    let det = ib.mean_curvature(&ih);
    let tr = e.bundle.trace_curvature(&e.h0);
    for (d, t) in det.iter().zip(&tr) {
        assert!((d[(0, 0)].re - t).abs() < 1e-9);
    }
}

#[test]
fn dual_bundle_reverses_spectra() {
    // Exact in the continuum; the discrete mismatch is O(h^2).
    for tag in ["CP1:O(1)⊕O(-1)", "Torus:Atiyah-F2"] {
        let errs: Vec<f64> = [16, 32]
            .iter()
            .map(|&n| {
                let e = entry(tag, n);
                let b = &e.bundle;
                let dual = Bundle::new(b.mesh.clone(), b.pres.dual()).unwrap();
                let hd = dual_metric(&e.h0);
                dual.check_metric(&hd).unwrap();
                assert!((dual.degree(&hd) + b.degree(&e.h0)).abs() < 1e-10);
                let l = b.spectrum_field(&b.mean_curvature(&e.h0), &e.h0).unwrap().lambdas;
                let ld = dual.spectrum_field(&dual.mean_curvature(&hd), &hd).unwrap().lambdas;
                let mut err = 0.0f64;
                for (a, d) in l.iter().zip(&ld) {
                    for k in 0..a.len() {
                        err = err.max((d[k] + a[a.len() - 1 - k]).abs());
                    }
                }
                err
            })
            .collect();
        assert!(errs[1] < 1e-2 && errs[0] / errs[1] > 2.8, "{tag} {errs:?}");
    }
}
