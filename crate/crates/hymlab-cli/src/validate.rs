//! Acceptance criteria as self-contained checks with measured values.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use hymlab::base_manifold::{self, BaseManifold};
use hymlab::bundle_geometry::{self, Bundle, CatalogParams, InducedOp, MetricField};
use hymlab::chern_forms;
use hymlab::continuity_solver::{self, SolveOptions, DEFAULT_SCHEDULE};
use hymlab::hn_algebra::{self, DescendingVector};
use hymlab::hym_flow::{self, FlowConfig, FlowState, SpectrumSeries};
use hymlab::linalg_hermitian::C64;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::run::random_curvature_sample;

const SPLIT: &str = "CP1:O(1)⊕O(-1)";

#[derive(Clone, Copy, Debug)]
pub struct Options {
    /// Halve the grid resolutions.
    pub coarse: bool,
    pub seed: u64,
}

impl Default for Options {
    fn default() -> Self {
        Options { coarse: false, seed: 1 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub measured: BTreeMap<String, f64>,
    pub detail: String,
    pub seconds: f64,
}

impl Report {
    /// One-line human summary.
    pub fn line(&self) -> String {
        let vals: Vec<String> = self.measured.iter().map(|(k, v)| format!("{k}={v:.4e}")).collect();
        let mut s = format!("criterion {:>2} {} {:<26} {}", self.id, if self.pass { "PASS" } else { "FAIL" }, self.name, vals.join(" "));
        if !self.detail.is_empty() {
            s.push_str(&format!(" [{}]", self.detail));
        }
        s
    }
}

pub const NAMES: [&str; 14] = [
    "monotonicity",
    "convergence targets",
    "one-sided bounds",
    "conservation",
    "energy bound",
    "two-solution convergence",
    "continuity method",
    "semistable approximate HE",
    "conformal negativization",
    "HN oracle equivalence",
    "spectrum composition",
    "c2 identities",
    "scalar parabolic suite",
    "degree well-definedness",
];

struct Check {
    pass: bool,
    measured: BTreeMap<String, f64>,
    detail: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check { pass: true, measured: BTreeMap::new(), detail: Vec::new() }
    }

    fn value(&mut self, key: &str, v: f64) -> f64 {
        self.measured.insert(key.to_string(), v);
        v
    }

    /// Records `key` and requires `ok`.
    fn require(&mut self, key: &str, v: f64, ok: bool) {
        self.value(key, v);
        if !ok {
            self.pass = false;
            self.detail.push(format!("{key} out of tolerance"));
        }
    }

    fn fail(&mut self, msg: impl Into<String>) {
        self.pass = false;
        self.detail.push(msg.into());
    }
}

type CheckResult = Result<Check, String>;

/// The reference flow run shared by criteria 1-5 and 11.
struct MainFlow {
    series: SpectrumSeries,
    state: FlowState,
    bundle: Bundle,
}

pub struct Validator {
    opts: Options,
    main: OnceLock<Result<Arc<MainFlow>, String>>,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

impl Validator {
    pub fn new(opts: Options) -> Self {
        Validator { opts, main: OnceLock::new() }
    }

    /// Fine grid resolution (64, or 32 when coarse).
    fn n_fine(&self) -> usize {
        if self.opts.coarse {
            32
        } else {
            64
        }
    }

    /// Resolution for the longer auxiliary runs (32, or 16 when coarse).
    fn n_mid(&self) -> usize {
        self.n_fine() / 2
    }

    fn params(&self, n: usize) -> CatalogParams {
        CatalogParams { n, seed: self.opts.seed, ..Default::default() }
    }

    fn main_flow(&self) -> Result<Arc<MainFlow>, String> {
        self.main
            .get_or_init(|| {
                let cfg = FlowConfig { t_end: 2.0, record_every: 10, normalize_trace: true, stop_fraction: Some(0.1), dt: None };
                let (series, state, bundle) = hym_flow::run_flow(SPLIT, &self.params(self.n_fine()), &cfg).map_err(err)?;
                Ok(Arc::new(MainFlow { series, state, bundle }))
            })
            .clone()
    }

    pub fn run(&self, id: u8) -> Report {
        let start = Instant::now();
        let res = match id {
            1 => self.c01_monotonicity(),
            2 => self.c02_targets(),
            3 => self.c03_one_sided(),
            4 => self.c04_conservation(),
            5 => self.c05_energy(),
            6 => self.c06_two_solutions(),
            7 => self.c07_continuity(),
            8 => self.c08_semistable(),
            9 => self.c09_negativize(),
            10 => self.c10_hn_oracle(),
            11 => self.c11_spectrum_composition(),
            12 => self.c12_chern(),
            13 => self.c13_parabolic(),
            14 => self.c14_degree(),
            _ => Err(format!("unknown criterion {id}")),
        };
        let name = NAMES.get((id as usize).wrapping_sub(1)).copied().unwrap_or("unknown");
        let (pass, measured, detail) = match res {
            Ok(c) => (c.pass, c.measured, c.detail.join("; ")),
            Err(e) => (false, BTreeMap::new(), e),
        };
        Report { id, name, pass, measured, detail, seconds: start.elapsed().as_secs_f64() }
    }

    pub fn run_all(&self) -> Vec<Report> {
        (1..=14).map(|id| self.run(id)).collect()
    }

    fn c01_monotonicity(&self) -> CheckResult {
        let m = self.main_flow()?;
        let mut c = Check::new();
        let mono = m.series.monotonicity(1e-8);
        c.require("violations", mono.total() as f64, mono.total() == 0);
        let first = &m.series.rows[0];
        let last = m.series.last().expect("rows");
        c.value("t_end", last.t);
        c.value("rows", m.series.rows.len() as f64);
        c.require("deviation_ratio", last.spectral_dev / first.spectral_dev, last.spectral_dev < 0.1 * first.spectral_dev);
        if let Some(a) = &m.series.aborted {
            c.fail(format!("aborted: {a}"));
        }
        Ok(c)
    }

    fn c02_targets(&self) -> CheckResult {
        let m = self.main_flow()?;
        let mut c = Check::new();
        let vol = base_manifold::integrate(&m.bundle.mesh, &vec![1.0; m.bundle.len()]).map_err(err)?;
        let (tu, tl) = (2.0 * PI / vol, -2.0 * PI / vol);
        let last = m.series.last().expect("rows");
        let (mu, ml) = (last.stats.m_u[0], last.stats.m_l[0]);
        c.value("target_u", tu);
        c.require("lam_mU", mu, (mu - tu).abs() <= 0.02 * tu.abs());
        c.require("lam_mL", ml, (ml - tl).abs() <= 0.02 * tl.abs());
        Ok(c)
    }

    fn c03_one_sided(&self) -> CheckResult {
        let m = self.main_flow()?;
        let mut c = Check::new();
        let (u, l) = hym_flow::partial_sum_targets(&m.series.targets);
        let h = m.bundle.mesh.mesh_h();
        let slack = 3.0 * h * h;
        let mut margin = f64::INFINITY;
        for row in &m.series.rows {
            for k in 0..u.len() {
                margin = margin.min(row.stats.m_u[k] - (u[k] - slack));
                margin = margin.min((l[k] + slack) - row.stats.m_l[k]);
            }
        }
        c.value("slack", slack);
        c.require("min_margin", margin, margin >= 0.0);
        Ok(c)
    }

    fn c04_conservation(&self) -> CheckResult {
        let m = self.main_flow()?;
        let mut c = Check::new();
        let det = m.series.rows.iter().map(|r| r.det_residual).fold(0.0, f64::max);
        c.require("max_det_residual", det, det <= 1e-6);
        let mono = m.series.monotonicity(1e-8);
        c.require("sup_phi_increases", mono.sup_phi as f64, mono.sup_phi == 0);
        c.value("max_tr_residual", m.series.rows.iter().map(|r| r.tr_residual).fold(0.0, f64::max));
        Ok(c)
    }

    fn c05_energy(&self) -> CheckResult {
        let m = self.main_flow()?;
        let mut c = Check::new();
        let bound = 1.05 * 0.5 * m.series.rows[0].theta_l2_sq;
        let last = m.series.last().expect("rows");
        c.value("bound", bound);
        c.require("energy_integral", last.energy_integral, last.energy_integral <= bound);
        let max = m.series.rows.iter().map(|r| r.energy).fold(0.0, f64::max);
        c.require("final_energy_fraction", last.energy / max, last.energy < 0.1 * max);
        Ok(c)
    }

    fn c06_two_solutions(&self) -> CheckResult {
        let mut c = Check::new();
        let n = self.n_mid();
        let e1 = bundle_geometry::catalog_bundle(SPLIT, &self.params(n)).map_err(err)?;
        let e2 = bundle_geometry::catalog_bundle(SPLIT, &CatalogParams { seed: self.opts.seed + 8, ..self.params(n) }).map_err(err)?;
        let cmp = hym_flow::two_solution_compare(&e1.bundle, e1.h0, &e2.bundle, e2.h0, 0.3, 10).map_err(err)?;
        let inc = cmp.sup_tr_increases(1e-8);
        c.require("sup_tr_increases", inc as f64, inc == 0);
        let (first, last) = (&cmp.rows[0], cmp.rows.last().expect("rows"));
        let ratio = last.int_theta_diff_sq / first.int_theta_diff_sq;
        c.require("theta_diff_ratio", ratio, ratio < 0.1);
        let viol: usize = cmp.rows.iter().map(|r| r.bound_violations).sum();
        c.require("bound_violations", viol as f64, viol == 0);
        Ok(c)
    }

    fn c07_continuity(&self) -> CheckResult {
        let mut c = Check::new();
        let split = |n: usize| -> Result<(bundle_geometry::CatalogEntry, MetricField), String> {
            let e = bundle_geometry::catalog_bundle(SPLIT, &CatalogParams { offdiag: 0.0, ..self.params(n) }).map_err(err)?;
            let k = continuity_solver::normalize_background(&e.bundle, &e.h0).map_err(err)?;
            Ok((e, k))
        };
        let opts = SolveOptions::default();
        let (e, k) = split(self.n_fine())?;
        let targets = e.targets();
        let path = continuity_solver::eps_path(&e.bundle, &k, &DEFAULT_SCHEDULE, &targets, &opts).map_err(err)?;
        if let Some(a) = &path.aborted {
            c.fail(format!("aborted: {a}"));
        }
        if path.rows.len() != DEFAULT_SCHEDULE.len() {
            c.fail("incomplete path");
        }
        let res = path.rows.iter().map(|r| r.residual).fold(0.0, f64::max);
        c.require("max_residual", res, res <= 1e-8);
        let excess = path.rows.iter().map(|r| r.lemma.eps_s_inf - r.lemma.phi_k_inf).fold(f64::NEG_INFINITY, f64::max);
        c.require("estimate_excess", excess, excess <= 1e-10);
        let tr = path.rows.iter().map(|r| r.lemma.trace_max).fold(0.0, f64::max);
        c.require("max_trace", tr, tr <= 1e-8);
        let (lu, ll) = (path.limit_m_u.unwrap_or(f64::NAN), path.limit_m_l.unwrap_or(f64::NAN));
        c.require("limit_lam_mU", lu, (lu - path.target_u).abs() <= 0.03 * path.target_u.abs());
        c.require("limit_lam_mL", ll, (ll - path.target_l).abs() <= 0.03 * path.target_l.abs());
        let (ec, kc) = split(self.n_mid())?;
        let coarse = continuity_solver::solve_perturbed(&ec.bundle, &kc, 1.0, None, &opts).map_err(err)?;
        let ki_coarse = continuity_solver::key_identity_residual(&ec.bundle, &kc, &coarse);
        let ki_fine = path.rows[0].key_identity;
        c.value("key_identity_coarse", ki_coarse);
        c.value("key_identity_fine", ki_fine);
        let ratio = ki_coarse / ki_fine;
        c.require("key_identity_ratio", ratio, (3.0..=5.0).contains(&ratio));
        Ok(c)
    }

    fn c08_semistable(&self) -> CheckResult {
        let mut c = Check::new();
        let n = self.n_mid();
        let cfg = FlowConfig { t_end: 0.3, record_every: 10, ..Default::default() };
        let (s, _, _) = hym_flow::run_flow("Torus:Atiyah-F2", &self.params(n), &cfg).map_err(err)?;
        let sup = |r: &hym_flow::SpectrumRow| r.sup_phi_sq.sqrt();
        let ratio = sup(s.last().expect("rows")) / sup(&s.rows[0]);
        c.require("atiyah_sup_phi_ratio", ratio, ratio < 0.25);
        let trend = s.trend_last_quarter(sup);
        c.require("atiyah_trend", trend, trend < 0.0);
        let cfg = FlowConfig { t_end: 1.5, record_every: 50, ..Default::default() };
        let (s, _, _) = hym_flow::run_flow("CP1:O(0)⊕O(0)", &self.params(n), &cfg).map_err(err)?;
        let fin = sup(s.last().expect("rows"));
        c.require("trivial_sup_phi", fin, fin < 1e-4);
        Ok(c)
    }

    fn c09_negativize(&self) -> CheckResult {
        let mut c = Check::new();
        let p = CatalogParams { amplitude: 6.0, ..self.params(self.n_mid()) };
        let cfg = FlowConfig { t_end: 0.002, record_every: 10, normalize_trace: false, ..Default::default() };
        let (_, state, b) = hym_flow::run_flow("CP1:O(-1)", &p, &cfg).map_err(err)?;
        let before = b.spectrum_field(&state.theta, &state.h).map_err(err)?;
        let s0 = hym_flow::sup_lambda_u(&before);
        c.require("sup_lambda_u_before", s0, s0 > 0.0);
        let h = hym_flow::conformal_negativize(&b, &state.h).map_err(err)?;
        let after = b.spectrum_field(&b.mean_curvature(&h), &h).map_err(err)?;
        let s = hym_flow::sup_lambda_u(&after);
        c.require("sup_lambda_u_after", s, s < 0.0);
        Ok(c)
    }

    fn c10_hn_oracle(&self) -> CheckResult {
        let mut c = Check::new();
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed);
        let mut mismatches = 0usize;
        for _ in 0..200 {
            let r = rng.gen_range(1..=4);
            let k = rng.gen_range(1..=3);
            let x = random_rationals(&mut rng, r);
            let tensor = brute_force(&x, k, |_| true);
            let sym = brute_force(&x, k, |t| t.windows(2).all(|w| w[0] <= w[1]));
            mismatches += (hn_algebra::vec_tk_exact(&x, k).map_err(err)? != tensor) as usize;
            mismatches += (hn_algebra::vec_sk_exact(&x, k).map_err(err)? != sym) as usize;
            if k <= r {
                let ext = brute_force(&x, k, |t| t.windows(2).all(|w| w[0] < w[1]));
                mismatches += (hn_algebra::vec_ak_exact(&x, k).map_err(err)? != ext) as usize;
            }
        }
        c.require("oracle_mismatches", mismatches as f64, mismatches == 0);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let r = rng.gen_range(1..=4);
            let k = rng.gen_range(1..=3);
            let x: Vec<f64> = (0..r).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let y: Vec<f64> = x.iter().map(|v| v + rng.gen_range(-1.0..1.0)).collect();
            let xs = DescendingVector::sorted(x).map_err(err)?;
            let ys = DescendingVector::sorted(y).map_err(err)?;
            let d = hn_algebra::sup_dist(xs.values(), ys.values());
            let mut maps = vec![
                hn_algebra::vec_tk(&xs, k).map_err(err)?.values().to_vec(),
                hn_algebra::vec_sk(&xs, k).map_err(err)?.values().to_vec(),
            ];
            let mut maps_y = vec![
                hn_algebra::vec_tk(&ys, k).map_err(err)?.values().to_vec(),
                hn_algebra::vec_sk(&ys, k).map_err(err)?.values().to_vec(),
            ];
            if k <= r {
                maps.push(hn_algebra::vec_ak(&xs, k).map_err(err)?.values().to_vec());
                maps_y.push(hn_algebra::vec_ak(&ys, k).map_err(err)?.values().to_vec());
            }
            for (a, b) in maps.iter().zip(&maps_y) {
                if d > 0.0 {
                    worst = worst.max(hn_algebra::sup_dist(a, b) / (k as f64 * d));
                }
            }
        }
        c.require("lipschitz_ratio", worst, worst <= 1.0 + 1e-12);
        Ok(c)
    }

    fn c11_spectrum_composition(&self) -> CheckResult {
        let m = self.main_flow()?;
        let mut c = Check::new();
        let b = &m.bundle;
        let h = &m.state.h;
        let theta = &m.state.theta;
        let lam = b.spectrum_field(theta, h).map_err(err)?.lambdas;
        let ops = [("tensor", InducedOp::Tensor), ("sym2", InducedOp::SymPow(2)), ("ext2", InducedOp::ExtPow(2))];
        for (name, op) in ops {
            let second = (op == InducedOp::Tensor).then_some((b, h));
            let (ib, ih) = bundle_geometry::induced_metric(op, b, h, second).map_err(err)?;
            let ti = bundle_geometry::induced_mean_curvature(op, theta, second.map(|_| theta.as_slice()));
            let spec = ib.spectrum_field(&ti, &ih).map_err(err)?;
            let mut worst = 0.0f64;
            for (i, l) in lam.iter().enumerate() {
                let x = DescendingVector::new(l.clone()).map_err(err)?;
                let expect = match op {
                    InducedOp::Tensor => hn_algebra::vec_t(&x, &x),
                    InducedOp::SymPow(k) => hn_algebra::vec_sk(&x, k).map_err(err)?,
                    InducedOp::ExtPow(k) => hn_algebra::vec_ak(&x, k).map_err(err)?,
                    InducedOp::TensorPow(k) => hn_algebra::vec_tk(&x, k).map_err(err)?,
                };
                worst = worst.max(hn_algebra::sup_dist(&spec.lambdas[i], expect.values()));
            }
            c.require(&format!("{name}_max_error"), worst, worst <= 1e-8);
        }
        Ok(c)
    }

    fn c12_chern(&self) -> CheckResult {
        let mut c = Check::new();
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed);
        let mut worst = 0.0f64;
        for i in 0..500 {
            let s = random_curvature_sample(&mut rng, 1 + i % 4);
            worst = worst.max(chern_forms::c2_gap_residual(&s).map_err(err)?);
        }
        c.require("max_gap_residual", worst, worst < 1e-10);
        let mut worst = 0.0f64;
        for _ in 0..500 {
            let l1: f64 = rng.gen_range(-3.0..5.0);
            let (a, b) = chern_forms::two_eigen_gap(l1, 2.0 - l1).map_err(err)?;
            worst = worst.max((a - b).abs());
        }
        c.require("max_eigen_gap_diff", worst, worst <= 1e-12);
        Ok(c)
    }

    fn c13_parabolic(&self) -> CheckResult {
        let mut c = Check::new();
        let m = base_manifold::build_cp1(self.n_mid()).map_err(err)?;
        let dt = 0.9 * m.heat_dt_bound();
        let u0 = base_manifold::sample(&m, |cell| (4.0 * base_manifold::unit_pos(cell)[0]).exp());
        let run = base_manifold::scalar_heat_run(&m, &u0, 200.0 * dt, dt).map_err(err)?;
        let drift = run.means.windows(2).map(|w| (w[1] - w[0]).abs() / run.means[0].abs()).fold(0.0, f64::max);
        c.require("mean_drift_per_step", drift, drift <= 1e-10);

        let mut errs = Vec::new();
        let mut exact = 0.0f64;
        for n in [16, 32, 64] {
            let t = torus(n)?;
            let dt = 0.5 * t.heat_dt_bound();
            let steps = (0.02 / dt).round();
            let u0 = base_manifold::sample(&t, |cell| (2.0 * PI * cell.pos[0]).cos());
            let run = base_manifold::scalar_heat_run(&t, &u0, steps * dt, dt).map_err(err)?;
            let osc = |u: &[f64]| u.iter().cloned().fold(f64::MIN, f64::max) - u.iter().cloned().fold(f64::MAX, f64::min);
            let ratio = osc(&run.final_u) / osc(&u0);
            let h = 1.0 / n as f64;
            let kappa = (1.0 - (2.0 * PI * h).cos()) / (h * h);
            exact = exact.max((ratio - (1.0 - 2.0 * kappa * dt).powf(steps)).abs());
            errs.push((ratio - (-4.0 * PI * PI * steps * dt).exp()).abs());
        }
        c.require("discrete_factor_error", exact, exact < 1e-12);
        let order = (errs[0] / errs[2]).log2() / 2.0;
        c.require("fourier_order", order, order > 1.8);

        let u0 = base_manifold::sample(&m, |cell| {
            let x = base_manifold::unit_pos(cell);
            3.0 * x[0] + (5.0 * x[1]).sin()
        });
        let run = base_manifold::scalar_heat_run_with_source(&m, &u0, 300.0 * dt, dt, |t, i, _| (1.0 + (i % 5) as f64) * (-t).exp())
            .map_err(err)?;
        let drops = run.infs.windows(2).filter(|w| w[1] < w[0] - 1e-13).count();
        c.require("inf_decreases", drops as f64, drops == 0);
        Ok(c)
    }

    fn c14_degree(&self) -> CheckResult {
        let mut c = Check::new();
        let n = self.n_fine();
        let e = bundle_geometry::catalog_bundle("CP1:O(1)", &self.params(n)).map_err(err)?;
        let fs = bundle_geometry::fubini_study_metric(&e.bundle).ok_or("no standard metric")?;
        let d_fs = e.bundle.degree(&fs);
        let d_pert = e.bundle.degree(&e.h0);
        c.require("degree", d_fs, (d_fs - 1.0).abs() <= 0.01);
        let h = e.bundle.mesh.mesh_h();
        c.require("metric_difference", (d_fs - d_pert).abs(), (d_fs - d_pert).abs() <= h * h);
        let s = bundle_geometry::catalog_bundle(SPLIT, &self.params(n)).map_err(err)?;
        let p = s.bundle.projection_onto_frame_span(&s.h0, &[0]);
        let d = s.bundle.subsheaf_degree(&s.h0, &p).map_err(err)?;
        c.require("subsheaf_degree", d, (d - 1.0).abs() <= 0.01);
        Ok(c)
    }
}

fn torus(n: usize) -> Result<BaseManifold, String> {
    base_manifold::build_torus(C64::new(0.0, 1.0), n).map_err(err)
}

fn random_rationals(rng: &mut ChaCha8Rng, r: usize) -> Vec<BigRational> {
    let mut v: Vec<BigRational> =
        (0..r).map(|_| BigRational::new(BigInt::from(rng.gen_range(-12i64..=12)), BigInt::from(rng.gen_range(1i64..=6)))).collect();
    v.sort_by(|a, b| b.cmp(a));
    v
}

/// Descending sums over all k-tuples of indices accepted by `keep`.
fn brute_force(x: &[BigRational], k: usize, keep: impl Fn(&[usize]) -> bool) -> Vec<BigRational> {
    let r = x.len();
    let mut out = Vec::new();
    let mut t = vec![0usize; k];
    loop {
        if keep(&t) {
            out.push(t.iter().fold(BigRational::zero(), |acc, &i| acc + &x[i]));
        }
        let mut pos = k;
        loop {
            if pos == 0 {
                out.sort_by(|a, b| b.cmp(a));
                return out;
            }
            pos -= 1;
            t[pos] += 1;
            if t[pos] < r {
                break;
            }
            t[pos] = 0;
        }
    }
}
