//! Donaldson's heat flow `H^{-1} dH/dt = -2 (theta_H - lambda Id)` on a discretized
//! bundle, with its monitors: spectral statistics of the mean curvature, the
//! conserved determinant, the Yang-Mills energy dissipation, the comparison of
//! two solutions and the conformal change producing negative mean curvature.
//!
//! The update is the geometric Euler step `H <- H exp(-2 dt Phi)`, carried out in
//! a Cholesky frame of H so that the result is Hermitian positive definite by
//! construction.

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::base_manifold::{self, laplacian_unchecked, ManifoldError};
use crate::bundle_geometry::{self, Bundle, BundleError, EndField, MetricField, SpectrumField, SpectrumStats};
use crate::linalg_hermitian::{self as la, CMat};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("unstable time step dt = {dt:.3e}: sup|Phi| grew by a factor {growth:.4}")]
    UnstableTimestep { dt: f64, growth: f64 },
    #[error("time step dt = {dt:.3e} exceeds the stability bound {bound:.3e}")]
    StepTooLarge { dt: f64, bound: f64 },
    #[error("the two runs use different bundles or meshes")]
    PresentationMismatch,
    #[error("construction infeasible: lambda_mU = {0:.6} is not negative")]
    Infeasible(f64),
    #[error("non-finite metric at t = {0}")]
    NonFinite(f64),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
}

pub type Result<T> = std::result::Result<T, FlowError>;

/// Factor applied to sup|Phi| between steps that is still accepted as noise.
const GROWTH_TOLERANCE: f64 = 1.01;

#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub h: MetricField,
    /// Initial metric after the optional trace normalization.
    pub k0: MetricField,
    pub theta: EndField,
    /// Einstein constant, frozen at t = 0.
    pub lambda: f64,
    pub sup_phi_sq: f64,
    /// Explicit heat evolution of tr Phi(0), stepped alongside the flow.
    pub tr_shadow: Vec<f64>,
    /// Left Riemann sum of the energy integral(|D theta|^2) over elapsed time.
    pub energy_integral: f64,
    logdet0: Vec<f64>,
}

impl FlowState {
    /// Starts a flow at `h0`. With `normalize_trace`, `h0` is first replaced by
    /// `e^{f} h0` with f chosen so that tr theta = r lambda pointwise.
    pub fn new(b: &Bundle, h0: MetricField, normalize_trace: bool) -> Result<Self> {
        b.check_metric(&h0)?;
        let lambda = b.einstein_constant(&h0);
        let r = b.rank() as f64;
        let h0 = if normalize_trace {
            let tr = b.trace_curvature(&h0);
            let rho: Vec<f64> = tr.iter().map(|t| (t - r * lambda) / r).collect();
            let f = base_manifold::poisson_solve(&b.mesh, &rho)?;
            b.conformal(&h0, &f)
        } else {
            h0
        };
        let theta = b.mean_curvature(&h0);
        let phi = phi_field(&theta, lambda);
        let sup_phi_sq = sup(&b.norm_sq_field(&phi, &h0));
        let tr_shadow = phi.iter().map(|p| p.trace().re).collect();
        let logdet0 = b.logdet_field(&h0);
        Ok(FlowState { t: 0.0, k0: h0.clone(), h: h0, theta, lambda, sup_phi_sq, tr_shadow, energy_integral: 0.0, logdet0 })
    }

    pub fn phi(&self) -> EndField {
        phi_field(&self.theta, self.lambda)
    }
}

fn phi_field(theta: &[CMat], lambda: f64) -> EndField {
    theta
        .iter()
        .map(|t| {
            let mut p = t.clone();
            p.add_identity(-lambda);
            p
        })
        .collect()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

fn inf(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Default step: the smaller of a safety fraction of the discrete maximum-principle
/// bound and 0.1 / sup|Phi|.
pub fn stable_dt(b: &Bundle, state: &FlowState) -> f64 {
    let bound = 0.45 * b.mesh.heat_dt_bound();
    let sp = state.sup_phi_sq.sqrt();
    if sp > 0.0 {
        bound.min(0.1 / sp)
    } else {
        bound
    }
}

/// One geometric Euler step.
pub fn flow_step(b: &Bundle, state: &FlowState, dt: f64) -> Result<FlowState> {
    let bound = b.mesh.heat_dt_bound();
    if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
        return Err(FlowError::StepTooLarge { dt, bound });
    }
    let lambda = state.lambda;
    let h: Vec<CMat> = state
        .h
        .h
        .par_iter()
        .zip(state.theta.par_iter())
        .map(|(hi, ti)| {
            let l = hi.cholesky().expect("positive metric");
            let mut m = la::to_unitary_frame(ti, &l).expect("invertible factor").hermitian_part();
            m.add_identity(-lambda);
            let e = la::expm_herm(&m.scale_re(-2.0 * dt));
            (&(&l * &e) * &l.adjoint()).hermitian_part()
        })
        .collect();
    let h = MetricField { h };
    if h.h.iter().any(|m| !m.is_finite()) {
        return Err(FlowError::NonFinite(state.t + dt));
    }
    let energy = energy_dtheta(b, state);
    let theta = b.mean_curvature(&h);
    let phi = phi_field(&theta, lambda);
    let sup_phi_sq = sup(&b.norm_sq_field(&phi, &h));
    if state.sup_phi_sq > 0.0 {
        let growth = (sup_phi_sq / state.sup_phi_sq).sqrt();
        if growth > GROWTH_TOLERANCE {
            return Err(FlowError::UnstableTimestep { dt, growth });
        }
    }
    let lap = laplacian_unchecked(&b.mesh, &state.tr_shadow);
    let tr_shadow = state.tr_shadow.iter().zip(&lap).map(|(u, l)| u + 2.0 * dt * l).collect();
    Ok(FlowState {
        t: state.t + dt,
        h,
        k0: state.k0.clone(),
        theta,
        lambda,
        sup_phi_sq,
        tr_shadow,
        energy_integral: state.energy_integral + dt * energy,
        logdet0: state.logdet0.clone(),
    })
}

/// (max |det(K0^{-1} H) - 1|, max |tr Phi - heat evolution of tr Phi(0)|).
pub fn monitor_conservation(b: &Bundle, state: &FlowState) -> (f64, f64) {
    let ld = b.logdet_field(&state.h);
    let det = ld.iter().zip(&state.logdet0).map(|(a, c)| (a - c).exp_m1().abs()).fold(0.0, f64::max);
    let tr = state
        .theta
        .iter()
        .zip(&state.tr_shadow)
        .map(|(t, u)| (t.trace().re - b.rank() as f64 * state.lambda - u).abs())
        .fold(0.0, f64::max);
    (det, tr)
}

/// integral |D_H theta_H|^2 = 2 integral |dbar theta_H|^2.
pub fn energy_dtheta(b: &Bundle, state: &FlowState) -> f64 {
    2.0 * b.dbar_energy(&state.theta, &state.h)
}

/// integral |theta_H|^2_H.
pub fn theta_l2_sq(b: &Bundle, h: &MetricField, theta: &[CMat]) -> f64 {
    base_manifold::integrate(&b.mesh, &b.norm_sq_field(theta, h)).expect("field sized to mesh")
}

/// sup over cells of the Euclidean distance between the descending spectrum and `targets`.
pub fn spectral_deviation(spec: &SpectrumField, targets: &[f64]) -> f64 {
    spec.lambdas
        .iter()
        .map(|l| l.iter().zip(targets).map(|(a, t)| (a - t).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Partial-sum targets (upper, lower) for lambda_{mU,k} and lambda_{mL,k}, k = 1..r.
pub fn partial_sum_targets(targets: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let r = targets.len();
    let mut up = Vec::with_capacity(r);
    let mut lo = Vec::with_capacity(r);
    let (mut a, mut c) = (0.0, 0.0);
    for k in 0..r {
        a += targets[k];
        c += targets[r - 1 - k];
        up.push(a);
        lo.push(c);
    }
    (up, lo)
}

/// Number of cells where the spectrum leaves (mu_L - delta, mu_U + delta).
pub fn sandwich_violations(spec: &SpectrumField, lower: f64, upper: f64, delta: f64) -> usize {
    spec.lambdas
        .iter()
        .filter(|l| l.first().map_or(false, |&a| a >= upper + delta) || l.last().map_or(false, |&a| a <= lower - delta))
        .count()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumRow {
    pub t: f64,
    pub stats: SpectrumStats,
    pub sup_phi_sq: f64,
    pub energy: f64,
    /// Accumulated integral of the energy up to t.
    pub energy_integral: f64,
    pub theta_l2_sq: f64,
    pub det_residual: f64,
    pub tr_residual: f64,
    /// sup distance of the pointwise spectrum from the target vector.
    pub spectral_dev: f64,
}

#[derive(Clone, Debug, Default)]
pub struct SpectrumSeries {
    pub rows: Vec<SpectrumRow>,
    pub dt: f64,
    pub lambda: f64,
    pub targets: Vec<f64>,
    /// Error that stopped the run early, if any; rows up to it are preserved.
    pub aborted: Option<String>,
}

/// Counts of recorded steps violating each monotonicity statement.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MonotoneReport {
    pub hat_l: usize,
    pub hat_u: usize,
    pub m_l: usize,
    pub m_u: usize,
    pub sup_phi: usize,
}

impl MonotoneReport {
    pub fn total(&self) -> usize {
        self.hat_l + self.hat_u + self.m_l + self.m_u + self.sup_phi
    }
}

impl SpectrumSeries {
    /// Monotonicity check with slack `rel * (1 + |value|)`.
    pub fn monotonicity(&self, rel: f64) -> MonotoneReport {
        let mut rep = MonotoneReport::default();
        let up = |prev: f64, next: f64| next < prev - rel * (1.0 + prev.abs());
        let down = |prev: f64, next: f64| next > prev + rel * (1.0 + prev.abs());
        for w in self.rows.windows(2) {
            let (a, c) = (&w[0].stats, &w[1].stats);
            for k in 0..a.hat_l.len() {
                rep.hat_l += up(a.hat_l[k], c.hat_l[k]) as usize;
                rep.hat_u += down(a.hat_u[k], c.hat_u[k]) as usize;
                rep.m_l += up(a.m_l[k], c.m_l[k]) as usize;
                rep.m_u += down(a.m_u[k], c.m_u[k]) as usize;
            }
            rep.sup_phi += down(w[0].sup_phi_sq, w[1].sup_phi_sq) as usize;
        }
        rep
    }

    pub fn last(&self) -> Option<&SpectrumRow> {
        self.rows.last()
    }

    /// Least-squares slope of `f(row)` against t over the last quarter of rows.
    pub fn trend_last_quarter(&self, f: impl Fn(&SpectrumRow) -> f64) -> f64 {
        let n = self.rows.len();
        let start = n - (n / 4).max(2).min(n);
        let pts: Vec<(f64, f64)> = self.rows[start..].iter().map(|r| (r.t, f(r))).collect();
        let m = pts.len() as f64;
        let (mt, mv) = pts.iter().fold((0.0, 0.0), |(a, c), (t, v)| (a + t / m, c + v / m));
        let num: f64 = pts.iter().map(|(t, v)| (t - mt) * (v - mv)).sum();
        let den: f64 = pts.iter().map(|(t, _)| (t - mt).powi(2)).sum();
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlowConfig {
    pub t_end: f64,
    /// Fixed step; `None` uses [`stable_dt`] at t = 0.
    pub dt: Option<f64>,
    pub record_every: usize,
    pub normalize_trace: bool,
    /// Stop early once the spectral deviation falls below this fraction of its initial value.
    pub stop_fraction: Option<f64>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig { t_end: 1.0, dt: None, record_every: 10, normalize_trace: true, stop_fraction: None }
    }
}

pub fn record(b: &Bundle, state: &FlowState, targets: &[f64]) -> Result<SpectrumRow> {
    let spec = b.spectrum_field(&state.theta, &state.h)?;
    let (det_residual, tr_residual) = monitor_conservation(b, state);
    Ok(SpectrumRow {
        t: state.t,
        spectral_dev: spectral_deviation(&spec, targets),
        stats: spec.stats,
        sup_phi_sq: state.sup_phi_sq,
        energy: energy_dtheta(b, state),
        energy_integral: state.energy_integral,
        theta_l2_sq: theta_l2_sq(b, &state.h, &state.theta),
        det_residual,
        tr_residual,
    })
}

/// Runs the flow from `h0`, recording every `record_every` steps and at the end.
/// A step error stops the run with the rows recorded so far.
pub fn run_flow_from(b: &Bundle, h0: MetricField, targets: &[f64], cfg: &FlowConfig) -> Result<(SpectrumSeries, FlowState)> {
    let mut state = FlowState::new(b, h0, cfg.normalize_trace)?;
    let dt = cfg.dt.unwrap_or_else(|| stable_dt(b, &state));
    let mut series = SpectrumSeries { rows: Vec::new(), dt, lambda: state.lambda, targets: targets.to_vec(), aborted: None };
    series.rows.push(record(b, &state, targets)?);
    let dev0 = series.rows[0].spectral_dev;
    let steps = (cfg.t_end / dt).ceil() as usize;
    let every = cfg.record_every.max(1);
    for s in 1..=steps {
        match flow_step(b, &state, dt) {
            Ok(next) => state = next,
            Err(e) => {
                series.aborted = Some(e.to_string());
                break;
            }
        }
        if s % every == 0 || s == steps {
            let row = record(b, &state, targets)?;
            let done = cfg.stop_fraction.map_or(false, |f| row.spectral_dev < f * dev0);
            series.rows.push(row);
            if done {
                break;
            }
        }
    }
    Ok((series, state))
}

/// Runs the flow on a catalog bundle starting from its catalog metric.
pub fn run_flow(tag: &str, params: &bundle_geometry::CatalogParams, cfg: &FlowConfig) -> Result<(SpectrumSeries, FlowState, Bundle)> {
    let entry = bundle_geometry::catalog_bundle(tag, params)?;
    let targets = entry.targets();
    let (series, state) = run_flow_from(&entry.bundle, entry.h0, &targets, cfg)?;
    Ok((series, state, entry.bundle))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub t: f64,
    /// sup tr(h + h^{-1}) - 2r with h = H1^{-1} H2.
    pub sup_tr: f64,
    /// integral |A|^2_{H1, omega} with A = H2^{-1} dH2 - H1^{-1} dH1.
    pub int_a_sq: f64,
    /// integral |theta_2 - theta_1|^2_{H1}.
    pub int_theta_diff_sq: f64,
    /// Cells where |lambda(H2) - lambda(H1)|^2 > cond(sigma) |theta_2 - theta_1|^2_{H1}.
    pub bound_violations: usize,
    /// Cells where cond(sigma) > tr(h + h^{-1}) / 2.
    pub cond_violations: usize,
}

#[derive(Clone, Debug, Default)]
pub struct CompareSeries {
    pub rows: Vec<CompareRow>,
    pub dt: f64,
}

impl CompareSeries {
    /// Number of recorded steps where sup tr(h + h^{-1}) increased beyond slack.
    pub fn sup_tr_increases(&self, rel: f64) -> usize {
        self.rows.windows(2).filter(|w| w[1].sup_tr > w[0].sup_tr + rel * (1.0 + w[0].sup_tr.abs())).count()
    }
}

/// Pointwise and integrated comparison of two metrics on the same bundle.
pub fn compare_metrics(b: &Bundle, h1: &MetricField, th1: &[CMat], h2: &MetricField, th2: &[CMat], t: f64) -> CompareRow {
    let r = b.rank() as f64;
    let a1 = b.chern_connection(h1);
    let a2 = b.chern_connection(h2);
    let per: Vec<(f64, f64, f64, bool, bool)> = (0..b.len())
        .into_par_iter()
        .map(|i| {
            let cell = &b.mesh.cells[i];
            let l1 = h1.h[i].cholesky().expect("positive metric");
            let l1inv = l1.inverse().expect("invertible factor");
            let hrel = (&(&l1inv * &h2.h[i]) * &l1inv.adjoint()).hermitian_part();
            let (ev, _) = la::jacobi_eigh(&hrel);
            let trh: f64 = ev.iter().map(|e| e + 1.0 / e).sum::<f64>() - 2.0 * r;
            let cond_sigma = (ev[0] / ev[ev.len() - 1]).sqrt();
            let a = &a2[i] - &a1[i];
            let a_sq = 2.0 / cell.g * la::hs_norm_sq(&a, &l1);
            let diff = &th2[i] - &th1[i];
            let d_sq = la::hs_norm_sq(&diff, &l1);
            let s1 = la::jacobi_eigh(&la::to_unitary_frame(&th1[i], &l1).expect("invertible factor")).0;
            let l2 = h2.h[i].cholesky().expect("positive metric");
            let s2 = la::jacobi_eigh(&la::to_unitary_frame(&th2[i], &l2).expect("invertible factor")).0;
            let lhs: f64 = s1.iter().zip(&s2).map(|(x, y)| (x - y).powi(2)).sum();
            let rhs = cond_sigma * d_sq;
            let viol = lhs > rhs * (1.0 + 1e-9) + 1e-12;
            let cond_viol = cond_sigma > 0.5 * (trh + 2.0 * r) * (1.0 + 1e-12);
            (trh, cell.area * a_sq, cell.area * d_sq, viol, cond_viol)
        })
        .collect();
    CompareRow {
        t,
        sup_tr: per.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
        int_a_sq: per.iter().map(|p| p.1).sum(),
        int_theta_diff_sq: per.iter().map(|p| p.2).sum(),
        bound_violations: per.iter().filter(|p| p.3).count(),
        cond_violations: per.iter().filter(|p| p.4).count(),
    }
}

/// Runs two flows on the same bundle with a common step and compares them at
/// recording times. Neither initial metric is trace-normalized, so both use the
/// same Einstein constant.
pub fn two_solution_compare(
    b1: &Bundle,
    h1: MetricField,
    b2: &Bundle,
    h2: MetricField,
    t_end: f64,
    record_every: usize,
) -> Result<CompareSeries> {
    if b1.pres != b2.pres || !(Arc::ptr_eq(&b1.mesh, &b2.mesh) || b1.mesh.same_grid(&b2.mesh)) {
        return Err(FlowError::PresentationMismatch);
    }
    let b = b1;
    let mut s1 = FlowState::new(b, h1, false)?;
    let mut s2 = FlowState::new(b, h2, false)?;
    let dt = stable_dt(b, &s1).min(stable_dt(b, &s2));
    let mut out = CompareSeries { rows: Vec::new(), dt };
    out.rows.push(compare_metrics(b, &s1.h, &s1.theta, &s2.h, &s2.theta, 0.0));
    let steps = (t_end / dt).ceil() as usize;
    let every = record_every.max(1);
    for s in 1..=steps {
        let (n1, n2) = rayon::join(|| flow_step(b, &s1, dt), || flow_step(b, &s2, dt));
        s1 = n1?;
        s2 = n2?;
        if s % every == 0 || s == steps {
            out.rows.push(compare_metrics(b, &s1.h, &s1.theta, &s2.h, &s2.theta, s1.t));
        }
    }
    Ok(out)
}

/// Given H with lambda_mU(H) < 0, returns H' = e^f H with lambda_U(H') < 0 at every cell.
///
/// The majorant is the top eigenvalue itself, whose mean is lambda_mU, so f solves
/// `lap f = lambda_U - lambda_mU`. The discrete mean curvature is conformally
/// covariant only up to discretization error, so the construction is repeated on
/// the output until the pointwise check passes.
pub fn conformal_negativize(b: &Bundle, h: &MetricField) -> Result<MetricField> {
    let mut cur = h.clone();
    for _ in 0..8 {
        let theta = b.mean_curvature(&cur);
        let spec = b.spectrum_field(&theta, &cur)?;
        let top: Vec<f64> = spec.lambdas.iter().map(|l| l[0]).collect();
        if sup(&top) < 0.0 {
            return Ok(cur);
        }
        let m_u = spec.stats.m_u[0];
        if m_u >= 0.0 {
            return Err(FlowError::Infeasible(m_u));
        }
        let rho: Vec<f64> = top.iter().map(|v| v - m_u).collect();
        let f = base_manifold::poisson_solve(&b.mesh, &rho)?;
        cur = b.conformal(&cur, &f);
    }
    let theta = b.mean_curvature(&cur);
    let spec = b.spectrum_field(&theta, &cur)?;
    Err(FlowError::Infeasible(sup(&spec.lambdas.iter().map(|l| l[0]).collect::<Vec<_>>())))
}

/// Positive counterpart: runs [`conformal_negativize`] on the dual bundle and
/// dualizes back. Requires lambda_mL(H) > 0.
pub fn conformal_positivize(b: &Bundle, h: &MetricField) -> Result<MetricField> {
    let dual = Bundle::new(b.mesh.clone(), b.pres.dual())?;
    let hd = conformal_negativize(&dual, &bundle_geometry::dual_metric(h))?;
    Ok(bundle_geometry::dual_metric(&hd))
}

/// Lowest eigenvalue over the mesh.
pub fn inf_lambda_l(spec: &SpectrumField) -> f64 {
    inf(&spec.lambdas.iter().map(|l| *l.last().unwrap()).collect::<Vec<_>>())
}

/// Highest eigenvalue over the mesh.
pub fn sup_lambda_u(spec: &SpectrumField) -> f64 {
    sup(&spec.lambdas.iter().map(|l| l[0]).collect::<Vec<_>>())
}
