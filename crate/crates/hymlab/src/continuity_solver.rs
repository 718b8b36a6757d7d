//! The perturbed Hermitian-Einstein equation
//! `theta_H - lambda Id + eps log(K^{-1} H) = 0` and its continuation in eps.
//!
//! Unknowns are `s = log(K^{-1} H)` in the unitary frame of K. The residual is
//! conjugated by `e^{s/2}`, which makes it Hermitian, and is driven to zero by an
//! inexact Newton-Krylov iteration preconditioned with the scalar operator
//! `eps - lap` applied entrywise.
//!
//! When K and all transition functions are diagonal the equation splits into
//! linear scalar problems `(eps - lap) s_k = lambda - theta_K,kk`, solved without
//! ever forming H. This is the only representation that stays finite for small
//! eps on unstable bundles, where `|s| ~ 1/eps`.

use rayon::prelude::*;
use thiserror::Error;

use crate::base_manifold::{self, helmholtz_solve, laplacian_unchecked, ManifoldError};
use crate::bundle_geometry::{spectrum_stats, Bundle, BundleError, BundlePresentation, EndField, MetricField, SpectrumStats};
use crate::linalg_hermitian::{self as la, CMat, C64};

pub const DEFAULT_SCHEDULE: [f64; 7] = [1.0, 0.3, 0.1, 0.03, 0.01, 3e-3, 1e-3];

#[derive(Debug, Error)]
pub enum ContinuityError {
    #[error("eps = {0} is outside (0, 1]")]
    EpsilonOutOfRange(f64),
    #[error("no convergence at eps = {eps}: residual {residual:.3e}")]
    NoConvergence { eps: f64, residual: f64, best: Box<PerturbedSolution> },
    #[error("schedule must be strictly decreasing")]
    BadSchedule,
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
}

pub type Result<T> = std::result::Result<T, ContinuityError>;

#[derive(Clone, Debug)]
pub struct PerturbedSolution {
    pub epsilon: f64,
    /// `K e^s`, or `None` when it is not representable in floating point.
    pub h: Option<MetricField>,
    /// K-self-adjoint `log(K^{-1} H)` per cell.
    pub s: EndField,
    /// Max over cells of the Frobenius norm of the defect in the unitary frame of K.
    pub residual: f64,
    pub newton_iters: usize,
    /// Whether the split diagonal solver was used.
    pub diagonal: bool,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_newton: usize,
    pub restart: usize,
    pub max_krylov: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-8, max_newton: 40, restart: 40, max_krylov: 400 }
    }
}

/// Conformal change `e^g K` with `tr theta = r lambda` pointwise.
pub fn normalize_background(b: &Bundle, k: &MetricField) -> Result<MetricField> {
    b.check_metric(k)?;
    let lambda = b.einstein_constant(k);
    let r = b.rank() as f64;
    let rho: Vec<f64> = b.trace_curvature(k).iter().map(|t| (t - r * lambda) / r).collect();
    let g = base_manifold::poisson_solve(&b.mesh, &rho)?;
    Ok(b.conformal(k, &g))
}

/// True when the presentation has diagonal transition functions and every cell of K is diagonal.
pub fn is_diagonal(b: &Bundle, k: &MetricField) -> bool {
    let frames_diagonal = match &b.pres {
        BundlePresentation::Cp1Split { .. } => true,
        BundlePresentation::TorusAutomorphy { a1, a_tau } => off_diagonal(a1) == 0.0 && off_diagonal(a_tau) == 0.0,
        BundlePresentation::Derived { .. } => false,
    };
    frames_diagonal && k.h.iter().all(|m| off_diagonal(m) == 0.0)
}

fn off_diagonal(m: &CMat) -> f64 {
    let n = m.dim();
    let mut s = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s = s.max(m[(i, j)].norm());
            }
        }
    }
    s
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(ContinuityError::EpsilonOutOfRange(eps));
    }
    Ok(())
}

/// Solves the perturbed equation at `eps`, starting from `warm` (a K-self-adjoint s) if given.
pub fn solve_perturbed(b: &Bundle, k: &MetricField, eps: f64, warm: Option<&[CMat]>, opts: &SolveOptions) -> Result<PerturbedSolution> {
    check_eps(eps)?;
    b.check_metric(k)?;
    if let Some(w) = warm {
        b.check_field(w)?;
    }
    if is_diagonal(b, k) {
        solve_diagonal(b, k, eps)
    } else {
        solve_newton_krylov(b, k, eps, warm, opts)
    }
}

fn solve_diagonal(b: &Bundle, k: &MetricField, eps: f64) -> Result<PerturbedSolution> {
    let r = b.rank();
    let lambda = b.einstein_constant(k);
    let theta = b.mean_curvature(k);
    let mut comps = Vec::with_capacity(r);
    let mut residual = 0.0f64;
    for c in 0..r {
        let phi: Vec<f64> = theta.iter().map(|t| t[(c, c)].re - lambda).collect();
        let rhs: Vec<f64> = phi.iter().map(|p| -p).collect();
        let s = helmholtz_solve(&b.mesh, eps, &rhs)?;
        let lap = laplacian_unchecked(&b.mesh, &s);
        for i in 0..s.len() {
            residual = residual.max((phi[i] - lap[i] + eps * s[i]).abs());
        }
        comps.push(s);
    }
    // Off-diagonal entries of theta_K vanish identically for diagonal data; include them anyway.
    for t in &theta {
        residual = residual.max(off_diagonal(t));
    }
    let s: EndField = (0..b.len()).map(|i| CMat::from_real_diag(&comps.iter().map(|c| c[i]).collect::<Vec<_>>())).collect();
    let h = exp_metric(k, &s);
    Ok(PerturbedSolution { epsilon: eps, h, s, residual, newton_iters: 0, diagonal: true })
}

/// K e^s when every entry is finite.
fn exp_metric(k: &MetricField, s: &[CMat]) -> Option<MetricField> {
    let h: Vec<CMat> = k
        .h
        .iter()
        .zip(s)
        .map(|(ki, si)| {
            let l = ki.cholesky().expect("positive metric");
            let st = la::to_unitary_frame(si, &l).expect("invertible factor").hermitian_part();
            (&(&l * &la::expm_herm(&st)) * &l.adjoint()).hermitian_part()
        })
        .collect();
    if h.iter().all(|m| m.is_finite() && m.cholesky().is_some()) {
        Some(MetricField { h })
    } else {
        None
    }
}

/// Real coordinates of a Hermitian matrix: diagonal, then Re/Im of the strict upper triangle.
fn pack(m: &CMat, out: &mut [f64]) {
    let n = m.dim();
    let mut p = 0;
    for i in 0..n {
        out[p] = m[(i, i)].re;
        p += 1;
    }
    for i in 0..n {
        for j in i + 1..n {
            out[p] = m[(i, j)].re;
            out[p + 1] = m[(i, j)].im;
            p += 2;
        }
    }
}

fn unpack(v: &[f64], n: usize) -> CMat {
    let mut m = CMat::zeros(n);
    let mut p = 0;
    for i in 0..n {
        m[(i, i)] = C64::new(v[i], 0.0);
        p += 1;
    }
    for i in 0..n {
        for j in i + 1..n {
            m[(i, j)] = C64::new(v[p], v[p + 1]);
            m[(j, i)] = C64::new(v[p], -v[p + 1]);
            p += 2;
        }
    }
    m
}

struct NkProblem<'a> {
    b: &'a Bundle,
    chol: Vec<CMat>,
    lambda: f64,
    eps: f64,
    r: usize,
}

impl NkProblem<'_> {
    fn dof(&self) -> usize {
        self.r * self.r
    }

    fn metric(&self, x: &[f64]) -> MetricField {
        let d = self.dof();
        MetricField {
            h: self
                .chol
                .par_iter()
                .enumerate()
                .map(|(i, l)| {
                    let st = unpack(&x[i * d..(i + 1) * d], self.r);
                    (&(l * &la::expm_herm(&st)) * &l.adjoint()).hermitian_part()
                })
                .collect(),
        }
    }

    /// Packed residual and its pointwise max Frobenius norm.
    fn residual(&self, x: &[f64]) -> Option<(Vec<f64>, f64)> {
        let h = self.metric(x);
        if h.h.iter().any(|m| !m.is_finite() || m.cholesky().is_none()) {
            return None;
        }
        let theta = self.b.mean_curvature(&h);
        let d = self.dof();
        let per: Vec<(Vec<f64>, f64)> = (0..self.b.len())
            .into_par_iter()
            .map(|i| {
                let st = unpack(&x[i * d..(i + 1) * d], self.r);
                let half = la::expm_herm(&st.scale_re(0.5));
                let half_inv = la::expm_herm(&st.scale_re(-0.5));
                let mut t = la::to_unitary_frame(&theta[i], &self.chol[i]).expect("invertible factor");
                t.add_identity(-self.lambda);
                let mut rr = &(&half * &t) * &half_inv;
                rr.add_scaled(&st, C64::new(self.eps, 0.0));
                let rr = rr.hermitian_part();
                let mut v = vec![0.0; d];
                pack(&rr, &mut v);
                (v, rr.frob_norm())
            })
            .collect();
        let mut out = Vec::with_capacity(d * per.len());
        let mut mx = 0.0f64;
        for (v, n) in per {
            out.extend(v);
            mx = mx.max(n);
        }
        Some((out, mx))
    }

    /// Entrywise (eps - lap)^{-1}.
    fn precondition(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dof();
        let n = self.b.len();
        let mut out = vec![0.0; v.len()];
        for c in 0..d {
            let comp: Vec<f64> = (0..n).map(|i| v[i * d + c]).collect();
            let u = helmholtz_solve(&self.b.mesh, self.eps, &comp).expect("positive shift");
            for i in 0..n {
                out[i * d + c] = u[i];
            }
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Restarted right-preconditioned GMRES for A y = rhs, returning x = M^{-1} y.
fn gmres(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    precond: &dyn Fn(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    rtol: f64,
    restart: usize,
    max_iters: usize,
) -> Vec<f64> {
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let bnorm = norm(rhs);
    if bnorm == 0.0 {
        return x;
    }
    let mut iters = 0;
    while iters < max_iters {
        let ax = if x.iter().any(|v| *v != 0.0) { apply(&x) } else { vec![0.0; n] };
        let r0: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r0);
        if beta <= rtol * bnorm {
            break;
        }
        let mut vs: Vec<Vec<f64>> = vec![r0.iter().map(|v| v / beta).collect()];
        let mut zs: Vec<Vec<f64>> = Vec::new();
        let mut hess = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut m = 0;
        for j in 0..restart {
            iters += 1;
            let z = precond(&vs[j]);
            let mut w = apply(&z);
            zs.push(z);
            for i in 0..=j {
                let hij = dot(&w, &vs[i]);
                hess[i][j] = hij;
                w.iter_mut().zip(&vs[i]).for_each(|(a, b)| *a -= hij * b);
            }
            let hn = norm(&w);
            hess[j + 1][j] = hn;
            for i in 0..j {
                let t = cs[i] * hess[i][j] + sn[i] * hess[i + 1][j];
                hess[i + 1][j] = -sn[i] * hess[i][j] + cs[i] * hess[i + 1][j];
                hess[i][j] = t;
            }
            let den = (hess[j][j].powi(2) + hess[j + 1][j].powi(2)).sqrt();
            cs[j] = hess[j][j] / den;
            sn[j] = hess[j + 1][j] / den;
            hess[j][j] = den;
            hess[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            m = j + 1;
            if g[j + 1].abs() <= rtol * bnorm || hn == 0.0 || iters >= max_iters {
                break;
            }
            vs.push(w.iter().map(|v| v / hn).collect());
        }
        let mut y = vec![0.0; m];
        for i in (0..m).rev() {
            let mut s = g[i];
            for l in i + 1..m {
                s -= hess[i][l] * y[l];
            }
            y[i] = s / hess[i][i];
        }
        for (yi, z) in y.iter().zip(&zs) {
            x.iter_mut().zip(z).for_each(|(a, b)| *a += yi * b);
        }
        if g[m].abs() <= rtol * bnorm {
            break;
        }
    }
    x
}

fn solve_newton_krylov(b: &Bundle, k: &MetricField, eps: f64, warm: Option<&[CMat]>, opts: &SolveOptions) -> Result<PerturbedSolution> {
    let r = b.rank();
    let chol: Vec<CMat> = k.h.iter().map(|m| m.cholesky().expect("checked positive")).collect();
    let prob = NkProblem { b, chol, lambda: b.einstein_constant(k), eps, r };
    let d = prob.dof();
    let mut x = vec![0.0; d * b.len()];
    if let Some(w) = warm {
        for (i, (si, l)) in w.iter().zip(&prob.chol).enumerate() {
            let st = la::to_unitary_frame(si, l).expect("invertible factor").hermitian_part();
            pack(&st, &mut x[i * d..(i + 1) * d]);
        }
    }
    let (mut f, mut fmax) = prob.residual(&x).expect("warm start must give a finite metric");
    let mut iters = 0;
    while fmax > opts.tol && iters < opts.max_newton {
        iters += 1;
        let f0 = f.clone();
        let xs = x.clone();
        let xnorm = norm(&xs);
        let apply = |v: &[f64]| -> Vec<f64> {
            let vn = norm(v);
            if vn == 0.0 {
                return vec![0.0; v.len()];
            }
            let sigma = 1e-7 * (1.0 + xnorm) / vn;
            let xp: Vec<f64> = xs.iter().zip(v).map(|(a, b)| a + sigma * b).collect();
            match prob.residual(&xp) {
                Some((fp, _)) => fp.iter().zip(&f0).map(|(a, c)| (a - c) / sigma).collect(),
                None => vec![f64::NAN; v.len()],
            }
        };
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let forcing = (0.1 * fmax).clamp(1e-6, 1e-2);
        let delta = gmres(&apply, &|v| prob.precondition(v), &rhs, forcing, opts.restart, opts.max_krylov);
        if delta.iter().any(|v| !v.is_finite()) {
            break;
        }
        let f2 = norm(&f);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let xt: Vec<f64> = x.iter().zip(&delta).map(|(a, b)| a + step * b).collect();
            if let Some((ft, mt)) = prob.residual(&xt) {
                if norm(&ft) < (1.0 - 1e-4 * step) * f2 {
                    x = xt;
                    f = ft;
                    fmax = mt;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let s: EndField = prob
        .chol
        .iter()
        .enumerate()
        .map(|(i, l)| la::from_unitary_frame(&unpack(&x[i * d..(i + 1) * d], r), l).expect("invertible factor"))
        .collect();
    let sol = PerturbedSolution { epsilon: eps, h: Some(prob.metric(&x)), s, residual: fmax, newton_iters: iters, diagonal: false };
    if fmax > opts.tol {
        return Err(ContinuityError::NoConvergence { eps, residual: fmax, best: Box::new(sol) });
    }
    Ok(sol)
}

/// Pointwise descending spectra of `lambda Id - eps s`, which equals theta_H at a solution.
pub fn solution_spectra(k: &MetricField, lambda: f64, sol: &PerturbedSolution) -> Vec<Vec<f64>> {
    k.h.par_iter()
        .zip(sol.s.par_iter())
        .map(|(ki, si)| {
            let l = ki.cholesky().expect("positive metric");
            let mut m = la::to_unitary_frame(si, &l).expect("invertible factor").hermitian_part().scale_re(-sol.epsilon);
            m.add_identity(lambda);
            la::jacobi_eigh(&m).0
        })
        .collect()
}

/// Largest |eigenvalue| over cells of a K-self-adjoint field.
fn sup_operator_norm(k: &MetricField, x: &[CMat]) -> f64 {
    k.h.par_iter()
        .zip(x.par_iter())
        .map(|(ki, xi)| {
            let l = ki.cholesky().expect("positive metric");
            let (v, _) = la::jacobi_eigh(&la::to_unitary_frame(xi, &l).expect("invertible factor").hermitian_part());
            v.iter().fold(0.0f64, |a, e| a.max(e.abs()))
        })
        .reduce(|| 0.0, f64::max)
}

/// Largest oscillation over the mesh of any ordered eigenvalue of `s / sup|s|_K`.
/// Zero when the normalized field has constant eigenvalues; 0 for `s = 0`.
pub fn eigen_plateau(k: &MetricField, s: &[CMat]) -> f64 {
    let eigs: Vec<Vec<f64>> = k
        .h
        .par_iter()
        .zip(s.par_iter())
        .map(|(ki, si)| {
            let l = ki.cholesky().expect("positive metric");
            let mut v = la::jacobi_eigh(&la::to_unitary_frame(si, &l).expect("invertible factor").hermitian_part()).0;
            v.sort_by(|a, b| b.total_cmp(a));
            v
        })
        .collect();
    let scale = eigs.iter().flatten().fold(0.0f64, |a, e| a.max(e.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let r = eigs.first().map_or(0, Vec::len);
    (0..r)
        .map(|j| {
            let (lo, hi) = eigs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v[j]), hi.max(v[j])));
            (hi - lo) / scale
        })
        .fold(0.0, f64::max)
}

/// Checks of the a priori estimates at a solution.
#[derive(Clone, Debug, PartialEq)]
pub struct LemmaCheck {
    /// sup |eps s|_K.
    pub eps_s_inf: f64,
    /// sup |theta_K - lambda Id|_K.
    pub phi_k_inf: f64,
    /// sup |tr s|.
    pub trace_max: f64,
    /// ||eps s||_{L^2}.
    pub eps_s_l2: f64,
}

impl LemmaCheck {
    pub fn bound_holds(&self, slack: f64) -> bool {
        self.eps_s_inf <= self.phi_k_inf * (1.0 + slack) + slack
    }
}

pub fn lemma_check(b: &Bundle, k: &MetricField, sol: &PerturbedSolution) -> LemmaCheck {
    let lambda = b.einstein_constant(k);
    let phi: Vec<CMat> = b
        .mean_curvature(k)
        .into_iter()
        .map(|mut t| {
            t.add_identity(-lambda);
            t
        })
        .collect();
    let sq: Vec<f64> = b.norm_sq_field(&sol.s, k);
    let l2 = base_manifold::integrate(&b.mesh, &sq).expect("field sized to mesh").sqrt();
    LemmaCheck {
        eps_s_inf: sol.epsilon * sup_operator_norm(k, &sol.s),
        phi_k_inf: sup_operator_norm(k, &phi),
        trace_max: sol.s.iter().map(|s| s.trace().re.abs()).fold(0.0, f64::max),
        eps_s_l2: sol.epsilon * l2,
    }
}

/// |integral tr((theta_K - lambda) s) + <Psibar(s) dbar s, dbar s>_K + eps integral tr(s^2)|.
pub fn key_identity_residual(b: &Bundle, k: &MetricField, sol: &PerturbedSolution) -> f64 {
    let lambda = b.einstein_constant(k);
    let theta = b.mean_curvature(k);
    let a: Vec<f64> = theta
        .iter()
        .zip(&sol.s)
        .map(|(t, s)| {
            let mut p = t.clone();
            p.add_identity(-lambda);
            p.trace_prod_re(s) + sol.epsilon * s.trace_prod_re(s)
        })
        .collect();
    let first = base_manifold::integrate(&b.mesh, &a).expect("field sized to mesh");
    (first + b.psi_bar_energy(k, &sol.s)).abs()
}

/// Value at eps = 0 of the quadratic through three points.
pub fn richardson_zero(eps: [f64; 3], vals: [f64; 3]) -> f64 {
    let mut out = 0.0;
    for i in 0..3 {
        let mut w = 1.0;
        for j in 0..3 {
            if i != j {
                w *= (0.0 - eps[j]) / (eps[i] - eps[j]);
            }
        }
        out += w * vals[i];
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathRow {
    pub eps: f64,
    pub stats: SpectrumStats,
    pub residual: f64,
    pub lemma: LemmaCheck,
    pub key_identity: f64,
    /// sup |s_eps - s_prev|_K relative to the previous schedule entry.
    pub step_change: f64,
    /// See [`eigen_plateau`].
    pub u_plateau: f64,
}

#[derive(Clone, Debug, Default)]
pub struct EpsPath {
    pub rows: Vec<PathRow>,
    pub solutions: Vec<PerturbedSolution>,
    /// Extrapolated lambda_mU and lambda_mL (k = 1) at eps = 0.
    pub limit_m_u: Option<f64>,
    pub limit_m_l: Option<f64>,
    /// (2 pi / Vol) mu_U and (2 pi / Vol) mu_L.
    pub target_u: f64,
    pub target_l: f64,
    pub aborted: Option<String>,
}

/// Solves along a strictly decreasing schedule with warm starts. `targets` are
/// the descending values (2 pi / Vol) mu_i.
pub fn eps_path(b: &Bundle, k: &MetricField, schedule: &[f64], targets: &[f64], opts: &SolveOptions) -> Result<EpsPath> {
    if schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(ContinuityError::BadSchedule);
    }
    for &e in schedule {
        check_eps(e)?;
    }
    let lambda = b.einstein_constant(k);
    let mut path = EpsPath {
        target_u: targets.first().copied().unwrap_or(lambda),
        target_l: targets.last().copied().unwrap_or(lambda),
        ..Default::default()
    };
    for &eps in schedule {
        let warm = path.solutions.last().map(|s| s.s.clone());
        let sol = match solve_perturbed(b, k, eps, warm.as_deref(), opts) {
            Ok(s) => s,
            Err(e) => {
                path.aborted = Some(e.to_string());
                break;
            }
        };
        let spectra = solution_spectra(k, lambda, &sol);
        let step_change = match &warm {
            Some(w) => {
                let d: Vec<CMat> = sol.s.iter().zip(w).map(|(a, c)| a - c).collect();
                sup_operator_norm(k, &d)
            }
            None => 0.0,
        };
        path.rows.push(PathRow {
            eps,
            stats: spectrum_stats(&b.mesh, &spectra),
            residual: sol.residual,
            lemma: lemma_check(b, k, &sol),
            key_identity: key_identity_residual(b, k, &sol),
            step_change,
            u_plateau: eigen_plateau(k, &sol.s),
        });
        path.solutions.push(sol);
    }
    let n = path.rows.len();
    if n >= 3 {
        let last = &path.rows[n - 3..];
        let e = [last[0].eps, last[1].eps, last[2].eps];
        path.limit_m_u = Some(richardson_zero(e, [last[0].stats.m_u[0], last[1].stats.m_u[0], last[2].stats.m_u[0]]));
        path.limit_m_l = Some(richardson_zero(e, [last[0].stats.m_l[0], last[1].stats.m_l[0], last[2].stats.m_l[0]]));
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn pack_round_trip() {
        let m = CMat::from_rows(&[
            vec![C64::new(1.0, 0.0), C64::new(0.2, -0.3), C64::new(0.5, 0.1)],
            vec![C64::new(0.2, 0.3), C64::new(-2.0, 0.0), C64::new(0.0, 0.7)],
            vec![C64::new(0.5, -0.1), C64::new(0.0, -0.7), C64::new(0.4, 0.0)],
        ]);
        let mut v = vec![0.0; 9];
        pack(&m, &mut v);
        assert_eq!(unpack(&v, 3), m);
    }

    #[test]
    fn richardson_is_exact_on_quadratics() {
        let f = |e: f64| 2.0 - 3.0 * e + 0.5 * e * e;
        let e = [0.01, 0.003, 0.001];
        assert!((richardson_zero(e, e.map(f)) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn eps_range() {
        let b = Bundle::new(
            Arc::new(base_manifold::build_cp1(8).unwrap()),
            BundlePresentation::Cp1Split { degrees: vec![0, 0] },
        )
        .unwrap();
        let k = MetricField { h: vec![CMat::identity(2); b.len()] };
        for e in [0.0, -1.0, 1.5, f64::NAN] {
            assert!(matches!(solve_perturbed(&b, &k, e, None, &SolveOptions::default()), Err(ContinuityError::EpsilonOutOfRange(_))));
        }
        let sol = solve_perturbed(&b, &k, 0.5, None, &SolveOptions::default()).unwrap();
        assert!(sol.s.iter().all(|s| s.max_abs() == 0.0));
        assert!(matches!(eps_path(&b, &k, &[0.1, 0.3], &[0.0, 0.0], &SolveOptions::default()), Err(ContinuityError::BadSchedule)));
    }
}
