//! Holomorphic bundles over a meshed base, Hermitian metrics and their curvature.
//!
//! Every cell stores bundle data in the holomorphic frame of its own chart.
//! Data of a neighboring cell `j` is brought into the frame of cell `i` through a
//! constant change of frame `G`: metrics transform as `G* H G`, endomorphisms as
//! `G^{-1} X G`. On the projective line `G` comes from the transition functions
//! of the bundle evaluated at the center of `j`; on the torus it is a product of
//! powers of the factors of automorphy.
//!
//! Mean curvature `theta = sqrt(-1) Lambda F_H` is discretized in finite-volume
//! form from `F_H = dbar(H^{-1} d H)`: the cell integral becomes a boundary sum of
//! `H^{-1}` times normal and tangential differences of `H`. The result is made
//! `H`-self-adjoint and its trace is replaced by the discrete Laplacian of
//! `-log det H`, so the trace obeys the scalar theory exactly.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use smallvec::SmallVec;
use thiserror::Error;

use crate::base_manifold::{self, BaseManifold, Chart, Link, ManifoldError};
use crate::hn_algebra::{DescendingVector, HNType};
use crate::linalg_hermitian::{self as la, psi_bar, CMat, LinalgError, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BundleError {
    #[error("unknown catalog tag '{0}'")]
    UnknownTag(String),
    #[error("presentation does not fit the base: {0}")]
    InvalidPresentation(String),
    #[error("projection field fails {what} at cell {cell} (defect {defect:.3e})")]
    NotAProjection { cell: usize, what: &'static str, defect: f64 },
    #[error("exterior power {k} exceeds rank {r}")]
    RankTooSmall { k: usize, r: usize },
    #[error("metric is not positive definite at cell {0}")]
    NotPositiveDefinite(usize),
    #[error("field has {got} entries of rank {rank_got}, expected {expected} of rank {rank}")]
    FieldShape { got: usize, expected: usize, rank_got: usize, rank: usize },
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, BundleError>;

/// Operation producing a derived bundle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InducedOp {
    /// E (x) F.
    Tensor,
    TensorPow(usize),
    SymPow(usize),
    ExtPow(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum BundlePresentation {
    /// O(a_1) + ... + O(a_r) over the projective line; transition diag(z^{a_k}) from the
    /// z-frame to the w-frame, so H_w = g* H_z g.
    Cp1Split { degrees: Vec<i32> },
    /// Constant factors of automorphy on the torus: H(z+1) = A1^{-*} H(z) A1^{-1},
    /// H(z+tau) = At^{-*} H(z) At^{-1}.
    TorusAutomorphy { a1: CMat, a_tau: CMat },
    /// Tensor construction applied to one or two presentations.
    Derived { op: InducedOp, base: Box<BundlePresentation>, other: Option<Box<BundlePresentation>> },
}

impl BundlePresentation {
    pub fn rank(&self) -> usize {
        match self {
            BundlePresentation::Cp1Split { degrees } => degrees.len(),
            BundlePresentation::TorusAutomorphy { a1, .. } => a1.dim(),
            BundlePresentation::Derived { op, base, other } => {
                let r = base.rank();
                match *op {
                    InducedOp::Tensor => r * other.as_ref().map(|o| o.rank()).unwrap_or(r),
                    InducedOp::TensorPow(k) => r.pow(k as u32),
                    InducedOp::SymPow(k) => crate::hn_algebra::binomial(r + k - 1, k),
                    InducedOp::ExtPow(k) => crate::hn_algebra::binomial(r, k),
                }
            }
        }
    }

    /// Presentation of the dual bundle: every transition G becomes G^{-T}.
    pub fn dual(&self) -> BundlePresentation {
        match self {
            BundlePresentation::Cp1Split { degrees } => BundlePresentation::Cp1Split { degrees: degrees.iter().map(|d| -d).collect() },
            BundlePresentation::TorusAutomorphy { a1, a_tau } => BundlePresentation::TorusAutomorphy {
                a1: inverse_transpose(a1),
                a_tau: inverse_transpose(a_tau),
            },
            BundlePresentation::Derived { op, base, other } => BundlePresentation::Derived {
                op: *op,
                base: Box::new(base.dual()),
                other: other.as_ref().map(|o| Box::new(o.dual())),
            },
        }
    }

    /// Change of frame bringing data of cell `j` into the frame of cell `i`.
    fn frame(&self, m: &BaseManifold, i: usize, j: usize, link: Link) -> Option<CMat> {
        if link == Link::Same {
            return None;
        }
        match self {
            BundlePresentation::Cp1Split { degrees } => {
                let (ci, cj) = (&m.cells[i], &m.cells[j]);
                // From the w-frame into the z-frame G = diag(w^a); the reverse G = diag(z^a).
                let t = match (ci.chart, cj.chart) {
                    (Chart::Z, Chart::W) | (Chart::W, Chart::Z) => cj.zeta,
                    _ => return None,
                };
                Some(CMat::from_diag(&degrees.iter().map(|&a| t.powi(a)).collect::<Vec<_>>()))
            }
            BundlePresentation::TorusAutomorphy { a1, a_tau } => match link {
                Link::Shift(mm, nn) => Some(&mat_pow(a1, -mm) * &mat_pow(a_tau, -nn)),
                _ => None,
            },
            BundlePresentation::Derived { op, base, other } => {
                let r = base.rank();
                let g1 = base.frame(m, i, j, link).unwrap_or_else(|| CMat::identity(r));
                let g2 = other.as_ref().map(|o| o.frame(m, i, j, link).unwrap_or_else(|| CMat::identity(o.rank())));
                Some(induced_group(*op, &g1, g2.as_ref()))
            }
        }
    }

    fn validate(&self, m: &BaseManifold) -> Result<()> {
        match (self, m.kind) {
            (BundlePresentation::Cp1Split { degrees }, base_manifold::ManifoldKind::Cp1) => {
                if degrees.is_empty() {
                    return Err(BundleError::InvalidPresentation("empty degree list".into()));
                }
                Ok(())
            }
            (BundlePresentation::TorusAutomorphy { a1, a_tau }, base_manifold::ManifoldKind::Torus { .. }) => {
                if a1.dim() != a_tau.dim() {
                    return Err(BundleError::InvalidPresentation("factor sizes differ".into()));
                }
                let comm = a1.commutator(a_tau).max_abs();
                if comm > 1e-12 * (1.0 + a1.max_abs() * a_tau.max_abs()) {
                    return Err(BundleError::InvalidPresentation(format!("factors do not commute ({comm:.2e})")));
                }
                if a1.inverse().is_none() || a_tau.inverse().is_none() {
                    return Err(BundleError::InvalidPresentation("singular factor of automorphy".into()));
                }
                Ok(())
            }
            (BundlePresentation::Derived { op, base, other }, _) => {
                base.validate(m)?;
                if let Some(o) = other {
                    o.validate(m)?;
                }
                if let InducedOp::ExtPow(k) = op {
                    if *k > base.rank() || *k == 0 {
                        return Err(BundleError::RankTooSmall { k: *k, r: base.rank() });
                    }
                }
                if *op == InducedOp::Tensor && other.is_none() {
                    return Err(BundleError::InvalidPresentation("tensor product needs two factors".into()));
                }
                Ok(())
            }
            _ => Err(BundleError::InvalidPresentation("presentation and base manifold kinds differ".into())),
        }
    }
}

fn inverse_transpose(a: &CMat) -> CMat {
    let inv = a.inverse().unwrap_or_else(|| CMat::identity(a.dim()));
    CMat::from_fn(a.dim(), |i, j| inv[(j, i)])
}

/// Metric induced on the dual bundle, H^{-T} cellwise.
pub fn dual_metric(h: &MetricField) -> MetricField {
    MetricField { h: h.h.iter().map(|x| inverse_transpose(x).hermitian_part()).collect() }
}

fn mat_pow(a: &CMat, e: i32) -> CMat {
    let base = if e < 0 { a.inverse().expect("validated invertible") } else { a.clone() };
    let mut out = CMat::identity(a.dim());
    for _ in 0..e.unsigned_abs() {
        out = &out * &base;
    }
    out
}

/// Frame change with cached inverse and log |det G|^2.
#[derive(Clone, Debug)]
struct Frame {
    g: CMat,
    ginv: CMat,
    logdet: f64,
}

impl Frame {
    fn new(g: CMat) -> Self {
        let ginv = g.inverse().expect("frame changes are invertible");
        let logdet = g.det().norm_sqr().ln();
        Frame { g, ginv, logdet }
    }
}

fn pull_metric(h: &CMat, f: &Option<Frame>) -> CMat {
    match f {
        None => h.clone(),
        Some(f) => &(&f.g.adjoint() * h) * &f.g,
    }
}

fn pull_end(x: &CMat, f: &Option<Frame>) -> CMat {
    match f {
        None => x.clone(),
        Some(f) => &(&f.ginv * x) * &f.g,
    }
}

fn pull_logdet(ld: f64, f: &Option<Frame>) -> f64 {
    ld + f.as_ref().map(|f| f.logdet).unwrap_or(0.0)
}

/// Hermitian metric: one positive-definite matrix per cell, in the cell's frame.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField {
    pub h: Vec<CMat>,
}

/// Endomorphism per cell, in the cell's frame.
pub type EndField = Vec<CMat>;

/// Projection per cell, in the cell's frame.
pub type ProjectionField = Vec<CMat>;

/// A presentation placed on a mesh, with every change of frame precomputed.
#[derive(Clone, Debug)]
pub struct Bundle {
    pub mesh: Arc<BaseManifold>,
    pub pres: BundlePresentation,
    rank: usize,
    face_frames: Vec<Vec<Option<Frame>>>,
    corner_frames: Vec<Vec<SmallVec<[Option<Frame>; 4]>>>,
}

/// Pointwise spectra and the eigenvalue statistics built from them.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumField {
    /// Descending eigenvalues at every cell.
    pub lambdas: Vec<Vec<f64>>,
    pub stats: SpectrumStats,
}

/// For k = 1..r (index k-1): inf of lambda_{L,k}, sup of lambda_{U,k} and their averages.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumStats {
    pub hat_l: Vec<f64>,
    pub hat_u: Vec<f64>,
    pub m_l: Vec<f64>,
    pub m_u: Vec<f64>,
}

impl Bundle {
    pub fn new(mesh: Arc<BaseManifold>, pres: BundlePresentation) -> Result<Self> {
        pres.validate(&mesh)?;
        let rank = pres.rank();
        let m = &*mesh;
        let face_frames = m
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| c.faces.iter().map(|f| pres.frame(m, i, f.nb, f.link).map(Frame::new)).collect())
            .collect();
        let corner_frames = m
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.corners
                    .iter()
                    .map(|co| co.cells.iter().map(|&(j, l)| pres.frame(m, i, j, l).map(Frame::new)).collect())
                    .collect()
            })
            .collect();
        Ok(Bundle { mesh, pres, rank, face_frames, corner_frames })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.mesh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mesh.is_empty()
    }

    pub fn check_field(&self, f: &[CMat]) -> Result<()> {
        let r = f.first().map(|x| x.dim()).unwrap_or(0);
        if f.len() != self.len() || f.iter().any(|x| x.dim() != self.rank) {
            return Err(BundleError::FieldShape { got: f.len(), expected: self.len(), rank_got: r, rank: self.rank });
        }
        Ok(())
    }

    /// Validates positivity of every cell value.
    pub fn check_metric(&self, h: &MetricField) -> Result<()> {
        self.check_field(&h.h)?;
        for (i, x) in h.h.iter().enumerate() {
            if x.cholesky().is_none() {
                return Err(BundleError::NotPositiveDefinite(i));
            }
        }
        Ok(())
    }

    /// log det H per cell.
    pub fn logdet_field(&self, h: &MetricField) -> Vec<f64> {
        h.h.iter().map(|x| x.det().re.ln()).collect()
    }

    /// tr theta_H = sqrt(-1) Lambda d dbar (-log det H), with the chart offsets of det G.
    pub fn trace_curvature(&self, h: &MetricField) -> Vec<f64> {
        let ld = self.logdet_field(h);
        self.trace_curvature_from_logdet(&ld)
    }

    fn trace_curvature_from_logdet(&self, ld: &[f64]) -> Vec<f64> {
        self.mesh
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let s: f64 = c
                    .faces
                    .iter()
                    .zip(&self.face_frames[i])
                    .map(|(f, fr)| f.coef * (ld[i] - pull_logdet(ld[f.nb], fr)))
                    .sum();
                0.5 * s / c.area
            })
            .collect()
    }

    /// theta_H = sqrt(-1) Lambda F_H at every cell.
    pub fn mean_curvature(&self, h: &MetricField) -> EndField {
        let ld = self.logdet_field(h);
        let tr = self.trace_curvature_from_logdet(&ld);
        (0..self.len()).into_par_iter().map(|i| self.theta_cell(h, i, tr[i])).collect()
    }

    fn theta_cell(&self, h: &MetricField, i: usize, trace: f64) -> CMat {
        let cell = &self.mesh.cells[i];
        let r = self.rank;
        let hi = &h.h[i];
        let corners: SmallVec<[CMat; 6]> = cell
            .corners
            .iter()
            .zip(&self.corner_frames[i])
            .map(|(co, frs)| {
                let mut acc = CMat::zeros(r);
                for ((&(j, _), fr), &w) in co.cells.iter().zip(frs).zip(&co.weights) {
                    acc.add_scaled(&pull_metric(&h.h[j], fr), C64::new(w, 0.0));
                }
                acc
            })
            .collect();
        let li = hi.cholesky().expect("positive metric");
        let li_inv = li.inverse().expect("invertible factor");
        let li_inv_adj = li_inv.adjoint();
        // Normal fluxes are accumulated in the unitary frame of H_i and mapped back once.
        let mut normal = CMat::zeros(r);
        let mut sum = CMat::zeros(r);
        for (f, fr) in cell.faces.iter().zip(&self.face_frames[i]) {
            let hj = pull_metric(&h.h[f.nb], fr);
            // H^{-1} dH along the geodesic from H_i to H_j: L^{-*} log(L^{-1} H_j L^{-*}) L*.
            let m = &(&li_inv * &hj) * &li_inv_adj;
            normal.add_scaled(&la::logm_pd(&m.hermitian_part()), C64::new(-0.5 * f.coef, 0.0));
            let mut hf = hi + &hj;
            hf.scale_re_mut(0.5);
            let hf_inv = hf.inverse().expect("positive metric");
            sum.add_scaled(&(&hf_inv * &(&corners[f.q] - &corners[f.p])), C64::new(0.0, 0.5));
        }
        sum += &(&(&li_inv_adj * &normal) * &li.adjoint());
        sum.scale_re_mut(1.0 / cell.area);
        let hinv = hi.inverse().expect("positive metric");
        let mut theta = la::h_self_adjoint_part(&sum, hi, &hinv);
        let shift = (trace - theta.trace().re) / r as f64;
        theta.add_identity(shift);
        theta
    }

    /// Green-Gauss estimate of d/dzbar of an endomorphism field.
    pub fn dbar_end(&self, x: &[CMat]) -> EndField {
        (0..self.len()).into_par_iter().map(|i| self.contour_end(x, i, false)).collect()
    }

    /// Green-Gauss estimate of d/dz of an endomorphism field.
    pub fn del_end(&self, x: &[CMat]) -> EndField {
        (0..self.len()).into_par_iter().map(|i| self.contour_end(x, i, true)).collect()
    }

    fn contour_end(&self, x: &[CMat], i: usize, holo: bool) -> CMat {
        let cell = &self.mesh.cells[i];
        let mut acc = CMat::zeros(self.rank);
        for (f, fr) in cell.faces.iter().zip(&self.face_frames[i]) {
            let xf = &x[i] + &pull_end(&x[f.nb], fr);
            let dz = cell.corners[f.q].zeta - cell.corners[f.p].zeta;
            // d/dzbar ~ (1/2iA) oint X dz,  d/dz ~ (i/2A) oint X dzbar; the factor 1/2 averages X_f.
            let w = if holo { dz.conj() * C64::new(0.0, 0.25 / cell.chart_area) } else { dz / C64::new(0.0, 4.0 * cell.chart_area) };
            acc.add_scaled(&xf, w);
        }
        acc
    }

    /// Chern connection form H^{-1} dH/dz per cell.
    pub fn chern_connection(&self, h: &MetricField) -> EndField {
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                let cell = &self.mesh.cells[i];
                let mut acc = CMat::zeros(self.rank);
                for (f, fr) in cell.faces.iter().zip(&self.face_frames[i]) {
                    let hf = &h.h[i] + &pull_metric(&h.h[f.nb], fr);
                    let dz = cell.corners[f.q].zeta - cell.corners[f.p].zeta;
                    acc.add_scaled(&hf, dz.conj() * C64::new(0.0, 0.25 / cell.chart_area));
                }
                &h.h[i].inverse().expect("positive metric") * &acc
            })
            .collect()
    }

    /// Integral of |dbar X|^2_{H, omega} = sum A (2/g) |dX/dzbar|^2_H.
    pub fn dbar_energy(&self, x: &[CMat], h: &MetricField) -> f64 {
        let d = self.dbar_end(x);
        self.mesh
            .cells
            .iter()
            .zip(d.iter().zip(&h.h))
            .map(|(c, (dx, hi))| {
                let l = hi.cholesky().expect("positive metric");
                c.area * 2.0 / c.g * la::hs_norm_sq(dx, &l)
            })
            .sum()
    }

    /// Pointwise H-norm squared of an endomorphism field.
    pub fn norm_sq_field(&self, x: &[CMat], h: &MetricField) -> Vec<f64> {
        x.iter()
            .zip(&h.h)
            .map(|(xi, hi)| la::hs_norm_sq(xi, &hi.cholesky().expect("positive metric")))
            .collect()
    }

    /// Descending eigenvalues of H-self-adjoint endomorphisms and their statistics.
    pub fn spectrum_field(&self, theta: &[CMat], h: &MetricField) -> Result<SpectrumField> {
        self.check_field(theta)?;
        let lambdas: Vec<Vec<f64>> = theta
            .par_iter()
            .zip(h.h.par_iter())
            .map(|(t, hi)| {
                let l = hi.cholesky().expect("positive metric");
                let m = la::to_unitary_frame(t, &l).expect("invertible factor");
                la::jacobi_eigh(&m).0
            })
            .collect();
        let stats = spectrum_stats(&self.mesh, &lambdas);
        Ok(SpectrumField { lambdas, stats })
    }

    /// (1/2pi) integral of tr theta_H.
    pub fn degree(&self, h: &MetricField) -> f64 {
        let tr = self.trace_curvature(h);
        base_manifold::integrate(&self.mesh, &tr).expect("field sized to mesh") / (2.0 * PI)
    }

    /// Slope constant 2 pi mu / Vol of the Hermitian-Einstein equation.
    pub fn einstein_constant(&self, h: &MetricField) -> f64 {
        2.0 * PI * self.degree(h) / (self.rank as f64 * self.mesh.volume())
    }

    /// (1/2pi) integral of tr(pi theta_H) - |dbar pi|^2_H.
    pub fn subsheaf_degree(&self, h: &MetricField, pi: &[CMat]) -> Result<f64> {
        self.check_field(pi)?;
        for (i, (p, hi)) in pi.iter().zip(&h.h).enumerate() {
            let idem = (&(p * p) - p).max_abs();
            if idem > 1e-10 * (1.0 + p.max_abs()) {
                return Err(BundleError::NotAProjection { cell: i, what: "idempotence", defect: idem });
            }
            let hinv = hi.inverse().ok_or(BundleError::NotPositiveDefinite(i))?;
            let adj = (&(&(&hinv * &p.adjoint()) * hi) - p).max_abs();
            if adj > 1e-10 * (1.0 + p.max_abs()) {
                return Err(BundleError::NotAProjection { cell: i, what: "self-adjointness", defect: adj });
            }
        }
        let theta = self.mean_curvature(h);
        let tr: Vec<f64> = pi.iter().zip(&theta).map(|(p, t)| p.trace_prod_re(t)).collect();
        let first = base_manifold::integrate(&self.mesh, &tr)?;
        let second = self.dbar_energy(pi, h);
        Ok((first - second) / (2.0 * PI))
    }

    /// H-orthogonal projection onto the span of the given frame vectors.
    pub fn projection_onto_frame_span(&self, h: &MetricField, cols: &[usize]) -> ProjectionField {
        let r = self.rank;
        h.h.iter()
            .map(|hi| {
                let k = cols.len();
                let s = CMat::from_fn(k, |a, b| hi[(cols[a], cols[b])]);
                let sinv = s.inverse().expect("positive metric");
                let mut p = CMat::zeros(r);
                for (a, &ca) in cols.iter().enumerate() {
                    for b in 0..r {
                        let mut v = C64::new(0.0, 0.0);
                        for (d, &cd) in cols.iter().enumerate() {
                            v += sinv[(a, d)] * hi[(cd, b)];
                        }
                        p[(ca, b)] = v;
                    }
                }
                p
            })
            .collect()
    }

    /// s = log(K^{-1} H) per cell, K-self-adjoint.
    pub fn relative_log(&self, k: &MetricField, h: &MetricField) -> EndField {
        k.h.par_iter()
            .zip(h.h.par_iter())
            .map(|(ki, hi)| {
                let l = ki.cholesky().expect("positive metric");
                let linv = l.inverse().expect("invertible factor");
                let m = &(&linv * hi) * &linv.adjoint();
                let st = la::logm_pd(&m);
                la::from_unitary_frame(&st, &l).expect("invertible factor")
            })
            .collect()
    }

    /// Integral of <Psibar(s)(dbar s), dbar s>_K for a K-self-adjoint field s.
    pub fn psi_bar_energy(&self, k: &MetricField, s: &[CMat]) -> f64 {
        let ds = self.dbar_end(s);
        self.mesh
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let l = k.h[i].cholesky().expect("positive metric");
                let st = la::to_unitary_frame(&s[i], &l).expect("invertible factor").hermitian_part();
                let b = la::to_unitary_frame(&ds[i], &l).expect("invertible factor");
                let (mu, u) = la::jacobi_eigh(&st);
                let bt = &(&u.adjoint() * &b) * &u;
                let r = self.rank;
                let mut acc = 0.0;
                for a in 0..r {
                    for bb in 0..r {
                        let w = bt[(a, bb)].norm_sqr();
                        if w > 0.0 {
                            acc += psi_bar(mu[bb], mu[a]) * w;
                        }
                    }
                }
                c.area * 2.0 / c.g * acc
            })
            .sum()
    }

    /// Both sides of the identity
    /// int tr(theta_K s) + int <Psibar(s)(dbar s), dbar s>_K = int tr(theta_H s), s = log(K^{-1}H).
    pub fn donaldson_identity_sides(&self, k: &MetricField, h: &MetricField) -> (f64, f64) {
        let s = self.relative_log(k, h);
        let tk = self.mean_curvature(k);
        let th = self.mean_curvature(h);
        let m = &self.mesh;
        let a: Vec<f64> = tk.iter().zip(&s).map(|(t, si)| t.trace_prod_re(si)).collect();
        let b: Vec<f64> = th.iter().zip(&s).map(|(t, si)| t.trace_prod_re(si)).collect();
        let lhs = base_manifold::integrate(m, &a).unwrap() + self.psi_bar_energy(k, &s);
        let rhs = base_manifold::integrate(m, &b).unwrap();
        (lhs, rhs)
    }

    pub fn donaldson_identity_residual(&self, k: &MetricField, h: &MetricField) -> f64 {
        let (l, r) = self.donaldson_identity_sides(k, h);
        (l - r).abs()
    }

    /// Multiplies a metric by e^f cellwise.
    pub fn conformal(&self, h: &MetricField, f: &[f64]) -> MetricField {
        MetricField { h: h.h.iter().zip(f).map(|(x, v)| x.scale_re(v.exp())).collect() }
    }
}

/// Statistics of pointwise descending spectra.
pub fn spectrum_stats(m: &BaseManifold, lambdas: &[Vec<f64>]) -> SpectrumStats {
    let r = lambdas.first().map(|v| v.len()).unwrap_or(0);
    let vol = m.volume();
    let mut st = SpectrumStats {
        hat_l: vec![f64::INFINITY; r],
        hat_u: vec![f64::NEG_INFINITY; r],
        m_l: vec![0.0; r],
        m_u: vec![0.0; r],
    };
    for (c, lam) in m.cells.iter().zip(lambdas) {
        let mut up = 0.0;
        let mut lo = 0.0;
        for k in 0..r {
            up += lam[k];
            lo += lam[r - 1 - k];
            st.hat_u[k] = st.hat_u[k].max(up);
            st.hat_l[k] = st.hat_l[k].min(lo);
            st.m_u[k] += c.area * up / vol;
            st.m_l[k] += c.area * lo / vol;
        }
    }
    st
}

/// Basis of a derived space as combinations of tensor-power basis tuples.
struct DerivedBasis {
    k: usize,
    cols: Vec<Vec<(Vec<usize>, f64)>>,
}

fn derived_basis(op: InducedOp, r: usize) -> DerivedBasis {
    use crate::hn_algebra::{enumerate_indices, IndexSetKind};
    match op {
        InducedOp::Tensor => unreachable!("tensor products are handled with Kronecker products"),
        InducedOp::TensorPow(k) => {
            let idx = enumerate_indices(IndexSetKind::Tensor { k, r }).expect("k >= 1");
            DerivedBasis { k, cols: idx.into_iter().map(|t| vec![(t.iter().map(|i| i - 1).collect(), 1.0)]).collect() }
        }
        InducedOp::SymPow(k) => {
            let idx = enumerate_indices(IndexSetKind::Sym { k, r }).expect("k >= 1");
            let cols = idx
                .into_iter()
                .map(|a| {
                    let mut base = Vec::with_capacity(k);
                    for (i, &ai) in a.iter().enumerate() {
                        base.extend(std::iter::repeat(i).take(ai));
                    }
                    let perms = distinct_permutations(&base);
                    let c = 1.0 / (perms.len() as f64).sqrt();
                    perms.into_iter().map(|p| (p, c)).collect()
                })
                .collect();
            DerivedBasis { k, cols }
        }
        InducedOp::ExtPow(k) => {
            let idx = enumerate_indices(IndexSetKind::Ext { k, r }).expect("k <= r");
            let fact: f64 = (1..=k).map(|x| x as f64).product();
            let cols = idx
                .into_iter()
                .map(|t| {
                    let base: Vec<usize> = t.iter().map(|i| i - 1).collect();
                    signed_permutations(&base).into_iter().map(|(p, s)| (p, s / fact.sqrt())).collect()
                })
                .collect();
            DerivedBasis { k, cols }
        }
    }
}

fn distinct_permutations(v: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = v.to_vec();
    cur.sort();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let n = cur.len();
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            return out;
        };
        let j = (i + 1..n).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
}

fn signed_permutations(v: &[usize]) -> Vec<(Vec<usize>, f64)> {
    distinct_permutations(v)
        .into_iter()
        .map(|p| {
            let mut inv = 0;
            for a in 0..p.len() {
                for b in a + 1..p.len() {
                    if p[a] > p[b] {
                        inv += 1;
                    }
                }
            }
            (p, if inv % 2 == 0 { 1.0 } else { -1.0 })
        })
        .collect()
}

fn induced_with(op: InducedOp, x: &CMat, derivation: bool) -> CMat {
    let b = derived_basis(op, x.dim());
    let k = b.k;
    let entry = |u: &[usize], v: &[usize]| -> C64 {
        if derivation {
            let mut s = C64::new(0.0, 0.0);
            for l in 0..k {
                if (0..k).all(|m| m == l || u[m] == v[m]) {
                    s += x[(u[l], v[l])];
                }
            }
            s
        } else {
            (0..k).fold(C64::new(1.0, 0.0), |acc, l| acc * x[(u[l], v[l])])
        }
    };
    CMat::from_fn(b.cols.len(), |a, c| {
        let mut s = C64::new(0.0, 0.0);
        for (u, cu) in &b.cols[a] {
            for (v, cv) in &b.cols[c] {
                s += entry(u, v) * (cu * cv);
            }
        }
        s
    })
}

/// Action of a frame change or metric on the derived space (group-like: X (x) Y, X^{(x)k}, ...).
pub fn induced_group(op: InducedOp, x: &CMat, y: Option<&CMat>) -> CMat {
    match op {
        InducedOp::Tensor => x.kron(y.expect("tensor product needs two factors")),
        _ => induced_with(op, x, false),
    }
}

/// Action of an endomorphism as a derivation (X (x) I + I (x) Y, sum over factors, ...).
pub fn induced_derivation(op: InducedOp, x: &CMat, y: Option<&CMat>) -> CMat {
    match op {
        InducedOp::Tensor => {
            let y = y.expect("tensor product needs two factors");
            &x.kron(&CMat::identity(y.dim())) + &CMat::identity(x.dim()).kron(y)
        }
        _ => induced_with(op, x, true),
    }
}

/// Metric on a derived bundle, and the derived bundle itself.
pub fn induced_metric(
    op: InducedOp,
    e: &Bundle,
    h: &MetricField,
    second: Option<(&Bundle, &MetricField)>,
) -> Result<(Bundle, MetricField)> {
    if let InducedOp::ExtPow(k) = op {
        if k > e.rank() || k == 0 {
            return Err(BundleError::RankTooSmall { k, r: e.rank() });
        }
    }
    if op == InducedOp::Tensor && second.is_none() {
        return Err(BundleError::InvalidPresentation("tensor product needs two factors".into()));
    }
    let pres = BundlePresentation::Derived {
        op,
        base: Box::new(e.pres.clone()),
        other: second.map(|(b, _)| Box::new(b.pres.clone())),
    };
    let bundle = Bundle::new(e.mesh.clone(), pres)?;
    let hh = h
        .h
        .iter()
        .enumerate()
        .map(|(i, hi)| induced_group(op, hi, second.map(|(_, h2)| &h2.h[i])).hermitian_part())
        .collect();
    Ok((bundle, MetricField { h: hh }))
}

/// Mean curvature of an induced metric from the curvature of the factors.
pub fn induced_mean_curvature(op: InducedOp, theta: &[CMat], theta2: Option<&[CMat]>) -> EndField {
    theta.iter().enumerate().map(|(i, t)| induced_derivation(op, t, theta2.map(|t2| &t2[i]))).collect()
}

/// Parameters for catalog construction.
#[derive(Clone, Debug)]
pub struct CatalogParams {
    pub n: usize,
    pub tau: C64,
    pub seed: u64,
    /// Size of the random smooth perturbation of the standard metric.
    pub amplitude: f64,
    /// Size of off-diagonal couplings on the projective line.
    pub offdiag: f64,
    /// Rank of trivial torus bundles.
    pub rank: usize,
}

impl Default for CatalogParams {
    fn default() -> Self {
        CatalogParams { n: 64, tau: C64::new(0.0, 1.0), seed: 1, amplitude: 0.3, offdiag: 0.2, rank: 2 }
    }
}

/// A catalog bundle with its initial metric and known HN type.
#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub tag: String,
    pub bundle: Bundle,
    pub h0: MetricField,
    /// Slopes mu_1 >= ... >= mu_r.
    pub hn_type: HNType,
}

impl CatalogEntry {
    /// Limits 2 pi mu_i / Vol of the mean-curvature eigenvalues.
    pub fn targets(&self) -> Vec<f64> {
        let v = self.bundle.mesh.volume();
        self.hn_type.values().iter().map(|mu| 2.0 * PI * mu / v).collect()
    }
}

/// Parses "CP1:O(1)+O(-1)", "CP1:O(1)⊕O(-1)", "CP1:O(d)", "CP1:TangentBundle".
fn parse_cp1_degrees(body: &str) -> Option<Vec<i32>> {
    if body == "TangentBundle" {
        return Some(vec![2]);
    }
    body.split(['+', '⊕'])
        .map(|t| {
            let t = t.trim();
            t.strip_prefix("O(")?.strip_suffix(')')?.trim().parse::<i32>().ok()
        })
        .collect()
}

pub fn catalog_bundle(tag: &str, p: &CatalogParams) -> Result<CatalogEntry> {
    let unknown = || BundleError::UnknownTag(tag.to_string());
    let (space, body) = tag.split_once(':').ok_or_else(unknown)?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    match space {
        "CP1" => {
            let degrees = parse_cp1_degrees(body).ok_or_else(unknown)?;
            let mesh = Arc::new(base_manifold::build_cp1(p.n)?);
            let r = degrees.len();
            let alphas: Vec<[f64; 10]> = (0..r).map(|_| random_poly(&mut rng)).collect();
            let mut kappa = CMat::zeros(r);
            for a in 0..r {
                for b in a + 1..r {
                    let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    kappa[(a, b)] = z * (p.offdiag / z.norm().max(1e-12)) * rng.gen_range(0.5..1.0);
                    kappa[(b, a)] = kappa[(a, b)].conj();
                }
            }
            let h = mesh
                .cells
                .iter()
                .map(|c| {
                    let x = base_manifold::unit_pos(c);
                    let t = 1.0 + c.zeta.norm_sqr();
                    CMat::from_fn(r, |a, b| {
                        if a == b {
                            C64::new(t.powi(-degrees[a]) * (p.amplitude * eval_poly(&alphas[a], &x)).exp(), 0.0)
                        } else {
                            let q = degrees[a].max(degrees[b]);
                            let base = kappa[(a, b)] * t.powi(-q);
                            match c.chart {
                                Chart::W => base * c.zeta.conj().powi(q - degrees[a]) * c.zeta.powi(q - degrees[b]),
                                _ => base,
                            }
                        }
                    })
                })
                .collect();
            let bundle = Bundle::new(mesh, BundlePresentation::Cp1Split { degrees: degrees.clone() })?;
            let hn_type = DescendingVector::sorted(degrees.iter().map(|&d| d as f64).collect()).expect("non-empty");
            let h0 = MetricField { h };
            bundle.check_metric(&h0)?;
            Ok(CatalogEntry { tag: tag.to_string(), bundle, h0, hn_type })
        }
        "Torus" => {
            let (a1, a_tau, twisted) = match body {
                "Trivial" => (CMat::identity(p.rank), CMat::identity(p.rank), false),
                "Atiyah-F2" => {
                    let at = CMat::from_rows(&[vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)], vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]]);
                    (CMat::identity(2), at, true)
                }
                _ => return Err(unknown()),
            };
            let r = a1.dim();
            let mesh = Arc::new(base_manifold::build_torus(p.tau, p.n)?);
            let modes: Vec<(i32, i32, CMat, CMat)> = [(1, 0), (0, 1), (1, 1), (1, -1)]
                .iter()
                .map(|&(kx, ky)| (kx, ky, random_herm(&mut rng, r), random_herm(&mut rng, r)))
                .collect();
            let tau = p.tau;
            let h = mesh
                .cells
                .iter()
                .map(|c| {
                    let v = c.zeta.im / tau.im;
                    let u = c.zeta.re - v * tau.re;
                    let mut pm = CMat::zeros(r);
                    for (kx, ky, a, b) in &modes {
                        let ph = 2.0 * PI * (*kx as f64 * u + *ky as f64 * v);
                        pm.add_scaled(a, C64::new(p.amplitude * ph.cos() / 4.0, 0.0));
                        pm.add_scaled(b, C64::new(p.amplitude * ph.sin() / 4.0, 0.0));
                    }
                    let e = la::expm_herm(&pm);
                    if twisted {
                        let cy = CMat::from_rows(&[vec![C64::new(1.0, 0.0), C64::new(-v, 0.0)], vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]]);
                        (&(&cy.adjoint() * &e) * &cy).hermitian_part()
                    } else {
                        e
                    }
                })
                .collect();
            let bundle = Bundle::new(mesh, BundlePresentation::TorusAutomorphy { a1, a_tau })?;
            let h0 = MetricField { h };
            bundle.check_metric(&h0)?;
            Ok(CatalogEntry { tag: tag.to_string(), bundle, h0, hn_type: DescendingVector::new(vec![0.0; r]).unwrap() })
        }
        _ => Err(unknown()),
    }
}

/// Random quadratic polynomial in (X, Y, Z), normalized so |coefficients|_1 = 1.
fn random_poly(rng: &mut ChaCha8Rng) -> [f64; 10] {
    let mut c = [0.0f64; 10];
    for v in c.iter_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    let s: f64 = c.iter().map(|v| v.abs()).sum();
    c.map(|v| v / s)
}

fn eval_poly(c: &[f64; 10], x: &[f64; 3]) -> f64 {
    let m = [1.0, x[0], x[1], x[2], x[0] * x[1], x[1] * x[2], x[0] * x[2], x[0] * x[0], x[1] * x[1], x[2] * x[2]];
    c.iter().zip(m).map(|(a, b)| a * b).sum()
}

fn random_herm(rng: &mut ChaCha8Rng, r: usize) -> CMat {
    let m = CMat::from_fn(r, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let h = m.hermitian_part();
    let n = h.frob_norm().max(1e-12);
    h.scale_re(1.0 / n)
}

/// Standard diagonal metric diag((1+|zeta|^2)^{-a_k}) of a split bundle on the projective line.
pub fn fubini_study_metric(b: &Bundle) -> Option<MetricField> {
    let BundlePresentation::Cp1Split { degrees } = &b.pres else { return None };
    Some(MetricField {
        h: b.mesh
            .cells
            .iter()
            .map(|c| {
                let t = 1.0 + c.zeta.norm_sqr();
                CMat::from_real_diag(&degrees.iter().map(|&a| t.powi(-a)).collect::<Vec<_>>())
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_tags_are_rejected() {
        let p = CatalogParams { n: 8, ..Default::default() };
        assert!(matches!(catalog_bundle("CP2:O(1)", &p), Err(BundleError::UnknownTag(_))));
        assert!(matches!(catalog_bundle("CP1:Q(1)", &p), Err(BundleError::UnknownTag(_))));
        assert!(matches!(catalog_bundle("Torus:Atiyah-F3", &p), Err(BundleError::UnknownTag(_))));
    }

    #[test]
    fn tag_parsing() {
        assert_eq!(parse_cp1_degrees("O(1)⊕O(-1)"), Some(vec![1, -1]));
        assert_eq!(parse_cp1_degrees("O(1)+O(-1)+O(3)"), Some(vec![1, -1, 3]));
        assert_eq!(parse_cp1_degrees("O(2)"), Some(vec![2]));
        assert_eq!(parse_cp1_degrees("TangentBundle"), Some(vec![2]));
    }

    #[test]
    fn derived_basis_sizes() {
        for r in 1..4 {
            for k in 1..4 {
                assert_eq!(derived_basis(InducedOp::TensorPow(k), r).cols.len(), r.pow(k as u32));
                assert_eq!(derived_basis(InducedOp::SymPow(k), r).cols.len(), crate::hn_algebra::binomial(r + k - 1, k));
                if k <= r {
                    assert_eq!(derived_basis(InducedOp::ExtPow(k), r).cols.len(), crate::hn_algebra::binomial(r, k));
                }
            }
        }
    }

    #[test]
    fn induced_identity_is_identity() {
        for op in [InducedOp::TensorPow(2), InducedOp::SymPow(3), InducedOp::ExtPow(2)] {
            let id = induced_group(op, &CMat::identity(3), None);
            assert!((&id - &CMat::identity(id.dim())).max_abs() < 1e-14);
        }
    }

    #[test]
    fn top_exterior_power_is_determinant() {
        let h = CMat::from_rows(&[
            vec![C64::new(2.0, 0.0), C64::new(0.3, 0.4)],
            vec![C64::new(0.3, -0.4), C64::new(1.0, 0.0)],
        ]);
        let d = induced_group(InducedOp::ExtPow(2), &h, None);
        assert!((d[(0, 0)] - h.det()).norm() < 1e-14);
        let t = induced_derivation(InducedOp::ExtPow(2), &h, None);
        assert!((t[(0, 0)] - h.trace()).norm() < 1e-14);
    }
}
