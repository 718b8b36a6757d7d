//! Dense Hermitian linear algebra at a single fiber.
//!
//! Matrices are tiny (rank at most a few dozen for derived bundles, usually 1 to 4),
//! so everything here is a direct dense routine on [`CMat`], which keeps up to 4x4
//! entries inline. Eigenproblems use cyclic complex Jacobi rotations.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use smallvec::SmallVec;
use thiserror::Error;

pub type C64 = Complex64;

/// Relative tolerance for Hermitian symmetry checks on validated inputs.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not Hermitian (asymmetry {asym:.3e} exceeds tolerance)")]
    NonHermitianInput { asym: f64 },
    #[error("matrix is not positive definite (smallest eigenvalue {min_eig:.3e})")]
    NotPositiveDefinite { min_eig: f64 },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Square complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    n: usize,
    a: SmallVec<[C64; 4]>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat { n, a: SmallVec::from_elem(C64::new(0.0, 0.0), n * n) }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut a = SmallVec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                a.push(f(i, j));
            }
        }
        CMat { n, a }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let n = rows.len();
        Self::from_fn(n, |i, j| rows[i][j])
    }

    pub fn from_real_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
        }
        m
    }

    pub fn from_diag(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn scalar(n: usize, c: f64) -> Self {
        let mut m = Self::identity(n);
        m.scale_re_mut(c);
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.a
    }

    pub fn diag_re(&self) -> Vec<f64> {
        (0..self.n).map(|i| self[(i, i)].re).collect()
    }

    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn frob_norm_sq(&self) -> f64 {
        self.a.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.frob_norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&self, c: C64) -> CMat {
        CMat { n: self.n, a: self.a.iter().map(|&z| z * c).collect() }
    }

    pub fn scale_re(&self, c: f64) -> CMat {
        CMat { n: self.n, a: self.a.iter().map(|&z| z * c).collect() }
    }

    pub fn scale_re_mut(&mut self, c: f64) {
        for z in self.a.iter_mut() {
            *z *= c;
        }
    }

    pub fn add_scaled(&mut self, other: &CMat, c: C64) {
        debug_assert_eq!(self.n, other.n);
        for (x, &y) in self.a.iter_mut().zip(other.a.iter()) {
            *x += y * c;
        }
    }

    pub fn add_identity(&mut self, c: f64) {
        for i in 0..self.n {
            self[(i, i)] += c;
        }
    }

    /// Largest entrywise deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                d = d.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        d
    }

    /// (A + A*)/2.
    pub fn hermitian_part(&self) -> CMat {
        CMat::from_fn(self.n, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    /// Commutator AB - BA.
    pub fn commutator(&self, b: &CMat) -> CMat {
        &(self * b) - &(b * self)
    }

    /// Real part of tr(A B).
    pub fn trace_prod_re(&self, b: &CMat) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            for k in 0..n {
                s += (self[(i, k)] * b[(k, i)]).re;
            }
        }
        s
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Option<CMat> {
        let n = self.n;
        if n == 1 {
            let d = self.a[0];
            return if d.norm() == 0.0 { None } else { Some(CMat { n, a: SmallVec::from_elem(d.inv(), 1) }) };
        }
        if n == 2 {
            let (a, b, c, d) = (self.a[0], self.a[1], self.a[2], self.a[3]);
            let det = a * d - b * c;
            if det.norm() == 0.0 || !det.re.is_finite() {
                return None;
            }
            let inv = det.inv();
            return Some(CMat { n, a: SmallVec::from_slice(&[d * inv, -b * inv, -c * inv, a * inv]) });
        }
        let mut m = self.clone();
        let mut inv = CMat::identity(n);
        for col in 0..n {
            let mut piv = col;
            let mut best = m[(col, col)].norm();
            for r in col + 1..n {
                let v = m[(r, col)].norm();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    m.a.swap(col * n + j, piv * n + j);
                    inv.a.swap(col * n + j, piv * n + j);
                }
            }
            let p = m[(col, col)].inv();
            for j in 0..n {
                m[(col, j)] *= p;
                inv[(col, j)] *= p;
            }
            for r in 0..n {
                if r != col {
                    let f = m[(r, col)];
                    if f.norm() != 0.0 {
                        for j in 0..n {
                            let mv = m[(col, j)];
                            let iv = inv[(col, j)];
                            m[(r, j)] -= f * mv;
                            inv[(r, j)] -= f * iv;
                        }
                    }
                }
            }
        }
        Some(inv)
    }

    /// Determinant by LU with partial pivoting.
    pub fn det(&self) -> C64 {
        let n = self.n;
        match n {
            1 => return self.a[0],
            2 => return self.a[0] * self.a[3] - self.a[1] * self.a[2],
            _ => {}
        }
        let mut m = self.clone();
        let mut det = C64::new(1.0, 0.0);
        for col in 0..n {
            let mut piv = col;
            let mut best = m[(col, col)].norm();
            for r in col + 1..n {
                if m[(r, col)].norm() > best {
                    best = m[(r, col)].norm();
                    piv = r;
                }
            }
            if best == 0.0 {
                return C64::new(0.0, 0.0);
            }
            if piv != col {
                for j in 0..n {
                    m.a.swap(col * n + j, piv * n + j);
                }
                det = -det;
            }
            let p = m[(col, col)];
            det *= p;
            for r in col + 1..n {
                let f = m[(r, col)] / p;
                for j in col..n {
                    let v = m[(col, j)];
                    m[(r, j)] -= f * v;
                }
            }
        }
        det
    }

    /// Cholesky factor L (lower triangular, positive diagonal) with A = L L*.
    /// Returns None when a pivot is not strictly positive.
    pub fn cholesky(&self) -> Option<CMat> {
        let n = self.n;
        let mut l = CMat::zeros(n);
        for j in 0..n {
            let mut d = self[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if d <= 0.0 || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            l[(j, j)] = C64::new(d, 0.0);
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / d;
            }
        }
        Some(l)
    }

    /// Kronecker product A (x) B.
    pub fn kron(&self, b: &CMat) -> CMat {
        let (n, m) = (self.n, b.n);
        CMat::from_fn(n * m, |i, j| self[(i / m, j / m)] * b[(i % m, j % m)])
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.a[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.a[i * self.n + j]
    }
}

impl Mul for &CMat {
    type Output = CMat;
    fn mul(self, b: &CMat) -> CMat {
        let n = self.n;
        debug_assert_eq!(n, b.n);
        if n == 2 {
            let (x, y) = (&self.a, &b.a);
            return CMat {
                n,
                a: SmallVec::from_buf([
                    x[0] * y[0] + x[1] * y[2],
                    x[0] * y[1] + x[1] * y[3],
                    x[2] * y[0] + x[3] * y[2],
                    x[2] * y[1] + x[3] * y[3],
                ]),
            };
        }
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let x = self.a[i * n + k];
                if x.re == 0.0 && x.im == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.a[i * n + j] += x * b.a[k * n + j];
                }
            }
        }
        out
    }
}

impl Add for &CMat {
    type Output = CMat;
    fn add(self, b: &CMat) -> CMat {
        CMat { n: self.n, a: self.a.iter().zip(b.a.iter()).map(|(x, y)| x + y).collect() }
    }
}

impl Sub for &CMat {
    type Output = CMat;
    fn sub(self, b: &CMat) -> CMat {
        CMat { n: self.n, a: self.a.iter().zip(b.a.iter()).map(|(x, y)| x - y).collect() }
    }
}

impl Neg for &CMat {
    type Output = CMat;
    fn neg(self) -> CMat {
        CMat { n: self.n, a: self.a.iter().map(|x| -x).collect() }
    }
}

impl AddAssign<&CMat> for CMat {
    fn add_assign(&mut self, b: &CMat) {
        for (x, y) in self.a.iter_mut().zip(b.a.iter()) {
            *x += y;
        }
    }
}

impl SubAssign<&CMat> for CMat {
    fn sub_assign(&mut self, b: &CMat) {
        for (x, y) in self.a.iter_mut().zip(b.a.iter()) {
            *x -= y;
        }
    }
}

/// Hermitian matrix, validated on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct HermMatrix(CMat);

impl HermMatrix {
    pub fn new(m: CMat) -> Result<Self> {
        if !m.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let asym = m.hermitian_defect();
        if asym > HERMITIAN_TOL * m.max_abs().max(1.0) {
            return Err(LinalgError::NonHermitianInput { asym });
        }
        Ok(HermMatrix(m.hermitian_part()))
    }

    /// Wraps the Hermitian part of `m` without checking.
    pub fn from_hermitian_part(m: &CMat) -> Self {
        HermMatrix(m.hermitian_part())
    }

    pub fn from_real_diag(d: &[f64]) -> Self {
        HermMatrix(CMat::from_real_diag(d))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_mat(&self) -> &CMat {
        &self.0
    }

    pub fn into_mat(self) -> CMat {
        self.0
    }
}

/// Positive-definite Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct PosDefHermMatrix(HermMatrix);

impl PosDefHermMatrix {
    pub fn new(h: HermMatrix) -> Result<Self> {
        let (vals, _) = jacobi_eigh(h.as_mat());
        let max = vals.iter().cloned().fold(f64::MIN, f64::max);
        let min = vals.iter().cloned().fold(f64::MAX, f64::min);
        if !(min > 1e-14 * max.abs()) || min <= 0.0 {
            return Err(LinalgError::NotPositiveDefinite { min_eig: min });
        }
        Ok(PosDefHermMatrix(h))
    }

    pub fn from_mat(m: CMat) -> Result<Self> {
        Self::new(HermMatrix::new(m)?)
    }

    pub fn herm(&self) -> &HermMatrix {
        &self.0
    }

    pub fn as_mat(&self) -> &CMat {
        self.0.as_mat()
    }
}

/// Eigenvalues in non-increasing order.
#[derive(Clone, Debug, PartialEq)]
pub struct SortedSpectrum(Vec<f64>);

impl SortedSpectrum {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Cyclic Jacobi eigendecomposition of a Hermitian matrix (no validation).
/// Returns eigenvalues in non-increasing order and the unitary whose columns
/// are the matching eigenvectors.
pub fn jacobi_eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.dim();
    let mut a = m.hermitian_part();
    let mut v = CMat::identity(n);
    if n > 1 {
        let scale = a.frob_norm();
        for _sweep in 0..60 {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += a[(p, q)].norm_sqr();
                }
            }
            if off.sqrt() <= 1e-17 * scale || off == 0.0 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    rotate(&mut a, &mut v, p, q);
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let vals: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    idx.sort_by(|&i, &j| vals[j].partial_cmp(&vals[i]).unwrap_or(std::cmp::Ordering::Equal));
    let sorted: Vec<f64> = idx.iter().map(|&i| vals[i]).collect();
    let u = CMat::from_fn(n, |r, c| v[(r, idx[c])]);
    (sorted, u)
}

fn rotate(a: &mut CMat, v: &mut CMat, p: usize, q: usize) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let n = a.dim();
    let phase = apq / mag;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let tau = (aqq - app) / (2.0 * mag);
    let t = if tau >= 0.0 { 1.0 / (tau + (1.0 + tau * tau).sqrt()) } else { -1.0 / (-tau + (1.0 + tau * tau).sqrt()) };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    // J = D P with D = diag(1, conj(phase)) on (p, q) and P the real rotation [[c, s], [-s, c]].
    let jpp = C64::new(c, 0.0);
    let jpq = C64::new(s, 0.0);
    let jqp = -phase.conj() * s;
    let jqq = phase.conj() * c;
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * jpp + akq * jqp;
        a[(k, q)] = akp * jpq + akq * jqq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = jpp.conj() * apk + jqp.conj() * aqk;
        a[(q, k)] = jpq.conj() * apk + jqq.conj() * aqk;
    }
    a[(p, q)] = C64::new(0.0, 0.0);
    a[(q, p)] = C64::new(0.0, 0.0);
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * jpp + vkq * jqp;
        v[(k, q)] = vkp * jpq + vkq * jqq;
    }
}

/// Eigendecomposition A = U diag(lambda) U* with lambda non-increasing.
pub fn herm_eig_desc(a: &HermMatrix) -> Result<(SortedSpectrum, CMat)> {
    if !a.as_mat().is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let (vals, u) = jacobi_eigh(a.as_mat());
    Ok((SortedSpectrum(vals), u))
}

/// Validating front end for raw matrices.
pub fn herm_eig_desc_checked(a: &CMat) -> Result<(SortedSpectrum, CMat)> {
    herm_eig_desc(&HermMatrix::new(a.clone())?)
}

/// U diag(f(lambda)) U*.
pub fn apply_spectral(vals: &[f64], u: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let n = u.dim();
    let fv: Vec<f64> = vals.iter().map(|&x| f(x)).collect();
    CMat::from_fn(n, |i, j| {
        let mut s = C64::new(0.0, 0.0);
        for k in 0..n {
            s += u[(i, k)] * fv[k] * u[(j, k)].conj();
        }
        s
    })
}

/// f(M) for a 2x2 Hermitian M, assembled from eigenprojectors so that widely
/// separated eigenvalues lose no accuracy. `small_dd(t, r)` is the divided
/// difference (f(t+r) - f(t-r)) / (2r) for r small relative to t.
fn herm2_function(m: &CMat, f: impl Fn(f64) -> f64, small_dd: impl Fn(f64, f64) -> f64) -> CMat {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = m[(0, 1)];
    let t = 0.5 * (a + d);
    let h = 0.5 * (a - d);
    let bb = b.norm_sqr();
    let r = h.hypot(b.norm());
    // Eigenvalues; the one of smaller modulus comes from the determinant.
    let det = a * d - bb;
    let (lp, lm) = if t >= 0.0 {
        let lp = t + r;
        (lp, if lp != 0.0 { det / lp } else { 0.0 })
    } else {
        let lm = t - r;
        (det / lm, lm)
    };
    let (fp, fm) = (f(lp), f(lm));
    let dd = if r > 1e-4 * t.abs().max(f64::MIN_POSITIVE) { (fp - fm) / (lp - lm) } else { small_dd(t, r) };
    // Squared components of the top eigenvector.
    let (c2, s2) = if r == 0.0 {
        (1.0, 0.0)
    } else if h >= 0.0 {
        let s2 = bb / (2.0 * r * (r + h));
        (1.0 - s2, s2)
    } else {
        let c2 = bb / (2.0 * r * (r - h));
        (c2, 1.0 - c2)
    };
    CMat {
        n: 2,
        a: SmallVec::from_slice(&[
            C64::new(fp * c2 + fm * s2, 0.0),
            b * dd,
            b.conj() * dd,
            C64::new(fp * s2 + fm * c2, 0.0),
        ]),
    }
}

/// Unchecked Hermitian exponential, used in hot loops.
pub fn expm_herm(s: &CMat) -> CMat {
    match s.dim() {
        1 => CMat::from_real_diag(&[s[(0, 0)].re.exp()]),
        2 => herm2_function(s, f64::exp, |t, r| t.exp() * (1.0 + r * r / 6.0)),
        _ => {
            let (vals, u) = jacobi_eigh(s);
            apply_spectral(&vals, &u, f64::exp)
        }
    }
}

/// Unchecked logarithm of a Hermitian positive-definite matrix.
pub fn logm_pd(h: &CMat) -> CMat {
    match h.dim() {
        1 => CMat::from_real_diag(&[h[(0, 0)].re.ln()]),
        2 => herm2_function(h, f64::ln, |t, r| (1.0 + (r / t).powi(2) / 3.0) / t),
        _ => {
            let (vals, u) = jacobi_eigh(h);
            apply_spectral(&vals, &u, f64::ln)
        }
    }
}

/// Unchecked positive square root of a Hermitian positive-definite matrix.
pub fn sqrtm_pd(h: &CMat) -> CMat {
    let (vals, u) = jacobi_eigh(h);
    apply_spectral(&vals, &u, |x| x.max(0.0).sqrt())
}

pub fn mat_exp_herm(s: &HermMatrix) -> Result<PosDefHermMatrix> {
    if !s.as_mat().is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let e = expm_herm(s.as_mat());
    Ok(PosDefHermMatrix(HermMatrix::from_hermitian_part(&e)))
}

pub fn mat_log_pd(h: &PosDefHermMatrix) -> Result<HermMatrix> {
    let (vals, u) = jacobi_eigh(h.as_mat());
    let min = vals.last().copied().unwrap_or(1.0);
    if min <= 0.0 {
        return Err(LinalgError::NotPositiveDefinite { min_eig: min });
    }
    Ok(HermMatrix::from_hermitian_part(&apply_spectral(&vals, &u, f64::ln)))
}

/// The kernel (e^{y-x} - 1)/(y - x), equal to 1 on the diagonal.
pub fn psi_bar(x: f64, y: f64) -> f64 {
    let d = y - x;
    if d.abs() < 1e-6 {
        1.0 + d * (1.0 / 2.0 + d * (1.0 / 6.0 + d * (1.0 / 24.0 + d * (1.0 / 120.0 + d / 720.0))))
    } else {
        d.exp_m1() / d
    }
}

/// Multiplies entry (i, j) of `b`, written in the eigenbasis of `s`, by
/// psi_bar(mu_i, mu_j). Entries that vanish exactly stay zero even when the
/// kernel overflows.
pub fn psi_bar_apply_raw(vals: &[f64], u: &CMat, b: &CMat) -> CMat {
    let n = u.dim();
    let ud = u.adjoint();
    let mut bt = &(&ud * b) * u;
    for i in 0..n {
        for j in 0..n {
            let z = bt[(i, j)];
            if z.re != 0.0 || z.im != 0.0 {
                bt[(i, j)] = z * psi_bar(vals[i], vals[j]);
            }
        }
    }
    &(u * &bt) * &ud
}

pub fn psi_bar_apply(s: &HermMatrix, b: &CMat) -> Result<CMat> {
    if s.dim() != b.dim() {
        return Err(LinalgError::DimensionMismatch(s.dim(), b.dim()));
    }
    let (spec, u) = herm_eig_desc(s)?;
    Ok(psi_bar_apply_raw(spec.values(), &u, b))
}

/// Descending rearrangement; ties keep their input order.
pub fn tau_sort(x: &[f64]) -> SortedSpectrum {
    let mut v = x.to_vec();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    SortedSpectrum(v)
}

pub fn cond_number(sigma: &PosDefHermMatrix) -> Result<f64> {
    let (vals, _) = jacobi_eigh(sigma.as_mat());
    let max = vals[0];
    let min = *vals.last().unwrap();
    if min <= 0.0 {
        return Err(LinalgError::NotPositiveDefinite { min_eig: min });
    }
    Ok(max / min)
}

/// Spectrum of an endomorphism that is self-adjoint for the metric `h`:
/// eigenvalues of L* X L^{-*} where h = L L*.
pub fn spectrum_self_adjoint(x: &CMat, h: &CMat) -> Option<Vec<f64>> {
    let l = h.cholesky()?;
    let m = to_unitary_frame(x, &l)?;
    Some(jacobi_eigh(&m).0)
}

/// Writes an endomorphism in an h-orthonormal frame, h = L L*: returns L* X L^{-*}.
pub fn to_unitary_frame(x: &CMat, l: &CMat) -> Option<CMat> {
    let linv = l.inverse()?;
    Some(&(&l.adjoint() * x) * &linv.adjoint())
}

/// Inverse of [`to_unitary_frame`]: L^{-*} M L*.
pub fn from_unitary_frame(m: &CMat, l: &CMat) -> Option<CMat> {
    let linv = l.inverse()?;
    Some(&(&linv.adjoint() * m) * &l.adjoint())
}

/// Squared Hilbert-Schmidt norm of an endomorphism with respect to the metric h = L L*.
pub fn hs_norm_sq(x: &CMat, l: &CMat) -> f64 {
    to_unitary_frame(x, l).map(|m| m.frob_norm_sq()).unwrap_or(f64::NAN)
}

/// Projects an endomorphism onto its h-self-adjoint part: (X + h^{-1} X* h)/2.
pub fn h_self_adjoint_part(x: &CMat, h: &CMat, hinv: &CMat) -> CMat {
    let adj = &(hinv * &x.adjoint()) * h;
    let mut out = x + &adj;
    out.scale_re_mut(0.5);
    out
}
