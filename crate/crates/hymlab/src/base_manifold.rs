//! Discretized base surfaces: the round projective line and flat tori.
//!
//! Both surfaces are carried by a finite-volume mesh of cells. Every cell has a
//! holomorphic chart coordinate `zeta` for its center and its polygon corners,
//! the conformal density `g` of `omega = (i/2) g dzeta ^ dzetabar` at the
//! center, and its `omega`-area. Faces carry the conformally invariant ratio
//! `c = l / d` of face length to center distance, which is all the scalar
//! Laplacian needs.
//!
//! The projective line is meshed by the spherical Voronoi tessellation dual to a
//! geodesic icosahedron on the sphere of radius 1/2 (area pi). Cells in the
//! southern hemisphere use `z`, the others `w = 1/z`. The torus `C / (Z + tau Z)`
//! uses a periodic rectangular grid; neighbor links record the lattice shift.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use smallvec::SmallVec;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManifoldError {
    #[error("grid resolution {0} is below the minimum of 8")]
    GridTooCoarse(usize),
    #[error("invalid torus modulus {0}: need Im(tau) > 0 and N*Re(tau) integral")]
    InvalidModulus(C64),
    #[error("right-hand side has mean {0:.3e}; Poisson problem is not solvable")]
    NonZeroMean(f64),
    #[error("time step {dt:.3e} exceeds the stability bound {bound:.3e}")]
    UnstableTimestep { dt: f64, bound: f64 },
    #[error("field has length {got}, mesh has {expected} cells")]
    FieldLength { got: usize, expected: usize },
    #[error("Poisson solver stalled at relative residual {0:.3e}")]
    NoConvergence(f64),
    #[error("screening parameter must be positive, got {0}")]
    NonPositiveShift(f64),
}

pub type Result<T> = std::result::Result<T, ManifoldError>;

/// Real scalar field, one value per cell.
pub type ScalarField = Vec<f64>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ManifoldKind {
    Cp1,
    Torus { tau: C64 },
}

/// Which coordinate a cell is expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Chart {
    /// `z`, affine coordinate around 0 on the projective line.
    Z,
    /// `w = 1/z`.
    W,
    /// Flat coordinate on the torus, centers in the fundamental domain.
    Flat,
}

/// How another cell's data relates to the frame of the current cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Link {
    /// Same chart and no lattice shift.
    Same,
    /// The other cell lies in the opposite projective chart.
    Swap,
    /// The other cell, seen from here, sits at its stored position plus `m + n tau`.
    Shift(i32, i32),
}

#[derive(Clone, Debug)]
pub struct Corner {
    /// Position in the owning cell's chart.
    pub zeta: C64,
    /// Cells meeting at this corner, with their links to the owning cell.
    pub cells: SmallVec<[(usize, Link); 4]>,
    /// Linear interpolation weights of the cell centers at the corner (sum 1).
    pub weights: SmallVec<[f64; 4]>,
}

#[derive(Clone, Debug)]
pub struct Face {
    pub nb: usize,
    pub link: Link,
    /// Face length over center distance.
    pub coef: f64,
    /// Start and end corner (counterclockwise in the chart).
    pub p: usize,
    pub q: usize,
}

#[derive(Clone, Debug)]
pub struct Cell {
    pub chart: Chart,
    pub zeta: C64,
    /// Conformal density of omega at the center, in the cell's chart.
    pub g: f64,
    /// omega-area.
    pub area: f64,
    /// Euclidean area of the corner polygon in chart coordinates.
    pub chart_area: f64,
    /// Point on the sphere of radius 1/2, or (x, y, 0) on the torus.
    pub pos: [f64; 3],
    pub corners: Vec<Corner>,
    pub faces: Vec<Face>,
}

#[derive(Clone, Debug)]
pub struct BaseManifold {
    pub kind: ManifoldKind,
    pub cells: Vec<Cell>,
    /// Requested resolution.
    pub n: usize,
    vol: f64,
}

impl BaseManifold {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn volume(&self) -> f64 {
        self.vol
    }

    /// Whether both meshes were built from the same kind and resolution.
    /// Construction is deterministic, so such meshes coincide cell by cell.
    pub fn same_grid(&self, other: &BaseManifold) -> bool {
        self.kind == other.kind && self.n == other.n && self.cells.len() == other.cells.len()
    }

    /// Typical cell diameter, sqrt(Vol / #cells).
    pub fn mesh_h(&self) -> f64 {
        (self.vol / self.cells.len() as f64).sqrt()
    }

    pub fn areas(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.area).collect()
    }

    /// Affine coordinate `z` of a projective cell center (None at z = infinity),
    /// or the flat coordinate on the torus.
    pub fn z_of(&self, i: usize) -> Option<C64> {
        let c = &self.cells[i];
        match c.chart {
            Chart::Z | Chart::Flat => Some(c.zeta),
            Chart::W => {
                if c.zeta.norm() == 0.0 {
                    None
                } else {
                    Some(c.zeta.inv())
                }
            }
        }
    }

    fn check(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.cells.len() {
            return Err(ManifoldError::FieldLength { got: f.len(), expected: self.cells.len() });
        }
        Ok(())
    }

    /// Largest dt for which explicit Euler on du/dt = 2 sqrt(-1) Lambda d dbar u obeys
    /// the discrete maximum principle.
    pub fn heat_dt_bound(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| c.area / c.faces.iter().map(|f| f.coef).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Projective line with resolution N (the icosahedral frequency is N/4).
pub fn build_cp1(n: usize) -> Result<BaseManifold> {
    if n < 8 {
        return Err(ManifoldError::GridTooCoarse(n));
    }
    let freq = n / 4;
    let (verts, tris) = geodesic_icosahedron(freq);
    let radius = 0.5;

    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); verts.len()];
    for (t, tri) in tris.iter().enumerate() {
        for &v in tri {
            incident[v].push(t);
        }
    }
    let centers: Vec<[f64; 3]> = tris.iter().map(|t| circumcenter(&verts[t[0]], &verts[t[1]], &verts[t[2]])).collect();
    let charts: Vec<Chart> = verts.iter().map(|v| if v[2] < 0.0 { Chart::Z } else { Chart::W }).collect();

    let mut cells = Vec::with_capacity(verts.len());
    for (i, x) in verts.iter().enumerate() {
        let chart = charts[i];
        let zeta = stereo(x, chart);
        let mut ts = incident[i].clone();
        ts.sort_by(|&a, &b| {
            let pa = (stereo(&centers[a], chart) - zeta).arg();
            let pb = (stereo(&centers[b], chart) - zeta).arg();
            pa.partial_cmp(&pb).unwrap()
        });
        let link = |j: usize| if charts[j] == chart { Link::Same } else { Link::Swap };
        let corners: Vec<Corner> = ts
            .iter()
            .map(|&t| Corner {
                zeta: stereo(&centers[t], chart),
                cells: tris[t].iter().map(|&j| (j, link(j))).collect(),
                weights: barycentric(&centers[t], &tris[t].map(|j| verts[j])).into_iter().collect(),
            })
            .collect();
        let k = ts.len();
        let mut faces = Vec::with_capacity(k);
        let mut area_unit = 0.0;
        for a in 0..k {
            let b = (a + 1) % k;
            let (ta, tb) = (&tris[ts[a]], &tris[ts[b]]);
            let nb = *ta.iter().find(|&&v| v != i && tb.contains(&v)).expect("adjacent triangles share an edge");
            let l = angle(&centers[ts[a]], &centers[ts[b]]);
            let d = angle(x, &verts[nb]);
            faces.push(Face { nb, link: link(nb), coef: l / d, p: a, q: b });
            area_unit += spherical_triangle_area(x, &centers[ts[a]], &centers[ts[b]]);
        }
        let chart_area = polygon_area(&corners.iter().map(|c| c.zeta).collect::<Vec<_>>());
        cells.push(Cell {
            chart,
            zeta,
            g: 1.0 / (1.0 + zeta.norm_sqr()).powi(2),
            area: area_unit * radius * radius,
            chart_area,
            pos: [x[0] * radius, x[1] * radius, x[2] * radius],
            corners,
            faces,
        });
    }
    let vol = cells.iter().map(|c| c.area).sum();
    Ok(BaseManifold { kind: ManifoldKind::Cp1, cells, n, vol })
}

/// Flat torus C / (Z + tau Z) on an N x round(N Im tau) periodic grid.
pub fn build_torus(tau: C64, n: usize) -> Result<BaseManifold> {
    if !(tau.im > 0.0) || !tau.re.is_finite() {
        return Err(ManifoldError::InvalidModulus(tau));
    }
    if n < 8 {
        return Err(ManifoldError::GridTooCoarse(n));
    }
    let shear = n as f64 * tau.re;
    if (shear - shear.round()).abs() > 1e-9 {
        return Err(ManifoldError::InvalidModulus(tau));
    }
    let ny = ((n as f64 * tau.im).round() as usize).max(8);
    let hx = 1.0 / n as f64;
    let hy = tau.im / ny as f64;
    let idx = |a: usize, b: usize| b * n + a;
    let center = |a: usize, b: usize| C64::new((a as f64 + 0.5) * hx, (b as f64 + 0.5) * hy);

    // Maps an unwrapped point near the grid to (cell, m, n) with point = center + m + n tau.
    let locate = |p: C64| -> (usize, Link) {
        let nn = (p.im / tau.im).floor();
        let q = p - tau * nn;
        let mm = q.re.floor();
        let r = q - mm;
        let a = ((r.re / hx).floor() as usize).min(n - 1);
        let b = ((r.im / hy).floor() as usize).min(ny - 1);
        let (mi, ni) = (mm as i32, nn as i32);
        let link = if mi == 0 && ni == 0 { Link::Same } else { Link::Shift(mi, ni) };
        (idx(a, b), link)
    };

    let mut cells = Vec::with_capacity(n * ny);
    for b in 0..ny {
        for a in 0..n {
            let z = center(a, b);
            let offsets = [C64::new(hx, 0.0), C64::new(0.0, hy), C64::new(-hx, 0.0), C64::new(0.0, -hy)];
            let corner_off = [
                C64::new(0.5 * hx, -0.5 * hy),
                C64::new(0.5 * hx, 0.5 * hy),
                C64::new(-0.5 * hx, 0.5 * hy),
                C64::new(-0.5 * hx, -0.5 * hy),
            ];
            let corners: Vec<Corner> = corner_off
                .iter()
                .map(|&co| {
                    let cz = z + co;
                    let cells: SmallVec<[(usize, Link); 4]> = [(0.5, 0.5), (-0.5, 0.5), (-0.5, -0.5), (0.5, -0.5)]
                        .iter()
                        .map(|&(sx, sy)| locate(cz + C64::new(sx * hx, sy * hy)))
                        .collect();
                    Corner { zeta: cz, cells, weights: SmallVec::from_elem(0.25, 4) }
                })
                .collect();
            // Face k joins corner k to corner k+1; east face lies between corners 0 and 1.
            let faces = offsets
                .iter()
                .enumerate()
                .map(|(k, &off)| {
                    let (nb, link) = locate(z + off);
                    let coef = if k % 2 == 0 { hy / hx } else { hx / hy };
                    Face { nb, link, coef, p: k, q: (k + 1) % 4 }
                })
                .collect();
            cells.push(Cell {
                chart: Chart::Flat,
                zeta: z,
                g: 1.0,
                area: hx * hy,
                chart_area: hx * hy,
                pos: [z.re, z.im, 0.0],
                corners,
                faces,
            });
        }
    }
    Ok(BaseManifold { kind: ManifoldKind::Torus { tau }, cells, n, vol: tau.im })
}

/// sqrt(-1) Lambda d dbar f, i.e. half the Laplace-Beltrami operator of omega.
pub fn laplacian(m: &BaseManifold, f: &[f64]) -> Result<ScalarField> {
    m.check(f)?;
    Ok(laplacian_unchecked(m, f))
}

pub(crate) fn laplacian_unchecked(m: &BaseManifold, f: &[f64]) -> ScalarField {
    m.cells
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let s: f64 = c.faces.iter().map(|fc| fc.coef * (f[fc.nb] - f[i])).sum();
            0.5 * s / c.area
        })
        .collect()
}

/// Sum of f times the omega-area of each cell.
pub fn integrate(m: &BaseManifold, f: &[f64]) -> Result<f64> {
    m.check(f)?;
    Ok(m.cells.iter().zip(f).map(|(c, v)| c.area * v).sum())
}

/// Volume average.
pub fn mean(m: &BaseManifold, f: &[f64]) -> Result<f64> {
    Ok(integrate(m, f)? / m.vol)
}

/// Solves laplacian(f) = rho with zero mean. Requires a mean-zero rho.
pub fn poisson_solve(m: &BaseManifold, rho: &[f64]) -> Result<ScalarField> {
    m.check(rho)?;
    let total = integrate(m, rho)?;
    let scale: f64 = m.cells.iter().zip(rho).map(|(c, v)| c.area * v.abs()).sum();
    if total.abs() > 1e-8 * scale.max(f64::MIN_POSITIVE) {
        return Err(ManifoldError::NonZeroMean(total / m.vol));
    }
    let shift = total / m.vol;
    let rho: Vec<f64> = rho.iter().map(|v| v - shift).collect();
    poisson_cg(m, &rho, 1e-13)
}

/// Solves eps u - laplacian(u) = rho for eps > 0.
pub fn helmholtz_solve(m: &BaseManifold, eps: f64, rho: &[f64]) -> Result<ScalarField> {
    m.check(rho)?;
    if !(eps > 0.0) {
        return Err(ManifoldError::NonPositiveShift(eps));
    }
    let b: Vec<f64> = m.cells.iter().zip(rho).map(|(c, r)| c.area * r).collect();
    shifted_cg(m, eps, b, 1e-14)
}

/// Conjugate gradients on the symmetric form -sum_faces c/2 (f_j - f_i) = -A rho.
fn poisson_cg(m: &BaseManifold, rho: &[f64], rtol: f64) -> Result<ScalarField> {
    let mut b: Vec<f64> = m.cells.iter().zip(rho).map(|(c, r)| -c.area * r).collect();
    let bm = b.iter().sum::<f64>() / m.len() as f64;
    b.iter_mut().for_each(|v| *v -= bm);
    let mut x = shifted_cg(m, 0.0, b, rtol)?;
    let mx = integrate(m, &x)? / m.vol;
    x.iter_mut().for_each(|v| *v -= mx);
    Ok(x)
}

/// Jacobi-preconditioned CG for (shift A - sum_faces c/2 (x_j - x_i)) x = b.
fn shifted_cg(m: &BaseManifold, shift: f64, b: Vec<f64>, rtol: f64) -> Result<ScalarField> {
    let n = m.len();
    let apply = |x: &[f64], out: &mut [f64]| {
        for (i, c) in m.cells.iter().enumerate() {
            out[i] = shift * c.area * x[i] - 0.5 * c.faces.iter().map(|fc| fc.coef * (x[fc.nb] - x[i])).sum::<f64>();
        }
    };
    let diag: Vec<f64> =
        m.cells.iter().map(|c| shift * c.area + 0.5 * c.faces.iter().map(|f| f.coef).sum::<f64>()).collect();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b;
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(a, d)| a / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut rel = 1.0;
    for _ in 0..20 * n + 100 {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = r.iter().map(|v| v * v).sum::<f64>().sqrt() / bnorm;
        if rel < rtol {
            break;
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if rel > 1e-9 {
        return Err(ManifoldError::NoConvergence(rel));
    }
    Ok(x)
}

/// Per-step record of a scalar heat run.
#[derive(Clone, Debug, Default)]
pub struct HeatRun {
    pub times: Vec<f64>,
    pub means: Vec<f64>,
    pub sups: Vec<f64>,
    pub infs: Vec<f64>,
    pub final_u: ScalarField,
}

/// Explicit Euler for du/dt = 2 sqrt(-1) Lambda d dbar u.
pub fn scalar_heat_run(m: &BaseManifold, u0: &[f64], t_end: f64, dt: f64) -> Result<HeatRun> {
    scalar_heat_run_with_source(m, u0, t_end, dt, |_, _, _| 0.0)
}

/// Explicit Euler for du/dt = 2 sqrt(-1) Lambda d dbar u + s(t, i, u_i).
pub fn scalar_heat_run_with_source(
    m: &BaseManifold,
    u0: &[f64],
    t_end: f64,
    dt: f64,
    source: impl Fn(f64, usize, f64) -> f64,
) -> Result<HeatRun> {
    m.check(u0)?;
    let bound = m.heat_dt_bound();
    if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
        return Err(ManifoldError::UnstableTimestep { dt, bound });
    }
    let steps = (t_end / dt).round().max(0.0) as usize;
    let mut u = u0.to_vec();
    let mut run = HeatRun::default();
    let record = |run: &mut HeatRun, t: f64, u: &[f64]| {
        run.times.push(t);
        run.means.push(mean(m, u).unwrap());
        run.sups.push(u.iter().cloned().fold(f64::MIN, f64::max));
        run.infs.push(u.iter().cloned().fold(f64::MAX, f64::min));
    };
    record(&mut run, 0.0, &u);
    for s in 0..steps {
        let t = s as f64 * dt;
        let l = laplacian_unchecked(m, &u);
        for i in 0..u.len() {
            u[i] += dt * (2.0 * l[i] + source(t, i, u[i]));
        }
        record(&mut run, t + dt, &u);
    }
    run.final_u = u;
    Ok(run)
}

/// Evaluates a function of the cell position (sphere point or torus point).
pub fn sample(m: &BaseManifold, f: impl Fn(&Cell) -> f64) -> ScalarField {
    m.cells.iter().map(f).collect()
}

fn stereo(x: &[f64; 3], chart: Chart) -> C64 {
    match chart {
        Chart::Z => C64::new(x[0], x[1]) / (1.0 - x[2]),
        Chart::W => C64::new(x[0], -x[1]) / (1.0 + x[2]),
        Chart::Flat => C64::new(x[0], x[1]),
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = dot(&a, &a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Angle between unit vectors, stable for small angles.
fn angle(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let c = cross(a, b);
    dot(&c, &c).sqrt().atan2(dot(a, b))
}

fn spherical_triangle_area(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    let num = dot(a, &cross(b, c)).abs();
    let den = 1.0 + dot(a, b) + dot(b, c) + dot(c, a);
    2.0 * num.atan2(den)
}

/// Weights w with p proportional to sum w_k v_k and sum w_k = 1.
fn barycentric(p: &[f64; 3], v: &[[f64; 3]; 3]) -> [f64; 3] {
    let det = dot(&v[0], &cross(&v[1], &v[2]));
    let w = [
        dot(p, &cross(&v[1], &v[2])) / det,
        dot(&v[0], &cross(p, &v[2])) / det,
        dot(&v[0], &cross(&v[1], p)) / det,
    ];
    let s = w[0] + w[1] + w[2];
    [w[0] / s, w[1] / s, w[2] / s]
}

fn circumcenter(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> [f64; 3] {
    let n = normalize(cross(&sub(b, a), &sub(c, a)));
    if dot(&n, a) < 0.0 {
        [-n[0], -n[1], -n[2]]
    } else {
        n
    }
}

fn polygon_area(pts: &[C64]) -> f64 {
    let k = pts.len();
    0.5 * (0..k).map(|a| {
        let (p, q) = (pts[a], pts[(a + 1) % k]);
        p.re * q.im - p.im * q.re
    })
    .sum::<f64>()
}

/// Unit-sphere vertices and triangles of the frequency-`freq` geodesic icosahedron.
fn geodesic_icosahedron(freq: usize) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut base = Vec::new();
    for &s1 in &[-1.0, 1.0] {
        for &s2 in &[-1.0, 1.0] {
            base.push([0.0, s1, s2 * phi]);
            base.push([s1, s2 * phi, 0.0]);
            base.push([s2 * phi, 0.0, s1]);
        }
    }
    let mut faces = Vec::new();
    for i in 0..12 {
        for j in i + 1..12 {
            for k in j + 1..12 {
                let e = |a: usize, b: usize| {
                    let d = sub(&base[a], &base[b]);
                    (dot(&d, &d) - 4.0).abs() < 1e-9
                };
                if e(i, j) && e(j, k) && e(i, k) {
                    faces.push([i, j, k]);
                }
            }
        }
    }
    debug_assert_eq!(faces.len(), 20);

    let mut verts: Vec<[f64; 3]> = Vec::new();
    let mut lookup: HashMap<[i64; 3], usize> = HashMap::new();
    let mut vid = |p: [f64; 3], verts: &mut Vec<[f64; 3]>| -> usize {
        let p = normalize(p);
        let key = [(p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64, (p[2] * 1e9).round() as i64];
        *lookup.entry(key).or_insert_with(|| {
            verts.push(p);
            verts.len() - 1
        })
    };
    let mut tris = Vec::new();
    for f in &faces {
        let (a, b, c) = (base[f[0]], base[f[1]], base[f[2]]);
        let fm = freq as f64;
        let point = |i: usize, j: usize| {
            let (u, v) = (i as f64 / fm, j as f64 / fm);
            [
                a[0] + (b[0] - a[0]) * u + (c[0] - a[0]) * v,
                a[1] + (b[1] - a[1]) * u + (c[1] - a[1]) * v,
                a[2] + (b[2] - a[2]) * u + (c[2] - a[2]) * v,
            ]
        };
        let mut grid = vec![vec![0usize; freq + 1]; freq + 1];
        for i in 0..=freq {
            for j in 0..=freq - i {
                grid[i][j] = vid(point(i, j), &mut verts);
            }
        }
        for i in 0..freq {
            for j in 0..freq - i {
                tris.push([grid[i][j], grid[i + 1][j], grid[i][j + 1]]);
                if i + j + 2 <= freq {
                    tris.push([grid[i + 1][j], grid[i + 1][j + 1], grid[i][j + 1]]);
                }
            }
        }
    }
    (verts, tris)
}

/// Unit-sphere position of a projective cell center.
pub fn unit_pos(c: &Cell) -> [f64; 3] {
    [2.0 * c.pos[0], 2.0 * c.pos[1], 2.0 * c.pos[2]]
}

/// Fubini-Study volume of the projective line.
pub const CP1_VOLUME: f64 = PI;
