//! Pointwise Chern-form algebra on a complex surface.
//!
//! A curvature sample records, at one point of a surface with local coordinates
//! (z1, z2), the Hermitian metric g of the Kähler form
//! `omega = i sum g_ab dz^a ^ dzbar^b`, the fiber metric H and the coefficients
//! of `iF = i sum A_ab dz^a ^ dzbar^b` where each A_ab is an endomorphism with
//! `A_ba = H^{-1} A_ab^* H`. Top-degree forms are reported as multiples of
//! `omega^2 / 2`.

use std::f64::consts::PI;

use thiserror::Error;

use crate::linalg_hermitian::{CMat, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChernError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("eigenvalues sum to {0}, expected 2")]
    TraceNotNormalized(f64),
    #[error("expected rank 2, got {0}")]
    NotRankTwo(usize),
}

pub type Result<T> = std::result::Result<T, ChernError>;

#[derive(Clone, Debug)]
pub struct CurvatureSample {
    /// 2x2 positive Hermitian matrix of the base metric.
    pub g: CMat,
    /// r x r fiber metric.
    pub h: CMat,
    /// Coefficients A_ab of iF, indexed [a][b].
    pub a: [[CMat; 2]; 2],
}

impl CurvatureSample {
    pub fn rank(&self) -> usize {
        self.h.dim()
    }

    fn validate(&self) -> Result<()> {
        if self.g.dim() != 2 {
            return Err(ChernError::DimensionMismatch(format!("base dimension {} (expected 2)", self.g.dim())));
        }
        let r = self.h.dim();
        for row in &self.a {
            for m in row {
                if m.dim() != r {
                    return Err(ChernError::DimensionMismatch(format!("block of size {} for rank {r}", m.dim())));
                }
            }
        }
        Ok(())
    }

    /// Trace-free part: A_ab - (tr A_ab / r) Id.
    pub fn trace_free(&self) -> CurvatureSample {
        let r = self.rank();
        let mut out = self.clone();
        for a in 0..2 {
            for b in 0..2 {
                let t = self.a[a][b].trace() / r as f64;
                for i in 0..r {
                    out.a[a][b][(i, i)] -= t;
                }
            }
        }
        out
    }

    /// Contraction with the base metric: Lambda(iF) = sum g^{ba} A_ab.
    pub fn lambda(&self) -> CMat {
        let ginv = self.g.inverse().expect("base metric must be invertible");
        let r = self.rank();
        let mut out = CMat::zeros(r);
        for a in 0..2 {
            for b in 0..2 {
                out.add_scaled(&self.a[a][b], ginv[(b, a)]);
            }
        }
        out
    }

    /// Pointwise norm |iF|^2 with respect to (H, omega).
    pub fn norm_sq(&self) -> f64 {
        let ginv = self.g.inverse().expect("base metric must be invertible");
        let mut s = C64::new(0.0, 0.0);
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    for d in 0..2 {
                        let w = ginv[(d, a)] * ginv[(b, c)];
                        s += w * (&self.a[a][b] * &self.a[c][d]).trace();
                    }
                }
            }
        }
        s.re
    }
}

/// Coefficient of tr(iF ^ iF) against omega^2/2, from the explicit wedge.
fn trace_wedge_square(s: &CurvatureSample) -> f64 {
    let a = &s.a;
    let m = &(&a[0][0] * &a[1][1]) - &(&a[0][1] * &a[1][0]);
    2.0 * m.trace().re / s.g.det().re
}

/// Coefficient of (tr iF) ^ (tr iF) against omega^2/2.
fn wedge_of_traces(s: &CurvatureSample) -> f64 {
    let t = |a: usize, b: usize| s.a[a][b].trace();
    2.0 * (t(0, 0) * t(1, 1) - t(0, 1) * t(1, 0)).re / s.g.det().re
}

/// Chern forms c1^2 and c2 of the sample, as multiples of omega^2/2.
pub fn chern_numbers(s: &CurvatureSample) -> Result<(f64, f64)> {
    s.validate()?;
    let tr_sq = wedge_of_traces(s);
    let c1_sq = tr_sq / (4.0 * PI * PI);
    let c2 = (tr_sq - trace_wedge_square(s)) / (8.0 * PI * PI);
    Ok((c1_sq, c2))
}

/// Both sides of 4 pi^2 (2 c2 - (r-1)/r c1^2) = (|iF0|^2 - |Lambda iF0|^2) omega^2/2,
/// with F0 the trace-free part. For rank 2 the left side is 4 pi^2 (2 c2 - c1^2/2).
pub fn c2_gap_sides(s: &CurvatureSample) -> Result<(f64, f64)> {
    s.validate()?;
    let r = s.rank() as f64;
    let (c1_sq, c2) = chern_numbers(s)?;
    let lhs = 4.0 * PI * PI * (2.0 * c2 - (r - 1.0) / r * c1_sq);
    let f0 = s.trace_free();
    let l0 = f0.lambda();
    let rhs = f0.norm_sq() - (&l0 * &l0).trace().re;
    Ok((lhs, rhs))
}

pub fn c2_gap_residual(s: &CurvatureSample) -> Result<f64> {
    let (l, r) = c2_gap_sides(s)?;
    Ok((l - r).abs())
}

/// (2 - (l1-1)^2 - (l2-1)^2, 2 l1 l2) for eigenvalues summing to 2.
pub fn two_eigen_gap(lambda1: f64, lambda2: f64) -> Result<(f64, f64)> {
    let t = lambda1 + lambda2;
    if (t - 2.0).abs() > 1e-9 {
        return Err(ChernError::TraceNotNormalized(t));
    }
    let lhs = 2.0 - (lambda1 - 1.0).powi(2) - (lambda2 - 1.0).powi(2);
    Ok((lhs, 2.0 * lambda1 * lambda2))
}

#[derive(Clone, Debug, PartialEq)]
pub struct C2PositivityReport {
    pub min_lambda2: f64,
    pub max_lambda1: f64,
    /// min over points of l1 l2 / (16 pi^2), the lower bound for c2 in units of omega^2.
    pub c2_lower_bound: f64,
    pub positive: bool,
    pub points: usize,
}

/// Evaluates the c2 positivity criterion on a field of rank-2 mean-curvature
/// eigenvalue pairs normalized to trace 2.
pub fn c2_positivity_run(field: &[Vec<f64>]) -> Result<C2PositivityReport> {
    let mut min_l2 = f64::INFINITY;
    let mut max_l1 = f64::NEG_INFINITY;
    let mut bound = f64::INFINITY;
    for v in field {
        if v.len() != 2 {
            return Err(ChernError::NotRankTwo(v.len()));
        }
        let (l1, l2) = if v[0] >= v[1] { (v[0], v[1]) } else { (v[1], v[0]) };
        two_eigen_gap(l1, l2)?;
        min_l2 = min_l2.min(l2);
        max_l1 = max_l1.max(l1);
        bound = bound.min(l1 * l2 / (16.0 * PI * PI));
    }
    Ok(C2PositivityReport {
        min_lambda2: min_l2,
        max_lambda1: max_l1,
        c2_lower_bound: bound,
        positive: min_l2 > 0.0,
        points: field.len(),
    })
}

/// Eigenvalues of the dual bundle after renormalizing the trace back to 2.
pub fn dual_renormalized(lambda1: f64, lambda2: f64) -> (f64, f64) {
    (2.0 - lambda2, 2.0 - lambda1)
}
