//! Harder-Narasimhan types of derived bundles.
//!
//! The HN type of a bundle is its descending vector of slopes. The HN types of
//! tensor products, symmetric powers and exterior powers are obtained by summing
//! entries over the corresponding index sets and sorting. All maps are generic
//! over the scalar so that rational slopes can be handled exactly.

use std::ops::Add;

use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HnError {
    #[error("exterior power k={k} exceeds rank r={r}")]
    KTooLarge { k: usize, r: usize },
    #[error("power must be at least 1")]
    ZeroPower,
    #[error("vector is not non-increasing at position {0}")]
    NotDescending(usize),
    #[error("empty slope vector")]
    Empty,
    #[error("operation needs a second slope vector")]
    MissingSecond,
}

pub type Result<T> = std::result::Result<T, HnError>;

/// Non-increasing vector.
#[derive(Clone, Debug, PartialEq)]
pub struct DescendingVector(Vec<f64>);

/// HN type: slopes of the graded pieces of the HN filtration, repeated by rank.
pub type HNType = DescendingVector;

impl DescendingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(HnError::Empty);
        }
        if let Some(i) = values.windows(2).position(|w| !(w[0] >= w[1])) {
            return Err(HnError::NotDescending(i + 1));
        }
        Ok(DescendingVector(values))
    }

    /// Sorts arbitrary input into descending order.
    pub fn sorted(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(HnError::Empty);
        }
        Ok(DescendingVector(sort_desc(values)))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    /// Largest slope.
    pub fn mu_upper(&self) -> f64 {
        self.0[0]
    }

    /// Smallest slope.
    pub fn mu_lower(&self) -> f64 {
        *self.0.last().unwrap()
    }

    /// Average slope.
    pub fn mu(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexSetKind {
    /// Ordered k-tuples from {1..r}.
    Tensor { k: usize, r: usize },
    /// Exponent vectors (a_1..a_r) with sum k.
    Sym { k: usize, r: usize },
    /// Strictly increasing k-tuples from {1..r}.
    Ext { k: usize, r: usize },
}

impl IndexSetKind {
    pub fn cardinality(&self) -> usize {
        match *self {
            IndexSetKind::Tensor { k, r } => r.pow(k as u32),
            IndexSetKind::Sym { k, r } => binomial(r + k - 1, k),
            IndexSetKind::Ext { k, r } => binomial(r, k),
        }
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Lexicographic enumeration. Tensor and exterior indices are 1-based tuples;
/// symmetric indices are exponent vectors, listed from (k,0,..,0) downward.
pub fn enumerate_indices(kind: IndexSetKind) -> Result<Vec<Vec<usize>>> {
    match kind {
        IndexSetKind::Tensor { k, r } => {
            check_k(k)?;
            let mut out = Vec::with_capacity(kind.cardinality());
            let mut cur = vec![1; k];
            loop {
                out.push(cur.clone());
                let mut pos = k;
                loop {
                    if pos == 0 {
                        return Ok(out);
                    }
                    pos -= 1;
                    if cur[pos] < r {
                        cur[pos] += 1;
                        for c in cur.iter_mut().skip(pos + 1) {
                            *c = 1;
                        }
                        break;
                    }
                }
            }
        }
        IndexSetKind::Sym { k, r } => {
            check_k(k)?;
            let mut out = Vec::with_capacity(kind.cardinality());
            let mut cur = vec![0; r];
            sym_rec(k, 0, &mut cur, &mut out);
            Ok(out)
        }
        IndexSetKind::Ext { k, r } => {
            check_k(k)?;
            if k > r {
                return Err(HnError::KTooLarge { k, r });
            }
            let mut out = Vec::with_capacity(kind.cardinality());
            let mut cur = Vec::with_capacity(k);
            ext_rec(k, r, 1, &mut cur, &mut out);
            Ok(out)
        }
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(HnError::ZeroPower)
    } else {
        Ok(())
    }
}

fn sym_rec(left: usize, pos: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let r = cur.len();
    if pos == r - 1 {
        cur[pos] = left;
        out.push(cur.clone());
        return;
    }
    for a in (0..=left).rev() {
        cur[pos] = a;
        sym_rec(left - a, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

fn ext_rec(k: usize, r: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in start..=r {
        if r - i + 1 < k - cur.len() {
            break;
        }
        cur.push(i);
        ext_rec(k, r, i + 1, cur, out);
        cur.pop();
    }
}

fn sort_desc<T: PartialOrd>(mut v: Vec<T>) -> Vec<T> {
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// Scalars the maps can operate on.
pub trait Slope: Clone + PartialOrd + Zero + Add<Output = Self> {}
impl<T: Clone + PartialOrd + Zero + Add<Output = T>> Slope for T {}

fn tuple_sum<T: Slope>(x: &[T], idx: &[usize]) -> T {
    idx.iter().fold(T::zero(), |acc, &i| acc + x[i - 1].clone())
}

fn exponent_sum<T: Slope>(x: &[T], a: &[usize]) -> T {
    let mut acc = T::zero();
    for (xi, &ai) in x.iter().zip(a) {
        for _ in 0..ai {
            acc = acc + xi.clone();
        }
    }
    acc
}

/// Pairwise sums x_i + y_j, sorted.
pub fn vec_t_generic<T: Slope>(x: &[T], y: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(x.len() * y.len());
    for xi in x {
        for yj in y {
            out.push(xi.clone() + yj.clone());
        }
    }
    sort_desc(out)
}

pub fn vec_tk_generic<T: Slope>(x: &[T], k: usize) -> Result<Vec<T>> {
    let idx = enumerate_indices(IndexSetKind::Tensor { k, r: x.len() })?;
    Ok(sort_desc(idx.iter().map(|t| tuple_sum(x, t)).collect()))
}

pub fn vec_sk_generic<T: Slope>(x: &[T], k: usize) -> Result<Vec<T>> {
    let idx = enumerate_indices(IndexSetKind::Sym { k, r: x.len() })?;
    Ok(sort_desc(idx.iter().map(|a| exponent_sum(x, a)).collect()))
}

pub fn vec_ak_generic<T: Slope>(x: &[T], k: usize) -> Result<Vec<T>> {
    let idx = enumerate_indices(IndexSetKind::Ext { k, r: x.len() })?;
    Ok(sort_desc(idx.iter().map(|t| tuple_sum(x, t)).collect()))
}

pub fn vec_t(x: &DescendingVector, y: &DescendingVector) -> DescendingVector {
    DescendingVector(vec_t_generic(x.values(), y.values()))
}

pub fn vec_tk(x: &DescendingVector, k: usize) -> Result<DescendingVector> {
    vec_tk_generic(x.values(), k).map(DescendingVector)
}

pub fn vec_sk(x: &DescendingVector, k: usize) -> Result<DescendingVector> {
    vec_sk_generic(x.values(), k).map(DescendingVector)
}

pub fn vec_ak(x: &DescendingVector, k: usize) -> Result<DescendingVector> {
    vec_ak_generic(x.values(), k).map(DescendingVector)
}

/// Exact variants on rational slopes.
pub fn vec_t_exact(x: &[BigRational], y: &[BigRational]) -> Vec<BigRational> {
    vec_t_generic(x, y)
}

pub fn vec_tk_exact(x: &[BigRational], k: usize) -> Result<Vec<BigRational>> {
    vec_tk_generic(x, k)
}

pub fn vec_sk_exact(x: &[BigRational], k: usize) -> Result<Vec<BigRational>> {
    vec_sk_generic(x, k)
}

pub fn vec_ak_exact(x: &[BigRational], k: usize) -> Result<Vec<BigRational>> {
    vec_ak_generic(x, k)
}

/// Derived-bundle operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivedOp {
    /// E (x) F, with F given as the second argument.
    Tensor,
    /// E^{(x)k}.
    TensorPower(usize),
    /// S^k E.
    Sym(usize),
    /// Wedge^k E.
    Ext(usize),
    /// E^{(x)k} (x) F^{(x)l}.
    Mixed(usize, usize),
}

pub fn derived_hn_type(op: DerivedOp, mu: &HNType, mu2: Option<&HNType>) -> Result<HNType> {
    match op {
        DerivedOp::Tensor => Ok(vec_t(mu, mu2.ok_or(HnError::MissingSecond)?)),
        DerivedOp::TensorPower(k) => vec_tk(mu, k),
        DerivedOp::Sym(k) => vec_sk(mu, k),
        DerivedOp::Ext(k) => vec_ak(mu, k),
        DerivedOp::Mixed(k, l) => {
            let f = mu2.ok_or(HnError::MissingSecond)?;
            match (k, l) {
                (0, 0) => Err(HnError::ZeroPower),
                (k, 0) => vec_tk(mu, k),
                (0, l) => vec_tk(f, l),
                (k, l) => Ok(vec_t(&vec_tk(mu, k)?, &vec_tk(f, l)?)),
            }
        }
    }
}

/// Holds iff k mu_U(E) + l mu_U(F) < 0, the sufficient condition for
/// H^0(E^{(x)k} (x) F^{(x)l}) = 0.
pub fn vanishing_condition(k: usize, l: usize, mu_u_e: f64, mu_u_f: f64) -> Result<bool> {
    if k == 0 && l == 0 {
        return Err(HnError::ZeroPower);
    }
    Ok(k as f64 * mu_u_e + l as f64 * mu_u_f < 0.0)
}

/// Smallest slope of Wedge^k E: sum of the k smallest slopes.
pub fn mu_lower_ext(mu: &HNType, k: usize) -> Result<f64> {
    let r = mu.rank();
    if k == 0 {
        return Err(HnError::ZeroPower);
    }
    if k > r {
        return Err(HnError::KTooLarge { k, r });
    }
    Ok(mu.values()[r - k..].iter().sum())
}

/// Largest slope of Wedge^k E: sum of the k largest slopes.
pub fn mu_upper_ext(mu: &HNType, k: usize) -> Result<f64> {
    let r = mu.rank();
    if k == 0 {
        return Err(HnError::ZeroPower);
    }
    if k > r {
        return Err(HnError::KTooLarge { k, r });
    }
    Ok(mu.values()[..k].iter().sum())
}

/// Sup-norm distance between equal-length vectors.
pub fn sup_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dv(v: &[f64]) -> DescendingVector {
        DescendingVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn enumeration_examples() {
        let t = enumerate_indices(IndexSetKind::Tensor { k: 2, r: 2 }).unwrap();
        assert_eq!(t, vec![vec![1, 1], vec![1, 2], vec![2, 1], vec![2, 2]]);
        let s = enumerate_indices(IndexSetKind::Sym { k: 2, r: 2 }).unwrap();
        assert_eq!(s, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        let a = enumerate_indices(IndexSetKind::Ext { k: 2, r: 3 }).unwrap();
        assert_eq!(a, vec![vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(enumerate_indices(IndexSetKind::Ext { k: 3, r: 2 }), Err(HnError::KTooLarge { k: 3, r: 2 }));
    }

    #[test]
    fn cardinalities() {
        for r in 1..5 {
            for k in 1..5 {
                for kind in [IndexSetKind::Tensor { k, r }, IndexSetKind::Sym { k, r }, IndexSetKind::Ext { k, r }] {
                    if let Ok(v) = enumerate_indices(kind) {
                        assert_eq!(v.len(), kind.cardinality());
                    }
                }
            }
        }
    }

    #[test]
    fn map_examples() {
        assert_eq!(vec_t(&dv(&[0.5]), &dv(&[1.5])).values(), &[2.0]);
        assert_eq!(vec_t(&dv(&[1.0, 0.0]), &dv(&[1.0, 0.0])).values(), &[2.0, 1.0, 1.0, 0.0]);
        assert_eq!(vec_tk(&dv(&[1.0, 0.0]), 2).unwrap().values(), &[2.0, 1.0, 1.0, 0.0]);
        assert_eq!(vec_tk(&dv(&[3.0, -1.0]), 1).unwrap().values(), &[3.0, -1.0]);
        assert_eq!(vec_sk(&dv(&[1.0, 0.0]), 2).unwrap().values(), &[2.0, 1.0, 0.0]);
        assert_eq!(vec_ak(&dv(&[3.0, 1.0]), 2).unwrap().values(), &[4.0]);
        assert_eq!(vec_ak(&dv(&[2.0, 1.0, -4.0]), 3).unwrap().values(), &[-1.0]);
    }

    #[test]
    fn derived_examples() {
        let mu = dv(&[1.0, -1.0]);
        assert_eq!(derived_hn_type(DerivedOp::Tensor, &mu, Some(&mu)).unwrap().values(), &[2.0, 0.0, 0.0, -2.0]);
        assert_eq!(derived_hn_type(DerivedOp::Sym(2), &mu, None).unwrap().values(), &[2.0, 0.0, -2.0]);
        assert_eq!(derived_hn_type(DerivedOp::Ext(2), &mu, None).unwrap().values(), &[0.0]);
        assert_eq!(derived_hn_type(DerivedOp::Tensor, &mu, None), Err(HnError::MissingSecond));
    }

    #[test]
    fn vanishing_examples() {
        assert!(vanishing_condition(1, 0, -1.0, 0.0).unwrap());
        assert!(!vanishing_condition(2, 1, -1.0, 3.0).unwrap());
        assert!(vanishing_condition(0, 0, -1.0, -1.0).is_err());
    }

    #[test]
    fn ext_extremes() {
        let mu = dv(&[3.0, 1.0, 0.5, -2.0]);
        for k in 1..=4 {
            let a = vec_ak(&mu, k).unwrap();
            assert_eq!(a.mu_lower(), mu_lower_ext(&mu, k).unwrap());
            assert_eq!(a.mu_upper(), mu_upper_ext(&mu, k).unwrap());
        }
    }

    #[test]
    fn descending_validation() {
        assert_eq!(DescendingVector::new(vec![1.0, 2.0]), Err(HnError::NotDescending(1)));
        assert_eq!(DescendingVector::new(vec![]), Err(HnError::Empty));
    }
}
