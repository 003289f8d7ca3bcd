//! Alternating forms over an oriented Euclidean space `R^n`.
//!
//! A basis element `e_I = e_{i1} ∧ … ∧ e_{ip}` (with `i1 < … < ip`) is keyed by
//! the bitmask of `I`. The coefficient of `e_I` is the value of the form on
//! `(e_{i1}, …, e_{ip})`, and the basis `{e_I : |I| = p}` is orthonormal, so no
//! `1/p!` factors appear anywhere.
//!
//! Storage is sparse (sorted `(mask, coeff)` pairs) unless more than half of
//! the `C(n, p)` coefficients are nonzero, in which case a dense vector indexed
//! by the rank of the mask is used. Every operation goes through the same
//! accumulator and re-picks the representation, so callers never see the
//! difference.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::OnceLock;

use nalgebra::DMatrix;
use thiserror::Error;

/// Largest supported dimension (masks are `u32`, rank tables are `2^n` long).
pub const MAX_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(usize, usize),
    #[error("dimension {0} exceeds the supported maximum {MAX_DIM}")]
    DimensionTooLarge(usize),
    #[error("basis index {bits:#b} does not fit in dimension {dim}")]
    IndexOutOfRange { bits: u32, dim: usize },
    #[error("expected a form of degree {expected}, got degree {got}")]
    WrongDegree { expected: usize, got: usize },
}

/// A subset of `{0, …, n-1}` encoded as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisIndex(u32);

impl BasisIndex {
    pub fn new(bits: u32, dim: usize) -> Result<Self, FormError> {
        if dim > MAX_DIM {
            return Err(FormError::DimensionTooLarge(dim));
        }
        if dim < 32 && bits >> dim != 0 {
            return Err(FormError::IndexOutOfRange { bits, dim });
        }
        Ok(Self(bits))
    }

    /// Builds the index from a list of (distinct) positions.
    pub fn from_positions(positions: &[usize]) -> Self {
        Self(positions.iter().fold(0u32, |acc, &i| acc | (1 << i)))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn degree(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    /// Positions in increasing order.
    pub fn positions(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i)
            }
        })
    }
}

/// Sign of `e_I ∧ e_J` relative to `e_{I ∪ J}`, assuming `I ∩ J = ∅`:
/// `(-1)^{#{(i, j) : i ∈ I, j ∈ J, i > j}}`.
#[inline]
pub fn wedge_sign(left: u32, right: u32) -> f64 {
    let mut swaps = 0u32;
    let mut rest = right;
    while rest != 0 {
        let j = rest.trailing_zeros();
        rest &= rest - 1;
        swaps += (left >> j >> 1).count_ones();
    }
    if swaps & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Sign of `e_k ⌟ e_I` for `k ∈ I`: `(-1)^{#{i ∈ I : i < k}}`.
#[inline]
fn contraction_sign(mask: u32, k: usize) -> f64 {
    if (mask & ((1u32 << k) - 1)).count_ones() & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

struct RankTable {
    /// masks of each degree, increasing
    by_degree: Vec<Vec<u32>>,
    /// rank of every mask within its degree
    rank: Vec<u32>,
}

fn rank_table(dim: usize) -> &'static RankTable {
    static TABLES: [OnceLock<RankTable>; MAX_DIM + 1] = [const { OnceLock::new() }; MAX_DIM + 1];
    TABLES[dim].get_or_init(|| {
        let mut by_degree = vec![Vec::new(); dim + 1];
        let mut rank = vec![0u32; 1 << dim];
        for mask in 0u32..(1u32 << dim) {
            let list = &mut by_degree[mask.count_ones() as usize];
            rank[mask as usize] = list.len() as u32;
            list.push(mask);
        }
        RankTable { by_degree, rank }
    })
}

/// All basis masks of degree `degree` in dimension `dim`, increasing.
pub fn basis_masks(dim: usize, degree: usize) -> &'static [u32] {
    assert!(dim <= MAX_DIM, "dimension {dim} exceeds {MAX_DIM}");
    if degree > dim {
        return &[];
    }
    &rank_table(dim).by_degree[degree]
}

/// `C(n, k)` as f64-safe integer arithmetic.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

#[derive(Clone)]
enum Terms {
    Sparse(Vec<(u32, f64)>),
    Dense(Vec<f64>),
}

/// An exact `p`-form at a point of `R^n`.
#[derive(Clone)]
pub struct AlternatingForm {
    dim: usize,
    degree: usize,
    terms: Terms,
}

/// Covectors are degree-one forms; vectors are identified with them through
/// the Euclidean metric.
pub type Covector = AlternatingForm;

/// Dense scratch buffer indexed by rank; every operation funnels through one.
struct Accumulator {
    dim: usize,
    degree: usize,
    buf: Vec<f64>,
}

impl Accumulator {
    fn new(dim: usize, degree: usize) -> Self {
        Self {
            dim,
            degree,
            buf: vec![0.0; binomial(dim, degree)],
        }
    }

    #[inline]
    fn add(&mut self, mask: u32, value: f64) {
        debug_assert_eq!(mask.count_ones() as usize, self.degree);
        let r = rank_table(self.dim).rank[mask as usize] as usize;
        self.buf[r] += value;
    }

    fn finish(self) -> AlternatingForm {
        let nnz = self.buf.iter().filter(|c| **c != 0.0).count();
        let terms = if nnz * 2 > self.buf.len() {
            Terms::Dense(self.buf)
        } else {
            let masks = basis_masks(self.dim, self.degree);
            Terms::Sparse(
                self.buf
                    .iter()
                    .zip(masks)
                    .filter(|(c, _)| **c != 0.0)
                    .map(|(c, m)| (*m, *c))
                    .collect(),
            )
        };
        AlternatingForm {
            dim: self.dim,
            degree: self.degree,
            terms,
        }
    }
}

impl AlternatingForm {
    /// The zero form. Degrees above `dim` are allowed and denote the zero space.
    pub fn zero(dim: usize, degree: usize) -> Self {
        assert!(dim <= MAX_DIM, "dimension {dim} exceeds {MAX_DIM}");
        Self {
            dim,
            degree,
            terms: Terms::Sparse(Vec::new()),
        }
    }

    pub fn scalar(dim: usize, value: f64) -> Self {
        Self::from_terms(dim, 0, [(0u32, value)])
    }

    /// The basis form `e_I`.
    pub fn basis(dim: usize, index: BasisIndex) -> Self {
        Self::from_terms(dim, index.degree(), [(index.bits(), 1.0)])
    }

    /// `e_i` as a covector.
    pub fn unit(dim: usize, i: usize) -> Self {
        Self::from_terms(dim, 1, [(1u32 << i, 1.0)])
    }

    /// `Σ c_i e_i`.
    pub fn covector(components: &[f64]) -> Self {
        let dim = components.len();
        Self::from_terms(
            dim,
            1,
            components.iter().enumerate().map(|(i, c)| (1u32 << i, *c)),
        )
    }

    /// Top-degree form `e_1 ∧ … ∧ e_n`.
    pub fn volume(dim: usize) -> Self {
        let full = if dim == 0 { 0 } else { u32::MAX >> (32 - dim) };
        Self::from_terms(dim, dim, [(full, 1.0)])
    }

    /// Builds a form from `(mask, coeff)` pairs; repeated masks are summed.
    ///
    /// # Panics
    /// If a mask has the wrong popcount or does not fit in `dim`.
    pub fn from_terms(
        dim: usize,
        degree: usize,
        terms: impl IntoIterator<Item = (u32, f64)>,
    ) -> Self {
        Self::try_from_terms(dim, degree, terms).expect("invalid basis term")
    }

    pub fn try_from_terms(
        dim: usize,
        degree: usize,
        terms: impl IntoIterator<Item = (u32, f64)>,
    ) -> Result<Self, FormError> {
        if dim > MAX_DIM {
            return Err(FormError::DimensionTooLarge(dim));
        }
        let mut acc = Accumulator::new(dim, degree);
        for (mask, c) in terms {
            let index = BasisIndex::new(mask, dim)?;
            if index.degree() != degree {
                return Err(FormError::WrongDegree {
                    expected: degree,
                    got: index.degree(),
                });
            }
            acc.add(mask, c);
        }
        Ok(acc.finish())
    }

    /// Dense coefficient vector in increasing mask order.
    pub fn from_dense(dim: usize, degree: usize, coeffs: &[f64]) -> Self {
        let masks = basis_masks(dim, degree);
        assert_eq!(masks.len(), coeffs.len(), "coefficient count");
        Self::from_terms(
            dim,
            degree,
            masks.iter().copied().zip(coeffs.iter().copied()),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.terms, Terms::Dense(_))
    }

    /// Number of stored (nonzero) coefficients.
    pub fn nnz(&self) -> usize {
        match &self.terms {
            Terms::Sparse(v) => v.len(),
            Terms::Dense(v) => v.iter().filter(|c| **c != 0.0).count(),
        }
    }

    /// Nonzero terms in increasing mask order.
    pub fn terms(&self) -> impl Iterator<Item = (BasisIndex, f64)> + '_ {
        let (sparse, dense): (&[(u32, f64)], &[f64]) = match &self.terms {
            Terms::Sparse(v) => (v.as_slice(), &[]),
            Terms::Dense(v) => (&[], v.as_slice()),
        };
        let masks = if dense.is_empty() {
            &[][..]
        } else {
            basis_masks(self.dim, self.degree)
        };
        sparse.iter().map(|(m, c)| (BasisIndex(*m), *c)).chain(
            dense
                .iter()
                .zip(masks)
                .filter(|(c, _)| **c != 0.0)
                .map(|(c, m)| (BasisIndex(*m), *c)),
        )
    }

    fn raw_terms(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.terms().map(|(i, c)| (i.0, c))
    }

    pub fn coeff(&self, index: BasisIndex) -> f64 {
        if index.degree() != self.degree || (self.dim < 32 && index.0 >> self.dim != 0) {
            return 0.0;
        }
        match &self.terms {
            Terms::Sparse(v) => v
                .binary_search_by_key(&index.0, |(m, _)| *m)
                .map(|k| v[k].1)
                .unwrap_or(0.0),
            Terms::Dense(v) => v[rank_table(self.dim).rank[index.0 as usize] as usize],
        }
    }

    /// Dense coefficients in increasing mask order.
    pub fn to_dense(&self) -> Vec<f64> {
        match &self.terms {
            Terms::Dense(v) => v.clone(),
            Terms::Sparse(v) => {
                let mut out = vec![0.0; binomial(self.dim, self.degree)];
                let table = rank_table(self.dim);
                for (m, c) in v {
                    out[table.rank[*m as usize] as usize] = *c;
                }
                out
            }
        }
    }

    /// Components of a covector.
    pub fn components(&self) -> Vec<f64> {
        assert_eq!(self.degree, 1, "components() needs a covector");
        (0..self.dim)
            .map(|i| self.coeff(BasisIndex(1 << i)))
            .collect()
    }

    /// Value of a 0-form.
    pub fn scalar_value(&self) -> f64 {
        if self.degree == 0 {
            self.coeff(BasisIndex(0))
        } else {
            0.0
        }
    }

    fn map_terms(&self, degree: usize, mut f: impl FnMut(u32, f64, &mut Accumulator)) -> Self {
        let mut acc = Accumulator::new(self.dim, degree);
        if degree <= self.dim {
            for (m, c) in self.raw_terms() {
                f(m, c, &mut acc);
            }
        }
        acc.finish()
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_terms(self.degree, |m, c, acc| acc.add(m, s * c))
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, FormError> {
        self.check_same_space(other)?;
        let mut acc = Accumulator::new(self.dim, self.degree);
        for (m, c) in self.raw_terms().chain(other.raw_terms()) {
            acc.add(m, c);
        }
        Ok(acc.finish())
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &Self) -> Self {
        self.check_same_space(other).expect("add_scaled");
        let mut acc = Accumulator::new(self.dim, self.degree);
        for (m, c) in self.raw_terms() {
            acc.add(m, c);
        }
        for (m, c) in other.raw_terms() {
            acc.add(m, s * c);
        }
        acc.finish()
    }

    fn check_same_space(&self, other: &Self) -> Result<(), FormError> {
        if self.dim != other.dim {
            return Err(FormError::DimensionMismatch(self.dim, other.dim));
        }
        if self.degree != other.degree {
            return Err(FormError::DegreeMismatch(self.degree, other.degree));
        }
        Ok(())
    }

    pub fn checked_wedge(&self, other: &Self) -> Result<Self, FormError> {
        if self.dim != other.dim {
            return Err(FormError::DimensionMismatch(self.dim, other.dim));
        }
        let degree = self.degree + other.degree;
        let mut acc = Accumulator::new(self.dim, degree);
        if degree <= self.dim {
            for (a, ca) in self.raw_terms() {
                for (b, cb) in other.raw_terms() {
                    if a & b == 0 {
                        acc.add(a | b, wedge_sign(a, b) * ca * cb);
                    }
                }
            }
        }
        Ok(acc.finish())
    }

    /// `self ∧ other`. Degrees beyond `n` give the zero form.
    ///
    /// # Panics
    /// On dimension mismatch; see [`checked_wedge`](Self::checked_wedge).
    pub fn wedge(&self, other: &Self) -> Self {
        self.checked_wedge(other).expect("wedge")
    }

    /// Interior product with the vector `Σ v_k e_k`.
    pub fn interior(&self, v: &[f64]) -> Self {
        assert_eq!(v.len(), self.dim, "interior: dimension mismatch");
        if self.degree == 0 {
            return Self::zero(self.dim, 0);
        }
        self.map_terms(self.degree - 1, |m, c, acc| {
            let mut rest = m;
            while rest != 0 {
                let k = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                if v[k] != 0.0 {
                    acc.add(m & !(1 << k), contraction_sign(m, k) * v[k] * c);
                }
            }
        })
    }

    /// Interior product with the basis vector `e_k`.
    pub fn interior_unit(&self, k: usize) -> Self {
        if self.degree == 0 {
            return Self::zero(self.dim, 0);
        }
        self.map_terms(self.degree - 1, |m, c, acc| {
            if m >> k & 1 == 1 {
                acc.add(m & !(1 << k), contraction_sign(m, k) * c);
            }
        })
    }

    /// `x ⌟ self`. Contracting a function gives the zero function.
    pub fn checked_contract(&self, x: &Covector) -> Result<Self, FormError> {
        if x.dim != self.dim {
            return Err(FormError::DimensionMismatch(x.dim, self.dim));
        }
        if x.degree != 1 {
            return Err(FormError::WrongDegree {
                expected: 1,
                got: x.degree,
            });
        }
        Ok(self.interior(&x.components()))
    }

    pub fn contract(&self, x: &Covector) -> Self {
        self.checked_contract(x).expect("contract")
    }

    pub fn checked_inner(&self, other: &Self) -> Result<f64, FormError> {
        self.check_same_space(other)?;
        Ok(match (&self.terms, &other.terms) {
            (Terms::Dense(a), Terms::Dense(b)) => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            _ => self
                .raw_terms()
                .map(|(m, c)| c * other.coeff(BasisIndex(m)))
                .sum(),
        })
    }

    /// Euclidean inner product with `{e_I}` orthonormal.
    pub fn inner(&self, other: &Self) -> f64 {
        self.checked_inner(other).expect("inner")
    }

    pub fn norm_sq(&self) -> f64 {
        self.raw_terms().fold(0.0, |acc, (_, c)| acc + c * c)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.raw_terms().fold(0.0, |m, (_, c)| m.max(c.abs()))
    }

    /// `|self - other|`.
    pub fn distance(&self, other: &Self) -> f64 {
        self.add_scaled(-1.0, other).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.raw_terms().all(|(_, c)| c.is_finite())
    }

    /// Hodge star for the orientation `e_1 ∧ … ∧ e_n`:
    /// `a ∧ *b = <a, b> vol`.
    pub fn hodge_star(&self) -> Self {
        let full = if self.dim == 0 {
            0
        } else {
            u32::MAX >> (32 - self.dim)
        };
        self.map_terms(self.dim - self.degree.min(self.dim), |m, c, acc| {
            let rest = full & !m;
            acc.add(rest, wedge_sign(m, rest) * c);
        })
    }

    /// Pulls the form back along the linear map sending the covector `e^j` to
    /// `Σ_a map[(a, j)] e^a`; the result lives in dimension `map.nrows()`.
    pub fn transform(&self, map: &DMatrix<f64>) -> Self {
        assert_eq!(map.ncols(), self.dim, "transform: column count");
        let out_dim = map.nrows();
        let images: Vec<Self> = (0..self.dim)
            .map(|j| Self::covector(map.column(j).as_slice()))
            .collect();
        let mut acc = Accumulator::new(out_dim, self.degree);
        if self.degree > out_dim {
            return acc.finish();
        }
        for (m, c) in self.raw_terms() {
            let image = BasisIndex(m)
                .positions()
                .fold(Self::scalar(out_dim, c), |f, j| f.wedge(&images[j]));
            for (mi, ci) in image.raw_terms() {
                acc.add(mi, ci);
            }
        }
        acc.finish()
    }

    /// Storage invariant: every stored index has popcount equal to the degree.
    pub fn storage_is_normalized(&self) -> bool {
        match &self.terms {
            Terms::Sparse(v) => {
                v.iter()
                    .all(|(m, _)| m.count_ones() as usize == self.degree)
                    && v.windows(2).all(|w| w[0].0 < w[1].0)
            }
            Terms::Dense(v) => v.len() == binomial(self.dim, self.degree),
        }
    }
}

impl PartialEq for AlternatingForm {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.degree == other.degree && self.to_dense() == other.to_dense()
    }
}

impl fmt::Debug for AlternatingForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Form(n={}, p={}: ", self.dim, self.degree)?;
        let mut first = true;
        for (index, c) in self.terms() {
            if !first {
                write!(f, " ")?;
            }
            first = false;
            write!(f, "{c:+.6}")?;
            if index.0 != 0 {
                write!(f, " e")?;
                for i in index.positions() {
                    write!(f, "{}", i + 1)?;
                }
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, ")")
    }
}

impl Add for &AlternatingForm {
    type Output = AlternatingForm;
    fn add(self, rhs: Self) -> AlternatingForm {
        self.checked_add(rhs).expect("add")
    }
}

impl Sub for &AlternatingForm {
    type Output = AlternatingForm;
    fn sub(self, rhs: Self) -> AlternatingForm {
        self.add_scaled(-1.0, rhs)
    }
}

impl Add for AlternatingForm {
    type Output = AlternatingForm;
    fn add(self, rhs: Self) -> AlternatingForm {
        &self + &rhs
    }
}

impl Sub for AlternatingForm {
    type Output = AlternatingForm;
    fn sub(self, rhs: Self) -> AlternatingForm {
        &self - &rhs
    }
}

impl AddAssign<&AlternatingForm> for AlternatingForm {
    fn add_assign(&mut self, rhs: &AlternatingForm) {
        *self = &*self + rhs;
    }
}

impl SubAssign<&AlternatingForm> for AlternatingForm {
    fn sub_assign(&mut self, rhs: &AlternatingForm) {
        *self = &*self - rhs;
    }
}

impl Neg for &AlternatingForm {
    type Output = AlternatingForm;
    fn neg(self) -> AlternatingForm {
        self.scale(-1.0)
    }
}

impl Mul<&AlternatingForm> for f64 {
    type Output = AlternatingForm;
    fn mul(self, rhs: &AlternatingForm) -> AlternatingForm {
        rhs.scale(self)
    }
}

impl Mul<AlternatingForm> for f64 {
    type Output = AlternatingForm;
    fn mul(self, rhs: AlternatingForm) -> AlternatingForm {
        rhs.scale(self)
    }
}

/// Sum of a family of forms of the given shape.
pub fn sum_forms<'a>(
    dim: usize,
    degree: usize,
    forms: impl IntoIterator<Item = &'a AlternatingForm>,
) -> AlternatingForm {
    let mut acc = Accumulator::new(dim, degree);
    for f in forms {
        assert_eq!((f.dim, f.degree), (dim, degree), "sum_forms: shape");
        for (m, c) in f.raw_terms() {
            acc.add(m, c);
        }
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: usize, positions: &[usize]) -> AlternatingForm {
        AlternatingForm::basis(n, BasisIndex::from_positions(positions))
    }

    #[test]
    fn wedge_of_basis_vectors() {
        let e1 = AlternatingForm::unit(3, 0);
        let e2 = AlternatingForm::unit(3, 1);
        assert_eq!(e1.wedge(&e2), e(3, &[0, 1]));
        assert_eq!(e2.wedge(&e1), -&e(3, &[0, 1]));
        let a = e(3, &[0, 1]);
        let b = e(3, &[0, 2]);
        let w = a.wedge(&b);
        assert_eq!(w.degree(), 4);
        assert_eq!(w.nnz(), 0);
    }

    #[test]
    fn wedge_dimension_mismatch_is_an_error() {
        let a = AlternatingForm::unit(3, 0);
        let b = AlternatingForm::unit(4, 0);
        assert_eq!(a.checked_wedge(&b), Err(FormError::DimensionMismatch(3, 4)));
    }

    #[test]
    fn contraction_examples() {
        let e12 = e(3, &[0, 1]);
        assert_eq!(
            e12.contract(&AlternatingForm::unit(3, 0)),
            AlternatingForm::unit(3, 1)
        );
        assert_eq!(e12.contract(&AlternatingForm::unit(3, 2)).nnz(), 0);
        let f = AlternatingForm::scalar(3, 2.0);
        assert_eq!(f.contract(&AlternatingForm::unit(3, 1)).nnz(), 0);
    }

    #[test]
    fn inner_examples() {
        assert_eq!(e(4, &[0, 1]).inner(&e(4, &[0, 1])), 1.0);
        assert_eq!(e(4, &[0, 1]).inner(&e(4, &[0, 2])), 0.0);
        assert_eq!(
            e(4, &[0, 1]).checked_inner(&AlternatingForm::unit(4, 0)),
            Err(FormError::DegreeMismatch(2, 1))
        );
    }

    #[test]
    fn hodge_star_examples() {
        let e1 = AlternatingForm::unit(2, 0);
        let e2 = AlternatingForm::unit(2, 1);
        assert_eq!(e1.hodge_star(), e2);
        assert_eq!(e2.hodge_star(), -&e1);
        assert_eq!(
            AlternatingForm::scalar(5, 1.0).hodge_star(),
            AlternatingForm::volume(5)
        );
        let omega = &e(4, &[0, 1]) + &e(4, &[2, 3]);
        assert_eq!(omega.hodge_star(), omega);
    }

    #[test]
    fn wrong_degree_terms_are_rejected() {
        assert!(AlternatingForm::try_from_terms(4, 2, [(0b111, 1.0)]).is_err());
        assert!(AlternatingForm::try_from_terms(3, 1, [(0b1000, 1.0)]).is_err());
    }

    #[test]
    fn dense_fast_path_kicks_in_above_half_fill() {
        let n = 6;
        let masks = basis_masks(n, 3);
        let few = AlternatingForm::from_terms(n, 3, masks.iter().take(3).map(|m| (*m, 1.0)));
        assert!(!few.is_dense());
        let many = AlternatingForm::from_terms(n, 3, masks.iter().take(15).map(|m| (*m, 1.0)));
        assert!(many.is_dense());
        assert_eq!(many.nnz(), 15);
        assert!(many.storage_is_normalized());
        // same coefficients, different storage
        let sparse_copy = few.add_scaled(1.0, &AlternatingForm::zero(n, 3));
        assert_eq!(sparse_copy, few);
        assert!((many.inner(&few) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn transform_by_rotation_preserves_norm() {
        let (c, s) = (0.6, 0.8);
        let rot = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
        let a = &e(3, &[0, 2]) + &e(3, &[1, 2]).scale(2.0);
        let b = a.transform(&rot);
        assert!((a.norm() - b.norm()).abs() < 1e-14);
        // e1 ∧ e2 is invariant under rotation in the (1,2)-plane
        assert!(e(3, &[0, 1]).transform(&rot).distance(&e(3, &[0, 1])) < 1e-15);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(12, 6), 924);
        assert_eq!(basis_masks(12, 6).len(), 924);
        assert_eq!(binomial(3, 5), 0);
    }
}
