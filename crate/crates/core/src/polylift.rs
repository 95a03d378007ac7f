//! Monomials, sparse polynomials and the Veronese lift.
//!
//! Coordinate convention of the lifted space `R^N`: the blocks follow the
//! ascending degree list of the [`LiftBasis`]. Inside a block of degree `l`
//! the coordinate of the exponent tuple `alpha` holds `sqrt(alpha!) x^alpha`,
//! where `alpha!` is the multinomial coefficient. Monomial order inside a
//! block:
//!
//! * degree 1: `x_1, ..., x_n` (the identity embedding);
//! * degree `l >= 2`: exponent tuples in ascending lexicographic order, so
//!   for `n = 2, l = 2` the block reads `(x_2^2, sqrt(2) x_1 x_2, x_1^2)`.
//!
//! Every g-vector, lifted matrix and box produced by this crate uses this
//! order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polyhedra::HPolyhedron;

/// Coefficients with magnitude at or below this are dropped from polynomials.
pub const COEFF_TOL: f64 = 1e-12;

/// Exponent tuple `alpha` of the monomial `x^alpha = x_1^{a_1} ... x_n^{a_n}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExponentTuple(Vec<u32>);

impl ExponentTuple {
    pub fn new(exponents: Vec<u32>) -> Self {
        ExponentTuple(exponents)
    }

    pub fn zero(n: usize) -> Self {
        ExponentTuple(vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        ExponentTuple(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn add(&self, other: &ExponentTuple) -> ExponentTuple {
        debug_assert_eq!(self.dim(), other.dim());
        ExponentTuple(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Multinomial coefficient `d! / (a_1! ... a_n!)`.
    ///
    /// Built as a product of binomials so intermediate values stay exact.
    /// Panics if the coefficient does not fit in `u128`, which needs degrees
    /// far beyond anything a lifted problem can hold in memory.
    pub fn multinomial(&self) -> u128 {
        let mut acc: u128 = 1;
        let mut partial: u32 = 0;
        for &a in &self.0 {
            for k in 1..=a {
                partial += 1;
                acc = acc
                    .checked_mul(partial as u128)
                    .expect("multinomial coefficient overflows u128")
                    / k as u128;
            }
        }
        acc
    }

    /// Product of the factorials of the entries.
    pub fn factorial_product(&self) -> u128 {
        self.0
            .iter()
            .map(|&a| (1..=a as u128).product::<u128>())
            .try_fold(1u128, |acc, f| acc.checked_mul(f))
            .expect("factorial product overflows u128")
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(&a, &xi)| xi.powi(a as i32))
            .product()
    }
}

impl fmt::Display for ExponentTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, &a) in self.0.iter().enumerate() {
            if a == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if a == 1 {
                write!(f, "x{}", i + 1)?;
            } else {
                write!(f, "x{}^{}", i + 1, a)?;
            }
        }
        if first {
            write!(f, "1")?;
        }
        Ok(())
    }
}

/// All exponent tuples of total degree `degree` in `n` variables, in the
/// block order used by the lift (see the module docs).
pub fn monomials_of_degree(n: usize, degree: u32) -> Vec<ExponentTuple> {
    if degree == 1 {
        return (0..n).map(|i| ExponentTuple::unit(n, i)).collect();
    }
    let mut out = Vec::new();
    let mut current = vec![0u32; n];
    fill_ascending(&mut current, 0, degree, &mut out);
    out
}

fn fill_ascending(current: &mut Vec<u32>, pos: usize, remaining: u32, out: &mut Vec<ExponentTuple>) {
    let n = current.len();
    if n == 0 {
        if remaining == 0 {
            out.push(ExponentTuple(Vec::new()));
        }
        return;
    }
    if pos == n - 1 {
        current[pos] = remaining;
        out.push(ExponentTuple(current.clone()));
        return;
    }
    for a in 0..=remaining {
        current[pos] = a;
        fill_ascending(current, pos + 1, remaining - a, out);
    }
}

/// All exponent tuples of degree at most `max_degree`, graded by degree.
pub fn monomials_up_to(n: usize, max_degree: u32) -> Vec<ExponentTuple> {
    let mut out = vec![ExponentTuple::zero(n)];
    for d in 1..=max_degree {
        out.extend(monomials_of_degree(n, d));
    }
    out
}

/// `C(n + l - 1, l)`, the number of monomials of degree `l` in `n` variables.
pub fn block_size(n: usize, l: u32) -> usize {
    let mut acc: u128 = 1;
    for k in 1..=l as u128 {
        acc = acc * (n as u128 + k - 1) / k;
    }
    acc as usize
}

/// Sparse multivariate polynomial with real coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: BTreeMap<ExponentTuple, f64>,
}

impl Polynomial {
    pub fn zero(dim: usize) -> Self {
        Polynomial {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::from_terms(dim, [(ExponentTuple::zero(dim), c)]).expect("valid constant")
    }

    /// Builds a polynomial, merging repeated exponents and dropping
    /// negligible coefficients.
    pub fn from_terms<I>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ExponentTuple, f64)>,
    {
        let mut map = BTreeMap::new();
        for (e, c) in terms {
            if e.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: e.dim(),
                });
            }
            if !c.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite coefficient for {e}")));
            }
            *map.entry(e).or_insert(0.0) += c;
        }
        map.retain(|_, c| c.abs() > COEFF_TOL);
        Ok(Polynomial { dim, terms: map })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> impl Iterator<Item = (&ExponentTuple, f64)> {
        self.terms.iter().map(|(e, &c)| (e, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, e: &ExponentTuple) -> f64 {
        self.terms.get(e).copied().unwrap_or(0.0)
    }

    pub fn constant_term(&self) -> f64 {
        self.coeff(&ExponentTuple::zero(self.dim))
    }

    /// Total degree; the zero polynomial reports 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.degree()).max().unwrap_or(0)
    }

    /// Degrees of the nonconstant monomials that appear.
    pub fn degrees_present(&self) -> BTreeSet<u32> {
        self.terms
            .keys()
            .map(|e| e.degree())
            .filter(|&d| d > 0)
            .collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(e, c)| c * e.eval(x)).sum()
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        Self::from_terms(self.dim, self.terms.iter().map(|(e, c)| (e.clone(), c * s)))
            .expect("same dimension")
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_dim(other)?;
        Self::from_terms(
            self.dim,
            self.terms
                .iter()
                .chain(other.terms.iter())
                .map(|(e, &c)| (e.clone(), c)),
        )
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial> {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_dim(other)?;
        let mut out: BTreeMap<ExponentTuple, f64> = BTreeMap::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                *out.entry(a.add(b)).or_insert(0.0) += ca * cb;
            }
        }
        Self::from_terms(self.dim, out)
    }

    /// Largest coefficient difference against `other`.
    pub fn max_coeff_diff(&self, other: &Polynomial) -> f64 {
        let keys: BTreeSet<&ExponentTuple> = self.terms.keys().chain(other.terms.keys()).collect();
        keys.into_iter()
            .map(|e| (self.coeff(e) - other.coeff(e)).abs())
            .fold(0.0, f64::max)
    }

    /// Rewrites `p(x) <= rhs` as `c(x) <= 1` with `c(0) = 0`.
    ///
    /// The constant term moves to the right-hand side and the result is
    /// divided by it; this needs `rhs - p(0) > 0`, i.e. the origin strictly
    /// inside the constraint.
    pub fn normalize_le(&self, rhs: f64) -> Option<Polynomial> {
        let slack = rhs - self.constant_term();
        if !(slack > 0.0) || !slack.is_finite() {
            return None;
        }
        let zero = ExponentTuple::zero(self.dim);
        Some(
            Self::from_terms(
                self.dim,
                self.terms
                    .iter()
                    .filter(|(e, _)| **e != zero)
                    .map(|(e, c)| (e.clone(), c / slack)),
            )
            .expect("same dimension"),
        )
    }

    fn check_dim(&self, other: &Polynomial) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (e, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " {} ", if *c < 0.0 { '-' } else { '+' })?;
                write!(f, "{}*{}", c.abs(), e)?;
            } else {
                write!(f, "{}*{}", c, e)?;
            }
        }
        Ok(())
    }
}

/// Wire form of one polynomial term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

impl Serialize for Polynomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let terms: Vec<Term> = self
            .terms
            .iter()
            .map(|(e, &c)| Term {
                exponents: e.0.clone(),
                coeff: c,
            })
            .collect();
        terms.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let terms = Vec::<Term>::deserialize(d)?;
        let dim = terms.first().map(|t| t.exponents.len()).unwrap_or(0);
        Polynomial::from_terms(
            dim,
            terms
                .into_iter()
                .map(|t| (ExponentTuple(t.exponents), t.coeff)),
        )
        .map_err(serde::de::Error::custom)
    }
}

/// The ordered degree set `L` together with the coordinate layout of `R^N`.
#[derive(Clone, Debug)]
pub struct LiftBasis {
    n: usize,
    degrees: Vec<u32>,
    monomials: Vec<ExponentTuple>,
    offsets: Vec<usize>,
    index: HashMap<ExponentTuple, usize>,
}

impl PartialEq for LiftBasis {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.degrees == other.degrees
    }
}

impl LiftBasis {
    pub fn new<I: IntoIterator<Item = u32>>(n: usize, degrees: I) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("state dimension must be positive".into()));
        }
        let set: BTreeSet<u32> = degrees.into_iter().collect();
        if set.is_empty() {
            return Err(Error::InvalidInput("degree set is empty".into()));
        }
        if set.contains(&0) {
            return Err(Error::InvalidInput("degree 0 cannot be lifted".into()));
        }
        let degrees: Vec<u32> = set.into_iter().collect();
        let mut monomials = Vec::new();
        let mut offsets = Vec::with_capacity(degrees.len() + 1);
        for &l in &degrees {
            offsets.push(monomials.len());
            monomials.extend(monomials_of_degree(n, l));
        }
        offsets.push(monomials.len());
        let index = monomials
            .iter()
            .enumerate()
            .map(|(k, e)| (e.clone(), k))
            .collect();
        Ok(LiftBasis {
            n,
            degrees,
            monomials,
            offsets,
            index,
        })
    }

    /// State dimension `n`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Lifted dimension `N`.
    pub fn dim(&self) -> usize {
        self.monomials.len()
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn max_degree(&self) -> u32 {
        *self.degrees.last().expect("nonempty degree set")
    }

    pub fn monomials(&self) -> &[ExponentTuple] {
        &self.monomials
    }

    pub fn monomial(&self, k: usize) -> &ExponentTuple {
        &self.monomials[k]
    }

    pub fn index_of(&self, e: &ExponentTuple) -> Option<usize> {
        self.index.get(e).copied()
    }

    /// Coordinate range of the block of the `b`-th degree in [`Self::degrees`].
    pub fn block(&self, b: usize) -> Range<usize> {
        self.offsets[b]..self.offsets[b + 1]
    }

    /// The factor `sqrt(alpha!)` attached to coordinate `k`.
    pub fn scale(&self, k: usize) -> f64 {
        (self.monomials[k].multinomial() as f64).sqrt()
    }
}

/// `x^[L]`: stacked, scaled monomial vectors of each degree in the basis.
pub fn lift_vector(x: &[f64], basis: &LiftBasis) -> Result<DVector<f64>> {
    if x.len() != basis.n() {
        return Err(Error::DimensionMismatch {
            expected: basis.n(),
            found: x.len(),
        });
    }
    Ok(DVector::from_iterator(
        basis.dim(),
        basis
            .monomials()
            .iter()
            .enumerate()
            .map(|(k, e)| basis.scale(k) * e.eval(x)),
    ))
}

/// Permanent of a square matrix (Ryser's formula).
pub fn permanent(m: &DMatrix<f64>) -> Result<f64> {
    let (r, c) = m.shape();
    if r != c {
        return Err(Error::NotSquare { rows: r, cols: c });
    }
    if r == 0 {
        return Ok(1.0);
    }
    let k = r;
    let mut total = 0.0;
    for subset in 1u64..(1u64 << k) {
        let mut prod = 1.0;
        for i in 0..k {
            let row_sum: f64 = (0..k)
                .filter(|j| subset & (1 << j) != 0)
                .map(|j| m[(i, j)])
                .sum();
            prod *= row_sum;
        }
        let sign = if (k - subset.count_ones() as usize).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        total += sign * prod;
    }
    Ok(total)
}

fn check_square(a: &DMatrix<f64>, n: usize) -> Result<()> {
    let (r, c) = a.shape();
    if r != c {
        return Err(Error::NotSquare { rows: r, cols: c });
    }
    if r != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: r,
        });
    }
    Ok(())
}

/// `A^[L]`, the block-diagonal matrix with `(A x)^[L] = A^[L] x^[L]`.
///
/// Each row is obtained by expanding `(A x)^alpha` symbolically; the entry
/// for `beta` is that coefficient times `sqrt(alpha! / beta!)`.
pub fn lift_matrix(a: &DMatrix<f64>, basis: &LiftBasis) -> Result<DMatrix<f64>> {
    check_square(a, basis.n())?;
    let n = basis.n();
    let dim = basis.dim();
    let mut out = DMatrix::zeros(dim, dim);
    // rows of A as linear forms
    let forms: Vec<BTreeMap<ExponentTuple, f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (ExponentTuple::unit(n, j), a[(i, j)]))
                .collect()
        })
        .collect();
    for (row, alpha) in basis.monomials().iter().enumerate() {
        let mut expansion: BTreeMap<ExponentTuple, f64> = BTreeMap::new();
        expansion.insert(ExponentTuple::zero(n), 1.0);
        for (i, &power) in alpha.as_slice().iter().enumerate() {
            for _ in 0..power {
                expansion = raw_mul(&expansion, &forms[i]);
            }
        }
        let alpha_fact = alpha.multinomial() as f64;
        for (beta, c) in expansion {
            let col = basis
                .index_of(&beta)
                .expect("expansion stays in the same degree block");
            let beta_fact = beta.multinomial() as f64;
            out[(row, col)] = c * (alpha_fact / beta_fact).sqrt();
        }
    }
    Ok(out)
}

fn raw_mul(
    p: &BTreeMap<ExponentTuple, f64>,
    q: &BTreeMap<ExponentTuple, f64>,
) -> BTreeMap<ExponentTuple, f64> {
    let mut out = BTreeMap::new();
    for (a, ca) in p {
        for (b, cb) in q {
            *out.entry(a.add(b)).or_insert(0.0) += ca * cb;
        }
    }
    out
}

/// `A^[L]` through the permanent formula
/// `per(A(alpha, beta)) / sqrt(mu(alpha) mu(beta))`, where `mu` is the
/// product of factorials of the entries. Used as an independent check of
/// [`lift_matrix`].
pub fn lift_matrix_permanent(a: &DMatrix<f64>, basis: &LiftBasis) -> Result<DMatrix<f64>> {
    check_square(a, basis.n())?;
    let dim = basis.dim();
    let mut out = DMatrix::zeros(dim, dim);
    for b in 0..basis.degrees().len() {
        let range = basis.block(b);
        for r in range.clone() {
            let alpha = basis.monomial(r);
            let rows = repeated_indices(alpha);
            for c in range.clone() {
                let beta = basis.monomial(c);
                let cols = repeated_indices(beta);
                let sub = DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])]);
                let mu = (alpha.factorial_product() as f64) * (beta.factorial_product() as f64);
                out[(r, c)] = permanent(&sub)? / mu.sqrt();
            }
        }
    }
    Ok(out)
}

fn repeated_indices(e: &ExponentTuple) -> Vec<usize> {
    e.as_slice()
        .iter()
        .enumerate()
        .flat_map(|(i, &a)| std::iter::repeat_n(i, a as usize))
        .collect()
}

/// The matrix set and its lift.
#[derive(Clone, Debug)]
pub struct LiftedMatrixSet {
    original: Vec<DMatrix<f64>>,
    lifted: Vec<DMatrix<f64>>,
}

impl LiftedMatrixSet {
    pub fn new(matrices: &[DMatrix<f64>], basis: &LiftBasis) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::InvalidInput("matrix set is empty".into()));
        }
        let lifted = matrices
            .iter()
            .map(|a| lift_matrix(a, basis))
            .collect::<Result<Vec<_>>>()?;
        Ok(LiftedMatrixSet {
            original: matrices.to_vec(),
            lifted,
        })
    }

    pub fn original(&self) -> &[DMatrix<f64>] {
        &self.original
    }

    pub fn lifted(&self) -> &[DMatrix<f64>] {
        &self.lifted
    }

    pub fn len(&self) -> usize {
        self.lifted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lifted.is_empty()
    }

    pub fn lifted_dim(&self) -> usize {
        self.lifted[0].nrows()
    }
}

/// Extracts the degree set `L` and the vectors `g_i` with
/// `g_i^T x^[L] = c_i(x)`.
///
/// The polynomials must already be in the form `c_i(x) <= 1` without a
/// constant term (see [`Polynomial::normalize_le`]).
pub fn decompose_constraints(polys: &[Polynomial]) -> Result<(LiftBasis, Vec<DVector<f64>>)> {
    let first = polys
        .first()
        .ok_or_else(|| Error::InvalidInput("constraint list is empty".into()))?;
    let n = first.dim();
    let mut degrees = BTreeSet::new();
    for (index, p) in polys.iter().enumerate() {
        if p.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: p.dim(),
            });
        }
        if p.constant_term() != 0.0 {
            return Err(Error::ConstantTerm { index });
        }
        let present = p.degrees_present();
        if present.is_empty() {
            return Err(Error::ConstantConstraint { index });
        }
        degrees.extend(present);
    }
    let basis = LiftBasis::new(n, degrees)?;
    let gs = polys.iter().map(|p| lift_polynomial(p, &basis)).collect::<Result<Vec<_>>>()?;
    Ok((basis, gs))
}

/// Coefficient vector `g` of `p` in the lifted coordinates: `g^T x^[L] = p(x)`.
pub fn lift_polynomial(p: &Polynomial, basis: &LiftBasis) -> Result<DVector<f64>> {
    let mut g = DVector::zeros(basis.dim());
    for (e, c) in p.terms() {
        let k = basis.index_of(e).ok_or_else(|| {
            Error::InvalidInput(format!("monomial {e} is not covered by the lift basis"))
        })?;
        g[k] = c / basis.scale(k);
    }
    Ok(g)
}

/// Polynomial `f^T x^[L]` of a lifted-space row.
pub fn lower_row(f: &[f64], basis: &LiftBasis) -> Result<Polynomial> {
    if f.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: f.len(),
        });
    }
    Polynomial::from_terms(
        basis.n(),
        f.iter()
            .enumerate()
            .map(|(k, &v)| (basis.monomial(k).clone(), v * basis.scale(k))),
    )
}

/// Lowering of `{y : F y <= 1}`: the polynomials `c_i(x) = f_i^T x^[L]`.
pub fn lower_polyhedron(p: &HPolyhedron, basis: &LiftBasis) -> Result<Vec<Polynomial>> {
    if p.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: p.dim(),
        });
    }
    for (row, &rhs) in p.b().iter().enumerate() {
        if (rhs - 1.0).abs() > 1e-12 {
            return Err(Error::NonUnitRhs { row, rhs });
        }
    }
    (0..p.num_rows())
        .map(|r| {
            let f: Vec<f64> = p.a().row(r).iter().copied().collect();
            lower_row(&f, basis)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn et(v: &[u32]) -> ExponentTuple {
        ExponentTuple::new(v.to_vec())
    }

    #[test]
    fn multinomial_values() {
        assert_eq!(et(&[2, 0]).multinomial(), 1);
        assert_eq!(et(&[1, 1]).multinomial(), 2);
        // 4! / (2! 1! 1!)
        assert_eq!(et(&[2, 1, 1]).multinomial(), 12);
        assert_eq!(et(&[0, 0]).multinomial(), 1);
    }

    #[test]
    fn degree_two_order_matches_two_dimensional_layout() {
        let m = monomials_of_degree(2, 2);
        assert_eq!(m, vec![et(&[0, 2]), et(&[1, 1]), et(&[2, 0])]);
        let m1 = monomials_of_degree(2, 1);
        assert_eq!(m1, vec![et(&[1, 0]), et(&[0, 1])]);
    }

    #[test]
    fn basis_dimension_matches_binomial_count() {
        for n in 1..=4 {
            for degs in [vec![1], vec![2], vec![1, 2], vec![1, 3], vec![1, 2, 3]] {
                let b = LiftBasis::new(n, degs.clone()).unwrap();
                let expected: usize = degs.iter().map(|&l| block_size(n, l)).sum();
                assert_eq!(b.dim(), expected);
                let mut seen = vec![false; b.dim()];
                for (k, e) in b.monomials().iter().enumerate() {
                    assert_eq!(b.index_of(e), Some(k));
                    assert!(!seen[k]);
                    seen[k] = true;
                }
                assert!(seen.into_iter().all(|s| s));
            }
        }
    }

    #[test]
    fn lift_vector_examples() {
        let b2 = LiftBasis::new(2, [2]).unwrap();
        assert_eq!(lift_vector(&[0.0, 0.0], &b2).unwrap().as_slice(), &[0.0; 3]);
        let (x1, x2) = (0.3, -1.7);
        let y = lift_vector(&[x1, x2], &b2).unwrap();
        assert!((y[0] - x2 * x2).abs() < 1e-15);
        assert!((y[1] - SQRT_2 * x2 * x1).abs() < 1e-15);
        assert!((y[2] - x1 * x1).abs() < 1e-15);

        let b12 = LiftBasis::new(2, [1, 2]).unwrap();
        let y = lift_vector(&[1.0, 2.0], &b12).unwrap();
        let expected = [1.0, 2.0, 4.0, 2.0 * SQRT_2, 1.0];
        for (a, b) in y.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(matches!(
            lift_vector(&[1.0], &b12),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn permanent_examples() {
        assert_eq!(permanent(&DMatrix::identity(2, 2)).unwrap(), 1.0);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(permanent(&m).unwrap(), 10.0);
        let d = DMatrix::from_row_slice(2, 2, &[2.5, 0.0, 0.0, -3.0]);
        assert_eq!(permanent(&d).unwrap(), -7.5);
        let m3 = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        // brute force over the six permutations
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let brute: f64 = perms
            .iter()
            .map(|p| (0..3).map(|i| m3[(i, p[i])]).product::<f64>())
            .sum();
        assert!((permanent(&m3).unwrap() - brute).abs() < 1e-9);
        assert!(matches!(
            permanent(&DMatrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn identity_lifts_to_identity() {
        for degs in [vec![1], vec![2], vec![1, 2, 3]] {
            let b = LiftBasis::new(3, degs).unwrap();
            let l = lift_matrix(&DMatrix::identity(3, 3), &b).unwrap();
            assert!((l - DMatrix::identity(b.dim(), b.dim())).abs().max() < 1e-15);
        }
    }

    #[test]
    fn swap_matrix_lift() {
        let b = LiftBasis::new(2, [2]).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.65, 0.65, 0.0]);
        let l = lift_matrix(&a, &b).unwrap();
        let q = 0.65 * 0.65;
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, q, 0.0, q, 0.0, q, 0.0, 0.0]);
        assert!((l - expected).abs().max() < 1e-15);
    }

    #[test]
    fn permanent_route_agrees_with_expansion() {
        let a = DMatrix::from_row_slice(3, 3, &[0.3, -1.2, 0.5, 2.0, 0.1, -0.7, 0.9, 0.4, 1.1]);
        let b = LiftBasis::new(3, [1, 2, 3]).unwrap();
        let e = lift_matrix(&a, &b).unwrap();
        let p = lift_matrix_permanent(&a, &b).unwrap();
        assert!((e - p).abs().max() < 1e-12);
    }

    #[test]
    fn decompose_quadratic_constraints() {
        let c1 = Polynomial::from_terms(2, [(et(&[2, 0]), 1.0), (et(&[0, 2]), 1.0)]).unwrap();
        let c2 = Polynomial::from_terms(
            2,
            [(et(&[0, 2]), 1.0), (et(&[1, 1]), 6.0 * SQRT_2), (et(&[2, 0]), -4.0)],
        )
        .unwrap();
        let (basis, gs) = decompose_constraints(&[c1, c2]).unwrap();
        assert_eq!(basis.degrees(), &[2]);
        let expect = [[1.0, 0.0, 1.0], [1.0, 6.0, -4.0]];
        for (g, e) in gs.iter().zip(expect) {
            for (a, b) in g.iter().zip(e) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn decompose_linear_constraint() {
        let c = Polynomial::from_terms(2, [(et(&[1, 0]), 2.0)]).unwrap();
        let (basis, gs) = decompose_constraints(&[c]).unwrap();
        assert_eq!(basis.degrees(), &[1]);
        assert_eq!(gs[0].as_slice(), &[2.0, 0.0]);
    }

    #[test]
    fn decompose_errors() {
        assert!(matches!(decompose_constraints(&[]), Err(Error::InvalidInput(_))));
        let k = Polynomial::constant(2, 0.5);
        assert!(matches!(
            decompose_constraints(&[k]),
            Err(Error::ConstantTerm { index: 0 })
        ));
        let z = Polynomial::zero(2);
        assert!(matches!(
            decompose_constraints(&[z]),
            Err(Error::ConstantConstraint { index: 0 })
        ));
    }

    #[test]
    fn lower_unit_circle_row() {
        let b = LiftBasis::new(2, [2]).unwrap();
        let p = HPolyhedron::new(DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 1.0]), DVector::from_element(1, 1.0)).unwrap();
        let polys = lower_polyhedron(&p, &b).unwrap();
        let expected = Polynomial::from_terms(2, [(et(&[2, 0]), 1.0), (et(&[0, 2]), 1.0)]).unwrap();
        assert!(polys[0].max_coeff_diff(&expected) < 1e-15);

        let bad = HPolyhedron::new(DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 1.0]), DVector::from_element(1, 2.0)).unwrap();
        assert!(matches!(lower_polyhedron(&bad, &b), Err(Error::NonUnitRhs { .. })));
    }

    #[test]
    fn normalize_folds_constant() {
        // 2 x1^2 + 0.5 <= 3  ->  0.8 x1^2 <= 1
        let p = Polynomial::from_terms(1, [(et(&[2]), 2.0), (et(&[0]), 0.5)]).unwrap();
        let c = p.normalize_le(3.0).unwrap();
        assert_eq!(c.constant_term(), 0.0);
        assert!((c.coeff(&et(&[2])) - 0.8).abs() < 1e-15);
        assert!(p.normalize_le(0.5).is_none());
        assert!(p.normalize_le(0.1).is_none());
    }

    #[test]
    fn polynomial_serde_uses_term_list() {
        let p = Polynomial::from_terms(2, [(et(&[2, 0]), 1.5), (et(&[0, 1]), -2.0)]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"exponents\":[2,0]"));
        let back: Polynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
