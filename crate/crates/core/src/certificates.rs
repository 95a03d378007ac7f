//! Optimization certificates: lifted invariance LP, joint spectral radius
//! brackets, and SOS (Putinar-form) redundancy bounds.

use std::collections::BTreeMap;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polylift::{monomials_up_to, ExponentTuple, LiftedMatrixSet, Polynomial};

/// Largest product count `jsr_bounds` will enumerate.
pub const JSR_BUDGET: u128 = 1_000_000;

/// `epsilon*` within this of 1 is reported as inconclusive.
pub const SOS_MARGIN: f64 = 1e-6;
/// Gram matrices may have eigenvalues down to `-PSD_TOL`.
pub const PSD_TOL: f64 = 1e-7;
/// Max coefficient mismatch of a recomputed SOS identity.
pub const SOS_RESIDUAL_TOL: f64 = 1e-6;

const INVARIANCE_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvarianceCertificate {
    pub h: Vec<DMatrix<f64>>,
    pub epsilon: f64,
    /// `max_i |G A_i - H_i G|`, recomputed after the solve.
    pub residual: f64,
}

impl InvarianceCertificate {
    /// `epsilon <= 1` certifies invariance of the lowered set.
    pub fn certifies_invariance(&self) -> bool {
        self.epsilon <= 1.0 + 1e-9
    }
}

/// Solves `min eps` s.t. `G A_i = H_i G`, `H_i >= 0`, `H_i 1 <= eps 1`.
///
/// `None` means the LP is infeasible, which says nothing about the original
/// set (the test is sufficient only).
pub fn check_invariance(g: &DMatrix<f64>, sys: &LiftedMatrixSet) -> Result<Option<InvarianceCertificate>> {
    let (p, n) = g.shape();
    if n != sys.lifted_dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.lifted_dim(),
            found: n,
        });
    }
    let solved = std::panic::catch_unwind(|| {
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let eps = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
        let mut hvars = Vec::with_capacity(sys.len());
        for a in sys.lifted() {
            let h: Vec<Vec<_>> = (0..p)
                .map(|_| (0..p).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect())
                .collect();
            let ga = g * a;
            for r in 0..p {
                for c in 0..n {
                    let expr: Vec<_> = (0..p)
                        .filter(|&k| g[(k, c)] != 0.0)
                        .map(|k| (h[r][k], g[(k, c)]))
                        .collect();
                    if expr.is_empty() {
                        if ga[(r, c)].abs() > 1e-12 {
                            return Err(minilp::Error::Infeasible);
                        }
                        continue;
                    }
                    lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, ga[(r, c)]);
                }
                let mut row: Vec<_> = h[r].iter().map(|&v| (v, 1.0)).collect();
                row.push((eps, -1.0));
                lp.add_constraint(row.as_slice(), ComparisonOp::Le, 0.0);
            }
            hvars.push(h);
        }
        lp.solve().map(|sol| {
            let hs: Vec<DMatrix<f64>> = hvars
                .iter()
                .map(|h| DMatrix::from_fn(p, p, |r, c| sol[h[r][c]].max(0.0)))
                .collect();
            (sol[eps], hs)
        })
    });
    let (_, h) = match solved {
        Err(_) => return Err(Error::LpFailure("solver panicked".into())),
        Ok(Err(minilp::Error::Infeasible)) => return Ok(None),
        Ok(Err(minilp::Error::Unbounded)) => {
            return Err(Error::LpFailure("invariance LP reported unbounded".into()))
        }
        Ok(Ok(v)) => v,
    };
    if h.iter().any(|m| m.iter().any(|v| !v.is_finite())) {
        return Err(Error::LpFailure("invariance LP returned a non-finite point".into()));
    }
    // re-derive everything from H so the certificate stands on its own
    let epsilon = h
        .iter()
        .flat_map(|m| m.row_iter().map(|r| r.sum()).collect::<Vec<_>>())
        .fold(f64::NEG_INFINITY, f64::max);
    let residual = sys
        .lifted()
        .iter()
        .zip(&h)
        .map(|(a, hi)| (g * a - hi * g).amax())
        .fold(0.0, f64::max);
    let scale = 1.0 + sys.lifted().iter().map(|a| (g * a).amax()).fold(0.0, f64::max);
    if residual > INVARIANCE_RESIDUAL_TOL * scale {
        log::warn!("invariance certificate residual {residual:.3e} too large; discarded");
        return Ok(None);
    }
    Ok(Some(InvarianceCertificate { h, epsilon, residual }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralBounds {
    pub lower: f64,
    pub upper: f64,
    pub depth: usize,
    /// Upper bound from plain spectral norms, before the weighted-norm refinement.
    pub spectral_norm_upper: f64,
}

impl SpectralBounds {
    pub fn certifies_stability(&self) -> bool {
        self.upper < 1.0
    }
}

fn check_set(matrices: &[DMatrix<f64>]) -> Result<usize> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::InvalidInput("matrix set is empty".into()))?;
    let n = first.nrows();
    for m in matrices {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m.nrows(),
            });
        }
    }
    Ok(n)
}

/// All products `A_{s_t} ... A_{s_1}` of length `t`, in lexicographic order
/// of the index sequence.
pub fn products(matrices: &[DMatrix<f64>], t: usize) -> Result<Vec<DMatrix<f64>>> {
    let n = check_set(matrices)?;
    let count = (matrices.len() as u128).checked_pow(t as u32).unwrap_or(u128::MAX);
    if count > JSR_BUDGET {
        return Err(Error::EnumerationBudget {
            count,
            budget: JSR_BUDGET,
        });
    }
    let mut level = vec![DMatrix::identity(n, n)];
    for _ in 0..t {
        level = level
            .iter()
            .flat_map(|p| matrices.iter().map(move |a| a * p))
            .collect();
    }
    Ok(level)
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().max()
}

/// Brackets the joint spectral radius with all products of length `t`.
///
/// Lower bound: `max rho(P)^{1/t}`. Upper bound: the smaller of
/// `max |P|_2^{1/t}` and the same quantity in the weighted norm
/// `|R P R^{-1}|_2`, where `R^T R = sum_{k <= t/2} sum_Q Q^T Q / lambda^{2k}`
/// and `lambda` is the lower bound. Any induced norm gives a valid bound;
/// the weighted one is usually much tighter.
pub fn jsr_bounds(matrices: &[DMatrix<f64>], t: usize) -> Result<SpectralBounds> {
    if t == 0 {
        return Err(Error::InvalidInput("product depth must be at least 1".into()));
    }
    let n = check_set(matrices)?;
    let prods = products(matrices, t)?;
    let inv_t = 1.0 / t as f64;
    let lower = prods
        .iter()
        .map(|p| spectral_radius(p).powf(inv_t))
        .fold(0.0, f64::max);
    let plain = prods
        .iter()
        .map(|p| spectral_norm(p).powf(inv_t))
        .fold(0.0, f64::max);
    let mut upper = plain;
    if lower > 1e-9 {
        let mut gram = DMatrix::<f64>::zeros(n, n);
        for k in 0..=t / 2 {
            let w = lower.powi(-2 * k as i32);
            for q in products(matrices, k)? {
                gram += q.transpose() * &q * w;
            }
        }
        if let Some(chol) = gram.cholesky() {
            let r = chol.l().transpose();
            if let Some(r_inv) = r.clone().try_inverse() {
                let weighted = prods
                    .iter()
                    .map(|p| spectral_norm(&(&r * p * &r_inv)).powf(inv_t))
                    .fold(0.0, f64::max);
                if weighted.is_finite() {
                    upper = upper.min(weighted);
                }
            }
        }
    }
    // numerically lower can exceed upper by rounding only
    let upper = upper.max(lower);
    Ok(SpectralBounds {
        lower,
        upper,
        depth: t,
        spectral_norm_upper: plain,
    })
}

/// Result of a single SOS bound computation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SosBound {
    pub epsilon_star: f64,
    pub multiplier_degree: u32,
    /// Gram matrix of `s_0` first, then one per multiplier.
    pub gram_matrices: Vec<DMatrix<f64>>,
    pub min_eigenvalue: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RedundancyCertificate {
    pub j: usize,
    pub epsilon_star: f64,
    pub multiplier_degree: u32,
    pub min_eigenvalue: f64,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gram_matrices: Option<Vec<DMatrix<f64>>>,
    /// Set when the polynomial is a coefficient-wise copy of a kept one; no
    /// SDP is solved in that case.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub duplicate_of: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SosVerdict {
    Redundant(RedundancyCertificate),
    Inconclusive { j: usize, epsilon_star: Option<f64>, reason: String },
}

impl SosVerdict {
    pub fn is_redundant(&self) -> bool {
        matches!(self, SosVerdict::Redundant(_))
    }
}

struct GramBlock {
    monos: Vec<ExponentTuple>,
    offset: usize,
}

impl GramBlock {
    fn size(&self) -> usize {
        self.monos.len()
    }

    fn nvars(&self) -> usize {
        self.size() * (self.size() + 1) / 2
    }

    /// Variable index of entry `(i, j)`, `i <= j`, upper triangle by columns.
    fn var(&self, i: usize, j: usize) -> usize {
        self.offset + j * (j + 1) / 2 + i
    }

    fn matrix(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.size(), self.size(), |i, j| {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            x[self.var(a, b)]
        })
    }

    /// Coefficients of `m^T Q m`, as (monomial, variable, factor).
    fn expansion(&self) -> Vec<(ExponentTuple, usize, f64)> {
        let mut out = Vec::new();
        for j in 0..self.size() {
            for i in 0..=j {
                let f = if i == j { 1.0 } else { 2.0 };
                out.push((self.monos[i].add(&self.monos[j]), self.var(i, j), f));
            }
        }
        out
    }
}

fn sos_polynomial(block: &GramBlock, q: &DMatrix<f64>, dim: usize) -> Polynomial {
    let terms = (0..block.size()).flat_map(|i| {
        (0..block.size()).map(move |j| (block.monos[i].add(&block.monos[j]), q[(i, j)]))
    });
    Polynomial::from_terms(dim, terms).expect("consistent dimension")
}

/// Smallest `eps` with `eps - target = s_0 + sum_i s_i (1 - c_i)`, every `s`
/// SOS; `s_i` has degree `2 * multiplier_degree` and `s_0` is sized so both
/// sides can match. `None` when the SDP is infeasible or fails.
pub fn sos_bound(
    constraints: &[Polynomial],
    target: &Polynomial,
    multiplier_degree: u32,
) -> Result<Option<SosBound>> {
    let dim = target.dim();
    if let Some(c) = constraints.iter().find(|c| c.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: c.dim(),
        });
    }
    let d = constraints
        .iter()
        .map(|c| c.degree())
        .chain(std::iter::once(target.degree()))
        .max()
        .unwrap_or(0);
    let total = d.max(2 * multiplier_degree + d);
    let half = total.div_ceil(2);

    let mut blocks = Vec::new();
    let mut offset = 1; // variable 0 is eps
    for k in std::iter::once(half).chain(constraints.iter().map(|_| multiplier_degree)) {
        let b = GramBlock {
            monos: monomials_up_to(dim, k),
            offset,
        };
        offset += b.nvars();
        blocks.push(b);
    }
    let nvars = offset;

    // coefficient matching: rhs(x) - lhs(x) = 0 for every monomial
    let zero = ExponentTuple::zero(dim);
    let mut rows: BTreeMap<ExponentTuple, Vec<(usize, f64)>> = BTreeMap::new();
    let mut rhs: BTreeMap<ExponentTuple, f64> = BTreeMap::new();
    // eps - target: eps enters the constant row with coefficient -1 once moved right
    rows.entry(zero.clone()).or_default().push((0, -1.0));
    for (e, c) in target.terms() {
        *rhs.entry(e.clone()).or_insert(0.0) += -c;
        rows.entry(e.clone()).or_default();
    }
    for (e, var, f) in blocks[0].expansion() {
        rows.entry(e).or_default().push((var, f));
    }
    for (block, c) in blocks[1..].iter().zip(constraints) {
        let one_minus = Polynomial::constant(dim, 1.0).sub(c)?;
        for (e, var, f) in block.expansion() {
            for (ce, cc) in one_minus.terms() {
                rows.entry(e.add(ce)).or_default().push((var, f * cc));
            }
        }
    }
    // identity reads: sum(...) - eps*[e = 0] = -target_e
    let mut ti = Vec::new();
    let mut tj = Vec::new();
    let mut tv = Vec::new();
    let mut b = Vec::new();
    let monomial_rows: Vec<ExponentTuple> = rows.keys().cloned().collect();
    for (r, e) in monomial_rows.iter().enumerate() {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for &(v, f) in &rows[e] {
            *merged.entry(v).or_insert(0.0) += f;
        }
        for (v, f) in merged {
            if f != 0.0 {
                ti.push(r);
                tj.push(v);
                tv.push(f);
            }
        }
        b.push(rhs.get(e).copied().unwrap_or(0.0));
    }
    let mut cones = vec![SupportedConeT::ZeroConeT(monomial_rows.len())];
    let mut row = monomial_rows.len();
    let sqrt2 = std::f64::consts::SQRT_2;
    for block in &blocks {
        for j in 0..block.size() {
            for i in 0..=j {
                ti.push(row);
                tj.push(block.var(i, j));
                tv.push(if i == j { -1.0 } else { -sqrt2 });
                b.push(0.0);
                row += 1;
            }
        }
        cones.push(if block.size() == 1 {
            SupportedConeT::NonnegativeConeT(1)
        } else {
            SupportedConeT::PSDTriangleConeT(block.size())
        });
    }
    let a = CscMatrix::new_from_triplets(row, nvars, ti, tj, tv);
    let p = CscMatrix::zeros((nvars, nvars));
    let mut q = vec![0.0; nvars];
    q[0] = 1.0;
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(200)
        .build()
        .map_err(|e| Error::SdpFailure(format!("{e:?}")))?;
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
        .map_err(|e| Error::SdpFailure(format!("{e:?}")))?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {}
        SolverStatus::PrimalInfeasible
        | SolverStatus::AlmostPrimalInfeasible
        | SolverStatus::DualInfeasible
        | SolverStatus::AlmostDualInfeasible => return Ok(None),
        other => {
            log::debug!("SOS SDP stopped with {other:?}");
            return Ok(None);
        }
    }
    let x = solver.solution.x.clone();
    let grams: Vec<DMatrix<f64>> = blocks.iter().map(|bl| bl.matrix(&x)).collect();
    let min_eigenvalue = grams
        .iter()
        .map(|g| SymmetricEigen::new(g.clone()).eigenvalues.min())
        .fold(f64::INFINITY, f64::min);

    // independent residual: rebuild both sides as polynomials
    let eps = x[0];
    let lhs = Polynomial::constant(dim, eps).sub(target)?;
    let mut sum = sos_polynomial(&blocks[0], &grams[0], dim);
    for ((block, gram), c) in blocks[1..].iter().zip(&grams[1..]).zip(constraints) {
        let s = sos_polynomial(block, gram, dim);
        sum = sum.add(&s.mul(&Polynomial::constant(dim, 1.0).sub(c)?)?)?;
    }
    let residual = lhs.max_coeff_diff(&sum);
    Ok(Some(SosBound {
        epsilon_star: eps,
        multiplier_degree,
        gram_matrices: grams,
        min_eigenvalue,
        residual,
    }))
}

/// Tries to certify `target <= 1` on `{c_i <= 1}`, escalating the multiplier
/// degree from 0 to `max_degree`.
pub fn certify_implied(
    constraints: &[Polynomial],
    target: &Polynomial,
    j: usize,
    max_degree: u32,
) -> Result<SosVerdict> {
    let mut last = None;
    let mut reason = String::from("SDP infeasible");
    for k in 0..=max_degree {
        let Some(bound) = sos_bound(constraints, target, k)? else {
            continue;
        };
        last = Some(bound.epsilon_star);
        if bound.min_eigenvalue < -PSD_TOL {
            reason = format!("Gram matrix eigenvalue {:.3e}", bound.min_eigenvalue);
            continue;
        }
        if bound.residual > SOS_RESIDUAL_TOL {
            reason = format!("identity residual {:.3e}", bound.residual);
            continue;
        }
        if (bound.epsilon_star - 1.0).abs() <= SOS_MARGIN {
            reason = "epsilon* within the marginal band around 1".into();
            continue;
        }
        if bound.epsilon_star < 1.0 {
            return Ok(SosVerdict::Redundant(RedundancyCertificate {
                j,
                epsilon_star: bound.epsilon_star,
                multiplier_degree: k,
                min_eigenvalue: bound.min_eigenvalue,
                residual: bound.residual,
                gram_matrices: Some(bound.gram_matrices),
                duplicate_of: None,
            }));
        }
        reason = "epsilon* above 1".into();
    }
    Ok(SosVerdict::Inconclusive {
        j,
        epsilon_star: last,
        reason,
    })
}

/// Is `c_j <= 1` implied by the other constraints (at multiplier degree up
/// to `max_degree`)?
pub fn sos_redundancy(polys: &[Polynomial], j: usize, max_degree: u32) -> Result<SosVerdict> {
    if j >= polys.len() {
        return Err(Error::InvalidInput(format!("constraint {j} out of range")));
    }
    let others: Vec<Polynomial> = polys
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != j)
        .map(|(_, p)| p.clone())
        .collect();
    if others.is_empty() {
        return Ok(SosVerdict::Inconclusive {
            j,
            epsilon_star: None,
            reason: "no other constraints".into(),
        });
    }
    certify_implied(&others, &polys[j], j, max_degree)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinimalDescription {
    /// Indices (into the input list) of the polynomials kept.
    pub kept: Vec<usize>,
    /// Certificates of the removed polynomials, in removal order; `j` refers
    /// to the input list.
    pub removed: Vec<RedundancyCertificate>,
}

/// Drops polynomials certified redundant one at a time, restarting the scan
/// from the first remaining polynomial after each removal. Exact duplicates
/// are dropped first (their SOS bound sits exactly at 1, inside the
/// marginal band).
pub fn minimal_semialgebraic(polys: &[Polynomial], max_degree: u32) -> Result<MinimalDescription> {
    let mut kept: Vec<usize> = Vec::new();
    let mut removed = Vec::new();
    for (i, p) in polys.iter().enumerate() {
        match kept.iter().find(|&&k| polys[k].max_coeff_diff(p) <= 1e-12) {
            Some(&k) => removed.push(RedundancyCertificate {
                j: i,
                epsilon_star: 1.0,
                multiplier_degree: 0,
                min_eigenvalue: 0.0,
                residual: 0.0,
                gram_matrices: None,
                duplicate_of: Some(k),
            }),
            None => kept.push(i),
        }
    }
    'scan: loop {
        if kept.len() <= 1 {
            break;
        }
        for pos in 0..kept.len() {
            let current: Vec<Polynomial> = kept.iter().map(|&i| polys[i].clone()).collect();
            let verdict = match sos_redundancy(&current, pos, max_degree) {
                Ok(v) => v,
                Err(e) => {
                    log::warn!("SOS test of polynomial {} failed: {e}", kept[pos]);
                    continue;
                }
            };
            if let SosVerdict::Redundant(mut cert) = verdict {
                cert.j = kept[pos];
                removed.push(cert);
                kept.remove(pos);
                continue 'scan;
            }
        }
        break;
    }
    Ok(MinimalDescription { kept, removed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polylift::LiftBasis;

    fn et(v: &[u32]) -> ExponentTuple {
        ExponentTuple::new(v.to_vec())
    }

    fn circle(scale: f64) -> Polynomial {
        Polynomial::from_terms(2, [(et(&[2, 0]), scale), (et(&[0, 2]), scale)]).unwrap()
    }

    #[test]
    fn identity_is_invariant_with_unit_epsilon() {
        let basis = LiftBasis::new(2, [2]).unwrap();
        let sys = LiftedMatrixSet::new(&[DMatrix::identity(2, 2)], &basis).unwrap();
        let g = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 1.0, 1.0, 6.0, -4.0, -3.0, 10.0, 2.0]);
        let cert = check_invariance(&g, &sys).unwrap().unwrap();
        assert!((cert.epsilon - 1.0).abs() < 1e-8);
        assert!(cert.certifies_invariance());
    }

    #[test]
    fn contraction_of_unit_circle() {
        let basis = LiftBasis::new(2, [2]).unwrap();
        let sys = LiftedMatrixSet::new(&[DMatrix::identity(2, 2) * 0.5], &basis).unwrap();
        let g = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 1.0]);
        let cert = check_invariance(&g, &sys).unwrap().unwrap();
        assert!((cert.epsilon - 0.25).abs() < 1e-9);
        assert!(cert.h.iter().all(|h| h.iter().all(|&v| v >= 0.0)));
    }

    #[test]
    fn single_matrix_jsr_is_spectral_radius() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.0, 0.3]);
        for t in [1, 3, 6] {
            let b = jsr_bounds(std::slice::from_ref(&a), t).unwrap();
            assert!((b.lower - 0.5).abs() < 1e-9);
            assert!(b.lower <= b.upper);
        }
        // the weighted norm closes the gap for a single matrix only slowly,
        // but it must still be a valid bound
        let b = jsr_bounds(std::slice::from_ref(&a), 8).unwrap();
        assert!(b.upper >= 0.5 - 1e-12);
    }

    #[test]
    fn symmetric_matrix_bounds_meet() {
        let a = DMatrix::from_row_slice(2, 2, &[0.6, 0.1, 0.1, 0.2]);
        let b = jsr_bounds(std::slice::from_ref(&a), 2).unwrap();
        assert!((b.upper - b.lower).abs() < 1e-9);
        assert!((b.lower - spectral_radius(&a)).abs() < 1e-9);
    }

    #[test]
    fn enumeration_budget_is_enforced() {
        let m = vec![DMatrix::identity(1, 1); 10];
        assert!(matches!(jsr_bounds(&m, 7), Err(Error::EnumerationBudget { .. })));
    }

    #[test]
    fn half_circle_is_redundant() {
        let polys = [circle(1.0), circle(0.5)];
        let v = sos_redundancy(&polys, 1, 0).unwrap();
        let SosVerdict::Redundant(cert) = v else {
            panic!("expected a certificate, got {v:?}");
        };
        assert!(cert.epsilon_star <= 0.5 + 1e-6);
        assert!(cert.residual <= SOS_RESIDUAL_TOL);
        // the outer circle is not implied by the inner one
        assert!(!sos_redundancy(&polys, 0, 1).unwrap().is_redundant());
    }

    #[test]
    fn independent_variables_are_inconclusive() {
        let c1 = Polynomial::from_terms(2, [(et(&[2, 0]), 1.0)]).unwrap();
        let c2 = Polynomial::from_terms(2, [(et(&[0, 2]), 1.0)]).unwrap();
        for k in 0..=2 {
            assert!(!sos_redundancy(&[c1.clone(), c2.clone()], 0, k).unwrap().is_redundant());
        }
    }

    #[test]
    fn minimal_description_drops_duplicate() {
        let polys = [circle(1.0), circle(1.0)];
        let m = minimal_semialgebraic(&polys, 0).unwrap();
        assert_eq!(m.kept.len(), 1);
        let single = minimal_semialgebraic(&polys[..1], 0).unwrap();
        assert_eq!(single.kept, vec![0]);
    }
}
