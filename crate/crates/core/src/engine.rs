//! Problem assembly, the bounding box in lifted coordinates, the three
//! pre-image iterations, and brute-force oracles.
//!
//! Sets are numbered from 0: `Z_0 = S_0` and `Z_{i+1} = C(Z_i) ∩ S_0`
//! (reduced). A run that stops after `k` pre-image steps reports
//! `iterations = k + 1`, the number of sets `Z_0..Z_k` it produced, and
//! returns `Z_{k-1}` as the fixed point.

use std::collections::VecDeque;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates::{
    self, certify_implied, jsr_bounds, minimal_semialgebraic, MinimalDescription, SpectralBounds,
    SosVerdict,
};
use crate::error::{Error, Result};
use crate::polyhedra::{self, contains, intersect, preimage, remove_redundancy, BoundingBox, HPolyhedron};
use crate::polylift::{
    decompose_constraints, lift_vector, lower_polyhedron, lower_row, LiftBasis, LiftedMatrixSet,
    Polynomial,
};

/// Membership slack used when a trajectory is tested against the constraints.
const STATE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchedSystem {
    n: usize,
    matrices: Vec<DMatrix<f64>>,
}

impl SwitchedSystem {
    pub fn new(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::InvalidInput("matrix set is empty".into()))?;
        let n = first.nrows();
        if n == 0 {
            return Err(Error::InvalidInput("state dimension must be positive".into()));
        }
        for m in &matrices {
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
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("non-finite matrix entry".into()));
            }
        }
        Ok(SwitchedSystem { n, matrices })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    pub fn modes(&self) -> usize {
        self.matrices.len()
    }
}

/// `{x : c_i(x) <= 1}` with every `c_i(0) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiAlgebraicSet {
    polynomials: Vec<Polynomial>,
}

impl SemiAlgebraicSet {
    /// Takes already normalized constraints.
    pub fn new(polynomials: Vec<Polynomial>) -> Result<Self> {
        Self::from_constraints(polynomials.into_iter().map(|p| (p, 1.0)).collect())
    }

    /// Takes `p_i(x) <= r_i` and normalizes each to `c_i(x) <= 1`.
    pub fn from_constraints(constraints: Vec<(Polynomial, f64)>) -> Result<Self> {
        let first = constraints
            .first()
            .ok_or_else(|| Error::InvalidInput("constraint list is empty".into()))?;
        let n = first.0.dim();
        let mut polynomials = Vec::with_capacity(constraints.len());
        for (index, (p, rhs)) in constraints.into_iter().enumerate() {
            if p.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: p.dim(),
                });
            }
            let c = p.normalize_le(rhs).ok_or(Error::OriginNotInterior { index })?;
            if c.is_zero() {
                return Err(Error::ConstantConstraint { index });
            }
            polynomials.push(c);
        }
        Ok(SemiAlgebraicSet { polynomials })
    }

    pub fn polynomials(&self) -> &[Polynomial] {
        &self.polynomials
    }

    pub fn dim(&self) -> usize {
        self.polynomials[0].dim()
    }

    pub fn max_value(&self, x: &[f64]) -> f64 {
        max_value(&self.polynomials, x)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.max_value(x) <= 1.0 + tol
    }
}

/// `max_i c_i(x)`; the set is its unit sublevel set.
pub fn max_value(polys: &[Polynomial], x: &[f64]) -> f64 {
    polys
        .iter()
        .map(|p| p.eval(x))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Clone, Debug)]
pub struct LiftedProblem {
    pub system: SwitchedSystem,
    pub set: SemiAlgebraicSet,
    pub basis: LiftBasis,
    pub sys_lifted: LiftedMatrixSet,
    /// `X^[L]`: one row `g_i` per constraint, right-hand side 1.
    pub x_lifted: HPolyhedron,
}

impl LiftedProblem {
    /// State dimension; the variety is the image of `R^n` under the lift.
    pub fn variety_dim(&self) -> usize {
        self.system.n()
    }
}

pub fn build_lifted_problem(system: &SwitchedSystem, set: &SemiAlgebraicSet) -> Result<LiftedProblem> {
    if set.dim() != system.n() {
        return Err(Error::DimensionMismatch {
            expected: system.n(),
            found: set.dim(),
        });
    }
    let (basis, gs) = decompose_constraints(set.polynomials())?;
    let g = DMatrix::from_fn(gs.len(), basis.dim(), |i, j| gs[i][j]);
    let x_lifted = HPolyhedron::unit_rhs(g)?;
    let sys_lifted = LiftedMatrixSet::new(system.matrices(), &basis)?;
    Ok(LiftedProblem {
        system: system.clone(),
        set: set.clone(),
        basis,
        sys_lifted,
        x_lifted,
    })
}

/// Range of `x^k` for `x` in `[lo, hi]`.
fn power_interval(lo: f64, hi: f64, k: u32) -> (f64, f64) {
    let (a, b) = (lo.powi(k as i32), hi.powi(k as i32));
    if k == 0 {
        (1.0, 1.0)
    } else if k.is_multiple_of(2) && lo < 0.0 && hi > 0.0 {
        (0.0, a.max(b))
    } else {
        (a.min(b), a.max(b))
    }
}

fn interval_mul((a, b): (f64, f64), (c, d): (f64, f64)) -> (f64, f64) {
    let p = [a * c, a * d, b * c, b * d];
    (
        p.iter().copied().fold(f64::INFINITY, f64::min),
        p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    )
}

/// The box `B` in lifted coordinates: exact per-monomial ranges of
/// `sqrt(alpha!) x^alpha` over `[x_min, x_max]`. With `delta`, every lower
/// bound is capped at `-delta` so the origin is interior.
pub fn box_from_state_bounds(
    x_min: &[f64],
    x_max: &[f64],
    basis: &LiftBasis,
    delta: Option<f64>,
) -> Result<BoundingBox> {
    check_state_bounds(x_min, x_max, basis.n())?;
    if let Some(d) = delta {
        if !(d > 0.0) {
            return Err(Error::InvalidInput(format!("delta must be positive, got {d}")));
        }
    }
    let mut lo = Vec::with_capacity(basis.dim());
    let mut hi = Vec::with_capacity(basis.dim());
    for (k, e) in basis.monomials().iter().enumerate() {
        let mut range = (1.0, 1.0);
        for (i, &a) in e.as_slice().iter().enumerate() {
            range = interval_mul(range, power_interval(x_min[i], x_max[i], a));
        }
        let s = basis.scale(k);
        let (mut l, h) = (s * range.0, s * range.1);
        if let Some(d) = delta {
            l = l.min(-d);
        }
        lo.push(l);
        hi.push(h);
    }
    BoundingBox::new(lo, hi)
}

fn check_state_bounds(x_min: &[f64], x_max: &[f64], n: usize) -> Result<()> {
    for v in [x_min, x_max] {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: v.len(),
            });
        }
    }
    if let Some(i) = (0..n).find(|&i| !(x_min[i] < 0.0 && 0.0 < x_max[i])) {
        return Err(Error::InvalidInput(format!(
            "state bounds must satisfy x_min < 0 < x_max (coordinate {i})"
        )));
    }
    Ok(())
}

/// Regular grid with `res` points per axis; `res = 1` gives the box centre.
pub fn grid_points(x_min: &[f64], x_max: &[f64], res: usize) -> Vec<Vec<f64>> {
    let n = x_min.len();
    let axis = |i: usize, k: usize| {
        if res <= 1 {
            0.5 * (x_min[i] + x_max[i])
        } else {
            x_min[i] + (x_max[i] - x_min[i]) * k as f64 / (res - 1) as f64
        }
    };
    let total = res.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            let mut x = vec![0.0; n];
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = axis(i, idx % res);
                idx /= res;
            }
            x
        })
        .collect()
}

/// Samples about `samples` grid points of the box enlarged threefold and
/// rejects the bounds if a point outside them satisfies every constraint.
pub fn validate_state_bounds(
    set: &SemiAlgebraicSet,
    x_min: &[f64],
    x_max: &[f64],
    samples: usize,
) -> Result<()> {
    let n = set.dim();
    check_state_bounds(x_min, x_max, n)?;
    let res = ((samples.max(2) as f64).powf(1.0 / n as f64).ceil() as usize).max(2);
    let (big_lo, big_hi): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|i| {
            let w = x_max[i] - x_min[i];
            (x_min[i] - w, x_max[i] + w)
        })
        .unzip();
    let witness = grid_points(&big_lo, &big_hi, res).into_iter().find(|x| {
        let outside = (0..n).any(|i| x[i] < x_min[i] - 1e-12 || x[i] > x_max[i] + 1e-12);
        outside && set.contains(x, 0.0)
    });
    match witness {
        Some(point) => Err(Error::BoxTooSmall { point }),
        None => Ok(()),
    }
}

/// Refuses systems whose stability cannot be certified with products up to
/// length `max_depth`.
pub fn stability_gate(system: &SwitchedSystem, max_depth: usize) -> Result<SpectralBounds> {
    let mut best: Option<SpectralBounds> = None;
    for t in 1..=max_depth.max(1) {
        let b = match jsr_bounds(system.matrices(), t) {
            Ok(b) => b,
            Err(Error::EnumerationBudget { .. }) if best.is_some() => break,
            Err(e) => return Err(e),
        };
        if b.certifies_stability() {
            return Ok(b);
        }
        if best.as_ref().is_none_or(|x| b.upper < x.upper) {
            best = Some(b);
        }
    }
    let b = best.expect("at least one depth evaluated");
    Err(Error::NotStable {
        upper: b.upper,
        depth: b.depth,
    })
}

/// Where a row of an iterate comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowOrigin {
    /// A constraint of the original set.
    Inherited,
    /// Produced by a pre-image step.
    Added,
    /// A facet of the bounding box.
    Box,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Index of the set produced by this step.
    pub index: usize,
    pub rows_before_reduction: usize,
    pub rows: usize,
    pub lp_solves: usize,
    pub millis: f64,
    /// `Z_{index} ⊆ Z_{index-1}`, when checked.
    pub nested: Option<bool>,
    pub converged: bool,
    /// Stop criterion that fired at this step, if any.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub criterion: Option<String>,
    /// SDPs solved by the variety test at this step.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sos_checks: Option<usize>,
}

#[derive(Clone, Debug)]
pub enum StopRule {
    /// `Z_i ∩ B = Z_{i+1} ∩ B`.
    OnBox(BoundingBox),
    /// Equality on the variety certified by SOS, with an optional box
    /// criterion as fallback.
    Variety {
        sos_degree: u32,
        fallback: Option<BoundingBox>,
    },
}

#[derive(Clone, Debug)]
pub struct IterationOutcome {
    pub fixed_point: HPolyhedron,
    pub fixed_point_tags: Vec<RowOrigin>,
    /// Index `k-1` of the returned set.
    pub fixed_point_index: usize,
    /// Number of pre-image steps `k`.
    pub steps: usize,
    pub trace: Vec<IterationRecord>,
    pub criterion: String,
    pub fallback_engaged: bool,
    /// The set after the last step, `Z_k`.
    pub last: HPolyhedron,
}

/// Runs `Z_{i+1} = reduce(C(Z_i) ∩ S_0)` until `stop` fires.
pub fn iterate(
    problem: &LiftedProblem,
    s0: &HPolyhedron,
    s0_tags: &[RowOrigin],
    stop: &StopRule,
    max_iter: usize,
    check_nesting: bool,
) -> Result<IterationOutcome> {
    if max_iter == 0 {
        return Err(Error::InvalidInput("max_iter must be at least 1".into()));
    }
    if s0_tags.len() != s0.num_rows() {
        return Err(Error::DimensionMismatch {
            expected: s0.num_rows(),
            found: s0_tags.len(),
        });
    }
    let box_poly = match stop {
        StopRule::OnBox(b) => Some(b.to_hpolyhedron()),
        StopRule::Variety { fallback, .. } => fallback.as_ref().map(|b| b.to_hpolyhedron()),
    };
    let mut current = s0.clone();
    let mut tags = s0_tags.to_vec();
    let mut trace = Vec::new();
    for step in 1..=max_iter {
        let started = Instant::now();
        let lps = polyhedra::lp_count();
        let pre = preimage(&current, &problem.sys_lifted)?;
        let pre_rows = pre.num_rows();
        let stacked = intersect(&pre, s0)?;
        let (next, kept) = remove_redundancy(&stacked)?;
        let next_tags: Vec<RowOrigin> = kept
            .iter()
            .map(|&r| if r < pre_rows { RowOrigin::Added } else { s0_tags[r - pre_rows] })
            .collect();
        let nested = if check_nesting {
            Some(contains(&current, &next)?)
        } else {
            None
        };
        if nested == Some(false) {
            log::warn!("iterate {step} is not contained in its predecessor");
        }

        let mut criterion = None;
        let mut sos_checks = None;
        let mut fallback_engaged = false;
        if let StopRule::Variety { sos_degree, .. } = stop {
            let (equal, solved) = variety_equal(&current, &next, &problem.basis, *sos_degree)?;
            sos_checks = Some(solved);
            if equal {
                criterion = Some("variety-sos".to_string());
            }
        }
        if criterion.is_none() {
            if let Some(bp) = &box_poly {
                if contains(&intersect(&next, bp)?, &intersect(&current, bp)?)? {
                    fallback_engaged = matches!(stop, StopRule::Variety { .. });
                    criterion = Some(
                        if fallback_engaged { "box-fallback" } else { "box" }.to_string(),
                    );
                }
            }
        }
        let converged = criterion.is_some();
        trace.push(IterationRecord {
            index: step,
            rows_before_reduction: stacked.num_rows(),
            rows: next.num_rows(),
            lp_solves: polyhedra::lp_count() - lps,
            millis: started.elapsed().as_secs_f64() * 1e3,
            nested,
            converged,
            criterion: criterion.clone(),
            sos_checks,
        });
        log::info!(
            "step {step}: {} rows ({} before reduction){}",
            next.num_rows(),
            stacked.num_rows(),
            if converged { ", converged" } else { "" }
        );
        if let Some(criterion) = criterion {
            return Ok(IterationOutcome {
                fixed_point: current,
                fixed_point_tags: tags,
                fixed_point_index: step - 1,
                steps: step,
                trace,
                criterion,
                fallback_engaged,
                last: next,
            });
        }
        current = next;
        tags = next_tags;
    }
    Err(Error::NonConvergence { max_iter, trace })
}

/// Certifies `down(Z_i) ⊆ down(Z_{i+1})`, the only inclusion that can fail
/// given nesting, by showing every row of `Z_{i+1}` is implied on
/// `down(Z_i)`. Rows already present in `Z_i` are implied trivially.
fn variety_equal(
    current: &HPolyhedron,
    next: &HPolyhedron,
    basis: &LiftBasis,
    degree: u32,
) -> Result<(bool, usize)> {
    let lowered = lower_normalized(current, basis)?;
    let mut solved = 0;
    for r in 0..next.num_rows() {
        let row = next.row(r);
        let b = next.b()[r];
        let duplicate = (0..current.num_rows()).any(|q| {
            (current.b()[q] - b).abs() <= 1e-12
                && current.row(q).iter().zip(&row).all(|(x, y)| (x - y).abs() <= 1e-12)
        });
        if duplicate {
            continue;
        }
        if b <= 0.0 {
            return Ok((false, solved));
        }
        let scaled: Vec<f64> = row.iter().map(|v| v / b).collect();
        let target = lower_row(&scaled, basis)?;
        solved += 1;
        match certify_implied(&lowered, &target, r, degree)? {
            SosVerdict::Redundant(_) => {}
            SosVerdict::Inconclusive { .. } => return Ok((false, solved)),
        }
    }
    Ok((true, solved))
}

/// Divides every row by its right-hand side and lowers the result.
pub fn lower_normalized(p: &HPolyhedron, basis: &LiftBasis) -> Result<Vec<Polynomial>> {
    let mut rows = Vec::with_capacity(p.num_rows());
    for r in 0..p.num_rows() {
        let b = p.b()[r];
        if !(b > 0.0) {
            return Err(Error::NonUnitRhs { row: r, rhs: b });
        }
        rows.push(p.row(r).iter().map(|v| v / b).collect::<Vec<f64>>());
    }
    let a = DMatrix::from_fn(rows.len(), p.dim(), |i, j| rows[i][j]);
    lower_polyhedron(&HPolyhedron::unit_rhs(a)?, basis)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveOptions {
    pub max_iter: usize,
    /// Largest multiplier degree tried by the SOS tests.
    pub sos_degree: u32,
    /// Run the SOS post-processing on the lowered description.
    pub sos_reduce: bool,
    /// Origin margin of the box for Algorithm 3.
    pub delta: f64,
    pub jsr_depth: usize,
    pub skip_stability_gate: bool,
    pub check_nesting: bool,
    /// Keep Gram matrices in the SOS certificates.
    pub keep_gram: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iter: 100,
            sos_degree: 0,
            sos_reduce: true,
            delta: 0.1,
            jsr_depth: 8,
            skip_stability_gate: false,
            check_nesting: true,
            keep_gram: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvariantSetResult {
    pub algorithm: u8,
    pub n: usize,
    pub degrees: Vec<u32>,
    /// Number of sets `Z_0..Z_k` produced.
    pub iterations: usize,
    pub preimage_steps: usize,
    pub fixed_point_index: usize,
    pub fixed_point: HPolyhedron,
    pub row_origins: Vec<RowOrigin>,
    /// `M = {x : max_i m_i(x) <= 1}`, one polynomial per fixed-point row.
    pub polynomials: Vec<Polynomial>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reduced_polynomials: Option<Vec<Polynomial>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sos_reduction: Option<MinimalDescription>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stability: Option<SpectralBounds>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bounding_box: Option<BoundingBox>,
    pub stop_criterion: String,
    pub fallback_engaged: bool,
    pub trace: Vec<IterationRecord>,
}

impl InvariantSetResult {
    pub fn contains(&self, x: &[f64], margin: f64) -> bool {
        max_value(&self.polynomials, x) <= 1.0 + margin
    }

    /// Kept polynomials after SOS reduction, or all of them.
    pub fn description(&self) -> &[Polynomial] {
        self.reduced_polynomials.as_deref().unwrap_or(&self.polynomials)
    }
}

fn gate(problem: &LiftedProblem, opts: &SolveOptions) -> Result<Option<SpectralBounds>> {
    if opts.skip_stability_gate {
        return Ok(None);
    }
    stability_gate(&problem.system, opts.jsr_depth).map(Some)
}

fn finish(
    algorithm: u8,
    problem: &LiftedProblem,
    outcome: IterationOutcome,
    stability: Option<SpectralBounds>,
    bounding_box: Option<BoundingBox>,
    opts: &SolveOptions,
) -> Result<InvariantSetResult> {
    let polynomials = lower_normalized(&outcome.fixed_point, &problem.basis)?;
    let (reduced_polynomials, sos_reduction) = if opts.sos_reduce {
        let mut m = minimal_semialgebraic(&polynomials, opts.sos_degree)?;
        if !opts.keep_gram {
            for c in &mut m.removed {
                c.gram_matrices = None;
            }
        }
        let kept = m.kept.iter().map(|&i| polynomials[i].clone()).collect();
        (Some(kept), Some(m))
    } else {
        (None, None)
    };
    Ok(InvariantSetResult {
        algorithm,
        n: problem.system.n(),
        degrees: problem.basis.degrees().to_vec(),
        iterations: outcome.steps + 1,
        preimage_steps: outcome.steps,
        fixed_point_index: outcome.fixed_point_index,
        fixed_point: outcome.fixed_point,
        row_origins: outcome.fixed_point_tags,
        polynomials,
        reduced_polynomials,
        sos_reduction,
        stability,
        bounding_box,
        stop_criterion: outcome.criterion,
        fallback_engaged: outcome.fallback_engaged,
        trace: outcome.trace,
    })
}

/// `S_0 = X^[L]`, stop on equality with the box.
pub fn run_algorithm2(problem: &LiftedProblem, bx: &BoundingBox, opts: &SolveOptions) -> Result<InvariantSetResult> {
    let stability = gate(problem, opts)?;
    let s0 = problem.x_lifted.clone();
    let tags = vec![RowOrigin::Inherited; s0.num_rows()];
    let out = iterate(problem, &s0, &tags, &StopRule::OnBox(bx.clone()), opts.max_iter, opts.check_nesting)?;
    finish(2, problem, out, stability, Some(bx.clone()), opts)
}

/// `S_0 = B ∩ X^[L]` with a box that has the origin in its interior.
pub fn run_algorithm3(problem: &LiftedProblem, bx: &BoundingBox, opts: &SolveOptions) -> Result<InvariantSetResult> {
    if !bx.lo.iter().zip(&bx.hi).all(|(l, h)| *l < 0.0 && *h > 0.0) {
        return Err(Error::InvalidInput(
            "the box must contain the origin in its interior".into(),
        ));
    }
    let stability = gate(problem, opts)?;
    let stacked = intersect(&problem.x_lifted, &bx.to_hpolyhedron())?;
    let p = problem.x_lifted.num_rows();
    let all_tags: Vec<RowOrigin> = (0..stacked.num_rows())
        .map(|r| if r < p { RowOrigin::Inherited } else { RowOrigin::Box })
        .collect();
    let (s0, kept) = remove_redundancy(&stacked)?;
    let tags: Vec<RowOrigin> = kept.iter().map(|&r| all_tags[r]).collect();
    let out = iterate(problem, &s0, &tags, &StopRule::OnBox(bx.clone()), opts.max_iter, opts.check_nesting)?;
    finish(3, problem, out, stability, Some(bx.clone()), opts)
}

/// `S_0 = X^[L]`, stop when the lowered sets are certified equal; `fallback`
/// enables the box criterion when the SOS test stays inconclusive.
pub fn run_algorithm1(
    problem: &LiftedProblem,
    fallback: Option<&BoundingBox>,
    opts: &SolveOptions,
) -> Result<InvariantSetResult> {
    let stability = gate(problem, opts)?;
    let s0 = problem.x_lifted.clone();
    let tags = vec![RowOrigin::Inherited; s0.num_rows()];
    let stop = StopRule::Variety {
        sos_degree: opts.sos_degree,
        fallback: fallback.cloned(),
    };
    let out = iterate(problem, &s0, &tags, &stop, opts.max_iter, opts.check_nesting)?;
    finish(1, problem, out, stability, fallback.cloned(), opts)
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SimulationReport {
    pub grid_points: usize,
    pub outside_constraints: usize,
    pub inside_checked: usize,
    pub outside_checked: usize,
    pub boundary_skipped: usize,
    /// Members whose trajectory left the constraint set.
    pub inside_violations: Vec<Vec<f64>>,
    /// Non-members for which no switching sequence left the set within the horizon.
    pub outside_violations: Vec<Vec<f64>>,
    /// Connected components of the member grid points (n <= 3).
    pub components: usize,
    /// One member point per component.
    pub component_witnesses: Vec<Vec<f64>>,
}

impl SimulationReport {
    pub fn violations(&self) -> usize {
        self.inside_violations.len() + self.outside_violations.len()
    }
}

fn stays_inside(matrices: &[DMatrix<f64>], set: &SemiAlgebraicSet, x: &DVector<f64>, depth: usize) -> bool {
    if depth == 0 {
        return true;
    }
    matrices.iter().all(|a| {
        let y = a * x;
        set.contains(y.as_slice(), STATE_TOL) && stays_inside(matrices, set, &y, depth - 1)
    })
}

fn can_exit(matrices: &[DMatrix<f64>], set: &SemiAlgebraicSet, x: &DVector<f64>, depth: usize) -> bool {
    if depth == 0 {
        return false;
    }
    matrices.iter().any(|a| {
        let y = a * x;
        set.max_value(y.as_slice()) > 1.0 || can_exit(matrices, set, &y, depth - 1)
    })
}

/// Grid oracle for maximality and invariance of `M = {max m_i <= 1}`.
///
/// Points of `X` with `max m_i <= 1 - margin` must stay in `X` along every
/// switching sequence of length `horizon`; points with `max m_i >= 1 + margin`
/// must leave `X` along some sequence of length at most `horizon`.
pub fn verify_by_simulation(
    system: &SwitchedSystem,
    set: &SemiAlgebraicSet,
    m_polys: &[Polynomial],
    x_min: &[f64],
    x_max: &[f64],
    resolution: usize,
    horizon: usize,
    margin: f64,
) -> Result<SimulationReport> {
    let n = system.n();
    if n > 3 {
        return Err(Error::InvalidInput("grid oracle supports n <= 3".into()));
    }
    if set.dim() != n || x_min.len() != n || x_max.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: set.dim(),
        });
    }
    let count = (system.modes() as u128).checked_pow(horizon as u32).unwrap_or(u128::MAX);
    if count > 1 << 24 {
        return Err(Error::EnumerationBudget {
            count,
            budget: 1 << 24,
        });
    }
    let pts = grid_points(x_min, x_max, resolution);
    #[derive(Clone, Copy, PartialEq)]
    enum Class {
        NotInX,
        Inside(bool),
        Outside(bool),
        Boundary,
    }
    let classes: Vec<Class> = pts
        .par_iter()
        .map(|x| {
            if !set.contains(x, 0.0) {
                return Class::NotInX;
            }
            let v = max_value(m_polys, x);
            let xv = DVector::from_column_slice(x);
            if v <= 1.0 - margin {
                Class::Inside(stays_inside(system.matrices(), set, &xv, horizon))
            } else if v >= 1.0 + margin {
                Class::Outside(horizon == 0 || can_exit(system.matrices(), set, &xv, horizon))
            } else {
                Class::Boundary
            }
        })
        .collect();
    let mut report = SimulationReport {
        grid_points: pts.len(),
        ..Default::default()
    };
    for (x, c) in pts.iter().zip(&classes) {
        match c {
            Class::NotInX => report.outside_constraints += 1,
            Class::Boundary => report.boundary_skipped += 1,
            Class::Inside(ok) => {
                report.inside_checked += 1;
                if !ok {
                    report.inside_violations.push(x.clone());
                }
            }
            Class::Outside(ok) => {
                report.outside_checked += 1;
                if !ok {
                    report.outside_violations.push(x.clone());
                }
            }
        }
    }
    let member: Vec<bool> = classes.iter().map(|c| matches!(c, Class::Inside(_))).collect();
    let comps = grid_components(&member, n, resolution);
    report.components = comps.len();
    report.component_witnesses = comps.into_iter().map(|i| pts[i].clone()).collect();
    Ok(report)
}

/// Connected components of the marked grid cells, counting diagonal
/// neighbours as adjacent so that only cells separated by a gap of unmarked
/// cells fall apart; returns the first cell index of each component.
pub fn grid_components(mark: &[bool], n: usize, res: usize) -> Vec<usize> {
    let mut seen = vec![false; mark.len()];
    let mut firsts = Vec::new();
    let stride: Vec<usize> = (0..n).map(|i| res.pow(i as u32)).collect();
    // offsets in {-1, 0, 1}^n without the zero offset
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(n as u32))
        .map(|k| (0..n).map(|i| (k / 3usize.pow(i as u32) % 3) as i64 - 1).collect::<Vec<_>>())
        .filter(|o| o.iter().any(|&d| d != 0))
        .collect();
    for start in 0..mark.len() {
        if !mark[start] || seen[start] {
            continue;
        }
        firsts.push(start);
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(c) = queue.pop_front() {
            'next: for o in &offsets {
                let mut nb = c;
                for (&s, &d) in stride.iter().zip(o) {
                    let coord = ((c / s) % res) as i64 + d;
                    if coord < 0 || coord >= res as i64 {
                        continue 'next;
                    }
                    nb = (nb as i64 + d * s as i64) as usize;
                }
                if mark[nb] && !seen[nb] {
                    seen[nb] = true;
                    queue.push_back(nb);
                }
            }
        }
    }
    firsts
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub convex: bool,
    pub pairs_tested: usize,
    /// `(a, b, midpoint)` of the first failing pair.
    pub witness: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
}

/// Midpoint test on random member pairs drawn by rejection from the box.
pub fn convexity_check(
    polys: &[Polynomial],
    x_min: &[f64],
    x_max: &[f64],
    samples: usize,
    seed: u64,
) -> ConvexityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = x_min.len();
    let draw = |rng: &mut ChaCha8Rng| -> Option<Vec<f64>> {
        for _ in 0..100_000 {
            let x: Vec<f64> = (0..n).map(|i| rng.random_range(x_min[i]..=x_max[i])).collect();
            if max_value(polys, &x) <= 1.0 {
                return Some(x);
            }
        }
        None
    };
    let mut pairs = 0;
    for _ in 0..samples {
        let (Some(a), Some(b)) = (draw(&mut rng), draw(&mut rng)) else {
            break;
        };
        pairs += 1;
        let mid: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 0.5 * (p + q)).collect();
        if max_value(polys, &mid) > 1.0 + 1e-9 {
            return ConvexityReport {
                convex: false,
                pairs_tested: pairs,
                witness: Some((a, b, mid)),
            };
        }
    }
    ConvexityReport {
        convex: true,
        pairs_tested: pairs,
        witness: None,
    }
}

/// Lifts a state and checks it against a lifted polyhedron.
pub fn lifted_member(p: &HPolyhedron, basis: &LiftBasis, x: &[f64], tol: f64) -> Result<bool> {
    Ok(p.contains_point(&lift_vector(x, basis)?, tol))
}

pub use certificates::check_invariance;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polylift::ExponentTuple;
    use std::f64::consts::SQRT_2;

    fn et(v: &[u32]) -> ExponentTuple {
        ExponentTuple::new(v.to_vec())
    }

    fn unit_circle() -> SemiAlgebraicSet {
        SemiAlgebraicSet::new(vec![Polynomial::from_terms(2, [(et(&[2, 0]), 1.0), (et(&[0, 2]), 1.0)]).unwrap()]).unwrap()
    }

    #[test]
    fn box_matches_unit_square_layout() {
        let basis = LiftBasis::new(2, [2]).unwrap();
        let b = box_from_state_bounds(&[-1.0, -1.0], &[1.0, 1.0], &basis, None).unwrap();
        assert_eq!(b.lo, vec![0.0, -SQRT_2, 0.0]);
        assert!((b.hi[0] - 1.0).abs() < 1e-15 && (b.hi[1] - SQRT_2).abs() < 1e-15);
        let d = box_from_state_bounds(&[-1.0, -1.0], &[1.0, 1.0], &basis, Some(0.1)).unwrap();
        assert_eq!(d.lo, vec![-0.1, -SQRT_2, -0.1]);
    }

    #[test]
    fn linear_box_is_state_box() {
        let basis = LiftBasis::new(2, [1]).unwrap();
        let b = box_from_state_bounds(&[-1.0, -2.0], &[3.0, 0.5], &basis, None).unwrap();
        assert_eq!(b.lo, vec![-1.0, -2.0]);
        assert_eq!(b.hi, vec![3.0, 0.5]);
    }

    #[test]
    fn box_covers_lifted_samples() {
        let basis = LiftBasis::new(3, [1, 2, 3]).unwrap();
        let (lo, hi) = ([-1.0, -0.5, -2.0], [0.7, 1.5, 0.3]);
        let b = box_from_state_bounds(&lo, &hi, &basis, None).unwrap();
        for x in grid_points(&lo, &hi, 7) {
            let y = lift_vector(&x, &basis).unwrap();
            assert!(b.contains_point(y.as_slice(), 1e-12));
        }
    }

    #[test]
    fn undersized_bounds_are_rejected() {
        let err = validate_state_bounds(&unit_circle(), &[-0.5, -0.5], &[0.5, 0.5], 10_000).unwrap_err();
        assert!(matches!(err, Error::BoxTooSmall { .. }));
        validate_state_bounds(&unit_circle(), &[-1.0, -1.0], &[1.0, 1.0], 10_000).unwrap();
    }

    #[test]
    fn origin_must_be_interior() {
        let p = Polynomial::from_terms(1, [(et(&[1]), 1.0), (et(&[0]), 2.0)]).unwrap();
        assert!(matches!(
            SemiAlgebraicSet::from_constraints(vec![(p, 1.0)]),
            Err(Error::OriginNotInterior { index: 0 })
        ));
    }

    #[test]
    fn contraction_stops_after_one_step() {
        let sys = SwitchedSystem::new(vec![DMatrix::identity(2, 2) * 0.5]).unwrap();
        let problem = build_lifted_problem(&sys, &unit_circle()).unwrap();
        let bx = box_from_state_bounds(&[-1.0, -1.0], &[1.0, 1.0], &problem.basis, None).unwrap();
        let opts = SolveOptions::default();
        let r = run_algorithm2(&problem, &bx, &opts).unwrap();
        assert_eq!(r.preimage_steps, 1);
        assert_eq!(r.fixed_point, problem.x_lifted);
        let r1 = run_algorithm1(&problem, None, &opts).unwrap();
        assert_eq!(r1.preimage_steps, 1);
        let bx3 = box_from_state_bounds(&[-1.0, -1.0], &[1.0, 1.0], &problem.basis, Some(0.1)).unwrap();
        let r3 = run_algorithm3(&problem, &bx3, &opts).unwrap();
        assert_eq!(r3.preimage_steps, 1);
    }

    #[test]
    fn identity_dynamics_fail_the_gate() {
        let sys = SwitchedSystem::new(vec![DMatrix::identity(2, 2)]).unwrap();
        let problem = build_lifted_problem(&sys, &unit_circle()).unwrap();
        let bx = box_from_state_bounds(&[-1.0, -1.0], &[1.0, 1.0], &problem.basis, Some(0.1)).unwrap();
        let err = run_algorithm3(&problem, &bx, &SolveOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NotStable { .. }));
    }

    #[test]
    fn grid_layout() {
        let g = grid_points(&[-1.0, -1.0], &[1.0, 1.0], 1);
        assert_eq!(g, vec![vec![0.0, 0.0]]);
        let g = grid_points(&[-1.0, -1.0], &[1.0, 1.0], 3);
        assert_eq!(g.len(), 9);
        assert_eq!(g[1], vec![0.0, -1.0]);
    }

    #[test]
    fn components_of_two_blobs() {
        // 5x5 grid, two separated columns
        let mut mark = vec![false; 25];
        for r in 0..5 {
            mark[r * 5] = true;
            mark[r * 5 + 4] = true;
        }
        assert_eq!(grid_components(&mark, 2, 5).len(), 2);
        mark[2] = true;
        mark[1] = true;
        mark[3] = true;
        assert_eq!(grid_components(&mark, 2, 5).len(), 1);
        // diagonal contact joins, a one-cell gap separates
        let mut mark = vec![false; 25];
        mark[6] = true;
        mark[12] = true;
        assert_eq!(grid_components(&mark, 2, 5).len(), 1);
        mark[12] = false;
        mark[18] = true;
        assert_eq!(grid_components(&mark, 2, 5).len(), 2);
        let mut cube = vec![false; 27];
        cube[0] = true;
        cube[26] = true;
        assert_eq!(grid_components(&cube, 3, 3).len(), 2);
        cube[13] = true;
        assert_eq!(grid_components(&cube, 3, 3).len(), 1);
    }

    #[test]
    fn ball_is_convex_and_hyperbola_cut_is_not() {
        let ball = unit_circle();
        assert!(convexity_check(ball.polynomials(), &[-1.0, -1.0], &[1.0, 1.0], 2000, 1).convex);
        // x1 x2 <= 1/8 inside the disc
        let cut = Polynomial::from_terms(2, [(et(&[1, 1]), 8.0)]).unwrap();
        let set = vec![ball.polynomials()[0].clone(), cut];
        let r = convexity_check(&set, &[-1.0, -1.0], &[1.0, 1.0], 2000, 1);
        assert!(!r.convex);
        let (_, _, mid) = r.witness.unwrap();
        assert!(max_value(&set, &mid) > 1.0);
    }
}
