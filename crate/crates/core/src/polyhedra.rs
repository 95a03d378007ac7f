//! H-polyhedra in the lifted space and the LP-backed operations on them.
//!
//! Every LP goes through [`support`], which wraps `minilp`. The solver
//! panics on a few degenerate inputs; those panics are caught and surfaced
//! as [`Error::LpFailure`] instead of tearing down the caller.

use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polylift::LiftedMatrixSet;

/// A row whose optimum is within this of its right-hand side counts as
/// redundant (touching, not cutting).
pub const REDUNDANCY_TOL: f64 = 1e-9;

/// Slack accepted when checking that a solver point satisfies the rows.
const FEAS_TOL: f64 = 1e-7;

static LP_COUNT: AtomicUsize = AtomicUsize::new(0);

/// Number of LPs solved by this process so far.
pub fn lp_count() -> usize {
    LP_COUNT.load(Ordering::Relaxed)
}

/// `{y : A y <= b}`.
#[derive(Clone, Debug, PartialEq)]
pub struct HPolyhedron {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl HPolyhedron {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                found: b.len(),
            });
        }
        if a.nrows() == 0 {
            return Err(Error::InvalidInput("polyhedron needs at least one row".into()));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite polyhedron data".into()));
        }
        Ok(HPolyhedron { a, b })
    }

    /// `{y : G y <= 1}`.
    pub fn unit_rhs(g: DMatrix<f64>) -> Result<Self> {
        let p = g.nrows();
        Self::new(g, DVector::from_element(p, 1.0))
    }

    pub fn from_rows(rows: &[Vec<f64>], b: &[f64]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: r.len(),
            });
        }
        let a = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
        Self::new(a, DVector::from_column_slice(b))
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn row(&self, j: usize) -> Vec<f64> {
        self.a.row(j).iter().copied().collect()
    }

    pub fn has_unit_rhs(&self) -> bool {
        self.b.iter().all(|&v| (v - 1.0).abs() <= 1e-12)
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let a = self.a.select_rows(rows);
        let b = DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.b[r]));
        Self::new(a, b)
    }

    /// Largest row violation `max_j (a_j y - b_j)`.
    pub fn max_violation(&self, y: &DVector<f64>) -> f64 {
        (&self.a * y - &self.b).max()
    }

    pub fn contains_point(&self, y: &DVector<f64>, tol: f64) -> bool {
        self.max_violation(y) <= tol
    }

    fn check_dim(&self, other: &HPolyhedron) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct HPolyhedronWire {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl Serialize for HPolyhedron {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        HPolyhedronWire {
            a: (0..self.num_rows()).map(|r| self.row(r)).collect(),
            b: self.b.iter().copied().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HPolyhedron {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = HPolyhedronWire::deserialize(d)?;
        HPolyhedron::from_rows(&w.a, &w.b).map_err(serde::de::Error::custom)
    }
}

/// Axis-aligned box `lo <= y <= hi` in the lifted space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        if let Some(k) = (0..lo.len()).find(|&k| !(lo[k] < hi[k])) {
            return Err(Error::InvalidInput(format!(
                "box coordinate {k}: lower bound {} is not below upper bound {}",
                lo[k], hi[k]
            )));
        }
        Ok(BoundingBox { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// The `2N` rows `y_k <= hi_k` followed by `-y_k <= -lo_k`.
    pub fn to_hpolyhedron(&self) -> HPolyhedron {
        let n = self.dim();
        let mut a = DMatrix::zeros(2 * n, n);
        let mut b = DVector::zeros(2 * n);
        for k in 0..n {
            a[(k, k)] = 1.0;
            b[k] = self.hi[k];
            a[(n + k, k)] = -1.0;
            b[n + k] = -self.lo[k];
        }
        HPolyhedron::new(a, b).expect("box rows are well formed")
    }

    pub fn contains_point(&self, y: &[f64], tol: f64) -> bool {
        y.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { objective: f64, point: DVector<f64> },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn objective(&self) -> Option<f64> {
        match self {
            LpOutcome::Optimal { objective, .. } => Some(*objective),
            _ => None,
        }
    }
}

/// `max c^T y` over `P`.
pub fn support(p: &HPolyhedron, c: &[f64]) -> Result<LpOutcome> {
    support_rows(p, None, c)
}

/// Same as [`support`] but over the rows of `p` other than `skip`.
fn support_rows(p: &HPolyhedron, skip: Option<usize>, c: &[f64]) -> Result<LpOutcome> {
    if c.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: c.len(),
        });
    }
    LP_COUNT.fetch_add(1, Ordering::Relaxed);
    // minilp sometimes returns a non-finite point instead of reporting
    // unboundedness, and occasionally also for bounded LPs whose optimal face
    // is unbounded. A bounded recession LP decides which, and a bounded LP is
    // re-solved with split variables y = u - v, u, v >= 0.
    let point = match solve_max(p, skip, c, Form::Free)? {
        Solved::Outcome(o) => return Ok(o),
        Solved::Point(y) if validate(p, skip, &y).is_ok() => y,
        Solved::Point(_) => {
            if recedes(p, skip, c)? {
                return Ok(LpOutcome::Unbounded);
            }
            log::debug!("re-solving a bounded LP with split variables");
            match solve_max(p, skip, c, Form::Split)? {
                Solved::Point(y) => {
                    validate(p, skip, &y)?;
                    y
                }
                Solved::Outcome(o) => return Ok(o),
            }
        }
    };
    let objective = c.iter().zip(point.iter()).map(|(a, b)| a * b).sum();
    Ok(LpOutcome::Optimal { objective, point })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Form {
    /// `max c^T y` over `P`, free variables.
    Free,
    /// Same LP with `y = u - v`, `u, v >= 0`.
    Split,
    /// `max c^T d` with `A d <= 0`, `-1 <= d <= 1`.
    Recession,
}

enum Solved {
    Point(DVector<f64>),
    Outcome(LpOutcome),
}

/// Does `P` have a recession direction along which `c^T y` grows?
fn recedes(p: &HPolyhedron, skip: Option<usize>, c: &[f64]) -> Result<bool> {
    let d = match solve_max(p, skip, c, Form::Recession)? {
        Solved::Point(d) if d.iter().all(|v| v.is_finite()) => d,
        _ => return Err(Error::LpFailure("recession LP failed".into())),
    };
    let gain: f64 = c.iter().zip(d.iter()).map(|(a, b)| a * b).sum();
    let cmax = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(gain > FEAS_TOL * cmax.max(1.0))
}

fn solve_max(p: &HPolyhedron, skip: Option<usize>, c: &[f64], form: Form) -> Result<Solved> {
    let solved = panic::catch_unwind(AssertUnwindSafe(|| {
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        // each coordinate is a list of (variable, sign)
        let vars: Vec<Vec<_>> = c
            .iter()
            .map(|&ci| {
                if form == Form::Split {
                    vec![
                        (lp.add_var(ci, (0.0, f64::INFINITY)), 1.0),
                        (lp.add_var(-ci, (0.0, f64::INFINITY)), -1.0),
                    ]
                } else if form == Form::Recession {
                    vec![(lp.add_var(ci, (-1.0, 1.0)), 1.0)]
                } else {
                    vec![(lp.add_var(ci, (f64::NEG_INFINITY, f64::INFINITY)), 1.0)]
                }
            })
            .collect();
        for r in (0..p.num_rows()).filter(|&r| Some(r) != skip) {
            let expr: Vec<_> = vars
                .iter()
                .zip(p.a.row(r).iter())
                .filter(|(_, &v)| v != 0.0)
                .flat_map(|(vs, &v)| vs.iter().map(move |&(var, sg)| (var, sg * v)))
                .collect();
            let rhs = if form == Form::Recession { 0.0 } else { p.b[r] };
            if expr.is_empty() {
                if rhs < -FEAS_TOL {
                    return Err(minilp::Error::Infeasible);
                }
                continue;
            }
            lp.add_constraint(expr.as_slice(), ComparisonOp::Le, rhs);
        }
        lp.solve().map(|sol| {
            DVector::from_iterator(
                vars.len(),
                vars.iter().map(|vs| vs.iter().map(|&(v, sg)| sg * sol[v]).sum::<f64>()),
            )
        })
    }));
    Ok(match solved {
        Err(_) => return Err(Error::LpFailure("solver panicked".into())),
        Ok(Err(minilp::Error::Infeasible)) => Solved::Outcome(LpOutcome::Infeasible),
        Ok(Err(minilp::Error::Unbounded)) => Solved::Outcome(LpOutcome::Unbounded),
        Ok(Ok(point)) => Solved::Point(point),
    })
}

/// The solver's answer is not trusted blindly.
fn validate(p: &HPolyhedron, skip: Option<usize>, point: &DVector<f64>) -> Result<()> {
    if point.iter().any(|v| !v.is_finite()) {
        return Err(Error::LpFailure("solver returned a non-finite point".into()));
    }
    for r in (0..p.num_rows()).filter(|&r| Some(r) != skip) {
        let lhs = p.a.row(r).dot(&point.transpose());
        let scale = 1.0 + p.b[r].abs() + p.a.row(r).abs().max() * point.amax();
        if lhs - p.b[r] > FEAS_TOL * scale {
            return Err(Error::LpFailure(format!(
                "returned point violates row {r} by {:.3e}",
                lhs - p.b[r]
            )));
        }
    }
    Ok(())
}

/// Verdict of a single-row redundancy test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowStatus {
    Essential,
    Redundant,
    /// The other rows already describe the empty set.
    RedundantEmpty,
}

impl RowStatus {
    pub fn is_redundant(self) -> bool {
        !matches!(self, RowStatus::Essential)
    }
}

/// Is row `j` implied by the other rows of `p`?
pub fn is_redundant(p: &HPolyhedron, j: usize) -> Result<RowStatus> {
    row_status(p, j, None)
}

fn row_status(p: &HPolyhedron, j: usize, active: Option<&[bool]>) -> Result<RowStatus> {
    if j >= p.num_rows() {
        return Err(Error::InvalidInput(format!("row {j} out of range")));
    }
    let sub;
    let (target, skip) = match active {
        None => (p, Some(j)),
        Some(mask) => {
            let rows: Vec<usize> = (0..p.num_rows()).filter(|&r| r != j && mask[r]).collect();
            if rows.is_empty() {
                return Ok(RowStatus::Essential);
            }
            sub = p.select_rows(&rows)?;
            (&sub, None)
        }
    };
    if skip.is_some() && p.num_rows() < 2 {
        return Ok(RowStatus::Essential);
    }
    let c = p.row(j);
    Ok(match support_rows(target, skip, &c)? {
        LpOutcome::Unbounded => RowStatus::Essential,
        LpOutcome::Infeasible => RowStatus::RedundantEmpty,
        LpOutcome::Optimal { objective, .. } => {
            if objective <= p.b[j] + REDUNDANCY_TOL {
                RowStatus::Redundant
            } else {
                RowStatus::Essential
            }
        }
    })
}

/// Drops implied rows, scanning first to last; each row is tested against
/// every row still kept. Returns the reduced polyhedron and the indices of
/// the kept rows in `p`.
pub fn remove_redundancy(p: &HPolyhedron) -> Result<(HPolyhedron, Vec<usize>)> {
    let mut active = vec![true; p.num_rows()];
    for j in 0..p.num_rows() {
        if row_status(p, j, Some(&active))?.is_redundant() {
            active[j] = false;
        }
    }
    let kept: Vec<usize> = (0..p.num_rows()).filter(|&r| active[r]).collect();
    let reduced = p.select_rows(&kept)?;
    #[cfg(debug_assertions)]
    {
        let dropped: Vec<usize> = (0..p.num_rows()).filter(|&r| !active[r]).collect();
        for r in dropped {
            match support(&reduced, &p.row(r))? {
                LpOutcome::Optimal { objective, .. } => debug_assert!(
                    objective <= p.b[r] + 1e-6 * (1.0 + p.b[r].abs()),
                    "reduction changed the set: dropped row {r} reaches {objective} > {}",
                    p.b[r]
                ),
                LpOutcome::Infeasible => {}
                LpOutcome::Unbounded => panic!("reduction changed the set: dropped row {r} unbounded"),
            }
        }
    }
    Ok((reduced, kept))
}

/// Is `inner` a subset of `outer`? Empty `inner` is contained vacuously.
pub fn contains(outer: &HPolyhedron, inner: &HPolyhedron) -> Result<bool> {
    outer.check_dim(inner)?;
    if is_empty(inner)? {
        return Ok(true);
    }
    let verdicts: Vec<Result<bool>> = (0..outer.num_rows())
        .into_par_iter()
        .map(|j| {
            Ok(match support(inner, &outer.row(j))? {
                LpOutcome::Unbounded => false,
                LpOutcome::Infeasible => true,
                LpOutcome::Optimal { objective, .. } => objective <= outer.b[j] + REDUNDANCY_TOL,
            })
        })
        .collect();
    for v in verdicts {
        if !v? {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn is_empty(p: &HPolyhedron) -> Result<bool> {
    let zero = vec![0.0; p.dim()];
    Ok(matches!(support(p, &zero)?, LpOutcome::Infeasible))
}

/// Mutual containment of `P ∩ B` and `Q ∩ B`.
pub fn equal_on(p: &HPolyhedron, q: &HPolyhedron, bx: &BoundingBox) -> Result<bool> {
    let hb = bx.to_hpolyhedron();
    let pb = intersect(p, &hb)?;
    let qb = intersect(q, &hb)?;
    Ok(contains(&pb, &qb)? && contains(&qb, &pb)?)
}

/// Row concatenation: `P` rows first, then `Q` rows.
pub fn intersect(p: &HPolyhedron, q: &HPolyhedron) -> Result<HPolyhedron> {
    p.check_dim(q)?;
    let rows = p.num_rows() + q.num_rows();
    let a = DMatrix::from_fn(rows, p.dim(), |i, j| {
        if i < p.num_rows() {
            p.a[(i, j)]
        } else {
            q.a[(i - p.num_rows(), j)]
        }
    });
    let b = DVector::from_iterator(rows, p.b.iter().chain(q.b.iter()).copied());
    HPolyhedron::new(a, b)
}

/// `{y : G A_j y <= b for every mode j}`; the rows for mode 1 come first.
pub fn preimage(p: &HPolyhedron, sys: &LiftedMatrixSet) -> Result<HPolyhedron> {
    if sys.lifted_dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: sys.lifted_dim(),
        });
    }
    let blocks: Vec<DMatrix<f64>> = sys.lifted().iter().map(|m| &p.a * m).collect();
    let rows = p.num_rows() * blocks.len();
    let a = DMatrix::from_fn(rows, p.dim(), |i, j| blocks[i / p.num_rows()][(i % p.num_rows(), j)]);
    let b = DVector::from_iterator(rows, (0..rows).map(|i| p.b[i % p.num_rows()]));
    HPolyhedron::new(a, b)
}
