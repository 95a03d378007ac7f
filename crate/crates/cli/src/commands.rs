//! Command implementations. Each returns its machine-readable output; the
//! binary decides where it goes.

use std::fmt;

use anyhow::{bail, Context};
use liftinv::certificates::{check_invariance, SpectralBounds};
use liftinv::engine::{
    box_from_state_bounds, build_lifted_problem, run_algorithm1, run_algorithm2, run_algorithm3,
    stability_gate, validate_state_bounds, verify_by_simulation, RowOrigin, SimulationReport,
};
use liftinv::polyhedra::BoundingBox;
use liftinv::Error;
use serde::Serialize;

use crate::grid::{self, CurveStyle};
use crate::output::{ResultFile, Stopwatch};
use crate::problem::ProblemFile;

/// Command-line values that take precedence over the problem's options.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub algorithm: Option<u8>,
    pub max_iter: Option<usize>,
    pub sos_degree: Option<u32>,
    pub delta: Option<f64>,
    pub jsr_depth: Option<usize>,
    pub no_sos_reduce: bool,
    pub skip_stability_gate: bool,
}

impl Overrides {
    pub fn apply(&self, p: &mut ProblemFile) {
        let o = &mut p.options;
        if let Some(v) = self.algorithm {
            o.algorithm = v;
        }
        if let Some(v) = self.max_iter {
            o.max_iter = v;
        }
        if let Some(v) = self.sos_degree {
            o.sos_degree = v;
        }
        if let Some(v) = self.delta {
            o.delta = v;
        }
        if let Some(v) = self.jsr_depth {
            o.jsr_depth = v;
        }
        if self.no_sos_reduce {
            o.sos_reduce = false;
        }
        if self.skip_stability_gate {
            o.skip_stability_gate = true;
        }
    }
}

/// Runs the configured algorithm. `sw` should have been started before
/// parsing so the parse time is charged.
pub fn solve(problem: ProblemFile, keep_gram: bool, mut sw: Stopwatch) -> anyhow::Result<ResultFile> {
    let p = problem.validate()?;
    let tol = &problem.options.tolerances;
    validate_state_bounds(&p.set, &p.x_min, &p.x_max, tol.box_samples)?;
    sw.lap("validate");

    let lifted = build_lifted_problem(&p.system, &p.set)?;
    let alg = problem.options.algorithm;
    let delta = (alg == 3).then_some(problem.options.delta);
    let bx = box_from_state_bounds(&p.x_min, &p.x_max, &lifted.basis, delta)?;
    sw.lap("lift");

    let mut opts = problem.solve_options();
    opts.keep_gram = keep_gram;
    log::info!(
        "algorithm {alg}: n = {}, {} modes, degrees {:?}, lifted dimension {}",
        p.system.n(),
        p.system.modes(),
        lifted.basis.degrees(),
        lifted.basis.dim()
    );
    let result = match alg {
        1 => run_algorithm1(&lifted, Some(&bx), &opts),
        2 => run_algorithm2(&lifted, &bx, &opts),
        3 => run_algorithm3(&lifted, &bx, &opts),
        _ => unreachable!("validated"),
    }?;
    sw.lap("solve");
    Ok(ResultFile::new(problem, result, sw))
}

/// One-line human summary of a result.
pub fn summary(r: &ResultFile) -> String {
    let res = &r.result;
    let mut s = format!(
        "algorithm {}: converged after {} iterations ({}), {} polynomial inequalities",
        res.algorithm,
        res.iterations,
        res.stop_criterion,
        res.polynomials.len()
    );
    if let Some(m) = &res.sos_reduction {
        s += &format!(", {} certified redundant", m.removed.len());
    }
    s
}

#[derive(Clone, Debug, Serialize)]
pub struct ConstraintStatus {
    pub index: usize,
    pub rhs: f64,
    pub constant_term: f64,
    /// Already of the form `c(x) <= 1` with `c(0) = 0`.
    pub normalized: bool,
    /// The origin is strictly inside, so the constraint can be normalized.
    pub origin_interior: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InvarianceVerdict {
    /// The lifted constraint set is invariant for the lifted system.
    Invariant,
    /// The LP test is only sufficient; nothing follows.
    Unknown,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub jsr: Option<SpectralBounds>,
    pub stable: bool,
    pub constraints: Vec<ConstraintStatus>,
    pub invariance: InvarianceVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariance_epsilon: Option<f64>,
}

/// Stability, normalization and lifted invariance of the constraint set.
/// The report is returned even when the system is not certified stable;
/// the caller maps `stable == false` to its exit code.
pub fn check(problem: &ProblemFile) -> anyhow::Result<CheckReport> {
    let raw = problem.raw_constraints()?;
    let constraints = raw
        .iter()
        .enumerate()
        .map(|(index, (p, rhs))| ConstraintStatus {
            index,
            rhs: *rhs,
            constant_term: p.constant_term(),
            normalized: *rhs == 1.0 && p.constant_term() == 0.0,
            origin_interior: p.normalize_le(*rhs).is_some(),
        })
        .collect();
    let p = problem.validate()?;
    let (jsr, stable) = match stability_gate(&p.system, problem.options.jsr_depth) {
        Ok(b) => (Some(b), true),
        Err(Error::NotStable { upper, depth }) => {
            log::warn!("JSR upper bound {upper} at depth {depth} does not certify stability");
            (liftinv::certificates::jsr_bounds(p.system.matrices(), depth).ok(), false)
        }
        Err(e) => return Err(e.into()),
    };
    let lifted = build_lifted_problem(&p.system, &p.set)?;
    let cert = check_invariance(lifted.x_lifted.a(), &lifted.sys_lifted)?;
    let invariance = match &cert {
        Some(c) if c.certifies_invariance() => InvarianceVerdict::Invariant,
        _ => InvarianceVerdict::Unknown,
    };
    Ok(CheckReport {
        jsr,
        stable,
        constraints,
        invariance,
        invariance_epsilon: cert.map(|c| c.epsilon),
    })
}

/// `verify` found counterexamples.
#[derive(Debug)]
pub struct Violations(pub usize);

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} grid points violate invariance or maximality", self.0)
    }
}

impl std::error::Error for Violations {}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub resolution: usize,
    pub horizon: usize,
    pub margin: f64,
    pub polynomials: usize,
    #[serde(flatten)]
    pub simulation: SimulationReport,
}

/// Rejects a problem file that is not the one the result was computed for.
/// Options may differ; the system, constraints and state box may not.
pub fn ensure_matching(result: &ResultFile, problem: &ProblemFile) -> anyhow::Result<()> {
    let echo = &result.problem;
    if echo.n != problem.n || echo.matrices != problem.matrices {
        bail!(Error::InvalidInput("problem and result describe different systems".into()));
    }
    if echo.constraints != problem.constraints {
        bail!(Error::InvalidInput("problem and result have different constraints".into()));
    }
    if echo.state_box != problem.state_box {
        bail!(Error::InvalidInput("problem and result have different state boxes".into()));
    }
    Ok(())
}

/// Grid simulation oracle over the state box of the echoed problem.
pub fn verify(
    result: &ResultFile,
    resolution: usize,
    horizon: Option<usize>,
    margin: Option<f64>,
) -> anyhow::Result<VerifyReport> {
    let p = result.problem.validate().context("problem echoed in the result file")?;
    let res = &result.result;
    if res.n != p.system.n() {
        bail!(Error::DimensionMismatch {
            expected: p.system.n(),
            found: res.n,
        });
    }
    let horizon = horizon.unwrap_or(res.iterations + 2);
    let margin = margin.unwrap_or(result.problem.options.tolerances.oracle_margin);
    let polys = res.description();
    let simulation = verify_by_simulation(&p.system, &p.set, polys, &p.x_min, &p.x_max, resolution, horizon, margin)?;
    Ok(VerifyReport {
        resolution,
        horizon,
        margin,
        polynomials: polys.len(),
        simulation,
    })
}

pub struct GridExport {
    pub csv: String,
    /// Planar results only.
    pub svg: Option<String>,
    pub rows: usize,
    pub members: usize,
}

/// Parses `lo1,hi1,lo2,hi2[,...]`.
pub fn parse_bounds(s: &str, n: usize) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad number {t:?} in bounds")))
        .collect::<anyhow::Result<_>>()?;
    if v.len() != 2 * n {
        bail!(Error::InvalidInput(format!("bounds need {} numbers, got {}", 2 * n, v.len())));
    }
    Ok(v.chunks(2).map(|c| (c[0], c[1])).unzip())
}

pub fn grid(result: &ResultFile, resolution: usize, bounds: Option<(Vec<f64>, Vec<f64>)>) -> anyhow::Result<GridExport> {
    let res = &result.result;
    let (lo, hi) = bounds.unwrap_or_else(|| {
        let b = &result.problem.state_box;
        (b.x_min.clone(), b.x_max.clone())
    });
    if lo.len() != res.n {
        bail!(Error::DimensionMismatch {
            expected: res.n,
            found: lo.len(),
        });
    }
    let tol = result.problem.options.tolerances.grid_membership;
    let rows = grid::evaluate(&res.polynomials, &lo, &hi, resolution, tol).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let svg = if res.n == 2 {
        let removed: Vec<usize> = res
            .sos_reduction
            .as_ref()
            .map(|m| m.removed.iter().map(|c| c.j).collect())
            .unwrap_or_default();
        let styles: Vec<CurveStyle> = (0..res.polynomials.len())
            .map(|i| CurveStyle {
                origin: res.row_origins.get(i).copied().unwrap_or(RowOrigin::Added),
                redundant: removed.contains(&i),
            })
            .collect();
        Some(grid::to_svg(&rows, resolution, &lo, &hi, &res.polynomials, &styles)?)
    } else {
        None
    };
    Ok(GridExport {
        csv: grid::to_csv(&rows, res.n),
        svg,
        members: rows.iter().filter(|r| r.member).count(),
        rows: rows.len(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LiftReport {
    pub degrees: Vec<u32>,
    /// Exponent tuples in lifted-coordinate order.
    pub monomials: Vec<Vec<u32>>,
    /// `sqrt(alpha!)` scaling of each lifted coordinate.
    pub scales: Vec<f64>,
    /// Normalized constraints `c_i(x) <= 1`, as lifted rows `g_i`.
    pub constraint_rows: Vec<Vec<f64>>,
    /// Row-major lifted matrices, one per mode.
    pub lifted_matrices: Vec<Vec<Vec<f64>>>,
    pub bounding_box: BoundingBox,
}

pub fn lift(problem: &ProblemFile) -> anyhow::Result<LiftReport> {
    let p = problem.validate()?;
    let lifted = build_lifted_problem(&p.system, &p.set)?;
    let basis = &lifted.basis;
    let delta = (problem.options.algorithm == 3).then_some(problem.options.delta);
    let rows = |m: &nalgebra::DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
    };
    Ok(LiftReport {
        degrees: basis.degrees().to_vec(),
        monomials: basis.monomials().iter().map(|e| e.as_slice().to_vec()).collect(),
        scales: (0..basis.dim()).map(|k| basis.scale(k)).collect(),
        constraint_rows: rows(lifted.x_lifted.a()),
        lifted_matrices: lifted.sys_lifted.lifted().iter().map(rows).collect(),
        bounding_box: box_from_state_bounds(&p.x_min, &p.x_max, basis, delta)?,
    })
}
