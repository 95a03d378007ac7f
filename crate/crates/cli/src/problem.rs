//! Problem file schema (strict: unknown keys are rejected).

use std::path::Path;

use anyhow::{bail, Context};
use liftinv::engine::{SemiAlgebraicSet, SolveOptions, SwitchedSystem};
use liftinv::polylift::{ExponentTuple, Polynomial, Term};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    /// Row-major `n x n` matrices, one per mode.
    pub matrices: Vec<Vec<Vec<f64>>>,
    pub constraints: Vec<ConstraintSpec>,
    pub state_box: StateBox,
    #[serde(default)]
    pub options: ProblemOptions,
}

/// `sum(terms) <= rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    pub terms: Vec<Term>,
    #[serde(default = "one")]
    pub rhs: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateBox {
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemOptions {
    pub algorithm: u8,
    pub max_iter: usize,
    pub sos_degree: u32,
    pub sos_reduce: bool,
    pub delta: f64,
    pub jsr_depth: usize,
    pub skip_stability_gate: bool,
    pub tolerances: Tolerances,
}

impl Default for ProblemOptions {
    fn default() -> Self {
        let d = SolveOptions::default();
        ProblemOptions {
            algorithm: 2,
            max_iter: d.max_iter,
            sos_degree: d.sos_degree,
            sos_reduce: d.sos_reduce,
            delta: d.delta,
            jsr_depth: d.jsr_depth,
            skip_stability_gate: d.skip_stability_gate,
            tolerances: Tolerances::default(),
        }
    }
}

/// Tolerances the front end controls. Solver-level tolerances (LP tie rule,
/// SOS margins) are fixed in the library.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Width of the skipped band around the boundary in `verify`.
    pub oracle_margin: f64,
    /// Slack on `max m_i(x) <= 1` when `grid` marks members.
    pub grid_membership: f64,
    /// Grid points used to validate `state_box`.
    pub box_samples: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            oracle_margin: 1e-3,
            grid_membership: 1e-9,
            box_samples: 10_000,
        }
    }
}

/// Everything the engine needs, validated.
#[derive(Clone, Debug)]
pub struct Problem {
    pub system: SwitchedSystem,
    pub set: SemiAlgebraicSet,
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
}

impl ProblemFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn solve_options(&self) -> SolveOptions {
        let o = &self.options;
        SolveOptions {
            max_iter: o.max_iter,
            sos_degree: o.sos_degree,
            sos_reduce: o.sos_reduce,
            delta: o.delta,
            jsr_depth: o.jsr_depth,
            skip_stability_gate: o.skip_stability_gate,
            ..SolveOptions::default()
        }
    }

    pub fn system(&self) -> anyhow::Result<SwitchedSystem> {
        let mut mats = Vec::with_capacity(self.matrices.len());
        for (k, m) in self.matrices.iter().enumerate() {
            if m.len() != self.n || m.iter().any(|r| r.len() != self.n) {
                bail!("matrix {k} is not {n}x{n}", n = self.n);
            }
            mats.push(DMatrix::from_fn(self.n, self.n, |i, j| m[i][j]));
        }
        Ok(SwitchedSystem::new(mats)?)
    }

    /// Raw constraint polynomials with their right-hand sides.
    pub fn raw_constraints(&self) -> anyhow::Result<Vec<(Polynomial, f64)>> {
        self.constraints
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if let Some(t) = c.terms.iter().find(|t| t.exponents.len() != self.n) {
                    bail!(
                        "constraint {k}: exponent tuple {:?} does not have {} entries",
                        t.exponents,
                        self.n
                    );
                }
                let p = Polynomial::from_terms(
                    self.n,
                    c.terms.iter().map(|t| (ExponentTuple::new(t.exponents.clone()), t.coeff)),
                )?;
                Ok((p, c.rhs))
            })
            .collect()
    }

    pub fn set(&self) -> anyhow::Result<SemiAlgebraicSet> {
        Ok(SemiAlgebraicSet::from_constraints(self.raw_constraints()?)?)
    }

    pub fn validate(&self) -> anyhow::Result<Problem> {
        if self.n == 0 {
            bail!("n must be positive");
        }
        if !(1..=3).contains(&self.options.algorithm) {
            bail!("algorithm must be 1, 2 or 3, got {}", self.options.algorithm);
        }
        if self.state_box.x_min.len() != self.n || self.state_box.x_max.len() != self.n {
            bail!("state_box bounds must have {} entries", self.n);
        }
        Ok(Problem {
            system: self.system()?,
            set: self.set()?,
            x_min: self.state_box.x_min.clone(),
            x_max: self.state_box.x_max.clone(),
        })
    }
}
