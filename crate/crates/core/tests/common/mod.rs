#![allow(dead_code)]

use std::f64::consts::SQRT_2;

use liftinv::engine::{build_lifted_problem, LiftedProblem, SemiAlgebraicSet, SwitchedSystem};
use liftinv::polylift::{ExponentTuple, Polynomial};
use nalgebra::DMatrix;

pub fn et(v: &[u32]) -> ExponentTuple {
    ExponentTuple::new(v.to_vec())
}

/// Quadratic form `a x2^2 + b sqrt(2) x1 x2 + c x1^2`, i.e. lifted row (a, b, c).
pub fn quad(a: f64, b: f64, c: f64) -> Polynomial {
    Polynomial::from_terms(2, [(et(&[0, 2]), a), (et(&[1, 1]), b * SQRT_2), (et(&[2, 0]), c)]).unwrap()
}

pub fn m2(v: [f64; 4]) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &v)
}

pub fn running_matrices() -> Vec<DMatrix<f64>> {
    vec![m2([1.0425, 0.3416, -0.5893, 0.5839]), m2([0.0, 0.65, 0.65, 0.0])]
}

pub fn running_example() -> LiftedProblem {
    let sys = SwitchedSystem::new(running_matrices()).unwrap();
    let set = SemiAlgebraicSet::new(vec![quad(1.0, 0.0, 1.0), quad(1.0, 6.0, -4.0), quad(-3.0, 10.0, 2.0)]).unwrap();
    build_lifted_problem(&sys, &set).unwrap()
}

pub fn unit_circle() -> SemiAlgebraicSet {
    SemiAlgebraicSet::new(vec![quad(1.0, 0.0, 1.0)]).unwrap()
}

pub fn example1() -> LiftedProblem {
    let sys = SwitchedSystem::new(vec![m2([1.0216, 0.3234, -0.6597, 0.5226])]).unwrap();
    build_lifted_problem(&sys, &unit_circle()).unwrap()
}

pub const UNIT: ([f64; 2], [f64; 2]) = ([-1.0, -1.0], [1.0, 1.0]);

pub fn example2_matrices() -> Vec<DMatrix<f64>> {
    vec![m2([0.2137, 1.2052, -0.2125, 0.1703]), m2([-0.3576, 1.0351, 0.3290, 0.3514])]
}

/// Obstacles `(a, b, r1, r2)`: the constraint keeps the outside of the
/// ellipse centred at (a, b) with semi-axes r1, r2.
pub const EXAMPLE2_OBSTACLES: [(f64, f64, f64, f64); 3] = [
    (-0.405, -0.241, 0.172, 0.172),
    (-0.53, 0.311, 0.208, 0.208),
    (-0.638, 0.152, 0.261, 0.156),
];

/// `((x1-a)/r1)^2 + ((x2-b)/r2)^2 >= 1` written as `p(x) <= -1`.
pub fn outside_ellipse(a: f64, b: f64, r1: f64, r2: f64) -> (Polynomial, f64) {
    let (u, v) = (1.0 / (r1 * r1), 1.0 / (r2 * r2));
    let p = Polynomial::from_terms(
        2,
        [
            (et(&[2, 0]), -u),
            (et(&[1, 0]), 2.0 * a * u),
            (et(&[0, 2]), -v),
            (et(&[0, 1]), 2.0 * b * v),
            (et(&[0, 0]), -(a * a * u + b * b * v)),
        ],
    )
    .unwrap();
    (p, -1.0)
}

pub fn example2_set() -> SemiAlgebraicSet {
    let mut cons = vec![(quad(1.0, 0.0, 1.0), 1.0)];
    cons.extend(EXAMPLE2_OBSTACLES.iter().map(|&(a, b, r1, r2)| outside_ellipse(a, b, r1, r2)));
    SemiAlgebraicSet::from_constraints(cons).unwrap()
}

pub fn example2() -> LiftedProblem {
    let sys = SwitchedSystem::new(example2_matrices()).unwrap();
    build_lifted_problem(&sys, &example2_set()).unwrap()
}
