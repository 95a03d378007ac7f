mod common;

use std::time::Instant;

use common::*;
use liftinv::engine::*;
use liftinv::polyhedra::{equal_on, BoundingBox};
use liftinv::polylift::Polynomial;
use liftinv::Error;
use nalgebra::DMatrix;

fn unit_box(p: &LiftedProblem, delta: Option<f64>) -> BoundingBox {
    box_from_state_bounds(&UNIT.0, &UNIT.1, &p.basis, delta).unwrap()
}

fn assert_nested(r: &InvariantSetResult) {
    assert!(r.trace.iter().all(|t| t.nested == Some(true)), "{:?}", r.trace);
}

/// Two-sided membership agreement away from the boundary.
fn disagreements(a: &[Polynomial], b: &[Polynomial], res: usize, margin: f64) -> usize {
    grid_points(&UNIT.0, &UNIT.1, res)
        .iter()
        .filter(|x| {
            let (va, vb) = (max_value(a, x), max_value(b, x));
            (va <= 1.0 - margin && vb > 1.0 + margin) || (vb <= 1.0 - margin && va > 1.0 + margin)
        })
        .count()
}

#[test]
fn running_example_algorithm2() {
    let started = Instant::now();
    let p = running_example();
    let r = run_algorithm2(&p, &unit_box(&p, None), &SolveOptions::default()).unwrap();
    assert_eq!(r.iterations, 8);
    assert_eq!(r.stop_criterion, "box");
    assert_eq!(r.polynomials.len(), 14);
    assert_eq!(r.sos_reduction.as_ref().unwrap().removed.len(), 5);
    assert_eq!(r.description().len(), 9);
    assert_nested(&r);
    assert!(started.elapsed().as_secs_f64() < 60.0);
}

#[test]
fn fixed_point_matches_the_next_iterate_on_the_box() {
    let p = running_example();
    let bx = unit_box(&p, None);
    let tags = vec![RowOrigin::Inherited; p.x_lifted.num_rows()];
    let out = iterate(&p, &p.x_lifted, &tags, &StopRule::OnBox(bx.clone()), 100, true).unwrap();
    assert_eq!(out.steps, 7);
    assert_eq!(out.fixed_point_index, 6);
    assert!(equal_on(&out.fixed_point, &out.last, &bx).unwrap());
}

#[test]
fn running_example_variety_stop_is_not_later() {
    let p = running_example();
    let r = run_algorithm1(&p, Some(&unit_box(&p, None)), &SolveOptions::default()).unwrap();
    assert!(r.iterations <= 8);
    assert_nested(&r);
    let r2 = run_algorithm2(&p, &unit_box(&p, None), &SolveOptions::default()).unwrap();
    assert_eq!(disagreements(&r.polynomials, &r2.polynomials, 200, 1e-6), 0);
}

#[test]
fn example1_box_algorithms_take_six_iterations() {
    let p = example1();
    let opts = SolveOptions {
        delta: 1.0,
        ..Default::default()
    };
    let r2 = run_algorithm2(&p, &unit_box(&p, None), &opts).unwrap();
    let r3 = run_algorithm3(&p, &unit_box(&p, Some(opts.delta)), &opts).unwrap();
    assert_eq!(r2.iterations, 6);
    assert_eq!(r3.iterations, 6);
    assert_nested(&r2);
    assert_nested(&r3);
    assert!(r3.row_origins.contains(&RowOrigin::Box));
    assert_eq!(disagreements(&r2.polynomials, &r3.polynomials, 200, 1e-6), 0);
}

#[test]
fn example1_variety_stop_agrees_with_the_box_stop() {
    let p = example1();
    let r1 = run_algorithm1(&p, Some(&unit_box(&p, None)), &SolveOptions::default()).unwrap();
    let r2 = run_algorithm2(&p, &unit_box(&p, None), &SolveOptions::default()).unwrap();
    // certified one step before the box criterion fires
    assert_eq!(r1.stop_criterion, "variety-sos");
    assert!(r1.iterations <= r2.iterations);
    assert_nested(&r1);
    assert_eq!(disagreements(&r1.polynomials, &r2.polynomials, 200, 1e-6), 0);
}

#[test]
fn example1_result_is_convex() {
    let p = example1();
    let r = run_algorithm2(&p, &unit_box(&p, None), &SolveOptions::default()).unwrap();
    let c = convexity_check(&r.polynomials, &UNIT.0, &UNIT.1, 10_000, 7);
    assert!(c.convex, "{:?}", c.witness);
    assert_eq!(c.pairs_tested, 10_000);
}

#[test]
fn example2_algorithm2_and_oracle() {
    let p = example2();
    assert_eq!(p.basis.degrees(), &[1, 2]);
    let r = run_algorithm2(&p, &unit_box(&p, None), &SolveOptions::default()).unwrap();
    assert_eq!(r.iterations, 5);
    assert_eq!(r.polynomials.len(), 36);
    assert_nested(&r);
    let rep = verify_by_simulation(&p.system, &p.set, &r.polynomials, &UNIT.0, &UNIT.1, 100, 10, 1e-3).unwrap();
    assert_eq!(rep.violations(), 0);
    assert!(rep.components >= 2, "{rep:?}");
}

#[test]
fn running_example_oracle_on_a_coarse_grid() {
    let p = running_example();
    let r = run_algorithm2(&p, &unit_box(&p, None), &SolveOptions::default()).unwrap();
    let rep = verify_by_simulation(&p.system, &p.set, r.description(), &UNIT.0, &UNIT.1, 60, 10, 1e-3).unwrap();
    assert_eq!(rep.violations(), 0, "{rep:?}");
    assert!(rep.inside_checked > 0 && rep.outside_checked > 0);
}

#[test]
fn zero_horizon_is_vacuous_for_members() {
    let p = running_example();
    // the constraint set itself is not invariant, yet passes with T = 0
    let rep = verify_by_simulation(&p.system, &p.set, p.set.polynomials(), &UNIT.0, &UNIT.1, 30, 0, 1e-3).unwrap();
    assert!(rep.inside_violations.is_empty());
}

#[test]
fn iteration_budget_is_reported_with_the_trace() {
    let p = running_example();
    let opts = SolveOptions {
        max_iter: 3,
        ..Default::default()
    };
    match run_algorithm2(&p, &unit_box(&p, None), &opts) {
        Err(Error::NonConvergence { max_iter, trace }) => {
            assert_eq!(max_iter, 3);
            assert_eq!(trace.len(), 3);
            assert!(trace.iter().all(|t| !t.converged));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn unstable_system_is_refused() {
    let sys = SwitchedSystem::new(vec![DMatrix::from_row_slice(2, 2, &[1.1, 0.0, 0.0, 0.5])]).unwrap();
    let p = build_lifted_problem(&sys, &unit_circle()).unwrap();
    let err = run_algorithm2(&p, &unit_box(&p, None), &SolveOptions::default()).unwrap_err();
    assert!(matches!(err, Error::NotStable { .. }), "{err}");
}

#[test]
fn results_are_deterministic() {
    let p = example1();
    let a = run_algorithm2(&p, &unit_box(&p, None), &SolveOptions::default()).unwrap();
    let b = run_algorithm2(&p, &unit_box(&p, None), &SolveOptions::default()).unwrap();
    assert_eq!(a.fixed_point, b.fixed_point);
    assert_eq!(
        serde_json::to_string(&a.polynomials).unwrap(),
        serde_json::to_string(&b.polynomials).unwrap()
    );
}
