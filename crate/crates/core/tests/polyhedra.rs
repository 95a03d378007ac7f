use liftinv::polyhedra::*;
use liftinv::polylift::{LiftBasis, LiftedMatrixSet};
use nalgebra::{DMatrix, Matrix3, Vector3};
use proptest::prelude::*;

/// Rows `a_j^T y <= 1` with directions bounded away from zero.
fn rows(dim: usize, count: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-2.0f64..2.0, dim), count)
        .prop_filter("tiny row", |rs| rs.iter().all(|r| r.iter().map(|v| v.abs()).sum::<f64>() > 0.1))
}

fn unit_poly(rs: &[Vec<f64>]) -> HPolyhedron {
    HPolyhedron::from_rows(rs, &vec![1.0; rs.len()]).unwrap()
}

fn cube3() -> Vec<Vec<f64>> {
    (0..3)
        .flat_map(|i| {
            [1.0, -1.0].map(|s| {
                let mut r = vec![0.0; 3];
                r[i] = s;
                r
            })
        })
        .collect()
}

/// Vertices by brute force over all row triples.
fn vertices(p: &HPolyhedron) -> Vec<Vector3<f64>> {
    let m = p.num_rows();
    let mut out = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            for k in j + 1..m {
                let a = Matrix3::from_rows(&[p.a().row(i), p.a().row(j), p.a().row(k)].map(|r| r.fixed_columns::<3>(0).into_owned()));
                let Some(inv) = a.try_inverse() else { continue };
                let v = inv * Vector3::new(p.b()[i], p.b()[j], p.b()[k]);
                let y = nalgebra::DVector::from_column_slice(v.as_slice());
                if p.max_violation(&y) <= 1e-9 {
                    out.push(v);
                }
            }
        }
    }
    out
}

/// Rows supporting a 2-dimensional face of a bounded 3-polytope.
fn facet_count(p: &HPolyhedron) -> usize {
    let vs = vertices(p);
    let mut facets: Vec<Vector3<f64>> = Vec::new();
    for j in 0..p.num_rows() {
        let normal = Vector3::from_iterator(p.a().row(j).iter().copied());
        let on: Vec<&Vector3<f64>> = vs.iter().filter(|v| (normal.dot(v) - p.b()[j]).abs() <= 1e-7).collect();
        let spans_plane = on.iter().any(|a| {
            on.iter().any(|b| on.iter().any(|c| (*b - *a).cross(&(*c - *a)).norm() > 1e-6))
        });
        // parallel duplicates describe one facet
        let unit = normal / normal.norm() / p.b()[j];
        if spans_plane && !facets.iter().any(|f| (f - unit).norm() < 1e-9) {
            facets.push(unit);
        }
    }
    facets.len()
}

fn mutually_contained(p: &HPolyhedron, q: &HPolyhedron) -> bool {
    contains(p, q).unwrap() && contains(q, p).unwrap()
}

fn system(dim: usize) -> impl Strategy<Value = LiftedMatrixSet> {
    prop::collection::vec(prop::collection::vec(-1.2f64..1.2, dim * dim), 1..=3).prop_map(move |ms| {
        let mats: Vec<DMatrix<f64>> = ms.iter().map(|v| DMatrix::from_row_slice(dim, dim, v)).collect();
        LiftedMatrixSet::new(&mats, &LiftBasis::new(dim, [1]).unwrap()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn preimage_distributes_over_intersection(p in rows(3, 2..6), q in rows(3, 2..6), sys in system(3)) {
        let (p, q) = (unit_poly(&p), unit_poly(&q));
        let joint = preimage(&intersect(&p, &q).unwrap(), &sys).unwrap();
        let split = intersect(&preimage(&p, &sys).unwrap(), &preimage(&q, &sys).unwrap()).unwrap();
        prop_assert!(mutually_contained(&joint, &split));
    }

    #[test]
    fn reduction_keeps_the_set(extra in rows(3, 1..10)) {
        let mut rs = cube3();
        rs.extend(extra);
        let p = unit_poly(&rs);
        let (r, kept) = remove_redundancy(&p).unwrap();
        prop_assert_eq!(r.num_rows(), kept.len());
        prop_assert!(kept.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(mutually_contained(&p, &r));
    }

    #[test]
    fn reduced_row_count_matches_vertex_enumeration(extra in rows(3, 2..10)) {
        let mut rs = cube3();
        rs.extend(extra);
        let p = unit_poly(&rs);
        let (r, _) = remove_redundancy(&p).unwrap();
        prop_assert_eq!(r.num_rows(), facet_count(&p));
    }

    #[test]
    fn support_is_the_best_vertex(extra in rows(3, 0..8), c in prop::collection::vec(-1.0f64..1.0, 3)) {
        let mut rs = cube3();
        rs.extend(extra);
        let p = unit_poly(&rs);
        let best = vertices(&p)
            .iter()
            .map(|v| c[0] * v[0] + c[1] * v[1] + c[2] * v[2])
            .fold(f64::NEG_INFINITY, f64::max);
        let lp = support(&p, &c).unwrap().objective().unwrap();
        prop_assert!((lp - best).abs() <= 1e-7);
    }
}

#[test]
fn unbounded_directions_are_reported() {
    // a single halfspace: unbounded along anything but its normal
    let p = unit_poly(&[vec![1.0, 0.0, 1.0]]);
    assert_eq!(support(&p, &[0.0, 1.0, 0.0]).unwrap(), LpOutcome::Unbounded);
    assert_eq!(support(&p, &[1.0, 0.0, 0.0]).unwrap(), LpOutcome::Unbounded);
    // bounded value on an unbounded optimal face
    let p = unit_poly(&[vec![1.0, 0.0, 1.0], vec![0.3777, -0.0203, 1.4789]]);
    let v = support(&p, &[1.0, 0.0, 1.0]).unwrap().objective().unwrap();
    assert!((v - 1.0).abs() <= 1e-9);
}

#[test]
fn nested_sets_under_a_lifted_contraction() {
    // Z_{i+1} = C(Z_i) ∩ Z_0 shrinks for any system
    let basis = LiftBasis::new(2, [2]).unwrap();
    let a = DMatrix::from_row_slice(2, 2, &[1.0216, 0.3234, -0.6597, 0.5226]);
    let sys = LiftedMatrixSet::new(&[a], &basis).unwrap();
    let z0 = unit_poly(&[vec![1.0, 0.0, 1.0]]);
    let mut z = z0.clone();
    for _ in 0..4 {
        let (next, _) = remove_redundancy(&intersect(&preimage(&z, &sys).unwrap(), &z0).unwrap()).unwrap();
        assert!(contains(&z, &next).unwrap());
        z = next;
    }
}
