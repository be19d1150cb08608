use psdrank::catalog;
use psdrank::factorization::verify;
use psdrank::geometry::{
    decide_psd_rank_le_2, ellipse_path, factorization_from_ellipse, mvee, slack_matrix, Ellipse, EllipsoidShape,
    PolyhedronH, PolytopeV, SandwichPair,
};
use psdrank::linalg::FactorMatrix;
use psdrank::matgen::{generate, FamilySpec};
use psdrank::{DenseMatrix, NonnegativeMatrix, Tolerance};

fn tol() -> Tolerance {
    Tolerance::default()
}

fn family(spec: FamilySpec) -> NonnegativeMatrix {
    generate(&spec).unwrap().into_nonnegative().unwrap()
}

fn pair(vertices: &[[f64; 2]], facets: &[([f64; 2], f64)]) -> SandwichPair {
    SandwichPair::new(
        PolytopeV::new(2, vertices.iter().map(|v| v.to_vec()).collect()).unwrap(),
        PolyhedronH::new(2, facets.iter().map(|(g, h)| (g.to_vec(), *h)).collect()).unwrap(),
    )
    .unwrap()
}

fn two_squares() -> SandwichPair {
    pair(
        &[[1., 1.], [1., -1.], [-1., -1.], [-1., 1.]],
        &[([0., -1.], 2.), ([-1., 0.], 2.), ([0., 1.], 2.), ([1., 0.], 2.)],
    )
}

fn circle() -> ([[f64; 2]; 2], [f64; 2], f64) {
    ([[0.5, 0.0], [0.0, 0.5]], [0.0, 0.0], -1.0)
}

fn axis_ellipse() -> ([[f64; 2]; 2], [f64; 2], f64) {
    ([[0.25, 0.0], [0.0, 1.0 / 2.25]], [0.0, 0.0], -1.0)
}

fn ellipse(q: ([[f64; 2]; 2], [f64; 2], f64), p: &SandwichPair) -> Ellipse {
    Ellipse::from_quadratic(q.0, q.1, q.2, p).unwrap()
}

/// λ_min / λ_max of a 2×2 factor; zero means rank one.
fn flatness(x: &psdrank::SymMatrix) -> f64 {
    x.min_eigenvalue() / x.max_eigenvalue()
}

#[test]
fn two_squares_pair_reproduces_matrix() {
    let m = catalog::two_squares_circle().matrix;
    assert_eq!(slack_matrix(&two_squares(), tol()).unwrap(), m);
}

#[test]
fn circle_gives_rank_one_rows() {
    let p = two_squares();
    let e = ellipse(circle(), &p);
    assert!(e.check(&p).unwrap().holds(1e-9));
    let m = catalog::two_squares_circle().matrix;
    let f = factorization_from_ellipse(&m, &p, &e, tol()).unwrap();
    assert_eq!(f.size(), 2);
    assert!(verify(&m, &f, Tolerance::new(1e-8).unwrap()).unwrap().pass);
    // every vertex lies on the circle, no facet touches it
    assert!(f.row_factors().iter().all(|a| flatness(a).abs() < 1e-9));
    assert!(f.col_factors().iter().all(|b| flatness(b) > 1e-3));
}

#[test]
fn axis_ellipse_gives_two_rank_one_columns() {
    let p = two_squares();
    let e = ellipse(axis_ellipse(), &p);
    assert!(e.check(&p).unwrap().holds(1e-9));
    let m = catalog::two_squares_ellipse().matrix;
    let f = factorization_from_ellipse(&m, &p, &e, tol()).unwrap();
    assert!(verify(&m, &f, Tolerance::new(1e-8).unwrap()).unwrap().pass);
    let ranks: Vec<bool> = f.col_factors().iter().map(|b| flatness(b).abs() < 1e-9).collect();
    assert_eq!(ranks, [false, true, false, true]);
    assert!(f.row_factors().iter().all(|a| flatness(a) > 1e-3));
}

#[test]
fn steiner_circle_forces_full_rank_interior_factors() {
    let p = pair(
        &[[0.0, 0.5], [0.5, 0.0], [0.5, 0.5], [0.2, 0.2]],
        &[([-1., 0.], 0.), ([0., -1.], 0.), ([1., 1.], 1.), ([-4., -4.], -1.)],
    );
    let e = ellipse(([[4., 2.], [2., 4.]], [-2., -2.], 1.), &p);
    assert!(e.check(&p).unwrap().holds(1e-9));
    let m = catalog::augmented_derangement().matrix;
    let f = factorization_from_ellipse(&m, &p, &e, tol()).unwrap();
    assert!(verify(&m, &f, Tolerance::new(1e-8).unwrap()).unwrap().pass);
    assert!(flatness(&f.row_factors()[3]) > 1e-3);
    assert!(flatness(&f.col_factors()[3]) > 1e-3);
    for i in 0..3 {
        assert!(flatness(&f.row_factors()[i]).abs() < 1e-9);
        assert!(flatness(&f.col_factors()[i]).abs() < 1e-9);
    }
}

#[test]
fn path_between_certificates_stays_valid() {
    let p = two_squares();
    let (e0, e1) = (ellipse(circle(), &p), ellipse(axis_ellipse(), &p));
    for s in 0..=10 {
        let t = f64::from(s) / 10.0;
        let e = ellipse_path(&e0, &e1, t).unwrap();
        assert!(e.check(&p).unwrap().holds(1e-9), "t = {t}");
    }
    let start = ellipse_path(&e0, &e1, 0.0).unwrap();
    assert!((start.theta() - e0.theta()).abs().max() < 1e-15);
    let end = ellipse_path(&e0, &e1, 1.0).unwrap();
    assert!((end.theta() - e1.theta()).abs().max() < 1e-15);
}

#[test]
fn singular_ellipse_is_refused() {
    let p = two_squares();
    let e = Ellipse { a: [[1.0, 0.0], [0.0, 0.0]], b: [0.0, 0.0], c: -1.0, lambda: vec![0.0; 4] };
    let m = catalog::two_squares_circle().matrix;
    assert!(matches!(factorization_from_ellipse(&m, &p, &e, tol()), Err(psdrank::Error::Degenerate(_))));
}

fn decided(m: &NonnegativeMatrix) -> bool {
    let d = decide_psd_rank_le_2(m, tol()).unwrap();
    if let (Some(e), Some(p)) = (&d.ellipse, &d.pair) {
        assert!(e.check(p).unwrap().holds(1e-6));
        if let Ok(f) = factorization_from_ellipse(m, p, e, tol()) {
            let r = verify(m, &f, Tolerance::new(1e-8).unwrap()).unwrap();
            assert!(r.max_residual < 1e-8, "{r:?}");
        }
    }
    d.psd_rank_le_2
}

#[test]
fn circulant_decisions() {
    assert!(decided(&family(FamilySpec::Circulant3 { a: 1.0, b: 4.0, c: 1.0 })));
    assert!(!decided(&family(FamilySpec::Circulant3 { a: 1.0, b: 0.1, c: 0.1 })));
    assert!(decided(&family(FamilySpec::Circulant3 { a: 1.0, b: 1.5, c: 1.2 })));
    assert!(!decided(&family(FamilySpec::Identity { n: 3 })));
}

#[test]
fn nested_rectangle_decisions() {
    assert!(decided(&family(FamilySpec::NestedRectSlack { a: 0.6, b: 0.8 })));
    assert!(decided(&family(FamilySpec::NestedRectSlack { a: 0.3, b: 0.4 })));
    assert!(!decided(&family(FamilySpec::NestedRectSlack { a: 0.9, b: 0.9 })));
}

#[test]
fn rank_shortcuts() {
    let d = decide_psd_rank_le_2(&family(FamilySpec::Identity { n: 4 }), tol()).unwrap();
    assert!(!d.psd_rank_le_2 && d.ellipse.is_none());
    let d = decide_psd_rank_le_2(&NonnegativeMatrix::from_rows(&[&[1., 3.], &[2., 2.]]).unwrap(), tol()).unwrap();
    assert!(d.psd_rank_le_2 && d.rank == 2);
}

#[test]
fn decided_factorization_verifies() {
    for m in [
        family(FamilySpec::Derangement { n: 3 }),
        family(FamilySpec::Circulant3 { a: 1.0, b: 2.0, c: 2.0 }),
        family(FamilySpec::NestedRectSlack { a: 0.5, b: 0.5 }),
    ] {
        let d = decide_psd_rank_le_2(&m, tol()).unwrap();
        let (e, p) = (d.ellipse.unwrap(), d.pair.unwrap());
        let f = factorization_from_ellipse(&m, &p, &e, tol()).unwrap();
        let r = verify(&m, &f, Tolerance::new(1e-8).unwrap()).unwrap();
        assert!(r.pass, "{r:?}");
    }
}

#[test]
fn segments_on_the_axes_need_the_unit_circle() {
    let seg = |x: f64, y: f64| EllipsoidShape::centered(DenseMatrix::from_column_slice(2, 1, &[x, y]));
    let e = mvee(&[seg(1.0, 0.0), seg(0.0, 1.0)], true).unwrap();
    // brute force over axis-aligned x²/a² + y²/b² ≤ 1 containing ±e1, ±e2
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..400 {
        for j in 0..400 {
            let (a, b) = (0.5 + f64::from(i) * 0.005, 0.5 + f64::from(j) * 0.005);
            if a >= 1.0 && b >= 1.0 && a * b < best.0 {
                best = (a * b, a, b);
            }
        }
    }
    let want = DenseMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[best.1, best.2]));
    assert!((&e.shape - want).abs().max() < 1e-5, "{}", e.shape);
    assert!(e.containment.iter().all(|&c| c <= 1.0 + 1e-6));
}
