use nalgebra::SVD;
use psdrank::bounds::{
    barvinok_bound, psd_rank_interval, psd_rank_lower, psd_rank_upper, rank_bound, sqrt_free_bits, sqrt_rank_exact,
    BoundsOptions, Certificate,
};
use psdrank::matgen::{generate, known_facts, FamilySpec};
use psdrank::{DenseMatrix, Error, NonnegativeMatrix, Tolerance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tol() -> Tolerance {
    Tolerance::default()
}

fn family(spec: FamilySpec) -> NonnegativeMatrix {
    generate(&spec).unwrap().into_nonnegative().unwrap()
}

fn rows(r: &[&[f64]]) -> NonnegativeMatrix {
    NonnegativeMatrix::from_rows(r).unwrap()
}

fn svd_rank(m: &DenseMatrix) -> usize {
    let sv = SVD::new(m.clone(), false, false).singular_values;
    let smax = sv.max();
    sv.iter().filter(|&&s| s > 1e-9 * smax * m.nrows().max(m.ncols()) as f64).count()
}

/// Minimum rank over every sign choice of every nonzero entry.
fn brute_sqrt_rank(m: &NonnegativeMatrix) -> usize {
    let d = m.as_dense();
    let nz: Vec<(usize, usize)> =
        (0..d.nrows()).flat_map(|i| (0..d.ncols()).map(move |j| (i, j))).filter(|&(i, j)| d[(i, j)] > 0.0).collect();
    let mut best = usize::MAX;
    for pat in 0u32..1 << nz.len() {
        let mut r = d.map(f64::sqrt);
        for (b, &(i, j)) in nz.iter().enumerate() {
            if pat >> b & 1 == 1 {
                r[(i, j)] = -r[(i, j)];
            }
        }
        best = best.min(svd_rank(&r));
    }
    best
}

#[test]
fn rank_bound_matches_triangular_numbers() {
    for r in 0..60 {
        let k = (0..).find(|k: &usize| r <= k * (k + 1) / 2).unwrap();
        assert_eq!(rank_bound(r), k);
    }
    assert_eq!(rank_bound(10), 4);
    assert_eq!(rank_bound(6), 3);
}

#[test]
fn barvinok_is_a_binomial() {
    // C(t-1+r, t-1) through Pascal's rule
    let mut c = vec![vec![0usize; 40]; 40];
    for n in 0..40 {
        c[n][0] = 1;
        for k in 1..=n {
            c[n][k] = c[n - 1][k - 1] + c[n - 1][k];
        }
    }
    for t in 2..8 {
        for r in 1..10 {
            assert_eq!(barvinok_bound(t, r), c[t - 1 + r][t - 1]);
        }
    }
}

#[test]
fn lower_bound_examples() {
    for n in 1..=10 {
        let (b, cert) = psd_rank_lower(&NonnegativeMatrix::identity(n), tol()).unwrap();
        assert_eq!(b, n);
        if n > 2 {
            assert!(matches!(cert, Certificate::Block { .. }));
        }
    }
    assert_eq!(psd_rank_lower(&family(FamilySpec::Derangement { n: 10 }), tol()).unwrap().0, 4);
    assert_eq!(psd_rank_lower(&rows(&[&[1., 1., 1.], &[1., 1., 1.], &[1., 1., 1.]]), tol()).unwrap().0, 1);
}

#[test]
fn block_triangular_split_is_found() {
    // [[I2, Q], [0, I2]] with Q dense: rank bound 3, blocks give 4
    let m = rows(&[&[1., 0., 1., 1.], &[0., 1., 1., 1.], &[0., 0., 1., 0.], &[0., 0., 0., 1.]]);
    assert_eq!(psd_rank_lower(&m, tol()).unwrap().0, 4);
}

#[test]
fn upper_bound_examples() {
    let opts = BoundsOptions::default();
    assert!(psd_rank_upper(&family(FamilySpec::SquareSlack), &opts).unwrap().0 <= 3);
    assert_eq!(psd_rank_upper(&family(FamilySpec::Derangement { n: 6 }), &opts).unwrap().0, 3);
    let wide = rows(&[&[1., 2., 3., 4., 5., 6., 7.], &[7., 1., 2., 9., 4., 4., 0.5]]);
    assert!(psd_rank_upper(&wide, &opts).unwrap().0 <= 2);
}

#[test]
fn sqrt_rank_examples() {
    let t = tol();
    let small = rows(&[&[1., 0., 1.], &[0., 1., 4.], &[1., 1., 1.]]);
    assert_eq!(sqrt_rank_exact(&small, 20, t).unwrap().value, 2);
    assert_eq!(sqrt_rank_exact(&family(FamilySpec::Partition { values: vec![5., 12., 13.] }), 20, t).unwrap().value, 4);
    assert_eq!(sqrt_rank_exact(&family(FamilySpec::Partition { values: vec![1., 1., 2.] }), 20, t).unwrap().value, 3);
    assert_eq!(sqrt_rank_exact(&family(FamilySpec::Prime { seq: vec![2, 3, 4] }), 20, t).unwrap().value, 3);
    for n in 2..=6 {
        assert_eq!(sqrt_rank_exact(&family(FamilySpec::Euclidean { n }), 20, t).unwrap().value, 2, "n = {n}");
    }
}

#[test]
fn sqrt_rank_witness_squares_back() {
    for m in [
        family(FamilySpec::Partition { values: vec![5., 12., 13.] }),
        family(FamilySpec::Euclidean { n: 5 }),
        family(FamilySpec::NestedRectSlack { a: 0.3, b: 0.5 }),
    ] {
        let r = sqrt_rank_exact(&m, 20, tol()).unwrap();
        assert!((r.witness.component_mul(&r.witness) - m.as_dense()).abs().max() < 1e-12);
        assert_eq!(svd_rank(&r.witness), r.value);
        assert!(r.patterns_searched >= 1);
    }
}

#[test]
fn sqrt_rank_agrees_with_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 25 {
        // small integer entries make rank drops likely
        let d = DenseMatrix::from_fn(4, 4, |_, _| {
            if rng.random_bool(0.3) {
                0.0
            } else {
                f64::from(rng.random_range(1u32..4)).powi(2)
            }
        });
        let m = NonnegativeMatrix::new(d).unwrap();
        let nnz = m.as_dense().iter().filter(|&&x| x > 0.0).count();
        if sqrt_free_bits(&m) > 12 || nnz > 14 || m.max_entry() == 0.0 {
            continue;
        }
        assert_eq!(sqrt_rank_exact(&m, 12, tol()).unwrap().value, brute_sqrt_rank(&m), "{}", m.as_dense());
        checked += 1;
    }
}

#[test]
fn sqrt_budget_is_enforced() {
    let m = family(FamilySpec::Derangement { n: 8 });
    match sqrt_rank_exact(&m, 20, tol()) {
        Err(Error::Budget { required, budget }) => {
            assert_eq!(required, 8 * 7 - 15);
            assert_eq!(budget, 20);
        }
        other => panic!("expected a budget error, got {other:?}"),
    }
}

#[test]
fn sqrt_search_is_deterministic() {
    let m = family(FamilySpec::Euclidean { n: 6 });
    let a = sqrt_rank_exact(&m, 20, tol()).unwrap();
    let b = sqrt_rank_exact(&m, 20, tol()).unwrap();
    assert_eq!(a, b);
}

fn interval(m: &NonnegativeMatrix) -> (usize, usize) {
    let iv = psd_rank_interval(m, &BoundsOptions::default()).unwrap();
    (iv.lower, iv.upper)
}

#[test]
fn interval_examples() {
    assert_eq!(interval(&family(FamilySpec::Circulant3 { a: 1.0, b: 1.0, c: 4.0 })), (2, 2));
    assert_eq!(interval(&family(FamilySpec::Circulant3 { a: 1.0, b: 0.0, c: 0.0 })), (3, 3));
    assert_eq!(interval(&family(FamilySpec::NestedRectSlack { a: 0.9, b: 0.9 })), (3, 3));
    assert_eq!(interval(&family(FamilySpec::Derangement { n: 4 })), (3, 3));
    let zero = NonnegativeMatrix::new(DenseMatrix::zeros(2, 2)).unwrap();
    assert!(psd_rank_interval(&zero, &BoundsOptions::default()).is_err());
}

#[test]
fn known_ranks_lie_inside_the_interval() {
    let specs = vec![
        FamilySpec::Derangement { n: 5 },
        FamilySpec::Circulant3 { a: 1.0, b: 2.0, c: 3.0 },
        FamilySpec::Circulant3 { a: 1.0, b: 0.2, c: 0.3 },
        FamilySpec::Euclidean { n: 5 },
        FamilySpec::Prime { seq: vec![2, 3, 4] },
        FamilySpec::SquareSlack,
        FamilySpec::NestedRectSlack { a: 0.3, b: 0.4 },
        FamilySpec::HexagonSlack,
        FamilySpec::Partition { values: vec![5., 12., 13.] },
        FamilySpec::Identity { n: 4 },
    ];
    for spec in specs {
        let facts = known_facts(&spec).unwrap();
        let (lo, hi) = interval(&family(spec.clone()));
        if let Some((a, b)) = facts.psd_rank {
            assert!(lo <= b && a <= hi, "{spec:?}: interval [{lo}, {hi}] vs known [{a}, {b}]");
        }
    }
}
