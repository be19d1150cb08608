//! Explicit psd factorizations of well-known matrices, plus the derangement
//! family construction.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::factorization::{HermitianFactorization, PsdFactorization, RealFactorization};
use crate::linalg::{FactorMatrix, HermMatrix, SymMatrix, C64};
use crate::matgen::{derangement_psd_rank, generate, FamilySpec, NonnegativeMatrix};

#[derive(Clone, Debug)]
pub struct Entry<T: FactorMatrix = SymMatrix> {
    pub name: &'static str,
    pub matrix: NonnegativeMatrix,
    pub factorization: PsdFactorization<T>,
}

fn sym2(a: f64, b: f64, c: f64) -> SymMatrix {
    SymMatrix::from_fn(2, |i, j| match (i, j) {
        (0, 0) => a,
        (1, 1) => c,
        _ => b,
    })
}

fn sym(k: usize, rows: &[f64]) -> SymMatrix {
    SymMatrix::from_row_slice(k, rows).expect("catalog matrices are symmetric")
}

fn matrix(rows: &[&[f64]]) -> NonnegativeMatrix {
    NonnegativeMatrix::from_rows(rows).expect("catalog matrices are nonnegative")
}

fn real(name: &'static str, m: NonnegativeMatrix, a: Vec<SymMatrix>, b: Vec<SymMatrix>) -> Entry {
    Entry { name, matrix: m, factorization: PsdFactorization::new(a, b).expect("catalog factors are consistent") }
}

pub fn derangement3() -> Entry {
    real(
        "derangement-3",
        matrix(&[&[0., 1., 1.], &[1., 0., 1.], &[1., 1., 0.]]),
        vec![sym2(1., 0., 0.), sym2(0., 0., 1.), sym2(1., -1., 1.)],
        vec![sym2(0., 0., 1.), sym2(1., 0., 0.), sym2(1., 1., 1.)],
    )
}

/// The 4×4 derangement matrix with Hermitian 2×2 factors; A_4 and B_4 carry
/// the off-diagonal entries ±e^{2iπ/3}.
pub fn hermitian_derangement4() -> Entry<HermMatrix> {
    let w = C64::from_polar(1.0, 2.0 * PI / 3.0);
    let herm = |a: f64, b: C64, c: f64| {
        HermMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 0) => C64::new(a, 0.0),
            (1, 1) => C64::new(c, 0.0),
            _ => b,
        })
    };
    let re = |x: f64| C64::new(x, 0.0);
    let a = vec![herm(1., re(0.), 0.), herm(0., re(0.), 1.), herm(1., re(-1.), 1.), herm(1., w, 1.)];
    let b = vec![herm(0., re(0.), 1.), herm(1., re(0.), 0.), herm(1., re(1.), 1.), herm(1., -w, 1.)];
    let m = generate(&FamilySpec::Derangement { n: 4 }).unwrap().into_nonnegative().unwrap();
    Entry { name: "hermitian-derangement-4", matrix: m, factorization: HermitianFactorization::new(a, b).unwrap() }
}

/// Size-k factorization of D_n for the least k with n ≤ C(k+1,2): rows are
/// e_i e_iᵀ followed by (e_a - e_b)(e_a - e_b)ᵀ for a < b in lexicographic
/// order; the matching column factor has 1 on the diagonal and on the support
/// of its row partner and 1/2 elsewhere (row/column i zeroed for e_i e_iᵀ).
pub fn derangement_family(n: usize) -> RealFactorization {
    assert!(n >= 2, "derangement family needs n >= 2");
    let k = derangement_psd_rank(n);
    let mut supports: Vec<Vec<usize>> = (0..k).map(|i| vec![i]).collect();
    for a in 0..k {
        for b in a + 1..k {
            supports.push(vec![a, b]);
        }
    }
    supports.truncate(n);
    let mut rows = Vec::with_capacity(n);
    let mut cols = Vec::with_capacity(n);
    for s in &supports {
        match s.as_slice() {
            [i] => {
                let i = *i;
                rows.push(SymMatrix::from_fn(k, |r, c| f64::from(u8::from(r == i && c == i))));
                cols.push(SymMatrix::from_fn(k, |r, c| {
                    if r == i || c == i {
                        0.0
                    } else if r == c {
                        1.0
                    } else {
                        0.5
                    }
                }));
            }
            [a, b] => {
                let (a, b) = (*a, *b);
                rows.push(SymMatrix::from_fn(k, |r, c| match (r, c) {
                    _ if (r == a || r == b) && r == c => 1.0,
                    _ if (r == a && c == b) || (r == b && c == a) => -1.0,
                    _ => 0.0,
                }));
                cols.push(SymMatrix::from_fn(k, |r, c| {
                    if r == c || (r == a && c == b) || (r == b && c == a) {
                        1.0
                    } else {
                        0.5
                    }
                }));
            }
            _ => unreachable!(),
        }
    }
    PsdFactorization::new(rows, cols).unwrap()
}

/// The twelve 3×3 factors of D_6 written out entry by entry.
pub fn derangement6() -> Entry {
    let h = 0.5;
    let a = vec![
        sym(3, &[1., 0., 0., 0., 0., 0., 0., 0., 0.]),
        sym(3, &[0., 0., 0., 0., 1., 0., 0., 0., 0.]),
        sym(3, &[0., 0., 0., 0., 0., 0., 0., 0., 1.]),
        sym(3, &[1., -1., 0., -1., 1., 0., 0., 0., 0.]),
        sym(3, &[1., 0., -1., 0., 0., 0., -1., 0., 1.]),
        sym(3, &[0., 0., 0., 0., 1., -1., 0., -1., 1.]),
    ];
    let b = vec![
        sym(3, &[0., 0., 0., 0., 1., h, 0., h, 1.]),
        sym(3, &[1., 0., h, 0., 0., 0., h, 0., 1.]),
        sym(3, &[1., h, 0., h, 1., 0., 0., 0., 0.]),
        sym(3, &[1., 1., h, 1., 1., h, h, h, 1.]),
        sym(3, &[1., h, 1., h, 1., h, 1., h, 1.]),
        sym(3, &[1., h, h, h, 1., 1., h, 1., 1.]),
    ];
    let m = generate(&FamilySpec::Derangement { n: 6 }).unwrap().into_nonnegative().unwrap();
    real("derangement-6", m, a, b)
}

/// Rank-one size-3 factorization u_i u_iᵀ, v_j v_jᵀ of the unit-square slack matrix.
pub fn square_slack() -> Entry {
    let u = [[1., 0., 0.], [0., 1., 0.], [0., 0., 1.], [1., 1., 1.]];
    let v = [[1., 0., 0.], [1., -1., 0.], [0., 1., -1.], [0., 0., 1.]];
    let m = generate(&FamilySpec::SquareSlack).unwrap().into_nonnegative().unwrap();
    real(
        "square-slack",
        m,
        u.iter().map(|x| SymMatrix::outer(x)).collect(),
        v.iter().map(|x| SymMatrix::outer(x)).collect(),
    )
}

fn diff_psd_matrix() -> NonnegativeMatrix {
    matrix(&[&[3., 3., 1., 1.], &[1., 3., 3., 1.], &[1., 1., 3., 3.], &[3., 1., 1., 3.]])
}

/// Factorization of the 4×4 rank-three "two squares" matrix coming from the
/// circle of radius √2.
pub fn two_squares_circle() -> Entry {
    let t = FRAC_1_SQRT_2;
    real(
        "two-squares-circle",
        diff_psd_matrix(),
        vec![sym2(1. + t, t, 1. - t), sym2(1. - t, t, 1. + t), sym2(1. - t, -t, 1. + t), sym2(1. + t, -t, 1. - t)],
        vec![sym2(1. + t, 0., 1. - t), sym2(1., t, 1.), sym2(1. - t, 0., 1. + t), sym2(1., -t, 1.)],
    )
}

/// Same matrix, factorization from the ellipse with axes 4 (horizontal) and 3.
pub fn two_squares_ellipse() -> Entry {
    real(
        "two-squares-ellipse",
        diff_psd_matrix(),
        vec![
            sym2(5. / 3., 0.5, 1. / 3.),
            sym2(1. / 3., 0.5, 5. / 3.),
            sym2(1. / 3., -0.5, 5. / 3.),
            sym2(5. / 3., -0.5, 1. / 3.),
        ],
        vec![sym2(1.75, 0., 0.25), sym2(1., 1., 1.), sym2(0.25, 0., 1.75), sym2(1., -1., 1.)],
    )
}

/// The derangement factorization augmented by one interior vertex and one
/// non-touching facet, whose factors are forced to have full rank.
pub fn augmented_derangement() -> Entry {
    let d = derangement3();
    let mut a = d.factorization.row_factors().to_vec();
    let mut b = d.factorization.col_factors().to_vec();
    a.push(sym2(1., 0.5, 1.));
    b.push(sym2(2., -1., 2.));
    real(
        "augmented-derangement",
        matrix(&[&[0., 1., 1., 2.], &[1., 0., 1., 2.], &[1., 1., 0., 6.], &[1., 1., 3., 3.]]),
        a,
        b,
    )
}

/// Size-3 factorization of the partition matrix for (5, 12, 13).
pub fn partition_5_12_13() -> Entry {
    let e = |i: usize| SymMatrix::from_fn(3, |r, c| f64::from(u8::from(r == i && c == i)));
    let a = vec![
        e(0),
        e(1),
        e(2),
        sym(3, &[1., 0., -5. / 13., 0., 1., -12. / 13., -5. / 13., -12. / 13., 1.]),
    ];
    let b = vec![
        e(0),
        e(1),
        e(2),
        sym(3, &[25., 60., 65., 60., 144., 156., 65., 156., 169.]),
    ];
    let m = generate(&FamilySpec::Partition { values: vec![5., 12., 13.] }).unwrap().into_nonnegative().unwrap();
    real("partition-5-12-13", m, a, b)
}

/// Every real entry above.
pub fn real_entries() -> Vec<Entry> {
    vec![
        derangement3(),
        derangement6(),
        square_slack(),
        two_squares_circle(),
        two_squares_ellipse(),
        augmented_derangement(),
        partition_5_12_13(),
    ]
}
