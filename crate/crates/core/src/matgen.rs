//! Named matrix families together with their known rank facts.

use std::f64::consts::PI;

use crate::linalg::{check_finite, DenseMatrix, SymMatrix};
use crate::{Error, Result};

/// A dense matrix whose entries are finite and nonnegative.
#[derive(Clone, Debug, PartialEq)]
pub struct NonnegativeMatrix(DenseMatrix);

impl NonnegativeMatrix {
    pub fn new(m: DenseMatrix) -> Result<Self> {
        check_finite(&m, "matrix")?;
        if let Some(((i, j), v)) = m
            .iter()
            .enumerate()
            .map(|(idx, v)| ((idx % m.nrows(), idx / m.nrows()), *v))
            .find(|(_, v)| *v < 0.0)
        {
            return Err(Error::Input(format!("entry ({i},{j}) = {v} is negative")));
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let p = rows.len();
        let q = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != q) {
            return Err(Error::Dimension("rows have different lengths".into()));
        }
        Self::new(DenseMatrix::from_fn(p, q, |i, j| rows[i][j]))
    }

    /// Clamps entries in `[-slack, 0)` to zero; anything more negative is an error.
    pub fn from_dense_clamped(m: DenseMatrix, slack: f64) -> Result<Self> {
        Self::new(m.map(|x| if x < 0.0 && x >= -slack { 0.0 } else { x }))
    }

    pub fn identity(n: usize) -> Self {
        Self(DenseMatrix::identity(n, n))
    }

    pub fn as_dense(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn into_dense(self) -> DenseMatrix {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn max_entry(&self) -> f64 {
        self.0.iter().cloned().fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.0.sum()
    }

    pub fn scale(&self, s: f64) -> Result<Self> {
        Self::new(&self.0 * s)
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FamilySpec {
    /// Zero diagonal, ones elsewhere.
    Derangement { n: usize },
    /// [[a,b,c],[c,a,b],[b,c,a]]
    Circulant3 { a: f64, b: f64, c: f64 },
    /// Entries (i - j)^2.
    Euclidean { n: usize },
    /// Entries n_i + n_j - 1 for an increasing sequence with every 2 n_i - 1 prime.
    Prime { seq: Vec<u64> },
    /// Slack matrix of the unit square against itself.
    SquareSlack,
    /// Slack matrix of [-a,a]x[-b,b] inside [-1,1]^2.
    NestedRectSlack { a: f64, b: f64 },
    /// 6x6 circulant of (0,1,2,2,1,0).
    HexagonSlack,
    /// [[I, a∘a], [1ᵀ, 0]] for a list of values a.
    Partition { values: Vec<f64> },
    /// Entries cos^2(4π(i-j)/n).
    Cos2 { n: usize },
    /// The 5x5 ±1 Horn form.
    Horn,
    Identity { n: usize },
}

/// Output of [`generate`]: most families are nonnegative matrices, `cos2` and
/// `horn` are symmetric.
#[derive(Clone, Debug, PartialEq)]
pub enum Generated {
    Nonnegative(NonnegativeMatrix),
    Symmetric(SymMatrix),
}

impl Generated {
    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            Generated::Nonnegative(m) => m.as_dense().clone(),
            Generated::Symmetric(s) => s.to_dense(),
        }
    }

    pub fn into_nonnegative(self) -> Result<NonnegativeMatrix> {
        match self {
            Generated::Nonnegative(m) => Ok(m),
            Generated::Symmetric(s) => NonnegativeMatrix::new(s.to_dense()),
        }
    }

    pub fn into_symmetric(self) -> Result<SymMatrix> {
        match self {
            Generated::Symmetric(s) => Ok(s),
            Generated::Nonnegative(m) => {
                let d = m.into_dense();
                if d != d.transpose() {
                    return Err(Error::Input("matrix is not symmetric".into()));
                }
                SymMatrix::from_dense(&d)
            }
        }
    }
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

const HORN: [[f64; 5]; 5] = [
    [1., -1., 1., 1., -1.],
    [-1., 1., -1., 1., 1.],
    [1., -1., 1., -1., 1.],
    [1., 1., -1., 1., -1.],
    [-1., 1., 1., -1., 1.],
];

pub fn horn_form() -> SymMatrix {
    SymMatrix::from_fn(5, |i, j| HORN[i][j])
}

fn square(n: usize, f: impl Fn(usize, usize) -> f64) -> DenseMatrix {
    DenseMatrix::from_fn(n, n, f)
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Input(format!("{name} must lie in [0,1], got {v}")));
    }
    Ok(())
}

fn check_positive(name: &str, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Input(format!("{name} must be at least 1")));
    }
    Ok(())
}

impl FamilySpec {
    pub fn name(&self) -> &'static str {
        match self {
            FamilySpec::Derangement { .. } => "derangement",
            FamilySpec::Circulant3 { .. } => "circulant3",
            FamilySpec::Euclidean { .. } => "euclidean",
            FamilySpec::Prime { .. } => "prime",
            FamilySpec::SquareSlack => "square-slack",
            FamilySpec::NestedRectSlack { .. } => "nested-rect-slack",
            FamilySpec::HexagonSlack => "hexagon-slack",
            FamilySpec::Partition { .. } => "partition",
            FamilySpec::Cos2 { .. } => "cos2",
            FamilySpec::Horn => "horn",
            FamilySpec::Identity { .. } => "identity",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FamilySpec::Derangement { n } | FamilySpec::Euclidean { n } | FamilySpec::Cos2 { n } => {
                check_positive("n", *n)
            }
            FamilySpec::Identity { n } => check_positive("n", *n),
            FamilySpec::Circulant3 { a, b, c } => {
                if [a, b, c].iter().any(|x| !x.is_finite() || **x < 0.0) {
                    return Err(Error::Input("circulant entries must be finite and nonnegative".into()));
                }
                Ok(())
            }
            FamilySpec::Prime { seq } => {
                if seq.is_empty() {
                    return Err(Error::Input("prime family needs a nonempty sequence".into()));
                }
                if seq.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Input("prime family sequence must be strictly increasing".into()));
                }
                if let Some(&n) = seq.iter().find(|&&n| n == 0 || !is_prime(2 * n - 1)) {
                    return Err(Error::Input(format!("2*{n}-1 is not prime")));
                }
                Ok(())
            }
            FamilySpec::NestedRectSlack { a, b } => {
                check_unit("a", *a)?;
                check_unit("b", *b)
            }
            FamilySpec::Partition { values } => {
                if values.is_empty() || values.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return Err(Error::Input("partition values must be a nonempty list of nonnegative numbers".into()));
                }
                Ok(())
            }
            FamilySpec::SquareSlack | FamilySpec::HexagonSlack | FamilySpec::Horn => Ok(()),
        }
    }
}

pub fn generate(spec: &FamilySpec) -> Result<Generated> {
    spec.validate()?;
    let nn = |m: DenseMatrix| NonnegativeMatrix::new(m).map(Generated::Nonnegative);
    match spec {
        FamilySpec::Derangement { n } => nn(square(*n, |i, j| if i == j { 0.0 } else { 1.0 })),
        FamilySpec::Circulant3 { a, b, c } => {
            let v = [*a, *b, *c];
            nn(square(3, |i, j| v[(j + 3 - i) % 3]))
        }
        FamilySpec::Euclidean { n } => nn(square(*n, |i, j| (i as f64 - j as f64).powi(2))),
        FamilySpec::Prime { seq } => {
            nn(square(seq.len(), |i, j| (seq[i] + seq[j]) as f64 - 1.0))
        }
        FamilySpec::SquareSlack => {
            let rows: [[f64; 4]; 4] = [[1., 1., 0., 0.], [0., 1., 1., 0.], [0., 0., 1., 1.], [1., 0., 0., 1.]];
            nn(square(4, |i, j| rows[i][j]))
        }
        FamilySpec::NestedRectSlack { a, b } => {
            let (a, b) = (*a, *b);
            let rows = [
                [1. + a, 1. + b, 1. - a, 1. - b],
                [1. - a, 1. + b, 1. + a, 1. - b],
                [1. - a, 1. - b, 1. + a, 1. + b],
                [1. + a, 1. - b, 1. - a, 1. + b],
            ];
            nn(square(4, |i, j| rows[i][j]))
        }
        FamilySpec::HexagonSlack => {
            let v = [0., 1., 2., 2., 1., 0.];
            nn(square(6, |i, j| v[(j + 6 - i) % 6]))
        }
        FamilySpec::Partition { values } => {
            let n = values.len();
            nn(square(n + 1, |i, j| match (i < n, j < n) {
                (true, true) => f64::from(u8::from(i == j)),
                (true, false) => values[i] * values[i],
                (false, true) => 1.0,
                (false, false) => 0.0,
            }))
        }
        FamilySpec::Cos2 { n } => {
            let n = *n;
            Ok(Generated::Symmetric(SymMatrix::from_fn(n, |i, j| {
                (4.0 * PI * (i as f64 - j as f64) / n as f64).cos().powi(2)
            })))
        }
        FamilySpec::Horn => Ok(Generated::Symmetric(horn_form())),
        FamilySpec::Identity { n } => nn(DenseMatrix::identity(*n, *n)),
    }
}

/// The factor vectors (cos(4πi/n), sin(4πi/n)) behind the cos² family.
pub fn cos2_vectors(n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|i| {
            let t = 4.0 * PI * i as f64 / n as f64;
            [t.cos(), t.sin()]
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KnownFacts {
    pub rank: Option<usize>,
    /// Inclusive bracket on the psd rank; equal ends mean it is known exactly.
    pub psd_rank: Option<(usize, usize)>,
    pub sqrt_rank: Option<usize>,
    pub nonneg_rank: Option<(usize, usize)>,
}

impl KnownFacts {
    pub fn exact_psd_rank(&self) -> Option<usize> {
        self.psd_rank.filter(|(l, u)| l == u).map(|(l, _)| l)
    }
}

/// min { k : n <= C(k+1, 2) }
pub fn derangement_psd_rank(n: usize) -> usize {
    if n <= 1 {
        return 0;
    }
    (1..).find(|k| n <= k * (k + 1) / 2).unwrap()
}

/// Whether the values split into two parts of equal sum.
pub fn partition_satisfiable(values: &[f64]) -> bool {
    let n = values.len();
    assert!(n < 30, "partition check is exhaustive");
    let total: f64 = values.iter().sum();
    (0u64..1 << n).any(|mask| {
        let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| values[i]).sum();
        (2.0 * s - total).abs() <= 1e-9 * (1.0 + total)
    })
}

pub fn known_facts(spec: &FamilySpec) -> Result<KnownFacts> {
    spec.validate()?;
    let exact = |r: usize| Some((r, r));
    let facts = match spec {
        FamilySpec::Derangement { n } => {
            let n = *n;
            let rank = if n >= 2 { n } else { 0 };
            KnownFacts {
                rank: Some(rank),
                psd_rank: exact(derangement_psd_rank(n)),
                sqrt_rank: None,
                nonneg_rank: None,
            }
        }
        FamilySpec::Circulant3 { a, b, c } => {
            let (a, b, c) = (*a, *b, *c);
            let (rank, psd) = if a == 0.0 && b == 0.0 && c == 0.0 {
                (0, 0)
            } else if a == b && b == c {
                (1, 1)
            } else if a * a + b * b + c * c <= 2.0 * (a * b + b * c + a * c) {
                (3, 2)
            } else {
                (3, 3)
            };
            KnownFacts { rank: Some(rank), psd_rank: exact(psd), ..Default::default() }
        }
        FamilySpec::Euclidean { n } => {
            let n = *n;
            let (rank, small) = match n {
                1 => (0, 0),
                2 => (2, 2),
                _ => (3, 2),
            };
            KnownFacts { rank: Some(rank), psd_rank: exact(small), sqrt_rank: Some(small), nonneg_rank: None }
        }
        FamilySpec::Prime { seq } => {
            let k = seq.len();
            let rank = k.min(2);
            KnownFacts { rank: Some(rank), psd_rank: exact(rank), sqrt_rank: Some(k), nonneg_rank: None }
        }
        FamilySpec::SquareSlack => KnownFacts {
            rank: Some(3),
            psd_rank: exact(3),
            sqrt_rank: Some(3),
            nonneg_rank: Some((3, 4)),
        },
        FamilySpec::NestedRectSlack { a, b } => {
            let (a, b) = (*a, *b);
            let rank = 1 + usize::from(a != 0.0) + usize::from(b != 0.0);
            let psd = if a == 0.0 && b == 0.0 {
                1
            } else if a * a + b * b <= 1.0 {
                2
            } else {
                3
            };
            KnownFacts { rank: Some(rank), psd_rank: exact(psd), ..Default::default() }
        }
        FamilySpec::HexagonSlack => KnownFacts { rank: Some(3), psd_rank: exact(4), ..Default::default() },
        FamilySpec::Partition { values } => {
            let n = values.len();
            let sqrt = if partition_satisfiable(values) { n } else { n + 1 };
            let lower = crate::bounds::rank_bound(n + 1);
            KnownFacts { rank: Some(n + 1), psd_rank: Some((lower, sqrt)), sqrt_rank: Some(sqrt), nonneg_rank: None }
        }
        FamilySpec::Cos2 { n } if *n == 5 => KnownFacts {
            rank: Some(3),
            psd_rank: exact(2),
            sqrt_rank: Some(2),
            nonneg_rank: None,
        },
        FamilySpec::Cos2 { .. } => KnownFacts { psd_rank: Some((1, 2)), ..Default::default() },
        FamilySpec::Horn => KnownFacts::default(),
        FamilySpec::Identity { n } => KnownFacts {
            rank: Some(*n),
            psd_rank: exact(*n),
            sqrt_rank: Some(*n),
            nonneg_rank: exact(*n),
        },
    };
    Ok(facts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{numerical_rank, Tolerance};

    fn gen(spec: FamilySpec) -> DenseMatrix {
        generate(&spec).unwrap().to_dense()
    }

    #[test]
    fn derangement_three() {
        let d = gen(FamilySpec::Derangement { n: 3 });
        assert_eq!(d, DenseMatrix::from_row_slice(3, 3, &[0., 1., 1., 1., 0., 1., 1., 1., 0.]));
    }

    #[test]
    fn nested_rect_at_corner_is_permuted_twos() {
        let m = gen(FamilySpec::NestedRectSlack { a: 1.0, b: 1.0 });
        for i in 0..4 {
            let mut row: Vec<f64> = m.row(i).iter().copied().collect();
            row.sort_by(f64::total_cmp);
            assert_eq!(row, vec![0.0, 0.0, 2.0, 2.0]);
        }
    }

    #[test]
    fn partition_matrix() {
        let m = gen(FamilySpec::Partition { values: vec![5.0, 12.0, 13.0] });
        let want = [[1., 0., 0., 25.], [0., 1., 0., 144.], [0., 0., 1., 169.], [1., 1., 1., 0.]];
        assert_eq!(m, DenseMatrix::from_fn(4, 4, |i, j| want[i][j]));
        assert!(!partition_satisfiable(&[5.0, 12.0, 13.0]));
        assert!(partition_satisfiable(&[1.0, 1.0, 2.0]));
    }

    #[test]
    fn hexagon_is_circulant() {
        let m = gen(FamilySpec::HexagonSlack);
        assert_eq!(m.row(0).iter().copied().collect::<Vec<_>>(), vec![0., 1., 2., 2., 1., 0.]);
        assert_eq!(m.row(1).iter().copied().collect::<Vec<_>>(), vec![0., 0., 1., 2., 2., 1.]);
        assert_eq!(numerical_rank(&m, Tolerance::default()).unwrap(), 3);
    }

    #[test]
    fn cos2_entries() {
        let m = gen(FamilySpec::Cos2 { n: 5 });
        for i in 0..5 {
            for j in 0..5 {
                let want = (4.0 * PI * (i as f64 - j as f64) / 5.0).cos().powi(2);
                assert!((m[(i, j)] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn prime_family_rejects_composites() {
        assert!(generate(&FamilySpec::Prime { seq: vec![2, 3, 4] }).is_ok());
        assert!(generate(&FamilySpec::Prime { seq: vec![2, 3, 5] }).is_err());
        assert!(generate(&FamilySpec::Prime { seq: vec![3, 2] }).is_err());
    }

    #[test]
    fn invalid_parameters() {
        assert!(generate(&FamilySpec::NestedRectSlack { a: 1.5, b: 0.5 }).is_err());
        assert!(generate(&FamilySpec::Circulant3 { a: -1.0, b: 0.0, c: 0.0 }).is_err());
        assert!(generate(&FamilySpec::Derangement { n: 0 }).is_err());
    }

    #[test]
    fn facts_examples() {
        let d6 = known_facts(&FamilySpec::Derangement { n: 6 }).unwrap();
        assert_eq!(d6.exact_psd_rank(), Some(3));
        let e8 = known_facts(&FamilySpec::Euclidean { n: 8 }).unwrap();
        assert_eq!((e8.rank, e8.exact_psd_rank(), e8.sqrt_rank), (Some(3), Some(2), Some(2)));
        let i5 = known_facts(&FamilySpec::Identity { n: 5 }).unwrap();
        assert_eq!(i5.exact_psd_rank(), Some(5));
    }

    #[test]
    fn euclidean_rank_three() {
        for n in 3..=20 {
            let m = gen(FamilySpec::Euclidean { n });
            assert_eq!(numerical_rank(&m, Tolerance::default()).unwrap(), 3, "n = {n}");
        }
    }

    #[test]
    fn constant_circulant_has_rank_one() {
        let m = gen(FamilySpec::Circulant3 { a: 2.5, b: 2.5, c: 2.5 });
        assert_eq!(numerical_rank(&m, Tolerance::default()).unwrap(), 1);
    }
}
