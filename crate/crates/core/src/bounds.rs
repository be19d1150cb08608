//! Certified lower and upper bounds on psd rank and exact square-root rank.

use rayon::prelude::*;
use serde::Serialize;

use crate::catalog;
use crate::factorization::{verify, RealFactorization, VerificationReport};
use crate::geometry::{decide_psd_rank_le_2, Ellipse};
use crate::linalg::{numerical_rank, DenseMatrix, Tolerance};
use crate::matgen::NonnegativeMatrix;
use crate::{Error, Result};

/// Smallest k with r ≤ C(k+1, 2): the psd rank of a rank-r matrix is at least this.
pub fn rank_bound(r: usize) -> usize {
    (0..).find(|k| r <= k * (k + 1) / 2).unwrap()
}

/// C(t - 1 + r, t - 1), saturating.
pub fn barvinok_bound(distinct: usize, rank: usize) -> usize {
    if distinct <= 1 {
        return rank.min(1);
    }
    let k = distinct - 1;
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        acc = acc * (rank as u128 + i) / i;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Certificate {
    /// rank(M) ≤ 2 makes the psd rank equal the rank.
    SmallRank { rank: usize },
    RankBound { rank: usize, bound: usize },
    /// Disjoint row/column blocks whose lower bounds add up.
    Block { blocks: Vec<BlockPart>, bound: usize },
    Dimension { rows: usize, cols: usize, bound: usize },
    Barvinok { distinct: usize, rank: usize, bound: usize },
    SqrtRank { value: usize, witness: Vec<Vec<f64>> },
    Ellipse { psd_rank_le_2: bool, ellipse: Option<Ellipse>, margin: Option<f64> },
    Factorization { source: String, size: usize, report: VerificationReport },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlockPart {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub bound: usize,
}

#[derive(Clone, Debug)]
pub struct BoundsOptions {
    pub tol: Tolerance,
    /// Entries closer than this count as the same value for the Barvinok bound.
    pub value_eps: f64,
    /// Largest number of free sign bits the square-root search may enumerate.
    pub sqrt_budget: usize,
    /// Extra upper-bound certificates; each is verified before use.
    pub factorizations: Vec<(String, RealFactorization)>,
    /// Run the ellipse test when rank(M) = 3.
    pub decide_rank_two: bool,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        Self {
            tol: Tolerance::default(),
            value_eps: 1e-9,
            sqrt_budget: 20,
            factorizations: Vec::new(),
            decide_rank_two: true,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RankInterval {
    pub lower: usize,
    pub upper: usize,
    pub rank: usize,
    pub certificates: Vec<Certificate>,
}

fn submatrix(m: &DenseMatrix, rows: &[usize], cols: &[usize]) -> DenseMatrix {
    DenseMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Connected components of the bipartite graph with an edge at every nonzero.
fn components(m: &DenseMatrix) -> Vec<(Vec<usize>, Vec<usize>)> {
    let (p, q) = m.shape();
    let mut seen_r = vec![false; p];
    let mut seen_c = vec![false; q];
    let mut out = Vec::new();
    for start in 0..p {
        if seen_r[start] {
            continue;
        }
        seen_r[start] = true;
        let (mut rows, mut cols) = (vec![start], Vec::new());
        let mut stack = vec![(true, start)];
        while let Some((is_row, v)) = stack.pop() {
            if is_row {
                for j in 0..q {
                    if m[(v, j)] != 0.0 && !seen_c[j] {
                        seen_c[j] = true;
                        cols.push(j);
                        stack.push((false, j));
                    }
                }
            } else {
                for i in 0..p {
                    if m[(i, v)] != 0.0 && !seen_r[i] {
                        seen_r[i] = true;
                        rows.push(i);
                        stack.push((true, i));
                    }
                }
            }
        }
        rows.sort_unstable();
        cols.sort_unstable();
        out.push((rows, cols));
    }
    out
}

fn lower_rec(m: &DenseMatrix, tol: Tolerance, depth: usize) -> Result<(usize, Option<Vec<BlockPart>>)> {
    let (p, q) = m.shape();
    let mut best = (rank_bound(numerical_rank(m, tol)?), None);
    if p == 0 || q == 0 || depth == 0 {
        return Ok(best);
    }
    let comps: Vec<_> = components(m).into_iter().filter(|(_, c)| !c.is_empty()).collect();
    if comps.len() > 1 {
        let mut parts = Vec::new();
        for (rows, cols) in &comps {
            let (b, _) = lower_rec(&submatrix(m, rows, cols), tol, depth - 1)?;
            parts.push(BlockPart { rows: rows.clone(), cols: cols.clone(), bound: b });
        }
        let total = parts.iter().map(|b| b.bound).sum();
        if total > best.0 {
            best = (total, Some(parts));
        }
        return Ok(best);
    }
    // [[M1, *], [0, M2]]: columns C1 where row r vanishes, rows R2 vanishing on C1
    for r in 0..p {
        let c1: Vec<usize> = (0..q).filter(|&j| m[(r, j)] == 0.0).collect();
        if c1.is_empty() || c1.len() == q {
            continue;
        }
        let r2: Vec<usize> = (0..p).filter(|&i| c1.iter().all(|&j| m[(i, j)] == 0.0)).collect();
        let r1: Vec<usize> = (0..p).filter(|i| !r2.contains(i)).collect();
        if r1.is_empty() {
            continue;
        }
        let c2: Vec<usize> = (0..q).filter(|j| !c1.contains(j)).collect();
        let (b1, _) = lower_rec(&submatrix(m, &r1, &c1), tol, depth - 1)?;
        let (b2, _) = lower_rec(&submatrix(m, &r2, &c2), tol, depth - 1)?;
        if b1 + b2 > best.0 {
            best = (
                b1 + b2,
                Some(vec![BlockPart { rows: r1, cols: c1, bound: b1 }, BlockPart { rows: r2, cols: c2, bound: b2 }]),
            );
        }
    }
    Ok(best)
}

/// Max of the rank bound and the block bound over connected components and
/// single block-triangular splits.
pub fn psd_rank_lower(m: &NonnegativeMatrix, tol: Tolerance) -> Result<(usize, Certificate)> {
    let d = m.as_dense();
    let rank = numerical_rank(d, tol)?;
    let rb = rank_bound(rank);
    let (bound, blocks) = lower_rec(d, tol, 2)?;
    Ok(match blocks {
        Some(blocks) if bound > rb => (bound, Certificate::Block { blocks, bound }),
        _ => (rb, Certificate::RankBound { rank, bound: rb }),
    })
}

fn distinct_values(m: &NonnegativeMatrix, eps: f64) -> usize {
    let mut v: Vec<f64> = m.as_dense().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    let mut count = 0;
    let mut last = f64::NEG_INFINITY;
    for x in v {
        if x - last > eps {
            count += 1;
            last = x;
        }
    }
    count
}

/// Known factorizations from the catalog whose matrix equals m exactly.
fn recognized(m: &NonnegativeMatrix) -> Vec<(String, RealFactorization)> {
    let d = m.as_dense();
    let mut out = Vec::new();
    let n = d.nrows();
    let is_derangement =
        n >= 2 && d.is_square() && (0..n).all(|i| (0..n).all(|j| d[(i, j)] == if i == j { 0.0 } else { 1.0 }));
    if is_derangement {
        out.push((format!("derangement family n={n}"), catalog::derangement_family(n)));
    }
    for e in catalog::real_entries() {
        if e.matrix.as_dense() == d {
            out.push((e.name.to_string(), e.factorization));
        }
    }
    out
}

/// Min of min(p, q), the Barvinok bound, the square-root rank (when the search
/// fits the budget) and the sizes of verified factorizations.
pub fn psd_rank_upper(m: &NonnegativeMatrix, opts: &BoundsOptions) -> Result<(usize, Certificate)> {
    let (p, q) = (m.rows(), m.cols());
    let rank = numerical_rank(m.as_dense(), opts.tol)?;
    let mut best = (p.min(q), Certificate::Dimension { rows: p, cols: q, bound: p.min(q) });
    let mut offer = |b: usize, c: Certificate| {
        if b < best.0 {
            best = (b, c);
        }
    };
    let distinct = distinct_values(m, opts.value_eps);
    let bb = barvinok_bound(distinct, rank);
    offer(bb, Certificate::Barvinok { distinct, rank, bound: bb });
    match sqrt_rank_exact(m, opts.sqrt_budget, opts.tol) {
        Ok(s) => {
            let witness = s.witness.row_iter().map(|r| r.iter().copied().collect()).collect();
            offer(s.value, Certificate::SqrtRank { value: s.value, witness });
        }
        Err(Error::Budget { .. }) => {}
        Err(e) => return Err(e),
    }
    for (source, f) in opts.factorizations.iter().cloned().chain(recognized(m)) {
        if f.rows() != p || f.cols() != q {
            continue;
        }
        let report = verify(m, &f, opts.tol)?;
        if report.pass {
            offer(f.size(), Certificate::Factorization { source, size: f.size(), report });
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SqrtRankResult {
    pub value: usize,
    pub witness: DenseMatrix,
    pub patterns_searched: u64,
}

/// Rank by fraction-free elimination; None on overflow.
#[allow(clippy::needless_range_loop)]
fn exact_rank(mut a: Vec<Vec<i128>>) -> Option<usize> {
    let p = a.len();
    let q = if p > 0 { a[0].len() } else { 0 };
    let mut prev: i128 = 1;
    let mut rank = 0;
    for col in 0..q {
        let Some(piv) = (rank..p).find(|&r| a[r][col] != 0) else { continue };
        a.swap(rank, piv);
        let pv = a[rank][col];
        for i in rank + 1..p {
            let f = a[i][col];
            for j in col + 1..q {
                let x = a[i][j].checked_mul(pv)?.checked_sub(f.checked_mul(a[rank][j])?)?;
                a[i][j] = x / prev;
            }
            a[i][col] = 0;
        }
        prev = pv;
        rank += 1;
        if rank == p {
            break;
        }
    }
    Some(rank)
}

struct SignSearch {
    p: usize,
    q: usize,
    root: DenseMatrix,
    /// Entries whose sign is enumerated.
    free: Vec<(usize, usize)>,
    integral: Option<Vec<Vec<i128>>>,
    tol: Tolerance,
}

impl SignSearch {
    fn new(m: &NonnegativeMatrix, tol: Tolerance) -> Self {
        let d = m.as_dense();
        let (p, q) = d.shape();
        let root = d.map(f64::sqrt);
        let integral = (0..p)
            .map(|i| {
                (0..q)
                    .map(|j| {
                        let s = root[(i, j)].round();
                        (s * s == d[(i, j)] && s < 1e15).then_some(s as i128)
                    })
                    .collect::<Option<Vec<i128>>>()
            })
            .collect::<Option<Vec<_>>>();
        // spanning forest edges keep sign +; every other nonzero is free
        let mut parent: Vec<usize> = (0..p + q).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut free = Vec::new();
        for i in 0..p {
            for j in 0..q {
                if d[(i, j)] == 0.0 {
                    continue;
                }
                let (a, b) = (find(&mut parent, i), find(&mut parent, p + j));
                if a == b {
                    free.push((i, j));
                } else {
                    parent[a] = b;
                }
            }
        }
        Self { p, q, root, free, integral, tol }
    }

    fn matrix(&self, pattern: u64) -> DenseMatrix {
        let mut m = self.root.clone();
        for (bit, &(i, j)) in self.free.iter().enumerate() {
            if pattern >> bit & 1 == 1 {
                m[(i, j)] = -m[(i, j)];
            }
        }
        m
    }

    fn rank(&self, pattern: u64) -> usize {
        if let Some(base) = &self.integral {
            let mut a = base.clone();
            for (bit, &(i, j)) in self.free.iter().enumerate() {
                if pattern >> bit & 1 == 1 {
                    a[i][j] = -a[i][j];
                }
            }
            if let Some(r) = exact_rank(a) {
                return r;
            }
        }
        numerical_rank(&self.matrix(pattern), self.tol).unwrap_or(self.p.min(self.q))
    }
}

/// Number of signs the exhaustive square-root search has to enumerate.
pub fn sqrt_free_bits(m: &NonnegativeMatrix) -> usize {
    SignSearch::new(m, Tolerance::default()).free.len()
}

const CHUNK: u64 = 1 << 12;
const BATCH: u64 = 64;

/// Minimum rank over all Hadamard square roots. Signs on a spanning forest of
/// the nonzero pattern are fixed by row/column sign scaling; the rest are
/// enumerated in parallel. The witness is the first minimizing pattern in
/// enumeration order.
pub fn sqrt_rank_exact(m: &NonnegativeMatrix, budget: usize, tol: Tolerance) -> Result<SqrtRankResult> {
    let s = SignSearch::new(m, tol);
    let bits = s.free.len();
    if bits > budget || bits >= 63 {
        return Err(Error::Budget { required: bits, budget });
    }
    let total: u64 = 1 << bits;
    let floor = if m.max_entry() > 0.0 { psd_rank_lower(m, tol)?.0 } else { 0 };
    let mut best: Option<(usize, u64)> = None;
    let mut searched = 0;
    let mut start = 0;
    while start < total {
        let end = (start + CHUNK * BATCH).min(total);
        let chunks: Vec<u64> = (start..end).step_by(CHUNK as usize).collect();
        let found = chunks
            .into_par_iter()
            .map(|c0| {
                let c1 = (c0 + CHUNK).min(end);
                let mut local: Option<(usize, u64)> = None;
                for pat in c0..c1 {
                    let r = s.rank(pat);
                    if local.is_none_or(|(lr, _)| r < lr) {
                        local = Some((r, pat));
                        if r <= floor {
                            break;
                        }
                    }
                }
                local
            })
            .reduce(|| None, |a, b| match (a, b) {
                (Some(x), Some(y)) => Some(x.min(y)),
                (x, None) => x,
                (None, y) => y,
            });
        searched += end - start;
        best = match (best, found) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, None) => x,
            (None, y) => y,
        };
        if best.is_some_and(|(r, _)| r <= floor) {
            break;
        }
        start = end;
    }
    let (value, pat) = best.expect("at least one pattern");
    Ok(SqrtRankResult { value, witness: s.matrix(pat), patterns_searched: searched })
}

/// Lower and upper bounds combined; rank ≤ 2 is exact, and rank 3 is settled
/// between 2 and more by the ellipse test.
pub fn psd_rank_interval(m: &NonnegativeMatrix, opts: &BoundsOptions) -> Result<RankInterval> {
    if m.max_entry() == 0.0 {
        return Err(Error::Input("psd rank interval of the zero matrix".into()));
    }
    let rank = numerical_rank(m.as_dense(), opts.tol)?;
    if rank <= 2 {
        return Ok(RankInterval { lower: rank, upper: rank, rank, certificates: vec![Certificate::SmallRank { rank }] });
    }
    let (mut lower, lc) = psd_rank_lower(m, opts.tol)?;
    let (mut upper, uc) = psd_rank_upper(m, opts)?;
    let mut certificates = vec![lc, uc];
    if rank == 3 && opts.decide_rank_two && lower < upper {
        let d = decide_psd_rank_le_2(m, opts.tol)?;
        if d.psd_rank_le_2 {
            upper = 2;
        } else {
            lower = lower.max(3);
        }
        certificates.push(Certificate::Ellipse { psd_rank_le_2: d.psd_rank_le_2, ellipse: d.ellipse, margin: d.margin });
    }
    if lower > upper {
        return Err(Error::Numerical(format!("inconsistent bounds: lower {lower} exceeds upper {upper}")));
    }
    Ok(RankInterval { lower, upper, rank, certificates })
}
