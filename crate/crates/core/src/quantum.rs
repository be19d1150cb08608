//! Quantum correlation protocols from psd factorizations and back.
//!
//! A protocol has Alice measure a POVM {F_i} and Bob a POVM {G_j} on a
//! shared state ρ over R^k ⊗ R^k; outcome (i, j) has probability
//! trace((F_i ⊗ G_j) ρ). Tensor indices are flattened as s·k + t.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::factorization::{add, reduce_to_common_range, verify, PsdFactorization, RealFactorization};
use crate::linalg::{psd_sqrt_and_pinv, psd_violation, FactorMatrix, SymMatrix, Tolerance};
use crate::matgen::NonnegativeMatrix;
use crate::{DenseMatrix, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    pub elements: Vec<SymMatrix>,
}

impl Povm {
    pub fn new(elements: Vec<SymMatrix>, tol: Tolerance) -> Result<Self> {
        let p = Self { elements };
        let k = p.dim()?;
        if p.completeness_residual(k) > 1e-9 {
            return Err(Error::Domain("POVM elements do not sum to the identity".into()));
        }
        if p.elements.iter().any(|e| psd_violation(e) > tol.eps()) {
            return Err(Error::Domain("POVM element is not psd".into()));
        }
        Ok(p)
    }

    fn dim(&self) -> Result<usize> {
        let k = self.elements.first().ok_or_else(|| Error::Input("empty POVM".into()))?.dim();
        if self.elements.iter().any(|e| e.dim() != k) {
            return Err(Error::Dimension("POVM elements differ in size".into()));
        }
        Ok(k)
    }

    /// max |Σ F_i - I| entrywise.
    pub fn completeness_residual(&self, k: usize) -> f64 {
        let s = self.elements.iter().fold(SymMatrix::zeros(k), |acc, x| acc.add(x));
        (s.to_dense() - DenseMatrix::identity(k, k)).abs().max()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationProtocol {
    pub k: usize,
    pub alice: Povm,
    pub bob: Povm,
    /// k²×k² density matrix.
    pub rho: SymMatrix,
}

impl CorrelationProtocol {
    /// Qubits needed to hold one side of the shared state.
    pub fn qubits(&self) -> f64 {
        (self.k as f64).log2()
    }

    /// trace((F_i ⊗ G_j) ρ) for every pair of outcomes.
    pub fn probabilities(&self) -> DenseMatrix {
        let k = self.k;
        let rho = self.rho.to_dense();
        let q = self.bob.elements.len();
        let bob: Vec<DenseMatrix> = self.bob.elements.iter().map(|g| g.to_dense()).collect();
        let rows: Vec<Vec<f64>> = self
            .alice
            .elements
            .par_iter()
            .map(|f| {
                let f = f.to_dense();
                // partial trace over Alice's factor
                let z = DenseMatrix::from_fn(k, k, |t, u| {
                    let mut acc = 0.0;
                    for s in 0..k {
                        for s2 in 0..k {
                            acc += f[(s, s2)] * rho[(s * k + t, s2 * k + u)];
                        }
                    }
                    acc
                });
                bob.iter().map(|g| z.component_mul(g).sum()).collect()
            })
            .collect();
        DenseMatrix::from_fn(rows.len(), q, |i, j| rows[i][j])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProtocolReport {
    /// max |M_ij - trace((F_i ⊗ G_j) ρ)|
    pub max_residual: f64,
    pub alice_completeness: f64,
    pub bob_completeness: f64,
    pub max_psd_violation: f64,
    pub trace_error: f64,
    pub pass: bool,
}

pub fn verify_protocol(m: &NonnegativeMatrix, pr: &CorrelationProtocol, tol: Tolerance) -> Result<ProtocolReport> {
    let k = pr.k;
    if pr.rho.dim() != k * k || pr.alice.dim()? != k || pr.bob.dim()? != k {
        return Err(Error::Dimension("protocol parts disagree on the local dimension".into()));
    }
    if m.rows() != pr.alice.elements.len() || m.cols() != pr.bob.elements.len() {
        return Err(Error::Dimension(format!(
            "matrix is {}x{} but the protocol has {}x{} outcomes",
            m.rows(),
            m.cols(),
            pr.alice.elements.len(),
            pr.bob.elements.len()
        )));
    }
    let max_residual = (m.as_dense() - pr.probabilities()).abs().max();
    let alice_completeness = pr.alice.completeness_residual(k);
    let bob_completeness = pr.bob.completeness_residual(k);
    let max_psd_violation =
        pr.alice.elements.iter().chain(&pr.bob.elements).chain([&pr.rho]).map(psd_violation).fold(0.0, f64::max);
    let trace_error = (pr.rho.trace() - 1.0).abs();
    let eps = tol.eps();
    let pass = max_residual <= eps
        && alice_completeness <= eps
        && bob_completeness <= eps
        && max_psd_violation <= eps
        && trace_error <= eps;
    Ok(ProtocolReport { max_residual, alice_completeness, bob_completeness, max_psd_violation, trace_error, pass })
}

/// F_i = Σ_A^{-1/2} A_i Σ_A^{-1/2}, G_j likewise, and ρ = ψψᵀ with
/// ψ = (Σ_A^{1/2} ⊗ Σ_B^{1/2}) vec(I). The factors are first compressed so
/// that Σ_A and Σ_B are invertible.
pub fn to_protocol(f: &RealFactorization, m: &NonnegativeMatrix, tol: Tolerance) -> Result<CorrelationProtocol> {
    let total = m.sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("entries sum to {total}; normalize the matrix to total mass 1 first")));
    }
    let report = verify(m, f, tol)?;
    if !report.pass {
        return Err(Error::Input(format!(
            "factorization does not verify (residual {:.3e}, psd violation {:.3e})",
            report.max_residual, report.max_psd_violation
        )));
    }
    let g = reduce_to_common_range(f, tol);
    let k = g.size();
    let sum = |xs: &[SymMatrix]| xs.iter().fold(SymMatrix::zeros(k), |acc, x| acc.add(x));
    let (ha, ia, _) = psd_sqrt_and_pinv(&sum(g.row_factors()), tol)?;
    let (hb, ib, _) = psd_sqrt_and_pinv(&sum(g.col_factors()), tol)?;
    let (ia, ib) = (ia.to_dense(), ib.to_dense());
    let alice = Povm { elements: g.row_factors().iter().map(|a| a.congruence(&ia)).collect() };
    let bob = Povm { elements: g.col_factors().iter().map(|b| b.congruence(&ib)).collect() };
    // (X ⊗ Y) vec(I) has entry (s, t) equal to (X Yᵀ)_{st}
    let xy = ha.to_dense() * hb.to_dense();
    let psi: Vec<f64> = (0..k * k).map(|idx| xy[(idx / k, idx % k)]).collect();
    let rho = SymMatrix::from_fn(k * k, |r, c| psi[r] * psi[c]);
    Ok(CorrelationProtocol { k, alice, bob, rho })
}

/// Writes ρ = Σ_l ψ_l ψ_lᵀ; each term gives A_i = Ψ_lᵀ F_i Ψ_l, B_j = G_j with
/// Ψ_l the k×k reshaping of ψ_l, and the terms are added as direct sums.
pub fn from_protocol(pr: &CorrelationProtocol, tol: Tolerance) -> Result<RealFactorization> {
    let k = pr.k;
    if pr.rho.dim() != k * k || pr.alice.dim()? != k || pr.bob.dim()? != k {
        return Err(Error::Dimension("protocol parts disagree on the local dimension".into()));
    }
    if psd_violation(&pr.rho) > tol.eps() {
        return Err(Error::Domain("state is not psd".into()));
    }
    let (vals, vecs) = pr.rho.eigen();
    let cut = tol.eps() * vals.max().max(0.0);
    let mut out: Option<RealFactorization> = None;
    for l in (0..k * k).filter(|&l| vals[l] > cut) {
        let w = vals[l].sqrt();
        let psi = DenseMatrix::from_fn(k, k, |s, t| vecs[(s * k + t, l)] * w);
        let psi_t = psi.transpose();
        let a = pr.alice.elements.iter().map(|f| f.congruence(&psi_t)).collect();
        let term = PsdFactorization::new(a, pr.bob.elements.clone())?;
        out = Some(match out {
            None => term,
            Some(acc) => add(&acc, &term)?,
        });
    }
    out.ok_or_else(|| Error::Degenerate("state is zero".into()))
}

const SAMPLE_CHUNK: u64 = 1 << 16;

/// Histogram of `count` independent outcomes. Chunk c of the sample stream
/// uses ChaCha8 seeded with `seed` on stream c, so the result depends only on
/// (protocol, count, seed).
pub fn sample(pr: &CorrelationProtocol, count: u64, seed: u64) -> Vec<Vec<u64>> {
    let probs = pr.probabilities();
    let (p, q) = probs.shape();
    let mut cdf = Vec::with_capacity(p * q);
    let mut acc = 0.0;
    for i in 0..p {
        for j in 0..q {
            acc += probs[(i, j)].max(0.0);
            cdf.push(acc);
        }
    }
    let chunks = count.div_ceil(SAMPLE_CHUNK);
    let flat = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let n = SAMPLE_CHUNK.min(count - c * SAMPLE_CHUNK);
            let mut h = vec![0u64; p * q];
            for _ in 0..n {
                let u: f64 = rng.random::<f64>() * acc;
                let idx = cdf.partition_point(|&x| x <= u).min(p * q - 1);
                h[idx] += 1;
            }
            h
        })
        .reduce(
            || vec![0u64; p * q],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    flat.chunks(q.max(1)).map(|r| r.to_vec()).collect()
}

/// Total-variation distance between a histogram and a probability matrix.
pub fn total_variation(hist: &[Vec<u64>], m: &DenseMatrix) -> f64 {
    let n: u64 = hist.iter().flatten().sum();
    let mut tv = 0.0;
    for (i, row) in hist.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            tv += (c as f64 / n as f64 - m[(i, j)]).abs();
        }
    }
    tv / 2.0
}
