//! Psd factorizations: representation, verification, constructions and
//! rescalings.

use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::{mvee, EllipsoidShape};
use crate::linalg::{
    numerical_rank, psd_sqrt_and_pinv, psd_violation, svd, DenseMatrix, FactorMatrix, Field, HermMatrix,
    SymMatrix, Tolerance,
};
use crate::matgen::NonnegativeMatrix;
use crate::{Error, Result};

/// M_ij = ⟨A_i, B_j⟩ with k×k psd factors. Psd-ness is not enforced at
/// construction; [`verify`] checks it.
#[derive(Clone, Debug, PartialEq)]
pub struct PsdFactorization<T: FactorMatrix = SymMatrix> {
    k: usize,
    a: Vec<T>,
    b: Vec<T>,
}

pub type RealFactorization = PsdFactorization<SymMatrix>;
pub type HermitianFactorization = PsdFactorization<HermMatrix>;

impl<T: FactorMatrix> PsdFactorization<T> {
    pub fn new(a: Vec<T>, b: Vec<T>) -> Result<Self> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::Input("a factorization needs at least one row and one column factor".into()));
        }
        let k = a[0].dim();
        if let Some(bad) = a.iter().chain(&b).find(|f| f.dim() != k) {
            return Err(Error::Dimension(format!("factor of size {} in a size-{k} factorization", bad.dim())));
        }
        Ok(Self { k, a, b })
    }

    /// The factorization of the 0×0 matrix; neutral for [`direct_sum`].
    pub fn empty() -> Self {
        Self { k: 0, a: Vec::new(), b: Vec::new() }
    }

    /// All-zero factors of size k for a p×q zero matrix.
    pub fn zeros(p: usize, q: usize, k: usize) -> Self {
        Self { k, a: vec![T::zeros(k); p], b: vec![T::zeros(k); q] }
    }

    pub fn size(&self) -> usize {
        self.k
    }

    pub fn field(&self) -> Field {
        T::FIELD
    }

    pub fn rows(&self) -> usize {
        self.a.len()
    }

    pub fn cols(&self) -> usize {
        self.b.len()
    }

    pub fn row_factors(&self) -> &[T] {
        &self.a
    }

    pub fn col_factors(&self) -> &[T] {
        &self.b
    }

    /// The realized matrix [⟨A_i, B_j⟩].
    pub fn product(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.rows(), self.cols(), |i, j| self.a[i].inner(&self.b[j]))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub max_residual: f64,
    pub max_psd_violation: f64,
    /// Largest entry of A_i B_j over the (numerically) zero entries of M.
    pub orthogonality_residual: f64,
    /// Largest imaginary part of trace(A_i B_j); zero for real factors.
    pub max_imaginary: f64,
    pub pass: bool,
}

/// Checks M_ij = ⟨A_i, B_j⟩, psd-ness of every factor, and that A_i B_j
/// vanishes (up to the bound √(λmax(A) λmax(B) ⟨A,B⟩)) wherever M_ij ≈ 0.
#[allow(clippy::needless_range_loop)]
pub fn verify<T: FactorMatrix>(
    m: &NonnegativeMatrix,
    f: &PsdFactorization<T>,
    tol: Tolerance,
) -> Result<VerificationReport> {
    if m.rows() != f.rows() || m.cols() != f.cols() {
        return Err(Error::Dimension(format!(
            "matrix is {}x{} but factorization has {} row and {} column factors",
            m.rows(),
            m.cols(),
            f.rows(),
            f.cols()
        )));
    }
    let eps = tol.eps();
    let scale = m.max_entry().max(1.0);
    let lam_a: Vec<f64> = f.a.iter().map(|x| x.max_eigenvalue().max(0.0)).collect();
    let lam_b: Vec<f64> = f.b.iter().map(|x| x.max_eigenvalue().max(0.0)).collect();
    let max_psd_violation = f.a.iter().chain(&f.b).map(psd_violation).fold(0.0, f64::max);

    struct Row {
        residual: f64,
        imag: f64,
        orth: f64,
        orth_ok: bool,
    }
    let rows: Vec<Row> = (0..f.rows())
        .into_par_iter()
        .map(|i| {
            let mut r = Row { residual: 0.0, imag: 0.0, orth: 0.0, orth_ok: true };
            for j in 0..f.cols() {
                let ip = f.a[i].inner(&f.b[j]);
                r.residual = r.residual.max((m.get(i, j) - ip).abs());
                r.imag = r.imag.max(f.a[i].inner_imag(&f.b[j]).abs());
                if m.get(i, j) <= eps {
                    let prod = f.a[i].product_max_abs(&f.b[j]);
                    let ab = lam_a[i] * lam_b[j];
                    let limit = (ab * ip.max(0.0)).sqrt() + eps * (1.0 + ab);
                    r.orth = r.orth.max(prod);
                    r.orth_ok &= prod <= limit;
                }
            }
            r
        })
        .collect();
    let max_residual = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    let max_imaginary = rows.iter().map(|r| r.imag).fold(0.0, f64::max);
    let orthogonality_residual = rows.iter().map(|r| r.orth).fold(0.0, f64::max);
    let pass = max_residual <= eps * scale
        && max_imaginary <= eps * scale
        && max_psd_violation <= eps
        && rows.iter().all(|r| r.orth_ok);
    Ok(VerificationReport { max_residual, max_psd_violation, orthogonality_residual, max_imaginary, pass })
}

/// Diagonal factors diag(a_i), diag(b_j) of the nonnegative factorization
/// M_ij = ⟨a_i, b_j⟩.
pub fn from_nonneg_factorization(a_vecs: &[Vec<f64>], b_vecs: &[Vec<f64>]) -> Result<RealFactorization> {
    let k = a_vecs.first().map_or(0, Vec::len);
    for v in a_vecs.iter().chain(b_vecs) {
        if v.len() != k {
            return Err(Error::Dimension("factor vectors have different lengths".into()));
        }
        if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Input("nonnegative factor vectors must have finite entries >= 0".into()));
        }
    }
    PsdFactorization::new(
        a_vecs.iter().map(|v| SymMatrix::diag(v)).collect(),
        b_vecs.iter().map(|v| SymMatrix::diag(v)).collect(),
    )
}

/// Rank-one factors a_i a_iᵀ, b_j b_jᵀ from a rank factorization N = UᵀV of a
/// Hadamard square root N; the result factors N∘N with size rank(N).
pub fn from_hadamard_sqrt(n: &DenseMatrix, tol: Tolerance) -> Result<RealFactorization> {
    let r = numerical_rank(n, tol)?;
    let (p, q) = n.shape();
    if p == 0 || q == 0 {
        return Err(Error::Input("empty matrix".into()));
    }
    let dec = svd(n);
    let (u, vt) = (&dec.u, &dec.vt);
    let s: Vec<f64> = dec.s.iter().map(|x| x.sqrt()).collect();
    let a = (0..p)
        .map(|i| SymMatrix::outer(&(0..r).map(|l| u[(i, l)] * s[l]).collect::<Vec<_>>()))
        .collect();
    let b = (0..q)
        .map(|j| SymMatrix::outer(&(0..r).map(|l| vt[(l, j)] * s[l]).collect::<Vec<_>>()))
        .collect();
    PsdFactorization::new(a, b)
}

/// Block-diagonal factorization of diag(M1, M2).
pub fn direct_sum<T: FactorMatrix>(f1: &PsdFactorization<T>, f2: &PsdFactorization<T>) -> PsdFactorization<T> {
    let z1 = T::zeros(f1.k);
    let z2 = T::zeros(f2.k);
    let a = f1.a.iter().map(|x| x.block_diag(&z2)).chain(f2.a.iter().map(|x| z1.block_diag(x))).collect();
    let b = f1.b.iter().map(|x| x.block_diag(&z2)).chain(f2.b.iter().map(|x| z1.block_diag(x))).collect();
    PsdFactorization { k: f1.k + f2.k, a, b }
}

/// Factorization of M1 + M2 with factors A_i ⊕ A'_i and B_j ⊕ B'_j.
pub fn add<T: FactorMatrix>(f1: &PsdFactorization<T>, f2: &PsdFactorization<T>) -> Result<PsdFactorization<T>> {
    if f1.rows() != f2.rows() || f1.cols() != f2.cols() {
        return Err(Error::Dimension(format!(
            "cannot add factorizations of {}x{} and {}x{} matrices",
            f1.rows(),
            f1.cols(),
            f2.rows(),
            f2.cols()
        )));
    }
    let a = f1.a.iter().zip(&f2.a).map(|(x, y)| x.block_diag(y)).collect();
    let b = f1.b.iter().zip(&f2.b).map(|(x, y)| x.block_diag(y)).collect();
    Ok(PsdFactorization { k: f1.k + f2.k, a, b })
}

/// Factorization of M N with the same row factors and C_j = Σ_t N_tj B_t.
pub fn compose_right<T: FactorMatrix>(f: &PsdFactorization<T>, n: &NonnegativeMatrix) -> Result<PsdFactorization<T>> {
    if n.rows() != f.cols() {
        return Err(Error::Dimension(format!(
            "factorization has {} columns but the right factor has {} rows",
            f.cols(),
            n.rows()
        )));
    }
    let b = (0..n.cols())
        .map(|j| {
            (0..n.rows())
                .filter(|&t| n.get(t, j) != 0.0)
                .fold(T::zeros(f.k), |acc, t| acc.add(&f.b[t].scale(n.get(t, j))))
        })
        .collect();
    Ok(PsdFactorization { k: f.k, a: f.a.clone(), b })
}

/// Factorization of M ⊗ N with factors A_i ⊗ A'_s, rows indexed (i, s)
/// lexicographically.
pub fn kron_factorization<T: FactorMatrix>(f1: &PsdFactorization<T>, f2: &PsdFactorization<T>) -> PsdFactorization<T> {
    let pair = |x: &[T], y: &[T]| -> Vec<T> { x.iter().flat_map(|u| y.iter().map(move |v| u.kron(v))).collect() };
    PsdFactorization { k: f1.k * f2.k, a: pair(&f1.a, &f2.a), b: pair(&f1.b, &f2.b) }
}

/// (1/√2) [[Re X, Im X], [-Im X, Re X]]; preserves Re⟨X, Y⟩.
pub fn embed_hermitian(x: &HermMatrix) -> SymMatrix {
    let r = x.realify();
    SymMatrix::from_fn(r.nrows(), |i, j| r[(i, j)] * std::f64::consts::FRAC_1_SQRT_2)
}

pub fn hermitian_embed(f: &HermitianFactorization) -> RealFactorization {
    PsdFactorization {
        k: 2 * f.k,
        a: f.a.iter().map(embed_hermitian).collect(),
        b: f.b.iter().map(embed_hermitian).collect(),
    }
}

fn compress(f: &RealFactorization, v: &DenseMatrix) -> RealFactorization {
    let vt = v.transpose();
    PsdFactorization {
        k: v.ncols(),
        a: f.a.iter().map(|x| x.congruence(&vt)).collect(),
        b: f.b.iter().map(|x| x.congruence(&vt)).collect(),
    }
}

/// Compresses all factors onto range(ΣA_i) and then onto range(ΣB_j). Inner
/// products are unchanged and afterwards both sums are positive definite.
pub fn reduce_to_common_range(f: &RealFactorization, tol: Tolerance) -> RealFactorization {
    let sum = |xs: &[SymMatrix], k: usize| xs.iter().fold(SymMatrix::zeros(k), |acc, x| acc.add(x));
    let mut g = f.clone();
    let va = sum(&g.a, g.k).range_basis(tol);
    if va.ncols() < g.k {
        g = compress(&g, &va);
    }
    let vb = sum(&g.b, g.k).range_basis(tol);
    if vb.ncols() < g.k {
        g = compress(&g, &vb);
    }
    g
}

fn check_shape<T: FactorMatrix>(f: &PsdFactorization<T>, m: &NonnegativeMatrix) -> Result<()> {
    if m.rows() != f.rows() || m.cols() != f.cols() {
        return Err(Error::Dimension(format!(
            "matrix is {}x{} but factorization is for {}x{}",
            m.rows(),
            m.cols(),
            f.rows(),
            f.cols()
        )));
    }
    Ok(())
}

/// Conjugates by S = ΣA_i so that the new row factors sum to the identity and
/// trace(B'_j) = Σ_i M_ij. A singular S is first compressed onto its range,
/// which lowers the size to rank(S).
pub fn rescale_trace(f: &RealFactorization, m: &NonnegativeMatrix, tol: Tolerance) -> Result<RealFactorization> {
    check_shape(f, m)?;
    let s = f.a.iter().fold(SymMatrix::zeros(f.k), |acc, x| acc.add(x));
    let v = s.range_basis(tol);
    if v.ncols() == 0 {
        return Err(Error::Degenerate("all row factors are zero".into()));
    }
    let g = if v.ncols() < f.k { compress(f, &v) } else { f.clone() };
    let s = g.a.iter().fold(SymMatrix::zeros(g.k), |acc, x| acc.add(x));
    let (half, inv_half, _) = psd_sqrt_and_pinv(&s, tol)?;
    let (half, inv_half) = (half.to_dense(), inv_half.to_dense());
    let a = g.a.iter().map(|x| x.congruence(&inv_half)).collect();
    let b = g
        .b
        .iter()
        .enumerate()
        .map(|(j, x)| {
            if (0..m.rows()).all(|i| m.get(i, j) == 0.0) {
                SymMatrix::zeros(g.k)
            } else {
                x.congruence(&half)
            }
        })
        .collect();
    Ok(PsdFactorization { k: g.k, a, b })
}

/// Rescales by L = c T⁻¹ where T maps the unit ball onto the minimum-volume
/// symmetric ellipsoid containing every E(A_i) = A_i^{1/2}(ball); c balances
/// the largest row and column eigenvalues. Afterwards every factor has
/// λ_max ≤ √(k ‖M‖∞). Factors that do not span are reduced first.
pub fn rescale_john(f: &RealFactorization, m: &NonnegativeMatrix, tol: Tolerance) -> Result<RealFactorization> {
    check_shape(f, m)?;
    let g = reduce_to_common_range(f, tol);
    if g.k == 0 {
        return Err(Error::Degenerate("factors span the zero space".into()));
    }
    let shapes: Vec<EllipsoidShape> = g
        .a
        .iter()
        .filter(|x| x.max_abs() > 0.0)
        .map(|x| {
            let (half, _, _) = psd_sqrt_and_pinv(x, tol)?;
            Ok(EllipsoidShape::centered(half.to_dense()))
        })
        .collect::<Result<_>>()?;
    let ell = mvee(&shapes, true)?;
    let t = &ell.shape;
    let t_inv = t
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("enclosing ellipsoid is singular".into()))?;
    let alpha = g.a.iter().map(|x| x.congruence(&t_inv).max_eigenvalue()).fold(0.0, f64::max);
    let beta = g.b.iter().map(|x| x.congruence(t).max_eigenvalue()).fold(0.0, f64::max);
    let c2 = if alpha > 0.0 && beta > 0.0 { (beta / alpha).sqrt() } else { 1.0 };
    let l = &t_inv * c2.sqrt();
    let l_inv_t = t * (1.0 / c2.sqrt());
    Ok(PsdFactorization {
        k: g.k,
        a: g.a.iter().map(|x| x.congruence(&l)).collect(),
        b: g.b.iter().map(|x| x.congruence(&l_inv_t)).collect(),
    })
}

/// Eigen-vectors scaled by √λ, k per factor (zero-padded): rows of the
/// returned pk×k and qk×k matrices are v_{i,s} and w_{j,r}.
pub fn rank1_vectors(f: &RealFactorization) -> (DenseMatrix, DenseMatrix) {
    let k = f.k;
    let stack = |xs: &[SymMatrix]| {
        let mut out = DenseMatrix::zeros(xs.len() * k, k);
        for (i, x) in xs.iter().enumerate() {
            let (vals, vecs) = x.eigen();
            for s in 0..k {
                let w = vals[s].max(0.0).sqrt();
                for c in 0..k {
                    out[(i * k + s, c)] = w * vecs[(c, s)];
                }
            }
        }
        out
    };
    (stack(&f.a), stack(&f.b))
}

/// N_{(i,s),(j,r)} = (v_{i,s}ᵀ w_{j,r})²; block (i, j) of N sums to M_ij and
/// the matrix of inner products is a Hadamard square root of rank ≤ k.
pub fn rank1_expand(f: &RealFactorization) -> DenseMatrix {
    let (v, w) = rank1_vectors(f);
    (v * w.transpose()).map(|x| x * x)
}
