//! Dense real and complex matrix kernel.
//!
//! Generic matrices are plain `nalgebra` matrices. Symmetric matrices are
//! stored packed so that `(i, j)` and `(j, i)` are the same slot; Hermitian
//! matrices keep the full complex array but are built from one triangle.

use std::fmt;

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;
pub type C64 = Complex<f64>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    eps: f64,
}

impl Tolerance {
    pub const DEFAULT_EPS: f64 = 1e-9;

    pub fn new(eps: f64) -> Result<Self> {
        if eps.is_finite() && eps > 0.0 {
            Ok(Self { eps })
        } else {
            Err(Error::Input(format!("tolerance must be positive and finite, got {eps}")))
        }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Eigenvalue cutoff used by the psd test and the pseudo-inverse.
    pub fn psd_threshold(&self, max_abs: f64) -> f64 {
        self.eps * (1.0 + max_abs)
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { eps: Self::DEFAULT_EPS }
    }
}

pub fn check_finite(m: &DenseMatrix, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Input(format!("{what} has non-finite entries")))
    }
}

pub fn max_abs(m: &DenseMatrix) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Thin singular value decomposition `m = u * diag(s) * vt` with `s` descending.
/// Columns of `u` belonging to zero singular values may be zero.
#[derive(Clone, Debug)]
pub struct ThinSvd {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub vt: DenseMatrix,
}

impl ThinSvd {
    pub fn recompose(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for (l, s) in self.s.iter().enumerate() {
            us.column_mut(l).scale_mut(*s);
        }
        us * &self.vt
    }
}

/// SVD that checks the reconstruction. nalgebra's bidiagonal iteration
/// occasionally returns vectors that are off by ~1e-4 on rank-deficient
/// input; those cases are redone with one-sided Jacobi.
pub fn svd(m: &DenseMatrix) -> ThinSvd {
    let dec = SVD::new(m.clone(), true, true);
    let out = ThinSvd {
        u: dec.u.expect("u requested"),
        s: dec.singular_values.iter().copied().collect(),
        vt: dec.v_t.expect("v_t requested"),
    };
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    if max_abs(&(out.recompose() - m)) <= 1e-12 * scale * (m.nrows().max(m.ncols()) as f64) {
        out
    } else {
        jacobi_svd(m)
    }
}

fn jacobi_svd(m: &DenseMatrix) -> ThinSvd {
    if m.nrows() < m.ncols() {
        let t = jacobi_svd(&m.transpose());
        return ThinSvd { u: t.vt.transpose(), s: t.s, vt: t.u.transpose() };
    }
    let q = m.ncols();
    let mut a = m.clone();
    let mut v = DenseMatrix::identity(q, q);
    for _ in 0..100 {
        let mut rotated = false;
        for i in 0..q {
            for j in i + 1..q {
                let alpha = a.column(i).norm_squared();
                let beta = a.column(j).norm_squared();
                let gamma = a.column(i).dot(&a.column(j));
                if gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for r in 0..mat.nrows() {
                        let (x, y) = (mat[(r, i)], mat[(r, j)]);
                        mat[(r, i)] = c * x - s * y;
                        mat[(r, j)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..q).map(|l| a.column(l).norm()).collect();
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let mut u = DenseMatrix::zeros(m.nrows(), q);
    let mut vt = DenseMatrix::zeros(q, q);
    for (c, &l) in order.iter().enumerate() {
        if norms[l] > 0.0 {
            u.set_column(c, &(a.column(l) / norms[l]));
        }
        vt.set_row(c, &v.column(l).transpose());
    }
    ThinSvd { u, s: order.iter().map(|&l| norms[l]).collect(), vt }
}

/// Number of singular values above `eps * max(rows, cols) * sigma_max`.
pub fn numerical_rank(m: &DenseMatrix, tol: Tolerance) -> Result<usize> {
    check_finite(m, "matrix")?;
    if m.is_empty() {
        return Ok(0);
    }
    let sv = svd(m).s;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(0);
    }
    let cut = tol.eps() * (m.nrows().max(m.ncols()) as f64) * smax;
    Ok(sv.iter().filter(|&&s| s > cut).count())
}

pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    a.kronecker(b)
}

pub fn hadamard(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "hadamard product of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.component_mul(b))
}

/// Eigenvalues and eigenvectors of a real symmetric dense matrix, ascending.
pub fn sym_eigen(m: &DenseMatrix) -> (DVector<f64>, DenseMatrix) {
    let eig = SymmetricEigen::new(m.clone());
    let k = m.nrows();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = DVector::from_iterator(k, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = DenseMatrix::zeros(k, k);
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Hermitian,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Real => f.write_str("real"),
            Field::Hermitian => f.write_str("hermitian"),
        }
    }
}

/// Operations shared by real symmetric and complex Hermitian factors.
pub trait FactorMatrix: Clone + fmt::Debug + PartialEq + Send + Sync + 'static {
    const FIELD: Field;

    fn dim(&self) -> usize;
    fn zeros(k: usize) -> Self;
    fn identity(k: usize) -> Self;
    /// Real part of trace(self * other).
    fn inner(&self, other: &Self) -> f64;
    /// Imaginary part of trace(self * other); zero for real matrices.
    fn inner_imag(&self, other: &Self) -> f64;
    /// Ascending eigenvalues.
    fn eigenvalues(&self) -> Vec<f64>;
    fn max_abs(&self) -> f64;
    fn trace(&self) -> f64;
    fn scale(&self, s: f64) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn block_diag(&self, other: &Self) -> Self;
    fn kron(&self, other: &Self) -> Self;
    /// Largest entry modulus of the product self * other.
    fn product_max_abs(&self, other: &Self) -> f64;

    fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues().last().copied().unwrap_or(0.0)
    }
}

/// True iff the smallest eigenvalue is at least `-eps * (1 + max|entry|)`.
pub fn is_psd<T: FactorMatrix>(s: &T, tol: Tolerance) -> bool {
    s.dim() == 0 || s.min_eigenvalue() >= -tol.psd_threshold(s.max_abs())
}

/// Relative amount by which `s` fails the psd test; zero when it passes.
pub fn psd_violation<T: FactorMatrix>(s: &T) -> f64 {
    if s.dim() == 0 {
        return 0.0;
    }
    (-s.min_eigenvalue()).max(0.0) / (1.0 + s.max_abs())
}

#[inline]
fn packed_index(i: usize, j: usize) -> usize {
    let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
    hi * (hi + 1) / 2 + lo
}

#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    k: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn from_fn(k: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(k * (k + 1) / 2);
        for i in 0..k {
            for j in 0..=i {
                data.push(f(i, j));
            }
        }
        Self { k, data }
    }

    /// Symmetrizes `(m + mᵀ) / 2`.
    pub fn from_dense(m: &DenseMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        check_finite(m, "symmetric matrix")?;
        Ok(Self::from_fn(m.nrows(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)])))
    }

    /// Builds from row-major data, requiring exact symmetry.
    pub fn from_row_slice(k: usize, data: &[f64]) -> Result<Self> {
        if data.len() != k * k {
            return Err(Error::Dimension(format!("expected {} entries, got {}", k * k, data.len())));
        }
        for i in 0..k {
            for j in 0..i {
                if data[i * k + j] != data[j * k + i] {
                    return Err(Error::Input(format!("entries ({i},{j}) and ({j},{i}) differ")));
                }
            }
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("symmetric matrix has non-finite entries".into()));
        }
        Ok(Self::from_fn(k, |i, j| data[i * k + j]))
    }

    pub fn diag(d: &[f64]) -> Self {
        Self::from_fn(d.len(), |i, j| if i == j { d[i] } else { 0.0 })
    }

    /// v vᵀ
    pub fn outer(v: &[f64]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[packed_index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[packed_index(i, j)] = v;
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.k, self.k, |i, j| self.get(i, j))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// L S Lᵀ for a (possibly rectangular) L.
    pub fn congruence(&self, l: &DenseMatrix) -> Self {
        let d = l * self.to_dense() * l.transpose();
        Self::from_fn(d.nrows(), |i, j| 0.5 * (d[(i, j)] + d[(j, i)]))
    }

    pub fn eigen(&self) -> (DVector<f64>, DenseMatrix) {
        sym_eigen(&self.to_dense())
    }

    /// Orthonormal basis (as columns) of the eigenvectors whose eigenvalue
    /// exceeds the psd threshold.
    pub fn range_basis(&self, tol: Tolerance) -> DenseMatrix {
        let (vals, vecs) = self.eigen();
        let cut = tol.psd_threshold(self.max_abs());
        let cols: Vec<usize> = (0..self.k).filter(|&i| vals[i] > cut).collect();
        DenseMatrix::from_fn(self.k, cols.len(), |r, c| vecs[(r, cols[c])])
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMatrix{:?}", (0..self.k).map(|i| (0..self.k).map(|j| self.get(i, j)).collect::<Vec<_>>()).collect::<Vec<_>>())
    }
}

impl FactorMatrix for SymMatrix {
    const FIELD: Field = Field::Real;

    fn dim(&self) -> usize {
        self.k
    }

    fn zeros(k: usize) -> Self {
        Self { k, data: vec![0.0; k * (k + 1) / 2] }
    }

    fn identity(k: usize) -> Self {
        Self::from_fn(k, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    fn inner(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.k, other.k);
        let mut s = 0.0;
        for i in 0..self.k {
            for j in 0..=i {
                let p = self.get(i, j) * other.get(i, j);
                s += if i == j { p } else { 2.0 * p };
            }
        }
        s
    }

    fn inner_imag(&self, _other: &Self) -> f64 {
        0.0
    }

    fn eigenvalues(&self) -> Vec<f64> {
        if self.k == 0 {
            return Vec::new();
        }
        let mut v: Vec<f64> = SymmetricEigen::new(self.to_dense()).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    fn trace(&self) -> f64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    fn scale(&self, s: f64) -> Self {
        Self { k: self.k, data: self.data.iter().map(|x| x * s).collect() }
    }

    fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.k, other.k);
        Self { k: self.k, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() }
    }

    fn block_diag(&self, other: &Self) -> Self {
        let k1 = self.k;
        Self::from_fn(k1 + other.k, |i, j| {
            if i < k1 && j < k1 {
                self.get(i, j)
            } else if i >= k1 && j >= k1 {
                other.get(i - k1, j - k1)
            } else {
                0.0
            }
        })
    }

    fn kron(&self, other: &Self) -> Self {
        let m = other.k;
        Self::from_fn(self.k * m, |i, j| self.get(i / m, j / m) * other.get(i % m, j % m))
    }

    fn product_max_abs(&self, other: &Self) -> f64 {
        max_abs(&(self.to_dense() * other.to_dense()))
    }
}

/// (X11, ..., Xkk, √2 X12, √2 X13, ..., √2 X23, ...)
pub fn vecm(s: &SymMatrix) -> DVector<f64> {
    let k = s.dim();
    let mut v = Vec::with_capacity(k * (k + 1) / 2);
    v.extend((0..k).map(|i| s.get(i, i)));
    for i in 0..k {
        for j in i + 1..k {
            v.push(std::f64::consts::SQRT_2 * s.get(i, j));
        }
    }
    DVector::from_vec(v)
}

/// Inverse of [`vecm`] for a vector of length k(k+1)/2.
pub fn vecm_inv(v: &DVector<f64>) -> Result<SymMatrix> {
    let n = v.len();
    let k = ((((8 * n + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    if k * (k + 1) / 2 != n {
        return Err(Error::Dimension(format!("length {n} is not a triangular number")));
    }
    let mut s = SymMatrix::zeros(k);
    for i in 0..k {
        s.set(i, i, v[i]);
    }
    let mut idx = k;
    for i in 0..k {
        for j in i + 1..k {
            s.set(i, j, v[idx] / std::f64::consts::SQRT_2);
            idx += 1;
        }
    }
    Ok(s)
}

/// Returns (S^{1/2}, S^{-1/2}, S^+), inverting only eigenvalues above the
/// psd threshold; the inverse square root is taken on the range of S.
pub fn psd_sqrt_and_pinv(s: &SymMatrix, tol: Tolerance) -> Result<(SymMatrix, SymMatrix, SymMatrix)> {
    if !is_psd(s, tol) {
        return Err(Error::Domain(format!(
            "matrix is not psd (minimum eigenvalue {:.3e})",
            s.min_eigenvalue()
        )));
    }
    let (vals, vecs) = s.eigen();
    let cut = tol.psd_threshold(s.max_abs());
    let k = s.dim();
    let spectral = |f: &dyn Fn(f64) -> f64| {
        SymMatrix::from_fn(k, |i, j| (0..k).map(|l| f(vals[l]) * vecs[(i, l)] * vecs[(j, l)]).sum())
    };
    let sqrt = spectral(&|x| x.max(0.0).sqrt());
    let inv_sqrt = spectral(&|x| if x > cut { 1.0 / x.sqrt() } else { 0.0 });
    let pinv = spectral(&|x| if x > cut { 1.0 / x } else { 0.0 });
    Ok((sqrt, inv_sqrt, pinv))
}

#[derive(Clone, PartialEq)]
pub struct HermMatrix {
    m: DMatrix<C64>,
}

impl HermMatrix {
    /// Builds from the upper triangle given by `f(i, j)` with `i <= j`;
    /// diagonal imaginary parts are dropped.
    pub fn from_fn(k: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = DMatrix::from_element(k, k, C64::new(0.0, 0.0));
        for i in 0..k {
            m[(i, i)] = C64::new(f(i, i).re, 0.0);
            for j in i + 1..k {
                let z = f(i, j);
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        Self { m }
    }

    /// Hermitian part (m + m^H) / 2.
    pub fn from_dense(m: &DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension("hermitian matrix must be square".into()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Input("hermitian matrix has non-finite entries".into()));
        }
        Ok(Self::from_fn(m.nrows(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5))
    }

    pub fn from_real(s: &SymMatrix) -> Self {
        Self::from_fn(s.dim(), |i, j| C64::new(s.get(i, j), 0.0))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    pub fn as_dense(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn re(&self) -> DenseMatrix {
        self.m.map(|z| z.re)
    }

    pub fn im(&self) -> DenseMatrix {
        self.m.map(|z| z.im)
    }

    /// The 2k×2k real matrix [[Re, Im], [-Im, Re]] without scaling; its
    /// spectrum is that of the Hermitian matrix with every value doubled.
    pub fn realify(&self) -> DenseMatrix {
        let k = self.dim();
        DenseMatrix::from_fn(2 * k, 2 * k, |i, j| {
            let z = self.m[(i % k, j % k)];
            match (i < k, j < k) {
                (true, true) | (false, false) => z.re,
                (true, false) => z.im,
                (false, true) => -z.im,
            }
        })
    }
}

impl fmt::Debug for HermMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HermMatrix{}", self.m)
    }
}

impl FactorMatrix for HermMatrix {
    const FIELD: Field = Field::Hermitian;

    fn dim(&self) -> usize {
        self.m.nrows()
    }

    fn zeros(k: usize) -> Self {
        Self { m: DMatrix::from_element(k, k, C64::new(0.0, 0.0)) }
    }

    fn identity(k: usize) -> Self {
        Self { m: DMatrix::identity(k, k) }
    }

    fn inner(&self, other: &Self) -> f64 {
        self.m.iter().zip(other.m.iter()).map(|(a, b)| a.re * b.re + a.im * b.im).sum()
    }

    fn inner_imag(&self, other: &Self) -> f64 {
        self.m.iter().zip(other.m.iter()).map(|(a, b)| a.im * b.re - a.re * b.im).sum()
    }

    fn eigenvalues(&self) -> Vec<f64> {
        let (vals, _) = sym_eigen(&self.realify());
        vals.iter().step_by(2).copied().collect()
    }

    fn max_abs(&self) -> f64 {
        self.m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.m[(i, i)].re).sum()
    }

    fn scale(&self, s: f64) -> Self {
        Self { m: self.m.map(|z| z * s) }
    }

    fn add(&self, other: &Self) -> Self {
        Self { m: &self.m + &other.m }
    }

    fn block_diag(&self, other: &Self) -> Self {
        let k1 = self.dim();
        let k = k1 + other.dim();
        let mut m = DMatrix::from_element(k, k, C64::new(0.0, 0.0));
        m.view_mut((0, 0), (k1, k1)).copy_from(&self.m);
        m.view_mut((k1, k1), (other.dim(), other.dim())).copy_from(&other.m);
        Self { m }
    }

    fn kron(&self, other: &Self) -> Self {
        Self { m: self.m.kronecker(&other.m) }
    }

    fn product_max_abs(&self, other: &Self) -> f64 {
        (&self.m * &other.m).iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }
}
