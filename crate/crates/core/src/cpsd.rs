//! Completely psd matrices: Gram representations by psd matrices, the Horn
//! certificate against complete positivity, and doubly-nonnegative checks.

use crate::factorization::{verify, PsdFactorization, VerificationReport};
use crate::linalg::{psd_violation, FactorMatrix, SymMatrix, Tolerance};
use crate::matgen::{horn_form, NonnegativeMatrix};
use crate::{Error, Result};

/// Psd matrices A_1..A_n realizing G_ij = ⟨A_i, A_j⟩.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricGram {
    pub k: usize,
    pub factors: Vec<SymMatrix>,
}

impl SymmetricGram {
    pub fn new(factors: Vec<SymMatrix>, tol: Tolerance) -> Result<Self> {
        let k = factors.first().ok_or_else(|| Error::Input("empty Gram representation".into()))?.dim();
        if factors.iter().any(|f| f.dim() != k) {
            return Err(Error::Dimension("Gram factors differ in size".into()));
        }
        if let Some(i) = factors.iter().position(|f| psd_violation(f) > tol.eps()) {
            return Err(Error::Domain(format!("Gram factor {i} is not psd")));
        }
        Ok(Self { k, factors })
    }

    /// Entrywise psd factors diag(v_i) from nonnegative vectors: a completely
    /// positive representation.
    pub fn diagonal(vectors: &[Vec<f64>], tol: Tolerance) -> Result<Self> {
        if vectors.iter().flatten().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::Input("completely positive vectors must be nonnegative".into()));
        }
        Self::new(vectors.iter().map(|v| SymMatrix::diag(v)).collect(), tol)
    }

    pub fn gram(&self) -> SymMatrix {
        SymMatrix::from_fn(self.factors.len(), |i, j| self.factors[i].inner(&self.factors[j]))
    }
}

pub fn verify_cpsd(m: &SymMatrix, g: &SymmetricGram, tol: Tolerance) -> Result<VerificationReport> {
    let n = m.dim();
    if g.factors.len() != n {
        return Err(Error::Dimension(format!("matrix is {n}x{n} but the Gram has {} factors", g.factors.len())));
    }
    let dense = m.to_dense();
    match NonnegativeMatrix::new(dense.clone()) {
        Ok(nn) => verify(&nn, &PsdFactorization::new(g.factors.clone(), g.factors.clone())?, tol),
        Err(_) => {
            // a negative entry already rules out membership
            let max_residual = (dense - g.gram().to_dense()).abs().max();
            let max_psd_violation = g.factors.iter().map(psd_violation).fold(0.0, f64::max);
            Ok(VerificationReport {
                max_residual,
                max_psd_violation,
                orthogonality_residual: 0.0,
                max_imaginary: 0.0,
                pass: false,
            })
        }
    }
}

/// ⟨H, M⟩ for the Horn form H; a negative value shows M is not completely positive.
pub fn horn_certificate(m: &SymMatrix) -> Result<f64> {
    if m.dim() != 5 {
        return Err(Error::Dimension(format!("the Horn form is 5x5, matrix is {0}x{0}", m.dim())));
    }
    Ok(horn_form().inner(m))
}

/// Entrywise ≥ -tol and psd up to tolerance.
pub fn dnn_check(m: &SymMatrix, tol: Tolerance) -> bool {
    let d = m.to_dense();
    d.iter().all(|&x| x >= -tol.eps()) && m.min_eigenvalue() >= -tol.psd_threshold(m.max_abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matgen::{cos2_vectors, generate, FamilySpec};

    fn cos2() -> (SymMatrix, SymmetricGram) {
        let m = generate(&FamilySpec::Cos2 { n: 5 }).unwrap().into_symmetric().unwrap();
        let factors = cos2_vectors(5).iter().map(|v| SymMatrix::outer(v)).collect();
        (m, SymmetricGram::new(factors, Tolerance::default()).unwrap())
    }

    #[test]
    fn cos2_gram_verifies() {
        let (m, g) = cos2();
        assert!(verify_cpsd(&m, &g, Tolerance::default()).unwrap().pass);
    }

    #[test]
    fn perturbed_entry_fails_by_its_size() {
        let (mut m, g) = cos2();
        m.set(0, 1, m.get(0, 1) + 0.1);
        let r = verify_cpsd(&m, &g, Tolerance::default()).unwrap();
        assert!(!r.pass);
        assert!((r.max_residual - 0.1).abs() < 1e-12);
    }

    #[test]
    fn diagonal_matrix_with_scalar_factors() {
        let d = [1.0f64, 2.5, 4.0];
        let factors = (0..3)
            .map(|i| SymMatrix::from_fn(3, |r, c| if r == i && c == i { d[i].sqrt() } else { 0.0 }))
            .collect();
        let g = SymmetricGram::new(factors, Tolerance::default()).unwrap();
        assert!(verify_cpsd(&SymMatrix::diag(&d), &g, Tolerance::default()).unwrap().pass);
    }

    #[test]
    fn horn_values() {
        let (m, _) = cos2();
        let want = 5.0 - 5.0 * 5f64.sqrt() / 2.0;
        assert!((horn_certificate(&m).unwrap() - want).abs() < 1e-12);
        let ones = SymMatrix::from_fn(5, |_, _| 1.0);
        assert_eq!(horn_certificate(&ones).unwrap(), 5.0);
        assert_eq!(horn_certificate(&SymMatrix::zeros(5)).unwrap(), 0.0);
        assert!(horn_certificate(&SymMatrix::zeros(4)).is_err());
    }

    #[test]
    fn dnn_examples() {
        let (m, _) = cos2();
        let tol = Tolerance::default();
        assert!(dnn_check(&m, tol));
        assert!(!dnn_check(&horn_form(), tol));
        assert!(dnn_check(&SymMatrix::identity(5), tol));
    }
}
