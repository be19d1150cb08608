use psdrank::catalog;
use psdrank::factorization::{from_nonneg_factorization, verify, PsdFactorization};
use psdrank::linalg::{FactorMatrix, SymMatrix};
use psdrank::quantum::{from_protocol, sample, to_protocol, total_variation, verify_protocol, CorrelationProtocol, Povm};
use psdrank::{DenseMatrix, NonnegativeMatrix, Tolerance};

fn tol() -> Tolerance {
    Tolerance::default()
}

fn normalized(e: &catalog::Entry) -> (NonnegativeMatrix, PsdFactorization) {
    let s = e.matrix.sum();
    let m = e.matrix.scale(1.0 / s).unwrap();
    let f = PsdFactorization::new(
        e.factorization.row_factors().iter().map(|a| a.scale(1.0 / s)).collect(),
        e.factorization.col_factors().to_vec(),
    )
    .unwrap();
    (m, f)
}

fn basis(k: usize, i: usize) -> SymMatrix {
    SymMatrix::from_fn(k, |r, c| if r == i && c == i { 1.0 } else { 0.0 })
}

#[test]
fn derangement_protocol() {
    let (m, f) = normalized(&catalog::derangement3());
    let pr = to_protocol(&f, &m, tol()).unwrap();
    assert!((pr.rho.trace() - 1.0).abs() < 1e-9);
    let r = verify_protocol(&m, &pr, tol()).unwrap();
    assert!(r.pass, "{r:?}");
    assert!(r.max_residual < 1e-9);
    assert_eq!(pr.qubits(), 1.0);
}

#[test]
fn diagonal_factorization_is_classical() {
    let m = NonnegativeMatrix::from_rows(&[&[0.5, 0.0], &[0.0, 0.5]]).unwrap();
    let f = from_nonneg_factorization(&[vec![0.5, 0.0], vec![0.0, 0.5]], &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let pr = to_protocol(&f, &m, tol()).unwrap();
    assert!(verify_protocol(&m, &pr, tol()).unwrap().pass);
    // the measurements commute with the computational basis, so dropping the
    // off-diagonal part of the state (shared randomness) changes nothing
    let mut dephased = pr.clone();
    dephased.rho = SymMatrix::from_fn(4, |r, c| if r == c { pr.rho.get(r, r) } else { 0.0 });
    assert!(pr.alice.elements.iter().chain(&pr.bob.elements).all(|e| e.get(0, 1) == 0.0));
    assert!(verify_protocol(&m, &dephased, tol()).unwrap().pass);
}

#[test]
fn square_slack_protocol_uses_three_levels() {
    let (m, f) = normalized(&catalog::square_slack());
    let pr = to_protocol(&f, &m, tol()).unwrap();
    assert_eq!(pr.k, 3);
    assert!((pr.qubits() - 3f64.log2()).abs() < 1e-15);
    assert!(verify_protocol(&m, &pr, tol()).unwrap().pass);
}

#[test]
fn unnormalized_matrix_is_refused() {
    let e = catalog::derangement3();
    assert!(matches!(to_protocol(&e.factorization, &e.matrix, tol()), Err(psdrank::Error::Domain(_))));
}

#[test]
fn round_trip_over_the_corpus() {
    for e in catalog::real_entries() {
        let (m, f) = normalized(&e);
        let pr = to_protocol(&f, &m, tol()).unwrap();
        assert!(verify_protocol(&m, &pr, Tolerance::new(1e-8).unwrap()).unwrap().pass, "{}", e.name);
        let g = from_protocol(&pr, tol()).unwrap();
        assert!(verify(&m, &g, Tolerance::new(1e-8).unwrap()).unwrap().pass, "{}", e.name);
    }
}

#[test]
fn product_state_gives_outer_product() {
    // σ = diag(0.3, 0.7), τ = diag(0.6, 0.4), deterministic-basis POVMs
    let (s, t) = ([0.3, 0.7], [0.6, 0.4]);
    let rho = SymMatrix::from_fn(4, |r, c| if r == c { s[r / 2] * t[r % 2] } else { 0.0 });
    let pr = CorrelationProtocol {
        k: 2,
        alice: Povm::new(vec![basis(2, 0), basis(2, 1)], tol()).unwrap(),
        bob: Povm::new(vec![basis(2, 0), basis(2, 1)], tol()).unwrap(),
        rho,
    };
    let m = NonnegativeMatrix::new(DenseMatrix::from_fn(2, 2, |i, j| s[i] * t[j])).unwrap();
    assert!(verify_protocol(&m, &pr, tol()).unwrap().pass);
    let f = from_protocol(&pr, tol()).unwrap();
    assert!(verify(&m, &f, tol()).unwrap().pass);
}

#[test]
fn maximally_entangled_state() {
    let k = 3;
    let psi: Vec<f64> = (0..k * k).map(|i| if i / k == i % k { 1.0 } else { 0.0 }).collect();
    let rho = SymMatrix::from_fn(k * k, |r, c| psi[r] * psi[c] / k as f64);
    let povm = Povm::new((0..k).map(|i| basis(k, i)).collect(), tol()).unwrap();
    let pr = CorrelationProtocol { k, alice: povm.clone(), bob: povm, rho };
    let m = NonnegativeMatrix::identity(k).scale(1.0 / k as f64).unwrap();
    assert!(verify_protocol(&m, &pr, tol()).unwrap().pass);
    let f = from_protocol(&pr, tol()).unwrap();
    assert_eq!(f.size(), k);
    assert!(verify(&m, &f, tol()).unwrap().pass);
}

#[test]
fn doubled_povm_fails_completeness() {
    let (m, f) = normalized(&catalog::derangement3());
    let mut pr = to_protocol(&f, &m, tol()).unwrap();
    pr.alice.elements = pr.alice.elements.iter().map(|a| a.scale(2.0)).collect();
    let r = verify_protocol(&m, &pr, tol()).unwrap();
    assert!(!r.pass);
    assert!((r.alice_completeness - 1.0).abs() < 1e-12);
}

#[test]
fn perturbed_state_reports_its_residual() {
    let (m, f) = normalized(&catalog::derangement3());
    let pr = to_protocol(&f, &m, tol()).unwrap();
    let mut bad = pr.clone();
    bad.rho.set(0, 0, bad.rho.get(0, 0) + 1e-3);
    let r = verify_protocol(&m, &bad, tol()).unwrap();
    assert!(!r.pass);
    let expected = (m.as_dense() - bad.probabilities()).abs().max();
    assert!((r.max_residual - expected).abs() < 1e-15);
    assert!(r.max_residual > 1e-4);
}

#[test]
fn sampling_is_seeded_and_converges() {
    let (m, f) = normalized(&catalog::derangement3());
    let pr = to_protocol(&f, &m, tol()).unwrap();
    let n = 200_000;
    let h1 = sample(&pr, n, 7);
    assert_eq!(h1, sample(&pr, n, 7));
    assert_ne!(h1, sample(&pr, n, 8));
    assert_eq!(h1.iter().flatten().sum::<u64>(), n);
    assert!(total_variation(&h1, m.as_dense()) < 0.01);
    for (i, row) in h1.iter().enumerate() {
        assert_eq!(row[i], 0);
    }
}

#[test]
fn point_mass_samples_one_outcome() {
    let m = NonnegativeMatrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
    let f = from_nonneg_factorization(&[vec![1.0, 0.0], vec![0.0, 0.0]], &[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
    let pr = to_protocol(&f, &m, tol()).unwrap();
    let h = sample(&pr, 1000, 3);
    assert_eq!(h, vec![vec![0, 1000], vec![0, 0]]);
}
