use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use psdrank::catalog;
use psdrank::format::{factorization_json, matrix_json, AnyFactorization};
use psdrank::matgen::cos2_vectors;
use serde_json::Value;
use tempfile::TempDir;

fn psdrank(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psdrank"))
        .current_dir(dir)
        .args(args)
        .env_remove("PSDRANK_TOL")
        .env_remove("PSDRANK_SQRT_BUDGET")
        .env_remove("PSDRANK_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn gen(dir: &Path, name: &str, family: &[&str]) {
    let mut args = vec!["gen"];
    args.extend_from_slice(family);
    args.extend_from_slice(&["-o", name]);
    assert_eq!(code(&psdrank(dir, &args)), 0, "gen {family:?}");
}

#[test]
fn rank2_on_boundary_circulant_writes_ellipse() {
    let dir = TempDir::new().unwrap();
    gen(dir.path(), "m.json", &["circulant3", "--a", "1", "--b", "4", "--c", "1"]);
    let out = psdrank(dir.path(), &["rank2", "m.json"]);
    assert_eq!(code(&out), 0);
    let cert: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("ellipse.json")).unwrap()).unwrap();
    assert_eq!(cert["psd_rank_le_2"], true);
    assert!(cert["ellipse"].is_object());

    let out = psdrank(dir.path(), &["extract-fact", "m.json", "ellipse.json", "-o", "f.json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = psdrank(dir.path(), &["verify", "m.json", "f.json"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["pass"], true);
}

#[test]
fn rank2_rejects_identity() {
    let dir = TempDir::new().unwrap();
    gen(dir.path(), "i.json", &["identity", "--n", "3"]);
    assert_eq!(code(&psdrank(dir.path(), &["rank2", "i.json", "-o", "cert.json"])), 1);
    let out = psdrank(dir.path(), &["extract-fact", "i.json", "cert.json"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn verify_derangement_factorization() {
    let dir = TempDir::new().unwrap();
    let e = catalog::derangement3();
    fs::write(dir.path().join("d3.json"), matrix_json(e.matrix.as_dense())).unwrap();
    fs::write(dir.path().join("f.json"), factorization_json(&AnyFactorization::Real(e.factorization.clone()))).unwrap();
    assert_eq!(code(&psdrank(dir.path(), &["verify", "d3.json", "f.json"])), 0);

    let h = catalog::hermitian_derangement4();
    fs::write(dir.path().join("d4.json"), matrix_json(h.matrix.as_dense())).unwrap();
    fs::write(dir.path().join("h.json"), factorization_json(&AnyFactorization::Hermitian(h.factorization))).unwrap();
    assert_eq!(code(&psdrank(dir.path(), &["verify", "d4.json", "h.json"])), 0);
    // right factorization, wrong matrix
    assert_eq!(code(&psdrank(dir.path(), &["verify", "d4.json", "f.json"])), 2);
    gen(dir.path(), "c.json", &["circulant3", "--a", "0", "--b", "1", "--c", "2"]);
    assert_eq!(code(&psdrank(dir.path(), &["verify", "c.json", "f.json"])), 1);
}

#[test]
fn bad_input_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.json"), "{\"rows\": 2, \"cols\": ").unwrap();
    assert_eq!(code(&psdrank(dir.path(), &["bounds", "bad.json"])), 2);
    fs::write(dir.path().join("neg.json"), "{\"rows\": 1, \"cols\": 2, \"data\": [[1, -1]]}").unwrap();
    assert_eq!(code(&psdrank(dir.path(), &["bounds", "neg.json"])), 2);
    assert_eq!(code(&psdrank(dir.path(), &["bounds", "missing.json"])), 2);
    assert_eq!(code(&psdrank(dir.path(), &["frobnicate"])), 2);
    assert_eq!(code(&psdrank(dir.path(), &["gen", "prime", "--seq", "2,5"])), 2);
    assert_eq!(code(&psdrank(dir.path(), &["--help"])), 0);
}

#[test]
fn bounds_are_deterministic() {
    let dir = TempDir::new().unwrap();
    gen(dir.path(), "d.json", &["derangement", "--n", "6"]);
    let a = psdrank(dir.path(), &["bounds", "d.json", "-o", "cert.json"]);
    let b = psdrank(dir.path(), &["bounds", "d.json"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let v = stdout_json(&a);
    assert_eq!((v["lower"].as_u64(), v["upper"].as_u64()), (Some(3), Some(3)));
    assert!(dir.path().join("cert.json").exists());
}

#[test]
fn region_csv_has_one_row_per_grid_point() {
    let dir = TempDir::new().unwrap();
    let out = psdrank(dir.path(), &["region", "circulant", "--grid", "41"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 41 * 41 + 1);
    assert_eq!(lines[0], "b,c,decision");
    assert!(!text.contains('\r'));
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 3));
}

#[test]
fn sqrt_rank_and_budget() {
    let dir = TempDir::new().unwrap();
    gen(dir.path(), "p.json", &["partition", "--values", "5,12,13"]);
    let out = psdrank(dir.path(), &["sqrt-rank", "p.json"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["value"], 4);
    gen(dir.path(), "d.json", &["derangement", "--n", "8"]);
    assert_eq!(code(&psdrank(dir.path(), &["sqrt-rank", "d.json", "--sqrt-budget", "10"])), 2);
    let env = Command::new(env!("CARGO_BIN_EXE_psdrank"))
        .current_dir(dir.path())
        .args(["sqrt-rank", "d.json"])
        .env("PSDRANK_SQRT_BUDGET", "10")
        .output()
        .unwrap();
    assert_eq!(code(&env), 2);
}

#[test]
fn rescale_then_quantum_round_trip() {
    let dir = TempDir::new().unwrap();
    let e = catalog::derangement3();
    let m = e.matrix.scale(1.0 / 6.0).unwrap();
    let f = psdrank::PsdFactorization::new(
        e.factorization.row_factors().iter().map(|a| psdrank::linalg::FactorMatrix::scale(a, 1.0 / 6.0)).collect(),
        e.factorization.col_factors().to_vec(),
    )
    .unwrap();
    fs::write(dir.path().join("m.json"), matrix_json(m.as_dense())).unwrap();
    fs::write(dir.path().join("f.json"), factorization_json(&AnyFactorization::Real(f))).unwrap();
    let d = dir.path();
    assert_eq!(code(&psdrank(d, &["rescale", "m.json", "f.json", "--mode", "john", "-o", "j.json"])), 0);
    assert_eq!(code(&psdrank(d, &["verify", "m.json", "j.json"])), 0);
    assert_eq!(code(&psdrank(d, &["quantum", "to-protocol", "m.json", "j.json", "-o", "p.json"])), 0);
    assert_eq!(code(&psdrank(d, &["quantum", "verify", "m.json", "p.json"])), 0);
    assert_eq!(code(&psdrank(d, &["quantum", "from-protocol", "p.json", "-o", "back.json"])), 0);
    assert_eq!(code(&psdrank(d, &["quantum", "verify", "m.json", "p.json", "--tol", "1e-8"])), 0);
    assert_eq!(code(&psdrank(d, &["verify", "m.json", "back.json", "--tol", "1e-8"])), 0);
    let s1 = psdrank(d, &["quantum", "sample", "p.json", "-n", "20000", "--seed", "5", "--matrix", "m.json"]);
    let s2 = psdrank(d, &["quantum", "sample", "p.json", "-n", "20000", "--seed", "5", "--matrix", "m.json"]);
    assert_eq!(code(&s1), 0);
    assert_eq!(s1.stdout, s2.stdout);
    let v = stdout_json(&s1);
    assert!(v["total_variation"].as_f64().unwrap() < 0.02);
    let total: u64 = v["counts"].as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap()).map(|x| x.as_u64().unwrap()).sum();
    assert_eq!(total, 20000);
}

#[test]
fn cpsd_commands() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    gen(d, "cos2.json", &["cos2", "--n", "5"]);
    let factors: Vec<Vec<Vec<f64>>> =
        cos2_vectors(5).iter().map(|v| vec![vec![v[0] * v[0], v[0] * v[1]], vec![v[1] * v[0], v[1] * v[1]]]).collect();
    fs::write(d.join("g.json"), serde_json::json!({ "k": 2, "factors": factors }).to_string()).unwrap();
    assert_eq!(code(&psdrank(d, &["cpsd", "verify", "cos2.json", "g.json"])), 0);
    let out = psdrank(d, &["cpsd", "horn", "cos2.json"]);
    assert_eq!(code(&out), 0);
    assert!(stdout_json(&out)["horn_value"].as_f64().unwrap() < 0.0);
    assert_eq!(code(&psdrank(d, &["cpsd", "dnn", "cos2.json"])), 0);
    gen(d, "horn.json", &["horn"]);
    assert_eq!(code(&psdrank(d, &["cpsd", "dnn", "horn.json"])), 1);
}

#[test]
fn sdp_solve_reports_feasibility() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    // minimize x subject to [[x, 1], [1, x]] psd: optimum x = 1
    let feasible = serde_json::json!({
        "n": 1, "c": [1.0],
        "blocks": [{ "f0": [[0.0, 1.0], [1.0, 0.0]], "terms": [[0, [[1.0, 0.0], [0.0, 1.0]]]] }]
    });
    fs::write(d.join("ok.json"), feasible.to_string()).unwrap();
    let out = psdrank(d, &["sdp-solve", "ok.json"]);
    assert_eq!(code(&out), 0);
    assert!((stdout_json(&out)["x"][0].as_f64().unwrap() - 1.0).abs() < 1e-6);
    // x >= 1 and -x >= 0
    let infeasible = serde_json::json!({
        "n": 1,
        "blocks": [
            { "f0": [[-1.0]], "terms": [[0, [[1.0]]]] },
            { "f0": [[0.0]], "terms": [[0, [[-1.0]]]] }
        ]
    });
    fs::write(d.join("no.json"), infeasible.to_string()).unwrap();
    assert_eq!(code(&psdrank(d, &["sdp-solve", "no.json"])), 1);
}
