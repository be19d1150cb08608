//! JSON file formats for matrices, factorizations, ellipses, protocols,
//! Gram representations and SDP problems.
//!
//! Matrices are `{"rows": r, "cols": c, "data": [[...], ...]}` with entries
//! either numbers or `[re, im]` pairs.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cpsd::SymmetricGram;
use crate::factorization::{HermitianFactorization, PsdFactorization, RealFactorization};
use crate::linalg::{Field, HermMatrix, SymMatrix, Tolerance, C64};
use crate::matgen::NonnegativeMatrix;
use crate::quantum::{CorrelationProtocol, Povm};
use crate::sdp::{LmiBlock, SdpProblem};
use crate::{DenseMatrix, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    fn parts(self) -> (f64, f64) {
        match self {
            Entry::Real(x) => (x, 0.0),
            Entry::Complex([re, im]) => (re, im),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Vec<Entry>>,
}

impl MatrixFile {
    fn check(&self) -> Result<()> {
        if self.data.len() != self.rows || self.data.iter().any(|r| r.len() != self.cols) {
            return Err(Error::Input(format!("data does not have shape {}x{}", self.rows, self.cols)));
        }
        if self.data.iter().flatten().any(|e| {
            let (re, im) = e.parts();
            !re.is_finite() || !im.is_finite()
        }) {
            return Err(Error::Input("matrix has non-finite entries".into()));
        }
        Ok(())
    }

    pub fn is_complex(&self) -> bool {
        self.data.iter().flatten().any(|e| matches!(e, Entry::Complex(_)))
    }

    pub fn to_real(&self) -> Result<DenseMatrix> {
        self.check()?;
        if self.data.iter().flatten().any(|e| e.parts().1 != 0.0) {
            return Err(Error::Input("expected a real matrix".into()));
        }
        Ok(DenseMatrix::from_fn(self.rows, self.cols, |i, j| self.data[i][j].parts().0))
    }

    pub fn to_complex(&self) -> Result<DMatrix<C64>> {
        self.check()?;
        Ok(DMatrix::from_fn(self.rows, self.cols, |i, j| {
            let (re, im) = self.data[i][j].parts();
            C64::new(re, im)
        }))
    }

    pub fn from_real(m: &DenseMatrix) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.row_iter().map(|r| r.iter().map(|&x| Entry::Real(x)).collect()).collect(),
        }
    }

    pub fn from_complex(m: &DMatrix<C64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.row_iter().map(|r| r.iter().map(|z| Entry::Complex([z.re, z.im])).collect()).collect(),
        }
    }
}

pub fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Input(format!("malformed JSON: {e}")))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable")
}

pub fn parse_nonnegative(text: &str) -> Result<NonnegativeMatrix> {
    NonnegativeMatrix::new(parse::<MatrixFile>(text)?.to_real()?)
}

pub fn parse_symmetric(text: &str) -> Result<SymMatrix> {
    let m = parse::<MatrixFile>(text)?.to_real()?;
    if !m.is_square() {
        return Err(Error::Input("expected a square matrix".into()));
    }
    let k = m.nrows();
    SymMatrix::from_row_slice(k, m.transpose().as_slice())
}

pub fn matrix_json(m: &DenseMatrix) -> String {
    to_json(&MatrixFile::from_real(m))
}

#[derive(Clone, Debug, PartialEq)]
pub enum AnyFactorization {
    Real(RealFactorization),
    Hermitian(HermitianFactorization),
}

impl AnyFactorization {
    pub fn size(&self) -> usize {
        match self {
            AnyFactorization::Real(f) => f.size(),
            AnyFactorization::Hermitian(f) => f.size(),
        }
    }
}

/// A k×k matrix as a nested array of rows.
pub type Rows = Vec<Vec<Entry>>;

/// `{"k": k, "field": "real" | "hermitian", "A": [...], "B": [...]}` with every
/// factor a k×k nested array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorizationFile {
    pub k: usize,
    pub field: Field,
    #[serde(rename = "A")]
    pub a: Vec<Rows>,
    #[serde(rename = "B")]
    pub b: Vec<Rows>,
}

fn square_file(rows: &[Vec<Entry>], k: usize) -> Result<MatrixFile> {
    let f = MatrixFile { rows: rows.len(), cols: rows.first().map_or(0, Vec::len), data: rows.to_vec() };
    f.check()?;
    if (f.rows, f.cols) != (k, k) {
        return Err(Error::Dimension(format!("factor is {}x{}, expected {k}x{k}", f.rows, f.cols)));
    }
    Ok(f)
}

fn sym_from_rows(rows: &[Vec<Entry>], k: usize) -> Result<SymMatrix> {
    let d = square_file(rows, k)?.to_real()?;
    SymMatrix::from_row_slice(k, d.transpose().as_slice())
}

fn herm_from_rows(rows: &[Vec<Entry>], k: usize) -> Result<HermMatrix> {
    HermMatrix::from_dense(&square_file(rows, k)?.to_complex()?)
}

fn sym_rows(x: &SymMatrix) -> Rows {
    MatrixFile::from_real(&x.to_dense()).data
}

impl FactorizationFile {
    pub fn from_real(f: &RealFactorization) -> Self {
        let conv = |xs: &[SymMatrix]| xs.iter().map(sym_rows).collect();
        Self { k: f.size(), field: Field::Real, a: conv(f.row_factors()), b: conv(f.col_factors()) }
    }

    pub fn from_hermitian(f: &HermitianFactorization) -> Self {
        let conv = |xs: &[HermMatrix]| xs.iter().map(|x| MatrixFile::from_complex(x.as_dense()).data).collect();
        Self { k: f.size(), field: Field::Hermitian, a: conv(f.row_factors()), b: conv(f.col_factors()) }
    }

    pub fn into_factorization(self) -> Result<AnyFactorization> {
        let k = self.k;
        Ok(match self.field {
            Field::Real => AnyFactorization::Real(PsdFactorization::new(
                self.a.iter().map(|x| sym_from_rows(x, k)).collect::<Result<_>>()?,
                self.b.iter().map(|x| sym_from_rows(x, k)).collect::<Result<_>>()?,
            )?),
            Field::Hermitian => AnyFactorization::Hermitian(PsdFactorization::new(
                self.a.iter().map(|x| herm_from_rows(x, k)).collect::<Result<_>>()?,
                self.b.iter().map(|x| herm_from_rows(x, k)).collect::<Result<_>>()?,
            )?),
        })
    }
}

pub fn parse_factorization(text: &str) -> Result<AnyFactorization> {
    parse::<FactorizationFile>(text)?.into_factorization()
}

pub fn factorization_json(f: &AnyFactorization) -> String {
    match f {
        AnyFactorization::Real(f) => to_json(&FactorizationFile::from_real(f)),
        AnyFactorization::Hermitian(f) => to_json(&FactorizationFile::from_hermitian(f)),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolFile {
    pub k: usize,
    pub alice: Vec<Rows>,
    pub bob: Vec<Rows>,
    pub rho: Rows,
}

impl ProtocolFile {
    pub fn from_protocol(pr: &CorrelationProtocol) -> Self {
        let conv = |xs: &[SymMatrix]| xs.iter().map(sym_rows).collect();
        Self { k: pr.k, alice: conv(&pr.alice.elements), bob: conv(&pr.bob.elements), rho: sym_rows(&pr.rho) }
    }

    /// Only shapes and symmetry are checked; `verify_protocol` judges the rest.
    pub fn into_protocol(self) -> Result<CorrelationProtocol> {
        let k = self.k;
        let conv = |xs: &[Rows]| xs.iter().map(|x| sym_from_rows(x, k)).collect::<Result<Vec<_>>>();
        Ok(CorrelationProtocol {
            k,
            alice: Povm { elements: conv(&self.alice)? },
            bob: Povm { elements: conv(&self.bob)? },
            rho: sym_from_rows(&self.rho, k * k)?,
        })
    }
}

pub fn parse_protocol(text: &str) -> Result<CorrelationProtocol> {
    parse::<ProtocolFile>(text)?.into_protocol()
}

pub fn protocol_json(pr: &CorrelationProtocol) -> String {
    to_json(&ProtocolFile::from_protocol(pr))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramFile {
    pub k: usize,
    pub factors: Vec<Rows>,
}

pub fn parse_gram(text: &str, tol: Tolerance) -> Result<SymmetricGram> {
    let g: GramFile = parse(text)?;
    SymmetricGram::new(g.factors.iter().map(|x| sym_from_rows(x, g.k)).collect::<Result<_>>()?, tol)
}

pub fn gram_json(g: &SymmetricGram) -> String {
    to_json(&GramFile { k: g.k, factors: g.factors.iter().map(sym_rows).collect() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockFile {
    pub f0: Vec<Vec<f64>>,
    /// (variable index, coefficient matrix)
    pub terms: Vec<(usize, Vec<Vec<f64>>)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqualityFile {
    pub a: Vec<f64>,
    pub b: f64,
}

/// minimize cᵀx - Σ log det(blocks in `logdet`) subject to every block ⪰ 0
/// and every equality aᵀx = b.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpFile {
    pub n: usize,
    #[serde(default)]
    pub c: Option<Vec<f64>>,
    pub blocks: Vec<BlockFile>,
    #[serde(default)]
    pub equalities: Vec<EqualityFile>,
    #[serde(default)]
    pub logdet: Vec<usize>,
}

fn nested(rows: &[Vec<f64>]) -> Result<DenseMatrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|x| x.len() != c) {
        return Err(Error::Input("ragged matrix".into()));
    }
    Ok(DenseMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

impl SdpFile {
    pub fn into_problem(self) -> Result<SdpProblem> {
        let mut p = SdpProblem::new(self.n);
        if let Some(c) = self.c {
            p.c = c;
        }
        for b in &self.blocks {
            let mut blk = LmiBlock::new(nested(&b.f0)?);
            for (i, f) in &b.terms {
                blk = blk.term(*i, nested(f)?);
            }
            p.add_block(blk);
        }
        for e in self.equalities {
            p.add_equality(e.a, e.b);
        }
        p.logdet = self.logdet;
        Ok(p)
    }
}

pub fn parse_sdp(text: &str) -> Result<SdpProblem> {
    parse::<SdpFile>(text)?.into_problem()
}
