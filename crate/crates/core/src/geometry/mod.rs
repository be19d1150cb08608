//! Slack matrices, polytope pairs realizing a matrix, the ellipse test for
//! psd rank at most two, and minimum-volume enclosing ellipsoids.

mod ellipse;
mod mvee;

pub use ellipse::{
    circulant_region, decide_psd_rank_le_2, ellipse_path, factorization_from_ellipse, nested_rect_region,
    Ellipse, EllipseCheck, RankTwoDecision, RegionPoint,
};
pub use mvee::{mvee, EllipsoidShape, Mvee};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::linalg::{numerical_rank, svd, DenseMatrix, Tolerance};
use crate::matgen::NonnegativeMatrix;
use crate::{Error, Result};

/// conv(x_1, ..., x_v)
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolytopeV {
    pub dim: usize,
    pub vertices: Vec<Vec<f64>>,
}

impl PolytopeV {
    pub fn new(dim: usize, vertices: Vec<Vec<f64>>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::Input("polytope needs at least one vertex".into()));
        }
        if vertices.iter().any(|v| v.len() != dim || v.iter().any(|x| !x.is_finite())) {
            return Err(Error::Input(format!("vertices must be finite points of dimension {dim}")));
        }
        Ok(Self { dim, vertices })
    }
}

/// { x : a_jᵀ x ≤ b_j for all j }
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyhedronH {
    pub dim: usize,
    pub inequalities: Vec<(Vec<f64>, f64)>,
}

impl PolyhedronH {
    pub fn new(dim: usize, inequalities: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if inequalities.is_empty() {
            return Err(Error::Input("polyhedron needs at least one inequality".into()));
        }
        if inequalities.iter().any(|(a, b)| a.len() != dim || !b.is_finite() || a.iter().any(|x| !x.is_finite())) {
            return Err(Error::Input(format!("inequalities must be finite and of dimension {dim}")));
        }
        Ok(Self { dim, inequalities })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichPair {
    pub inner: PolytopeV,
    pub outer: PolyhedronH,
}

impl SandwichPair {
    pub fn new(inner: PolytopeV, outer: PolyhedronH) -> Result<Self> {
        if inner.dim != outer.dim {
            return Err(Error::Dimension(format!("inner polytope in R^{} but outer in R^{}", inner.dim, outer.dim)));
        }
        let pair = Self { inner, outer };
        slack_matrix(&pair, Tolerance::default())?;
        Ok(pair)
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }
}

fn raw_slack(pair: &SandwichPair) -> DenseMatrix {
    let v = &pair.inner.vertices;
    let q = &pair.outer.inequalities;
    DenseMatrix::from_fn(v.len(), q.len(), |i, j| {
        let (a, b) = &q[j];
        b - a.iter().zip(&v[i]).map(|(x, y)| x * y).sum::<f64>()
    })
}

/// Slacks b_j - a_jᵀ x_i, with entries within tolerance of zero set to zero.
pub fn slack_matrix(pair: &SandwichPair, tol: Tolerance) -> Result<NonnegativeMatrix> {
    if pair.inner.dim != pair.outer.dim {
        return Err(Error::Dimension("inner and outer dimensions differ".into()));
    }
    let mut s = raw_slack(pair);
    for i in 0..s.nrows() {
        for j in 0..s.ncols() {
            let (a, b) = &pair.outer.inequalities[j];
            let ax: f64 = a.iter().zip(&pair.inner.vertices[i]).map(|(x, y)| x * y).sum();
            let cut = tol.eps() * (1.0 + b.abs() + ax.abs());
            if s[(i, j)] < -cut {
                return Err(Error::Domain(format!(
                    "vertex {i} violates inequality {j} by {:.3e}; the polytopes are not nested",
                    -s[(i, j)]
                )));
            }
            if s[(i, j)].abs() <= cut {
                s[(i, j)] = 0.0;
            }
        }
    }
    NonnegativeMatrix::new(s)
}

/// Row-normalizes M (so M1 = 1) and writes the result as the slack matrix of
/// a polytope P inside a bounded polytope Q in R^{r-1}, r = rank(M).
pub fn polytopes_from_matrix(m: &NonnegativeMatrix, tol: Tolerance) -> Result<SandwichPair> {
    let (p, q) = (m.rows(), m.cols());
    let d = m.as_dense();
    let sums: Vec<f64> = (0..p).map(|i| d.row(i).sum()).collect();
    if let Some(i) = sums.iter().position(|&s| s <= 0.0) {
        return Err(Error::Input(format!("row {i} is zero")));
    }
    let mn = DenseMatrix::from_fn(p, q, |i, j| d[(i, j)] / sums[i]);
    let r = numerical_rank(&mn, tol)?;
    let dec = svd(&mn);
    let u = DenseMatrix::from_fn(p, r, |i, l| dec.u[(i, l)] * dec.s[l]);
    let v = dec.vt.rows(0, r).into_owned();

    // R with R z = 1 for z = V 1: a scaled Householder reflection
    let z: DVector<f64> = v.column_sum();
    let zn = z.norm();
    let ones = DVector::from_element(r, 1.0 / (r as f64).sqrt());
    let w = &z / zn - &ones;
    let h = if w.norm() < 1e-14 {
        DenseMatrix::identity(r, r)
    } else {
        DenseMatrix::identity(r, r) - (&w * w.transpose()) * (2.0 / w.norm_squared())
    };
    let scale = (r as f64).sqrt() / zn;
    let a = &u * &h * (1.0 / scale);
    let b = &h * &v * scale;

    let dim = r - 1;
    let vertices = (0..p).map(|i| (0..dim).map(|l| a[(i, l)]).collect()).collect();
    let inequalities = (0..q)
        .map(|j| {
            let g = (0..dim).map(|l| -(b[(l, j)] - b[(dim, j)])).collect();
            (g, b[(dim, j)])
        })
        .collect();
    Ok(SandwichPair { inner: PolytopeV::new(dim, vertices)?, outer: PolyhedronH::new(dim, inequalities)? })
}
