use nalgebra::{DVector, Matrix2, Matrix3, Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{polytopes_from_matrix, slack_matrix, SandwichPair};
use crate::factorization::{PsdFactorization, RealFactorization};
use crate::linalg::{numerical_rank, vecm_inv, DenseMatrix, SymMatrix, Tolerance};
use crate::matgen::{generate, FamilySpec, NonnegativeMatrix};
use crate::sdp::{solve, LmiBlock, SdpParams, SdpProblem, SdpStatus};
use crate::{Error, Result};

/// The region {x : xᵀAx + 2bᵀx + c ≤ 0} with trace(A) = 1, plus one S-lemma
/// multiplier per facet: Θ - λ_j G_j ⪰ 0 where Θ = [[A, b], [bᵀ, c]] and
/// G_j = [[0, g_j/2], [g_jᵀ/2, -h_j]] encodes g_jᵀx ≤ h_j.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
    pub c: f64,
    pub lambda: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EllipseCheck {
    pub trace_error: f64,
    pub a_min_eigenvalue: f64,
    /// max_i q(x_i); nonpositive when every vertex lies in the ellipse.
    pub max_vertex_value: f64,
    /// min_j λ_min(Θ - λ_j G_j).
    pub min_facet_eigenvalue: f64,
    pub min_lambda: f64,
}

impl EllipseCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.trace_error <= tol
            && self.a_min_eigenvalue >= -tol
            && self.max_vertex_value <= tol
            && self.min_facet_eigenvalue >= -tol
            && self.min_lambda >= -tol
    }
}

fn facet_form(g: &[f64], h: f64) -> Matrix3<f64> {
    Matrix3::new(0.0, 0.0, g[0] / 2.0, 0.0, 0.0, g[1] / 2.0, g[0] / 2.0, g[1] / 2.0, -h)
}

fn min_eig3(m: &Matrix3<f64>) -> f64 {
    m.symmetric_eigenvalues().min()
}

fn is_trivial_facet(g: &[f64]) -> bool {
    g.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-12
}

fn require_planar(pair: &SandwichPair) -> Result<()> {
    if pair.dim() != 2 {
        return Err(Error::Dimension(format!("ellipse certificates live in the plane, pair is in R^{}", pair.dim())));
    }
    Ok(())
}

impl Ellipse {
    pub fn theta(&self) -> Matrix3<f64> {
        let [[a11, a12], [_, a22]] = self.a;
        let [b1, b2] = self.b;
        Matrix3::new(a11, a12, b1, a12, a22, b2, b1, b2, self.c)
    }

    fn from_theta(t: &Matrix3<f64>, lambda: Vec<f64>) -> Self {
        let s = |i: usize, j: usize| (t[(i, j)] + t[(j, i)]) / 2.0;
        Self { a: [[s(0, 0), s(0, 1)], [s(0, 1), s(1, 1)]], b: [s(0, 2), s(1, 2)], c: s(2, 2), lambda }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let u = Vector3::new(x[0], x[1], 1.0);
        u.dot(&(self.theta() * u))
    }

    /// Normalizes xᵀAx + 2bᵀx + c to trace(A) = 1 and fits the best
    /// multiplier for every facet of `pair`.
    pub fn from_quadratic(a: [[f64; 2]; 2], b: [f64; 2], c: f64, pair: &SandwichPair) -> Result<Self> {
        require_planar(pair)?;
        if (a[0][1] - a[1][0]).abs() > 1e-12 * (1.0 + a[0][1].abs()) {
            return Err(Error::Input("quadratic part must be symmetric".into()));
        }
        let tr = a[0][0] + a[1][1];
        if tr.is_nan() || tr <= 0.0 || !tr.is_finite() || !b.iter().chain([&c]).all(|x| x.is_finite()) {
            return Err(Error::Input("quadratic part must have positive finite trace".into()));
        }
        let mut e = Self {
            a: [[a[0][0] / tr, a[0][1] / tr], [a[0][1] / tr, a[1][1] / tr]],
            b: [b[0] / tr, b[1] / tr],
            c: c / tr,
            lambda: Vec::new(),
        };
        let theta = e.theta();
        e.lambda = pair
            .outer
            .inequalities
            .iter()
            .map(|(g, h)| if is_trivial_facet(g) { 0.0 } else { best_multiplier(&theta, &facet_form(g, *h)) })
            .collect();
        Ok(e)
    }

    pub fn check(&self, pair: &SandwichPair) -> Result<EllipseCheck> {
        require_planar(pair)?;
        if self.lambda.len() != pair.outer.inequalities.len() {
            return Err(Error::Dimension(format!(
                "{} multipliers for {} facets",
                self.lambda.len(),
                pair.outer.inequalities.len()
            )));
        }
        let theta = self.theta();
        let a = Matrix2::new(self.a[0][0], self.a[0][1], self.a[1][0], self.a[1][1]);
        let max_vertex_value = pair.inner.vertices.iter().map(|x| self.value(x)).fold(f64::NEG_INFINITY, f64::max);
        let min_facet_eigenvalue = pair
            .outer
            .inequalities
            .iter()
            .zip(&self.lambda)
            .map(|((g, h), &l)| {
                if is_trivial_facet(g) {
                    // 0 ≤ h holds everywhere
                    h.min(0.0)
                } else {
                    min_eig3(&(theta - facet_form(g, *h) * l))
                }
            })
            .fold(f64::INFINITY, f64::min);
        Ok(EllipseCheck {
            trace_error: (a.trace() - 1.0).abs(),
            a_min_eigenvalue: a.symmetric_eigenvalues().min(),
            max_vertex_value,
            min_facet_eigenvalue,
            min_lambda: self.lambda.iter().cloned().fold(f64::INFINITY, f64::min),
        })
    }
}

/// argmax over λ ≥ 0 of λ_min(Θ - λG), a concave function of λ.
fn best_multiplier(theta: &Matrix3<f64>, g: &Matrix3<f64>) -> f64 {
    let f = |l: f64| min_eig3(&(theta - g * l));
    let mut hi = 1.0;
    while hi < 1e12 && f(2.0 * hi) > f(hi) {
        hi *= 2.0;
    }
    let (mut lo, mut hi) = (0.0, 2.0 * hi);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    (lo + hi) / 2.0
}

/// The convex combination of the two quadratic forms and multipliers. Both
/// inputs must certify the same pair; the trace stays 1 along the path.
pub fn ellipse_path(e0: &Ellipse, e1: &Ellipse, t: f64) -> Result<Ellipse> {
    if e0.lambda.len() != e1.lambda.len() {
        return Err(Error::Dimension("ellipses certify pairs with different facet counts".into()));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Input(format!("path parameter {t} outside [0, 1]")));
    }
    let theta = e0.theta() * (1.0 - t) + e1.theta() * t;
    let tr = theta[(0, 0)] + theta[(1, 1)];
    let lambda = e0.lambda.iter().zip(&e1.lambda).map(|(a, b)| ((1.0 - t) * a + t * b) / tr).collect();
    Ok(Ellipse::from_theta(&(theta / tr), lambda))
}

#[derive(Clone, Debug, Serialize)]
pub struct RankTwoDecision {
    pub psd_rank_le_2: bool,
    pub rank: usize,
    /// Certificate, present when the decision came from the ellipse program.
    pub ellipse: Option<Ellipse>,
    pub pair: Option<SandwichPair>,
    /// Phase-I optimum of the ellipse program: negative means an ellipse
    /// fits strictly, positive means none fits.
    pub margin: Option<f64>,
}

fn sym2(m: [[f64; 2]; 2]) -> DenseMatrix {
    DenseMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]])
}

fn e3(i: usize, j: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(3, 3);
    m[(i, j)] = 1.0;
    m[(j, i)] = 1.0;
    m
}

fn dense3(m: &Matrix3<f64>) -> DenseMatrix {
    DenseMatrix::from_fn(3, 3, |i, j| m[(i, j)])
}

/// Searches for an ellipse E with P ⊆ E ⊆ Q for the planar pair of a rank-3
/// matrix. Rank at most 2 answers true and rank at least 4 answers false
/// without solving anything.
pub fn decide_psd_rank_le_2(m: &NonnegativeMatrix, tol: Tolerance) -> Result<RankTwoDecision> {
    let rank = numerical_rank(m.as_dense(), tol)?;
    if rank != 3 {
        return Ok(RankTwoDecision { psd_rank_le_2: rank <= 2, rank, ellipse: None, pair: None, margin: None });
    }
    let pair = polytopes_from_matrix(m, tol)?;
    let (theta, lambda, status, margin) = solve_ellipse_program(&pair)?;
    match status {
        SdpStatus::Infeasible => {
            Ok(RankTwoDecision { psd_rank_le_2: false, rank, ellipse: None, pair: Some(pair), margin: Some(margin) })
        }
        SdpStatus::NumericalFailure => Err(Error::Numerical(format!(
            "ellipse program undecided (phase-I margin {margin:.3e})"
        ))),
        _ => {
            let ellipse = Ellipse::from_theta(&theta, lambda);
            Ok(RankTwoDecision {
                psd_rank_le_2: true,
                rank,
                ellipse: Some(ellipse),
                pair: Some(pair),
                margin: Some(margin),
            })
        }
    }
}

/// Solves the ellipse program in whitened coordinates (vertex covariance
/// mapped to the identity, facet normals unit length) and maps the result
/// back to the pair's coordinates.
fn solve_ellipse_program(pair: &SandwichPair) -> Result<(Matrix3<f64>, Vec<f64>, SdpStatus, f64)> {
    let verts: Vec<Vector2<f64>> = pair.inner.vertices.iter().map(|v| Vector2::new(v[0], v[1])).collect();
    let nv = verts.len() as f64;
    let mu = verts.iter().sum::<Vector2<f64>>() / nv;
    let cov = verts.iter().map(|x| (x - mu) * (x - mu).transpose()).sum::<Matrix2<f64>>() / nv;
    let ce = cov.symmetric_eigen();
    if ce.eigenvalues.min() <= 1e-14 * (1.0 + ce.eigenvalues.max()) {
        return Err(Error::Degenerate("inner polytope is not full-dimensional".into()));
    }
    let map = |f: fn(f64) -> f64| {
        ce.eigenvectors * Matrix2::from_diagonal(&ce.eigenvalues.map(f)) * ce.eigenvectors.transpose()
    };
    let l = map(|x| 1.0 / x.sqrt());
    let l_inv = map(f64::sqrt);

    let facets = &pair.outer.inequalities;
    let nf = facets.len();
    // α, δ, b1, b2, c, λ_1..λ_f
    let mut p = SdpProblem::new(5 + nf);
    p.add_block(
        LmiBlock::new(sym2([[0., 0.], [0., 1.]]))
            .term(0, sym2([[1., 0.], [0., -1.]]))
            .term(1, sym2([[0., 1.], [1., 0.]])),
    );
    for x in &verts {
        let y = l * (x - mu);
        let (x1, x2) = (y[0], y[1]);
        p.add_scalar(-x2 * x2, &[(0, -(x1 * x1 - x2 * x2)), (1, -2.0 * x1 * x2), (2, -2.0 * x1), (3, -2.0 * x2), (4, -1.0)]);
    }
    let mut norms = vec![0.0; nf];
    for (j, (g, h)) in facets.iter().enumerate() {
        if is_trivial_facet(g) {
            continue;
        }
        let g = Vector2::new(g[0], g[1]);
        let gw = l_inv * g;
        let n = gw.norm();
        norms[j] = n;
        let gn = gw / n;
        let hn = (h - g.dot(&mu)) / n;
        let gform = facet_form(&[gn[0], gn[1]], hn);
        let mut f0 = DenseMatrix::zeros(3, 3);
        f0[(1, 1)] = 1.0;
        let mut alpha = DenseMatrix::zeros(3, 3);
        alpha[(0, 0)] = 1.0;
        alpha[(1, 1)] = -1.0;
        let mut cc = DenseMatrix::zeros(3, 3);
        cc[(2, 2)] = 1.0;
        p.add_block(
            LmiBlock::new(f0)
                .term(0, alpha)
                .term(1, e3(0, 1))
                .term(2, e3(0, 2))
                .term(3, e3(1, 2))
                .term(4, cc)
                .term(5 + j, -dense3(&gform)),
        );
        p.add_scalar(0.0, &[(5 + j, 1.0)]);
    }
    let params = SdpParams { gap_tol: 1e-10, feas_tol: 1e-8, cert_tol: 1e-8, box_radius: 1e4, ..SdpParams::default() };
    let sol = solve(&p, &params)?;
    let margin = sol.phase1_value;
    if !sol.is_feasible() {
        return Ok((Matrix3::zeros(), Vec::new(), sol.status, margin));
    }
    let x = &sol.x;
    let tw = Matrix3::new(x[0], x[1], x[2], x[1], 1.0 - x[0], x[3], x[2], x[3], x[4]);
    let lm = l * mu;
    let t = Matrix3::new(l[(0, 0)], l[(0, 1)], -lm[0], l[(1, 0)], l[(1, 1)], -lm[1], 0.0, 0.0, 1.0);
    let theta = t.transpose() * tw * t;
    let tau = theta[(0, 0)] + theta[(1, 1)];
    let lambda = (0..nf).map(|j| if norms[j] > 0.0 { x[5 + j] / (norms[j] * tau) } else { 0.0 }).collect();
    Ok((theta / tau, lambda, sol.status, margin))
}

fn sqrt2x2(a: &Matrix2<f64>, power: f64) -> Matrix2<f64> {
    let e = a.symmetric_eigen();
    e.eigenvectors * Matrix2::from_diagonal(&e.eigenvalues.map(|x| x.powf(power))) * e.eigenvectors.transpose()
}

/// Size-2 factorization of m = diag(d)·S(P, Q) from an ellipse certifying
/// P ⊆ E ⊆ Q: A_i = π⁻¹(x_i, 1) and B_j = π*(-g_j, h_j) for the linear map π
/// taking the 2×2 psd cone onto the cone over E.
pub fn factorization_from_ellipse(
    m: &NonnegativeMatrix,
    pair: &SandwichPair,
    e: &Ellipse,
    tol: Tolerance,
) -> Result<RealFactorization> {
    require_planar(pair)?;
    let s = slack_matrix(pair, tol)?;
    if (s.rows(), s.cols()) != (m.rows(), m.cols()) {
        return Err(Error::Dimension(format!(
            "pair has slack matrix {}×{} but the matrix is {}×{}",
            s.rows(),
            s.cols(),
            m.rows(),
            m.cols()
        )));
    }
    let (sd, md) = (s.as_dense(), m.as_dense());
    let mut scale = Vec::with_capacity(m.rows());
    for i in 0..m.rows() {
        let (srow, mrow) = (sd.row(i), md.row(i));
        let ss = srow.dot(&srow);
        let d = if ss > 0.0 { srow.dot(&mrow) / ss } else { 1.0 };
        let resid = (mrow - srow * d).abs().max();
        if resid > 1e-8 * (1.0 + mrow.abs().max()) || d < 0.0 {
            return Err(Error::Input(format!("row {i} is not a nonnegative multiple of the pair's slack row")));
        }
        scale.push(d);
    }

    let a = Matrix2::new(e.a[0][0], e.a[0][1], e.a[1][0], e.a[1][1]);
    let b = Vector2::new(e.b[0], e.b[1]);
    let ev = a.symmetric_eigenvalues();
    if ev.min() < 1e-10 * ev.max().max(1.0) {
        return Err(Error::Degenerate(format!("ellipse quadratic part is singular (λ_min = {:.3e})", ev.min())));
    }
    let a_half = sqrt2x2(&a, 0.5);
    let a_inv_half = sqrt2x2(&a, -0.5);
    let a_inv = a.try_inverse().expect("positive definite");
    let kappa = b.dot(&(a_inv * b)) - e.c;
    if kappa <= 0.0 {
        return Err(Error::Degenerate("ellipse is empty or a single point".into()));
    }
    let w = a_inv_half * b;
    let g = Matrix3::new(
        0.0,
        0.0,
        kappa.sqrt(),
        a_half[(0, 0)],
        a_half[(0, 1)],
        w[0],
        a_half[(1, 0)],
        a_half[(1, 1)],
        w[1],
    );
    let r2 = std::f64::consts::SQRT_2;
    let phi = Matrix3::new(1.0, 1.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, r2);
    let phi_inv = phi.try_inverse().expect("fixed invertible matrix");
    let g_inv = g.try_inverse().ok_or_else(|| Error::Degenerate("cone map is singular".into()))?;
    let pi_t = (g_inv * phi).transpose();
    let to_sym = |v: Vector3<f64>| vecm_inv(&DVector::from_column_slice(v.as_slice()));

    let rows = pair
        .inner
        .vertices
        .iter()
        .zip(&scale)
        .map(|(x, d)| to_sym(phi_inv * g * Vector3::new(x[0], x[1], 1.0) * *d))
        .collect::<Result<Vec<SymMatrix>>>()?;
    let cols = pair
        .outer
        .inequalities
        .iter()
        .map(|(gj, h)| to_sym(pi_t * Vector3::new(-gj[0], -gj[1], *h)))
        .collect::<Result<Vec<SymMatrix>>>()?;
    PsdFactorization::new(rows, cols)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegionPoint {
    pub x: f64,
    pub y: f64,
    /// None when the solver could not decide.
    pub decision: Option<bool>,
}

fn sweep(points: Vec<(f64, f64)>, spec: impl Fn(f64, f64) -> FamilySpec + Sync, tol: Tolerance) -> Vec<RegionPoint> {
    points
        .into_par_iter()
        .map(|(x, y)| {
            let decision = generate(&spec(x, y))
                .and_then(|g| g.into_nonnegative())
                .and_then(|m| decide_psd_rank_le_2(&m, tol))
                .ok()
                .map(|d| d.psd_rank_le_2);
            RegionPoint { x, y, decision }
        })
        .collect()
}

/// Decisions for the circulant M(1, b, c) on a grid×grid lattice of [0, 2]².
pub fn circulant_region(grid: usize, tol: Tolerance) -> Vec<RegionPoint> {
    let step = if grid > 1 { 2.0 / (grid - 1) as f64 } else { 0.0 };
    let pts = (0..grid).flat_map(|i| (0..grid).map(move |j| (i as f64 * step, j as f64 * step))).collect();
    sweep(pts, |b, c| FamilySpec::Circulant3 { a: 1.0, b, c }, tol)
}

/// Decisions for the nested-rectangle slack matrices on a grid×grid lattice
/// of the open square (0, 1)².
pub fn nested_rect_region(grid: usize, tol: Tolerance) -> Vec<RegionPoint> {
    let step = 1.0 / (grid + 1) as f64;
    let pts = (1..=grid).flat_map(|i| (1..=grid).map(move |j| (i as f64 * step, j as f64 * step))).collect();
    sweep(pts, |a, b| FamilySpec::NestedRectSlack { a, b }, tol)
}
