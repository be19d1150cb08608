use nalgebra::DVector;

use crate::linalg::{sym_eigen, DenseMatrix};
use crate::sdp::{solve, LmiBlock, SdpParams, SdpProblem, SdpStatus};
use crate::{Error, Result};

/// The (possibly degenerate) ellipsoid center + shape·(unit ball); `shape`
/// is k×m for any m.
#[derive(Clone, Debug, PartialEq)]
pub struct EllipsoidShape {
    pub center: DVector<f64>,
    pub shape: DenseMatrix,
}

impl EllipsoidShape {
    pub fn new(center: DVector<f64>, shape: DenseMatrix) -> Result<Self> {
        if center.len() != shape.nrows() {
            return Err(Error::Dimension(format!("center in R^{} but shape has {} rows", center.len(), shape.nrows())));
        }
        if center.iter().chain(shape.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Input("ellipsoid has non-finite entries".into()));
        }
        Ok(Self { center, shape })
    }

    pub fn centered(shape: DenseMatrix) -> Self {
        Self { center: DVector::zeros(shape.nrows()), shape }
    }

    pub fn dim(&self) -> usize {
        self.shape.nrows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mvee {
    /// Symmetric positive definite; the ellipsoid is center + shape·(unit ball).
    pub shape: DenseMatrix,
    pub center: DVector<f64>,
    /// Per input ellipsoid, an upper bound on max ‖shape⁻¹(x - center)‖ over
    /// its points (exact when it shares the center). Values ≤ 1 certify
    /// containment.
    pub containment: Vec<f64>,
}

fn spectral_norm(m: &DenseMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    crate::linalg::svd(m).s[0]
}

fn sym_power(m: &DenseMatrix, power: f64) -> DenseMatrix {
    let (vals, vecs) = sym_eigen(m);
    let d = DenseMatrix::from_diagonal(&vals.map(|x| x.max(0.0).powf(power)));
    &vecs * d * vecs.transpose()
}

/// Minimum-volume ellipsoid containing the union of `ellipsoids`, centered at
/// the origin when `symmetric` is set (then it also contains the mirror
/// images). Solved as max log det W subject to the S-procedure containment
/// blocks [[I, Wc + d, WS], [·, 1 - τ, 0], [·, 0, τI]] ⪰ 0.
pub fn mvee(ellipsoids: &[EllipsoidShape], symmetric: bool) -> Result<Mvee> {
    let first = ellipsoids.first().ok_or_else(|| Error::Input("no ellipsoids given".into()))?;
    let k = first.dim();
    if k == 0 || ellipsoids.iter().any(|e| e.dim() != k || e.center.len() != k) {
        return Err(Error::Dimension("ellipsoids must share a positive dimension".into()));
    }
    let cnt = ellipsoids.len() as f64;
    let shift = if symmetric {
        DVector::zeros(k)
    } else {
        ellipsoids.iter().map(|e| &e.center).sum::<DVector<f64>>() / cnt
    };
    let mut spread = DenseMatrix::zeros(k, k);
    for e in ellipsoids {
        let c = &e.center - &shift;
        spread += &e.shape * e.shape.transpose() + &c * c.transpose();
    }
    spread /= cnt;
    let (vals, _) = sym_eigen(&spread);
    if vals[0] <= 1e-12 * vals[k - 1].max(f64::MIN_POSITIVE) {
        return Err(Error::Degenerate("ellipsoids do not span the space".into()));
    }
    // whitened data: x' = m0 (x - shift)
    let m0 = sym_power(&spread, -0.5);
    let data: Vec<(DVector<f64>, DenseMatrix)> =
        ellipsoids.iter().map(|e| (&m0 * (&e.center - &shift), &m0 * &e.shape)).collect();

    let wvars: Vec<(usize, usize)> = (0..k).flat_map(|a| (a..k).map(move |b| (a, b))).collect();
    let nw = wvars.len();
    let nd = if symmetric { 0 } else { k };
    let mut p = SdpProblem::new(nw + nd + data.len());
    let unit = |n: usize, a: usize, b: usize| {
        let mut m = DenseMatrix::zeros(n, n);
        m[(a, b)] = 1.0;
        m[(b, a)] = 1.0;
        m
    };

    let mut wblock = LmiBlock::new(DenseMatrix::zeros(k, k));
    for (v, &(a, b)) in wvars.iter().enumerate() {
        wblock = wblock.term(v, unit(k, a, b));
    }
    let wb = p.add_block(wblock);
    p.logdet.push(wb);

    for (t, (c, s)) in data.iter().enumerate() {
        let m = s.ncols();
        let n = k + 1 + m;
        let mut f0 = DenseMatrix::zeros(n, n);
        for i in 0..k {
            f0[(i, i)] = 1.0;
        }
        f0[(k, k)] = 1.0;
        let mut blk = LmiBlock::new(f0);
        for (v, &(a, b)) in wvars.iter().enumerate() {
            // ∂W/∂w_ab = E_ab + E_ba (or E_aa)
            let mut f = DenseMatrix::zeros(n, n);
            let mut put = |row: usize, col: usize, x: f64| {
                f[(row, col)] += x;
                f[(col, row)] += x;
            };
            let pairs: &[(usize, usize)] = if a == b { &[(a, a)] } else { &[(a, b), (b, a)] };
            for &(r, q) in pairs {
                put(r, k, c[q]);
                for l in 0..m {
                    put(r, k + 1 + l, s[(q, l)]);
                }
            }
            blk = blk.term(v, f);
        }
        for r in 0..nd {
            blk = blk.term(nw + r, unit(n, r, k));
        }
        let mut ft = DenseMatrix::zeros(n, n);
        ft[(k, k)] = -1.0;
        for l in 0..m {
            ft[(k + 1 + l, k + 1 + l)] = 1.0;
        }
        blk = blk.term(nw + nd + t, ft);
        p.add_block(blk);
    }

    let params = SdpParams { gap_tol: 1e-11, ..SdpParams::default() };
    let sol = solve(&p, &params)?;
    if sol.status != SdpStatus::Optimal {
        return Err(Error::Numerical(format!("enclosing-ellipsoid program ended with {:?}: {}", sol.status, sol.message)));
    }
    let x = &sol.x;
    let mut w = DenseMatrix::zeros(k, k);
    for (v, &(a, b)) in wvars.iter().enumerate() {
        w[(a, b)] = x[v];
        w[(b, a)] = x[v];
    }
    let d = DVector::from_iterator(k, (0..k).map(|r| if symmetric { 0.0 } else { x[nw + r] }));

    // {x : ‖G x' + d‖ ≤ 1} with G = W m0 in original coordinates
    let g = &w * &m0;
    let ws = sym_power(&(g.transpose() * &g), 0.5);
    let shape = sym_power(&(g.transpose() * &g), -0.5);
    let g_inv = g.clone().try_inverse().ok_or_else(|| Error::Numerical("enclosing ellipsoid is singular".into()))?;
    let center = &shift - g_inv * d;
    let containment = ellipsoids
        .iter()
        .map(|e| (&ws * (&e.center - &center)).norm() + spectral_norm(&(&ws * &e.shape)))
        .collect();
    Ok(Mvee { shape, center, containment })
}
