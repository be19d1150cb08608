//! Small dense semidefinite programs over block linear matrix inequalities.
//!
//! Problems have the form
//!
//! ```text
//! minimize   cᵀx  -  Σ_{l ∈ L} log det F_l(x)
//! subject to F_b(x) = F_b0 + Σ_i x_i F_bi ⪰ 0   for every block b
//!            E x = d
//! ```
//!
//! and are solved by a path-following barrier method. Equalities are
//! eliminated through a null-space basis. A phase-I problem (minimize s with
//! F_b(x) + sI ⪰ 0) decides feasibility: a negative optimum gives a strictly
//! feasible start, a positive lower bound from the duality gap certifies
//! infeasibility, and an optimum within `feas_tol` of zero is accepted as a
//! boundary solution. Pure feasibility problems (c = 0, no log det) return
//! the least-norm feasible point.

use nalgebra::{Cholesky, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::linalg::{sym_eigen, DenseMatrix};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LmiBlock {
    pub f0: DenseMatrix,
    /// Sparse list of (variable index, coefficient matrix).
    pub terms: Vec<(usize, DenseMatrix)>,
}

impl LmiBlock {
    pub fn new(f0: DenseMatrix) -> Self {
        Self { f0, terms: Vec::new() }
    }

    pub fn term(mut self, var: usize, f: DenseMatrix) -> Self {
        self.terms.push((var, f));
        self
    }

    pub fn size(&self) -> usize {
        self.f0.nrows()
    }

    pub fn eval(&self, x: &[f64]) -> DenseMatrix {
        let mut m = self.f0.clone();
        for (i, f) in &self.terms {
            if x[*i] != 0.0 {
                m += f * x[*i];
            }
        }
        m
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SdpProblem {
    pub n: usize,
    pub c: Vec<f64>,
    pub blocks: Vec<LmiBlock>,
    /// Rows (a, d) meaning aᵀx = d.
    pub equalities: Vec<(Vec<f64>, f64)>,
    /// Indices of blocks whose -log det is added to the objective.
    pub logdet: Vec<usize>,
}

impl SdpProblem {
    pub fn new(n: usize) -> Self {
        Self { n, c: vec![0.0; n], ..Default::default() }
    }

    pub fn add_block(&mut self, block: LmiBlock) -> usize {
        self.blocks.push(block);
        self.blocks.len() - 1
    }

    /// 1×1 block a0 + Σ aᵢ xᵢ ≥ 0.
    pub fn add_scalar(&mut self, a0: f64, coeffs: &[(usize, f64)]) -> usize {
        let mut b = LmiBlock::new(DenseMatrix::from_element(1, 1, a0));
        for &(i, v) in coeffs {
            b = b.term(i, DenseMatrix::from_element(1, 1, v));
        }
        self.add_block(b)
    }

    pub fn add_equality(&mut self, a: Vec<f64>, d: f64) {
        self.equalities.push((a, d));
    }

    fn validate(&self) -> Result<()> {
        if self.c.len() != self.n {
            return Err(Error::Dimension(format!("objective has {} entries for {} variables", self.c.len(), self.n)));
        }
        if self.c.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("objective has non-finite entries".into()));
        }
        for (bi, b) in self.blocks.iter().enumerate() {
            let k = b.size();
            let mats = std::iter::once(&b.f0).chain(b.terms.iter().map(|(_, f)| f));
            for f in mats {
                if f.shape() != (k, k) {
                    return Err(Error::Dimension(format!("block {bi} mixes sizes")));
                }
                if f.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Input(format!("block {bi} has non-finite entries")));
                }
                let scale = 1.0 + f.abs().max();
                if (f - f.transpose()).abs().max() > 1e-12 * scale {
                    return Err(Error::Input(format!("block {bi} has a non-symmetric coefficient")));
                }
            }
            if let Some((i, _)) = b.terms.iter().find(|(i, _)| *i >= self.n) {
                return Err(Error::Dimension(format!("block {bi} refers to variable {i}")));
            }
        }
        for (a, d) in &self.equalities {
            if a.len() != self.n || !d.is_finite() || a.iter().any(|x| !x.is_finite()) {
                return Err(Error::Input("malformed equality row".into()));
            }
        }
        if let Some(l) = self.logdet.iter().find(|&&l| l >= self.blocks.len()) {
            return Err(Error::Input(format!("log det refers to missing block {l}")));
        }
        Ok(())
    }

    fn is_feasibility(&self) -> bool {
        self.logdet.is_empty() && self.c.iter().all(|&x| x == 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdpStatus {
    Optimal,
    Feasible,
    Infeasible,
    NumericalFailure,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub x: Vec<f64>,
    /// Minimum eigenvalue of every block at x.
    pub margins: Vec<f64>,
    pub objective: f64,
    /// Duality-gap bound of the last barrier stage.
    pub gap: f64,
    /// Optimal value of the phase-I problem (upper estimate): negative means
    /// strictly feasible, positive means every point violates some block by at
    /// least `phase1_lower`.
    pub phase1_value: f64,
    pub phase1_lower: f64,
    pub message: String,
}

impl SdpSolution {
    pub fn is_feasible(&self) -> bool {
        matches!(self.status, SdpStatus::Optimal | SdpStatus::Feasible)
    }

    pub fn min_margin(&self) -> f64 {
        self.margins.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdpParams {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub cert_tol: f64,
    /// Half-width of the box used in phase I.
    pub box_radius: f64,
    pub max_newton: usize,
}

impl Default for SdpParams {
    fn default() -> Self {
        Self { gap_tol: 1e-8, feas_tol: 1e-7, cert_tol: 1e-7, box_radius: 1e6, max_newton: 4000 }
    }
}

struct Block {
    f0: DenseMatrix,
    terms: Vec<(usize, DenseMatrix)>,
    /// Enters the objective as -t log det instead of the barrier.
    logdet: bool,
}

impl Block {
    fn eval(&self, z: &DVector<f64>) -> DenseMatrix {
        let mut m = self.f0.clone();
        for (i, f) in &self.terms {
            if z[*i] != 0.0 {
                m += f * z[*i];
            }
        }
        m
    }
}

/// Problem in reduced variables z with x = x0 + N z.
struct Inner {
    nz: usize,
    c: DVector<f64>,
    /// ½‖x0 + N z‖² added to the objective.
    quad: Option<(DVector<f64>, DenseMatrix)>,
    blocks: Vec<Block>,
}

struct Stage {
    z: DVector<f64>,
    gap: f64,
    stalled: bool,
}

fn chol(m: &DenseMatrix) -> Option<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone())
}

impl Inner {
    fn barrier_size(&self) -> usize {
        self.blocks.iter().filter(|b| !b.logdet).map(|b| b.f0.nrows()).sum()
    }

    fn objective(&self, z: &DVector<f64>) -> f64 {
        let mut v = self.c.dot(z);
        if let Some((x0, n)) = &self.quad {
            v += 0.5 * (x0 + n * z).norm_squared();
        }
        v
    }

    /// t f0(z) + barrier, or None outside the domain.
    fn phi(&self, z: &DVector<f64>, t: f64) -> Option<f64> {
        let mut v = t * self.objective(z);
        for b in &self.blocks {
            let l = chol(&b.eval(z))?;
            let logdet: f64 = l.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
            v -= if b.logdet { t * logdet } else { logdet };
        }
        Some(v)
    }

    fn grad_hess(&self, z: &DVector<f64>, t: f64) -> Option<(DVector<f64>, DenseMatrix)> {
        let n = self.nz;
        let mut g = &self.c * t;
        let mut h = DenseMatrix::zeros(n, n);
        if let Some((x0, nm)) = &self.quad {
            g += nm.transpose() * (x0 + nm * z) * t;
            h += nm.transpose() * nm * t;
        }
        for b in &self.blocks {
            let w = if b.logdet { t } else { 1.0 };
            let l = chol(&b.eval(z))?;
            let ys: Vec<(usize, DenseMatrix)> = b
                .terms
                .iter()
                .map(|(i, f)| {
                    let half = l.l_dirty().solve_lower_triangular(f).expect("cholesky factor is invertible");
                    let y = l.l_dirty().solve_lower_triangular(&half.transpose()).expect("cholesky factor is invertible");
                    (*i, y)
                })
                .collect();
            for (a, (i, yi)) in ys.iter().enumerate() {
                g[*i] -= w * yi.trace();
                for (j, yj) in &ys[a..] {
                    let v = w * yi.dot(yj);
                    h[(*i, *j)] += v;
                    if i != j {
                        h[(*j, *i)] += v;
                    }
                }
            }
        }
        Some((g, h))
    }

    /// Newton's method on φ_t. Returns false when progress stalls before the
    /// Newton decrement is small.
    fn center(&self, z: &mut DVector<f64>, t: f64, budget: &mut usize) -> bool {
        let mut steps = 0;
        loop {
            if *budget == 0 {
                return false;
            }
            *budget -= 1;
            steps += 1;
            let Some((g, h)) = self.grad_hess(z, t) else { return false };
            let step = match Cholesky::new(h.clone()) {
                Some(c) => c.solve(&(-&g)),
                None => {
                    let reg = h.clone() + DenseMatrix::identity(self.nz, self.nz) * (1e-12 * (1.0 + h.abs().max()));
                    match reg.lu().solve(&(-&g)) {
                        Some(s) => s,
                        None => return false,
                    }
                }
            };
            let dec = -g.dot(&step);
            if !dec.is_finite() {
                return false;
            }
            if dec <= 1e-11 {
                return true;
            }
            let Some(f0) = self.phi(z, t) else { return false };
            if steps > 200 {
                return dec <= 1e-4;
            }
            let mut s = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let cand = &*z + &step * s;
                if let Some(f1) = self.phi(&cand, t) {
                    if f1 <= f0 - 0.25 * s * dec {
                        *z = cand;
                        accepted = true;
                        // φ no longer resolves the decrease: as centered as rounding allows
                        if f0 - f1 <= 1e-14 * (1.0 + f0.abs()) && dec <= 1e-6 {
                            return true;
                        }
                        break;
                    }
                }
                s *= 0.5;
            }
            if !accepted {
                // no decrease representable in floating point: treat as centered
                // when the decrement is already tiny relative to φ
                return dec <= 1e-7 * (1.0 + f0.abs());
            }
        }
    }

    fn minimize(&self, z0: DVector<f64>, gap_tol: f64, max_newton: usize, stop: impl Fn(&DVector<f64>) -> bool) -> Stage {
        let m = self.barrier_size() as f64;
        let mut z = z0;
        let mut budget = max_newton;
        if m == 0.0 {
            let ok = self.center(&mut z, 1.0, &mut budget);
            return Stage { z, gap: 0.0, stalled: !ok };
        }
        let mut t = 1.0;
        loop {
            let ok = self.center(&mut z, t, &mut budget);
            let gap = m / t;
            if !ok {
                return Stage { z, gap, stalled: true };
            }
            if gap <= gap_tol || stop(&z) {
                return Stage { z, gap, stalled: false };
            }
            t *= 10.0;
        }
    }
}

fn min_eig(m: &DenseMatrix) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    sym_eigen(m).0[0]
}

/// Solves `p`; malformed problems are errors, everything else is reported
/// through [`SdpSolution::status`].
pub fn solve(p: &SdpProblem, params: &SdpParams) -> Result<SdpSolution> {
    p.validate()?;
    let n = p.n;

    // x = x0 + N z
    let (x0, nbasis) = if p.equalities.is_empty() {
        (DVector::zeros(n), DenseMatrix::identity(n, n))
    } else {
        let e = DenseMatrix::from_fn(p.equalities.len(), n, |r, c| p.equalities[r].0[c]);
        let d = DVector::from_iterator(p.equalities.len(), p.equalities.iter().map(|(_, d)| *d));
        let (vals, vecs) = sym_eigen(&(e.transpose() * &e));
        let cut = 1e-12 * vals.iter().cloned().fold(0.0, f64::max).max(1e-300);
        let null: Vec<usize> = (0..n).filter(|&i| vals[i] <= cut).collect();
        let range: Vec<usize> = (0..n).filter(|&i| vals[i] > cut).collect();
        // least-squares particular solution through the range eigenvectors
        let etd = e.transpose() * &d;
        let mut x0 = DVector::zeros(n);
        for &i in &range {
            let col = vecs.column(i);
            x0 += col * (col.dot(&etd) / vals[i]);
        }
        let resid = (&e * &x0 - &d).abs().max();
        if resid > 1e-9 * (1.0 + d.abs().max()) {
            return Ok(SdpSolution {
                status: SdpStatus::Infeasible,
                x: x0.iter().copied().collect(),
                margins: Vec::new(),
                objective: f64::NAN,
                gap: 0.0,
                phase1_value: f64::INFINITY,
                phase1_lower: resid,
                message: format!("linear equalities are inconsistent (residual {resid:.3e})"),
            });
        }
        let nb = DenseMatrix::from_fn(n, null.len(), |r, c| vecs[(r, null[c])]);
        (x0, nb)
    };
    let nz = nbasis.ncols();
    let lift = |z: &DVector<f64>| -> Vec<f64> { (&x0 + &nbasis * z).iter().copied().collect() };

    let reduce_block = |b: &LmiBlock, logdet: bool| -> Block {
        let f0 = b.eval(x0.as_slice());
        let k = b.size();
        let mut terms = Vec::new();
        for j in 0..nz {
            let mut f = DenseMatrix::zeros(k, k);
            let mut any = false;
            for (i, fi) in &b.terms {
                let w = nbasis[(*i, j)];
                if w != 0.0 {
                    f += fi * w;
                    any = true;
                }
            }
            if any && f.abs().max() > 0.0 {
                terms.push((j, f));
            }
        }
        Block { f0, terms, logdet }
    };

    // phase I in (z, s)
    let s_idx = nz;
    let mut p1_blocks: Vec<Block> = p
        .blocks
        .iter()
        .map(|b| {
            let mut r = reduce_block(b, false);
            r.terms.push((s_idx, DenseMatrix::identity(b.size(), b.size())));
            r
        })
        .collect();
    let scalar = |a0: f64, terms: Vec<(usize, f64)>| Block {
        f0: DenseMatrix::from_element(1, 1, a0),
        terms: terms.into_iter().map(|(i, v)| (i, DenseMatrix::from_element(1, 1, v))).collect(),
        logdet: false,
    };
    p1_blocks.push(scalar(1.0, vec![(s_idx, 1.0)]));
    let r = params.box_radius;
    for j in 0..nz {
        p1_blocks.push(scalar(r, vec![(j, 1.0)]));
        p1_blocks.push(scalar(r, vec![(j, -1.0)]));
    }
    let mut c1 = DVector::zeros(nz + 1);
    c1[s_idx] = 1.0;
    let phase1 = Inner { nz: nz + 1, c: c1, quad: None, blocks: p1_blocks };
    let z_start = DVector::zeros(nz);
    let worst = p
        .blocks
        .iter()
        .map(|b| min_eig(&b.eval(x0.as_slice())))
        .fold(f64::INFINITY, f64::min);
    let s0 = if worst.is_finite() { (-worst).max(0.0) + 1.0 } else { 1.0 };
    let mut w0 = DVector::zeros(nz + 1);
    w0.rows_mut(0, nz).copy_from(&z_start);
    w0[s_idx] = s0;
    let st1 = phase1.minimize(w0, params.gap_tol.min(params.cert_tol * 0.1), params.max_newton, |_| false);
    let s_up = st1.z[s_idx];
    let s_low = s_up - st1.gap;
    let z1 = st1.z.rows(0, nz).into_owned();
    let box_active = z1.iter().any(|v| v.abs() > 0.5 * r);

    let margins_at = |x: &[f64]| -> Vec<f64> { p.blocks.iter().map(|b| min_eig(&b.eval(x))).collect() };
    let finish = |status: SdpStatus, z: &DVector<f64>, gap: f64, message: String| -> SdpSolution {
        let x = lift(z);
        let margins = margins_at(&x);
        let xv = DVector::from_vec(x.clone());
        let mut objective = p.c.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        for &l in &p.logdet {
            let m = p.blocks[l].eval(&x);
            objective -= chol(&m).map_or(f64::INFINITY, |c| c.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum());
        }
        if p.is_feasibility() {
            objective = 0.5 * xv.norm_squared();
        }
        let mut status = status;
        let mut message = message;
        if matches!(status, SdpStatus::Optimal | SdpStatus::Feasible)
            && margins.iter().any(|&v| v < -params.feas_tol)
        {
            status = SdpStatus::NumericalFailure;
            message = "returned point violates a block beyond feas_tol".into();
        }
        SdpSolution { status, x, margins, objective, gap, phase1_value: s_up, phase1_lower: s_low, message }
    };

    if s_up >= 0.0 {
        if s_low > params.cert_tol && !box_active && !st1.stalled {
            return Ok(finish(
                SdpStatus::Infeasible,
                &z1,
                st1.gap,
                format!("every point violates some block by at least {s_low:.3e}"),
            ));
        }
        if s_up <= params.feas_tol && p.is_feasibility() {
            return Ok(finish(SdpStatus::Feasible, &z1, st1.gap, "boundary solution (no strictly feasible point found)".into()));
        }
        let why = if box_active {
            "phase I hit the search box"
        } else if st1.stalled {
            "phase I stalled"
        } else if s_up <= params.feas_tol {
            "feasible set has empty interior; optimization needs a strictly feasible point"
        } else {
            "infeasibility margin below cert_tol"
        };
        return Ok(finish(SdpStatus::NumericalFailure, &z1, st1.gap, format!("{why} (phase-I value {s_up:.3e}, lower bound {s_low:.3e})")));
    }

    // phase II from the strictly feasible z1
    let feasibility = p.is_feasibility();
    let logdet: Vec<bool> = (0..p.blocks.len()).map(|i| p.logdet.contains(&i)).collect();
    let blocks: Vec<Block> = p.blocks.iter().zip(&logdet).map(|(b, &l)| reduce_block(b, l)).collect();
    let c = nbasis.transpose() * DVector::from_vec(p.c.clone());
    let phase2 = Inner { nz, c, quad: feasibility.then(|| (x0.clone(), nbasis.clone())), blocks };
    let limit = 1e3 * params.box_radius;
    let st2 = phase2.minimize(z1.clone(), params.gap_tol, params.max_newton, |z| z.amax() > limit);
    if st2.z.amax() > limit {
        return Ok(finish(SdpStatus::NumericalFailure, &st2.z, st2.gap, "objective appears unbounded below".into()));
    }
    let status = if feasibility { SdpStatus::Feasible } else { SdpStatus::Optimal };
    if st2.stalled && st2.gap > params.gap_tol {
        let mut sol = finish(status, &st2.z, st2.gap, format!("barrier stalled at gap {:.3e}", st2.gap));
        if st2.gap > 1e3 * params.gap_tol {
            sol.status = SdpStatus::NumericalFailure;
        }
        return Ok(sol);
    }
    Ok(finish(status, &st2.z, st2.gap, String::new()))
}
