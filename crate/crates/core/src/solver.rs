//! Primal-dual interior-point solver for the moment programs.
//!
//! The moment side is
//!
//! ```text
//! minimize  c0 + c·y   s.t.  S_b = F_b0 + Σ_v y_v F_bv ⪰ 0  for every block b
//! ```
//!
//! and its dual, over Gram matrices `X_b ⪰ 0`, is
//!
//! ```text
//! maximize  λ = c0 - Σ_b ⟨F_b0, X_b⟩   s.t.  Σ_b ⟨F_bv, X_b⟩ = c_v.
//! ```
//!
//! The iteration is an infeasible-start Mehrotra predictor-corrector with
//! Nesterov-Todd scaling. Linear programs are handled as programs whose
//! blocks are all 1×1.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::moments::{LinearForm, MomentVector, SymbolicMatrix};
use crate::poly::{rational_to_f64, ExponentVector};
use crate::relaxation::{BlockLabel, ConicProgram, LinearProgram, RowLabel};

pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-8;
const STEP_FRACTION: f64 = 0.98;
const DIVERGENCE: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIterations,
    NumericalFailure,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::MaxIterations => "max-iterations",
            SolveStatus::NumericalFailure => "numerical-failure",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Residuals {
    /// Relative violation of the moment-side block equations.
    pub primal: f64,
    /// Relative violation of the coefficient-matching equations.
    pub dual: f64,
    /// `|primal_objective - dual_objective|`.
    pub gap: f64,
}

/// Dual multipliers: Gram matrices for SDPs, row multipliers for LPs.
#[derive(Clone, Debug)]
pub enum DualBlocks {
    Psd(Vec<(BlockLabel, DMatrix<f64>)>),
    Linear(Vec<(RowLabel, f64)>),
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Value of the moment program `L_u(f)`.
    pub primal_objective: f64,
    /// The certified lower bound `λ`.
    pub dual_objective: f64,
    pub moments: MomentVector,
    pub dual_blocks: DualBlocks,
    pub iterations: usize,
    pub residuals: Residuals,
    /// `⟨S_b, X_b⟩` for every block.
    pub complementarity: Vec<f64>,
}

impl SolveReport {
    /// Lower bound reported for the hierarchy: the moment value when optimal,
    /// `-inf` for an unbounded moment program.
    pub fn bound(&self) -> f64 {
        match self.status {
            SolveStatus::Unbounded => f64::NEG_INFINITY,
            SolveStatus::Infeasible => f64::INFINITY,
            _ => self.primal_objective,
        }
    }
}

/// Symmetric block `F_0 + Σ y_v F_v`; entries stored for `i <= j` only.
#[derive(Clone, Debug, Default)]
struct BlockData {
    size: usize,
    constant: Vec<(usize, usize, f64)>,
    vars: Vec<usize>,
    coeffs: Vec<Vec<(usize, usize, f64)>>,
}

impl BlockData {
    fn from_entries(size: usize, map: BTreeMap<(usize, usize, usize), f64>) -> Self {
        // key: (var + 1 or 0 for the constant, i, j)
        let mut block = BlockData {
            size,
            ..Default::default()
        };
        let mut by_var: BTreeMap<usize, Vec<(usize, usize, f64)>> = BTreeMap::new();
        for ((v, i, j), val) in map {
            if val == 0.0 {
                continue;
            }
            if v == 0 {
                block.constant.push((i, j, val));
            } else {
                by_var.entry(v - 1).or_default().push((i, j, val));
            }
        }
        for (v, entries) in by_var {
            block.vars.push(v);
            block.coeffs.push(entries);
        }
        block
    }

    fn dense(entries: &[(usize, usize, f64)], size: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(size, size);
        for &(i, j, v) in entries {
            m[(i, j)] += v;
            if i != j {
                m[(j, i)] += v;
            }
        }
        m
    }
}

#[derive(Clone, Debug)]
struct ConeData {
    nvars: usize,
    c: DVector<f64>,
    c0: f64,
    blocks: Vec<BlockData>,
}

fn pair_weight(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        2.0
    }
}

fn sparse_inner(entries: &[(usize, usize, f64)], m: &DMatrix<f64>) -> f64 {
    entries
        .iter()
        .map(|&(i, j, v)| v * m[(i, j)] * pair_weight(i, j))
        .sum()
}

fn frob_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

impl ConeData {
    fn from_forms<'a, I>(moments: &[ExponentVector], objective: &LinearForm, blocks: I) -> Self
    where
        I: IntoIterator<Item = (usize, Box<dyn Fn(usize, usize) -> &'a LinearForm + 'a>)>,
    {
        let index: HashMap<&ExponentVector, usize> = moments.iter().enumerate().map(|(i, e)| (e, i)).collect();
        let nvars = moments.len() - 1;
        let mut c = DVector::zeros(nvars);
        let mut c0 = 0.0;
        for (coef, e) in objective.terms() {
            let v = index[e];
            if v == 0 {
                c0 += rational_to_f64(coef);
            } else {
                c[v - 1] += rational_to_f64(coef);
            }
        }
        let blocks = blocks
            .into_iter()
            .map(|(size, entry)| {
                let mut map = BTreeMap::new();
                for i in 0..size {
                    for j in i..size {
                        for (coef, e) in entry(i, j).terms() {
                            *map.entry((index[e], i, j)).or_insert(0.0) += rational_to_f64(coef);
                        }
                    }
                }
                BlockData::from_entries(size, map)
            })
            .collect();
        ConeData { nvars, c, c0, blocks }
    }

    fn from_conic<'a>(program: &'a ConicProgram) -> Self {
        let blocks = program.blocks.iter().map(|(_, m)| {
            let m: &'a SymbolicMatrix = m;
            let f: Box<dyn Fn(usize, usize) -> &'a LinearForm + 'a> = Box::new(move |i, j| m.entry(i, j));
            (m.size(), f)
        });
        Self::from_forms(&program.moments, &program.objective, blocks)
    }

    fn from_lp<'a>(program: &'a LinearProgram) -> Self {
        let blocks = program.rows.iter().map(|(_, form)| {
            let f: Box<dyn Fn(usize, usize) -> &'a LinearForm + 'a> = Box::new(move |_, _| form);
            (1usize, f)
        });
        Self::from_forms(&program.moments, &program.objective, blocks)
    }

    fn apply(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.nvars);
        for (b, xb) in self.blocks.iter().zip(x) {
            for (v, entries) in b.vars.iter().zip(&b.coeffs) {
                out[*v] += sparse_inner(entries, xb);
            }
        }
        out
    }

    fn apply_adjoint(&self, y: &DVector<f64>, with_constant: bool) -> Vec<DMatrix<f64>> {
        self.blocks
            .iter()
            .map(|b| {
                let mut m = DMatrix::zeros(b.size, b.size);
                let mut put = |i: usize, j: usize, v: f64| {
                    m[(i, j)] += v;
                    if i != j {
                        m[(j, i)] += v;
                    }
                };
                if with_constant {
                    for &(i, j, v) in &b.constant {
                        put(i, j, v);
                    }
                }
                for (var, entries) in b.vars.iter().zip(&b.coeffs) {
                    let yv = y[*var];
                    if yv != 0.0 {
                        for &(i, j, v) in entries {
                            put(i, j, v * yv);
                        }
                    }
                }
                m
            })
            .collect()
    }
}

/// Variables whose coefficient matrices are linearly dependent are replaced
/// by an orthonormal basis of the identifiable directions.
struct Reduction {
    basis: Option<DMatrix<f64>>,
}

enum Reduced {
    Ready(ConeData, Reduction),
    Unbounded,
}

fn reduce(data: ConeData) -> Reduced {
    let n = data.nvars;
    if n == 0 {
        return Reduced::Ready(data, Reduction { basis: None });
    }
    let mut gram = DMatrix::<f64>::zeros(n, n);
    for b in &data.blocks {
        let mut at: HashMap<(usize, usize), Vec<(usize, f64)>> = HashMap::new();
        for (v, entries) in b.vars.iter().zip(&b.coeffs) {
            for &(i, j, val) in entries {
                at.entry((i, j)).or_default().push((*v, val));
            }
        }
        for ((i, j), list) in at {
            let w = pair_weight(i, j);
            for &(v, a) in &list {
                for &(u, c) in &list {
                    gram[(v, u)] += w * a * c;
                }
            }
        }
    }
    let diag_ok = (0..n).all(|i| gram[(i, i)] > 0.0);
    let eig = SymmetricEigen::new(gram);
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v));
    let threshold = 1e-10 * max.max(1e-300);
    let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > threshold).collect();
    if keep.len() == n && diag_ok {
        return Reduced::Ready(data, Reduction { basis: None });
    }
    let basis = DMatrix::from_fn(n, keep.len(), |r, c| eig.eigenvectors[(r, keep[c])]);
    let projected = &basis * (basis.transpose() * &data.c);
    if (&data.c - &projected).norm() > 1e-9 * (1.0 + data.c.norm()) {
        return Reduced::Unbounded;
    }
    let k = keep.len();
    let blocks = data
        .blocks
        .iter()
        .map(|b| {
            let mut map = BTreeMap::new();
            for &(i, j, v) in &b.constant {
                *map.entry((0, i, j)).or_insert(0.0) += v;
            }
            for (var, entries) in b.vars.iter().zip(&b.coeffs) {
                for &(i, j, v) in entries {
                    for col in 0..k {
                        *map.entry((col + 1, i, j)).or_insert(0.0) += v * basis[(*var, col)];
                    }
                }
            }
            BlockData::from_entries(b.size, map)
        })
        .collect();
    let c = basis.transpose() * &data.c;
    Reduced::Ready(
        ConeData {
            nvars: k,
            c,
            c0: data.c0,
            blocks,
        },
        Reduction { basis: Some(basis) },
    )
}

impl Reduction {
    fn lift(&self, z: &DVector<f64>) -> DVector<f64> {
        match &self.basis {
            Some(b) => b * z,
            None => z.clone(),
        }
    }
}

/// `L L^T = m` and `L^{-1}`; `None` if `m` is not positive definite.
fn psd_factor(m: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    if let Some(ch) = m.clone().cholesky() {
        let l = ch.l();
        let k = l.nrows();
        if let Some(linv) = l.clone().solve_lower_triangular(&DMatrix::identity(k, k)) {
            if linv.iter().all(|v| v.is_finite()) {
                return Some((l, linv));
            }
        }
    }
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let sqrt = eig.eigenvalues.map(f64::sqrt);
    let l = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt);
    let linv = DMatrix::from_diagonal(&sqrt.map(|v| 1.0 / v)) * eig.eigenvectors.transpose();
    Some((l, linv))
}

/// Largest `α` with `m + α d ⪰ 0`, given `m = L L^T` and `L^{-1}`.
fn max_step(linv: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    let mut t = linv * d * linv.transpose();
    symmetrize(&mut t);
    let min = t.symmetric_eigenvalues().iter().fold(f64::INFINITY, |a, &v| a.min(v));
    if min < 0.0 {
        -1.0 / min
    } else {
        f64::INFINITY
    }
}

struct Scaling {
    g: DMatrix<f64>,
    ginv: DMatrix<f64>,
    w: DMatrix<f64>,
    d: DVector<f64>,
}

fn nt_scaling(x_factor: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<Scaling> {
    let (r, _) = psd_factor(s)?;
    let t = r.transpose() * x_factor;
    let svd = t.svd(true, true);
    let v = svd.v_t?.transpose();
    let d = svd.singular_values.clone();
    if d.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let g = x_factor * v * DMatrix::from_diagonal(&d.map(|v| 1.0 / v.sqrt()));
    let ginv = DMatrix::from_diagonal(&d.map(|v| 1.0 / v)) * g.transpose() * s;
    let w = &g * g.transpose();
    Some(Scaling { g, ginv, w, d })
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dy: DVector<f64>,
    ds: Vec<DMatrix<f64>>,
}

enum SchurFactor {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl SchurFactor {
    fn new(m: DMatrix<f64>) -> Option<Self> {
        if let Some(ch) = m.clone().cholesky() {
            return Some(SchurFactor::Cholesky(ch));
        }
        let n = m.nrows();
        let scale = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        let mut reg = m.clone();
        for i in 0..n {
            reg[(i, i)] += 1e-13 * scale;
        }
        if let Some(ch) = reg.cholesky() {
            return Some(SchurFactor::Cholesky(ch));
        }
        let lu = m.lu();
        if lu.is_invertible() {
            Some(SchurFactor::Lu(lu))
        } else {
            None
        }
    }

    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            SchurFactor::Cholesky(c) => Some(c.solve(rhs)),
            SchurFactor::Lu(l) => l.solve(rhs),
        }
    }
}

fn schur(data: &ConeData, scalings: &[Scaling]) -> DMatrix<f64> {
    let n = data.nvars;
    let mut m = DMatrix::zeros(n, n);
    for (b, sc) in data.blocks.iter().zip(scalings) {
        let w = &sc.w;
        for (a, (v, fv)) in b.vars.iter().zip(&b.coeffs).enumerate() {
            let mut p = DMatrix::zeros(b.size, b.size);
            for &(i, j, val) in fv {
                let wi = w.column(i);
                let wj = w.column(j);
                p.ger(val, &wi, &wj, 1.0);
                if i != j {
                    p.ger(val, &wj, &wi, 1.0);
                }
            }
            for (u, fu) in b.vars.iter().zip(&b.coeffs).skip(a) {
                let val = sparse_inner(fu, &p);
                m[(*u, *v)] += val;
                if u != v {
                    m[(*v, *u)] += val;
                }
            }
        }
    }
    m
}

struct Iterate {
    x: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    s: Vec<DMatrix<f64>>,
}

struct Outcome {
    status: SolveStatus,
    iterate: Iterate,
    iterations: usize,
    pobj: f64,
    dobj: f64,
    residuals: Residuals,
}

fn initial_point(data: &ConeData) -> Iterate {
    let x = data
        .blocks
        .iter()
        .map(|b| {
            let k = b.size as f64;
            let mut xi = 10f64.max(k.sqrt());
            for (v, entries) in b.vars.iter().zip(&b.coeffs) {
                let norm = BlockData::dense(entries, b.size).norm();
                xi = xi.max(k * (1.0 + data.c[*v].abs()) / (1.0 + norm));
            }
            DMatrix::identity(b.size, b.size) * xi
        })
        .collect();
    let s = data
        .blocks
        .iter()
        .map(|b| {
            let k = b.size as f64;
            let mut eta = 10f64.max(k.sqrt());
            eta = eta.max(BlockData::dense(&b.constant, b.size).norm());
            for entries in &b.coeffs {
                eta = eta.max(BlockData::dense(entries, b.size).norm());
            }
            DMatrix::identity(b.size, b.size) * eta
        })
        .collect();
    Iterate {
        x,
        y: DVector::zeros(data.nvars),
        s,
    }
}

fn ipm(data: &ConeData, tol: f64, max_iter: usize) -> Outcome {
    let mut it = initial_point(data);
    let dim: usize = data.blocks.iter().map(|b| b.size).sum();
    let f0: Vec<DMatrix<f64>> = data
        .blocks
        .iter()
        .map(|b| BlockData::dense(&b.constant, b.size))
        .collect();
    let f0_norm = f0.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt();
    let c_norm = data.c.norm();
    let mut stalled = 0usize;

    let finish = |status, it: Iterate, iterations, pobj, dobj, residuals| Outcome {
        status,
        iterate: it,
        iterations,
        pobj,
        dobj,
        residuals,
    };

    for iter in 0..=max_iter {
        let fy = data.apply_adjoint(&it.y, true);
        let rd: Vec<DMatrix<f64>> = fy.iter().zip(&it.s).map(|(a, s)| a - s).collect();
        let rp = &data.c - data.apply(&it.x);
        let pobj = data.c0 + data.c.dot(&it.y);
        let dobj = data.c0 - f0.iter().zip(&it.x).map(|(f, x)| frob_inner(f, x)).sum::<f64>();
        let xs: f64 = it.x.iter().zip(&it.s).map(|(x, s)| frob_inner(x, s)).sum();
        let mu = if dim > 0 { xs / dim as f64 } else { 0.0 };
        let rd_norm = rd.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt();
        let residuals = Residuals {
            primal: rd_norm / (1.0 + f0_norm),
            dual: rp.norm() / (1.0 + c_norm),
            gap: (pobj - dobj).abs(),
        };
        let scale = 1.0 + pobj.abs() + dobj.abs();
        let rel_gap = residuals.gap / scale;
        let rel_comp = xs.abs() / scale;

        if !(pobj.is_finite() && dobj.is_finite() && mu.is_finite()) {
            return finish(SolveStatus::NumericalFailure, it, iter, pobj, dobj, residuals);
        }
        if residuals.primal.max(residuals.dual).max(rel_gap).max(rel_comp) <= tol {
            return finish(SolveStatus::Optimal, it, iter, pobj, dobj, residuals);
        }
        let xmax = it.x.iter().map(|m| m.amax()).fold(0.0, f64::max);
        if xmax > DIVERGENCE {
            return finish(SolveStatus::Infeasible, it, iter, pobj, dobj, residuals);
        }
        if it.y.amax() > DIVERGENCE {
            return finish(SolveStatus::Unbounded, it, iter, pobj, dobj, residuals);
        }
        if iter == max_iter {
            return finish(SolveStatus::MaxIterations, it, iter, pobj, dobj, residuals);
        }

        let mut scalings = Vec::with_capacity(it.x.len());
        let mut linv_x = Vec::with_capacity(it.x.len());
        let mut linv_s = Vec::with_capacity(it.s.len());
        for (x, s) in it.x.iter().zip(&it.s) {
            let (Some((lx, lxi)), Some((_, lsi))) = (psd_factor(x), psd_factor(s)) else {
                return finish(SolveStatus::NumericalFailure, it, iter, pobj, dobj, residuals);
            };
            let Some(sc) = nt_scaling(&lx, s) else {
                return finish(SolveStatus::NumericalFailure, it, iter, pobj, dobj, residuals);
            };
            scalings.push(sc);
            linv_x.push(lxi);
            linv_s.push(lsi);
        }
        let Some(factor) = SchurFactor::new(schur(data, &scalings)) else {
            return finish(SolveStatus::NumericalFailure, it, iter, pobj, dobj, residuals);
        };
        let wrdw: Vec<DMatrix<f64>> = scalings.iter().zip(&rd).map(|(sc, r)| &sc.w * r * &sc.w).collect();
        let f_wrdw = data.apply(&wrdw);

        let direction = |rc: &[DMatrix<f64>]| -> Option<Direction> {
            let h: Vec<DMatrix<f64>> = scalings
                .iter()
                .zip(rc)
                .map(|(sc, rc)| {
                    let k = sc.d.len();
                    let z = DMatrix::from_fn(k, k, |i, j| 2.0 * rc[(i, j)] / (sc.d[i] + sc.d[j]));
                    let mut h = &sc.g * z * sc.g.transpose();
                    symmetrize(&mut h);
                    h
                })
                .collect();
            let rhs = data.apply(&h) - &f_wrdw - &rp;
            let dy = factor.solve(&rhs)?;
            let fdy = data.apply_adjoint(&dy, false);
            let ds: Vec<DMatrix<f64>> = rd.iter().zip(&fdy).map(|(r, f)| r + f).collect();
            let dx = h
                .iter()
                .zip(&ds)
                .zip(&scalings)
                .map(|((h, ds), sc)| {
                    let mut dx = h - &sc.w * ds * &sc.w;
                    symmetrize(&mut dx);
                    dx
                })
                .collect();
            Some(Direction { dx, dy, ds })
        };

        let steps = |dir: &Direction| -> (f64, f64) {
            let ap = linv_x
                .iter()
                .zip(&dir.dx)
                .map(|(l, d)| max_step(l, d))
                .fold(f64::INFINITY, f64::min);
            let ad = linv_s
                .iter()
                .zip(&dir.ds)
                .map(|(l, d)| max_step(l, d))
                .fold(f64::INFINITY, f64::min);
            (ap, ad)
        };

        // predictor
        let rc_aff: Vec<DMatrix<f64>> = scalings
            .iter()
            .map(|sc| DMatrix::from_diagonal(&sc.d.map(|v| -v * v)))
            .collect();
        let Some(aff) = direction(&rc_aff) else {
            return finish(SolveStatus::NumericalFailure, it, iter, pobj, dobj, residuals);
        };
        let (ap, ad) = steps(&aff);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mu_aff: f64 = it
            .x
            .iter()
            .zip(&aff.dx)
            .zip(it.s.iter().zip(&aff.ds))
            .map(|((x, dx), (s, ds))| frob_inner(&(x + dx * ap), &(s + ds * ad)))
            .sum::<f64>()
            / dim.max(1) as f64;
        let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

        // corrector
        let rc: Vec<DMatrix<f64>> = scalings
            .iter()
            .zip(aff.dx.iter().zip(&aff.ds))
            .map(|(sc, (dx, ds))| {
                let dxs = &sc.ginv * dx * sc.ginv.transpose();
                let dss = sc.g.transpose() * ds * &sc.g;
                let mut prod = dxs * dss;
                symmetrize(&mut prod);
                let k = sc.d.len();
                let mut rc = -prod;
                for i in 0..k {
                    rc[(i, i)] += sigma * mu - sc.d[i] * sc.d[i];
                }
                rc
            })
            .collect();
        let Some(dir) = direction(&rc) else {
            return finish(SolveStatus::NumericalFailure, it, iter, pobj, dobj, residuals);
        };
        let (ap, ad) = steps(&dir);
        let ap = (STEP_FRACTION * ap).min(1.0);
        let ad = (STEP_FRACTION * ad).min(1.0);
        if ap < 1e-10 && ad < 1e-10 {
            stalled += 1;
            if stalled > 5 {
                return finish(SolveStatus::NumericalFailure, it, iter, pobj, dobj, residuals);
            }
        } else {
            stalled = 0;
        }
        for (x, dx) in it.x.iter_mut().zip(&dir.dx) {
            *x += dx * ap;
            symmetrize(x);
        }
        for (s, ds) in it.s.iter_mut().zip(&dir.ds) {
            *s += ds * ad;
            symmetrize(s);
        }
        it.y += &dir.dy * ad;
    }
    unreachable!("loop returns at max_iter")
}

fn run(data: ConeData, tol: f64, max_iter: usize) -> (Outcome, Reduction, usize) {
    let full_nvars = data.nvars;
    let blocks: Vec<usize> = data.blocks.iter().map(|b| b.size).collect();
    match reduce(data.clone()) {
        Reduced::Ready(reduced, reduction) => (ipm(&reduced, tol, max_iter), reduction, full_nvars),
        Reduced::Unbounded => {
            let it = Iterate {
                x: blocks.iter().map(|&k| DMatrix::zeros(k, k)).collect(),
                y: DVector::zeros(0),
                s: blocks.iter().map(|&k| DMatrix::zeros(k, k)).collect(),
            };
            (
                Outcome {
                    status: SolveStatus::Unbounded,
                    iterate: it,
                    iterations: 0,
                    pobj: f64::NEG_INFINITY,
                    dobj: f64::NEG_INFINITY,
                    residuals: Residuals::default(),
                },
                Reduction {
                    basis: Some(DMatrix::zeros(full_nvars, 0)),
                },
                full_nvars,
            )
        }
    }
}

fn moment_vector(layout: &crate::poly::BlockLayout, moments: &[ExponentVector], y: &DVector<f64>) -> MomentVector {
    let truncation = moments.iter().map(ExponentVector::degree).max().unwrap_or(0);
    let mut u = MomentVector::new(layout.clone(), truncation);
    for (i, e) in moments.iter().enumerate() {
        let v = if i == 0 { 1.0 } else { y.get(i - 1).copied().unwrap_or(f64::NAN) };
        u.set(e.clone(), v).expect("degree within truncation");
    }
    u
}

fn lifted_y(outcome: &Outcome, reduction: &Reduction, nvars: usize) -> DVector<f64> {
    if outcome.iterate.y.len() == 0 && nvars > 0 && reduction.basis.as_ref().map(|b| b.ncols()) == Some(0) {
        return DVector::from_element(nvars, f64::NAN);
    }
    reduction.lift(&outcome.iterate.y)
}

/// Solves a semidefinite relaxation. Failures are reported in `status`.
pub fn solve_sdp(program: &ConicProgram, tol: f64, max_iter: usize) -> SolveReport {
    let data = ConeData::from_conic(program);
    let (outcome, reduction, nvars) = run(data, tol, max_iter);
    let y = lifted_y(&outcome, &reduction, nvars);
    let complementarity = outcome
        .iterate
        .x
        .iter()
        .zip(&outcome.iterate.s)
        .map(|(x, s)| frob_inner(x, s))
        .collect();
    let duals = program
        .blocks
        .iter()
        .zip(outcome.iterate.x)
        .map(|((label, _), x)| (label.clone(), x))
        .collect();
    SolveReport {
        status: outcome.status,
        primal_objective: outcome.pobj,
        dual_objective: outcome.dobj,
        moments: moment_vector(&program.layout, &program.moments, &y),
        dual_blocks: DualBlocks::Psd(duals),
        iterations: outcome.iterations,
        residuals: outcome.residuals,
        complementarity,
    }
}

/// Solves a Krivine LP with the same iteration on 1×1 blocks.
pub fn solve_lp(program: &LinearProgram, tol: f64) -> SolveReport {
    solve_lp_with(program, tol, DEFAULT_MAX_ITER)
}

pub fn solve_lp_with(program: &LinearProgram, tol: f64, max_iter: usize) -> SolveReport {
    let data = ConeData::from_lp(program);
    let (outcome, reduction, nvars) = run(data, tol, max_iter);
    let y = lifted_y(&outcome, &reduction, nvars);
    let complementarity = outcome
        .iterate
        .x
        .iter()
        .zip(&outcome.iterate.s)
        .map(|(x, s)| frob_inner(x, s))
        .collect();
    let duals = program
        .rows
        .iter()
        .zip(&outcome.iterate.x)
        .map(|((label, _), x)| (label.clone(), x[(0, 0)]))
        .collect();
    SolveReport {
        status: outcome.status,
        primal_objective: outcome.pobj,
        dual_objective: outcome.dobj,
        moments: moment_vector(&program.layout, &program.moments, &y),
        dual_blocks: DualBlocks::Linear(duals),
        iterations: outcome.iterations,
        residuals: outcome.residuals,
        complementarity,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{instantiate, min_eigenvalue};
    use crate::poly::{int, ratio, BlockLayout, Polynomial, ProblemInstance};
    use crate::relaxation::{assemble_krivine, assemble_sparse_schmudgen, normalize_krivine, Family};

    fn interval(f: Polynomial) -> ProblemInstance {
        let l = BlockLayout::with_counts(1, 0, 0).unwrap();
        let g = Polynomial::one(1).sub(&Polynomial::var(1, 0).pow(2)).unwrap();
        ProblemInstance::new(l, f, vec![g], vec![]).unwrap()
    }

    fn solve(f: Polynomial, r: u32) -> SolveReport {
        let p = assemble_sparse_schmudgen(&interval(f), r).unwrap();
        solve_sdp(&p, DEFAULT_TOL, DEFAULT_MAX_ITER)
    }

    #[test]
    fn square_on_interval() {
        let rep = solve(Polynomial::var(1, 0).pow(2), 1);
        assert_eq!(rep.status, SolveStatus::Optimal);
        assert!(rep.primal_objective.abs() < 1e-6, "{}", rep.primal_objective);
        assert!(rep.dual_objective.abs() < 1e-6);
    }

    #[test]
    fn constant_objective() {
        let rep = solve(Polynomial::constant(1, int(1)), 1);
        assert_eq!(rep.status, SolveStatus::Optimal);
        assert!((rep.primal_objective - 1.0).abs() < 1e-8);
        assert!((rep.dual_objective - 1.0).abs() < 1e-8);
    }

    #[test]
    fn linear_on_interval() {
        let rep = solve(Polynomial::var(1, 0), 1);
        assert_eq!(rep.status, SolveStatus::Optimal);
        assert!((rep.primal_objective + 1.0).abs() < 1e-6);
        assert!((rep.dual_objective + 1.0).abs() < 1e-6);
        assert!(rep.residuals.gap <= 1e-6);
        // moments satisfy the blocks
        let p = assemble_sparse_schmudgen(&interval(Polynomial::var(1, 0)), 1).unwrap();
        for (_, m) in &p.blocks {
            let v = instantiate(m, &rep.moments).unwrap();
            assert!(min_eigenvalue(&v) > -1e-7);
        }
        if let DualBlocks::Psd(blocks) = &rep.dual_blocks {
            assert_eq!(blocks.len(), 3);
            for (_, g) in blocks {
                assert!(min_eigenvalue(g) > -1e-9);
            }
        } else {
            panic!("expected PSD duals");
        }
    }

    #[test]
    fn deterministic() {
        let a = solve(Polynomial::var(1, 0).pow(3), 2);
        let b = solve(Polynomial::var(1, 0).pow(3), 2);
        assert_eq!(a.primal_objective, b.primal_objective);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn univariate_closed_forms() {
        let x = Polynomial::var(1, 0);
        let one = Polynomial::one(1);
        // minima on [-1, 1]
        let cases = [
            (x.pow(2).sub(&x).unwrap(), -0.25),
            (x.pow(3), -1.0),
            (one.sub(&x.pow(2)).unwrap(), 0.0),
            (x.pow(4).sub(&x.pow(2)).unwrap(), -0.25),
            (x.scale(&int(2)).add(&x.pow(2)).unwrap(), -1.0),
        ];
        for (f, expect) in cases {
            let rep = solve(f.clone(), 3);
            assert_eq!(rep.status, SolveStatus::Optimal);
            assert!((rep.primal_objective - expect).abs() < 1e-6, "{:?} {}", f, rep.primal_objective);
        }
    }

    fn lin_interval(f: Polynomial) -> ProblemInstance {
        let l = BlockLayout::with_counts(1, 0, 0).unwrap();
        let g = Polynomial::one(1).sub(&Polynomial::var(1, 0)).unwrap().scale(&ratio(1, 2));
        let inst = ProblemInstance::new(l, f, vec![g], vec![]).unwrap();
        normalize_krivine(&inst, &[int(1)]).unwrap()
    }

    #[test]
    fn lp_cone_identity() {
        let f = Polynomial::one(1).add(&Polynomial::var(1, 0)).unwrap();
        let lp = assemble_krivine(&lin_interval(f), 2).unwrap();
        let rep = solve_lp(&lp, 1e-9);
        assert_eq!(rep.status, SolveStatus::Optimal);
        assert!(rep.primal_objective.abs() < 1e-7);
        assert!(rep.dual_objective.abs() < 1e-7);
        if let DualBlocks::Linear(rows) = &rep.dual_blocks {
            assert!(rows.iter().all(|(_, c)| *c >= 0.0));
        }
    }

    #[test]
    fn lp_constant() {
        let lp = assemble_krivine(&lin_interval(Polynomial::constant(1, int(5))), 1).unwrap();
        let rep = solve_lp(&lp, 1e-9);
        assert_eq!(rep.status, SolveStatus::Optimal);
        assert!((rep.primal_objective - 5.0).abs() < 1e-7);
    }

    #[test]
    fn lp_contradiction_is_infeasible() {
        let mut lp = assemble_krivine(&lin_interval(Polynomial::var(1, 0)), 1).unwrap();
        let zero = ExponentVector::zero(1);
        let label = RowLabel {
            family: Family::Xy,
            alpha: vec![0],
            beta: vec![0],
            polynomial: Polynomial::constant(1, int(-1)),
        };
        lp.rows.push((label, LinearForm(vec![(int(-1), zero)])));
        let rep = solve_lp(&lp, 1e-9);
        assert_eq!(rep.status, SolveStatus::Infeasible);
    }

    #[test]
    fn lp_missing_objective_direction_is_unbounded() {
        let l = BlockLayout::with_counts(1, 0, 0).unwrap();
        let g = Polynomial::one(1).sub(&Polynomial::var(1, 0).pow(2)).unwrap();
        let inst = ProblemInstance::new(l, Polynomial::var(1, 0), vec![g], vec![]).unwrap();
        let inst = normalize_krivine(&inst, &[int(1)]).unwrap();
        let rep = solve_lp(&assemble_krivine(&inst, 2).unwrap(), 1e-9);
        assert_eq!(rep.status, SolveStatus::Unbounded);
        assert_eq!(rep.bound(), f64::NEG_INFINITY);
    }
}
