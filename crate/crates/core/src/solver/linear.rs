//! Sparse linear solvers for the momentum and pressure-correction systems.
//!
//! All reductions go through [`crate::par::sum`], so iteration counts and
//! results do not depend on the thread count.

use thiserror::Error;

use crate::par;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearError {
    #[error("linear solver diverged after {iterations} iterations (residual {residual:e})")]
    Diverged { iterations: usize, residual: f64 },
}

/// Square matrix stored as a diagonal plus CSR off-diagonal entries:
/// `(A x)_i = diag_i x_i + sum_k vals_k x_{cols_k}`.
#[derive(Debug, Clone, Default)]
pub struct CsrMatrix {
    pub diag: Vec<f64>,
    pub offsets: Vec<u32>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Empty matrix with the given off-diagonal pattern.
    pub fn with_pattern(offsets: Vec<u32>, cols: Vec<u32>) -> Self {
        let n = offsets.len() - 1;
        let nnz = cols.len();
        CsrMatrix {
            diag: vec![0.0; n],
            offsets,
            cols,
            vals: vec![0.0; nnz],
        }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn row(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i] as usize..self.offsets[i + 1] as usize
    }

    #[inline]
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let mut s = self.diag[i] * x[i];
        for k in self.row(i) {
            s += self.vals[k] * x[self.cols[k] as usize];
        }
        s
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        par::for_each_mut(y, |i, yi| *yi = self.row_dot(i, x));
    }

    /// `r = b - A x`.
    pub fn residual(&self, x: &[f64], b: &[f64], r: &mut [f64]) {
        par::for_each_mut(r, |i, ri| *ri = b[i] - self.row_dot(i, x));
    }

    pub fn residual_l1(&self, x: &[f64], b: &[f64]) -> f64 {
        par::sum(self.n(), |i| (b[i] - self.row_dot(i, x)).abs())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    par::sum(a.len(), |i| a[i] * b[i])
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    par::max(a.len(), |i| a[i].abs())
}

/// Stopping rule: the 2-norm of the residual must drop by `reduction`, and,
/// when `absolute_inf` is set, every residual entry must also fall below it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub reduction: f64,
    pub absolute_inf: Option<f64>,
    pub max_iterations: usize,
}

impl Tolerance {
    fn met(&self, r2: f64, r0: f64, r: &[f64]) -> bool {
        if r2 == 0.0 {
            return true;
        }
        if r2 > self.reduction * r0 {
            return false;
        }
        match self.absolute_inf {
            Some(tol) => norm_inf(r) <= tol,
            None => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub initial: f64,
    pub last: f64,
    pub converged: bool,
}

pub trait Preconditioner: Sync {
    /// `z = M^-1 r`.
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &CsrMatrix) -> Self {
        Jacobi {
            inv_diag: a.diag.iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect(),
        }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        par::for_each_mut(z, |i, zi| *zi = self.inv_diag[i] * r[i]);
    }
}

fn check_finite(value: f64, iterations: usize) -> Result<(), LinearError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(LinearError::Diverged {
            iterations,
            residual: value,
        })
    }
}

/// Preconditioned conjugate gradients for symmetric positive definite `a`.
pub fn pcg<P: Preconditioner>(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    pre: &P,
    tol: Tolerance,
) -> Result<SolveStats, LinearError> {
    let n = a.n();
    let mut r = vec![0.0; n];
    a.residual(x, b, &mut r);
    let r0 = norm2(&r);
    check_finite(r0, 0)?;
    let mut stats = SolveStats {
        iterations: 0,
        initial: r0,
        last: r0,
        converged: false,
    };
    if r0 == 0.0 {
        stats.converged = true;
        return Ok(stats);
    }
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 1..=tol.max_iterations {
        a.apply(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 || !pq.is_finite() {
            check_finite(pq, it)?;
            break;
        }
        let alpha = rz / pq;
        par::for_each_mut(x, |i, xi| *xi += alpha * p[i]);
        par::for_each_mut(&mut r, |i, ri| *ri -= alpha * q[i]);
        let r2 = norm2(&r);
        check_finite(r2, it)?;
        stats.iterations = it;
        stats.last = r2;
        if tol.met(r2, r0, &r) {
            stats.converged = true;
            break;
        }
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        par::for_each_mut(&mut p, |i, pi| *pi = z[i] + beta * *pi);
    }
    if stats.last > 1e8 * stats.initial.max(f64::MIN_POSITIVE) {
        return Err(LinearError::Diverged {
            iterations: stats.iterations,
            residual: stats.last,
        });
    }
    Ok(stats)
}

/// Jacobi-preconditioned BiCGStab for nonsymmetric `a`. A claimed
/// convergence is confirmed against the true residual `b - A x`; on a
/// mismatch the iteration restarts from there.
pub fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    tol: Tolerance,
) -> Result<SolveStats, LinearError> {
    let n = a.n();
    let pre = Jacobi::new(a);
    let mut r = vec![0.0; n];
    a.residual(x, b, &mut r);
    let r0 = norm2(&r);
    check_finite(r0, 0)?;
    let mut stats = SolveStats {
        iterations: 0,
        initial: r0,
        last: r0,
        converged: r0 == 0.0,
    };
    if r0 == 0.0 {
        return Ok(stats);
    }
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut it = 0;
    'restart: while it < tol.max_iterations {
        let r_hat = r.clone();
        let mut rho = 1.0;
        let mut alpha = 1.0;
        let mut omega = 1.0;
        v.iter_mut().for_each(|e| *e = 0.0);
        p.iter_mut().for_each(|e| *e = 0.0);
        let mut claimed = false;
        while it < tol.max_iterations {
            it += 1;
            stats.iterations = it;
            let rho_new = dot(&r_hat, &r);
            check_finite(rho_new, it)?;
            if rho_new == 0.0 {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            par::for_each_mut(&mut p, |i, pi| *pi = r[i] + beta * (*pi - omega * v[i]));
            pre.apply(&p, &mut y);
            a.apply(&y, &mut v);
            let rv = dot(&r_hat, &v);
            if rv == 0.0 {
                break;
            }
            alpha = rho / rv;
            par::for_each_mut(&mut s, |i, si| *si = r[i] - alpha * v[i]);
            let s2 = norm2(&s);
            check_finite(s2, it)?;
            if tol.met(s2, r0, &s) {
                par::for_each_mut(x, |i, xi| *xi += alpha * y[i]);
                claimed = true;
                break;
            }
            pre.apply(&s, &mut z);
            a.apply(&z, &mut t);
            let tt = dot(&t, &t);
            omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
            par::for_each_mut(x, |i, xi| *xi += alpha * y[i] + omega * z[i]);
            par::for_each_mut(&mut r, |i, ri| *ri = s[i] - omega * t[i]);
            let r2 = norm2(&r);
            check_finite(r2, it)?;
            stats.last = r2;
            if tol.met(r2, r0, &r) {
                claimed = true;
                break;
            }
            if omega == 0.0 {
                break;
            }
        }
        a.residual(x, b, &mut r);
        stats.last = norm2(&r);
        check_finite(stats.last, it)?;
        if tol.met(stats.last, r0, &r) {
            stats.converged = true;
            break 'restart;
        }
        if !claimed && stats.last >= r0 {
            // breakdown without progress
            break;
        }
    }
    if stats.last > 1e8 * r0 {
        return Err(LinearError::Diverged {
            iterations: stats.iterations,
            residual: stats.last,
        });
    }
    Ok(stats)
}

const COARSE_DIRECT: usize = 600;
const SMOOTH_SWEEPS: usize = 2;
const JACOBI_DAMPING: f64 = 0.8;

struct AmgLevel {
    /// Fine unknown -> coarse unknown.
    agg: Vec<u32>,
    /// Coarse-matrix slot for every fine diagonal entry.
    diag_slot: Vec<u32>,
    /// Coarse-matrix slot for every fine off-diagonal entry.
    off_slot: Vec<u32>,
    coarse: CsrMatrix,
}

/// Encodes a slot in the coarse matrix: values below `n` address the diagonal.
fn slot_add(m: &mut CsrMatrix, slot: u32, v: f64) {
    let n = m.n();
    let s = slot as usize;
    if s < n {
        m.diag[s] += v;
    } else {
        m.vals[s - n] += v;
    }
}

/// Unsmoothed aggregation multigrid with caller-supplied aggregates, used as
/// a symmetric V-cycle preconditioner (damped Jacobi smoothing, dense
/// Cholesky on the coarsest level).
pub struct AggregationAmg {
    fine: CsrMatrix,
    levels: Vec<AmgLevel>,
    coarse_factor: Vec<f64>,
}

impl AggregationAmg {
    /// `aggregates[k]` maps the unknowns of level `k` to those of level `k+1`.
    /// Levels are truncated once a level is small enough for a direct solve.
    pub fn new(pattern: &CsrMatrix, aggregates: Vec<Vec<u32>>) -> Self {
        let mut levels: Vec<AmgLevel> = Vec::new();
        let mut current = CsrMatrix::with_pattern(pattern.offsets.clone(), pattern.cols.clone());
        for agg in aggregates {
            if current.n() <= COARSE_DIRECT {
                break;
            }
            assert_eq!(agg.len(), current.n());
            let nc = agg.iter().map(|&a| a as usize + 1).max().unwrap_or(0);
            let mut rows: Vec<Vec<u32>> = vec![Vec::new(); nc];
            for i in 0..current.n() {
                let ci = agg[i];
                for k in current.row(i) {
                    let cj = agg[current.cols[k] as usize];
                    if cj != ci {
                        rows[ci as usize].push(cj);
                    }
                }
            }
            let mut offsets = Vec::with_capacity(nc + 1);
            let mut cols = Vec::new();
            offsets.push(0u32);
            for row in rows.iter_mut() {
                row.sort_unstable();
                row.dedup();
                cols.extend_from_slice(row);
                offsets.push(cols.len() as u32);
            }
            let coarse = CsrMatrix::with_pattern(offsets, cols);
            let diag_slot = agg.clone();
            let mut off_slot = vec![0u32; current.cols.len()];
            for i in 0..current.n() {
                let ci = agg[i] as usize;
                for k in current.row(i) {
                    let cj = agg[current.cols[k] as usize];
                    off_slot[k] = if cj as usize == ci {
                        ci as u32
                    } else {
                        let r = coarse.row(ci);
                        let pos = coarse.cols[r.clone()]
                            .binary_search(&cj)
                            .expect("coarse pattern contains every aggregated entry");
                        (nc + r.start + pos) as u32
                    };
                }
            }
            let next = CsrMatrix::with_pattern(coarse.offsets.clone(), coarse.cols.clone());
            levels.push(AmgLevel {
                agg,
                diag_slot,
                off_slot,
                coarse,
            });
            current = next;
        }
        AggregationAmg {
            fine: CsrMatrix::with_pattern(pattern.offsets.clone(), pattern.cols.clone()),
            levels,
            coarse_factor: Vec::new(),
        }
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len() + 1
    }

    /// Recomputes the coarse operators for new fine-level values (same pattern).
    pub fn update(&mut self, a: &CsrMatrix) {
        self.fine.diag.copy_from_slice(&a.diag);
        self.fine.vals.copy_from_slice(&a.vals);
        for k in 0..self.levels.len() {
            let (done, rest) = self.levels.split_at_mut(k);
            let src = if k == 0 { &self.fine } else { &done[k - 1].coarse };
            let lvl = &mut rest[0];
            lvl.coarse.diag.iter_mut().for_each(|v| *v = 0.0);
            lvl.coarse.vals.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..src.n() {
                slot_add(&mut lvl.coarse, lvl.diag_slot[i], src.diag[i]);
            }
            for k2 in 0..src.vals.len() {
                slot_add(&mut lvl.coarse, lvl.off_slot[k2], src.vals[k2]);
            }
        }
        let last = self.levels.last().map(|l| &l.coarse).unwrap_or(&self.fine);
        self.coarse_factor = cholesky(last);
    }

    fn matrix(&self, k: usize) -> &CsrMatrix {
        if k == 0 {
            &self.fine
        } else {
            &self.levels[k - 1].coarse
        }
    }

    fn cycle(&self, k: usize, b: &[f64], x: &mut [f64]) {
        let a = self.matrix(k);
        if k == self.levels.len() {
            x.copy_from_slice(b);
            cholesky_solve(&self.coarse_factor, a.n(), x);
            return;
        }
        let n = a.n();
        let mut r = vec![0.0; n];
        par::for_each_mut(x, |i, xi| *xi = JACOBI_DAMPING * b[i] / a.diag[i]);
        for _ in 1..SMOOTH_SWEEPS {
            jacobi_sweep(a, b, x, &mut r);
        }
        a.residual(x, b, &mut r);
        let lvl = &self.levels[k];
        let nc = lvl.coarse.n();
        let mut rc = vec![0.0; nc];
        for i in 0..n {
            rc[lvl.agg[i] as usize] += r[i];
        }
        let mut ec = vec![0.0; nc];
        self.cycle(k + 1, &rc, &mut ec);
        par::for_each_mut(x, |i, xi| *xi += ec[lvl.agg[i] as usize]);
        for _ in 0..SMOOTH_SWEEPS {
            jacobi_sweep(a, b, x, &mut r);
        }
    }
}

fn jacobi_sweep(a: &CsrMatrix, b: &[f64], x: &mut [f64], r: &mut [f64]) {
    a.residual(x, b, r);
    par::for_each_mut(x, |i, xi| *xi += JACOBI_DAMPING * r[i] / a.diag[i]);
}

impl Preconditioner for AggregationAmg {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.cycle(0, r, z);
    }
}

/// Dense lower-triangular Cholesky factor (row-major, n x n).
fn cholesky(a: &CsrMatrix) -> Vec<f64> {
    let n = a.n();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = a.diag[i];
        for k in a.row(i) {
            m[i * n + a.cols[k] as usize] = a.vals[k];
        }
    }
    for j in 0..n {
        let mut d = m[j * n + j];
        for k in 0..j {
            d -= m[j * n + k] * m[j * n + k];
        }
        let d = if d > 0.0 { d.sqrt() } else { 1e-300 };
        m[j * n + j] = d;
        for i in j + 1..n {
            let mut s = m[i * n + j];
            for k in 0..j {
                s -= m[i * n + k] * m[j * n + k];
            }
            m[i * n + j] = s / d;
        }
    }
    m
}

fn cholesky_solve(l: &[f64], n: usize, x: &mut [f64]) {
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[i * n + k] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1-D Dirichlet Laplacian.
    fn laplace(n: usize, shift: f64) -> CsrMatrix {
        let mut offsets = vec![0u32];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..n {
            if i > 0 {
                cols.push(i as u32 - 1);
                vals.push(-1.0);
            }
            if i + 1 < n {
                cols.push(i as u32 + 1);
                vals.push(-1.0 - shift);
            }
            offsets.push(cols.len() as u32);
        }
        CsrMatrix {
            diag: vec![2.0 + shift; n],
            offsets,
            cols,
            vals,
        }
    }

    fn tol(red: f64) -> Tolerance {
        Tolerance {
            reduction: red,
            absolute_inf: None,
            max_iterations: 2000,
        }
    }

    #[test]
    fn pcg_solves_laplacian() {
        let a = laplace(200, 0.0);
        let b: Vec<f64> = (0..200).map(|i| (i as f64 * 0.1).sin()).collect();
        let mut x = vec![0.0; 200];
        let st = pcg(&a, &b, &mut x, &Jacobi::new(&a), tol(1e-10)).unwrap();
        assert!(st.converged);
        assert!(a.residual_l1(&x, &b) < 1e-7);
    }

    #[test]
    fn bicgstab_solves_nonsymmetric() {
        let a = laplace(300, 0.5);
        let b: Vec<f64> = (0..300).map(|i| 1.0 + (i % 7) as f64).collect();
        let mut x = vec![0.0; 300];
        let st = bicgstab(&a, &b, &mut x, tol(1e-10)).unwrap();
        assert!(st.converged);
        assert!(a.residual_l1(&x, &b) < 1e-6);
    }

    #[test]
    fn amg_preconditioned_cg() {
        let n = 4096;
        let a = laplace(n, 0.0);
        let aggs = {
            let mut v = Vec::new();
            let mut size = n;
            while size > 8 {
                v.push((0..size as u32).map(|i| i / 2).collect::<Vec<_>>());
                size /= 2;
            }
            v
        };
        let mut amg = AggregationAmg::new(&a, aggs);
        amg.update(&a);
        assert!(amg.n_levels() > 2);
        let b: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let mut x = vec![0.0; n];
        let st = pcg(&a, &b, &mut x, &amg, tol(1e-8)).unwrap();
        let mut xj = vec![0.0; n];
        let long = Tolerance {
            max_iterations: 50_000,
            ..tol(1e-8)
        };
        let sj = pcg(&a, &b, &mut xj, &Jacobi::new(&a), long).unwrap();
        assert!(st.converged && sj.converged);
        assert!(st.iterations < sj.iterations / 4, "{} vs {}", st.iterations, sj.iterations);
    }

    #[test]
    fn absolute_tolerance_enforced() {
        let a = laplace(100, 0.0);
        let b = vec![1.0; 100];
        let mut x = vec![0.0; 100];
        let t = Tolerance {
            reduction: 0.5,
            absolute_inf: Some(1e-9),
            max_iterations: 1000,
        };
        pcg(&a, &b, &mut x, &Jacobi::new(&a), t).unwrap();
        let mut r = vec![0.0; 100];
        a.residual(&x, &b, &mut r);
        assert!(norm_inf(&r) <= 1e-9);
    }
}
