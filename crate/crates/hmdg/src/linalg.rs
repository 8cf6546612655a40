//! Sparse linear algebra for the condensed trace systems (SPD) and the
//! DG transport systems (nonsymmetric).
//!
//! Solvers: preconditioned conjugate gradients and restarted GMRES(30),
//! both with a dense LU fallback for small systems. Diagonal (Jacobi)
//! preconditioning is the default; incomplete factorizations IC(0) and
//! ILU(0) are available for the time-stepping loops where thousands of
//! slowly varying systems are solved in sequence.

use nalgebra::{DMatrix, DVector};

use crate::{invalid, Error, Result};

/// Square CSR matrix with sorted, duplicate-free column indices per row.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r >= n || c >= n {
                return Err(invalid(format!("triplet index ({r},{c}) out of range for n={n}")));
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] = col_idx.len();
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] = row_ptr[r + 1].max(row_ptr[r]);
        }
        Ok(Self { n, row_ptr, col_idx, values })
    }

    /// Builds the zero matrix over an explicit sparsity pattern; pairs may
    /// repeat and need not be sorted.
    pub fn from_pattern(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut all: Vec<(usize, usize)> = pairs.into_iter().collect();
        for &(r, c) in &all {
            if r >= n || c >= n {
                return Err(invalid(format!("pattern index ({r},{c}) out of range")));
            }
        }
        all.sort_unstable();
        all.dedup();
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(all.len());
        for (r, c) in all {
            col_idx.push(c);
            row_ptr[r + 1] = col_idx.len();
        }
        for r in 0..n {
            row_ptr[r + 1] = row_ptr[r + 1].max(row_ptr[r]);
        }
        let values = vec![0.0; col_idx.len()];
        Ok(Self { n, row_ptr, col_idx, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Position of entry (r, c) in the value array, if present.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        self.col_idx[lo..hi].binary_search(&c).ok().map(|k| lo + k)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn add_at(&mut self, pos: usize, v: f64) {
        self.values[pos] += v;
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|r| self.position(r, r).map(|p| self.values[p]).unwrap_or(0.0))
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest |A_ij - A_ji| over all stored entries.
    pub fn symmetry_defect(&self) -> f64 {
        let mut defect = 0.0f64;
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                let mirrored = self.position(c, r).map(|p| self.values[p]).unwrap_or(0.0);
                defect = defect.max((self.values[k] - mirrored).abs());
            }
        }
        defect
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.col_idx[k])] = self.values[k];
            }
        }
        m
    }

    /// Replaces row/column `dof` by the identity row, for pinning a dof
    /// whose prescribed value is zero.
    pub fn pin_dof(&mut self, dof: usize) {
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if r == dof || self.col_idx[k] == dof {
                    self.values[k] = if r == self.col_idx[k] { 1.0 } else { 0.0 };
                }
            }
        }
    }
}

/// Iteration count of a solve, or `Direct` for the dense fallback.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Iterations {
    Direct,
    Iterative(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct LinearSolveReport {
    pub iterations: Iterations,
    /// True relative residual ||b - Ax|| / ||b||, recomputed after the solve.
    pub relative_residual: f64,
    pub success: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precond {
    Identity,
    Jacobi,
    Ic0,
    Ilu0,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Systems up to this size go through dense LU.
    pub dense_threshold: usize,
    pub preconditioner: Precond,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 200_000, dense_threshold: 2000, preconditioner: Precond::Jacobi }
    }
}

const SYMMETRY_TOL: f64 = 1e-12;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn true_relative_residual(a: &SparseMatrix, b: &[f64], x: &[f64]) -> f64 {
    let mut ax = vec![0.0; b.len()];
    a.matvec(x, &mut ax);
    let r: f64 = b.iter().zip(&ax).map(|(bi, ai)| (bi - ai) * (bi - ai)).sum::<f64>().sqrt();
    let nb = norm(b);
    if nb == 0.0 {
        r
    } else {
        r / nb
    }
}

/// Conjugate gradients with Jacobi preconditioning (dense LU below the
/// size threshold). Rejects matrices that are not symmetric.
pub fn solve_spd(
    a: &SparseMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, LinearSolveReport)> {
    let opts = SolveOptions { tol, max_iter, ..Default::default() };
    solve_spd_with(a, b, &opts, None)
}

pub fn solve_spd_with(
    a: &SparseMatrix,
    b: &[f64],
    opts: &SolveOptions,
    x0: Option<&[f64]>,
) -> Result<(Vec<f64>, LinearSolveReport)> {
    let defect = a.symmetry_defect();
    if defect > SYMMETRY_TOL * a.max_abs().max(f64::MIN_POSITIVE) {
        return Err(invalid(format!(
            "matrix is not symmetric (defect {defect:.3e} vs max |A| {:.3e})",
            a.max_abs()
        )));
    }
    if a.n() <= opts.dense_threshold {
        return solve_dense(a, b, opts.tol);
    }
    let pc = build_preconditioner(a, opts.preconditioner)?;
    pcg(a, b, opts, x0, pc.as_ref())
}

/// Restarted GMRES(30) with Jacobi preconditioning (dense LU below the
/// size threshold) for general nonsingular systems.
pub fn solve_general(
    a: &SparseMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, LinearSolveReport)> {
    let opts = SolveOptions { tol, max_iter, ..Default::default() };
    solve_general_with(a, b, &opts, None)
}

pub fn solve_general_with(
    a: &SparseMatrix,
    b: &[f64],
    opts: &SolveOptions,
    x0: Option<&[f64]>,
) -> Result<(Vec<f64>, LinearSolveReport)> {
    if a.n() <= opts.dense_threshold {
        return solve_dense(a, b, opts.tol);
    }
    let pc = build_preconditioner(a, opts.preconditioner)?;
    gmres(a, b, opts, x0, pc.as_ref(), 30)
}

fn solve_dense(a: &SparseMatrix, b: &[f64], tol: f64) -> Result<(Vec<f64>, LinearSolveReport)> {
    let dense = a.to_dense();
    let rhs = DVector::from_column_slice(b);
    let lu = dense.lu();
    let x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::SolverFailure("dense LU: singular matrix".into()))?;
    let xs: Vec<f64> = x.iter().copied().collect();
    let rel = true_relative_residual(a, b, &xs);
    let success = rel <= tol.max(1e-9);
    if !success {
        return Err(Error::SolverFailure(format!(
            "dense LU residual {rel:.3e} exceeds tolerance"
        )));
    }
    let report =
        LinearSolveReport { iterations: Iterations::Direct, relative_residual: rel, success };
    Ok((xs, report))
}

// ---------------------------------------------------------------------------
// Preconditioners
// ---------------------------------------------------------------------------

pub trait Preconditioner: Sync {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

struct IdentityPc;

impl Preconditioner for IdentityPc {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

struct JacobiPc {
    inv_diag: Vec<f64>,
}

impl Preconditioner for JacobiPc {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for i in 0..r.len() {
            z[i] = r[i] * self.inv_diag[i];
        }
    }
}

/// Incomplete Cholesky on the lower-triangular pattern of A.
struct Ic0Pc {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>, // L, including the diagonal
}

impl Ic0Pc {
    fn build(a: &SparseMatrix) -> Option<Self> {
        let n = a.n();
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for r in 0..n {
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                let c = a.col_idx[k];
                if c <= r {
                    col_idx.push(c);
                    values.push(a.values[k]);
                }
            }
            row_ptr[r + 1] = col_idx.len();
            if row_ptr[r + 1] == row_ptr[r] || col_idx[row_ptr[r + 1] - 1] != r {
                return None; // missing diagonal
            }
        }
        for i in 0..n {
            let (lo_i, hi_i) = (row_ptr[i], row_ptr[i + 1]);
            for ki in lo_i..hi_i {
                let k = col_idx[ki];
                // Sparse dot over columns < k of rows i and k.
                let mut s = values[ki];
                let (mut pi, mut pk) = (lo_i, row_ptr[k]);
                while pi < ki && pk < row_ptr[k + 1] && col_idx[pk] < k {
                    match col_idx[pi].cmp(&col_idx[pk]) {
                        std::cmp::Ordering::Less => pi += 1,
                        std::cmp::Ordering::Greater => pk += 1,
                        std::cmp::Ordering::Equal => {
                            s -= values[pi] * values[pk];
                            pi += 1;
                            pk += 1;
                        }
                    }
                }
                if k < i {
                    values[ki] = s / values[row_ptr[k + 1] - 1];
                } else {
                    if s <= 0.0 {
                        return None; // breakdown
                    }
                    values[ki] = s.sqrt();
                }
            }
        }
        Some(Self { row_ptr, col_idx, values })
    }
}

impl Preconditioner for Ic0Pc {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        // Forward solve L y = r.
        for i in 0..n {
            let mut s = r[i];
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            for k in lo..hi - 1 {
                s -= self.values[k] * z[self.col_idx[k]];
            }
            z[i] = s / self.values[hi - 1];
        }
        // Backward solve L^T z = y, column-oriented on L.
        for i in (0..n).rev() {
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let zi = z[i] / self.values[hi - 1];
            z[i] = zi;
            for k in lo..hi - 1 {
                z[self.col_idx[k]] -= self.values[k] * zi;
            }
        }
    }
}

/// ILU(0): incomplete LU on the pattern of A with unit lower diagonal.
struct Ilu0Pc {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    diag_pos: Vec<usize>,
}

impl Ilu0Pc {
    fn build(a: &SparseMatrix) -> Option<Self> {
        let n = a.n();
        let row_ptr = a.row_ptr.clone();
        let col_idx = a.col_idx.clone();
        let mut values = a.values.clone();
        let mut diag_pos = vec![usize::MAX; n];
        for r in 0..n {
            diag_pos[r] = a.position(r, r)?;
        }
        for i in 0..n {
            for ki in row_ptr[i]..row_ptr[i + 1] {
                let k = col_idx[ki];
                if k >= i {
                    break;
                }
                let pivot = values[diag_pos[k]];
                if pivot == 0.0 {
                    return None;
                }
                let lik = values[ki] / pivot;
                values[ki] = lik;
                // Subtract lik * (upper part of row k) where the pattern allows.
                let mut pj = ki + 1;
                for pk in diag_pos[k] + 1..row_ptr[k + 1] {
                    let cj = col_idx[pk];
                    while pj < row_ptr[i + 1] && col_idx[pj] < cj {
                        pj += 1;
                    }
                    if pj < row_ptr[i + 1] && col_idx[pj] == cj {
                        values[pj] -= lik * values[pk];
                    }
                }
            }
            if values[diag_pos[i]] == 0.0 {
                return None;
            }
        }
        Some(Self { row_ptr, col_idx, values, diag_pos })
    }
}

impl Preconditioner for Ilu0Pc {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        for i in 0..n {
            let mut s = r[i];
            for k in self.row_ptr[i]..self.diag_pos[i] {
                s -= self.values[k] * z[self.col_idx[k]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in self.diag_pos[i] + 1..self.row_ptr[i + 1] {
                s -= self.values[k] * z[self.col_idx[k]];
            }
            z[i] = s / self.values[self.diag_pos[i]];
        }
    }
}

fn build_preconditioner(a: &SparseMatrix, kind: Precond) -> Result<Box<dyn Preconditioner>> {
    match kind {
        Precond::Identity => Ok(Box::new(IdentityPc)),
        Precond::Jacobi => {
            let inv_diag: Vec<f64> = a
                .diagonal()
                .into_iter()
                .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
                .collect();
            Ok(Box::new(JacobiPc { inv_diag }))
        }
        // Incomplete factorizations fall back to Jacobi on breakdown.
        Precond::Ic0 => match Ic0Pc::build(a) {
            Some(pc) => Ok(Box::new(pc)),
            None => build_preconditioner(a, Precond::Jacobi),
        },
        Precond::Ilu0 => match Ilu0Pc::build(a) {
            Some(pc) => Ok(Box::new(pc)),
            None => build_preconditioner(a, Precond::Jacobi),
        },
    }
}

// ---------------------------------------------------------------------------
// Iterative solvers
// ---------------------------------------------------------------------------

fn pcg(
    a: &SparseMatrix,
    b: &[f64],
    opts: &SolveOptions,
    x0: Option<&[f64]>,
    pc: &dyn Preconditioner,
) -> Result<(Vec<f64>, LinearSolveReport)> {
    let n = a.n();
    let nb = norm(b);
    if nb == 0.0 {
        let report = LinearSolveReport {
            iterations: Iterations::Iterative(0),
            relative_residual: 0.0,
            success: true,
        };
        return Ok((vec![0.0; n], report));
    }
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut r = vec![0.0; n];
    a.matvec(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z = vec![0.0; n];
    pc.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    let target = opts.tol * nb;
    let mut iters = 0usize;
    while iters < opts.max_iter {
        if norm(&r) <= target {
            let rel = true_relative_residual(a, b, &x);
            if rel <= opts.tol {
                let report = LinearSolveReport {
                    iterations: Iterations::Iterative(iters),
                    relative_residual: rel,
                    success: true,
                };
                return Ok((x, report));
            }
            // Recursion residual drifted; restart from the true residual.
            a.matvec(&x, &mut r);
            for i in 0..n {
                r[i] = b[i] - r[i];
            }
            pc.apply(&r, &mut z);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
        }
        a.matvec(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 || !pq.is_finite() {
            return Err(Error::SolverFailure(format!(
                "CG: matrix not positive definite (p^T A p = {pq:.3e} at iteration {iters})"
            )));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        pc.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        iters += 1;
    }
    let rel = true_relative_residual(a, b, &x);
    Err(Error::SolverFailure(format!(
        "CG stagnated after {iters} iterations (relative residual {rel:.3e})"
    )))
}

fn gmres(
    a: &SparseMatrix,
    b: &[f64],
    opts: &SolveOptions,
    x0: Option<&[f64]>,
    pc: &dyn Preconditioner,
    restart: usize,
) -> Result<(Vec<f64>, LinearSolveReport)> {
    let n = a.n();
    let nb = norm(b);
    if nb == 0.0 {
        let report = LinearSolveReport {
            iterations: Iterations::Iterative(0),
            relative_residual: 0.0,
            success: true,
        };
        return Ok((vec![0.0; n], report));
    }
    let target = opts.tol * nb;
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut total_iters = 0usize;
    let mut scratch = vec![0.0; n];

    loop {
        let mut r = vec![0.0; n];
        a.matvec(&x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let beta = norm(&r);
        if beta <= target {
            let rel = true_relative_residual(a, b, &x);
            let report = LinearSolveReport {
                iterations: Iterations::Iterative(total_iters),
                relative_residual: rel,
                success: rel <= opts.tol,
            };
            return Ok((x, report));
        }
        if total_iters >= opts.max_iter {
            let rel = true_relative_residual(a, b, &x);
            return Err(Error::SolverFailure(format!(
                "GMRES stagnated after {total_iters} iterations (relative residual {rel:.3e})"
            )));
        }

        let m = restart;
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|ri| ri / beta).collect());
        let mut h = vec![vec![0.0f64; m]; m + 1];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![0.0f64; m];
        let mut g = vec![0.0f64; m + 1];
        g[0] = beta;
        let mut k_used = 0;

        for j in 0..m {
            // w = A M^{-1} v_j  (right preconditioning)
            pc.apply(&v[j], &mut scratch);
            let mut w = vec![0.0; n];
            a.matvec(&scratch, &mut w);
            for i in 0..=j {
                let hij = dot(&w, &v[i]);
                h[i][j] = hij;
                for l in 0..n {
                    w[l] -= hij * v[i][l];
                }
            }
            let hnorm = norm(&w);
            h[j + 1][j] = hnorm;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = (h[j][j] * h[j][j] + h[j + 1][j] * h[j + 1][j]).sqrt();
            if denom == 0.0 {
                k_used = j;
                break;
            }
            cs[j] = h[j][j] / denom;
            sn[j] = h[j + 1][j] / denom;
            h[j][j] = denom;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            total_iters += 1;
            k_used = j + 1;
            if g[j + 1].abs() <= target || hnorm == 0.0 || total_iters >= opts.max_iter {
                break;
            }
            v.push(w.iter().map(|wi| wi / hnorm).collect());
        }

        let k = k_used;
        if k == 0 {
            let rel = true_relative_residual(a, b, &x);
            return Err(Error::SolverFailure(format!(
                "GMRES breakdown (relative residual {rel:.3e})"
            )));
        }
        let mut y = vec![0.0f64; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut update = vec![0.0; n];
        for j in 0..k {
            for l in 0..n {
                update[l] += y[j] * v[j][l];
            }
        }
        pc.apply(&update, &mut scratch);
        for l in 0..n {
            x[l] += scratch[l];
        }
    }
}
