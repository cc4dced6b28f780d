//! Compressed sparse row matrices and preconditioned Krylov solvers.
//!
//! All reductions are evaluated sequentially in a fixed order so that runs are
//! bit-reproducible.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("entry ({row}, {col}) is outside a {n}x{n} matrix")]
    IndexOutOfRange { row: usize, col: usize, n: usize },
    #[error("{method} did not reach the tolerance in {iterations} iterations (relative residual {residual:e})")]
    NotConverged {
        method: Method,
        iterations: usize,
        residual: f64,
    },
    #[error("{method} broke down after {iterations} iterations (relative residual {residual:e})")]
    Breakdown {
        method: Method,
        iterations: usize,
        residual: f64,
    },
    #[error("preconditioner block at row {row} is singular")]
    SingularPreconditioner { row: usize },
    #[error("non-finite value in linear system")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Cg,
    BiCgStab,
    Gmres,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Cg => "CG",
            Method::BiCgStab => "BiCGStab",
            Method::Gmres => "GMRES",
        })
    }
}

/// Square sparse matrix in CSR layout with sorted, unique columns per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    /// `y = A x`.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            y[r] = s;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// Exact structural and numerical symmetry up to `tol·max|a_ij|`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        (0..self.n).all(|r| {
            let (cols, vals) = self.row(r);
            cols.iter()
                .zip(vals)
                .all(|(&c, &v)| (self.get(c, r) - v).abs() <= tol * scale)
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (r, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] = v;
            }
        }
        d
    }
}

/// Builds a matrix from `(row, col, value)` contributions, summing duplicates.
///
/// Contributions are sorted by position and, within a position, by value
/// before summation, so the result does not depend on their order.
pub fn assemble(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<CsrMatrix, LinalgError> {
    for &(r, c, v) in &triplets {
        if r >= n || c >= n {
            return Err(LinalgError::IndexOutOfRange { row: r, col: c, n });
        }
        if !v.is_finite() {
            return Err(LinalgError::NonFinite);
        }
    }
    triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
    let mut row_ptr = vec![0; n + 1];
    let mut cols = Vec::with_capacity(triplets.len());
    let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
    let mut last: Option<(usize, usize)> = None;
    for (r, c, v) in triplets {
        if last == Some((r, c)) {
            *vals.last_mut().unwrap() += v;
        } else {
            cols.push(c);
            vals.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
    }
    for r in 0..n {
        row_ptr[r + 1] += row_ptr[r];
    }
    Ok(CsrMatrix {
        n,
        row_ptr,
        cols,
        vals,
    })
}

/// Row-by-row matrix builder for stencil assembly.
///
/// Rows must be filled in increasing order; entries within a row may come in
/// any order and duplicates are summed in insertion order.
#[derive(Debug)]
pub struct RowBuilder {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    scratch: Vec<(usize, f64)>,
}

impl RowBuilder {
    pub fn new(n: usize, nnz_hint: usize) -> Self {
        Self {
            n,
            row_ptr: vec![0],
            cols: Vec::with_capacity(nnz_hint),
            vals: Vec::with_capacity(nnz_hint),
            scratch: Vec::with_capacity(16),
        }
    }

    /// Adds to the row currently being built.
    pub fn add(&mut self, col: usize, val: f64) {
        self.scratch.push((col, val));
    }

    /// Closes the current row.
    pub fn finish_row(&mut self) -> Result<(), LinalgError> {
        let row = self.row_ptr.len() - 1;
        self.scratch.sort_by_key(|e| e.0);
        let mut last = usize::MAX;
        for &(c, v) in &self.scratch {
            if c >= self.n {
                return Err(LinalgError::IndexOutOfRange { row, col: c, n: self.n });
            }
            if !v.is_finite() {
                return Err(LinalgError::NonFinite);
            }
            if c == last {
                *self.vals.last_mut().unwrap() += v;
            } else {
                self.cols.push(c);
                self.vals.push(v);
                last = c;
            }
        }
        self.scratch.clear();
        self.row_ptr.push(self.cols.len());
        Ok(())
    }

    pub fn build(self) -> Result<CsrMatrix, LinalgError> {
        let rows = self.row_ptr.len() - 1;
        if rows != self.n {
            return Err(LinalgError::Dimension {
                expected: self.n,
                got: rows,
            });
        }
        Ok(CsrMatrix {
            n: self.n,
            row_ptr: self.row_ptr,
            cols: self.cols,
            vals: self.vals,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    Jacobi,
    /// Exact inverse of consecutive diagonal blocks of the given size.
    BlockJacobi(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub rtol: f64,
    pub max_iter: usize,
    /// Use the conjugate-gradient path; the caller vouches that `A` is SPD.
    pub symmetric: bool,
    pub preconditioner: Preconditioner,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            max_iter: 2000,
            symmetric: false,
            preconditioner: Preconditioner::Jacobi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub method: Method,
    pub iterations: usize,
    /// `‖Ax − b‖ / ‖b‖` recomputed from the returned solution.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub report: SolveReport,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Precond {
    block: usize,
    inv: Vec<f64>,
}

impl Precond {
    fn new(a: &CsrMatrix, kind: Preconditioner) -> Result<Self, LinalgError> {
        let block = match kind {
            Preconditioner::Jacobi => 1,
            Preconditioner::BlockJacobi(b) => b.max(1),
        };
        if a.n % block != 0 {
            return Err(LinalgError::Dimension {
                expected: a.n.next_multiple_of(block),
                got: a.n,
            });
        }
        let mut inv = Vec::with_capacity(a.n * block);
        for start in (0..a.n).step_by(block) {
            let mut m = vec![0.0; block * block];
            for i in 0..block {
                for j in 0..block {
                    m[i * block + j] = a.get(start + i, start + j);
                }
            }
            let bi = invert_small(&m, block).ok_or(LinalgError::SingularPreconditioner { row: start })?;
            inv.extend(bi);
        }
        Ok(Self { block, inv })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let b = self.block;
        if b == 1 {
            for ((zi, ri), d) in z.iter_mut().zip(r).zip(&self.inv) {
                *zi = ri * d;
            }
            return;
        }
        for (k, start) in (0..r.len()).step_by(b).enumerate() {
            let m = &self.inv[k * b * b..(k + 1) * b * b];
            for i in 0..b {
                let mut s = 0.0;
                for j in 0..b {
                    s += m[i * b + j] * r[start + j];
                }
                z[start + i] = s;
            }
        }
    }
}

/// Gauss–Jordan inverse of a small dense matrix; `None` if singular.
fn invert_small(m: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut a = m.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))?;
        let p = a[piv * n + col];
        if p == 0.0 || !p.is_finite() {
            return None;
        }
        for k in 0..n {
            a.swap(col * n + k, piv * n + k);
            inv.swap(col * n + k, piv * n + k);
        }
        for k in 0..n {
            a[col * n + k] /= p;
            inv[col * n + k] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = a[r * n + col];
                if f != 0.0 {
                    for k in 0..n {
                        a[r * n + k] -= f * a[col * n + k];
                        inv[r * n + k] -= f * inv[col * n + k];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Solves `A x = rhs` starting from `x0` (zero when `None`).
///
/// Uses preconditioned CG when `opts.symmetric` is set, otherwise BiCGStab
/// with restarted GMRES as a fallback on breakdown or stagnation. On success
/// the residual contract `‖Ax − rhs‖ ≤ rtol·‖rhs‖` has been verified against
/// the returned vector.
pub fn solve(
    a: &CsrMatrix,
    rhs: &[f64],
    x0: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<Solution, LinalgError> {
    let n = a.n;
    if rhs.len() != n {
        return Err(LinalgError::Dimension {
            expected: n,
            got: rhs.len(),
        });
    }
    if let Some(x0) = x0 {
        if x0.len() != n {
            return Err(LinalgError::Dimension {
                expected: n,
                got: x0.len(),
            });
        }
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let bnorm = norm(rhs);
    if bnorm == 0.0 {
        return Ok(Solution {
            x: vec![0.0; n],
            report: SolveReport {
                method: if opts.symmetric { Method::Cg } else { Method::BiCgStab },
                iterations: 0,
                residual: 0.0,
            },
        });
    }
    let pc = Precond::new(a, opts.preconditioner)?;
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let target = opts.rtol * bnorm;

    let result = if opts.symmetric {
        cg(a, rhs, &mut x, &pc, target, opts.max_iter).map(|it| (Method::Cg, it))
    } else {
        match bicgstab(a, rhs, &mut x, &pc, target, opts.max_iter) {
            Ok(it) => Ok((Method::BiCgStab, it)),
            Err(used) => gmres(a, rhs, &mut x, &pc, target, opts.max_iter, 40)
                .map(|it| (Method::Gmres, used + it)),
        }
    };
    let residual = true_residual(a, rhs, &x) / bnorm;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    match result {
        Ok((method, iterations)) if residual <= opts.rtol => Ok(Solution {
            x,
            report: SolveReport {
                method,
                iterations,
                residual,
            },
        }),
        Ok((method, iterations)) | Err((method, iterations)) => Err(LinalgError::NotConverged {
            method,
            iterations,
            residual,
        }),
    }
}

fn true_residual(a: &CsrMatrix, b: &[f64], x: &[f64]) -> f64 {
    let ax = a.matvec(x);
    norm(&b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect::<Vec<_>>())
}

/// Preconditioned CG with restarts whenever the recursively updated residual
/// claims convergence but the true residual does not.
fn cg(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    pc: &Precond,
    target: f64,
    max_iter: usize,
) -> Result<usize, (Method, usize)> {
    let n = b.len();
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut it = 0;
    while it < max_iter {
        a.matvec_into(x, &mut q);
        for i in 0..n {
            r[i] = b[i] - q[i];
        }
        if norm(&r) <= target {
            return Ok(it);
        }
        pc.apply(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while it < max_iter {
            it += 1;
            a.matvec_into(&p, &mut q);
            let pq = dot(&p, &q);
            if !(pq > 0.0) {
                return Err((Method::Cg, it));
            }
            let alpha = rz / pq;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            if norm(&r) <= target {
                break;
            }
            pc.apply(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
    a.matvec_into(x, &mut q);
    if norm(&b.iter().zip(&q).map(|(bi, qi)| bi - qi).collect::<Vec<_>>()) <= target {
        Ok(it)
    } else {
        Err((Method::Cg, it))
    }
}

/// Right-preconditioned BiCGStab. On failure returns the iterations spent.
fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    pc: &Precond,
    target: f64,
    max_iter: usize,
) -> Result<usize, usize> {
    let n = b.len();
    let mut r = a.matvec(x);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    if norm(&r) <= target {
        return Ok(0);
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut zz = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            return Err(it);
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        pc.apply(&p, &mut y);
        a.matvec_into(&y, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 || !rv.is_finite() {
            return Err(it);
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) <= target {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            if true_residual(a, b, x) <= target {
                return Ok(it);
            }
            return Err(it);
        }
        pc.apply(&s, &mut zz);
        a.matvec_into(&zz, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(it);
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * y[i] + omega * zz[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm(&r) <= target {
            if true_residual(a, b, x) <= target {
                return Ok(it);
            }
            return Err(it);
        }
        if omega == 0.0 || !omega.is_finite() {
            return Err(it);
        }
    }
    Err(max_iter)
}

/// Right-preconditioned restarted GMRES(m) with modified Gram–Schmidt.
fn gmres(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    pc: &Precond,
    target: f64,
    max_iter: usize,
    m: usize,
) -> Result<usize, (Method, usize)> {
    let n = b.len();
    let mut it = 0;
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    while it < max_iter {
        let mut r = a.matvec(x);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let beta = norm(&r);
        if beta <= target {
            return Ok(it);
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            if it >= max_iter {
                break;
            }
            it += 1;
            pc.apply(&basis[k], &mut z);
            a.matvec_into(&z, &mut w);
            for (j, vj) in basis.iter().enumerate() {
                let hj = dot(&w, vj);
                h[j][k] = hj;
                for i in 0..n {
                    w[i] -= hj * vj[i];
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for j in 0..k {
                let tmp = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = tmp;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            if d == 0.0 {
                return Err((Method::Gmres, it));
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= target || hn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        let mut yv = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * yv[j];
            }
            yv[i] = s / h[i][i];
        }
        let mut upd = vec![0.0; n];
        for (j, yj) in yv.iter().enumerate() {
            for i in 0..n {
                upd[i] += yj * basis[j][i];
            }
        }
        pc.apply(&upd, &mut z);
        for i in 0..n {
            x[i] += z[i];
        }
    }
    if true_residual(a, b, x) <= target {
        Ok(it)
    } else {
        Err((Method::Gmres, it))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense Gaussian elimination with partial pivoting.
    pub(crate) fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for r in col + 1..n {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        x
    }

    fn to_triplets(d: &[Vec<f64>]) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::new();
        for (i, row) in d.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        t
    }

    #[test]
    fn assemble_examples() {
        let m = assemble(1, vec![(0, 0, 2.0)]).unwrap();
        assert_eq!(m.to_dense(), vec![vec![2.0]]);
        let m = assemble(1, vec![(0, 0, 1.0), (0, 0, 1.0)]).unwrap();
        assert_eq!(m.to_dense(), vec![vec![2.0]]);
        assert!(matches!(
            assemble(2, vec![(0, 2, 1.0)]),
            Err(LinalgError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn assemble_is_order_independent() {
        let mut t = vec![
            (0, 1, 0.1),
            (1, 1, 1e16),
            (0, 1, 0.2),
            (1, 1, 1.0),
            (1, 1, -1e16),
            (0, 0, 3.0),
        ];
        let a = assemble(2, t.clone()).unwrap();
        t.reverse();
        let b = assemble(2, t.clone()).unwrap();
        t.swap(0, 3);
        let c = assemble(2, t).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn neumann_laplacian_rows_sum_to_zero() {
        // Hand-assembled 5-point stencil on a 3x3 cell grid, zero-flux closure.
        let n = 3;
        let mut t = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let c = j * n + i;
                let mut nb = Vec::new();
                if i > 0 {
                    nb.push(c - 1);
                }
                if i + 1 < n {
                    nb.push(c + 1);
                }
                if j > 0 {
                    nb.push(c - n);
                }
                if j + 1 < n {
                    nb.push(c + n);
                }
                t.push((c, c, nb.len() as f64));
                for k in nb {
                    t.push((c, k, -1.0));
                }
            }
        }
        let m = assemble(9, t).unwrap();
        assert_eq!(m.get(4, 4), 4.0);
        assert_eq!(m.get(0, 0), 2.0);
        for r in 0..9 {
            let (_, vals) = m.row(r);
            assert_eq!(vals.iter().sum::<f64>(), 0.0);
        }
        assert!(m.is_symmetric(0.0));
    }

    #[test]
    fn row_builder_matches_assemble() {
        let mut rb = RowBuilder::new(2, 4);
        rb.add(1, 1.0);
        rb.add(0, 2.0);
        rb.add(1, 0.5);
        rb.finish_row().unwrap();
        rb.add(1, 4.0);
        rb.finish_row().unwrap();
        let m = rb.build().unwrap();
        let r = assemble(2, vec![(0, 0, 2.0), (0, 1, 1.5), (1, 1, 4.0)]).unwrap();
        assert_eq!(m, r);
    }

    #[test]
    fn identity_solves_in_one_iteration() {
        let a = CsrMatrix::identity(4);
        let b = vec![1.0, -2.0, 3.0, 0.5];
        for sym in [true, false] {
            let s = solve(&a, &b, None, &SolveOptions { symmetric: sym, ..Default::default() }).unwrap();
            assert_eq!(s.x, b);
            assert!(s.report.iterations <= 1);
        }
    }

    #[test]
    fn diagonal_system() {
        let a = assemble(2, vec![(0, 0, 2.0), (1, 1, 4.0)]).unwrap();
        let s = solve(&a, &[2.0, 8.0], None, &SolveOptions::default()).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-14 && (s.x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = CsrMatrix::identity(3);
        let s = solve(&a, &[0.0; 3], Some(&[1.0, 2.0, 3.0]), &SolveOptions::default()).unwrap();
        assert_eq!(s.x, vec![0.0; 3]);
    }

    #[test]
    fn block_jacobi_handles_stiff_coupled_pairs() {
        // Pairs (u_i, v_i) tied by a large symmetric coupling, plus a chain.
        let n = 40;
        let mut t = Vec::new();
        for k in 0..n / 2 {
            let (u, v) = (2 * k, 2 * k + 1);
            let beta = 1e6;
            t.extend([(u, u, 1.0 + beta), (v, v, 1.0 + beta), (u, v, -beta), (v, u, -beta)]);
            if k + 1 < n / 2 {
                let (u2, v2) = (u + 2, v + 2);
                t.extend([(u, u, 1.0), (u2, u2, 1.0), (u, u2, -1.0), (u2, u, -1.0)]);
                t.extend([(v, v, 1.0), (v2, v2, 1.0), (v, v2, -1.0), (v2, v, -1.0)]);
            }
        }
        let a = assemble(n, t).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let exact = dense_solve(a.to_dense(), b.clone());
        let opts = SolveOptions {
            rtol: 1e-10,
            symmetric: true,
            preconditioner: Preconditioner::BlockJacobi(2),
            ..Default::default()
        };
        let s = solve(&a, &b, None, &opts).unwrap();
        assert!(s.report.iterations < 100, "{:?}", s.report);
        for (x, e) in s.x.iter().zip(&exact) {
            assert!((x - e).abs() < 1e-6);
        }
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
        let m: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = (0..n).map(|k| m[k][i] * m[k][j]).sum::<f64>();
            }
            a[i][i] += 1.0;
        }
        a
    }

    #[test]
    fn random_spd_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..3 {
            let d = random_spd(&mut rng, 20);
            let b: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = assemble(20, to_triplets(&d)).unwrap();
            let exact = dense_solve(d, b.clone());
            let opts = SolveOptions {
                rtol: 1e-14,
                symmetric: true,
                ..Default::default()
            };
            let s = solve(&a, &b, None, &opts).unwrap();
            for (x, e) in s.x.iter().zip(&exact) {
                assert!((x - e).abs() <= 1e-9 * e.abs().max(1.0));
            }
        }
    }

    #[test]
    fn gmres_fallback_solves_indefinite_nonsymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let b: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = assemble(20, to_triplets(&d)).unwrap();
        let exact = dense_solve(d, b.clone());
        let opts = SolveOptions {
            rtol: 1e-14,
            ..Default::default()
        };
        let s = solve(&a, &b, None, &opts).unwrap();
        for (x, e) in s.x.iter().zip(&exact) {
            assert!((x - e).abs() <= 1e-9 * e.abs().max(1.0), "{x} vs {e}");
        }
    }

    #[test]
    fn max_iter_exhaustion_reports_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = random_spd(&mut rng, 20);
        let a = assemble(20, to_triplets(&d)).unwrap();
        let b = vec![1.0; 20];
        let opts = SolveOptions {
            rtol: 1e-14,
            max_iter: 2,
            symmetric: true,
            ..Default::default()
        };
        match solve(&a, &b, None, &opts) {
            Err(LinalgError::NotConverged { residual, .. }) => assert!(residual > 1e-14),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn matvec_matches_dense(seed in 0u64..10_000, n in 1usize..=32, fill in 0.05f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| if rng.gen::<f64>() < fill { rng.gen_range(-5.0..5.0) } else { 0.0 }).collect())
                .collect();
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = assemble(n, to_triplets(&d)).unwrap();
            let y = a.matvec(&x);
            for i in 0..n {
                let e: f64 = (0..n).map(|j| d[i][j] * x[j]).sum();
                prop_assert!((y[i] - e).abs() <= 1e-13 * (1.0 + e.abs()));
            }
        }

        #[test]
        fn successful_solves_honor_residual_contract(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = random_spd(&mut rng, 12);
            let b: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = assemble(12, to_triplets(&d)).unwrap();
            for sym in [true, false] {
                let opts = SolveOptions { rtol: 1e-10, symmetric: sym, ..Default::default() };
                if let Ok(s) = solve(&a, &b, None, &opts) {
                    let r = true_residual(&a, &b, &s.x) / norm(&b);
                    prop_assert!(r <= 1e-10);
                }
            }
        }
    }
}
