//! Sparse linear algebra for the Newton linearizations: CSR storage, an
//! ILU(0) preconditioner, and BiCGSTAB.
//!
//! Determinism contract: for fixed input bits, every routine here produces
//! identical output bits regardless of thread count. Inner products and the
//! factorization are sequential; the matrix-vector product parallelizes over
//! rows, which is safe because each row's dot product is computed
//! sequentially and written to a distinct slot.

use crate::error::{Error, Result};
use rayon::prelude::*;

/// Default relative-residual target for linear solves.
pub const LINEAR_RTOL: f64 = 1e-12;
/// Hard iteration cap for BiCGSTAB (restarts included).
pub const LINEAR_MAX_ITER: usize = 2000;

/// Compressed sparse row matrix (square).
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Build from per-row entry lists. Entries within a row are sorted by
    /// column and duplicates are summed. Every row must have a diagonal
    /// entry (required by ILU(0)).
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.len() != n {
            return Err(Error::Argument(format!(
                "csr: {} rows for dimension {n}",
                rows.len()
            )));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|e| e.0);
            let mut has_diag = false;
            let mut last_col = usize::MAX;
            for (c, v) in row {
                if c >= n {
                    return Err(Error::Argument(format!("csr: column {c} out of range")));
                }
                if !v.is_finite() {
                    return Err(Error::Numeric(format!("csr: non-finite entry at ({i},{c})")));
                }
                if c == last_col {
                    *vals.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    vals.push(v);
                    last_col = c;
                }
                if c == i {
                    has_diag = true;
                }
            }
            if !has_diag {
                return Err(Error::Argument(format!("csr: row {i} lacks a diagonal entry")));
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix {
            n,
            row_ptr,
            col_idx,
            vals,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut acc = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[p] * x[self.col_idx[p]];
            }
            *yi = acc;
        });
    }

    fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }
}

/// ILU(0): incomplete LU on the sparsity pattern of A, unit lower diagonal.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    /// Combined L (strictly lower, unit diagonal implied) and U (upper with
    /// diagonal) factors in the pattern of A.
    lu: Vec<f64>,
    /// Position of the diagonal entry in each row.
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let mut lu = a.vals.clone();
        let mut diag = vec![0usize; n];
        for i in 0..n {
            let mut found = false;
            for p in a.row_range(i) {
                if a.col_idx[p] == i {
                    diag[i] = p;
                    found = true;
                    break;
                }
            }
            if !found {
                return Err(Error::Numeric(format!("ilu0: missing diagonal in row {i}")));
            }
        }
        // Standard IKJ update restricted to the pattern.
        for i in 1..n {
            let (ri0, ri1) = (a.row_ptr[i], a.row_ptr[i + 1]);
            let mut p = ri0;
            while p < ri1 && a.col_idx[p] < i {
                let k = a.col_idx[p];
                let pivot = lu[diag[k]];
                if pivot.abs() < 1e-300 {
                    return Err(Error::Numeric(format!(
                        "ilu0: zero pivot at row {k} (value {pivot:.3e})"
                    )));
                }
                let lik = lu[p] / pivot;
                lu[p] = lik;
                // Subtract lik * (row k, columns > k) on the shared pattern:
                // sorted-merge of row i tail and row k tail.
                let mut q = p + 1;
                let mut r = diag[k] + 1;
                let rk1 = a.row_ptr[k + 1];
                while q < ri1 && r < rk1 {
                    match a.col_idx[q].cmp(&a.col_idx[r]) {
                        std::cmp::Ordering::Less => q += 1,
                        std::cmp::Ordering::Greater => r += 1,
                        std::cmp::Ordering::Equal => {
                            lu[q] -= lik * lu[r];
                            q += 1;
                            r += 1;
                        }
                    }
                }
                p += 1;
            }
        }
        for i in 0..n {
            if lu[diag[i]].abs() < 1e-300 {
                return Err(Error::Numeric(format!("ilu0: zero U diagonal in row {i}")));
            }
        }
        Ok(Ilu0 {
            n,
            row_ptr: a.row_ptr.clone(),
            col_idx: a.col_idx.clone(),
            lu,
            diag,
        })
    }

    /// z = (LU)^{-1} x: forward solve with unit L, back solve with U.
    pub fn apply(&self, x: &[f64], z: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        z.copy_from_slice(x);
        for i in 0..self.n {
            let mut acc = z[i];
            for p in self.row_ptr[i]..self.diag[i] {
                acc -= self.lu[p] * z[self.col_idx[p]];
            }
            z[i] = acc;
        }
        for i in (0..self.n).rev() {
            let mut acc = z[i];
            for p in (self.diag[i] + 1)..self.row_ptr[i + 1] {
                acc -= self.lu[p] * z[self.col_idx[p]];
            }
            z[i] = acc / self.lu[self.diag[i]];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Sequential by design: bit-reproducible across thread counts.
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve `A x = b` by ILU(0)-right-preconditioned BiCGSTAB to relative
/// residual `rtol` (measured against `||b||`, verified on the true residual
/// before returning). `x` carries the initial guess in and the solution out.
pub fn bicgstab_ilu0(a: &CsrMatrix, pre: &Ilu0, b: &[f64], x: &mut [f64], rtol: f64) -> Result<usize> {
    let n = a.n;
    if b.len() != n || x.len() != n {
        return Err(Error::Argument("bicgstab: dimension mismatch".into()));
    }
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let tol = rtol * bnorm;

    let mut r = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    a.matvec(x, &mut tmp);
    for i in 0..n {
        r[i] = b[i] - tmp[i];
    }
    if norm2(&r) <= tol {
        return Ok(0);
    }
    let mut rhat = r.clone();
    let mut rho = 1.0f64;
    let mut alpha = 1.0f64;
    let mut omega = 1.0f64;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut t = vec![0.0; n];

    for iter in 1..=LINEAR_MAX_ITER {
        let rho_new = dot(&rhat, &r);
        if rho_new.abs() < 1e-300 {
            // Breakdown: restart with the current residual as the shadow.
            rhat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.iter_mut().for_each(|z| *z = 0.0);
            p.iter_mut().for_each(|z| *z = 0.0);
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        pre.apply(&p, &mut phat);
        a.matvec(&phat, &mut v);
        let denom = dot(&rhat, &v);
        if denom.abs() < 1e-300 {
            rhat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.iter_mut().for_each(|z| *z = 0.0);
            p.iter_mut().for_each(|z| *z = 0.0);
            continue;
        }
        alpha = rho_new / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) <= tol {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            if true_residual_ok(a, b, x, tol, &mut tmp) {
                return Ok(iter);
            }
            r.copy_from_slice(&tmp);
            rho = rho_new;
            continue;
        }
        pre.apply(&s, &mut shat);
        a.matvec(&shat, &mut t);
        let tt = dot(&t, &t);
        if tt.abs() < 1e-300 {
            return Err(Error::Numeric("bicgstab: stagnation (t = 0)".into()));
        }
        omega = dot(&t, &s) / tt;
        if omega.abs() < 1e-300 {
            return Err(Error::Numeric("bicgstab: breakdown (omega = 0)".into()));
        }
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
        }
        for i in 0..n {
            r[i] = s[i] - omega * t[i];
        }
        if norm2(&r) <= tol && true_residual_ok(a, b, x, tol, &mut tmp) {
            return Ok(iter);
        }
        if !r.iter().all(|z| z.is_finite()) {
            return Err(Error::Numeric("bicgstab: residual diverged".into()));
        }
        rho = rho_new;
    }
    Err(Error::Numeric(format!(
        "bicgstab: no convergence in {LINEAR_MAX_ITER} iterations (rel residual {:.3e})",
        norm2(&r) / bnorm
    )))
}

/// Recompute the true residual into `tmp`; true iff within tolerance.
fn true_residual_ok(a: &CsrMatrix, b: &[f64], x: &[f64], tol: f64, tmp: &mut [f64]) -> bool {
    let mut ax = vec![0.0; b.len()];
    a.matvec(x, &mut ax);
    for i in 0..b.len() {
        tmp[i] = b[i] - ax[i];
    }
    norm2(tmp) <= tol
}

/// Convenience: factor + solve from a zero initial guess.
pub fn solve(a: &CsrMatrix, b: &[f64], rtol: f64) -> Result<Vec<f64>> {
    let pre = Ilu0::factor(a)?;
    let mut x = vec![0.0; b.len()];
    bicgstab_ilu0(a, &pre, b, &mut x, rtol)?;
    Ok(x)
}
