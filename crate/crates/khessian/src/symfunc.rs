//! Elementary symmetric functions of eigenvalues and their matrix calculus.
//!
//! For a symmetric matrix `M` with eigenvalues `lambda_1 <= ... <= lambda_n`,
//! `sigma_k(M)` denotes the k-th elementary symmetric function of the
//! eigenvalues. This module provides:
//!
//! * [`sigma_k`] / [`sigma_all`] on eigenvalue slices (stable prefix
//!   recurrence, O(n k));
//! * [`sigma_k_matrix`] on matrices, dispatching between a principal-minor
//!   sum (n <= 4) and the eigenvalue route (n >= 5) — the two routes are
//!   independent and are cross-checked in tests;
//! * [`newton_tensor`], the derivative `d sigma_k / d M` via the recurrence
//!   `T_0 = I`, `T_m = sigma_m(M) I - M T_{m-1}`;
//! * [`f_and_grad`], the degree-one operator `F = sigma_k^{1/k}` and its
//!   gradient matrix, which drives the nonlinear solver;
//! * admissibility-cone membership ([`in_gamma_k`], [`in_gamma_k_closure`]):
//!   the open cone requires `sigma_j > 0` for all `j = 1..k`;
//! * [`normalize_to_ak`], scaling a positive diagonal onto the constraint
//!   surface `sigma_k = 1`;
//! * [`maclaurin_gap`], the (nonnegative) difference between the normalized
//!   k-th root mean and the determinant root mean for positive definite
//!   input.

use crate::eig;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Floor on `sigma_k` below which [`f_and_grad`] refuses to linearize;
/// the solver uses the same floor for its admissibility projection.
pub const SIGMA_MIN: f64 = 1e-8;

/// Tolerance used by [`in_gamma_k_closure`]: values of `sigma_j` down to
/// `-GAMMA_CLOSURE_TOL * scale` still count as boundary membership.
pub const GAMMA_CLOSURE_TOL: f64 = 1e-12;

/// Largest dimension accepted by this module. Everything in this crate
/// targets small spatial dimensions; refusing larger inputs early gives a
/// clear error instead of silent O(n^3)+ blowup in hot loops.
pub const MAX_DIM: usize = 8;

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// Dense symmetric matrix, row-major, symmetry enforced at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    /// Row-major `dim * dim` entries; kept exactly symmetric.
    data: Vec<f64>,
}

impl SymMatrix {
    /// Build from row-major entries; the stored matrix is the symmetric part
    /// `(A + A^T) / 2`. Errors when `data` has the wrong length, the
    /// dimension is out of range, or any entry is non-finite.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Argument(format!(
                "matrix dimension {dim} outside supported range 1..={MAX_DIM}"
            )));
        }
        if data.len() != dim * dim {
            return Err(Error::Argument(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("matrix entries must be finite".into()));
        }
        let mut m = Self { dim, data };
        for i in 0..dim {
            for j in 0..i {
                let s = 0.5 * (m.data[i * dim + j] + m.data[j * dim + i]);
                m.data[i * dim + j] = s;
                m.data[j * dim + i] = s;
            }
        }
        Ok(m)
    }

    /// Identity matrix.
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { dim, data }
    }

    /// Diagonal matrix from a slice.
    pub fn from_diag(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut data = vec![0.0; dim * dim];
        for (i, &d) in diag.iter().enumerate() {
            data[i * dim + i] = d;
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Set the (i, j) and (j, i) entries together.
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `self + t * other` (dimensions must match; debug-asserted).
    pub fn add_scaled(&self, other: &SymMatrix, t: f64) -> SymMatrix {
        debug_assert_eq!(self.dim, other.dim);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + t * b)
            .collect();
        SymMatrix {
            dim: self.dim,
            data,
        }
    }

    /// Matrix product `self * other`, symmetrized. Used only inside the
    /// Newton-tensor recurrence where the product is symmetric in exact
    /// arithmetic (both factors are polynomials in the same matrix).
    fn mul_sym(&self, other: &SymMatrix) -> SymMatrix {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += self.get(i, l) * other.get(l, j);
                }
                out[i * n + j] = s;
            }
        }
        for i in 0..n {
            for j in 0..i {
                let s = 0.5 * (out[i * n + j] + out[j * n + i]);
                out[i * n + j] = s;
                out[j * n + i] = s;
            }
        }
        SymMatrix { dim: n, data: out }
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Eigenvalues {
        Eigenvalues {
            values: eig::eigenvalues_sym(&self.data, self.dim),
        }
    }
}

/// Eigenvalues of a symmetric matrix, sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalues {
    values: Vec<f64>,
}

impl Eigenvalues {
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }
}

/// Positive diagonal matrix normalized so that `sigma_k(a) = 1`; the
/// quadratic `x -> x' A x / 2` generated by such a diagonal is the model
/// solution all asymptotics in this crate are measured against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AkMatrix {
    diag: Vec<f64>,
    k: usize,
}

impl AkMatrix {
    /// Validates an already-normalized diagonal: entries positive and
    /// `|sigma_k(a) - 1| <= 1e-12`.
    pub fn new(diag: Vec<f64>, k: usize) -> Result<Self> {
        let n = diag.len();
        check_k(n, k)?;
        if diag.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::Argument(
                "normalized diagonal requires strictly positive finite entries".into(),
            ));
        }
        let s = sigma_k(&diag, k);
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::Argument(format!(
                "diagonal is not normalized: sigma_{k}(a) = {s:.17} (must be 1 within 1e-12)"
            )));
        }
        Ok(Self { diag, k })
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn matrix(&self) -> SymMatrix {
        SymMatrix::from_diag(&self.diag)
    }

    /// Level value of the generating quadratic: `x' A x / 2`.
    pub fn quadratic(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.diag.len());
        0.5 * x
            .iter()
            .zip(&self.diag)
            .map(|(xi, ai)| ai * xi * xi)
            .sum::<f64>()
    }

    /// Gradient of the generating quadratic, `A x`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.diag).map(|(xi, ai)| ai * xi).collect()
    }

    pub fn min_diag(&self) -> f64 {
        self.diag.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_diag(&self) -> f64 {
        self.diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Scalar sigma_k
// ---------------------------------------------------------------------------

fn check_k(n: usize, k: usize) -> Result<()> {
    if n == 0 || n > MAX_DIM {
        return Err(Error::Argument(format!(
            "dimension {n} outside supported range 1..={MAX_DIM}"
        )));
    }
    if k == 0 || k > n {
        return Err(Error::Argument(format!(
            "order k = {k} must satisfy 1 <= k <= n = {n}"
        )));
    }
    Ok(())
}

/// `sigma_k` of a value slice by the prefix recurrence: processing one value
/// at a time and updating `e_j += v * e_(j-1)` from high j down. O(n k),
/// no combinatorial blowup, exact for integer inputs that fit in f64.
pub fn sigma_k(values: &[f64], k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > values.len() {
        return 0.0;
    }
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for (i, &v) in values.iter().enumerate() {
        let top = k.min(i + 1);
        for j in (1..=top).rev() {
            e[j] += v * e[j - 1];
        }
    }
    e[k]
}

/// All `sigma_0 .. sigma_n` of a value slice in one pass.
pub fn sigma_all(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut e = vec![0.0; n + 1];
    e[0] = 1.0;
    for (i, &v) in values.iter().enumerate() {
        for j in (1..=i + 1).rev() {
            e[j] += v * e[j - 1];
        }
    }
    e
}

/// `sigma_k` of the slice with index `i` removed (the standard "deleted"
/// symmetric function). `k = 0` gives 1.
pub fn sigma_k_without(values: &[f64], k: usize, i: usize) -> f64 {
    let reduced: Vec<f64> = values
        .iter()
        .enumerate()
        .filter_map(|(j, &v)| (j != i).then_some(v))
        .collect();
    sigma_k(&reduced, k)
}

/// Binomial coefficient as f64 (exact for the small arguments used here).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for j in 0..k {
        acc = acc * (n - j) as f64 / (j + 1) as f64;
    }
    acc.round()
}

// ---------------------------------------------------------------------------
// Matrix sigma_k and Newton tensors
// ---------------------------------------------------------------------------

/// `sigma_k` of a symmetric matrix. For `n <= 4` this sums all k x k
/// principal minors (direct determinant expansions); for larger matrices it
/// reduces to eigenvalues first. The two routes agree to relative rounding
/// (this is asserted wholesale in the acceptance suite).
pub fn sigma_k_matrix(m: &SymMatrix, k: usize) -> Result<f64> {
    check_k(m.dim(), k)?;
    if m.dim() <= 4 {
        Ok(sigma_k_minors(m, k))
    } else {
        Ok(sigma_k(m.eigenvalues().as_slice(), k))
    }
}

/// Principal-minor route, valid for any `n` but factorial in cost; public so
/// tests can cross-check the eigenvalue route on mid-size matrices too.
pub fn sigma_k_minors(m: &SymMatrix, k: usize) -> f64 {
    let n = m.dim();
    let mut total = 0.0;
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        total += principal_minor_det(m, &idx);
        // Advance to the next k-combination in lexicographic order.
        let mut i = k as isize - 1;
        while i >= 0 && idx[i as usize] == i as usize + n - k {
            i -= 1;
        }
        if i < 0 {
            return total;
        }
        let i = i as usize;
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Determinant of the principal submatrix selected by `idx` (|idx| <= 4
/// in the dispatch path; the general branch pivots a tiny dense LU).
fn principal_minor_det(m: &SymMatrix, idx: &[usize]) -> f64 {
    let g = |r: usize, c: usize| m.get(idx[r], idx[c]);
    match idx.len() {
        1 => g(0, 0),
        2 => g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0),
        3 => {
            g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1))
                - g(0, 1) * (g(1, 0) * g(2, 2) - g(1, 2) * g(2, 0))
                + g(0, 2) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0))
        }
        len => {
            // Partial-pivot LU on a copy.
            let mut a: Vec<f64> = (0..len * len).map(|p| g(p / len, p % len)).collect();
            let mut det = 1.0;
            for col in 0..len {
                let piv = (col..len)
                    .max_by(|&r1, &r2| {
                        a[r1 * len + col]
                            .abs()
                            .partial_cmp(&a[r2 * len + col].abs())
                            .unwrap()
                    })
                    .unwrap();
                if a[piv * len + col] == 0.0 {
                    return 0.0;
                }
                if piv != col {
                    for c in 0..len {
                        a.swap(col * len + c, piv * len + c);
                    }
                    det = -det;
                }
                det *= a[col * len + col];
                for r in col + 1..len {
                    let f = a[r * len + col] / a[col * len + col];
                    for c in col..len {
                        a[r * len + c] -= f * a[col * len + c];
                    }
                }
            }
            det
        }
    }
}

/// Newton tensor `T_(k-1)(M)`, the gradient of `sigma_k` with respect to the
/// matrix entries: `d sigma_k / d M_ij = [T_(k-1)]_ij`. Computed with the
/// recurrence `T_0 = I`, `T_m = sigma_m(M) I - M T_(m-1)`, where the interior
/// `sigma_m` values come from the trace identity `sigma_m = tr(T_(m-1) M)/m`
/// so no eigendecomposition is needed.
pub fn newton_tensor(m: &SymMatrix, k: usize) -> Result<SymMatrix> {
    check_k(m.dim(), k)?;
    Ok(newton_tensor_unchecked(m, k).0)
}

/// Recurrence core; also returns `sigma_k(M)` computed along the way
/// (`sigma_k = tr(T_(k-1) M) / k`).
fn newton_tensor_unchecked(m: &SymMatrix, k: usize) -> (SymMatrix, f64) {
    let n = m.dim();
    let mut t = SymMatrix::identity(n);
    let mut sigma = 0.0;
    for stage in 1..=k {
        // sigma_stage = tr(T_(stage-1) M) / stage
        let mut tr = 0.0;
        for i in 0..n {
            for j in 0..n {
                tr += t.get(i, j) * m.get(j, i);
            }
        }
        sigma = tr / stage as f64;
        if stage == k {
            break;
        }
        let mt = m.mul_sym(&t);
        let mut next = SymMatrix::from_diag(&vec![sigma; n]);
        next = next.add_scaled(&mt, -1.0);
        t = next;
    }
    (t, sigma)
}

/// Value and gradient of `F(M) = sigma_k(M)^(1/k)`:
/// `dF/dM = (1/k) sigma_k^(1/k - 1) T_(k-1)(M)`.
///
/// Errors with [`Error::ConeViolation`] when `sigma_k(M) < SIGMA_MIN`, since
/// the fractional power (and the solver linearization) degenerates there.
pub fn f_and_grad(m: &SymMatrix, k: usize) -> Result<(f64, SymMatrix)> {
    check_k(m.dim(), k)?;
    let (t, sk) = newton_tensor_unchecked(m, k);
    if sk < SIGMA_MIN {
        return Err(Error::ConeViolation {
            sigma_k: sk,
            floor: SIGMA_MIN,
        });
    }
    Ok(f_from_parts(t, sk, k))
}

/// Same as [`f_and_grad`] but flooring `sigma_k` at `floor` instead of
/// erroring, and reporting whether the floor engaged. The nonlinear solver
/// uses this to keep its linearization defined while it damps back into the
/// admissible cone.
pub fn f_and_grad_floored(m: &SymMatrix, k: usize, floor: f64) -> (f64, SymMatrix, bool) {
    let (t, sk) = newton_tensor_unchecked(m, k);
    let violated = sk < floor;
    let (f, grad) = f_from_parts(t, sk.max(floor), k);
    (f, grad, violated)
}

fn f_from_parts(t: SymMatrix, sk: f64, k: usize) -> (f64, SymMatrix) {
    let kf = k as f64;
    let f = sk.powf(1.0 / kf);
    let coeff = f / (kf * sk); // (1/k) sigma^(1/k - 1)
    let n = t.dim();
    let mut grad = t;
    for i in 0..n {
        for j in 0..n {
            let v = grad.get(i, j) * coeff;
            grad.data[i * n + j] = v;
        }
    }
    (f, grad)
}

/// `sigma_k(M)` without the k-th root, via the same recurrence as the
/// gradient (cheap; used in solver hot loops and cone checks).
pub fn sigma_k_trace_route(m: &SymMatrix, k: usize) -> f64 {
    newton_tensor_unchecked(m, k).1
}

// ---------------------------------------------------------------------------
// Cone membership and normalization
// ---------------------------------------------------------------------------

/// Strict membership in the admissibility cone: `sigma_j(lambda(M)) > 0`
/// for every `j = 1..=k`.
pub fn in_gamma_k(m: &SymMatrix, k: usize) -> Result<bool> {
    check_k(m.dim(), k)?;
    let e = sigma_all(m.eigenvalues().as_slice());
    Ok((1..=k).all(|j| e[j] > 0.0))
}

/// Closure membership with tolerance: `sigma_j >= -GAMMA_CLOSURE_TOL * s_j`
/// where `s_j = max(1, max|lambda|)^j` scales the test to the spectrum.
pub fn in_gamma_k_closure(m: &SymMatrix, k: usize) -> Result<bool> {
    check_k(m.dim(), k)?;
    let lam = m.eigenvalues();
    let scale = lam
        .as_slice()
        .iter()
        .fold(1.0f64, |acc, v| acc.max(v.abs()));
    let e = sigma_all(lam.as_slice());
    Ok((1..=k).all(|j| e[j] >= -GAMMA_CLOSURE_TOL * scale.powi(j as i32)))
}

/// Scale a strictly positive diagonal onto the surface `sigma_k = 1`:
/// returns `t * d` with `t = sigma_k(d)^(-1/k)`.
pub fn normalize_to_ak(diag: &[f64], k: usize) -> Result<AkMatrix> {
    check_k(diag.len(), k)?;
    if diag.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
        return Err(Error::Argument(
            "normalization requires strictly positive finite entries".into(),
        ));
    }
    let s = sigma_k(diag, k);
    debug_assert!(s > 0.0);
    let t = s.powf(-1.0 / k as f64);
    let scaled: Vec<f64> = diag.iter().map(|d| d * t).collect();
    // Polish once: the powf above is accurate to ~1 ulp, but the constructor
    // demands 1e-12, so correct the residual multiplicatively.
    let s2 = sigma_k(&scaled, k);
    let t2 = s2.powf(-1.0 / k as f64);
    AkMatrix::new(scaled.iter().map(|d| d * t2).collect(), k)
}

/// Normalized-mean gap `(sigma_k / C(n,k))^(1/k) - det^(1/n)`, nonnegative
/// for positive definite input by the Maclaurin chain. Errors unless all
/// eigenvalues are strictly positive.
pub fn maclaurin_gap(m: &SymMatrix, k: usize) -> Result<f64> {
    let n = m.dim();
    check_k(n, k)?;
    let lam = m.eigenvalues();
    if lam.min() <= 0.0 {
        return Err(Error::Argument(format!(
            "maclaurin gap requires positive definite input (min eigenvalue {:.3e})",
            lam.min()
        )));
    }
    let vals = lam.as_slice();
    let mean_k = (sigma_k(vals, k) / binomial(n, k)).powf(1.0 / k as f64);
    let det_root = (vals.iter().map(|v| v.ln()).sum::<f64>() / n as f64).exp();
    Ok(mean_k - det_root)
}
