//! Symmetric eigenvalue routines for the small dense matrices used here.
//!
//! Dispatch policy (fixed, so results are reproducible across platforms):
//! * `n = 1, 2`: closed forms.
//! * `n = 3`: trigonometric closed form; when the computed spectrum is nearly
//!   degenerate (relative gap below [`DEGENERATE_GAP`]) the result is
//!   recomputed by the symmetric-QR path, which is accurate for clustered
//!   eigenvalues where the closed form loses digits.
//! * `n >= 4`: cyclic Jacobi rotations until the off-diagonal Frobenius norm
//!   falls below [`JACOBI_TOL`] relative to the matrix norm.
//!
//! The symmetric-QR path (Householder tridiagonalization followed by the
//! implicit-shift QL iteration) is exposed as [`eigenvalues_qr`]; besides
//! serving as the near-degenerate fallback it gives tests an independent
//! second route for cross-checking the primary dispatch.

/// Relative eigenvalue gap below which the 3x3 closed form falls back to QL.
pub const DEGENERATE_GAP: f64 = 1e-10;

/// Relative off-diagonal Frobenius norm at which Jacobi sweeps stop.
pub const JACOBI_TOL: f64 = 1e-12;

/// Hard cap on Jacobi sweeps; convergence is quadratic, so for the n <= 8
/// matrices seen here a handful of sweeps suffice and hitting the cap means
/// the input contained NaN or infinity.
const MAX_JACOBI_SWEEPS: usize = 64;

/// Hard cap on QL iterations per eigenvalue (EISPACK uses 30).
const MAX_QL_ITER: usize = 40;

/// Eigenvalues of a symmetric matrix given as a dense row-major `n x n`
/// slice. Returns them sorted ascending. Only the lower triangle is read.
pub fn eigenvalues_sym(a: &[f64], n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), n * n);
    let mut lam = match n {
        0 => Vec::new(),
        1 => vec![a[0]],
        2 => eig2(a[0], a[n], a[n + 1]).to_vec(),
        3 => eig3(a),
        _ => jacobi(a, n),
    };
    lam.sort_by(|x, y| x.partial_cmp(y).expect("NaN eigenvalue"));
    lam
}

/// Eigenvalues of a symmetric 2x2 `[[a, b], [b, c]]` by the quadratic
/// formula, written to avoid cancellation in the discriminant.
fn eig2(a: f64, b: f64, c: f64) -> [f64; 2] {
    let mean = 0.5 * (a + c);
    let half_diff = 0.5 * (a - c);
    let r = half_diff.hypot(b);
    [mean - r, mean + r]
}

/// Eigenvalues of a symmetric 3x3 by the trigonometric closed form
/// (roots of the characteristic cubic via the triple-angle identity),
/// falling back to the QL path when the spectrum is nearly degenerate.
fn eig3(a: &[f64]) -> Vec<f64> {
    let (a11, a22, a33) = (a[0], a[4], a[8]);
    let (a12, a13, a23) = (a[3], a[6], a[7]);

    let p1 = a12 * a12 + a13 * a13 + a23 * a23;
    let q = (a11 + a22 + a33) / 3.0;
    let scale = a.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1e-300);
    if p1 <= (1e-16 * scale).powi(2) {
        // Numerically diagonal.
        return vec![a11, a22, a33];
    }

    let d1 = a11 - q;
    let d2 = a22 - q;
    let d3 = a33 - q;
    let p2 = d1 * d1 + d2 * d2 + d3 * d3 + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();

    // r = det((A - q I) / p) / 2, clamped against rounding overshoot.
    let (b11, b22, b33) = (d1 / p, d2 / p, d3 / p);
    let (b12, b13, b23) = (a12 / p, a13 / p, a23 / p);
    let det_b = b11 * (b22 * b33 - b23 * b23) - b12 * (b12 * b33 - b23 * b13)
        + b13 * (b12 * b23 - b22 * b13);
    let r = (det_b / 2.0).clamp(-1.0, 1.0);

    let phi = r.acos() / 3.0;
    let lam_a = q + 2.0 * p * phi.cos();
    let lam_b = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3 * 2.0).cos();
    let lam_c = 3.0 * q - lam_a - lam_b;
    let mut lam = vec![lam_a, lam_b, lam_c];
    lam.sort_by(|x, y| x.partial_cmp(y).expect("NaN eigenvalue"));

    // Near-degenerate spectra lose accuracy in acos(); recompute by QL.
    let span = (lam[2] - lam[0]).max(lam[2].abs()).max(lam[0].abs()).max(1e-300);
    let min_gap = (lam[1] - lam[0]).min(lam[2] - lam[1]);
    if min_gap < DEGENERATE_GAP * span {
        return eigenvalues_qr(a, 3);
    }
    lam
}

/// Cyclic Jacobi iteration on a copy of the matrix; returns unsorted
/// eigenvalues once the off-diagonal mass is negligible.
fn jacobi(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    // Symmetrize defensively: only the lower triangle is trusted.
    for i in 0..n {
        for j in 0..i {
            m[j * n + i] = m[i * n + j];
        }
    }
    let norm: f64 = m.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);

    for _sweep in 0..MAX_JACOBI_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| 2.0 * m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOL * norm {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                // Classic 2x2 rotation: theta parametrizes the tangent.
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for i in 0..n {
                    let aip = m[i * n + p];
                    let aiq = m[i * n + q];
                    m[i * n + p] = c * aip - s * aiq;
                    m[i * n + q] = s * aip + c * aiq;
                }
                for j in 0..n {
                    let apj = m[p * n + j];
                    let aqj = m[q * n + j];
                    m[p * n + j] = c * apj - s * aqj;
                    m[q * n + j] = s * apj + c * aqj;
                }
            }
        }
    }
    (0..n).map(|i| m[i * n + i]).collect()
}

/// Symmetric-QR route: Householder tridiagonalization followed by implicit
/// Wilkinson-shift QL sweeps on the tridiagonal. Returns ascending values.
pub fn eigenvalues_qr(a: &[f64], n: usize) -> Vec<f64> {
    let (mut d, mut e) = tridiagonalize(a, n);
    ql_implicit(&mut d, &mut e);
    d.sort_by(|x, y| x.partial_cmp(y).expect("NaN eigenvalue"));
    d
}

/// Householder reduction of a symmetric matrix to tridiagonal form; returns
/// the diagonal `d` and subdiagonal `e` (with `e[0]` unused, EISPACK layout).
fn tridiagonalize(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    for i in 0..n {
        for j in 0..i {
            m[j * n + i] = m[i * n + j];
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];

    for i in (1..n).rev() {
        let l = i; // columns 0..l of row i are eliminated
        if l > 1 {
            let scale: f64 = (0..l).map(|k| m[i * n + k].abs()).sum();
            if scale == 0.0 {
                e[i] = m[i * n + l - 1];
            } else {
                let mut v: Vec<f64> = (0..l).map(|k| m[i * n + k] / scale).collect();
                let mut h: f64 = v.iter().map(|x| x * x).sum::<f64>();
                let f = v[l - 1];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                v[l - 1] = f - g;
                // p = A v / h, then rank-2 update A <- A - v p' - p v'.
                let mut p = vec![0.0; l];
                for j in 0..l {
                    let mut s = 0.0;
                    for k in 0..l {
                        s += m[j * n + k] * v[k];
                    }
                    p[j] = s / h;
                }
                let kk: f64 = p.iter().zip(&v).map(|(pi, vi)| pi * vi).sum::<f64>() / (2.0 * h);
                for j in 0..l {
                    p[j] -= kk * v[j];
                }
                for j in 0..l {
                    for k in 0..=j {
                        m[j * n + k] -= v[j] * p[k] + p[j] * v[k];
                        m[k * n + j] = m[j * n + k];
                    }
                }
            }
        } else {
            e[i] = m[i * n + l - 1];
        }
    }
    for i in 0..n {
        d[i] = m[i * n + i];
    }
    (d, e)
}

/// Implicit-shift QL iteration on a symmetric tridiagonal matrix
/// (diagonal `d`, subdiagonal `e` with `e[0]` unused); values only.
fn ql_implicit(d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    if n <= 1 {
        return;
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            // Find a negligible subdiagonal element to split the problem.
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= MAX_QL_ITER, "QL iteration failed to converge");

            // Wilkinson shift from the leading 2x2.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    // Rotation chain annihilated early; restart the sweep.
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_from_diag_plus(diag: &[f64], off: f64) -> Vec<f64> {
        let n = diag.len();
        let mut a = vec![off; n * n];
        for i in 0..n {
            a[i * n + i] = diag[i];
        }
        a
    }

    #[test]
    fn two_by_two_closed_form() {
        // [[2, 1], [1, 2]] has eigenvalues 1 and 3.
        let lam = eigenvalues_sym(&[2.0, 1.0, 1.0, 2.0], 2);
        assert!((lam[0] - 1.0).abs() < 1e-14);
        assert!((lam[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn three_by_three_known_spectrum() {
        // Constant row-sum matrix: diag 2 with all off-diagonals 1 has
        // eigenvalues {1, 1, 4}; degenerate pair triggers the QL fallback.
        let a = dense_from_diag_plus(&[2.0, 2.0, 2.0], 1.0);
        let lam = eigenvalues_sym(&a, 3);
        assert!((lam[0] - 1.0).abs() < 1e-12, "{lam:?}");
        assert!((lam[1] - 1.0).abs() < 1e-12, "{lam:?}");
        assert!((lam[2] - 4.0).abs() < 1e-12, "{lam:?}");
    }

    #[test]
    fn three_by_three_distinct_matches_qr() {
        let a = vec![1.0, 0.3, -0.2, 0.3, 2.0, 0.5, -0.2, 0.5, -1.0];
        let trig = eigenvalues_sym(&a, 3);
        let qr = eigenvalues_qr(&a, 3);
        for (t, q) in trig.iter().zip(&qr) {
            assert!((t - q).abs() < 1e-11, "trig {trig:?} vs qr {qr:?}");
        }
    }

    #[test]
    fn jacobi_matches_qr_for_n5() {
        // Deterministic non-trivial symmetric 5x5.
        let n = 5;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let v = ((i * 7 + j * 3) % 11) as f64 / 11.0 + if i == j { 2.0 } else { 0.0 };
                a[i * n + j] = v;
            }
        }
        for i in 0..n {
            for j in 0..i {
                let s = 0.5 * (a[i * n + j] + a[j * n + i]);
                a[i * n + j] = s;
                a[j * n + i] = s;
            }
        }
        let jac = eigenvalues_sym(&a, n);
        let qr = eigenvalues_qr(&a, n);
        for (x, y) in jac.iter().zip(&qr) {
            assert!((x - y).abs() < 1e-10, "jacobi {jac:?} vs qr {qr:?}");
        }
        // Trace is preserved.
        let tr: f64 = (0..n).map(|i| a[i * n + i]).sum();
        let sum: f64 = jac.iter().sum();
        assert!((tr - sum).abs() < 1e-10);
    }

    #[test]
    fn diagonal_matrix_is_exact() {
        let a = dense_from_diag_plus(&[-3.0, 0.5, 7.0], 0.0);
        let lam = eigenvalues_sym(&a, 3);
        assert_eq!(lam, vec![-3.0, 0.5, 7.0]);
    }
}
