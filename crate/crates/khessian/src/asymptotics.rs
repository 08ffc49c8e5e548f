//! Exterior asymptotics as measurement: subtract the generating quadratic,
//! estimate the affine correction `(b, c)`, fit the decay exponent of the
//! remainder, and provide a closed-form radial-potential oracle that makes
//! the exponent machinery testable against exact rates.
//!
//! The measured object is `w(x) = u(x) - x' A x / 2`. On exterior shells it
//! should behave like `b . x + c + O(r^(-p))` with `p = min(beta, n) - 2`,
//! with an extra `ln r` factor exactly when `beta = n`; the fitting code
//! treats those as empirical hypotheses and reports per-shell residuals so
//! a failed fit is visible rather than silently absorbed.

use crate::error::{Error, Result};
use crate::fmodel::unit_directions;
use crate::grid::GridField;
use crate::symfunc::AkMatrix;

/// Minimum admissible samples per shell.
pub const MIN_SHELL_SAMPLES: usize = 50;
/// The log-corrected model is selected when its residual RMS is at most
/// this fraction of the plain power-law RMS (a declared heuristic: on
/// desk-scale ranges the two models are nearly collinear).
pub const LOG_MODEL_GAIN: f64 = 0.8;
/// Remainders below this are treated as exactly affine; the exponent is
/// then reported as the `f64::INFINITY` sentinel.
pub const REMAINDER_FLOOR: f64 = 1e-12;
/// Exponent search window for the constant-term regression.
const C_FIT_EXPONENT_RANGE: (f64, f64) = (0.05, 10.0);
/// Measurements below this are reported as "no measurable decay".
pub const DERIVATIVE_FLOOR: f64 = 1e-13;

// ---------------------------------------------------------------------------
// Fit report
// ---------------------------------------------------------------------------

/// Result of [`fit_quadratic_remainder`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct AsymptoticFit {
    /// Linear coefficient of the affine correction.
    pub b: Vec<f64>,
    /// Constant coefficient.
    pub c: f64,
    /// Fitted decay exponent `p` of `sup |w - b.x - c| ~ r^(-p)`
    /// (`f64::INFINITY` when the remainder sits below [`REMAINDER_FLOOR`]).
    pub exponent: f64,
    /// Set when the log-corrected model `r^(-p) ln r` fits markedly better.
    pub log_flag: bool,
    /// Geometric-midpoint radius of each shell.
    pub shell_radii: Vec<f64>,
    /// Per-shell sup of `|w - b.x - c|`.
    pub shell_sup: Vec<f64>,
    /// Per-shell RMS of the same residual.
    pub shell_rms: Vec<f64>,
    /// Samples per shell.
    pub shell_counts: Vec<usize>,
}

/// Ordinary least squares line through `(x, y)`: returns
/// `(slope, intercept, rms)`.
fn linfit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut rss = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let e = yi - slope * xi - intercept;
        rss += e * e;
    }
    (slope, intercept, (rss / n).sqrt())
}

/// Dense symmetric-system solve by Gaussian elimination with partial
/// pivoting (systems here are at most 5x5).
fn solve_small(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Result<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        if m[piv][col].abs() < 1e-300 {
            return Err(Error::Numeric("shell fit: singular normal equations".into()));
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for c2 in col..n {
                m[row][c2] -= f * m[col][c2];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for c2 in row + 1..n {
            acc -= m[row][c2] * x[c2];
        }
        x[row] = acc / m[row][row];
    }
    Ok(x)
}

struct Shell {
    points: Vec<Vec<f64>>,
    w: Vec<f64>,
    radius: f64,
}

impl Shell {
    /// Per-shell least-squares fit of `w` against `{1, x_1, ..., x_n}`;
    /// returns `(c_shell, b_shell)`.
    fn affine_fit(&self, n: usize) -> Result<(f64, Vec<f64>)> {
        let dim = n + 1;
        let mut m = vec![vec![0.0; dim]; dim];
        let mut rhs = vec![0.0; dim];
        for (x, &wv) in self.points.iter().zip(&self.w) {
            let mut basis = vec![1.0];
            basis.extend_from_slice(x);
            for i in 0..dim {
                for j in 0..dim {
                    m[i][j] += basis[i] * basis[j];
                }
                rhs[i] += basis[i] * wv;
            }
        }
        let sol = solve_small(m, rhs)?;
        Ok((sol[0], sol[1..].to_vec()))
    }

    fn residual_sup_rms(&self, b: &[f64], c: f64) -> (f64, f64) {
        let mut sup = 0.0f64;
        let mut rss = 0.0;
        for (x, &wv) in self.points.iter().zip(&self.w) {
            let lin: f64 = b.iter().zip(x).map(|(bi, xi)| bi * xi).sum();
            let e = (wv - lin - c).abs();
            sup = sup.max(e);
            rss += e * e;
        }
        (sup, (rss / self.w.len() as f64).sqrt())
    }
}

/// Fit `w = u - x' A x / 2` on a geometric ladder of exterior shells.
///
/// The linear part is estimated from per-shell least squares, combining
/// the outer half of the shells with `r^2` weights. The constant term is
/// then regressed from the per-shell constants against `c + C r^(-q)`
/// (optionally with a `ln r` factor), with `q` found by a direct residual
/// search — deliberately independent of the sup-based exponent below,
/// whose residuals contain `c` itself and would couple the two errors.
/// The reported exponent comes from a log-log regression of the final
/// shell sups, with the log-corrected model selected per
/// [`LOG_MODEL_GAIN`].
pub fn fit_quadratic_remainder(
    u: &GridField,
    a: &AkMatrix,
    r_lo: f64,
    r_hi: f64,
    nshells: usize,
) -> Result<AsymptoticFit> {
    let n = a.dim();
    if u.spec().dim() != n {
        return Err(Error::Argument(format!(
            "fit: field dimension {} != matrix dimension {n}",
            u.spec().dim()
        )));
    }
    if !(r_lo > 0.0) || !(r_hi >= 2.0 * r_lo) {
        return Err(Error::Argument(format!(
            "fit: annulus [{r_lo}, {r_hi}] must satisfy r_hi >= 2 r_lo > 0"
        )));
    }
    if nshells < 4 {
        return Err(Error::Argument(format!(
            "fit: need >= 4 shells, got {nshells}"
        )));
    }

    // Bucket interior nodes into geometric shells.
    let rho = (r_hi / r_lo).powf(1.0 / nshells as f64);
    let mut shells: Vec<Shell> = (0..nshells)
        .map(|j| Shell {
            points: Vec::new(),
            w: Vec::new(),
            radius: r_lo * rho.powf(j as f64 + 0.5),
        })
        .collect();
    let mut x = vec![0.0; n];
    for &idx in u.interior_indices() {
        u.spec().point(idx, &mut x);
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r < r_lo || r >= r_hi {
            continue;
        }
        let j = ((r / r_lo).ln() / rho.ln()).floor() as usize;
        let j = j.min(nshells - 1);
        shells[j].points.push(x.clone());
        shells[j].w.push(u.value(idx) - a.quadratic(&x));
    }
    for (j, sh) in shells.iter().enumerate() {
        if sh.w.len() < MIN_SHELL_SAMPLES {
            return Err(Error::Argument(format!(
                "fit: shell {j} (radius {:.3e}) has {} samples, need >= {}",
                sh.radius,
                sh.w.len(),
                MIN_SHELL_SAMPLES
            )));
        }
    }

    // Per-shell affine fits; the outer half (r^2-weighted) seeds (b, c).
    let mut cb: Vec<(f64, Vec<f64>)> = Vec::with_capacity(nshells);
    for sh in &shells {
        cb.push(sh.affine_fit(n)?);
    }
    let outer_from = nshells / 2;
    let mut wsum = 0.0;
    let mut c_hat = 0.0;
    let mut b_hat = vec![0.0; n];
    for j in outer_from..nshells {
        let w = shells[j].radius * shells[j].radius;
        wsum += w;
        c_hat += w * cb[j].0;
        for (bh, bj) in b_hat.iter_mut().zip(&cb[j].1) {
            *bh += w * bj;
        }
    }
    c_hat /= wsum;
    for bh in &mut b_hat {
        *bh /= wsum;
    }

    let ln_r: Vec<f64> = shells.iter().map(|s| s.radius.ln()).collect();
    let fit_models = |sups: &[f64]| -> Option<(f64, f64, bool)> {
        if sups.iter().any(|&s| s <= 0.0) {
            return None;
        }
        let ln_sup: Vec<f64> = sups.iter().map(|s| s.ln()).collect();
        let (slope_a, _, rms_a) = linfit(&ln_r, &ln_sup);
        // Log-corrected model: sup = C r^(-p) ln r.
        let ln_sup_b: Vec<f64> = ln_sup
            .iter()
            .zip(&ln_r)
            .map(|(s, lr)| s - lr.ln())
            .collect();
        let (slope_b, _, rms_b) = linfit(&ln_r, &ln_sup_b);
        let log_flag = rms_b <= LOG_MODEL_GAIN * rms_a;
        Some(if log_flag {
            (-slope_b, rms_b, true)
        } else {
            (-slope_a, rms_a, false)
        })
    };

    // Constant term: weighted LSQ of the shell constants against
    // {1, r^(-q) (ln r)} with the decay rate q found by golden-section
    // search on the weighted residual. The shell constants are sample
    // means, so this regression never sees the sup statistics (and hence
    // never sees its own previous c estimate).
    let cb_rss = |q: f64, with_log: bool| -> Option<(f64, f64)> {
        let mut m = vec![vec![0.0; 2]; 2];
        let mut rhs = vec![0.0; 2];
        for (j, sh) in shells.iter().enumerate() {
            let wgt = sh.radius * sh.radius;
            let mut basis1 = sh.radius.powf(-q);
            if with_log {
                basis1 *= sh.radius.ln();
            }
            let basis = [1.0, basis1];
            for i in 0..2 {
                for l in 0..2 {
                    m[i][l] += wgt * basis[i] * basis[l];
                }
                rhs[i] += wgt * basis[i] * cb[j].0;
            }
        }
        let sol = solve_small(m, rhs).ok()?;
        let mut rss = 0.0;
        for (j, sh) in shells.iter().enumerate() {
            let mut basis1 = sh.radius.powf(-q);
            if with_log {
                basis1 *= sh.radius.ln();
            }
            let e = cb[j].0 - sol[0] - sol[1] * basis1;
            rss += sh.radius * sh.radius * e * e;
        }
        Some((rss, sol[0]))
    };
    let mut best: Option<(f64, f64)> = None;
    for with_log in [false, true] {
        let (mut lo, mut hi) = (C_FIT_EXPONENT_RANGE.0.ln(), C_FIT_EXPONENT_RANGE.1.ln());
        let phi = 0.5 * (5.0f64.sqrt() - 1.0);
        for _ in 0..80 {
            let qa = hi - phi * (hi - lo);
            let qb = lo + phi * (hi - lo);
            let fa = cb_rss(qa.exp(), with_log).map_or(f64::INFINITY, |r| r.0);
            let fb = cb_rss(qb.exp(), with_log).map_or(f64::INFINITY, |r| r.0);
            if fa <= fb {
                hi = qb;
            } else {
                lo = qa;
            }
        }
        if let Some((rss, c)) = cb_rss((0.5 * (lo + hi)).exp(), with_log) {
            if best.is_none_or(|(brss, _)| rss < brss) {
                best = Some((rss, c));
            }
        }
    }
    if let Some((_, c)) = best {
        c_hat = c;
    }

    // Reported exponent: log-log regression of the shell rms statistics
    // under the final (b, c). The rms is a shell average, so it is immune
    // to the inner-edge quantization that makes shell sups jitter by
    // ~h/(2r) in log terms — jitter that would mask the curvature
    // distinguishing the logarithmic model. Both statistics are still
    // reported per shell.
    let mut exponent = f64::INFINITY;
    let mut log_flag = false;
    let rmses: Vec<f64> = shells
        .iter()
        .map(|sh| sh.residual_sup_rms(&b_hat, c_hat).1)
        .collect();
    if rmses.iter().cloned().fold(0.0, f64::max) >= REMAINDER_FLOOR {
        if let Some((p, _, flag)) = fit_models(&rmses) {
            exponent = p;
            log_flag = flag;
        }
    }

    let mut shell_sup = Vec::with_capacity(nshells);
    let mut shell_rms = Vec::with_capacity(nshells);
    for sh in &shells {
        let (s, r) = sh.residual_sup_rms(&b_hat, c_hat);
        shell_sup.push(s);
        shell_rms.push(r);
    }
    Ok(AsymptoticFit {
        b: b_hat,
        c: c_hat,
        exponent,
        log_flag,
        shell_radii: shells.iter().map(|s| s.radius).collect(),
        shell_sup,
        shell_rms,
        shell_counts: shells.iter().map(|s| s.w.len()).collect(),
    })
}

// ---------------------------------------------------------------------------
// Radial potential oracle
// ---------------------------------------------------------------------------

/// Radial source `g(r) = r^(-delta)` supported on `r >= r0`, feeding the
/// exact-exponent oracle for the fitting machinery.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct RadialSource {
    delta: f64,
    n: usize,
    r0: f64,
}

impl RadialSource {
    pub fn new(n: usize, delta: f64, r0: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::Argument(format!(
                "radial source: n = {n} must be >= 3"
            )));
        }
        if !(delta > 2.0) || !delta.is_finite() {
            return Err(Error::Argument(format!(
                "radial source: delta = {delta} must be > 2"
            )));
        }
        if !(r0 > 0.0) || !r0.is_finite() {
            return Err(Error::Argument(format!(
                "radial source: r0 = {r0} must be > 0"
            )));
        }
        Ok(RadialSource { delta, n, r0 })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    fn check_r(&self, r: f64) -> Result<()> {
        if r <= self.r0 {
            return Err(Error::Argument(format!(
                "radial potential: r = {r} must exceed r0 = {}",
                self.r0
            )));
        }
        Ok(())
    }
}

/// `h'(r) = r^(1-n) * integral(r0..r) s^(n-1) s^(-delta) ds` in closed
/// form (logarithmic branch at `delta = n`).
pub fn radial_potential_deriv(src: &RadialSource, r: f64) -> Result<f64> {
    src.check_r(r)?;
    let nf = src.n as f64;
    let d = src.delta;
    if (d - nf).abs() < 1e-12 {
        Ok(r.powf(1.0 - nf) * (r / src.r0).ln())
    } else {
        Ok((r.powf(1.0 - d) - src.r0.powf(nf - d) * r.powf(1.0 - nf)) / (nf - d))
    }
}

/// The radial potential `h` with `(r^(n-1) h')' = r^(n-1) g` and
/// `h(infinity) = 0`: `h(r) = -integral(r..infinity) h'(t) dt`, in closed
/// form for both exponent branches.
pub fn radial_potential(src: &RadialSource, r: f64) -> Result<f64> {
    src.check_r(r)?;
    let nf = src.n as f64;
    let d = src.delta;
    if (d - nf).abs() < 1e-12 {
        // integral of t^(1-n) ln(t/r0) from r to infinity.
        let q = nf - 2.0;
        Ok(-r.powf(-q) * ((r / src.r0).ln() / q + 1.0 / (q * q)))
    } else {
        let tail_delta = r.powf(2.0 - d) / (d - 2.0);
        let tail_n = src.r0.powf(nf - d) * r.powf(2.0 - nf) / (nf - 2.0);
        Ok(-(tail_delta - tail_n) / (nf - d))
    }
}

/// Analytic decay prediction: `(min(delta, n) - 2, delta == n)` — the
/// exponent of `|h|` and whether a logarithmic factor appears.
pub fn decay_rate_oracle(src: &RadialSource) -> (f64, bool) {
    let nf = src.n as f64;
    (src.delta.min(nf) - 2.0, (src.delta - nf).abs() < 1e-12)
}

// ---------------------------------------------------------------------------
// Derivative decay table
// ---------------------------------------------------------------------------

/// Per-radius sup norms of `w`, `grad w`, `D^2 w` with fitted log-log
/// slopes. Slopes are `None` when the corresponding sups sit below the
/// measurement floor.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DecayTable {
    pub radii: Vec<f64>,
    pub sup_w: Vec<f64>,
    pub sup_grad: Vec<f64>,
    pub sup_hess: Vec<f64>,
    /// Fitted slopes for m = 0, 1, 2.
    pub slopes: [Option<f64>; 3],
    /// Slope gaps between consecutive derivative orders (expected ~ -1).
    pub slope_gaps: [Option<f64>; 2],
}

/// Sample `w = u - x' A x / 2` and its first two finite-difference
/// derivatives on spheres of the given radii (seeded directions, FD step =
/// the grid spacing), and fit per-order log-log slopes.
pub fn derivative_decay_report(
    u: &GridField,
    a: &AkMatrix,
    radii: &[f64],
) -> Result<DecayTable> {
    let n = a.dim();
    if u.spec().dim() != n {
        return Err(Error::Argument(format!(
            "decay report: field dimension {} != matrix dimension {n}",
            u.spec().dim()
        )));
    }
    if radii.len() < 2 || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument(
            "decay report: need >= 2 strictly increasing radii".into(),
        ));
    }
    let dirs = unit_directions(n, 200, 11);
    let h = u.spec().h_max();
    let w_at = |x: &[f64]| -> Result<f64> { Ok(u.interpolate(x)? - a.quadratic(x)) };

    let mut sup_w = Vec::with_capacity(radii.len());
    let mut sup_grad = Vec::with_capacity(radii.len());
    let mut sup_hess = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut s0 = 0.0f64;
        let mut s1 = 0.0f64;
        let mut s2 = 0.0f64;
        for dir in &dirs {
            let x: Vec<f64> = dir.iter().map(|d| d * r).collect();
            let w0 = w_at(&x)?;
            s0 = s0.max(w0.abs());
            let mut grad2 = 0.0;
            let mut hess2 = 0.0;
            for i in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let (wp, wm) = (w_at(&xp)?, w_at(&xm)?);
                let gi = (wp - wm) / (2.0 * h);
                grad2 += gi * gi;
                let hii = (wp - 2.0 * w0 + wm) / (h * h);
                hess2 += hii * hii;
                for j in i + 1..n {
                    let mut xpp = x.clone();
                    let mut xpm = x.clone();
                    let mut xmp = x.clone();
                    let mut xmm = x.clone();
                    xpp[i] += h;
                    xpp[j] += h;
                    xpm[i] += h;
                    xpm[j] -= h;
                    xmp[i] -= h;
                    xmp[j] += h;
                    xmm[i] -= h;
                    xmm[j] -= h;
                    let hij = (w_at(&xpp)? - w_at(&xpm)? - w_at(&xmp)? + w_at(&xmm)?)
                        / (4.0 * h * h);
                    hess2 += 2.0 * hij * hij;
                }
            }
            s1 = s1.max(grad2.sqrt());
            s2 = s2.max(hess2.sqrt());
        }
        sup_w.push(s0);
        sup_grad.push(s1);
        sup_hess.push(s2);
    }

    let ln_r: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let slope_of = |sups: &[f64]| -> Option<f64> {
        if sups.iter().any(|&s| s <= DERIVATIVE_FLOOR) {
            return None;
        }
        let ln_s: Vec<f64> = sups.iter().map(|s| s.ln()).collect();
        Some(linfit(&ln_r, &ln_s).0)
    };
    let slopes = [slope_of(&sup_w), slope_of(&sup_grad), slope_of(&sup_hess)];
    let gap = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(x), Some(y)) => Some(y - x),
        _ => None,
    };
    let slope_gaps = [gap(slopes[0], slopes[1]), gap(slopes[1], slopes[2])];
    Ok(DecayTable {
        radii: radii.to_vec(),
        sup_w,
        sup_grad,
        sup_hess,
        slopes,
        slope_gaps,
    })
}
