//! Rescaling diagnostic: quantify how fast an entire solution of
//! `sigma_k(lambda(D^2 u)) = 1` becomes a quadratic polynomial.
//!
//! For each scale `R` the field is viewed through `v(x) = (u(Rx) - R^2) /
//! R^2`, whose Hessian satisfies `D^2 v(x) = D^2 u(Rx)`. Two per-scale
//! metrics are reported:
//!
//! * `sup |D^2 u - A|` over the outer half of the ball `B_(R / sqrt(8 A2))`
//!   (minus an optional exclusion around a right-hand-side bump), and
//! * a Hölder-seminorm proxy: the maximum difference quotient
//!   `|D^2 u(x) - D^2 u(y)|_F / (|x - y| / R)^alpha` over sampled node
//!   pairs with `|x - y| >= R/4` — equivalently, the original-coordinate
//!   quotient multiplied by `R^alpha`.
//!
//! For a true quadratic both metrics sit at the finite-difference rounding
//! floor independently of `R`; decay toward that floor as `R` grows is the
//! numerical signature of the rigidity statement. Level-set inclusion radii
//! of `{v < 0}` are recorded alongside as a growth-hypothesis check.

use crate::dirichlet::discrete_hessian;
use crate::error::{Error, Result};
use crate::fmodel::unit_directions;
use crate::grid::{GridField, GridSpec};
use crate::symfunc::{AkMatrix, SymMatrix};

/// Default Hölder exponent for the seminorm proxy.
pub const DEFAULT_ALPHA: f64 = 0.5;
/// Maximum nodes entering the pairwise proxy per scale (strided
/// deterministically from the filtered node list).
const MAX_PROXY_NODES: usize = 256;
/// Direction count for level-set probing.
const LEVEL_DIRECTIONS: usize = 64;

/// Rounding floor for finite-difference Hessian metrics on this field:
/// `64 eps max|u| / h_min^2`. Decay statements are meaningful only down to
/// this scale.
pub fn noise_floor(u: &GridField) -> f64 {
    let umax = u
        .values()
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()));
    let hmin = u
        .spec()
        .spacing()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    64.0 * f64::EPSILON * umax.max(1.0) / (hmin * hmin)
}

// ---------------------------------------------------------------------------
// Rescaling
// ---------------------------------------------------------------------------

/// The rescaled field `v(x) = (u(Rx) - R^2) / R^2` sampled on the unit-scale
/// box `[-1, 1]^n` with `m` nodes per axis (cubic interpolation of `u`).
pub fn rescale(u: &GridField, r: f64, m: usize) -> Result<GridField> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Argument(format!("rescale: R = {r} must be > 0")));
    }
    let n = u.spec().dim();
    let spec = GridSpec::box_domain(&vec![-1.0; n], &vec![1.0; n], &vec![m; n])?;
    let mut values = Vec::with_capacity(spec.total_nodes());
    let mut x = vec![0.0; n];
    for idx in 0..spec.total_nodes() {
        spec.point(idx, &mut x);
        let y: Vec<f64> = x.iter().map(|v| v * r).collect();
        let uy = u.interpolate(&y).map_err(|e| {
            Error::Argument(format!(
                "rescale: R = {r} pushes the sampling box outside the field ({e})"
            ))
        })?;
        values.push((uy - r * r) / (r * r));
    }
    GridField::raw(&spec, values)
}

// ---------------------------------------------------------------------------
// Level-set geometry
// ---------------------------------------------------------------------------

/// Empirical and predicted radii of the sublevel set
/// `Omega_R = {x : u(Rx) < R^2}` in unit-scale coordinates.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LevelSetBounds {
    /// Smallest boundary radius over probed directions.
    pub inner: f64,
    /// Largest boundary radius over probed directions.
    pub outer: f64,
    /// `sqrt(1/A2 - B/(A2 R^2))` from the growth hypothesis.
    pub inner_predicted: f64,
    /// `1/sqrt(A1)`.
    pub outer_predicted: f64,
    /// Count of sampled points violating `A1|x|^2 <= u <= A2|x|^2 + B`
    /// (reported, never fatal).
    pub growth_violations: usize,
    /// Directions whose crossing lies outside the field hull (or beyond the
    /// growth cap) and were skipped.
    pub censored: usize,
    /// Whether the predicted inclusions hold within one grid cell on the
    /// probed directions.
    pub inclusions_hold: bool,
}

/// Largest `t` such that `t * r * dir` stays inside the node hull
/// `[lo, hi]` (componentwise), assuming the origin is interior.
fn hull_exit(lo: &[f64], hi: &[f64], dir: &[f64], r: f64) -> f64 {
    let mut t = f64::INFINITY;
    for i in 0..dir.len() {
        let d = dir[i] * r;
        if d > 0.0 {
            t = t.min(hi[i] / d);
        } else if d < 0.0 {
            t = t.min(lo[i] / d);
        }
    }
    t
}

/// Probe `Omega_R` along seeded directions by bisection on the ray
/// `t -> u(R t d) - R^2`, under the growth hypothesis
/// `A1 |x|^2 <= u(x) <= A2 |x|^2 + B`.
///
/// Directions whose crossing is not bracketed inside the field hull by the
/// growth cap `1.05 / sqrt(A1)` are censored (counted, skipped); the
/// returned radii summarize the surviving directions. All directions
/// censored is an error — the scale is too large for the field.
pub fn level_set_bounds(
    u: &GridField,
    r: f64,
    a1: f64,
    a2: f64,
    b: f64,
) -> Result<LevelSetBounds> {
    if !(a1 > 0.0) || !(a2 >= a1) || !(b >= 0.0) {
        return Err(Error::Argument(format!(
            "level set: need 0 < A1 <= A2 and B >= 0, got ({a1}, {a2}, {b})"
        )));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Argument(format!("level set: R = {r} must be > 0")));
    }
    let n = u.spec().dim();
    let origin = u.interpolate(&vec![0.0; n])?;
    if origin >= r * r {
        return Err(Error::Argument(format!(
            "level set: origin value {origin} already exceeds R^2 = {}",
            r * r
        )));
    }
    let mut hull_lo = vec![0.0; n];
    let mut hull_hi = vec![0.0; n];
    u.spec().point(0, &mut hull_lo);
    u.spec().point(u.spec().total_nodes() - 1, &mut hull_hi);
    // Beyond t = 1/sqrt(A1) the lower growth bound forces u >= R^2.
    let t_cap = 1.05 / a1.sqrt();
    let mut inner = f64::INFINITY;
    let mut outer: f64 = 0.0;
    let mut violations = 0usize;
    let mut censored = 0usize;
    for dir in unit_directions(n, LEVEL_DIRECTIONS, 23) {
        let eval = |t: f64| -> Result<f64> {
            let y: Vec<f64> = dir.iter().map(|d| d * t * r).collect();
            u.interpolate(&y)
        };
        let t_exit = hull_exit(&hull_lo, &hull_hi, &dir, r) * (1.0 - 1e-12);
        let mut hi = t_cap.min(t_exit);
        if eval(hi)? < r * r {
            // No bracket before the hull (or the growth cap): the crossing
            // is out of reach on this ray. A crossing past the cap also
            // contradicts the lower growth bound, so record a violation.
            censored += 1;
            if hi == t_cap {
                violations += 1;
            }
            continue;
        }
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if eval(mid)? < r * r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t_star = 0.5 * (lo + hi);
        inner = inner.min(t_star);
        outer = outer.max(t_star);
        // Growth-hypothesis samples at the boundary point and halfway in.
        for t in [0.5 * t_star, t_star] {
            let y: Vec<f64> = dir.iter().map(|d| d * t * r).collect();
            let uy = u.interpolate(&y)?;
            let rr: f64 = y.iter().map(|v| v * v).sum();
            let tol = 1e-9 * (1.0 + uy.abs());
            if uy < a1 * rr - tol || uy > a2 * rr + b + tol {
                violations += 1;
            }
        }
    }
    if censored == LEVEL_DIRECTIONS {
        return Err(Error::Argument(format!(
            "level set: all {LEVEL_DIRECTIONS} probe directions exit the field \
             hull before crossing at R = {r}; enlarge the field or shrink R"
        )));
    }
    let inner_predicted = (1.0 / a2 - b / (a2 * r * r)).max(0.0).sqrt();
    let outer_predicted = 1.0 / a1.sqrt();
    let cell = u.spec().h_max() / r;
    let inclusions_hold = inner >= inner_predicted - cell && outer <= outer_predicted + cell;
    Ok(LevelSetBounds {
        inner,
        outer,
        inner_predicted,
        outer_predicted,
        growth_violations: violations,
        censored,
        inclusions_hold,
    })
}

// ---------------------------------------------------------------------------
// Hessian decay report
// ---------------------------------------------------------------------------

/// Per-scale rigidity metrics; see the module docs for definitions.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RescaleReport {
    pub r_values: Vec<f64>,
    /// `sup |D^2 u - A|_F` over the sampled annulus, per scale.
    pub sup_dev: Vec<f64>,
    /// Hölder proxy (difference quotient x `R^alpha`), per scale.
    pub holder_rescaled: Vec<f64>,
    /// Level-set probe per scale; `None` when the probe could not bracket
    /// the boundary inside the field at that scale (advisory, never fatal).
    pub level: Vec<Option<LevelSetBounds>>,
    pub alpha: f64,
    /// FD rounding floor of the input field.
    pub noise_floor: f64,
}

/// Compute the per-scale metrics over `r_list` (increasing). Samples live
/// in the outer half of the ball `B_(R / sqrt(8 A2))`, `A2 = max(a)/2`,
/// excluding `|x| < exclude_radius` (use the right-hand-side bump radius
/// when the solved problem has one; 0 otherwise).
pub fn hessian_decay(
    u: &GridField,
    r_list: &[f64],
    a: &AkMatrix,
    alpha: f64,
    exclude_radius: f64,
) -> Result<RescaleReport> {
    let n = a.dim();
    if u.spec().dim() != n {
        return Err(Error::Argument(format!(
            "hessian decay: field dimension {} != matrix dimension {n}",
            u.spec().dim()
        )));
    }
    if r_list.is_empty() || r_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument(
            "hessian decay: scales must be nonempty and strictly increasing".into(),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Argument(format!(
            "hessian decay: alpha = {alpha} must lie in (0, 1)"
        )));
    }
    if !(exclude_radius >= 0.0) {
        return Err(Error::Argument("hessian decay: negative exclusion".into()));
    }

    let a_mat = a.matrix();
    let a2 = a.max_diag() / 2.0;
    let mut x = vec![0.0; n];

    // Growth constants for the level-set probe: structural A1/A2 plus an
    // empirical offset B making the upper bound valid on the field.
    let a1_growth = a.min_diag() / 2.0;
    let mut b_growth = 0.0f64;
    for &idx in u.interior_indices() {
        u.spec().point(idx, &mut x);
        let rr: f64 = x.iter().map(|v| v * v).sum();
        b_growth = b_growth.max(u.value(idx) - a2 * rr);
    }

    let mut report = RescaleReport {
        r_values: r_list.to_vec(),
        sup_dev: Vec::new(),
        holder_rescaled: Vec::new(),
        level: Vec::new(),
        alpha,
        noise_floor: noise_floor(u),
    };

    for &r in r_list {
        let ball = r / (8.0 * a2).sqrt();
        let lo = (0.5 * ball).max(exclude_radius);
        if lo >= ball {
            return Err(Error::Argument(format!(
                "hessian decay: exclusion radius {exclude_radius} swallows the \
                 sampling annulus at R = {r} (ball radius {ball:.3})"
            )));
        }
        // Collect node Hessian deviations on the annulus.
        let mut nodes: Vec<(Vec<f64>, SymMatrix)> = Vec::new();
        let mut sup = 0.0f64;
        for &idx in u.interior_indices() {
            u.spec().point(idx, &mut x);
            let rr = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rr <= lo || rr > ball {
                continue;
            }
            let Ok(h) = discrete_hessian(u, idx) else {
                continue;
            };
            let dev = h.add_scaled(&a_mat, -1.0);
            sup = sup.max(dev.norm());
            nodes.push((x.clone(), h));
        }
        if nodes.is_empty() {
            return Err(Error::Argument(format!(
                "hessian decay: no interior nodes in the annulus [{lo:.3}, \
                 {ball:.3}] at R = {r}; enlarge the field or shrink R"
            )));
        }
        // Strided subset for the pairwise proxy.
        let stride = nodes.len().div_ceil(MAX_PROXY_NODES);
        let subset: Vec<&(Vec<f64>, SymMatrix)> = nodes.iter().step_by(stride).collect();
        let mut proxy = 0.0f64;
        for (i, (xi, hi)) in subset.iter().enumerate() {
            for (xj, hj) in subset.iter().skip(i + 1) {
                let d2: f64 = xi
                    .iter()
                    .zip(xj.iter())
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum();
                let d = d2.sqrt();
                if d < 0.25 * r {
                    continue;
                }
                let diff = hi.add_scaled(hj, -1.0).norm();
                proxy = proxy.max(diff / (d / r).powf(alpha));
            }
        }
        report.sup_dev.push(sup);
        report.holder_rescaled.push(proxy);
        report
            .level
            .push(level_set_bounds(u, r, a1_growth, a2, b_growth).ok());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symfunc::normalize_to_ak;

    fn iso3() -> AkMatrix {
        normalize_to_ak(&[1.0, 1.0, 1.0], 2).unwrap()
    }

    fn quad_field(a: &AkMatrix, l: f64, m: usize) -> GridField {
        let spec = GridSpec::box_domain(&[-l; 3], &[l; 3], &[m; 3]).unwrap();
        let aq = a.clone();
        GridField::from_fn(&spec, move |x| aq.quadratic(x)).unwrap()
    }

    #[test]
    fn rescale_quadratic_identity() {
        let a = iso3();
        let u = quad_field(&a, 10.0, 33);
        let v = rescale(&u, 5.0, 17).unwrap();
        // q(Rx)/R^2 = q(x), so v = q - 1.
        let aq = a.clone();
        let err = v.sup_error(|x| aq.quadratic(x) - 1.0, None);
        assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn rescale_constant_shift_scales() {
        let a = iso3();
        let spec = GridSpec::box_domain(&[-10.0; 3], &[10.0; 3], &[33; 3]).unwrap();
        let aq = a.clone();
        let u = GridField::from_fn(&spec, move |x| aq.quadratic(x) + 7.0).unwrap();
        let v = rescale(&u, 5.0, 17).unwrap();
        let aq = a.clone();
        let err = v.sup_error(|x| aq.quadratic(x) - 1.0 + 7.0 / 25.0, None);
        assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn rescale_rejects_out_of_domain() {
        let a = iso3();
        let u = quad_field(&a, 10.0, 33);
        assert!(matches!(rescale(&u, 20.0, 17), Err(Error::Argument(_))));
    }

    #[test]
    fn level_set_isotropic_unit() {
        let spec = GridSpec::box_domain(&[-3.0; 3], &[3.0; 3], &[33; 3]).unwrap();
        let u = GridField::from_fn(&spec, |x| x.iter().map(|v| v * v).sum()).unwrap();
        let b = level_set_bounds(&u, 2.0, 1.0, 1.0, 0.0).unwrap();
        let cell = u.spec().h_max() / 2.0;
        assert!((b.inner - 1.0).abs() <= cell, "inner {}", b.inner);
        assert!((b.outer - 1.0).abs() <= cell, "outer {}", b.outer);
        assert_eq!(b.growth_violations, 0);
        assert!(b.inclusions_hold);
    }

    #[test]
    fn level_set_constant_offset() {
        let spec = GridSpec::box_domain(&[-3.0; 3], &[3.0; 3], &[49; 3]).unwrap();
        let u =
            GridField::from_fn(&spec, |x| x.iter().map(|v| v * v).sum::<f64>() + 1.0).unwrap();
        let r = 2.0;
        let b = level_set_bounds(&u, r, 1.0, 1.0, 1.0).unwrap();
        let want = (1.0 - 1.0 / (r * r)).sqrt();
        let cell = u.spec().h_max() / r;
        assert!((b.inner - want).abs() <= cell, "inner {} vs {want}", b.inner);
        assert!((b.outer - want).abs() <= cell, "outer {} vs {want}", b.outer);
        assert!(b.inclusions_hold);
    }

    #[test]
    fn level_set_anisotropic_radii() {
        let spec = GridSpec::box_domain(&[-3.0; 3], &[3.0; 3], &[49; 3]).unwrap();
        let u = GridField::from_fn(&spec, |x| {
            x[0] * x[0] + 4.0 * x[1] * x[1] + 2.0 * x[2] * x[2]
        })
        .unwrap();
        let b = level_set_bounds(&u, 2.0, 1.0, 4.0, 0.0).unwrap();
        let cell = u.spec().h_max() / 2.0;
        assert!((b.outer - 1.0).abs() <= cell + 0.05, "outer {}", b.outer);
        assert!((b.inner - 0.5).abs() <= cell + 0.05, "inner {}", b.inner);
        assert!(b.inclusions_hold);
    }

    #[test]
    fn decay_exact_quadratic_floor() {
        let a = iso3();
        let u = quad_field(&a, 20.0, 41);
        let rep = hessian_decay(&u, &[2.5, 5.0, 10.0], &a, DEFAULT_ALPHA, 0.0).unwrap();
        for (s, h) in rep.sup_dev.iter().zip(&rep.holder_rescaled) {
            assert!(*s <= 1e-10, "sup dev {s}");
            assert!(*h <= 1e-10, "holder {h}");
        }
        // R-independence at the rounding level.
        let smax = rep.sup_dev.iter().cloned().fold(0.0f64, f64::max);
        let smin = rep.sup_dev.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(smax - smin <= 1e-10);
        // The level probe brackets at every scale for this field.
        assert!(rep.level.iter().all(|l| l.is_some()));
    }

    #[test]
    fn decay_invariant_under_affine_addition() {
        let a = iso3();
        let spec = GridSpec::box_domain(&[-10.0; 3], &[10.0; 3], &[33; 3]).unwrap();
        let aq = a.clone();
        let u1 = GridField::from_fn(&spec, move |x| aq.quadratic(x)).unwrap();
        let aq = a.clone();
        let u2 =
            GridField::from_fn(&spec, move |x| aq.quadratic(x) + 0.3 * x[0] - 0.2).unwrap();
        let r1 = hessian_decay(&u1, &[2.0, 4.0], &a, DEFAULT_ALPHA, 0.0).unwrap();
        let r2 = hessian_decay(&u2, &[2.0, 4.0], &a, DEFAULT_ALPHA, 0.0).unwrap();
        for (x, y) in r1.sup_dev.iter().zip(&r2.sup_dev) {
            assert!((x - y).abs() <= 1e-12);
        }
        for (x, y) in r1.holder_rescaled.iter().zip(&r2.holder_rescaled) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn decay_synthetic_tail_strictly_decreasing() {
        let a = iso3();
        let spec = GridSpec::box_domain(&[-40.0; 3], &[40.0; 3], &[65; 3]).unwrap();
        let aq = a.clone();
        let u = GridField::from_fn(&spec, move |x| {
            let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            aq.quadratic(x) + r.max(0.5).recip()
        })
        .unwrap();
        let alpha = DEFAULT_ALPHA;
        let rep = hessian_decay(&u, &[8.0, 16.0, 32.0], &a, alpha, 0.0).unwrap();
        for w in rep.sup_dev.windows(2) {
            assert!(w[1] < w[0], "sup dev not decreasing: {:?}", rep.sup_dev);
        }
        for w in rep.holder_rescaled.windows(2) {
            assert!(
                w[1] < w[0],
                "holder not decreasing: {:?}",
                rep.holder_rescaled
            );
        }
        // Upper-bound rate check: slope at most alpha - 3 (plus slack).
        let slope = (rep.holder_rescaled[2] / rep.holder_rescaled[0]).ln()
            / (rep.r_values[2] / rep.r_values[0]).ln();
        assert!(slope <= alpha - 3.0 + 0.3, "slope {slope}");
    }

    #[test]
    fn level_set_censors_axis_directions() {
        // u = |x|^2 / 4: the crossing sits at t = 2, past the hull exit of
        // near-axis rays (3/2) but inside it for near-diagonal rays.
        let spec = GridSpec::box_domain(&[-3.0; 3], &[3.0; 3], &[33; 3]).unwrap();
        let u = GridField::from_fn(&spec, |x| {
            x.iter().map(|v| v * v).sum::<f64>() / 4.0
        })
        .unwrap();
        let b = level_set_bounds(&u, 2.0, 0.25, 0.25, 0.0).unwrap();
        assert!(b.censored > 0, "expected censored rays, got {b:?}");
        let cell = u.spec().h_max() / 2.0;
        assert!((b.inner - 2.0).abs() <= cell, "inner {}", b.inner);
        assert!((b.outer - 2.0).abs() <= cell, "outer {}", b.outer);
        assert!(b.inclusions_hold);
        // Push the scale until even diagonals exit before crossing.
        assert!(matches!(
            level_set_bounds(&u, 2.9, 0.25, 0.25, 0.0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn decay_exclusion_guard() {
        let a = iso3();
        let u = quad_field(&a, 20.0, 41);
        // ball(8) ~ 5.26 < exclusion: the annulus is empty.
        assert!(matches!(
            hessian_decay(&u, &[8.0], &a, DEFAULT_ALPHA, 12.0),
            Err(Error::Argument(_))
        ));
    }
}
