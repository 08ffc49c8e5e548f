//! Analytic right-hand-side families `f = 1 + perturbation` with certified
//! bounds.
//!
//! The solver and the barrier construction need more than point values of
//! `f`: they need a certified positive lower bound (`inf f > 0`), derivatives
//! up to third order (to verify decay hypotheses), and a certified radial
//! envelope `1 - C0 s^(-beta/2) <= f <= 1 + C0 s^(-beta/2)` on the level sets
//! `{x' A x / 2 = s}` past some starting level `s0`. Every variant here is
//! simple enough that all of these are available in closed form:
//!
//! * [`FModel::constant`] — `f = 1` exactly;
//! * [`FModel::power_tail`] — `f = 1 ± c0 (1 + |x|^2)^(-beta/2)`, a smooth
//!   global perturbation with exact algebraic decay;
//! * [`FModel::bump`] — `f = 1 + amplitude * phi(|x - center| / radius)`
//!   with the standard smooth compactly supported profile
//!   `phi(t) = exp(1 - 1/(1 - t^2))`;
//! * [`FModel::sum`] — superposition of the above (perturbations add).

use crate::barriers::TailEnvelope;
use crate::error::{Error, Result};
use crate::symfunc::{AkMatrix, SymMatrix};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Derivatives of `f` at a point, filled up to the requested order.
#[derive(Debug, Clone)]
pub struct FJet {
    pub value: f64,
    /// Gradient, length n (order >= 1).
    pub gradient: Option<Vec<f64>>,
    /// Hessian (order >= 2).
    pub hessian: Option<SymMatrix>,
    /// Third derivative tensor, length n^3, index `(i*n + j)*n + k`
    /// (order >= 3; fully symmetric).
    pub third: Option<Vec<f64>>,
}

/// Right-hand side `f` for the k-Hessian equation. Invariant maintained by
/// all constructors: the certified infimum [`FModel::inf_bound`] is strictly
/// positive, so `f^(1/k)` is well defined everywhere.
#[derive(Debug, Clone, PartialEq)]
pub enum FModel {
    Constant,
    PowerTail {
        c0: f64,
        beta: f64,
        /// +1.0 or -1.0.
        sign: f64,
    },
    Bump {
        center: Vec<f64>,
        radius: f64,
        amplitude: f64,
    },
    Sum(Vec<FModel>),
}

impl FModel {
    /// `f = 1`.
    pub fn constant() -> Self {
        FModel::Constant
    }

    /// `f = 1 + sign * c0 * (1 + |x|^2)^(-beta/2)`.
    ///
    /// Requires `c0 >= 0`, `beta > 2`, `sign = ±1`, and `c0 < 1` when the
    /// perturbation is negative (otherwise `f(0) <= 0`).
    pub fn power_tail(c0: f64, beta: f64, sign: f64) -> Result<Self> {
        if !(c0 >= 0.0) || !c0.is_finite() {
            return Err(Error::Argument(format!("power_tail: c0 = {c0} must be >= 0")));
        }
        if !(beta > 2.0) || !beta.is_finite() {
            return Err(Error::Argument(format!(
                "power_tail: beta = {beta} must be > 2 (slower tails do not integrate)"
            )));
        }
        if sign != 1.0 && sign != -1.0 {
            return Err(Error::Argument(format!("power_tail: sign = {sign} must be ±1")));
        }
        if sign < 0.0 && c0 >= 1.0 {
            return Err(Error::Argument(format!(
                "power_tail: negative perturbation with c0 = {c0} >= 1 makes inf f <= 0"
            )));
        }
        Ok(FModel::PowerTail { c0, beta, sign })
    }

    /// `f = 1 + amplitude * phi(|x - center| / radius)` with the smooth
    /// compactly supported profile `phi(t) = exp(1 - 1/(1 - t^2))` (so
    /// `phi(0) = 1` and `f = 1 + amplitude` at the center).
    ///
    /// Requires `radius > 0`, finite center, and `amplitude > -1`.
    pub fn bump(center: Vec<f64>, radius: f64, amplitude: f64) -> Result<Self> {
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::Argument("bump: center must be finite and non-empty".into()));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Argument(format!("bump: radius = {radius} must be > 0")));
        }
        if !(amplitude > -1.0) || !amplitude.is_finite() {
            return Err(Error::Argument(format!(
                "bump: amplitude = {amplitude} must exceed -1 to keep f positive"
            )));
        }
        Ok(FModel::Bump {
            center,
            radius,
            amplitude,
        })
    }

    /// Superposition: `f = 1 + sum_i (f_i - 1)`. Requires at least one term,
    /// consistent dimensions, and a positive combined certified infimum.
    pub fn sum(terms: Vec<FModel>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Argument("sum: needs at least one term".into()));
        }
        let mut dim: Option<usize> = None;
        for t in &terms {
            if let Some(d) = t.dim_hint() {
                match dim {
                    None => dim = Some(d),
                    Some(prev) if prev != d => {
                        return Err(Error::Argument(format!(
                            "sum: mixed dimensions {prev} and {d} among terms"
                        )))
                    }
                    _ => {}
                }
            }
        }
        let s = FModel::Sum(terms);
        let inf = s.inf_bound();
        if inf <= 0.0 {
            return Err(Error::Argument(format!(
                "sum: certified infimum {inf:.3e} is not positive"
            )));
        }
        Ok(s)
    }

    /// Spatial dimension pinned by the variant, if any (bump centers pin it;
    /// constant and power tails work in any dimension).
    pub fn dim_hint(&self) -> Option<usize> {
        match self {
            FModel::Constant | FModel::PowerTail { .. } => None,
            FModel::Bump { center, .. } => Some(center.len()),
            FModel::Sum(terms) => terms.iter().find_map(|t| t.dim_hint()),
        }
    }

    /// Certified global lower bound for `f` (attained or approached; may be
    /// conservative for sums). Positive by construction.
    pub fn inf_bound(&self) -> f64 {
        1.0 + self.min_perturbation()
    }

    /// Certified global upper bound for `f`.
    pub fn sup_bound(&self) -> f64 {
        1.0 + self.max_perturbation()
    }

    fn min_perturbation(&self) -> f64 {
        match self {
            FModel::Constant => 0.0,
            FModel::PowerTail { c0, sign, .. } => {
                if *sign < 0.0 {
                    -c0
                } else {
                    0.0
                }
            }
            FModel::Bump { amplitude, .. } => amplitude.min(0.0),
            FModel::Sum(terms) => terms.iter().map(|t| t.min_perturbation()).sum(),
        }
    }

    fn max_perturbation(&self) -> f64 {
        match self {
            FModel::Constant => 0.0,
            FModel::PowerTail { c0, sign, .. } => {
                if *sign > 0.0 {
                    *c0
                } else {
                    0.0
                }
            }
            FModel::Bump { amplitude, .. } => amplitude.max(0.0),
            FModel::Sum(terms) => terms.iter().map(|t| t.max_perturbation()).sum(),
        }
    }

    /// `f(x)`.
    pub fn value(&self, x: &[f64]) -> f64 {
        1.0 + self.perturbation_jet(x, 0).0
    }

    /// Value and derivatives up to `order` (0..=3).
    pub fn eval(&self, x: &[f64], order: usize) -> Result<FJet> {
        if order > 3 {
            return Err(Error::Argument(format!(
                "eval: derivative order {order} not supported (max 3)"
            )));
        }
        if let Some(d) = self.dim_hint() {
            if d != x.len() {
                return Err(Error::Argument(format!(
                    "eval: point has dimension {}, model expects {d}",
                    x.len()
                )));
            }
        }
        let n = x.len();
        let (v, g, h, t) = self.perturbation_jet(x, order);
        Ok(FJet {
            value: 1.0 + v,
            gradient: (order >= 1).then(|| g),
            hessian: if order >= 2 {
                Some(SymMatrix::new(n, h).expect("finite symmetric hessian"))
            } else {
                None
            },
            third: (order >= 3).then(|| t),
        })
    }

    /// Perturbation `f - 1` and its derivatives (all zero-initialized
    /// tensors when the order does not request them).
    fn perturbation_jet(&self, x: &[f64], order: usize) -> (f64, Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = x.len();
        let mut v = 0.0;
        let mut g = vec![0.0; if order >= 1 { n } else { 0 }];
        let mut h = vec![0.0; if order >= 2 { n * n } else { 0 }];
        let mut t = vec![0.0; if order >= 3 { n * n * n } else { 0 }];
        self.accumulate(x, order, &mut v, &mut g, &mut h, &mut t);
        (v, g, h, t)
    }

    fn accumulate(
        &self,
        x: &[f64],
        order: usize,
        v: &mut f64,
        g: &mut [f64],
        h: &mut [f64],
        t: &mut [f64],
    ) {
        let n = x.len();
        match self {
            FModel::Constant => {}
            FModel::PowerTail { c0, beta, sign } => {
                // With u = |x|^2 and psi_m = (d/du)^m (1+u)^(-beta/2):
                //   d_i = 2 x_i psi_1
                //   d_ij = 2 delta_ij psi_1 + 4 x_i x_j psi_2
                //   d_ijk = 4 (d_ij x_k + d_ik x_j + d_jk x_i) psi_2
                //           + 8 x_i x_j x_k psi_3
                let amp = sign * c0;
                let u: f64 = x.iter().map(|xi| xi * xi).sum();
                let base = 1.0 + u;
                let p = -beta / 2.0;
                let psi0 = base.powf(p);
                *v += amp * psi0;
                if order >= 1 {
                    let psi1 = p * base.powf(p - 1.0);
                    for i in 0..n {
                        g[i] += amp * 2.0 * x[i] * psi1;
                    }
                    if order >= 2 {
                        let psi2 = p * (p - 1.0) * base.powf(p - 2.0);
                        for i in 0..n {
                            for j in 0..n {
                                let mut e = 4.0 * x[i] * x[j] * psi2;
                                if i == j {
                                    e += 2.0 * psi1;
                                }
                                h[i * n + j] += amp * e;
                            }
                        }
                        if order >= 3 {
                            let psi3 = p * (p - 1.0) * (p - 2.0) * base.powf(p - 3.0);
                            for i in 0..n {
                                for j in 0..n {
                                    for k in 0..n {
                                        let mut e = 8.0 * x[i] * x[j] * x[k] * psi3;
                                        if i == j {
                                            e += 4.0 * x[k] * psi2;
                                        }
                                        if i == k {
                                            e += 4.0 * x[j] * psi2;
                                        }
                                        if j == k {
                                            e += 4.0 * x[i] * psi2;
                                        }
                                        t[(i * n + j) * n + k] += amp * e;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            FModel::Bump {
                center,
                radius,
                amplitude,
            } => {
                // rho = |x - c|^2 / R^2, G(rho) = exp(1 - 1/(1 - rho)).
                // G'   = -G / (1-rho)^2
                // G''  =  G [ (1-rho)^-4 - 2 (1-rho)^-3 ]
                // G''' =  G [ -(1-rho)^-6 + 6 (1-rho)^-5 - 6 (1-rho)^-4 ]
                // rho_i = 2 (x_i - c_i) / R^2, rho_ij = 2 delta_ij / R^2.
                let r2 = radius * radius;
                let rho: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(xi, ci)| (xi - ci) * (xi - ci))
                    .sum::<f64>()
                    / r2;
                // Past ~1 - 1e-3 the profile underflows to zero well before
                // the inverse powers overflow; cut cleanly.
                if rho >= 1.0 - 1e-3 {
                    return;
                }
                let w = 1.0 - rho;
                let gg = (1.0 - 1.0 / w).exp();
                *v += amplitude * gg;
                if order >= 1 {
                    let g1 = -gg / (w * w);
                    let dr: Vec<f64> = x
                        .iter()
                        .zip(center)
                        .map(|(xi, ci)| 2.0 * (xi - ci) / r2)
                        .collect();
                    for i in 0..n {
                        g[i] += amplitude * g1 * dr[i];
                    }
                    if order >= 2 {
                        let g2 = gg * (w.powi(-4) - 2.0 * w.powi(-3));
                        let ddr = 2.0 / r2;
                        for i in 0..n {
                            for j in 0..n {
                                let mut e = g2 * dr[i] * dr[j];
                                if i == j {
                                    e += g1 * ddr;
                                }
                                h[i * n + j] += amplitude * e;
                            }
                        }
                        if order >= 3 {
                            let g3 = gg * (-w.powi(-6) + 6.0 * w.powi(-5) - 6.0 * w.powi(-4));
                            for i in 0..n {
                                for j in 0..n {
                                    for k in 0..n {
                                        let mut e = g3 * dr[i] * dr[j] * dr[k];
                                        if i == j {
                                            e += g2 * ddr * dr[k];
                                        }
                                        if i == k {
                                            e += g2 * ddr * dr[j];
                                        }
                                        if j == k {
                                            e += g2 * ddr * dr[i];
                                        }
                                        t[(i * n + j) * n + k] += amplitude * e;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            FModel::Sum(terms) => {
                for term in terms {
                    term.accumulate(x, order, v, g, h, t);
                }
            }
        }
    }

    /// Certified decay order of the perturbation: `|f - 1| = O(|x|^-order)`
    /// with the sharp exponent; `None` means compactly supported (or zero),
    /// i.e. faster than any power.
    pub fn certified_decay_order(&self) -> Option<f64> {
        match self {
            FModel::Constant | FModel::Bump { .. } => None,
            FModel::PowerTail { beta, c0, .. } => (*c0 > 0.0).then_some(*beta),
            FModel::Sum(terms) => terms
                .iter()
                .filter_map(|t| t.certified_decay_order())
                .min_by(|a, b| a.partial_cmp(b).unwrap()),
        }
    }

    /// Certified radial envelope on the level sets of `x' A x / 2`: returns
    /// `(c0, s0, beta)` packaged as a [`TailEnvelope`] such that
    /// `|f(x) - 1| <= c0 * s^(-beta/2)` whenever `x' A x / 2 = s >= s0`,
    /// with `1 - c0 * s0^(-beta/2) > 0`.
    pub fn tail_envelope(&self, a: &AkMatrix) -> Result<TailEnvelope> {
        let a_max = a.max_diag();
        let (c0, s0, beta) = self.envelope_parts(a_max)?;
        // Keep the lower envelope strictly positive: past s0 the bound is
        // c0 * s^(-beta/2), so lifting s0 to (2 c0)^(2/beta) caps it at 1/2.
        let mut s0 = s0.max(2.0);
        if c0 > 0.0 {
            s0 = s0.max((2.0 * c0).powf(2.0 / beta));
        }
        TailEnvelope::new(c0, s0, beta)
    }

    /// Internal envelope recursion: returns (C0, s0, beta) before the final
    /// positivity adjustment.
    fn envelope_parts(&self, a_max: f64) -> Result<(f64, f64, f64)> {
        /// Sentinel decay rate for envelopes with `C0 = 0` (any legal value
        /// works since the bound is identically zero).
        const BETA_SENTINEL: f64 = 4.0;
        match self {
            FModel::Constant => Ok((0.0, 2.0, BETA_SENTINEL)),
            FModel::PowerTail { c0, beta, .. } => {
                // On {x' A x / 2 = s}: |x|^2 >= 2 s / a_max, hence
                // (1+|x|^2)^(-beta/2) <= (a_max / (2 s))^(beta/2).
                let c = c0 * (a_max / 2.0).powf(beta / 2.0);
                Ok((c, 2.0, *beta))
            }
            FModel::Bump { center, radius, .. } => {
                // Support sits inside the ball |x| <= |center| + radius,
                // which the level set s covers once
                // s >= a_max (|center| + radius)^2 / 2 (5% margin added).
                let reach = center.iter().map(|c| c * c).sum::<f64>().sqrt() + radius;
                let s_cover = 1.05 * 0.5 * a_max * reach * reach;
                Ok((0.0, s_cover, BETA_SENTINEL))
            }
            FModel::Sum(terms) => {
                let parts: Vec<(f64, f64, f64)> = terms
                    .iter()
                    .map(|t| t.envelope_parts(a_max))
                    .collect::<Result<_>>()?;
                let s0 = parts.iter().map(|p| p.1).fold(2.0f64, f64::max);
                // Combine algebraic tails at the slowest rate present:
                // c s^(-b/2) <= c s0^((beta-b)/2) * s^(-beta/2) for b >= beta.
                let beta = parts
                    .iter()
                    .filter(|p| p.0 > 0.0)
                    .map(|p| p.2)
                    .fold(f64::INFINITY, f64::min);
                if beta.is_infinite() {
                    return Ok((0.0, s0, BETA_SENTINEL));
                }
                let c0 = parts
                    .iter()
                    .filter(|p| p.0 > 0.0)
                    .map(|p| p.0 * s0.powf(0.5 * (beta - p.2)))
                    .sum::<f64>();
                Ok((c0, s0, beta))
            }
        }
    }

    /// Decay-hypothesis check: is `|x|^(beta + m) |D^m (f - 1)|` bounded for
    /// `m = 0..=3` as `|x| -> infinity`?
    ///
    /// Uses the certified analytic order when available (all variants here
    /// have one), and corroborates with sampled scaled derivative norms on
    /// the given radii: the verdict is the analytic certificate, and the
    /// sampling guards against regressions in the derivative code itself.
    pub fn verify_c2(&self, beta: f64, radii: &[f64]) -> Result<bool> {
        if radii.len() < 3 || radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] <= 0.0 {
            return Err(Error::Argument(
                "verify_c2: need at least 3 strictly increasing positive radii".into(),
            ));
        }
        let analytic_ok = match self.certified_decay_order() {
            None => true,
            Some(order) => beta <= order + 1e-9,
        };

        // Sampled corroboration: growth of the scaled sup across radii.
        let n = self.dim_hint().unwrap_or(3);
        let dirs = unit_directions(n, 48, 0x5EED_CAFE);
        let mut scaled: Vec<f64> = Vec::with_capacity(radii.len());
        for &r in radii {
            let mut sup: f64 = 0.0;
            for d in &dirs {
                let x: Vec<f64> = d.iter().map(|di| di * r).collect();
                let jet = self.eval(&x, 3)?;
                let norms = [
                    (jet.value - 1.0).abs(),
                    jet.gradient
                        .as_ref()
                        .map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt())
                        .unwrap_or(0.0),
                    jet.hessian.as_ref().map(|h| h.norm()).unwrap_or(0.0),
                    jet.third
                        .as_ref()
                        .map(|t| t.iter().map(|v| v * v).sum::<f64>().sqrt())
                        .unwrap_or(0.0),
                ];
                for (m, nv) in norms.iter().enumerate() {
                    sup = sup.max(r.powf(beta + m as f64) * nv);
                }
            }
            scaled.push(sup);
        }
        // All-zero samples (compact support beyond the radii) are bounded.
        let max_scaled = scaled.iter().cloned().fold(0.0f64, f64::max);
        let sampled_ok = if max_scaled <= 1e-300 {
            true
        } else {
            // Log-log growth slope; bounded families stay near or below 0.
            let pts: Vec<(f64, f64)> = radii
                .iter()
                .zip(&scaled)
                .filter(|(_, s)| **s > 1e-300)
                .map(|(r, s)| (r.ln(), s.ln()))
                .collect();
            slope(&pts) <= 0.15
        };
        Ok(analytic_ok && sampled_ok)
    }
}

/// Least-squares slope of (x, y) pairs; 0 for degenerate input.
fn slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Deterministic unit directions in dimension `n` (seeded Gaussian samples,
/// normalized); used for sphere sampling in verification sweeps.
pub fn unit_directions(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        // Box-Muller from uniforms; two coordinates per draw.
        let mut v = Vec::with_capacity(n);
        while v.len() < n {
            let u1: f64 = rng.random_range(1e-12..1.0);
            let u2: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let r = (-2.0 * u1.ln()).sqrt();
            v.push(r * u2.cos());
            if v.len() < n {
                v.push(r * u2.sin());
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            out.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central finite-difference oracle for first derivatives.
    fn fd_gradient(f: &FModel, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                (f.value(&xp) - f.value(&xm)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn constant_is_one_everywhere() {
        let f = FModel::constant();
        assert_eq!(f.value(&[3.0, -1.0, 2.0]), 1.0);
        assert_eq!(f.inf_bound(), 1.0);
        assert_eq!(f.sup_bound(), 1.0);
    }

    #[test]
    fn bump_center_value_and_support() {
        let f = FModel::bump(vec![1.0, 0.0, 0.0], 2.0, 0.5).unwrap();
        assert!((f.value(&[1.0, 0.0, 0.0]) - 1.5).abs() < 1e-15);
        // Outside the support radius the perturbation vanishes identically.
        assert_eq!(f.value(&[3.5, 0.0, 0.0]), 1.0);
        assert_eq!(f.value(&[10.0, 4.0, -2.0]), 1.0);
    }

    #[test]
    fn power_tail_constructor_guards() {
        assert!(FModel::power_tail(0.5, 3.0, 1.0).is_ok());
        assert!(FModel::power_tail(0.5, 2.0, 1.0).is_err()); // beta too slow
        assert!(FModel::power_tail(-0.1, 3.0, 1.0).is_err());
        assert!(FModel::power_tail(1.5, 3.0, -1.0).is_err()); // inf f <= 0
        assert!(FModel::power_tail(0.5, 3.0, 2.0).is_err()); // bad sign
    }

    #[test]
    fn gradients_match_finite_differences() {
        let models = [
            FModel::power_tail(0.7, 3.5, -1.0).unwrap(),
            FModel::bump(vec![0.5, -0.25, 0.0], 1.5, 0.8).unwrap(),
            FModel::sum(vec![
                FModel::power_tail(0.3, 4.0, 1.0).unwrap(),
                FModel::bump(vec![0.0, 0.0, 0.0], 1.0, 0.4).unwrap(),
            ])
            .unwrap(),
        ];
        let pts = [[0.3, 0.2, -0.1], [1.0, 0.5, 0.25], [0.8, -0.7, 0.6]];
        for f in &models {
            for p in &pts {
                let jet = f.eval(p, 1).unwrap();
                let fd = fd_gradient(f, p, 1e-6);
                for (a, b) in jet.gradient.unwrap().iter().zip(&fd) {
                    assert!((a - b).abs() < 1e-7, "{f:?} at {p:?}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn hessian_matches_fd_of_gradient() {
        let f = FModel::bump(vec![0.0, 0.0], 1.0, 0.6).unwrap();
        let x = [0.3, -0.2];
        let h = 1e-5;
        let hess = f.eval(&x, 2).unwrap().hessian.unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[j] += h;
                xm[j] -= h;
                let gp = f.eval(&xp, 1).unwrap().gradient.unwrap()[i];
                let gm = f.eval(&xm, 1).unwrap().gradient.unwrap()[i];
                let fd = (gp - gm) / (2.0 * h);
                assert!((hess.get(i, j) - fd).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn third_matches_fd_of_hessian() {
        let f = FModel::power_tail(0.5, 3.0, 1.0).unwrap();
        let x = [0.4, 0.1, -0.3];
        let h = 1e-5;
        let third = f.eval(&x, 3).unwrap().third.unwrap();
        let n = 3;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[k] += h;
                    xm[k] -= h;
                    let hp = f.eval(&xp, 2).unwrap().hessian.unwrap().get(i, j);
                    let hm = f.eval(&xm, 2).unwrap().hessian.unwrap().get(i, j);
                    let fd = (hp - hm) / (2.0 * h);
                    assert!(
                        (third[(i * n + j) * n + k] - fd).abs() < 1e-5,
                        "({i},{j},{k})"
                    );
                }
            }
        }
    }

    #[test]
    fn envelope_brackets_f_on_level_sets() {
        let a = crate::symfunc::normalize_to_ak(&[1.0, 2.0, 4.0], 2).unwrap();
        let f = FModel::sum(vec![
            FModel::power_tail(0.4, 3.0, 1.0).unwrap(),
            FModel::bump(vec![0.5, 0.0, 0.0], 1.0, -0.3).unwrap(),
        ])
        .unwrap();
        let env = f.tail_envelope(&a).unwrap();
        let dirs = unit_directions(3, 64, 7);
        for &s in &[env.s0(), 2.0 * env.s0(), 8.0 * env.s0(), 64.0 * env.s0()] {
            let (lo, hi) = (env.f_lower(s), env.f_upper(s));
            assert!(lo > 0.0);
            for d in &dirs {
                // Scale the direction onto the level set {x' A x / 2 = s}.
                let q: f64 = d
                    .iter()
                    .zip(a.diag())
                    .map(|(di, ai)| ai * di * di)
                    .sum::<f64>()
                    / 2.0;
                let t = (s / q).sqrt();
                let x: Vec<f64> = d.iter().map(|di| di * t).collect();
                let v = f.value(&x);
                assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "s={s}, v={v}, [{lo}, {hi}]");
            }
        }
    }

    #[test]
    fn c2_check_accepts_true_rate_rejects_faster() {
        let f = FModel::power_tail(0.5, 4.0, 1.0).unwrap();
        let radii = [4.0, 8.0, 16.0, 32.0, 64.0];
        assert!(f.verify_c2(4.0, &radii).unwrap());
        assert!(!f.verify_c2(5.0, &radii).unwrap());
        let b = FModel::bump(vec![0.0, 0.0, 0.0], 1.0, 0.5).unwrap();
        assert!(b.verify_c2(6.0, &radii).unwrap());
    }

    #[test]
    fn sum_requires_positive_infimum() {
        let t1 = FModel::bump(vec![0.0, 0.0], 1.0, -0.6).unwrap();
        let t2 = FModel::bump(vec![0.1, 0.0], 1.0, -0.6).unwrap();
        assert!(FModel::sum(vec![t1, t2]).is_err());
    }
}
