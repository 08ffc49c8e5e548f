//! Radial sub/supersolution barriers for `sigma_k(lambda(D^2 u)) = f`.
//!
//! All functions here are *generalized symmetric*: `u(x) = u(tau)` with
//! `tau = x' A x / 2` for a normalized diagonal `A`. For such functions the
//! Hessian is `u' A + u'' (Ax)(Ax)'`, and `sigma_k` evaluates in closed form
//! ([`sigma_k_radial`]); the key constant is
//!
//! ```text
//! h_k(a) = max_i a_i sigma_(k-1)(a without i),    kappa = k / (2 h_k(a)).
//! ```
//!
//! Given a tail envelope `1 - C0 s^(-beta/2) <= f <= 1 + C0 s^(-beta/2)`
//! past level `s0`, the construction produces:
//!
//! * an **upper barrier** `ubar(tau)` (zero on `[0, s0]`) whose radial
//!   profile satisfies `(u')^k + 2 h_k tau u'' (u')^(k-1) = f_lower(tau)`
//!   exactly, making it a supersolution wherever `u'' >= 0`;
//! * a **lower barrier**: an exterior profile with the analogous identity
//!   against `f_upper` (a subsolution where `u'' <= 0`, guaranteed by the
//!   `H2` selection) glued at `tau = s0` to an interior solve `v1` of
//!   `sigma_k = f + c0 eta` with zero boundary data;
//! * the shift constants `beta_minus = inf (tau - lower)` and
//!   `beta_plus = sup (tau - upper)`, finite precisely because `kappa > 1`
//!   and `beta > 2` make the profile slopes approach 1 at integrable rates.
//!
//! Every profile carries analytic first and second derivatives at its
//! knots, so the defining ODE identities hold to round-off and are used
//! as construction self-checks rather than as fit targets.

use crate::dirichlet::{continuation_solve_source, FnSource, NewtonOptions};
use crate::error::{Error, Result};
use crate::fmodel::{unit_directions, FModel};
use crate::grid::{format_sig17, GridField, GridSpec};
use crate::quad::integrate;
use crate::symfunc::{sigma_k, sigma_k_without, AkMatrix, SymMatrix};
use std::io::Write;

/// Geometric ratio between consecutive profile knots.
const KNOT_RATIO: f64 = 1.05;
/// Default profile span, as a multiple of `s0`.
pub const DEFAULT_PROFILE_SPAN: f64 = 1e3;
/// Default range for the shift-bound integrals, as a multiple of `s0`.
pub const DEFAULT_BOUNDS_SPAN: f64 = 1e3;
/// Relative tolerance for all barrier quadratures.
const QUAD_RTOL: f64 = 1e-9;
/// Safety margin applied on top of the minimal admissible `H2`.
const H2_MARGIN: f64 = 1.1;
/// Two exponents within this distance dispatch to the logarithmic branch.
const LOG_BRANCH_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Tail envelope
// ---------------------------------------------------------------------------

/// Certified radial envelope for the right-hand side:
/// `f_lower(s) = 1 - c0 s^(-beta/2)` and `f_upper(s) = 1 + c0 s^(-beta/2)`
/// bracket `f` on every level set `{x' A x / 2 = s}` with `s >= s0`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TailEnvelope {
    c0: f64,
    s0: f64,
    beta: f64,
}

impl TailEnvelope {
    /// Validates `c0 >= 0`, `s0 > 1`, `beta > 2`, and positivity of the
    /// lower envelope at `s0` (hence everywhere past it).
    pub fn new(c0: f64, s0: f64, beta: f64) -> Result<Self> {
        if !(c0 >= 0.0) || !c0.is_finite() {
            return Err(Error::Argument(format!("envelope: c0 = {c0} must be >= 0")));
        }
        if !(s0 > 1.0) || !s0.is_finite() {
            return Err(Error::Argument(format!("envelope: s0 = {s0} must be > 1")));
        }
        if !(beta > 2.0) || !beta.is_finite() {
            return Err(Error::Argument(format!("envelope: beta = {beta} must be > 2")));
        }
        let env = TailEnvelope { c0, s0, beta };
        if !(env.f_lower(s0) > 0.0) {
            return Err(Error::Argument(format!(
                "envelope: lower bound 1 - {c0} * {s0}^(-{beta}/2) is not positive"
            )));
        }
        Ok(env)
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `1 + c0 s^(-beta/2)`.
    pub fn f_upper(&self, s: f64) -> f64 {
        1.0 + self.c0 * s.powf(-self.beta / 2.0)
    }

    /// `1 - c0 s^(-beta/2)`.
    pub fn f_lower(&self, s: f64) -> f64 {
        1.0 - self.c0 * s.powf(-self.beta / 2.0)
    }
}

// ---------------------------------------------------------------------------
// Radial profiles
// ---------------------------------------------------------------------------

/// A radial function of `tau = x' A x / 2` tabulated at strictly increasing
/// knots with analytic first and second derivatives. Evaluation between
/// knots is cubic Hermite in (value, first derivative).
#[derive(Debug, Clone)]
pub struct RadialProfile {
    knots: Vec<f64>,
    values: Vec<f64>,
    first_deriv: Vec<f64>,
    second_deriv: Vec<f64>,
    domain_start: f64,
}

impl RadialProfile {
    /// Assemble from parallel arrays (validated).
    pub fn new(
        knots: Vec<f64>,
        values: Vec<f64>,
        first_deriv: Vec<f64>,
        second_deriv: Vec<f64>,
        domain_start: f64,
    ) -> Result<Self> {
        if knots.len() < 2
            || knots.len() != values.len()
            || knots.len() != first_deriv.len()
            || knots.len() != second_deriv.len()
        {
            return Err(Error::Argument("profile: array length mismatch".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument("profile: knots must strictly increase".into()));
        }
        if !(domain_start >= 0.0) {
            return Err(Error::Argument(format!(
                "profile: domain start {domain_start} must be >= 0"
            )));
        }
        for series in [&knots, &values, &first_deriv] {
            if series.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric("profile: non-finite entry".into()));
            }
        }
        Ok(RadialProfile {
            knots,
            values,
            first_deriv,
            second_deriv,
            domain_start,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn first_deriv(&self) -> &[f64] {
        &self.first_deriv
    }

    pub fn second_deriv(&self) -> &[f64] {
        &self.second_deriv
    }

    pub fn domain_start(&self) -> f64 {
        self.domain_start
    }

    fn locate(&self, tau: f64) -> Result<usize> {
        let lo = self.knots[0];
        let hi = *self.knots.last().unwrap();
        let tol = 1e-12 * (1.0 + hi.abs());
        if tau < lo - tol || tau > hi + tol {
            return Err(Error::Argument(format!(
                "profile: tau = {tau} outside tabulated range [{lo}, {hi}]"
            )));
        }
        let j = match self
            .knots
            .binary_search_by(|k| k.partial_cmp(&tau).unwrap())
        {
            Ok(j) => j,
            Err(j) => j.saturating_sub(1),
        };
        Ok(j.min(self.knots.len() - 2))
    }

    /// Value at `tau` (cubic Hermite between knots).
    pub fn eval(&self, tau: f64) -> Result<f64> {
        let j = self.locate(tau)?;
        let (t0, t1) = (self.knots[j], self.knots[j + 1]);
        let h = t1 - t0;
        let t = ((tau - t0) / h).clamp(0.0, 1.0);
        let (v0, v1) = (self.values[j], self.values[j + 1]);
        let (d0, d1) = (self.first_deriv[j] * h, self.first_deriv[j + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        Ok((2.0 * t3 - 3.0 * t2 + 1.0) * v0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * v1
            + (t3 - t2) * d1)
    }

    /// First derivative at `tau`.
    pub fn deriv(&self, tau: f64) -> Result<f64> {
        let j = self.locate(tau)?;
        let (t0, t1) = (self.knots[j], self.knots[j + 1]);
        let h = t1 - t0;
        let t = ((tau - t0) / h).clamp(0.0, 1.0);
        let (v0, v1) = (self.values[j], self.values[j + 1]);
        let (d0, d1) = (self.first_deriv[j], self.first_deriv[j + 1]);
        let t2 = t * t;
        Ok(((6.0 * t2 - 6.0 * t) * v0 + (-6.0 * t2 + 6.0 * t) * v1) / h
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (3.0 * t2 - 2.0 * t) * d1)
    }

    /// Second derivative at `tau` (linear interpolation of the stored
    /// analytic values).
    pub fn second(&self, tau: f64) -> Result<f64> {
        let j = self.locate(tau)?;
        let (t0, t1) = (self.knots[j], self.knots[j + 1]);
        let t = ((tau - t0) / (t1 - t0)).clamp(0.0, 1.0);
        Ok((1.0 - t) * self.second_deriv[j] + t * self.second_deriv[j + 1])
    }

    /// CSV export: header `tau,u,du,d2u`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"tau,u,du,d2u\n").map_err(Error::from)?;
        for j in 0..self.knots.len() {
            let row = format!(
                "{},{},{},{}\n",
                format_sig17(self.knots[j]),
                format_sig17(self.values[j]),
                format_sig17(self.first_deriv[j]),
                format_sig17(self.second_deriv[j]),
            );
            w.write_all(row.as_bytes()).map_err(Error::from)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Radial sigma_k and the structural constants
// ---------------------------------------------------------------------------

/// `sigma_k` of the Hessian of a generalized symmetric function, in closed
/// form: for `u(x) = u(tau)`, `D^2 u = u' A + u'' (Ax)(Ax)'` and
///
/// ```text
/// sigma_k(D^2 u) = sigma_k(a) (u')^k
///                + u'' (u')^(k-1) sum_i sigma_(k-1)(a w/o i) (a_i x_i)^2.
/// ```
pub fn sigma_k_radial(a: &AkMatrix, x: &[f64], uprime: f64, usecond: f64) -> f64 {
    debug_assert!(uprime >= 0.0, "radial formula expects uprime >= 0");
    let d = a.diag();
    let k = a.k();
    let lead = sigma_k(d, k) * uprime.powi(k as i32);
    let mut corr = 0.0;
    for (i, (&ai, &xi)) in d.iter().zip(x).enumerate() {
        corr += sigma_k_without(d, k - 1, i) * (ai * xi) * (ai * xi);
    }
    lead + usecond * uprime.powi(k as i32 - 1) * corr
}

/// Full Hessian of a generalized symmetric function at `x`:
/// `u' A + u'' (Ax)(Ax)'`.
pub fn radial_hessian(a: &AkMatrix, x: &[f64], uprime: f64, usecond: f64) -> SymMatrix {
    let n = a.dim();
    let mut m = SymMatrix::from_diag(&a.diag().iter().map(|v| v * uprime).collect::<Vec<_>>());
    let ax: Vec<f64> = a.diag().iter().zip(x).map(|(ai, xi)| ai * xi).collect();
    for i in 0..n {
        for j in i..n {
            m.set_sym(i, j, m.get(i, j) + usecond * ax[i] * ax[j]);
        }
    }
    m
}

/// `h_k(a) = max_i a_i sigma_(k-1)(a without i)`.
pub fn hk_constant(a: &AkMatrix) -> f64 {
    let d = a.diag();
    let k = a.k();
    d.iter()
        .enumerate()
        .map(|(i, &ai)| ai * sigma_k_without(d, k - 1, i))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `kappa = k / (2 h_k(a))`.
pub fn kappa_constant(a: &AkMatrix) -> f64 {
    a.k() as f64 / (2.0 * hk_constant(a))
}

/// The construction requires `kappa > 1`: the slopes of both barriers then
/// approach 1 at the integrable rate `tau^(-kappa)` and the shift constants
/// are finite. `kappa <= 1` (e.g. every `k = n` in dimension 2, or strongly
/// skewed diagonals at `k = 1`) is a structural obstruction, not a tuning
/// problem, so it is rejected up front.
fn require_supercritical(kappa: f64) -> Result<()> {
    if kappa > 1.0 {
        Ok(())
    } else {
        Err(Error::Constants(format!(
            "kappa = {kappa:.6} <= 1: the barrier slopes do not converge fast \
             enough for finite shift bounds (need k > 2 h_k(a))"
        )))
    }
}

// ---------------------------------------------------------------------------
// Closed-form inner integrals
// ---------------------------------------------------------------------------

/// `integral(s0..t) of kappa r^(kappa-1) * (c0 multiplier) r^(-beta/2) dr`,
/// i.e. the envelope part of the inner integral, with the logarithmic branch
/// at `kappa = beta/2`.
fn envelope_inner(env: &TailEnvelope, kappa: f64, t: f64) -> f64 {
    let half_beta = env.beta / 2.0;
    if (kappa - half_beta).abs() < LOG_BRANCH_TOL {
        kappa * (t / env.s0).ln()
    } else {
        kappa * (t.powf(kappa - half_beta) - env.s0.powf(kappa - half_beta)) / (kappa - half_beta)
    }
}

/// Inner integral `integral(s0..t) kappa r^(kappa-1) f_lower(r) dr`.
fn inner_integral_flower(env: &TailEnvelope, kappa: f64, t: f64) -> f64 {
    (t.powf(kappa) - env.s0.powf(kappa)) - env.c0 * envelope_inner(env, kappa, t)
}

/// Inner integral `integral(s0..t) kappa r^(kappa-1) f_upper(r) dr`.
fn inner_integral_fupper(env: &TailEnvelope, kappa: f64, t: f64) -> f64 {
    (t.powf(kappa) - env.s0.powf(kappa)) + env.c0 * envelope_inner(env, kappa, t)
}

/// Geometric knot ladder from `s0` to at least `tau_max`.
fn knot_ladder(s0: f64, tau_max: f64) -> Vec<f64> {
    let mut knots = vec![s0];
    let mut t = s0;
    while t < tau_max {
        t *= KNOT_RATIO;
        knots.push(t.min(tau_max * (1.0 + 1e-15)));
        if *knots.last().unwrap() >= tau_max {
            break;
        }
    }
    knots
}

/// Shared profile builder: integrate a slope function `phi = u'` from
/// `(s0, 0)` over the geometric ladder, with analytic second derivative
/// `phi2`. `fd_first_second` patches the (possibly singular) second
/// derivative at the first knot by a forward difference.
fn accumulate_profile<F, G>(
    s0: f64,
    tau_max: f64,
    phi: F,
    phi2: G,
    fd_first_second: bool,
) -> Result<RadialProfile>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let knots = knot_ladder(s0, tau_max);
    let mut values = Vec::with_capacity(knots.len());
    let mut first = Vec::with_capacity(knots.len());
    let mut second = Vec::with_capacity(knots.len());
    let mut acc = 0.0;
    for (j, &t) in knots.iter().enumerate() {
        if j > 0 {
            acc += integrate(&phi, knots[j - 1], t, QUAD_RTOL, 1e-14)?;
        }
        values.push(acc);
        first.push(phi(t));
        second.push(phi2(t));
    }
    if fd_first_second && knots.len() >= 2 {
        second[0] = (first[1] - first[0]) / (knots[1] - knots[0]);
    }
    RadialProfile::new(knots, values, first, second, s0)
}

/// Upper barrier profile: `ubar(tau) = integral(s0..tau) of
/// (t^(-kappa) * inner_flower(t))^(1/k) dt`, extended by zero below `s0`
/// (callers treat `tau < s0` as 0). The slope vanishes at `s0`, matching
/// the interior extension with continuous first derivative, and the second
/// derivative satisfies the exact identity
/// `(u')^k + 2 h_k tau u'' (u')^(k-1) = f_lower(tau)`.
pub fn build_upper_barrier(
    a: &AkMatrix,
    k: usize,
    env: &TailEnvelope,
    tau_max: f64,
) -> Result<RadialProfile> {
    validate_barrier_args(a, k, env, tau_max)?;
    let kappa = kappa_constant(a);
    require_supercritical(kappa)?;
    let kf = k as f64;
    let s0 = env.s0();
    let phi = move |t: f64| {
        if t <= s0 {
            return 0.0;
        }
        (t.powf(-kappa) * inner_integral_flower(env, kappa, t)).max(0.0).powf(1.0 / kf)
    };
    let phi2 = move |t: f64| {
        let up = phi(t);
        if up <= 0.0 {
            return 0.0; // patched by the forward difference at the first knot
        }
        kappa * (env.f_lower(t) - up.powi(k as i32)) / (kf * t * up.powi(k as i32 - 1))
    };
    accumulate_profile(s0, tau_max, phi, phi2, true)
}

/// Exterior lower-barrier profile for a given `H2`:
/// `ulow(tau) = integral(s0..tau) of (t^(-kappa) (inner_fupper(t) + H2))^(1/k) dt`.
/// Its slope at `s0` is `(H2 s0^(-kappa))^(1/k) > 0` and its second
/// derivative is negative for all `tau > s0` when `H2` passes
/// [`select_h2`]'s positivity condition.
pub fn build_lower_profile(
    a: &AkMatrix,
    k: usize,
    env: &TailEnvelope,
    h2: f64,
    tau_max: f64,
) -> Result<RadialProfile> {
    validate_barrier_args(a, k, env, tau_max)?;
    if !(h2 > 0.0) || !h2.is_finite() {
        return Err(Error::Argument(format!("lower profile: H2 = {h2} must be > 0")));
    }
    let kappa = kappa_constant(a);
    require_supercritical(kappa)?;
    let kf = k as f64;
    let s0 = env.s0();
    let phi = move |t: f64| {
        (t.powf(-kappa) * (inner_integral_fupper(env, kappa, t) + h2)).powf(1.0 / kf)
    };
    let phi2 = move |t: f64| {
        let up = phi(t);
        kappa * (env.f_upper(t) - up.powi(k as i32)) / (kf * t * up.powi(k as i32 - 1))
    };
    accumulate_profile(s0, tau_max, phi, phi2, false)
}

fn validate_barrier_args(a: &AkMatrix, k: usize, env: &TailEnvelope, tau_max: f64) -> Result<()> {
    if a.k() != k {
        return Err(Error::Argument(format!(
            "barrier: matrix normalized for k = {}, requested k = {k}",
            a.k()
        )));
    }
    if !(tau_max > env.s0() * 2.0) {
        return Err(Error::Argument(format!(
            "barrier: tau_max = {tau_max} must exceed 2 s0 = {}",
            2.0 * env.s0()
        )));
    }
    Ok(())
}

/// Concavity function for the exterior lower barrier: `ulow'' < 0` on
/// `(s0, infinity)` iff `H(tau) > 0`, where
///
/// ```text
/// H(tau) = H2 - s0^kappa
///        + C0 [ (beta/2) tau^(kappa-beta/2) - kappa s0^(kappa-beta/2) ]
///          / (kappa - beta/2)                          (kappa != beta/2)
/// H(tau) = H2 - s0^kappa - C0 + C0 kappa ln(tau/s0)    (kappa == beta/2)
/// ```
///
/// Both branches are increasing in `tau`, so the infimum sits at `tau = s0`
/// and equals `H2 - s0^kappa - C0 s0^(kappa-beta/2)` in every case.
pub fn concavity_margin(env: &TailEnvelope, kappa: f64, h2: f64, tau: f64) -> f64 {
    let half_beta = env.beta() / 2.0;
    let base = h2 - env.s0().powf(kappa);
    if (kappa - half_beta).abs() < LOG_BRANCH_TOL {
        base - env.c0() + env.c0() * kappa * (tau / env.s0()).ln()
    } else {
        base + env.c0()
            * (half_beta * tau.powf(kappa - half_beta)
                - kappa * env.s0().powf(kappa - half_beta))
            / (kappa - half_beta)
    }
}

/// Select `H2`: the smallest value (with a 10% margin) satisfying
///
/// 1. concavity: `H(tau) > 0` for all `tau >= s0`, whose infimum in both
///    exponent branches is `H2 - s0^kappa - C0 s0^(kappa-beta/2)`;
/// 2. boundary slope: `(H2 s0^(-kappa))^(1/k) > slope_bound`, the exterior
///    slope at `s0` must exceed the steepest admissible interior slope.
///
/// The returned value is re-verified on a geometric test ladder up to
/// `max(1e6, 100 s0)`.
pub fn select_h2(env: &TailEnvelope, kappa: f64, k: usize, slope_bound: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::Argument(format!("select_h2: kappa = {kappa} must be > 0")));
    }
    if !(slope_bound >= 0.0) || !slope_bound.is_finite() {
        return Err(Error::Argument(format!(
            "select_h2: slope bound {slope_bound} must be finite and >= 0"
        )));
    }
    let s0 = env.s0();
    let concavity_floor = s0.powf(kappa) + env.c0() * s0.powf(kappa - env.beta() / 2.0);
    let slope_floor = slope_bound.powi(k as i32) * s0.powf(kappa);
    let h2 = H2_MARGIN * concavity_floor.max(slope_floor);

    // Post-hoc sweep: both conditions must hold on a test ladder.
    let top = (1e6f64).max(100.0 * s0);
    for tau in knot_ladder(s0, top) {
        if concavity_margin(env, kappa, h2, tau) <= 0.0 {
            return Err(Error::Constants(format!(
                "select_h2: concavity margin non-positive at tau = {tau} with H2 = {h2}"
            )));
        }
    }
    if (h2 * s0.powf(-kappa)).powf(1.0 / k as f64) <= slope_bound {
        return Err(Error::Constants(format!(
            "select_h2: H2 = {h2} fails the boundary slope condition (bound {slope_bound})"
        )));
    }
    Ok(h2)
}

// ---------------------------------------------------------------------------
// Interior comparison machinery: c1, c2, v3
// ---------------------------------------------------------------------------

/// Volume of the unit ball in dimension n.
fn unit_ball_volume(n: usize) -> f64 {
    use std::f64::consts::PI;
    match n {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        4 => PI * PI / 2.0,
        _ => {
            // Gamma recurrence; only reachable if grid dims ever grow.
            let mut v = if n % 2 == 0 { PI } else { 2.0 };
            let mut d = if n % 2 == 0 { 2 } else { 1 };
            while d + 2 <= n {
                d += 2;
                v *= 2.0 * PI / d as f64;
            }
            v
        }
    }
}

/// `integral(s0/2 .. t) n r^(n-1) f_upper(r)^(n/k) dr` (numeric).
fn c2_inner(n: usize, k: usize, env: &TailEnvelope, t: f64) -> f64 {
    let nf = n as f64;
    let e = nf / k as f64;
    integrate(
        |r| nf * r.powf(nf - 1.0) * env.f_upper(r).powf(e),
        env.s0() / 2.0,
        t,
        QUAD_RTOL,
        1e-14,
    )
    .unwrap_or(f64::NAN)
}

/// Normalizing constant `c2 = integral(s0/2 .. s0) (c2_inner(t))^(1/n) dt`.
pub fn c2_constant(n: usize, k: usize, env: &TailEnvelope) -> Result<f64> {
    let nf = n as f64;
    integrate(
        |t| c2_inner(n, k, env, t).max(0.0).powf(1.0 / nf),
        env.s0() / 2.0,
        env.s0(),
        QUAD_RTOL,
        1e-14,
    )
}

/// Interior comparison profile `v3`: identically `-c1` on `[0, s0/2]`,
/// then `-c1 + (c1/c2) integral(s0/2..tau) (c2_inner(t))^(1/n) dt` up to
/// `v3(s0) = 0`. `C^1` across `s0/2` since the integrand vanishes there.
pub fn build_v3(
    a: &AkMatrix,
    n: usize,
    k: usize,
    env: &TailEnvelope,
    c1: f64,
) -> Result<RadialProfile> {
    if a.dim() != n {
        return Err(Error::Argument(format!(
            "v3: matrix dimension {} != n = {n}",
            a.dim()
        )));
    }
    if !(c1 > 0.0) || !c1.is_finite() {
        return Err(Error::Argument(format!("v3: c1 = {c1} must be > 0")));
    }
    let s0 = env.s0();
    let c2 = c2_constant(n, k, env)?;
    if !(c2 > 0.0) {
        return Err(Error::Numeric(format!("v3: c2 = {c2} not positive")));
    }
    let h1 = c1 / c2;
    let nf = n as f64;

    // Knots: a few on the flat core, a denser uniform set on the ramp.
    let mut knots = vec![0.0, s0 / 4.0];
    let ramp = 64;
    for j in 0..=ramp {
        knots.push(s0 / 2.0 + (s0 / 2.0) * j as f64 / ramp as f64);
    }
    let mut values = Vec::with_capacity(knots.len());
    let mut first = Vec::with_capacity(knots.len());
    let mut second = Vec::with_capacity(knots.len());
    let mut acc = -c1;
    let mut prev: Option<f64> = None;
    for &t in &knots {
        if t <= s0 / 2.0 {
            values.push(-c1);
            first.push(0.0);
            second.push(0.0);
        } else {
            let lo = prev.unwrap_or(s0 / 2.0);
            acc += h1
                * integrate(
                    |r| c2_inner(n, k, env, r).max(0.0).powf(1.0 / nf),
                    lo,
                    t,
                    QUAD_RTOL,
                    1e-14,
                )?;
            let inner = c2_inner(n, k, env, t).max(0.0);
            values.push(acc);
            first.push(h1 * inner.powf(1.0 / nf));
            // v3'' = H1 (1/n) inner^(1/n - 1) * n t^(n-1) f_upper^(n/k).
            let d2 = if inner > 0.0 {
                h1 * inner.powf(1.0 / nf - 1.0)
                    * t.powf(nf - 1.0)
                    * env.f_upper(t).powf(nf / k as f64)
            } else {
                0.0
            };
            second.push(d2);
            prev = Some(t);
        }
    }
    RadialProfile::new(knots, values, first, second, 0.0)
}

/// Alexandrov-type estimate for the interior comparison constant:
///
/// ```text
/// c1 = omega_n^(-1/n) * diam(D_s0) * (norm_f + c0)^(1/k)
/// ```
///
/// where `norm_f` approximates the L^(n/k) norm of `f` over `D_s0` and the
/// bump has unit norm. This is the standard sup bound for the
/// Monge-Ampere comparison problem `det = ((f + c0 eta)^(n/k))` with zero
/// boundary data on a convex domain: `sup |v| <= omega_n^(-1/n) diam(Omega)
/// (integral det)^(1/n)`; it only needs to be an upper bound, so the
/// triangle inequality on the norm is taken coarsely.
pub fn alexandrov_c1(n: usize, a: &AkMatrix, s0: f64, f_norm: f64, c0: f64) -> f64 {
    let diam = 2.0 * (2.0 * s0 / a.min_diag()).sqrt();
    unit_ball_volume(n).powf(-1.0 / n as f64) * diam * (f_norm + c0).powf(1.0 / a.k() as f64)
}

/// L^(n/k) norm of `f` over the interior of the grid domain (midpoint
/// rule; feeds constants with built-in safety margins, not certificates).
fn grid_lnk_norm(f: &FModel, spec: &GridSpec, n: usize, k: usize) -> Result<f64> {
    let field = GridField::zeros(spec)?;
    let cell: f64 = spec.spacing().iter().product();
    let e = n as f64 / k as f64;
    let mut x = vec![0.0; n];
    let mut acc = 0.0;
    for &idx in field.interior_indices() {
        spec.point(idx, &mut x);
        acc += f.value(&x).powf(e) * cell;
    }
    Ok(acc.powf(1.0 / e))
}

// ---------------------------------------------------------------------------
// Barrier pair
// ---------------------------------------------------------------------------

/// The assembled barrier pair with all construction constants.
///
/// Global evaluation:
/// * lower barrier `ulow(x)` = `v1(x)` for `tau(x) < s0`, exterior profile
///   for `tau(x) >= s0`;
/// * upper barrier `ubar(x)` = 0 for `tau(x) < s0`, profile beyond.
///
/// The sandwich shifts satisfy `ulow + beta_minus <= tau <= ubar +
/// beta_plus` pointwise, with both inequalities saturating at infinity.
#[derive(Debug)]
pub struct BarrierPair {
    pub a: AkMatrix,
    pub k: usize,
    pub env: TailEnvelope,
    /// Exterior lower profile (`tau >= s0`).
    pub lower: RadialProfile,
    /// Interior piece `v1 <= 0` on `D_s0` (zero boundary values).
    pub lower_interior: GridField,
    /// Upper profile (`tau >= s0`).
    pub upper: RadialProfile,
    pub kappa: f64,
    pub hk: f64,
    pub h1: f64,
    pub h2: f64,
    pub c0_bump: f64,
    pub c1: f64,
    pub c2: f64,
    pub beta_minus: f64,
    pub beta_plus: f64,
}

impl BarrierPair {
    /// Construct the full pair: upper profile, interior solve `v1` with the
    /// normalized bump load `c0 eta`, `H2` selection, exterior lower
    /// profile, the boundary gradient-jump check, and the shift bounds.
    ///
    /// `v1_nodes` is the grid resolution for the interior solve; `tau_max`
    /// bounds the tabulated profile range (shift bounds use closed forms
    /// and do not depend on it).
    pub fn build(
        a: &AkMatrix,
        k: usize,
        f: &FModel,
        env: &TailEnvelope,
        v1_nodes: usize,
        tau_max: f64,
        opts: &NewtonOptions,
    ) -> Result<Self> {
        let n = a.dim();
        if let Some(d) = f.dim_hint() {
            if d != n {
                return Err(Error::Argument(format!(
                    "barrier build: f has dimension {d}, matrix has {n}"
                )));
            }
        }
        let hk = hk_constant(a);
        let kappa = kappa_constant(a);
        require_supercritical(kappa)?;
        let s0 = env.s0();

        let upper = build_upper_barrier(a, k, env, tau_max)?;

        // Interior machinery. The bump eta is the smooth profile
        // exp(1 - 1/(1 - tau/q)) supported in D_q with q = s0/4, normalized
        // to unit L^(n/k) norm via the exact level-set volume element
        // dV = omega_n 2^(n/2) (n/2) t^(n/2-1) det(a)^(-1/2) dt.
        let q = s0 / 4.0;
        let det_a: f64 = a.diag().iter().product();
        let omega = unit_ball_volume(n);
        let nf = n as f64;
        let e = nf / k as f64;
        let bump = move |rho: f64| -> f64 {
            if rho >= 1.0 - 1e-3 {
                0.0
            } else {
                (1.0 - 1.0 / (1.0 - rho)).exp()
            }
        };
        let eta_norm_pow = integrate(
            |t| {
                bump(t / q).powf(e)
                    * omega
                    * 2f64.powf(nf / 2.0)
                    * (nf / 2.0)
                    * t.powf(nf / 2.0 - 1.0)
                    / det_a.sqrt()
            },
            0.0,
            q,
            QUAD_RTOL,
            1e-300,
        )?;
        if !(eta_norm_pow > 0.0) {
            return Err(Error::Numeric("barrier build: bump norm vanished".into()));
        }
        let eta_norm = eta_norm_pow.powf(1.0 / e);

        let spec = GridSpec::ellipsoid(a, s0, v1_nodes)?;
        let f_norm = grid_lnk_norm(f, &spec, n, k)?;
        let c2 = c2_constant(n, k, env)?;

        // Doubling sweep on the bump amplitude: smallest c0 in {1, 2, 4, ...}
        // making the Alexandrov bound dominate the comparison requirement
        // c1 >= c2 det(a)^(-1/n).
        let need = c2 * det_a.powf(-1.0 / nf);
        let mut c0 = 1.0f64;
        let mut c1 = alexandrov_c1(n, a, s0, f_norm, c0);
        let mut sweeps = 0;
        while c1 < need && sweeps < 60 {
            c0 *= 2.0;
            c1 = alexandrov_c1(n, a, s0, f_norm, c0);
            sweeps += 1;
        }
        if c1 < need {
            return Err(Error::Constants(format!(
                "barrier build: c1 = {c1:.3e} cannot reach c2 det^(-1/n) = {need:.3e}"
            )));
        }
        let h1 = c1 / c2;
        let slope_bound = h1 * c2_inner(n, k, env, s0).max(0.0).powf(1.0 / nf);
        let h2 = select_h2(env, kappa, k, slope_bound)?;
        let lower = build_lower_profile(a, k, env, h2, tau_max)?;

        // Interior solve: sigma_k = f + c0 eta with boundary data s0 (the
        // constant shift does not change the Hessian), then v1 = u - s0.
        let a_owned = a.clone();
        let source = FnSource(move |x: &[f64]| {
            let tau = a_owned.quadratic(x);
            f.value(x) + c0 * bump(tau / q) / eta_norm
        });
        let (u_int, _report) = continuation_solve_source(&spec, &source, k, a, opts)?;
        let v1_values: Vec<f64> = u_int.values().iter().map(|v| v - s0).collect();
        let lower_interior = GridField::raw(&spec, v1_values)?;

        // Gradient-jump monitor at the gluing boundary: the chord slope of
        // v1 along the outward conormal must stay below the exterior slope
        // ulow'(s0) |A x|.
        let exterior_slope_tau = (h2 * s0.powf(-kappa)).powf(1.0 / k as f64);
        let step = 2.5 * spec.h_max();
        for dir in unit_directions(n, 32, 0x0BAD_5EED) {
            // Scale direction onto the boundary level set.
            let qd: f64 = a.quadratic(&dir);
            let scale = (s0 / qd).sqrt();
            let xb: Vec<f64> = dir.iter().map(|d| d * scale).collect();
            let ax: Vec<f64> = a.diag().iter().zip(&xb).map(|(ai, xi)| ai * xi).collect();
            let ax_norm = ax.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nu: Vec<f64> = ax.iter().map(|v| v / ax_norm).collect();
            let xin: Vec<f64> = xb.iter().zip(&nu).map(|(x, d)| x - step * d).collect();
            let interior_slope = -lower_interior.interpolate(&xin)? / step;
            let exterior_slope = exterior_slope_tau * ax_norm;
            if interior_slope >= exterior_slope {
                return Err(Error::Constants(format!(
                    "gradient jump violated at boundary sample (interior {interior_slope:.6e} \
                     >= exterior {exterior_slope:.6e}); increase H2 margin or c0"
                )));
            }
        }

        let mut pair = BarrierPair {
            a: a.clone(),
            k,
            env: *env,
            lower,
            lower_interior,
            upper,
            kappa,
            hk,
            h1,
            h2,
            c0_bump: c0,
            c1,
            c2,
            beta_minus: f64::NEG_INFINITY,
            beta_plus: f64::INFINITY,
        };
        let (bm, bp) = beta_bounds(&pair, a, DEFAULT_BOUNDS_SPAN * s0)?;
        pair.beta_minus = bm;
        pair.beta_plus = bp;
        Ok(pair)
    }

    /// Global lower barrier `ulow(x)` (no shift applied).
    pub fn lower_value(&self, x: &[f64]) -> Result<f64> {
        let tau = self.a.quadratic(x);
        if tau < self.env.s0() {
            self.lower_interior.interpolate(x)
        } else {
            self.lower.eval(tau)
        }
    }

    /// Global upper barrier `ubar(x)` (no shift applied).
    pub fn upper_value(&self, x: &[f64]) -> Result<f64> {
        let tau = self.a.quadratic(x);
        if tau < self.env.s0() {
            Ok(0.0)
        } else {
            self.upper.eval(tau)
        }
    }
}

// ---------------------------------------------------------------------------
// Shift bounds
// ---------------------------------------------------------------------------

/// Slope defects as coefficient lists: `g(tau) = sum c_i tau^(-p_i) ln^l_i`.
struct TailSeries {
    terms: Vec<(f64, f64, u32)>,
}

impl TailSeries {
    fn eval(&self, tau: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(c, p, l)| c * tau.powf(-p) * tau.ln().powi(l as i32))
            .sum()
    }
}

/// Tail integral `integral(tau_max..inf) defect(tau) dtau` of a slope
/// defect decaying like `tau^(-kappa)`, `kappa > 1`.
///
/// The substitution `tau = tau_max u^(-m)` maps the improper integral onto
/// `(0, 1]`; with `m` chosen so that `m (kappa - 1) >= 3` the transformed
/// integrand vanishes at `u = 0` like `u^2` and adaptive quadrature
/// resolves it to full tolerance regardless of the defect's leading
/// coefficient (which scales with `H2` and can be large).
fn defect_tail_integral<F: Fn(f64) -> f64>(defect: F, tau_max: f64, kappa: f64) -> Result<f64> {
    if !(kappa > 1.0) {
        return Err(Error::Argument(format!(
            "tail integral: kappa = {kappa} must exceed 1"
        )));
    }
    let m = (3.0 / (kappa - 1.0)).ceil().max(3.0);
    integrate(
        |u| {
            let tau = tau_max * u.powf(-m);
            defect(tau) * m * tau_max * u.powf(-m - 1.0)
        },
        0.0,
        1.0,
        1e-10,
        1e-13,
    )
}

/// `(ubar')^k = 1 - g1(tau)` with `g1` an explicit power/log series.
fn upper_slope_defect(env: &TailEnvelope, kappa: f64) -> TailSeries {
    slope_defect_series(env, kappa, 0.0, -1.0)
}

/// `(ulow')^k = 1 + g2(tau)`.
fn lower_slope_defect(env: &TailEnvelope, kappa: f64, h2: f64) -> TailSeries {
    slope_defect_series(env, kappa, h2, 1.0)
}

/// Common series: `tau^(-kappa) (inner +- H2) - 1` expanded in powers.
/// `sign = +1` for the f_upper inner integral, `-1` for f_lower.
fn slope_defect_series(env: &TailEnvelope, kappa: f64, h2: f64, sign: f64) -> TailSeries {
    let s0 = env.s0();
    let half_beta = env.beta() / 2.0;
    let c0 = env.c0();
    let mut terms: Vec<(f64, f64, u32)> = Vec::new();
    if (kappa - half_beta).abs() < LOG_BRANCH_TOL {
        // inner = t^kappa - s0^kappa + sign C0 kappa ln(t/s0):
        // g = (H2*sign_h - s0^kappa - sign C0 kappa ln s0) tau^(-kappa)
        //   + sign C0 kappa tau^(-kappa) ln tau.
        terms.push((h2 - s0.powf(kappa) - sign * c0 * kappa * s0.ln(), kappa, 0));
        terms.push((sign * c0 * kappa, kappa, 1));
    } else {
        let b1 = sign * c0 * kappa / (kappa - half_beta);
        terms.push((h2 - s0.powf(kappa) - b1 * s0.powf(kappa - half_beta), kappa, 0));
        terms.push((b1, half_beta, 0));
    }
    // For the upper barrier the sign convention flips the whole series:
    // (ubar')^k = 1 - g1 with g1 = -(series above with h2 = 0, sign = -1).
    if sign < 0.0 {
        for t in &mut terms {
            t.0 = -t.0;
        }
    }
    TailSeries { terms }
}

/// Shift bounds: `beta_minus = inf (tau - ulow)` and `beta_plus =
/// sup (tau - ubar)`. Both extrema are limits at infinity of monotone
/// expressions, computed as `s0 -+ (numeric integral over [s0, tau_max] +
/// tail integral over [tau_max, inf) of the exact slope defect under a
/// power substitution)`; the interior piece of `beta_minus` additionally
/// scans the `v1` field.
pub fn beta_bounds(pair: &BarrierPair, a: &AkMatrix, tau_max: f64) -> Result<(f64, f64)> {
    let env = &pair.env;
    let s0 = env.s0();
    if !(tau_max >= 100.0 * s0) {
        return Err(Error::Argument(format!(
            "beta_bounds: tau_max = {tau_max} must be at least 100 s0 = {}",
            100.0 * s0
        )));
    }
    let kappa = pair.kappa;
    let kf = pair.k as f64;

    let g1 = upper_slope_defect(env, kappa);
    let g2 = lower_slope_defect(env, kappa, pair.h2);
    for (name, g) in [("upper", &g1), ("lower", &g2)] {
        let gt = g.eval(tau_max);
        if gt.abs() > 0.3 {
            return Err(Error::Argument(format!(
                "beta_bounds: {name} slope defect {gt:.3e} still large at tau_max = \
                 {tau_max}; increase tau_max"
            )));
        }
    }

    // beta_plus = s0 + integral(s0..inf) (1 - (1 - g1)^(1/k)), with the
    // defect written through ln_1p/exp_m1 so it keeps full relative
    // accuracy when g is at roundoff scale deep in the tail.
    let defect_up = |t: f64| {
        let g = g1.eval(t).clamp(0.0, 1.0);
        -((-g).ln_1p() / kf).exp_m1()
    };
    let numeric_up = integrate(&defect_up, s0, tau_max, 1e-10, 1e-13)?;
    let tail_up = defect_tail_integral(&defect_up, tau_max, kappa)?;
    let beta_plus = s0 + numeric_up + tail_up;

    // beta_minus: exterior limit s0 - integral(s0..inf) ((1 + g2)^(1/k) - 1),
    // compared against the interior scan of tau - v1.
    let defect_lo = |t: f64| {
        let g = g2.eval(t).max(0.0);
        (g.ln_1p() / kf).exp_m1()
    };
    let numeric_lo = integrate(&defect_lo, s0, tau_max, 1e-10, 1e-13)?;
    let tail_lo = defect_tail_integral(&defect_lo, tau_max, kappa)?;
    let exterior_inf = s0 - numeric_lo - tail_lo;

    let spec = pair.lower_interior.spec();
    let mut x = vec![0.0; a.dim()];
    let mut interior_min = f64::INFINITY;
    for &idx in pair.lower_interior.interior_indices() {
        spec.point(idx, &mut x);
        interior_min = interior_min.min(a.quadratic(&x) - pair.lower_interior.value(idx));
    }
    let beta_minus = exterior_inf.min(interior_min);

    if !beta_minus.is_finite() || !beta_plus.is_finite() {
        return Err(Error::Numeric(format!(
            "beta_bounds: non-finite bounds ({beta_minus}, {beta_plus})"
        )));
    }
    Ok((beta_minus, beta_plus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symfunc::{normalize_to_ak, sigma_k_matrix};

    fn fixture_a() -> AkMatrix {
        // n = 3, k = 2, isotropic: kappa = 1.5.
        normalize_to_ak(&[1.0, 1.0, 1.0], 2).unwrap()
    }

    fn fixture_env() -> TailEnvelope {
        TailEnvelope::new(0.4, 2.0, 3.0).unwrap()
    }

    #[test]
    fn envelope_validation() {
        assert!(TailEnvelope::new(0.5, 2.0, 3.0).is_ok());
        assert!(TailEnvelope::new(-0.1, 2.0, 3.0).is_err());
        assert!(TailEnvelope::new(0.5, 0.9, 3.0).is_err());
        assert!(TailEnvelope::new(0.5, 2.0, 2.0).is_err());
        // f_lower(s0) <= 0:
        assert!(TailEnvelope::new(3.0, 1.2, 3.0).is_err());
    }

    #[test]
    fn radial_sigma_unit_slope_gives_one() {
        let a = fixture_a();
        for x in [[0.0, 0.0, 0.0], [1.0, -2.0, 0.5], [3.0, 1.0, 1.0]] {
            let v = sigma_k_radial(&a, &x, 1.0, 0.0);
            assert!((v - 1.0).abs() < 1e-14, "{v}");
        }
    }

    #[test]
    fn radial_sigma_matches_assembled_hessian() {
        // u(tau) = tau^2/2: u' = tau, u'' = 1; quartic in x, generic test
        // of the closed form against the matrix route.
        let a = normalize_to_ak(&[0.5, 1.0, 2.0], 2).unwrap();
        for x in [[0.7, -0.3, 0.4], [1.5, 0.2, -1.0], [0.1, 0.9, 0.6]] {
            let tau = a.quadratic(&x);
            let m = radial_hessian(&a, &x, tau, 1.0);
            let direct = sigma_k_radial(&a, &x, tau, 1.0);
            let oracle = sigma_k_matrix(&m, 2).unwrap();
            assert!(
                (direct - oracle).abs() < 1e-12 * oracle.abs().max(1.0),
                "{direct} vs {oracle}"
            );
        }
    }

    #[test]
    fn radial_sigma_negative_second_reduces() {
        let a = fixture_a();
        let x = [1.0, 0.5, -0.5];
        let base = sigma_k_radial(&a, &x, 1.0, 0.0);
        assert!(sigma_k_radial(&a, &x, 1.0, -0.1) < base);
    }

    #[test]
    fn hk_and_kappa_fixture_values() {
        let a = fixture_a();
        // a_i = 3^(-1/2); sigma_1 without i = 2 a = 2/sqrt(3);
        // h_2 = a * 2a = 2/3; kappa = 2 / (4/3) = 1.5.
        assert!((hk_constant(&a) - 2.0 / 3.0).abs() < 1e-12);
        assert!((kappa_constant(&a) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn upper_barrier_c0_zero_closed_form() {
        let a = fixture_a();
        let env = TailEnvelope::new(0.0, 2.0, 4.0).unwrap();
        let p = build_upper_barrier(&a, 2, &env, 500.0).unwrap();
        let kappa = 1.5;
        for (j, &t) in p.knots().iter().enumerate().skip(1) {
            let want = (1.0 - (env.s0() / t).powf(kappa)).powf(0.5);
            let got = p.first_deriv()[j];
            assert!((got - want).abs() < 1e-12, "knot {j}: {got} vs {want}");
            assert!(got < 1.0);
        }
        assert_eq!(p.values()[0], 0.0);
        assert_eq!(p.first_deriv()[0], 0.0);
        // Slope tends to 1.
        assert!(1.0 - p.first_deriv().last().unwrap() < 0.01);
    }

    #[test]
    fn upper_barrier_ode_identity_at_knots() {
        let a = fixture_a();
        let env = fixture_env();
        let k = 2;
        let p = build_upper_barrier(&a, k, &env, 800.0).unwrap();
        let hk = hk_constant(&a);
        for j in 1..p.knots().len() {
            let t = p.knots()[j];
            let up = p.first_deriv()[j];
            let upp = p.second_deriv()[j];
            let lhs = up.powi(k as i32) + 2.0 * hk * upp * up.powi(k as i32 - 1) * t;
            let rhs = env.f_lower(t);
            assert!(
                (lhs - rhs).abs() < 1e-8 * rhs.abs(),
                "knot {j}: {lhs} vs {rhs}"
            );
            assert!(upp > 0.0, "upper profile must be convex in tau");
        }
    }

    #[test]
    fn lower_profile_ode_identity_and_concavity() {
        let a = fixture_a();
        let env = fixture_env();
        let k = 2;
        let kappa = kappa_constant(&a);
        let h2 = select_h2(&env, kappa, k, 1.3).unwrap();
        let p = build_lower_profile(&a, k, &env, h2, 800.0).unwrap();
        let hk = hk_constant(&a);
        // Boundary slope formula.
        let want0 = (h2 * env.s0().powf(-kappa)).powf(1.0 / k as f64);
        assert!((p.first_deriv()[0] - want0).abs() < 1e-12);
        assert!(want0 > 1.0);
        for j in 1..p.knots().len() {
            let t = p.knots()[j];
            let up = p.first_deriv()[j];
            let upp = p.second_deriv()[j];
            let lhs = up.powi(k as i32) + 2.0 * hk * upp * up.powi(k as i32 - 1) * t;
            let rhs = env.f_upper(t);
            assert!(
                (lhs - rhs).abs() < 1e-8 * rhs.abs(),
                "knot {j}: {lhs} vs {rhs}"
            );
            assert!(upp < 0.0, "lower profile must be concave past s0");
        }
    }

    #[test]
    fn select_h2_c0_zero_formula() {
        let env = TailEnvelope::new(0.0, 2.0, 4.0).unwrap();
        let kappa = 1.5;
        // Slope condition weaker than concavity: 1.1 * s0^kappa.
        let h2 = select_h2(&env, kappa, 2, 0.5).unwrap();
        assert!((h2 - 1.1 * 2f64.powf(1.5)).abs() < 1e-12);
        // Slope condition dominant: 1.1 * slope^k s0^kappa.
        let h2b = select_h2(&env, kappa, 2, 3.0).unwrap();
        assert!((h2b - 1.1 * 9.0 * 2f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn concavity_margin_infimum_at_s0() {
        let env = fixture_env();
        let kappa = 1.5;
        let h2 = select_h2(&env, kappa, 2, 0.0).unwrap();
        let at_s0 = concavity_margin(&env, kappa, h2, env.s0());
        let expected =
            h2 - env.s0().powf(kappa) - env.c0() * env.s0().powf(kappa - env.beta() / 2.0);
        assert!((at_s0 - expected).abs() < 1e-12);
        assert!(at_s0 > 0.0);
        for t in [2.5, 4.0, 40.0, 4000.0] {
            assert!(concavity_margin(&env, kappa, h2, t) >= at_s0 - 1e-12);
        }
    }

    #[test]
    fn log_branch_dispatch() {
        // kappa = beta/2 = 1.5 exactly.
        let env = TailEnvelope::new(0.3, 2.0, 3.0).unwrap();
        let kappa = 1.5;
        let m = concavity_margin(&env, kappa, 10.0, env.s0());
        let expected = 10.0 - env.s0().powf(kappa) - env.c0();
        assert!((m - expected).abs() < 1e-12);
        // Margin grows logarithmically.
        let m2 = concavity_margin(&env, kappa, 10.0, 20.0 * env.s0());
        assert!((m2 - m - env.c0() * kappa * 20f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn v3_shape() {
        let a = fixture_a();
        let env = fixture_env();
        let c1 = 5.0;
        let p = build_v3(&a, 3, 2, &env, c1).unwrap();
        assert_eq!(p.eval(0.0).unwrap(), -c1);
        assert_eq!(p.eval(env.s0() / 4.0).unwrap(), -c1);
        // v3(s0) = 0 up to quadrature tolerance.
        assert!(p.eval(env.s0()).unwrap().abs() < 1e-8 * c1);
        // Monotone up on the ramp, C1 at the junction.
        assert!(p.deriv(env.s0() * 0.75).unwrap() > 0.0);
        assert!(p.first_deriv()[2].abs() < 1e-12); // knot at s0/2
    }

    #[test]
    fn v3_determinant_subsolution_on_outer_annulus() {
        // det(D^2 v3) >= det(A) H1^n f_upper^(n/k) at points of the outer
        // annulus where the accumulated inner integral exceeds 1.
        let a = fixture_a();
        let env = fixture_env();
        let n = 3;
        let k = 2;
        let c2 = c2_constant(n, k, &env).unwrap();
        let det_a: f64 = a.diag().iter().product();
        let c1 = 1.5 * c2 * det_a.powf(-1.0 / n as f64);
        let p = build_v3(&a, n, k, &env, c1).unwrap();
        let h1 = c1 / c2;
        let dirs = unit_directions(n, 16, 3);
        for &frac in &[0.8, 0.9, 1.0] {
            let tau = env.s0() * frac;
            if c2_inner(n, k, &env, tau) < 1.0 {
                continue;
            }
            for dir in &dirs {
                let qd = a.quadratic(dir);
                let x: Vec<f64> = dir.iter().map(|d| d * (tau / qd).sqrt()).collect();
                let up = p.deriv(tau).unwrap();
                let upp = p.second(tau).unwrap();
                // Determinant of u' A + u'' (Ax)(Ax)' via the rank-one
                // update formula: det(A) u'^n + u'' u'^(n-1) sum minors.
                let mut det_route = det_a * up.powi(n as i32);
                let mut corr = 0.0;
                for (i, (&ai, &xi)) in a.diag().iter().zip(&x).enumerate() {
                    let minor: f64 = a
                        .diag()
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, v)| v)
                        .product();
                    corr += minor * (ai * xi) * (ai * xi);
                }
                det_route += upp * up.powi(n as i32 - 1) * corr;
                let floor = det_a * h1.powi(n as i32) * env.f_upper(tau).powf(n as f64 / k as f64);
                assert!(
                    det_route >= floor * (1.0 - 1e-9),
                    "tau = {tau}: {det_route} < {floor}"
                );
            }
        }
    }

    #[test]
    fn full_pair_builds_and_brackets() {
        let a = fixture_a();
        let f = FModel::power_tail(0.3, 3.0, 1.0).unwrap();
        let env = f.tail_envelope(&a).unwrap();
        let pair = BarrierPair::build(
            &a,
            2,
            &f,
            &env,
            17,
            DEFAULT_PROFILE_SPAN * env.s0(),
            &NewtonOptions::default(),
        )
        .unwrap();
        assert!(pair.kappa > 1.0);
        assert!(pair.h2 > pair.env.s0().powf(pair.kappa));
        assert!(pair.beta_minus.is_finite() && pair.beta_plus.is_finite());
        assert!(pair.beta_plus > 0.0);
        // v1 <= 0 with zero boundary.
        for &idx in pair.lower_interior.interior_indices() {
            assert!(pair.lower_interior.value(idx) <= 1e-12);
        }
        // Pointwise sandwich of the quadratic: ulow + beta_minus <= tau
        // <= ubar + beta_plus at assorted points.
        for x in [[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [3.0, -2.0, 0.5], [8.0, 0.1, 0.1]] {
            let tau = pair.a.quadratic(&x);
            if tau > pair.upper.knots().last().copied().unwrap() {
                continue;
            }
            let lo = pair.lower_value(&x).unwrap() + pair.beta_minus;
            let hi = pair.upper_value(&x).unwrap() + pair.beta_plus;
            assert!(lo <= tau + 1e-9, "lower {lo} vs tau {tau} at {x:?}");
            assert!(hi >= tau - 1e-9, "upper {hi} vs tau {tau} at {x:?}");
        }
    }

    #[test]
    fn beta_bounds_stable_under_doubling() {
        let a = fixture_a();
        let f = FModel::constant();
        let env = TailEnvelope::new(0.0, 2.0, 4.0).unwrap();
        let pair = BarrierPair::build(
            &a,
            2,
            &f,
            &env,
            17,
            DEFAULT_PROFILE_SPAN * env.s0(),
            &NewtonOptions::default(),
        )
        .unwrap();
        let t1 = 1e3 * env.s0();
        let (m1, p1) = beta_bounds(&pair, &a, t1).unwrap();
        let (m2, p2) = beta_bounds(&pair, &a, 2.0 * t1).unwrap();
        assert!((m1 - m2).abs() < 1e-6, "beta_minus drift {}", (m1 - m2).abs());
        assert!((p1 - p2).abs() < 1e-6, "beta_plus drift {}", (p1 - p2).abs());
    }

    #[test]
    fn kappa_guard_rejects_structural_obstruction() {
        // n = 2, k = 2: h_2 = det = 1, kappa = 1 exactly.
        let a = normalize_to_ak(&[1.0, 1.0], 2).unwrap();
        let env = TailEnvelope::new(0.0, 2.0, 4.0).unwrap();
        let err = build_upper_barrier(&a, 2, &env, 500.0);
        assert!(matches!(err, Err(Error::Constants(_))));
    }

    #[test]
    fn profile_csv_format() {
        let a = fixture_a();
        let env = TailEnvelope::new(0.0, 2.0, 4.0).unwrap();
        let p = build_upper_barrier(&a, 2, &env, 100.0).unwrap();
        let mut out = Vec::new();
        p.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("tau,u,du,d2u\n"));
        assert_eq!(text.lines().count(), 1 + p.knots().len());
    }
}
