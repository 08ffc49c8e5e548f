//! Quadrature oracle: the adaptive integrator against a fixed-resolution
//! composite Simpson rule and against closed forms.
//!
//! Simpson at 2^14 panels has truncation error O(h^4 f'''') ~ 1e-17 per
//! unit length for the smooth integrands below — far below the comparison
//! tolerances — and shares no code with the adaptive Gauss-Kronrod driver.

use khessian::quad::integrate;
use std::f64::consts::{E, PI};

/// Composite Simpson rule with a fixed even panel count. Test-only oracle.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    assert!(panels % 2 == 0 && panels >= 2);
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

const PANELS: usize = 1 << 14;

fn check<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, closed_form: Option<f64>, label: &str) {
    let adaptive = integrate(f, a, b, 1e-12, 1e-15).unwrap();
    let oracle = simpson(f, a, b, PANELS);
    assert!(
        (adaptive - oracle).abs() <= 1e-9 * oracle.abs().max(1.0),
        "{label}: adaptive {adaptive} vs Simpson {oracle}"
    );
    if let Some(exact) = closed_form {
        assert!(
            (adaptive - exact).abs() <= 1e-11 * exact.abs().max(1.0),
            "{label}: adaptive {adaptive} vs closed form {exact}"
        );
        assert!(
            (oracle - exact).abs() <= 1e-9 * exact.abs().max(1.0),
            "{label}: Simpson {oracle} vs closed form {exact}"
        );
    }
}

#[test]
fn smooth_integrands_match_simpson_and_closed_forms() {
    check(|x: f64| x.sin(), 0.0, PI, Some(2.0), "sin on [0, pi]");
    check(|x: f64| x.exp(), 0.0, 1.0, Some(E - 1.0), "exp on [0, 1]");
    check(
        |x: f64| 1.0 / (1.0 + x * x),
        0.0,
        1.0,
        Some(PI / 4.0),
        "Cauchy kernel on [0, 1]",
    );
    check(
        |x: f64| x.powf(-1.5),
        1.0,
        50.0,
        Some(2.0 * (1.0 - 1.0 / 50f64.sqrt())),
        "power tail on [1, 50]",
    );
    // Degree-5 polynomial with a known antiderivative.
    let poly = |x: f64| 3.0 * x.powi(5) - 2.0 * x.powi(3) + x - 7.0;
    let anti = |x: f64| 0.5 * x.powi(6) - 0.5 * x.powi(4) + 0.5 * x * x - 7.0 * x;
    check(poly, -1.0, 2.0, Some(anti(2.0) - anti(-1.0)), "quintic on [-1, 2]");
}

#[test]
fn peaked_integrand_matches_simpson() {
    // Narrow Gaussian: stresses the adaptive refinement; no elementary
    // closed form needed — Simpson at 2^14 panels resolves the peak
    // (about 1000 panels across the 6-sigma core).
    check(
        |x: f64| (-100.0 * (x - 0.3) * (x - 0.3)).exp(),
        0.0,
        1.0,
        None,
        "narrow Gaussian on [0, 1]",
    );
}

#[test]
fn barrier_style_integrands_match_simpson() {
    // The profile builders integrate t^(-kappa)-type slopes and
    // inverse-power envelope moments; check representatives of both
    // families over a decade-spanning range.
    check(
        |t: f64| (t.powf(-1.5) * (1.0 + 3.0 * t.powf(-2.0))).powf(0.5),
        2.0,
        200.0,
        None,
        "lower-profile slope shape",
    );
    check(
        |t: f64| t.powf(0.5 - 1.0) * (1.0 + t).powf(-2.0),
        2.0,
        500.0,
        None,
        "envelope moment shape",
    );
}

#[test]
fn interval_additivity_against_simpson() {
    let f = |x: f64| (x * x).sin() + 0.5 * x;
    let whole = integrate(f, 0.0, 4.0, 1e-12, 1e-15).unwrap();
    let left = integrate(f, 0.0, 1.7, 1e-12, 1e-15).unwrap();
    let right = integrate(f, 1.7, 4.0, 1e-12, 1e-15).unwrap();
    assert!((whole - (left + right)).abs() <= 1e-10);
    let oracle = simpson(f, 0.0, 4.0, PANELS);
    assert!((whole - oracle).abs() <= 1e-8 * oracle.abs().max(1.0));
}
