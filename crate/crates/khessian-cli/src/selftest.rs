//! Built-in verification battery for the `selftest` subcommand.
//!
//! Each suite re-checks one pillar of the library against an independent
//! route (enumeration oracles, finite differences, closed forms,
//! manufactured solutions) on corpora drawn from the run seed. Suites
//! report pass/fail plus a short detail string; the command prints one
//! line per suite and exits with the number of failures.

use khessian::barriers::{
    build_lower_profile, build_upper_barrier, hk_constant, kappa_constant, select_h2,
    TailEnvelope,
};
use khessian::dirichlet::{continuation_solve, newton_solve_source, FnSource, NewtonOptions};
use khessian::fmodel::FModel;
use khessian::grid::{GridField, GridSpec};
use khessian::symfunc::{
    f_and_grad, in_gamma_k, normalize_to_ak, sigma_k_matrix, sigma_k_minors, SymMatrix,
};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::Path;

#[derive(Debug, Serialize)]
pub struct SuiteResult {
    pub suite: String,
    pub passed: bool,
    /// Failure description; empty on success.
    pub detail: String,
}

type Suite = (&'static str, fn(&mut ChaCha8Rng, &Path) -> Result<(), String>);

const SUITES: &[Suite] = &[
    ("sigma-routes", suite_sigma_routes),
    ("euler-identity", suite_euler_identity),
    ("gradient-fd", suite_gradient_fd),
    ("barrier-ode", suite_barrier_ode),
    ("quadratic-exactness", suite_quadratic_exactness),
    ("poisson-manufactured", suite_poisson_manufactured),
    ("envelope-bounds", suite_envelope_bounds),
    ("field-roundtrip", suite_field_roundtrip),
];

/// Run every suite with a per-suite stream split off the run seed; print
/// one line per suite; return the results in declaration order.
pub fn run_all(seed: u64, scratch: &Path) -> Vec<SuiteResult> {
    let mut results = Vec::new();
    for (i, (name, f)) in SUITES.iter().enumerate() {
        let stream = (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(stream));
        let outcome = f(&mut rng, scratch);
        match &outcome {
            Ok(()) => println!("PASS  {name}"),
            Err(detail) => println!("FAIL  {name}: {detail}"),
        }
        results.push(SuiteResult {
            suite: name.to_string(),
            passed: outcome.is_ok(),
            detail: outcome.err().unwrap_or_default(),
        });
    }
    results
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> SymMatrix {
    let mut m = SymMatrix::identity(n);
    for i in 0..n {
        for j in i..n {
            m.set_sym(i, j, rng.random_range(-scale..scale));
        }
    }
    m
}

fn suite_sigma_routes(rng: &mut ChaCha8Rng, _: &Path) -> Result<(), String> {
    for _ in 0..2000 {
        let n = rng.random_range(2..=4usize);
        let m = random_symmetric(rng, n, 2.0);
        for k in 1..=n {
            let eigen = sigma_k_matrix(&m, k).map_err(|e| e.to_string())?;
            let minors = sigma_k_minors(&m, k);
            if (eigen - minors).abs() > 1e-10 * eigen.abs().max(1.0) {
                return Err(format!(
                    "n = {n}, k = {k}: eigenvalue route {eigen} vs minor route {minors}"
                ));
            }
        }
    }
    Ok(())
}

fn suite_euler_identity(rng: &mut ChaCha8Rng, _: &Path) -> Result<(), String> {
    for _ in 0..2000 {
        let n = rng.random_range(2..=4usize);
        let m = random_symmetric(rng, n, 2.0);
        for k in 1..=n {
            let t = khessian::symfunc::newton_tensor(&m, k).map_err(|e| e.to_string())?;
            let mut tr = 0.0;
            for i in 0..n {
                for j in 0..n {
                    tr += t.get(i, j) * m.get(i, j);
                }
            }
            let want = k as f64 * sigma_k_minors(&m, k);
            if (tr - want).abs() > 1e-10 * want.abs().max(1.0) {
                return Err(format!("n = {n}, k = {k}: trace {tr} vs {want}"));
            }
        }
    }
    Ok(())
}

fn suite_gradient_fd(rng: &mut ChaCha8Rng, _: &Path) -> Result<(), String> {
    let h = 1e-6;
    for _ in 0..200 {
        let n = rng.random_range(2..=4usize);
        let k = rng.random_range(1..=n);
        let m = loop {
            let mut m = random_symmetric(rng, n, 1.5);
            let lift = rng.random_range(0.0..2.5);
            for i in 0..n {
                m.set_sym(i, i, m.get(i, i) + lift);
            }
            if in_gamma_k(&m, k).map_err(|e| e.to_string())?
                && sigma_k_matrix(&m, k).map_err(|e| e.to_string())? >= 0.1
            {
                break m;
            }
        };
        let (_, grad) = f_and_grad(&m, k).map_err(|e| e.to_string())?;
        let f_of = |m: &SymMatrix| sigma_k_minors(m, k).powf(1.0 / k as f64);
        for i in 0..n {
            for j in i..n {
                let mut mp = m.clone();
                let mut mm = m.clone();
                mp.set_sym(i, j, m.get(i, j) + h);
                mm.set_sym(i, j, m.get(i, j) - h);
                let fd = (f_of(&mp) - f_of(&mm)) / (2.0 * h);
                let expected = if i == j { grad.get(i, i) } else { 2.0 * grad.get(i, j) };
                if (fd - expected).abs() > 1e-5 {
                    return Err(format!(
                        "entry ({i},{j}) at n = {n}, k = {k}: FD {fd} vs gradient {expected}"
                    ));
                }
            }
        }
    }
    Ok(())
}

fn suite_barrier_ode(_: &mut ChaCha8Rng, _: &Path) -> Result<(), String> {
    let a = normalize_to_ak(&[1.0, 1.0, 1.0], 2).map_err(|e| e.to_string())?;
    let k = 2;
    let hk = hk_constant(&a);
    let kappa = kappa_constant(&a);
    for beta in [3.0, 4.0] {
        for c0 in [0.0, 0.5] {
            let env = TailEnvelope::new(c0, 2.0, beta).map_err(|e| e.to_string())?;
            let upper = build_upper_barrier(&a, k, &env, 800.0).map_err(|e| e.to_string())?;
            for j in 1..upper.knots().len() {
                let t = upper.knots()[j];
                let up = upper.first_deriv()[j];
                let upp = upper.second_deriv()[j];
                let lhs = up.powi(k as i32) + 2.0 * hk * upp * up.powi(k as i32 - 1) * t;
                let rhs = env.f_lower(t);
                if (lhs - rhs).abs() > 1e-8 * rhs.abs() {
                    return Err(format!(
                        "upper identity at beta = {beta}, c0 = {c0}, tau = {t}: {lhs} vs {rhs}"
                    ));
                }
            }
            let h2 = select_h2(&env, kappa, k, 1.3).map_err(|e| e.to_string())?;
            let lower = build_lower_profile(&a, k, &env, h2, 800.0).map_err(|e| e.to_string())?;
            for j in 1..lower.knots().len() {
                let t = lower.knots()[j];
                let up = lower.first_deriv()[j];
                let upp = lower.second_deriv()[j];
                let lhs = up.powi(k as i32) + 2.0 * hk * upp * up.powi(k as i32 - 1) * t;
                let rhs = env.f_upper(t);
                if (lhs - rhs).abs() > 1e-8 * rhs.abs() {
                    return Err(format!(
                        "lower identity at beta = {beta}, c0 = {c0}, tau = {t}: {lhs} vs {rhs}"
                    ));
                }
            }
        }
    }
    Ok(())
}

fn suite_quadratic_exactness(rng: &mut ChaCha8Rng, _: &Path) -> Result<(), String> {
    let k = rng.random_range(1..=3usize);
    let diag: Vec<f64> = (0..3).map(|_| rng.random_range(0.5..2.0)).collect();
    let a = normalize_to_ak(&diag, k).map_err(|e| e.to_string())?;
    let spec =
        GridSpec::box_domain(&[-1.0; 3], &[1.0; 3], &[17; 3]).map_err(|e| e.to_string())?;
    let f = FModel::constant();
    let (u, _) = continuation_solve(&spec, &f, k, &a, &NewtonOptions::default())
        .map_err(|e| e.to_string())?;
    let err = u.sup_error(|x| a.quadratic(x), None);
    if err > 1e-10 {
        return Err(format!("sup error {err:.3e} above 1e-10 for k = {k}"));
    }
    Ok(())
}

fn suite_poisson_manufactured(_: &mut ChaCha8Rng, _: &Path) -> Result<(), String> {
    // k = 1 with solution (x'Ax)/2 + 0.1 sin(x1) sin(x2) sin(x3); the
    // Laplacian of the product term is -0.3 times itself.
    let a = normalize_to_ak(&[1.0, 1.0, 1.0], 1).map_err(|e| e.to_string())?;
    let aq = a.clone();
    let exact = move |x: &[f64]| {
        aq.quadratic(x) + 0.1 * x.iter().map(|c| c.sin()).product::<f64>()
    };
    let rhs = |x: &[f64]| 1.0 - 0.3 * x.iter().map(|c| c.sin()).product::<f64>();
    let spec =
        GridSpec::box_domain(&[-1.0; 3], &[1.0; 3], &[17; 3]).map_err(|e| e.to_string())?;
    let u0 = GridField::from_fn(&spec, &exact).map_err(|e| e.to_string())?;
    let (u, report) = newton_solve_source(&u0, &FnSource(rhs), 1, &NewtonOptions::default())
        .map_err(|e| e.to_string())?;
    let err = u.sup_error(&exact, None);
    // Second-order discretization on h = 1/8: expect ~1e-4; the window
    // catches both broken assembly (too large) and an accidentally exact
    // comparison (too small to be a discretized solve).
    if !(1e-8..5e-3).contains(&err) {
        return Err(format!(
            "manufactured error {err:.3e} outside expected window (iterations = {})",
            report.iterations
        ));
    }
    Ok(())
}

fn suite_envelope_bounds(rng: &mut ChaCha8Rng, _: &Path) -> Result<(), String> {
    let a = normalize_to_ak(&[1.0, 1.4, 0.7], 2).map_err(|e| e.to_string())?;
    let f = FModel::sum(vec![
        FModel::power_tail(0.4, 3.5, 1.0).map_err(|e| e.to_string())?,
        FModel::bump(vec![0.3, -0.2, 0.5], 1.2, 0.8).map_err(|e| e.to_string())?,
    ])
    .map_err(|e| e.to_string())?;
    let env = f.tail_envelope(&a).map_err(|e| e.to_string())?;
    let s0 = env.s0();
    for _ in 0..2000 {
        let tau = s0 * (1.0 + 1e-6) * 10f64.powf(rng.random_range(0.0..2.0));
        let d: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let quad: f64 = a.diag().iter().zip(&d).map(|(ai, di)| ai * di * di).sum();
        if quad < 1e-6 {
            continue;
        }
        let scale = (2.0 * tau / quad).sqrt();
        let x: Vec<f64> = d.iter().map(|v| v * scale).collect();
        let tau_x = a.quadratic(&x);
        if tau_x < s0 {
            continue;
        }
        let v = f.value(&x);
        if !(env.f_lower(tau_x) <= v && v <= env.f_upper(tau_x)) {
            return Err(format!("envelope violated at tau = {tau_x}"));
        }
    }
    Ok(())
}

fn suite_field_roundtrip(rng: &mut ChaCha8Rng, scratch: &Path) -> Result<(), String> {
    let spec =
        GridSpec::box_domain(&[-1.0; 3], &[1.0; 3], &[17; 3]).map_err(|e| e.to_string())?;
    let c: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
    let u = GridField::from_fn(&spec, |x| {
        c[0] + c[1] * x[0] + c[2] * x[1] * x[1] + c[3] * (x[2] * 3.0).sin()
    })
    .map_err(|e| e.to_string())?;
    let path = scratch.join("selftest_roundtrip.khes");
    u.save_binary(&path).map_err(|e| e.to_string())?;
    let back = GridField::load_binary(&path).map_err(|e| e.to_string())?;
    let _ = std::fs::remove_file(&path);
    if u.values() != back.values() {
        return Err("binary round trip is not bit-exact".into());
    }
    if u.spec().nodes_per_axis() != back.spec().nodes_per_axis() {
        return Err("binary round trip changed the grid shape".into());
    }
    Ok(())
}
