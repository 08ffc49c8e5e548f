//! Scratch diagnostic for the remainder fit (not part of the library).

use khessian::asymptotics::fit_quadratic_remainder;
use khessian::grid::{GridField, GridSpec};
use khessian::symfunc::normalize_to_ak;

fn main() {
    let a = normalize_to_ak(&[1.0, 1.0, 1.0], 2).unwrap();
    let spec = GridSpec::box_domain(&[-200.0; 3], &[200.0; 3], &[81; 3]).unwrap();
    let b = [0.3, -0.2, 0.1];
    let linear = move |x: &[f64]| b[0] * x[0] + b[1] * x[1] + b[2] * x[2] + 1.7;

    for (label, with_log) in [("pow", false), ("log", true)] {
        let aq = a.clone();
        let u = GridField::from_fn(&spec, move |x| {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(2.0);
            let tail = if with_log {
                50.0 * r.ln() / r
            } else {
                50.0 / r
            };
            aq.quadratic(x) + linear(x) + tail
        })
        .unwrap();
        let fit = fit_quadratic_remainder(&u, &a, 50.0, 180.0, 6).unwrap();
        println!("== {label} ==");
        println!("b_hat = {:?}", fit.b);
        println!("c_hat = {:.10}  (planted 1.7)", fit.c);
        println!("exponent = {:.6}  log_flag = {}", fit.exponent, fit.log_flag);
        for j in 0..fit.shell_radii.len() {
            let r = fit.shell_radii[j];
            let ideal = if with_log {
                50.0 * r.ln() / r
            } else {
                50.0 / r
            };
            println!(
                "shell {j}: r={:9.4}  sup={:.6}  rms={:.6}  ideal(mid)={:.6}  count={}",
                r, fit.shell_sup[j], fit.shell_rms[j], ideal, fit.shell_counts[j]
            );
        }
    }
}
