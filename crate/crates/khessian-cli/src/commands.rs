//! Artifact-producing subcommands.
//!
//! Each command reads its typed config, drives the library, writes fields
//! (binary + CSV) and reports under the output directory, and hands a
//! [`CommandOutput`] back to `main`, which owns manifest writing and exit
//! codes. Solver nonconvergence and certification failures are reported
//! through [`Outcome`] (with diagnostics in the summary) rather than as
//! hard errors, so the manifest still records everything the run produced.

use crate::config::{
    BarriersConfig, BuildEntireConfig, CheckLiouvilleConfig, FitAsymptoticsConfig,
    SolveDirichletConfig,
};
use khessian::asymptotics::fit_quadratic_remainder;
use khessian::barriers::BarrierPair;
use khessian::dirichlet::{continuation_solve, SolveReport};
use khessian::entire::{extract_limit, run_nested};
use khessian::grid::{format_sig17, GridField};
use khessian::liouville::{hessian_decay, DEFAULT_ALPHA};
use khessian::{Error, Result};
use std::fs;
use std::path::Path;

/// How a command run ended, in exit-code terms.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Ok,
    /// Iterative solve stopped without meeting tolerance (exit 2).
    Nonconvergence(String),
    /// Barrier constants or the sandwich certificate failed (exit 3).
    Certification(String),
}

#[derive(Debug)]
pub struct CommandOutput {
    pub artifacts: Vec<String>,
    pub summary: serde_json::Value,
    pub outcome: Outcome,
}

fn save_field(field: &GridField, out: &Path, stem: &str, artifacts: &mut Vec<String>) -> Result<()> {
    let bin = format!("{stem}.khes");
    let csv = format!("{stem}.csv");
    field.save_binary(&out.join(&bin))?;
    field.save_csv(&out.join(&csv))?;
    artifacts.push(bin);
    artifacts.push(csv);
    Ok(())
}

fn write_json<T: serde::Serialize>(
    value: &T,
    out: &Path,
    name: &str,
    artifacts: &mut Vec<String>,
) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(out.join(name), bytes)?;
    artifacts.push(name.to_string());
    Ok(())
}

/// Strip nondeterministic timing from a report unless explicitly kept.
fn scrub_report(report: &mut SolveReport, emit_timings: bool) {
    if !emit_timings {
        report.wall_time_secs = 0.0;
    }
}

pub fn solve_dirichlet(
    cfg: &SolveDirichletConfig,
    out: &Path,
    emit_timings: bool,
) -> Result<CommandOutput> {
    let a = cfg.problem.matrix()?;
    let f = cfg.problem.f.build()?;
    let spec = cfg.domain.build(&a)?;
    let opts = cfg.newton.build();
    fs::create_dir_all(out)?;
    let mut artifacts = Vec::new();
    match continuation_solve(&spec, &f, cfg.problem.k, &a, &opts) {
        Ok((field, mut report)) => {
            scrub_report(&mut report, emit_timings);
            save_field(&field, out, "solution", &mut artifacts)?;
            write_json(&report, out, "solve_report.json", &mut artifacts)?;
            Ok(CommandOutput {
                artifacts,
                summary: serde_json::to_value(&report)?,
                outcome: Outcome::Ok,
            })
        }
        Err(Error::Nonconvergence { summary, report }) => {
            let mut report = *report;
            scrub_report(&mut report, emit_timings);
            write_json(&report, out, "solve_report.json", &mut artifacts)?;
            Ok(CommandOutput {
                artifacts,
                summary: serde_json::to_value(&report)?,
                outcome: Outcome::Nonconvergence(summary),
            })
        }
        Err(e) => Err(e),
    }
}

pub fn build_entire(
    cfg: &BuildEntireConfig,
    out: &Path,
    emit_timings: bool,
) -> Result<CommandOutput> {
    let problem = cfg.problem.build()?;
    let compact = cfg.compact_box(problem.n());
    let opts = cfg.nested_options();
    fs::create_dir_all(out)?;
    let mut run = run_nested(&problem, &cfg.s_list, &compact, &opts)?;
    let mut artifacts = Vec::new();
    for (i, stage) in run.stages.iter_mut().enumerate() {
        scrub_report(&mut stage.report, emit_timings);
        save_field(&stage.field, out, &format!("stage_{i}"), &mut artifacts)?;
    }
    write_csv_profile(&run.barriers, out, &mut artifacts)?;
    let mut summary = serde_json::to_value(run.summary())?;
    let outcome = if run.failed {
        let msg = run.failure.clone().unwrap_or_else(|| "run failed".into());
        // The library reports exactly two per-stage failure shapes: a
        // sandwich-margin breach or a stage solve error.
        if msg.contains("sandwich") {
            Outcome::Certification(msg)
        } else {
            Outcome::Nonconvergence(msg)
        }
    } else {
        let (limit, gap) = extract_limit(&run)?;
        save_field(&limit, out, "limit", &mut artifacts)?;
        summary["limit_gap"] = serde_json::to_value(gap)?;
        Outcome::Ok
    };
    write_json(&summary, out, "run_summary.json", &mut artifacts)?;
    Ok(CommandOutput {
        artifacts,
        summary,
        outcome,
    })
}

fn write_csv_profile(pair: &BarrierPair, out: &Path, artifacts: &mut Vec<String>) -> Result<()> {
    for (profile, name) in [
        (&pair.lower, "barrier_lower.csv"),
        (&pair.upper, "barrier_upper.csv"),
    ] {
        let mut buf = Vec::new();
        profile.write_csv(&mut buf)?;
        fs::write(out.join(name), buf)?;
        artifacts.push(name.to_string());
    }
    Ok(())
}

pub fn barriers(cfg: &BarriersConfig, out: &Path) -> Result<CommandOutput> {
    let a = cfg.problem.matrix()?;
    let f = cfg.problem.f.build()?;
    let env = f.tail_envelope(&a)?;
    let opts = cfg.newton.build();
    fs::create_dir_all(out)?;
    let pair = BarrierPair::build(
        &a,
        cfg.problem.k,
        &f,
        &env,
        cfg.v1_nodes,
        cfg.tau_span * env.s0(),
        &opts,
    )?;
    let mut artifacts = Vec::new();
    write_csv_profile(&pair, out, &mut artifacts)?;
    save_field(&pair.lower_interior, out, "v1", &mut artifacts)?;
    let summary = serde_json::json!({
        "s0": pair.env.s0(),
        "kappa": pair.kappa,
        "hk": pair.hk,
        "h1": pair.h1,
        "h2": pair.h2,
        "c0_bump": pair.c0_bump,
        "c1": pair.c1,
        "c2": pair.c2,
        "beta_minus": pair.beta_minus,
        "beta_plus": pair.beta_plus,
    });
    write_json(&summary, out, "constants.json", &mut artifacts)?;
    Ok(CommandOutput {
        artifacts,
        summary,
        outcome: Outcome::Ok,
    })
}

fn load_field(path: &Path) -> Result<GridField> {
    if !path.exists() {
        return Err(Error::Argument(format!(
            "input field {} does not exist",
            path.display()
        )));
    }
    GridField::load_binary(path)
}

pub fn fit_asymptotics(cfg: &FitAsymptoticsConfig, out: &Path) -> Result<CommandOutput> {
    let a = khessian::symfunc::normalize_to_ak(&cfg.diag, cfg.k)?;
    let field = load_field(&cfg.field)?;
    fs::create_dir_all(out)?;
    let fit = fit_quadratic_remainder(&field, &a, cfg.r_lo, cfg.r_hi, cfg.shells)?;
    let mut artifacts = Vec::new();
    write_json(&fit, out, "fit.json", &mut artifacts)?;
    let mut csv = String::from("shell_radius,sup,rms,count\n");
    for i in 0..fit.shell_radii.len() {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            format_sig17(fit.shell_radii[i]),
            format_sig17(fit.shell_sup[i]),
            format_sig17(fit.shell_rms[i]),
            fit.shell_counts[i]
        ));
    }
    fs::write(out.join("shells.csv"), csv)?;
    artifacts.push("shells.csv".to_string());
    Ok(CommandOutput {
        artifacts,
        summary: serde_json::to_value(&fit)?,
        outcome: Outcome::Ok,
    })
}

pub fn check_liouville(cfg: &CheckLiouvilleConfig, out: &Path) -> Result<CommandOutput> {
    let a = khessian::symfunc::normalize_to_ak(&cfg.diag, cfg.k)?;
    let field = load_field(&cfg.field)?;
    fs::create_dir_all(out)?;
    let report = hessian_decay(
        &field,
        &cfg.r_list,
        &a,
        cfg.alpha.unwrap_or(DEFAULT_ALPHA),
        cfg.exclude_radius.unwrap_or(0.0),
    )?;
    let mut artifacts = Vec::new();
    write_json(&report, out, "rescale.json", &mut artifacts)?;
    let mut csv = String::from("r,sup_dev,holder_rescaled,level_inner,level_outer\n");
    for i in 0..report.r_values.len() {
        let (li, lo) = match &report.level[i] {
            Some(l) => (format_sig17(l.inner), format_sig17(l.outer)),
            None => (String::new(), String::new()),
        };
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            format_sig17(report.r_values[i]),
            format_sig17(report.sup_dev[i]),
            format_sig17(report.holder_rescaled[i]),
            li,
            lo
        ));
    }
    fs::write(out.join("rescale.csv"), csv)?;
    artifacts.push("rescale.csv".to_string());
    Ok(CommandOutput {
        artifacts,
        summary: serde_json::to_value(&report)?,
        outcome: Outcome::Ok,
    })
}
