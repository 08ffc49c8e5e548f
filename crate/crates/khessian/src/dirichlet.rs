//! Finite-difference Dirichlet solver for `sigma_k(lambda(D^2 u)) = f`.
//!
//! Discretization: second-order central differences on the uniform grids of
//! [`crate::grid`] — the 3-point formula for `D_ii`, the 4-point cross
//! formula for `D_ij` — both exact on quadratic polynomials. The nonlinear
//! residual is written in k-th-root form `F(D^2 u) - f^(1/k)` with
//! `F = sigma_k^(1/k)`, whose linearization `F_ij = (1/k) sigma_k^(1/k-1)
//! T_(k-1)` is positive definite inside the admissibility cone; Newton steps
//! solve the resulting 2n^2+1-point sparse system.
//!
//! Robustness comes from three layers: a sigma-floor in the residual so the
//! k-th root stays defined slightly outside the cone, Armijo damping that
//! only accepts iterates with every interior node at `sigma_k >= SIGMA_MIN`,
//! and a homotopy `f_t = 1 + t (f - 1)` that walks from the exactly solvable
//! `f = 1` problem to the target (with adaptive bisection on stage failure).
//!
//! This scheme is *not* a monotone wide-stencil scheme; it relies on the
//! solutions being smooth and uniformly elliptic at desk scale. The cone
//! monitor detects (but cannot preclude) convergence to an inadmissible
//! discrete solution — failures surface as nonconvergence errors carrying
//! the full report.

use crate::error::{Error, Result};
use crate::fmodel::FModel;
use crate::grid::{GridField, GridSpec, NodeClass};
use crate::sparse::{bicgstab_ilu0, CsrMatrix, Ilu0, LINEAR_RTOL};
use crate::symfunc::{f_and_grad_floored, AkMatrix, SymMatrix, SIGMA_MIN};
use rayon::prelude::*;
use serde::Serialize;
use std::time::Instant;

/// Default nonlinear termination: residual sup-norm at or below this.
pub const TOL_NONLIN: f64 = 1e-9;
/// Newton iteration cap per solve.
pub const MAX_NEWTON_ITER: usize = 100;
/// Line-search halvings before declaring the step failed.
pub const MAX_HALVINGS: usize = 30;
/// Armijo sufficient-decrease factor on the residual 2-norm.
const ARMIJO_C: f64 = 1e-4;
/// Smallest homotopy step the continuation driver will attempt.
pub const MIN_CONTINUATION_STEP: f64 = 1.0 / 64.0;

/// Right-hand sides the solver can consume. Implementations must be cheap
/// per point and thread-safe (assembly is parallel over nodes).
pub trait SourceTerm: Sync {
    fn value(&self, x: &[f64]) -> f64;
}

impl SourceTerm for FModel {
    fn value(&self, x: &[f64]) -> f64 {
        FModel::value(self, x)
    }
}

/// Adapter for closure right-hand sides (manufactured solutions, homotopy
/// stages).
pub struct FnSource<F>(pub F);

impl<F: Fn(&[f64]) -> f64 + Sync> SourceTerm for FnSource<F> {
    fn value(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}

/// Knobs for the Newton driver. `Default` gives the production settings.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub linear_rtol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: TOL_NONLIN,
            max_iter: MAX_NEWTON_ITER,
            max_halvings: MAX_HALVINGS,
            linear_rtol: LINEAR_RTOL,
        }
    }
}

/// Outcome bookkeeping for one solve (or one continuation run).
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    /// Accepted Newton steps.
    pub iterations: usize,
    /// Residual sup-norm at the returned iterate.
    pub final_residual: f64,
    /// Accepted step scale per iteration (1 = full step).
    pub damping: Vec<f64>,
    /// Minimum `sigma_k` over interior nodes at the returned iterate.
    pub min_sigma_k: f64,
    /// Nodes where the sigma-floor engaged at the returned iterate
    /// (0 on success by construction).
    pub cone_violations: usize,
    /// Total inner linear-solver iterations.
    pub linear_iterations: usize,
    /// Homotopy values traversed (empty for a direct solve).
    pub continuation_stages: Vec<f64>,
    /// Wall-clock seconds (not deterministic; callers that need
    /// byte-stable artifacts zero this field).
    pub wall_time_secs: f64,
}

impl SolveReport {
    fn new() -> Self {
        SolveReport {
            iterations: 0,
            final_residual: f64::INFINITY,
            damping: Vec::new(),
            min_sigma_k: f64::NEG_INFINITY,
            cone_violations: 0,
            linear_iterations: 0,
            continuation_stages: Vec::new(),
            wall_time_secs: 0.0,
        }
    }
}

/// Second-order discrete Hessian at an interior node: 3-point second
/// differences on the diagonal, 4-point cross differences off it. Exact for
/// quadratic polynomials.
pub fn discrete_hessian(u: &GridField, idx: usize) -> Result<SymMatrix> {
    if u.class(idx) != NodeClass::Interior {
        return Err(Error::State(format!(
            "discrete_hessian: node {idx} is not interior (mask bug)"
        )));
    }
    Ok(hessian_unchecked(u, idx))
}

fn hessian_unchecked(u: &GridField, idx: usize) -> SymMatrix {
    let spec = u.spec();
    let n = spec.dim();
    let h = spec.spacing();
    let st = spec.stride();
    let v = u.values();
    let c = v[idx];
    let mut m = SymMatrix::identity(n);
    for i in 0..n {
        let dii = (v[idx + st[i]] - 2.0 * c + v[idx - st[i]]) / (h[i] * h[i]);
        m.set_sym(i, i, dii);
        for j in (i + 1)..n {
            let pp = v[idx + st[i] + st[j]];
            let mm = v[idx - st[i] - st[j]];
            let pm = v[idx + st[i] - st[j]];
            let mp = v[idx - st[i] + st[j]];
            let dij = (pp + mm - pm - mp) / (4.0 * h[i] * h[j]);
            m.set_sym(i, j, dij);
        }
    }
    m
}

/// Per-interior-node residual data for one iterate.
struct ResidualEval {
    /// Residual per interior node, ordered like `interior_indices()`.
    res: Vec<f64>,
    sup: f64,
    two_norm: f64,
    min_sigma: f64,
    violations: usize,
}

fn eval_residual<S: SourceTerm>(u: &GridField, source: &S, k: usize) -> Result<ResidualEval> {
    let spec = u.spec();
    let n = spec.dim();
    let kf = k as f64;
    let per_node: Vec<Result<(f64, f64, bool)>> = u
        .interior_indices()
        .par_iter()
        .map(|&idx| {
            let m = hessian_unchecked(u, idx);
            let (fval, _, violated) = f_and_grad_floored(&m, k, SIGMA_MIN);
            let mut x = vec![0.0; n];
            spec.point(idx, &mut x);
            let fv = source.value(&x);
            if !(fv > 0.0) || !fv.is_finite() {
                return Err(Error::Numeric(format!(
                    "source value {fv} at node {idx} is not positive and finite"
                )));
            }
            // Recover sigma_k from F = sigma_k^(1/k) for the cone monitor;
            // when the floor engaged, report the true (sub-floor) value.
            let sigma = if violated {
                crate::symfunc::sigma_k_trace_route(&m, k)
            } else {
                fval.powf(kf)
            };
            Ok((fval - fv.powf(1.0 / kf), sigma, violated))
        })
        .collect();
    let mut res = Vec::with_capacity(per_node.len());
    let mut sup: f64 = 0.0;
    let mut two = 0.0;
    let mut min_sigma = f64::INFINITY;
    let mut violations = 0;
    for item in per_node {
        let (r, sigma, violated) = item?;
        sup = sup.max(r.abs());
        two += r * r;
        if violated {
            violations += 1;
        }
        min_sigma = min_sigma.min(sigma);
        res.push(r);
    }
    if res.is_empty() {
        return Err(Error::Argument("grid has no interior nodes".into()));
    }
    Ok(ResidualEval {
        res,
        sup,
        two_norm: two.sqrt(),
        min_sigma,
        violations,
    })
}

/// Pointwise residual field `F(D^2 u) - f^(1/k)` (zero outside the
/// interior). Cone violations do not error here: the sigma-floored value is
/// reported and the violation count can be read off a solve report.
pub fn residual<S: SourceTerm>(u: &GridField, source: &S, k: usize) -> Result<GridField> {
    let eval = eval_residual(u, source, k)?;
    let mut values = vec![0.0; u.spec().total_nodes()];
    for (&idx, &r) in u.interior_indices().iter().zip(&eval.res) {
        values[idx] = r;
    }
    GridField::raw(u.spec(), values)
}

/// Assemble the Newton matrix: row per interior node, columns over interior
/// stencil neighbors, entries `sum_ij F_ij * d(D_ij)/d(u_neighbor)`.
fn assemble_jacobian(u: &GridField, k: usize, interior_pos: &[usize]) -> Result<CsrMatrix> {
    let spec = u.spec();
    let n = spec.dim();
    let h = spec.spacing();
    let st = spec.stride();
    let rows: Vec<Vec<(usize, f64)>> = u
        .interior_indices()
        .par_iter()
        .map(|&idx| {
            let m = hessian_unchecked(u, idx);
            let (_, grad, _) = f_and_grad_floored(&m, k, SIGMA_MIN);
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(2 * n * n + 1);
            let mut center = 0.0;
            for i in 0..n {
                let gii = grad.get(i, i);
                let wii = 1.0 / (h[i] * h[i]);
                center -= 2.0 * gii * wii;
                for nb in [idx + st[i], idx - st[i]] {
                    let p = interior_pos[nb];
                    if p != usize::MAX {
                        row.push((p, gii * wii));
                    }
                }
                for j in (i + 1)..n {
                    // F_ij and F_ji both multiply the same cross stencil.
                    let gij = grad.get(i, j);
                    let w = gij / (2.0 * h[i] * h[j]);
                    for (dst, sgn) in [
                        (idx + st[i] + st[j], 1.0),
                        (idx - st[i] - st[j], 1.0),
                        (idx + st[i] - st[j], -1.0),
                        (idx - st[i] + st[j], -1.0),
                    ] {
                        let p = interior_pos[dst];
                        if p != usize::MAX {
                            row.push((p, sgn * w));
                        }
                    }
                }
            }
            let self_pos = interior_pos[idx];
            debug_assert_ne!(self_pos, usize::MAX);
            row.push((self_pos, center));
            row
        })
        .collect();
    CsrMatrix::from_rows(rows.len(), rows)
}

fn interior_position_map(u: &GridField) -> Vec<usize> {
    let mut pos = vec![usize::MAX; u.spec().total_nodes()];
    for (local, &g) in u.interior_indices().iter().enumerate() {
        pos[g] = local;
    }
    pos
}

/// Damped Newton iteration from the iterate `u0` (boundary data fixed at
/// construction of `u0`). Steps are accepted only when the residual 2-norm
/// satisfies the Armijo decrease and every interior node keeps
/// `sigma_k >= SIGMA_MIN`; on exhaustion of the damping budget the error
/// carries the partial report.
pub fn newton_solve_source<S: SourceTerm>(
    u0: &GridField,
    source: &S,
    k: usize,
    opts: &NewtonOptions,
) -> Result<(GridField, SolveReport)> {
    let start = Instant::now();
    let mut u = u0.clone();
    let mut report = SolveReport::new();
    let interior_pos = interior_position_map(&u);
    let n_unknowns = u.interior_indices().len();

    let mut eval = eval_residual(&u, source, k)?;
    for _ in 0..opts.max_iter {
        if eval.sup <= opts.tol {
            report.final_residual = eval.sup;
            report.min_sigma_k = eval.min_sigma;
            report.cone_violations = eval.violations;
            report.wall_time_secs = start.elapsed().as_secs_f64();
            return Ok((u, report));
        }
        let jac = assemble_jacobian(&u, k, &interior_pos)?;
        let pre = Ilu0::factor(&jac)?;
        let rhs: Vec<f64> = eval.res.iter().map(|r| -r).collect();
        let mut delta = vec![0.0; n_unknowns];
        let lin_iters = bicgstab_ilu0(&jac, &pre, &rhs, &mut delta, opts.linear_rtol)
            .map_err(|e| nonconvergence(&report, &eval, format!("linear solve failed: {e}")))?;
        report.linear_iterations += lin_iters;

        // Backtracking line search with cone guard.
        let base: Vec<f64> = u.interior_indices().iter().map(|&i| u.value(i)).collect();
        let mut scale = 1.0f64;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = base
                .iter()
                .zip(&delta)
                .map(|(b, d)| b + scale * d)
                .collect();
            let mut cand = u.clone();
            if cand.set_interior_slice(&trial).is_err() {
                scale *= 0.5;
                continue;
            }
            match eval_residual(&cand, source, k) {
                Ok(ev)
                    if ev.violations == 0
                        && ev.two_norm <= (1.0 - ARMIJO_C * scale) * eval.two_norm =>
                {
                    u = cand;
                    eval = ev;
                    report.iterations += 1;
                    report.damping.push(scale);
                    accepted = true;
                    break;
                }
                _ => scale *= 0.5,
            }
        }
        if !accepted {
            return Err(nonconvergence(
                &report,
                &eval,
                format!(
                    "damping exhausted after {} halvings at iteration {} (residual sup {:.3e})",
                    opts.max_halvings,
                    report.iterations + 1,
                    eval.sup
                ),
            ));
        }
    }
    if eval.sup <= opts.tol {
        report.final_residual = eval.sup;
        report.min_sigma_k = eval.min_sigma;
        report.cone_violations = eval.violations;
        report.wall_time_secs = start.elapsed().as_secs_f64();
        return Ok((u, report));
    }
    Err(nonconvergence(
        &report,
        &eval,
        format!(
            "no convergence in {} iterations (residual sup {:.3e})",
            opts.max_iter, eval.sup
        ),
    ))
}

fn nonconvergence(report: &SolveReport, eval: &ResidualEval, summary: String) -> Error {
    let mut r = report.clone();
    r.final_residual = eval.sup;
    r.min_sigma_k = eval.min_sigma;
    r.cone_violations = eval.violations;
    Error::Nonconvergence {
        summary,
        report: Box::new(r),
    }
}

/// Newton solve against a model right-hand side with default options.
pub fn newton_solve(
    u0: &GridField,
    f: &FModel,
    k: usize,
    tol_nonlin: f64,
) -> Result<(GridField, SolveReport)> {
    let opts = NewtonOptions {
        tol: tol_nonlin,
        ..NewtonOptions::default()
    };
    newton_solve_source(u0, f, k, &opts)
}

/// Homotopy driver: solve `sigma_k = 1` exactly from the generating
/// quadratic, then march `f_t = 1 + t (f - 1)` through t = 0.25, 0.5, 0.75,
/// 1 with adaptive bisection (minimum step 1/64), warm-starting each stage.
pub fn continuation_solve(
    spec: &GridSpec,
    f: &FModel,
    k: usize,
    a: &AkMatrix,
    opts: &NewtonOptions,
) -> Result<(GridField, SolveReport)> {
    if !(f.inf_bound() > 0.0) {
        return Err(Error::Argument(format!(
            "continuation: certified inf f = {:.3e} must be positive",
            f.inf_bound()
        )));
    }
    if let Some(d) = f.dim_hint() {
        if d != spec.dim() {
            return Err(Error::Argument(format!(
                "continuation: source dimension {d} != grid dimension {}",
                spec.dim()
            )));
        }
    }
    continuation_solve_source(spec, f, k, a, opts)
}

/// Generic-source continuation (same homotopy as [`continuation_solve`]).
/// The caller vouches that `source` is positive; per-node positivity is
/// still enforced during assembly.
pub fn continuation_solve_source<S: SourceTerm>(
    spec: &GridSpec,
    f: &S,
    k: usize,
    a: &AkMatrix,
    opts: &NewtonOptions,
) -> Result<(GridField, SolveReport)> {
    let start = Instant::now();
    if a.dim() != spec.dim() {
        return Err(Error::Argument(format!(
            "continuation: matrix dimension {} != grid dimension {}",
            a.dim(),
            spec.dim()
        )));
    }
    if a.k() != k {
        return Err(Error::Argument(format!(
            "continuation: matrix normalized for k = {}, solve requested k = {k}",
            a.k()
        )));
    }

    // Stage t = 0: the generating quadratic solves sigma_k = 1 exactly (its
    // discrete Hessian is A at every node).
    let u0 = GridField::from_fn(spec, |x| a.quadratic(x))?;
    let mut total = SolveReport::new();
    let merge = |total: &mut SolveReport, stage: &SolveReport| {
        total.iterations += stage.iterations;
        total.damping.extend_from_slice(&stage.damping);
        total.linear_iterations += stage.linear_iterations;
        total.final_residual = stage.final_residual;
        total.min_sigma_k = stage.min_sigma_k;
        total.cone_violations = stage.cone_violations;
    };

    let one = FnSource(|_: &[f64]| 1.0);
    let (mut u, stage0) = newton_solve_source(&u0, &one, k, opts)
        .map_err(|e| annotate_stage(e, 0.0))?;
    merge(&mut total, &stage0);
    total.continuation_stages.push(0.0);

    // Early exit when the full problem is already solved (f = 1 case).
    let full = eval_residual(&u, f, k)?;
    if full.sup <= opts.tol {
        total.final_residual = full.sup;
        total.min_sigma_k = full.min_sigma;
        total.cone_violations = full.violations;
        total.wall_time_secs = start.elapsed().as_secs_f64();
        return Ok((u, total));
    }

    let mut t_cur = 0.0f64;
    let mut targets = vec![1.0, 0.75, 0.5, 0.25]; // stack: pop smallest next
    while let Some(&t_next) = targets.last() {
        let ft = FnSource(move |x: &[f64]| 1.0 + t_next * (f.value(x) - 1.0));
        match newton_solve_source(&u, &ft, k, opts) {
            Ok((u_next, stage)) => {
                targets.pop();
                u = u_next;
                t_cur = t_next;
                merge(&mut total, &stage);
                total.continuation_stages.push(t_next);
            }
            Err(Error::Nonconvergence { summary, report }) => {
                // Keep the failed attempt's iteration and damping history so
                // the stall report reflects all work done, not just the
                // accepted stages.
                merge(&mut total, &report);
                let mid = 0.5 * (t_cur + t_next);
                if t_next - t_cur <= MIN_CONTINUATION_STEP || mid <= t_cur {
                    total.wall_time_secs = start.elapsed().as_secs_f64();
                    return Err(Error::Nonconvergence {
                        summary: format!(
                            "continuation stalled between t = {t_cur} and t = {t_next} \
                             (minimum step {MIN_CONTINUATION_STEP}): {summary}"
                        ),
                        report: Box::new(total),
                    });
                }
                targets.push(mid);
            }
            Err(other) => return Err(other),
        }
    }
    total.wall_time_secs = start.elapsed().as_secs_f64();
    Ok((u, total))
}

fn annotate_stage(e: Error, t: f64) -> Error {
    match e {
        Error::Nonconvergence { summary, report } => Error::Nonconvergence {
            summary: format!("homotopy stage t = {t}: {summary}"),
            report,
        },
        other => other,
    }
}

/// Minimum of `u - v` over interior nodes (discrete comparison monitor).
pub fn comparison_check(u: &GridField, v: &GridField) -> Result<f64> {
    if u.spec() != v.spec() {
        return Err(Error::Argument("comparison_check: grid specs differ".into()));
    }
    Ok(u.interior_indices()
        .iter()
        .map(|&i| u.value(i) - v.value(i))
        .fold(f64::INFINITY, f64::min))
}
