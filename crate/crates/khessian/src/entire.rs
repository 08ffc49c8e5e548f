//! Nested-domain limit construction: solve the Dirichlet problem on an
//! increasing family of ellipsoidal sublevel domains `D_s = {x' A x / 2 < s}`
//! with boundary data `s`, certify every stage against the radial barrier
//! sandwich, and extract the limiting entire solution on a fixed compact box.
//!
//! The chain of evidence per stage `s`:
//!
//! 1. `continuation_solve` produces `u_s` with `sigma_k(D^2 u_s) = f` on
//!    `D_s`, `u_s = s` on the boundary ring;
//! 2. [`sandwich_check`] verifies `ulow + beta_minus <= u_s <= ubar +
//!    beta_plus` at every interior node within the discretization slack
//!    `5 h^2` (the barriers and shifts are s-independent, which is what
//!    makes the family uniformly bounded);
//! 3. consecutive stages are compared on the compact `K` by cubic
//!    interpolation; the decreasing sup-differences are the numerical
//!    surrogate for local convergence of the family.
//!
//! [`extract_limit`] returns the finest-stage restriction to `K` together
//! with the last consecutive difference (the "Cauchy gap").

use crate::barriers::{BarrierPair, DEFAULT_PROFILE_SPAN};
use crate::dirichlet::{
    continuation_solve, newton_solve_source, NewtonOptions, SolveReport,
};
use crate::error::{Error, Result};
use crate::fmodel::FModel;
use crate::grid::{DomainKind, GridField, GridSpec};
use crate::symfunc::AkMatrix;
use rayon::prelude::*;

/// Discretization slack multiplier: sandwich margins and comparison checks
/// are enforced up to `SANDWICH_SLACK * h_max^2`.
pub const SANDWICH_SLACK: f64 = 5.0;

// ---------------------------------------------------------------------------
// Problem description
// ---------------------------------------------------------------------------

/// A complete problem instance: dimension and order, the normalized
/// quadratic coefficient matrix, the right-hand side, and its certified
/// tail envelope.
#[derive(Debug, Clone)]
pub struct HessianProblem {
    a: AkMatrix,
    f: FModel,
    env: crate::barriers::TailEnvelope,
}

impl HessianProblem {
    /// Validates `n >= 3`, `1 <= k <= n`, positive certified infimum of
    /// `f`, and derives the tail envelope.
    pub fn new(a: AkMatrix, f: FModel) -> Result<Self> {
        let n = a.dim();
        if n < 3 {
            return Err(Error::Argument(format!(
                "problem: dimension n = {n} must be >= 3"
            )));
        }
        if a.k() < 1 || a.k() > n {
            return Err(Error::Argument(format!(
                "problem: order k = {} outside 1..={n}",
                a.k()
            )));
        }
        if !(f.inf_bound() > 0.0) {
            return Err(Error::Argument(format!(
                "problem: certified inf f = {:.3e} must be positive",
                f.inf_bound()
            )));
        }
        if let Some(d) = f.dim_hint() {
            if d != n {
                return Err(Error::Argument(format!(
                    "problem: f has dimension {d}, matrix has {n}"
                )));
            }
        }
        let env = f.tail_envelope(&a)?;
        Ok(HessianProblem { a, f, env })
    }

    pub fn n(&self) -> usize {
        self.a.dim()
    }

    pub fn k(&self) -> usize {
        self.a.k()
    }

    pub fn matrix(&self) -> &AkMatrix {
        &self.a
    }

    pub fn source(&self) -> &FModel {
        &self.f
    }

    pub fn envelope(&self) -> &crate::barriers::TailEnvelope {
        &self.env
    }
}

/// The fixed compact box on which stages are compared and the limit is
/// extracted.
#[derive(Debug, Clone)]
pub struct CompactBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub nodes: Vec<usize>,
}

impl CompactBox {
    /// Symmetric cube `[-r, r]^n` with `m` nodes per axis.
    pub fn cube(n: usize, r: f64, m: usize) -> Self {
        CompactBox {
            lo: vec![-r; n],
            hi: vec![r; n],
            nodes: vec![m; n],
        }
    }

    fn spec(&self) -> Result<GridSpec> {
        GridSpec::box_domain(&self.lo, &self.hi, &self.nodes)
    }

    /// Largest value of `x' A x / 2` over the box (attained at a corner,
    /// by convexity).
    fn max_level(&self, a: &AkMatrix) -> f64 {
        let n = self.lo.len();
        let mut worst = 0.0f64;
        for mask in 0..(1usize << n) {
            let corner: Vec<f64> = (0..n)
                .map(|i| if mask >> i & 1 == 1 { self.hi[i] } else { self.lo[i] })
                .collect();
            worst = worst.max(a.quadratic(&corner));
        }
        worst
    }
}

// ---------------------------------------------------------------------------
// Run records
// ---------------------------------------------------------------------------

/// One completed stage of the nested family.
#[derive(Debug)]
pub struct StageResult {
    /// Domain level `s`.
    pub s: f64,
    /// Solution on `D_s` (exterior nodes clamped to `s`).
    pub field: GridField,
    /// Worst signed sandwich margin over interior nodes.
    pub margin: f64,
    /// `sup |u_s - x' A x / 2|` over interior nodes.
    pub quad_gap: f64,
    /// Largest grid spacing of this stage.
    pub h_max: f64,
    /// Solver diagnostics.
    pub report: SolveReport,
}

/// Full record of a nested run.
#[derive(Debug)]
pub struct EntireRun {
    pub problem: HessianProblem,
    pub barriers: BarrierPair,
    pub stages: Vec<StageResult>,
    /// Sampling grid of the compact box `K`.
    pub compact: GridSpec,
    /// Per-stage restriction (cubic interpolation) onto `K`.
    pub compact_fields: Vec<GridField>,
    /// `sup_K |u_(s_(i+1)) - u_(s_i)|` for consecutive completed stages.
    pub sup_diffs: Vec<f64>,
    /// Set when any stage failed to converge or broke the sandwich.
    pub failed: bool,
    pub failure: Option<String>,
}

/// Serializable run summary for manifests.
#[derive(Debug, serde::Serialize)]
pub struct RunSummary {
    pub n: usize,
    pub k: usize,
    pub s_values: Vec<f64>,
    pub margins: Vec<f64>,
    pub quad_gaps: Vec<f64>,
    pub sup_diffs: Vec<f64>,
    pub beta_minus: f64,
    pub beta_plus: f64,
    pub failed: bool,
    pub failure: Option<String>,
}

impl EntireRun {
    pub fn summary(&self) -> RunSummary {
        RunSummary {
            n: self.problem.n(),
            k: self.problem.k(),
            s_values: self.stages.iter().map(|st| st.s).collect(),
            margins: self.stages.iter().map(|st| st.margin).collect(),
            quad_gaps: self.stages.iter().map(|st| st.quad_gap).collect(),
            sup_diffs: self.sup_diffs.clone(),
            beta_minus: self.barriers.beta_minus,
            beta_plus: self.barriers.beta_plus,
            failed: self.failed,
            failure: self.failure.clone(),
        }
    }
}

/// Options for [`run_nested`].
#[derive(Debug, Clone)]
pub struct NestedOptions {
    /// Nodes per axis on the first stage. Later stages keep the first
    /// stage's node spacing — their counts grow like sqrt(s/s_first),
    /// rounded up to an odd count — so that the discretization error on
    /// the compact is stage-independent and consecutive differences
    /// measure domain growth, not grid coarsening.
    pub nodes_per_axis: usize,
    /// Nodes per axis for the interior barrier solve.
    pub barrier_nodes: usize,
    /// Warm-start each stage from the interpolated previous stage
    /// (sequential); `false` solves stages independently in parallel.
    pub warm_start: bool,
    pub newton: NewtonOptions,
}

impl Default for NestedOptions {
    fn default() -> Self {
        NestedOptions {
            nodes_per_axis: 17,
            barrier_nodes: 17,
            warm_start: true,
            newton: NewtonOptions::default(),
        }
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Worst signed sandwich margin of a solved stage against the barrier pair:
/// `min over interior nodes of min(u - ulow - beta_minus,
/// ubar + beta_plus - u)`. The stage passes iff the value is
/// `>= -SANDWICH_SLACK * h_max^2`.
pub fn sandwich_check(u_s: &GridField, pair: &BarrierPair) -> Result<f64> {
    match u_s.spec().kind() {
        DomainKind::Ellipsoid { a, .. } => {
            if *a != pair.a {
                return Err(Error::Argument(
                    "sandwich: field and barriers use different matrices".into(),
                ));
            }
        }
        DomainKind::Box { .. } => {
            return Err(Error::Argument(
                "sandwich: expected an ellipsoid-domain field".into(),
            ));
        }
    }
    let n = u_s.spec().dim();
    let mut x = vec![0.0; n];
    let mut worst = f64::INFINITY;
    for &idx in u_s.interior_indices() {
        u_s.spec().point(idx, &mut x);
        let u = u_s.value(idx);
        let lo = pair.lower_value(&x)? + pair.beta_minus;
        let hi = pair.upper_value(&x)? + pair.beta_plus;
        worst = worst.min((u - lo).min(hi - u));
    }
    Ok(worst)
}

fn restrict_to_compact(field: &GridField, kspec: &GridSpec) -> Result<GridField> {
    let n = kspec.dim();
    let mut x = vec![0.0; n];
    let mut values = Vec::with_capacity(kspec.total_nodes());
    for idx in 0..kspec.total_nodes() {
        kspec.point(idx, &mut x);
        values.push(field.interpolate(&x)?);
    }
    GridField::raw(kspec, values)
}

/// Node count that preserves the first stage's spacing on the level-`s`
/// domain (hull radius grows like sqrt(s)); rounded up to an odd count so
/// every stage keeps a center node.
fn stage_nodes(base_nodes: usize, s_base: f64, s: f64) -> usize {
    let cells = (base_nodes - 1) as f64 * (s / s_base).sqrt();
    let mut c = (cells - 1e-9).ceil() as usize;
    if c % 2 == 1 {
        c += 1;
    }
    c + 1
}

fn solve_stage(
    problem: &HessianProblem,
    s: f64,
    nodes: usize,
    prev: Option<&GridField>,
    opts: &NestedOptions,
) -> Result<(GridField, SolveReport)> {
    let spec = GridSpec::ellipsoid(problem.matrix(), s, nodes)?;
    if let Some(prev_field) = prev {
        // Warm start: blend the interpolated previous stage into the
        // generating quadratic with a smoothstep in tau, so the initial
        // iterate is smooth and cone-admissible near the seam.
        let a = problem.matrix().clone();
        let s_prev = match prev_field.spec().kind() {
            DomainKind::Ellipsoid { s, .. } => *s,
            DomainKind::Box { .. } => unreachable!("stages are ellipsoid solves"),
        };
        let inner = 0.6 * s_prev;
        let outer = 0.85 * s_prev;
        let u0 = GridField::from_fn(&spec, |x| {
            let tau = a.quadratic(x);
            let q = tau;
            if tau >= outer {
                return q;
            }
            let v = prev_field.interpolate(x).unwrap_or(q);
            if tau <= inner {
                v
            } else {
                let t = (outer - tau) / (outer - inner);
                let w = t * t * (3.0 - 2.0 * t);
                q + w * (v - q)
            }
        })?;
        match newton_solve_source(&u0, problem.source(), problem.k(), &opts.newton) {
            Ok(done) => return Ok(done),
            Err(Error::Nonconvergence { .. }) => {
                // Fall through to the cold continuation path.
            }
            Err(e) => return Err(e),
        }
    }
    continuation_solve(&spec, problem.source(), problem.k(), problem.matrix(), &opts.newton)
}

/// Solve the nested family `D_(s_1) subset D_(s_2) subset ...`, check every
/// stage against the barrier sandwich, and record consecutive differences
/// on the compact `K`.
///
/// Hard errors (geometry, barrier construction) abort; per-stage solver
/// failures or sandwich violations mark the run failed and stop further
/// stages, returning the partial record.
pub fn run_nested(
    problem: &HessianProblem,
    s_list: &[f64],
    compact: &CompactBox,
    opts: &NestedOptions,
) -> Result<EntireRun> {
    if s_list.len() < 3 {
        return Err(Error::Argument(format!(
            "nested run: need at least 3 domain levels, got {}",
            s_list.len()
        )));
    }
    if s_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("nested run: s values must strictly increase".into()));
    }
    let s0 = problem.envelope().s0();
    if s_list[0] < s0 {
        return Err(Error::Argument(format!(
            "nested run: first level {} below envelope start s0 = {s0}",
            s_list[0]
        )));
    }
    if compact.lo.len() != problem.n() {
        return Err(Error::Argument(format!(
            "nested run: compact box dimension {} != n = {}",
            compact.lo.len(),
            problem.n()
        )));
    }
    // Containment margin: the compact must sit strictly inside the
    // smallest domain, with one unit of level headroom so that boundary
    // clamping and interpolation stencils never touch it.
    let tau_k = compact.max_level(problem.matrix());
    let margin = (0.1 * s_list[0]).max(1.0);
    if tau_k > s_list[0] - margin {
        return Err(Error::Argument(format!(
            "nested run: compact box reaches level {tau_k:.3}, but the smallest \
             domain s = {} requires level <= {:.3} (margin {margin:.3})",
            s_list[0],
            s_list[0] - margin
        )));
    }

    let s_max = *s_list.last().unwrap();
    let tau_max = (DEFAULT_PROFILE_SPAN * s0).max(4.0 * s_max);
    let barriers = BarrierPair::build(
        problem.matrix(),
        problem.k(),
        problem.source(),
        problem.envelope(),
        opts.barrier_nodes,
        tau_max,
        &opts.newton,
    )?;

    let kspec = compact.spec()?;
    let mut run = EntireRun {
        problem: problem.clone(),
        barriers,
        stages: Vec::new(),
        compact: kspec.clone(),
        compact_fields: Vec::new(),
        sup_diffs: Vec::new(),
        failed: false,
        failure: None,
    };

    // Solve all stages. Warm mode is sequential by construction; cold mode
    // solves the independent stages in parallel.
    let mut solved: Vec<(f64, Result<(GridField, SolveReport)>)> = Vec::new();
    if opts.warm_start {
        let mut prev: Option<GridField> = None;
        for &s in s_list {
            let nodes = stage_nodes(opts.nodes_per_axis, s_list[0], s);
            let res = solve_stage(problem, s, nodes, prev.as_ref(), opts);
            if let Ok((field, _)) = &res {
                prev = Some(field.clone());
            }
            let stop = res.is_err();
            solved.push((s, res));
            if stop {
                break;
            }
        }
    } else {
        solved = s_list
            .par_iter()
            .map(|&s| {
                let nodes = stage_nodes(opts.nodes_per_axis, s_list[0], s);
                (s, solve_stage(problem, s, nodes, None, opts))
            })
            .collect();
    }

    for (s, res) in solved {
        match res {
            Ok((field, report)) => {
                let h_max = field.spec().h_max();
                let margin = sandwich_check(&field, &run.barriers)?;
                let a = problem.matrix().clone();
                let quad_gap = field.sup_error(|x| a.quadratic(x), None);
                let restricted = restrict_to_compact(&field, &kspec)?;
                if let Some(prev) = run.compact_fields.last() {
                    run.sup_diffs.push(prev.sup_diff(&restricted)?);
                }
                let ok = margin >= -SANDWICH_SLACK * h_max * h_max;
                run.stages.push(StageResult {
                    s,
                    field,
                    margin,
                    quad_gap,
                    h_max,
                    report,
                });
                run.compact_fields.push(restricted);
                if !ok {
                    run.failed = true;
                    run.failure = Some(format!(
                        "sandwich margin {margin:.3e} below slack at s = {s}"
                    ));
                    break;
                }
            }
            Err(e) => {
                run.failed = true;
                run.failure = Some(format!("stage s = {s} failed: {e}"));
                break;
            }
        }
    }
    if run.stages.is_empty() && !run.failed {
        run.failed = true;
        run.failure = Some("no stages completed".into());
    }
    Ok(run)
}

/// Extract the limiting field on the compact: the finest-stage restriction
/// plus the last consecutive sup-difference as the Cauchy gap.
///
/// Also enforces the uniform bound that makes the limit meaningful: the
/// finest stage must satisfy `sup |u_s - x' A x / 2| <=
/// max(|beta_minus|, |beta_plus|) + slack`, the numeric counterpart of the
/// barrier-derived uniform estimate.
pub fn extract_limit(run: &EntireRun) -> Result<(GridField, f64)> {
    let done = run.stages.len().min(run.compact_fields.len());
    if done < 2 {
        return Err(Error::State(format!(
            "extract_limit: need >= 2 completed stages, have {done}"
        )));
    }
    let last = &run.stages[done - 1];
    let bound = run.barriers.beta_minus.abs().max(run.barriers.beta_plus.abs())
        + SANDWICH_SLACK * last.h_max * last.h_max;
    if last.quad_gap > bound {
        return Err(Error::State(format!(
            "extract_limit: quadratic gap {:.3e} exceeds the barrier bound {:.3e}",
            last.quad_gap, bound
        )));
    }
    let gap = *run.sup_diffs.last().ok_or_else(|| {
        Error::State("extract_limit: no consecutive differences recorded".into())
    })?;
    Ok((run.compact_fields[done - 1].clone(), gap))
}
