//! Typed run configurations.
//!
//! Configs are JSON files parsed with `deny_unknown_fields` everywhere, so
//! misspelled keys are rejected with line/column diagnostics instead of
//! being silently ignored. The DTO layer here is deliberately separate from
//! the library types: every field goes through the library's validating
//! constructors in `build_*`, which own the real invariants.

use khessian::dirichlet::NewtonOptions;
use khessian::entire::{CompactBox, HessianProblem, NestedOptions};
use khessian::fmodel::FModel;
use khessian::grid::GridSpec;
use khessian::symfunc::{normalize_to_ak, AkMatrix};
use khessian::{Error, Result};
use serde::Deserialize;
use std::path::PathBuf;

/// Right-hand-side description. Mirrors the library's model variants;
/// validation happens in the library constructors.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FConfig {
    Constant,
    PowerTail { c0: f64, beta: f64, sign: f64 },
    Bump { center: Vec<f64>, radius: f64, amplitude: f64 },
    Sum { terms: Vec<FConfig> },
}

impl FConfig {
    pub fn build(&self) -> Result<FModel> {
        match self {
            FConfig::Constant => Ok(FModel::constant()),
            FConfig::PowerTail { c0, beta, sign } => FModel::power_tail(*c0, *beta, *sign),
            FConfig::Bump {
                center,
                radius,
                amplitude,
            } => FModel::bump(center.clone(), *radius, *amplitude),
            FConfig::Sum { terms } => {
                let built: Result<Vec<FModel>> = terms.iter().map(|t| t.build()).collect();
                FModel::sum(built?)
            }
        }
    }
}

/// Quadratic leading term plus operator order. The diagonal is normalized
/// onto the constraint surface here, so configs may state any positive
/// diagonal shape.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub diag: Vec<f64>,
    pub k: usize,
    pub f: FConfig,
}

impl ProblemConfig {
    pub fn matrix(&self) -> Result<AkMatrix> {
        normalize_to_ak(&self.diag, self.k)
    }

    pub fn build(&self) -> Result<HessianProblem> {
        HessianProblem::new(self.matrix()?, self.f.build()?)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    /// Sublevel set of the generating quadratic at level `s`.
    Ellipsoid { s: f64, nodes: usize },
    /// Axis-aligned box with per-axis node counts.
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
        nodes: Vec<usize>,
    },
}

impl DomainConfig {
    pub fn build(&self, a: &AkMatrix) -> Result<GridSpec> {
        match self {
            DomainConfig::Ellipsoid { s, nodes } => GridSpec::ellipsoid(a, *s, *nodes),
            DomainConfig::Box { lo, hi, nodes } => GridSpec::box_domain(lo, hi, nodes),
        }
    }
}

/// Newton-driver overrides; omitted fields keep the library defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonConfig {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub max_halvings: Option<usize>,
    pub linear_rtol: Option<f64>,
}

impl NewtonConfig {
    pub fn build(&self) -> NewtonOptions {
        let mut opts = NewtonOptions::default();
        if let Some(v) = self.tol {
            opts.tol = v;
        }
        if let Some(v) = self.max_iter {
            opts.max_iter = v;
        }
        if let Some(v) = self.max_halvings {
            opts.max_halvings = v;
        }
        if let Some(v) = self.linear_rtol {
            opts.linear_rtol = v;
        }
        opts
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveDirichletConfig {
    pub problem: ProblemConfig,
    pub domain: DomainConfig,
    #[serde(default)]
    pub newton: NewtonConfig,
}

/// Compact comparison cube `[-radius, radius]^n`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompactConfig {
    pub radius: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildEntireConfig {
    pub problem: ProblemConfig,
    pub s_list: Vec<f64>,
    pub compact: CompactConfig,
    #[serde(default = "default_stage_nodes")]
    pub nodes_per_axis: usize,
    #[serde(default = "default_barrier_nodes")]
    pub barrier_nodes: usize,
    #[serde(default = "default_true")]
    pub warm_start: bool,
    #[serde(default)]
    pub newton: NewtonConfig,
}

fn default_stage_nodes() -> usize {
    33
}

fn default_barrier_nodes() -> usize {
    17
}

fn default_true() -> bool {
    true
}

impl BuildEntireConfig {
    pub fn compact_box(&self, n: usize) -> CompactBox {
        CompactBox::cube(n, self.compact.radius, self.compact.nodes)
    }

    pub fn nested_options(&self) -> NestedOptions {
        NestedOptions {
            nodes_per_axis: self.nodes_per_axis,
            barrier_nodes: self.barrier_nodes,
            warm_start: self.warm_start,
            newton: self.newton.build(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitAsymptoticsConfig {
    /// Path to a saved field (binary format).
    pub field: PathBuf,
    pub diag: Vec<f64>,
    pub k: usize,
    pub r_lo: f64,
    pub r_hi: f64,
    pub shells: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckLiouvilleConfig {
    /// Path to a saved field (binary format).
    pub field: PathBuf,
    pub diag: Vec<f64>,
    pub k: usize,
    pub r_list: Vec<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub exclude_radius: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarriersConfig {
    pub problem: ProblemConfig,
    #[serde(default = "default_barrier_nodes")]
    pub v1_nodes: usize,
    /// Tabulated profile span as a multiple of the envelope start level.
    #[serde(default = "default_tau_span")]
    pub tau_span: f64,
    #[serde(default)]
    pub newton: NewtonConfig,
}

fn default_tau_span() -> f64 {
    khessian::barriers::DEFAULT_PROFILE_SPAN
}

/// Parse a JSON config string into the typed config, keeping serde's
/// line/column diagnostics on failure.
pub fn parse<T: for<'de> Deserialize<'de>>(text: &str, path: &std::path::Path) -> Result<T> {
    serde_json::from_str(text)
        .map_err(|e| Error::Argument(format!("config {}: {e}", path.display())))
}
