//! Uniform tensor grids, node classification, and field I/O.
//!
//! Two domain kinds are supported:
//!
//! * **Boxes** `[lo_1, hi_1] x ... x [lo_n, hi_n]` with exact nodal boundary
//!   data (used for order-verification problems);
//! * **Ellipsoidal sublevel sets** `D_s = { x : x' A x / 2 < s }` embedded in
//!   their bounding box with two cells of padding. Every node at or outside
//!   the level set carries the level-function value `tau(x) = x' A x / 2`
//!   (equal to `s` exactly on the surface), which extends the constant
//!   Dirichlet data `u = s` to second order across the staircase boundary:
//!   the stencil of a boundary-adjacent interior node sees values agreeing
//!   with the solution's own continuation up to the tail defect times `h`.
//!
//! Fields serialize to a little-endian binary format (magic `KHES`) that
//! round-trips bit-exactly, and export to CSV with 17 significant digits.

use crate::error::{Error, Result};
use crate::symfunc::AkMatrix;
use std::io::Write;
use std::path::Path;

/// Minimum nodes per axis. The cross stencil spans two cells and ellipsoid
/// hulls reserve two padding cells per side, so anything smaller has no room
/// for an interior.
pub const MIN_NODES_PER_AXIS: usize = 17;

/// Maximum supported spatial dimension for grids (cost grows like m^n).
pub const MAX_GRID_DIM: usize = 4;

const MAGIC: &[u8; 4] = b"KHES";
const FORMAT_VERSION: u32 = 1;

/// Node classification. `Boundary` nodes carry Dirichlet data; `Exterior`
/// nodes exist only on ellipsoid grids (hull nodes beyond the boundary
/// layer) and carry the same clamped value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    Boundary,
    Exterior,
}

impl NodeClass {
    fn to_u8(self) -> u8 {
        match self {
            NodeClass::Interior => 0,
            NodeClass::Boundary => 1,
            NodeClass::Exterior => 2,
        }
    }

    fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(NodeClass::Interior),
            1 => Ok(NodeClass::Boundary),
            2 => Ok(NodeClass::Exterior),
            _ => Err(Error::Io(format!("invalid node class tag {v}"))),
        }
    }
}

/// Domain geometry.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    /// Axis-aligned box with the given corners.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// `D_s = { x' A x / 2 < s }` for diagonal `A` in the normalized cone.
    Ellipsoid { a: AkMatrix, s: f64 },
}

/// Grid geometry: domain, nodes per axis, and derived spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    kind: DomainKind,
    /// Nodes per axis (odd, >= MIN_NODES_PER_AXIS).
    m: Vec<usize>,
    /// Lower corner of the node lattice.
    lo: Vec<f64>,
    /// Spacing per axis.
    h: Vec<f64>,
    /// Row-major strides (last axis fastest).
    stride: Vec<usize>,
}

fn validate_m(m: &[usize]) -> Result<()> {
    for &mi in m {
        if mi < MIN_NODES_PER_AXIS {
            return Err(Error::Argument(format!(
                "grid: {mi} nodes per axis < minimum {MIN_NODES_PER_AXIS}"
            )));
        }
        if mi % 2 == 0 {
            return Err(Error::Argument(format!(
                "grid: nodes per axis must be odd (got {mi}) so the center is a node"
            )));
        }
    }
    Ok(())
}

fn strides(m: &[usize]) -> Vec<usize> {
    let n = m.len();
    let mut s = vec![1usize; n];
    for a in (0..n.saturating_sub(1)).rev() {
        s[a] = s[a + 1] * m[a + 1];
    }
    s
}

impl GridSpec {
    /// Box domain with exact corners and per-axis node counts.
    pub fn box_domain(lo: &[f64], hi: &[f64], m: &[usize]) -> Result<Self> {
        let n = lo.len();
        if n == 0 || n > MAX_GRID_DIM {
            return Err(Error::Argument(format!(
                "grid: dimension {n} outside 1..={MAX_GRID_DIM}"
            )));
        }
        if hi.len() != n || m.len() != n {
            return Err(Error::Argument("grid: lo/hi/m length mismatch".into()));
        }
        validate_m(m)?;
        for i in 0..n {
            if !lo[i].is_finite() || !hi[i].is_finite() || hi[i] <= lo[i] {
                return Err(Error::Argument(format!(
                    "grid: invalid extent [{}, {}] on axis {i}",
                    lo[i], hi[i]
                )));
            }
        }
        let h: Vec<f64> = (0..n).map(|i| (hi[i] - lo[i]) / (m[i] - 1) as f64).collect();
        Ok(GridSpec {
            kind: DomainKind::Box {
                lo: lo.to_vec(),
                hi: hi.to_vec(),
            },
            m: m.to_vec(),
            lo: lo.to_vec(),
            h,
            stride: strides(m),
        })
    }

    /// Ellipsoid domain `D_s` in its bounding box. The hull half-extent per
    /// axis is `L_i = r_i (m-1)/(m-5)` where `r_i = sqrt(2 s / a_i)` is the
    /// semi-axis, which leaves exactly two cells of padding beyond the
    /// ellipsoid so that every stencil of an interior node stays on-grid.
    pub fn ellipsoid(a: &AkMatrix, s: f64, m: usize) -> Result<Self> {
        let n = a.dim();
        if n > MAX_GRID_DIM {
            return Err(Error::Argument(format!(
                "grid: dimension {n} outside 1..={MAX_GRID_DIM}"
            )));
        }
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Argument(format!("grid: level s = {s} must be > 0")));
        }
        let mv = vec![m; n];
        validate_m(&mv)?;
        let mut lo = Vec::with_capacity(n);
        let mut h = Vec::with_capacity(n);
        for &ai in a.diag() {
            let r = (2.0 * s / ai).sqrt();
            let l = r * (m - 1) as f64 / (m - 5) as f64;
            lo.push(-l);
            h.push(2.0 * l / (m - 1) as f64);
        }
        Ok(GridSpec {
            kind: DomainKind::Ellipsoid { a: a.clone(), s },
            m: mv.clone(),
            lo,
            h,
            stride: strides(&mv),
        })
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn nodes_per_axis(&self) -> &[usize] {
        &self.m
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h
    }

    /// Largest spacing across axes (the `h` in O(h^2) statements).
    pub fn h_max(&self) -> f64 {
        self.h.iter().cloned().fold(0.0, f64::max)
    }

    pub fn lower_corner(&self) -> &[f64] {
        &self.lo
    }

    pub fn upper_corner(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.lo[i] + self.h[i] * (self.m[i] - 1) as f64)
            .collect()
    }

    pub fn total_nodes(&self) -> usize {
        self.m.iter().product()
    }

    pub(crate) fn stride(&self) -> &[usize] {
        &self.stride
    }

    /// Decompose a flat index into per-axis indices.
    pub fn multi_index(&self, idx: usize, out: &mut [usize]) {
        let mut rem = idx;
        for a in 0..self.dim() {
            out[a] = rem / self.stride[a];
            rem %= self.stride[a];
        }
    }

    /// Coordinates of a node.
    pub fn point(&self, idx: usize, out: &mut [f64]) {
        let mut rem = idx;
        for a in 0..self.dim() {
            let ia = rem / self.stride[a];
            rem %= self.stride[a];
            out[a] = self.lo[a] + self.h[a] * ia as f64;
        }
    }

    /// Coordinates of a node as a fresh vector.
    pub fn point_vec(&self, idx: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.point(idx, &mut out);
        out
    }

    /// Level function `x' A x / 2` for ellipsoid grids.
    fn tau(&self, x: &[f64]) -> Option<f64> {
        match &self.kind {
            DomainKind::Ellipsoid { a, .. } => Some(a.quadratic(x)),
            DomainKind::Box { .. } => None,
        }
    }

    /// Classify every node. For boxes: faces are boundary, the rest
    /// interior. For ellipsoids: nodes with `tau < s` are interior; nodes
    /// outside that touch an interior node through the stencil (axis and
    /// diagonal neighbors) are boundary; the rest exterior.
    fn classify(&self) -> Vec<NodeClass> {
        let n = self.dim();
        let total = self.total_nodes();
        let mut class = vec![NodeClass::Exterior; total];
        match &self.kind {
            DomainKind::Box { .. } => {
                let mut mi = vec![0usize; n];
                for idx in 0..total {
                    self.multi_index(idx, &mut mi);
                    let on_face = (0..n).any(|a| mi[a] == 0 || mi[a] == self.m[a] - 1);
                    class[idx] = if on_face {
                        NodeClass::Boundary
                    } else {
                        NodeClass::Interior
                    };
                }
            }
            DomainKind::Ellipsoid { s, .. } => {
                let mut x = vec![0.0; n];
                for idx in 0..total {
                    self.point(idx, &mut x);
                    if self.tau(&x).unwrap() < *s {
                        class[idx] = NodeClass::Interior;
                    }
                }
                // Promote stencil neighbors of interior nodes to boundary.
                let mut mi = vec![0usize; n];
                let mut promote = Vec::new();
                for idx in 0..total {
                    if class[idx] != NodeClass::Interior {
                        continue;
                    }
                    self.multi_index(idx, &mut mi);
                    for a in 0..n {
                        for da in [-1i64, 1] {
                            let ja = mi[a] as i64 + da;
                            debug_assert!(ja >= 0 && ja < self.m[a] as i64);
                            let j = (idx as i64 + da * self.stride[a] as i64) as usize;
                            if class[j] == NodeClass::Exterior {
                                promote.push(j);
                            }
                            for b in (a + 1)..n {
                                for db in [-1i64, 1] {
                                    let jb = mi[b] as i64 + db;
                                    debug_assert!(jb >= 0 && jb < self.m[b] as i64);
                                    let jj = (j as i64 + db * self.stride[b] as i64) as usize;
                                    if class[jj] == NodeClass::Exterior {
                                        promote.push(jj);
                                    }
                                }
                            }
                        }
                    }
                }
                for j in promote {
                    class[j] = NodeClass::Boundary;
                }
            }
        }
        class
    }
}

/// A scalar field sampled on a grid, with per-node classification.
#[derive(Debug, Clone)]
pub struct GridField {
    spec: GridSpec,
    class: Vec<NodeClass>,
    values: Vec<f64>,
    /// Interior node indices in ascending order (fixed iteration order for
    /// deterministic assembly).
    interior: Vec<usize>,
}

impl GridField {
    /// Sample `g` on the grid. For ellipsoid grids, non-interior nodes take
    /// the level-function value `tau(x)` regardless of `g` (the second-order
    /// extension of the constant boundary data); for boxes, `g` provides
    /// both interior and boundary values.
    pub fn from_fn<G: Fn(&[f64]) -> f64>(spec: &GridSpec, g: G) -> Result<Self> {
        let class = spec.classify();
        let n = spec.dim();
        let mut x = vec![0.0; n];
        let is_ellipsoid = matches!(spec.kind(), DomainKind::Ellipsoid { .. });
        let mut values = Vec::with_capacity(spec.total_nodes());
        for idx in 0..spec.total_nodes() {
            spec.point(idx, &mut x);
            let v = match (is_ellipsoid, class[idx]) {
                (true, NodeClass::Boundary | NodeClass::Exterior) => spec.tau(&x).unwrap(),
                _ => g(&x),
            };
            if !v.is_finite() {
                return Err(Error::Numeric(format!(
                    "field sample at node {idx} is not finite: {v}"
                )));
            }
            values.push(v);
        }
        let interior = class
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == NodeClass::Interior)
            .map(|(i, _)| i)
            .collect();
        Ok(GridField {
            spec: spec.clone(),
            class,
            values,
            interior,
        })
    }

    /// Constant-zero interior with the proper boundary values.
    pub fn zeros(spec: &GridSpec) -> Result<Self> {
        GridField::from_fn(spec, |_| 0.0)
    }

    /// Wrap explicit per-node values without the ellipsoid boundary clamp
    /// (diagnostic fields such as residuals carry their own exterior values,
    /// not the Dirichlet data). Crate-internal: solution fields must keep
    /// the clamp.
    pub(crate) fn raw(spec: &GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.total_nodes() {
            return Err(Error::Argument(format!(
                "raw field: {} values for {} nodes",
                values.len(),
                spec.total_nodes()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("raw field: non-finite value {v}")));
        }
        let class = spec.classify();
        let interior = class
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == NodeClass::Interior)
            .map(|(i, _)| i)
            .collect();
        Ok(GridField {
            spec: spec.clone(),
            class,
            values,
            interior,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn class(&self, idx: usize) -> NodeClass {
        self.class[idx]
    }

    pub fn classes(&self) -> &[NodeClass] {
        &self.class
    }

    /// Interior node indices in ascending flat order.
    pub fn interior_indices(&self) -> &[usize] {
        &self.interior
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// Overwrite an interior value (boundary data is fixed at construction).
    pub fn set_interior(&mut self, idx: usize, v: f64) -> Result<()> {
        if self.class[idx] != NodeClass::Interior {
            return Err(Error::Argument(format!(
                "node {idx} is not interior; boundary values are immutable"
            )));
        }
        if !v.is_finite() {
            return Err(Error::Numeric(format!("non-finite value {v} at node {idx}")));
        }
        self.values[idx] = v;
        Ok(())
    }

    /// Bulk-update interior values from a slice ordered like
    /// [`interior_indices`](Self::interior_indices).
    pub(crate) fn set_interior_slice(&mut self, vals: &[f64]) -> Result<()> {
        if vals.len() != self.interior.len() {
            return Err(Error::Argument("interior slice length mismatch".into()));
        }
        for (&idx, &v) in self.interior.iter().zip(vals) {
            if !v.is_finite() {
                return Err(Error::Numeric(format!("non-finite value {v} at node {idx}")));
            }
            self.values[idx] = v;
        }
        Ok(())
    }

    /// Sup-norm of the difference over interior nodes; specs must agree.
    pub fn sup_diff(&self, other: &GridField) -> Result<f64> {
        if self.spec != other.spec {
            return Err(Error::Argument("sup_diff: grid specs differ".into()));
        }
        Ok(self
            .interior
            .iter()
            .map(|&i| (self.values[i] - other.values[i]).abs())
            .fold(0.0, f64::max))
    }

    /// Sup-norm of the difference against an analytic function, over
    /// interior nodes inside the optional box `[k_lo, k_hi]`.
    pub fn sup_error<G: Fn(&[f64]) -> f64>(
        &self,
        g: G,
        compact: Option<(&[f64], &[f64])>,
    ) -> f64 {
        let n = self.spec.dim();
        let mut x = vec![0.0; n];
        let mut sup: f64 = 0.0;
        for &idx in &self.interior {
            self.spec.point(idx, &mut x);
            if let Some((klo, khi)) = compact {
                if (0..n).any(|a| x[a] < klo[a] || x[a] > khi[a]) {
                    continue;
                }
            }
            sup = sup.max((self.values[idx] - g(&x)).abs());
        }
        sup
    }

    /// Cubic tensor-product interpolation (4-point Lagrange per axis; exact
    /// for polynomials of degree <= 3 per axis). `x` must lie within the
    /// grid hull.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        let n = self.spec.dim();
        if x.len() != n {
            return Err(Error::Argument(format!(
                "interpolate: point dimension {} != grid dimension {n}",
                x.len()
            )));
        }
        let hi = self.spec.upper_corner();
        // Per-axis window start and local coordinate.
        let mut start = vec![0usize; n];
        let mut u = vec![0.0; n];
        for a in 0..n {
            let (lo_a, h_a, m_a) = (self.spec.lo[a], self.spec.h[a], self.spec.m[a]);
            let tol = 1e-12 * (1.0 + hi[a].abs() + lo_a.abs());
            if x[a] < lo_a - tol || x[a] > hi[a] + tol {
                return Err(Error::Argument(format!(
                    "interpolate: coordinate {} outside [{}, {}] on axis {a}",
                    x[a], lo_a, hi[a]
                )));
            }
            let t = ((x[a] - lo_a) / h_a).clamp(0.0, (m_a - 1) as f64);
            // Center the 4-node window on the containing cell, clamped to
            // the grid; Lagrange weights handle u outside [1, 2].
            let cell = (t.floor() as usize).min(m_a - 2);
            let s0 = cell.saturating_sub(1).min(m_a - 4);
            start[a] = s0;
            u[a] = t - s0 as f64;
        }
        // Lagrange basis on offsets {0,1,2,3}.
        let wts = |t: f64| -> [f64; 4] {
            [
                -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0,
                t * (t - 2.0) * (t - 3.0) / 2.0,
                -t * (t - 1.0) * (t - 3.0) / 2.0,
                t * (t - 1.0) * (t - 2.0) / 6.0,
            ]
        };
        let w: Vec<[f64; 4]> = u.iter().map(|&t| wts(t)).collect();
        let mut acc = 0.0;
        let combos = 4usize.pow(n as u32);
        for c in 0..combos {
            let mut idx = 0usize;
            let mut weight = 1.0;
            let mut rem = c;
            for a in 0..n {
                let oa = rem % 4;
                rem /= 4;
                idx += (start[a] + oa) * self.spec.stride[a];
                weight *= w[a][oa];
            }
            acc += weight * self.values[idx];
        }
        if !acc.is_finite() {
            return Err(Error::Numeric("interpolate: non-finite result".into()));
        }
        Ok(acc)
    }

    // ------------------------------------------------------------------
    // Serialization
    // ------------------------------------------------------------------

    /// Write the binary `KHES` format (little-endian, bit-exact round-trip).
    pub fn save_binary(&self, path: &Path) -> Result<()> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(MAGIC);
        put_u32(&mut buf, FORMAT_VERSION);
        let n = self.spec.dim();
        put_u32(&mut buf, n as u32);
        match &self.spec.kind {
            DomainKind::Box { lo, hi } => {
                put_u32(&mut buf, 0);
                put_u32(&mut buf, 0);
                for &mi in &self.spec.m {
                    put_u32(&mut buf, mi as u32);
                }
                for v in lo.iter().chain(hi.iter()) {
                    put_f64(&mut buf, *v);
                }
            }
            DomainKind::Ellipsoid { a, s } => {
                put_u32(&mut buf, 1);
                put_u32(&mut buf, a.k() as u32);
                for &mi in &self.spec.m {
                    put_u32(&mut buf, mi as u32);
                }
                for v in a.diag() {
                    put_f64(&mut buf, *v);
                }
                put_f64(&mut buf, *s);
            }
        }
        // Mask as run-length pairs (tag, count).
        let mut runs: Vec<(u8, u64)> = Vec::new();
        for c in &self.class {
            let t = c.to_u8();
            match runs.last_mut() {
                Some((lt, count)) if *lt == t => *count += 1,
                _ => runs.push((t, 1)),
            }
        }
        put_u64(&mut buf, runs.len() as u64);
        for (t, count) in &runs {
            buf.push(*t);
            put_u64(&mut buf, *count);
        }
        put_u64(&mut buf, self.values.len() as u64);
        for v in &self.values {
            put_f64(&mut buf, *v);
        }
        std::fs::write(path, &buf).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    /// Read the binary `KHES` format.
    pub fn load_binary(path: &Path) -> Result<Self> {
        let data =
            std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut r = Cursor { data: &data, pos: 0 };
        let magic = r.bytes(4)?;
        if magic != MAGIC {
            return Err(Error::Io(format!(
                "{}: bad magic {magic:?}, expected {MAGIC:?}",
                path.display()
            )));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Io(format!(
                "{}: unsupported format version {version}",
                path.display()
            )));
        }
        let n = r.u32()? as usize;
        if n == 0 || n > MAX_GRID_DIM {
            return Err(Error::Io(format!("{}: bad dimension {n}", path.display())));
        }
        let kind_tag = r.u32()?;
        let k = r.u32()? as usize;
        let mut m = Vec::with_capacity(n);
        for _ in 0..n {
            m.push(r.u32()? as usize);
        }
        let spec = match kind_tag {
            0 => {
                let mut lo = Vec::with_capacity(n);
                let mut hi = Vec::with_capacity(n);
                for _ in 0..n {
                    lo.push(r.f64()?);
                }
                for _ in 0..n {
                    hi.push(r.f64()?);
                }
                GridSpec::box_domain(&lo, &hi, &m)?
            }
            1 => {
                let mut diag = Vec::with_capacity(n);
                for _ in 0..n {
                    diag.push(r.f64()?);
                }
                let s = r.f64()?;
                let a = AkMatrix::new(diag, k)?;
                if m.iter().any(|&mi| mi != m[0]) {
                    return Err(Error::Io("ellipsoid grid with anisotropic m".into()));
                }
                GridSpec::ellipsoid(&a, s, m[0])?
            }
            t => return Err(Error::Io(format!("unknown domain kind tag {t}"))),
        };
        let total = spec.total_nodes();
        let run_count = r.u64()? as usize;
        let mut class = Vec::with_capacity(total);
        for _ in 0..run_count {
            let tag = NodeClass::from_u8(r.bytes(1)?[0])?;
            let count = r.u64()? as usize;
            if class.len() + count > total {
                return Err(Error::Io("mask run-length overruns node count".into()));
            }
            class.extend(std::iter::repeat(tag).take(count));
        }
        if class.len() != total {
            return Err(Error::Io(format!(
                "mask covers {} of {} nodes",
                class.len(),
                total
            )));
        }
        let value_count = r.u64()? as usize;
        if value_count != total {
            return Err(Error::Io(format!(
                "value count {value_count} != node count {total}"
            )));
        }
        let mut values = Vec::with_capacity(total);
        for _ in 0..total {
            let v = r.f64()?;
            if !v.is_finite() {
                return Err(Error::Io(format!("non-finite stored value {v}")));
            }
            values.push(v);
        }
        let interior = class
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == NodeClass::Interior)
            .map(|(i, _)| i)
            .collect();
        Ok(GridField {
            spec,
            class,
            values,
            interior,
        })
    }

    /// CSV export: header `x1,...,xn,u`, one row per node, 17 significant
    /// digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.spec.dim();
        let mut header = (1..=n).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",");
        header.push_str(",u\n");
        w.write_all(header.as_bytes()).map_err(Error::from)?;
        let mut x = vec![0.0; n];
        for idx in 0..self.spec.total_nodes() {
            self.spec.point(idx, &mut x);
            let mut row = String::with_capacity(32 * (n + 1));
            for xa in &x {
                row.push_str(&format_sig17(*xa));
                row.push(',');
            }
            row.push_str(&format_sig17(self.values[idx]));
            row.push('\n');
            w.write_all(row.as_bytes()).map_err(Error::from)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Format with 17 significant digits (shortest exact round-trip superset).
pub fn format_sig17(v: f64) -> String {
    format!("{v:.16e}")
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Io("unexpected end of file".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }
}
