//! Operator coefficients `(R, a(dy), b(y))` of the reduced elliptic operator
//!
//! ```text
//! L = (a(dy) + b(y)² dy) ∂xx + 2 b(y) ∂xy + ∂yy   on ℝ × (0, R),
//! ```
//!
//! builtin coefficient families, the JSON spec format, and the cell-averaged
//! meshes consumed by the spectral solver.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Default geometric grading ratio of [`build_mesh`].
pub const DEFAULT_GRADING: f64 = 1.15;

/// Number of decades spanned by the geometric part of a graded mesh.
const GRADED_DECADES: f64 = 9.0;

/// Height of the strip; `Infinite` is the half-plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Height {
    Finite(f64),
    Infinite,
}

impl Height {
    pub fn is_finite(self) -> bool {
        matches!(self, Height::Finite(_))
    }

    /// The height as a float (`f64::INFINITY` for the half-plane).
    pub fn value(self) -> f64 {
        match self {
            Height::Finite(r) => r,
            Height::Infinite => f64::INFINITY,
        }
    }
}

impl Serialize for Height {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Height::Finite(r) => s.serialize_f64(*r),
            Height::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Height {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        match &v {
            Value::Number(n) => {
                let r = n.as_f64().ok_or_else(|| serde::de::Error::custom("bad height"))?;
                if r.is_infinite() {
                    Ok(Height::Infinite)
                } else {
                    Ok(Height::Finite(r))
                }
            }
            Value::String(s) if matches!(s.to_ascii_lowercase().as_str(), "inf" | "infinity") => Ok(Height::Infinite),
            _ => Err(serde::de::Error::custom(format!("height must be a number or \"inf\", got {v}"))),
        }
    }
}

/// A real coefficient profile on `[0, R)`.
///
/// Every variant has an exact antiderivative for itself and for its square,
/// which is what the mesh builder uses for cell averages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `coef · y^exponent` for `y > 0`.
    Power {
        coef: f64,
        exponent: f64,
    },
    /// Piecewise linear through `(y, value)` points, constant beyond the ends.
    Table {
        points: Vec<(f64, f64)>,
    },
    /// `scale · inner(origin + direction · y)`, `direction = ±1`.
    Remap {
        inner: Box<Profile>,
        origin: f64,
        direction: f64,
        scale: f64,
    },
}

impl Profile {
    pub fn zero() -> Self {
        Profile::Constant { value: 0.0 }
    }

    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    /// `coef · y^exponent`, collapsed to a constant when that is exact.
    pub fn power(coef: f64, exponent: f64) -> Self {
        if coef == 0.0 {
            Profile::zero()
        } else if exponent == 0.0 {
            Profile::constant(coef)
        } else {
            Profile::Power { coef, exponent }
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Power { coef, exponent } => coef * y.powf(*exponent),
            Profile::Table { points } => table_eval(points, y),
            Profile::Remap { inner, origin, direction, scale } => scale * inner.eval(origin + direction * y),
        }
    }

    /// `∫_lo^hi profile(y) dy` for `lo ≤ hi`.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        match self {
            Profile::Constant { value } => value * (hi - lo),
            Profile::Power { coef, exponent } => coef * power_integral(*exponent, lo, hi),
            Profile::Table { points } => table_integral(points, lo, hi, false),
            Profile::Remap { inner, origin, direction, scale } => {
                let (u0, u1) = remap_interval(*origin, *direction, lo, hi);
                scale * inner.integral(u0, u1)
            }
        }
    }

    /// `∫_lo^hi profile(y)² dy` for `lo ≤ hi`.
    pub fn square_integral(&self, lo: f64, hi: f64) -> f64 {
        match self {
            Profile::Constant { value } => value * value * (hi - lo),
            Profile::Power { coef, exponent } => coef * coef * power_integral(2.0 * exponent, lo, hi),
            Profile::Table { points } => table_integral(points, lo, hi, true),
            Profile::Remap { inner, origin, direction, scale } => {
                let (u0, u1) = remap_interval(*origin, *direction, lo, hi);
                scale * scale * inner.square_integral(u0, u1)
            }
        }
    }

    /// The constant value when the profile is constant everywhere.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Profile::Constant { value } => Some(*value),
            Profile::Power { .. } => None,
            Profile::Table { points } => {
                let first = points.first()?.1;
                points.iter().all(|p| p.1 == first).then_some(first)
            }
            Profile::Remap { inner, scale, .. } => inner.as_constant().map(|c| scale * c),
        }
    }

    /// A height beyond which the profile is constant, if there is one.
    pub fn constant_beyond(&self) -> Option<f64> {
        match self {
            Profile::Constant { .. } => Some(0.0),
            Profile::Table { points } => points.last().map(|p| p.0.max(0.0)),
            Profile::Power { .. } => None,
            Profile::Remap { inner, origin, direction, .. } => match inner.as_ref() {
                Profile::Table { points } if *direction > 0.0 => points.last().map(|p| (p.0 - origin).max(0.0)),
                Profile::Table { points } => points.first().map(|p| (origin - p.0).max(0.0)),
                _ => self.as_constant().map(|_| 0.0),
            },
        }
    }

    /// Breakpoints of table profiles, mapped to `y > 0`.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints_raw().into_iter().filter(|&y| y > 0.0).collect()
    }

    /// Breakpoints in the profile's own coordinate, including nonpositive ones.
    fn breakpoints_raw(&self) -> Vec<f64> {
        match self {
            Profile::Table { points } => points.iter().map(|p| p.0).collect(),
            Profile::Remap { inner, origin, direction, .. } => {
                inner.breakpoints_raw().into_iter().map(|u| (u - origin) * direction).collect()
            }
            _ => Vec::new(),
        }
    }

    fn is_nonnegative(&self) -> bool {
        match self {
            Profile::Constant { value } => *value >= 0.0,
            Profile::Power { coef, .. } => *coef >= 0.0,
            Profile::Table { points } => points.iter().all(|p| p.1 >= 0.0),
            Profile::Remap { inner, scale, .. } => *scale >= 0.0 && inner.is_nonnegative(),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        match self {
            Profile::Constant { value } if !value.is_finite() => {
                Err(Error::InvalidSpec(format!("{name}: constant must be finite")))
            }
            Profile::Power { coef, exponent } if !coef.is_finite() || !exponent.is_finite() => {
                Err(Error::InvalidSpec(format!("{name}: power parameters must be finite")))
            }
            Profile::Table { points } => {
                if points.is_empty() {
                    return Err(Error::InvalidSpec(format!("{name}: empty table")));
                }
                if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
                    return Err(Error::InvalidSpec(format!("{name}: table entries must be finite")));
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::InvalidSpec(format!("{name}: table abscissae must be strictly increasing")));
                }
                Ok(())
            }
            Profile::Remap { inner, direction, scale, origin } => {
                if direction.abs() != 1.0 || !scale.is_finite() || !origin.is_finite() {
                    return Err(Error::InvalidSpec(format!("{name}: malformed remap")));
                }
                inner.validate(name)
            }
            _ => Ok(()),
        }
    }
}

fn remap_interval(origin: f64, direction: f64, lo: f64, hi: f64) -> (f64, f64) {
    if direction > 0.0 {
        (origin + lo, origin + hi)
    } else {
        (origin - hi, origin - lo)
    }
}

/// `∫_lo^hi y^e dy` on `0 ≤ lo ≤ hi`; infinite when the singularity at 0 is
/// not integrable.
fn power_integral(e: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if lo < 0.0 {
        return f64::NAN;
    }
    if (e + 1.0).abs() < 1e-14 {
        return if lo == 0.0 { f64::INFINITY } else { (hi / lo).ln() };
    }
    if e + 1.0 < 0.0 && lo == 0.0 {
        return f64::INFINITY;
    }
    let p = e + 1.0;
    (hi.powf(p) - lo.powf(p)) / p
}

fn table_eval(points: &[(f64, f64)], y: f64) -> f64 {
    let n = points.len();
    if y <= points[0].0 {
        return points[0].1;
    }
    if y >= points[n - 1].0 {
        return points[n - 1].1;
    }
    let k = points.partition_point(|p| p.0 <= y) - 1;
    let (y0, v0) = points[k];
    let (y1, v1) = points[k + 1];
    v0 + (v1 - v0) * (y - y0) / (y1 - y0)
}

/// Exact integral of the piecewise-linear table (or its square) over `[lo, hi]`.
fn table_integral(points: &[(f64, f64)], lo: f64, hi: f64, square: bool) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let mut cuts = vec![lo];
    cuts.extend(points.iter().map(|p| p.0).filter(|&y| y > lo && y < hi));
    cuts.push(hi);
    cuts.windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let fa = table_eval(points, a);
            let fb = table_eval(points, b);
            if square {
                (b - a) * (fa * fa + fa * fb + fb * fb) / 3.0
            } else {
                0.5 * (b - a) * (fa + fb)
            }
        })
        .sum()
}

/// A point mass `w · δ_y` of the coefficient measure `a(dy)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub y: f64,
    pub w: f64,
}

/// Coefficients `(R, a(dy), b(y))`: `a(dy) = a_density(y) dy + Σ w_k δ_{y_k}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    #[serde(rename = "R")]
    pub height: Height,
    pub a_density: Profile,
    pub b: Profile,
    #[serde(default)]
    pub atoms: Vec<Atom>,
}

impl OperatorSpec {
    /// Validates and builds a spec; atoms are sorted by location.
    pub fn new(height: Height, a_density: Profile, b: Profile, mut atoms: Vec<Atom>) -> Result<Self> {
        if let Height::Finite(r) = height {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidSpec(format!("height R must be positive, got {r}")));
            }
        }
        a_density.validate("a")?;
        b.validate("b")?;
        if !a_density.is_nonnegative() {
            return Err(Error::InvalidSpec("density a(y) must be nonnegative".into()));
        }
        atoms.sort_by(|p, q| p.y.total_cmp(&q.y));
        for atom in &atoms {
            if !(atom.w >= 0.0 && atom.w.is_finite()) {
                return Err(Error::InvalidSpec(format!("atom weight must be >= 0, got {}", atom.w)));
            }
            if !(atom.y >= 0.0 && atom.y < height.value()) {
                return Err(Error::InvalidSpec(format!("atom location {} outside [0, R)", atom.y)));
            }
        }
        if atoms.windows(2).any(|w| w[0].y == w[1].y) {
            return Err(Error::InvalidSpec("atom locations must be distinct".into()));
        }
        let spec = OperatorSpec { height, a_density, b, atoms };
        // Local integrability near the origin, where power singularities live.
        let probe = height.value().min(1.0) * 0.5;
        if !spec.a_density.integral(0.0, probe).is_finite() {
            return Err(Error::NotLocallyIntegrable { coefficient: "a", lo: 0.0, hi: probe });
        }
        if !spec.b.square_integral(0.0, probe).is_finite() {
            return Err(Error::NotLocallyIntegrable { coefficient: "b^2", lo: 0.0, hi: probe });
        }
        Ok(spec)
    }

    /// The homogeneous family `L = (p²+q²) y^{2/μ−2} ∂xx − 2q y^{1/μ−1} ∂xy + ∂yy`
    /// on the half-plane: `a = p² y^{2/μ−2}`, `b = −q y^{1/μ−1}`.
    pub fn homogeneous(p: f64, q: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu < 2.0) {
            return Err(Error::InvalidSpec(format!("mu must lie in (0, 2), got {mu}")));
        }
        if !(p >= 0.0) || !q.is_finite() {
            return Err(Error::InvalidSpec("need p >= 0 and finite q".into()));
        }
        if p == 0.0 && q == 0.0 {
            return Err(Error::InvalidSpec("p and q cannot both vanish".into()));
        }
        let a = Profile::power(p * p, 2.0 / mu - 2.0);
        let b = Profile::power(-q, 1.0 / mu - 1.0);
        OperatorSpec::new(Height::Infinite, a, b, Vec::new())
    }

    /// Constant density `a0` on the strip `(0, R)`.
    pub fn strip(a0: f64, r: f64) -> Result<Self> {
        if !(a0 > 0.0) {
            return Err(Error::InvalidSpec(format!("strip needs a0 > 0, got {a0}")));
        }
        OperatorSpec::new(Height::Finite(r), Profile::constant(a0), Profile::zero(), Vec::new())
    }

    /// Constant density `a0` on the half-plane.
    pub fn half_plane(a0: f64) -> Result<Self> {
        if !(a0 > 0.0) {
            return Err(Error::InvalidSpec(format!("half-plane needs a0 > 0, got {a0}")));
        }
        OperatorSpec::new(Height::Infinite, Profile::constant(a0), Profile::zero(), Vec::new())
    }

    /// A single atom `w δ_{y0}` on the half-plane, no density and no drift.
    pub fn atom(w: f64, y0: f64) -> Result<Self> {
        if !(w > 0.0 && y0 > 0.0) {
            return Err(Error::InvalidSpec(format!("atom spec needs w > 0 and y0 > 0, got ({w}, {y0})")));
        }
        OperatorSpec::new(Height::Infinite, Profile::zero(), Profile::zero(), vec![Atom { y: y0, w }])
    }

    /// `a({0})`, the atom at the boundary.
    pub fn boundary_atom(&self) -> f64 {
        self.atoms.iter().find(|a| a.y == 0.0).map_or(0.0, |a| a.w)
    }

    /// Both profiles are constant; the propagator is then exact on any mesh.
    pub fn is_piecewise_constant(&self) -> bool {
        self.a_density.as_constant().is_some() && self.b.as_constant().is_some()
    }

    /// A height beyond which all coefficients are constant and no atoms sit.
    pub fn constant_beyond(&self) -> Option<f64> {
        let a = self.a_density.constant_beyond()?;
        let b = self.b.constant_beyond()?;
        let atoms = self.atoms.last().map_or(0.0, |a| a.y);
        Some(a.max(b).max(atoms))
    }

    pub fn has_drift(&self) -> bool {
        self.b.as_constant() != Some(0.0)
    }

    /// Short stable hash of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let text = serde_json::to_string(self).unwrap_or_default();
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in text.bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }

    /// Parses the JSON spec-file format.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: SpecFile =
            serde_json::from_str(text).map_err(|e| Error::InvalidSpec(format!("malformed spec JSON: {e}")))?;
        file.into_spec()
    }
}

/// On-disk operator spec:
///
/// ```json
/// {"R": 1.0 | "inf",
///  "family": {"name": "...", "params": {...}} | {"table": [[y,a],...], "b_table": [[y,b],...]},
///  "atoms": [{"y": 0.0, "w": 0.5}]}
/// ```
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpecFile {
    #[serde(rename = "R")]
    pub height: Height,
    pub family: FamilyFile,
    #[serde(default)]
    pub atoms: Vec<Atom>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FamilyFile {
    Named {
        name: String,
        #[serde(default)]
        params: serde_json::Map<String, Value>,
    },
    Table {
        table: Vec<[f64; 2]>,
        #[serde(default)]
        b_table: Vec<[f64; 2]>,
    },
}

impl SpecFile {
    pub fn into_spec(self) -> Result<OperatorSpec> {
        let height = self.height;
        let mut atoms = self.atoms;
        let (a, b) = match self.family {
            FamilyFile::Table { table, b_table } => {
                let a = Profile::Table { points: table.iter().map(|p| (p[0], p[1])).collect() };
                let b = if b_table.is_empty() {
                    Profile::zero()
                } else {
                    Profile::Table { points: b_table.iter().map(|p| (p[0], p[1])).collect() }
                };
                (a, b)
            }
            FamilyFile::Named { name, params } => {
                let get = |key: &str| -> Result<f64> {
                    params
                        .get(key)
                        .and_then(Value::as_f64)
                        .ok_or_else(|| Error::InvalidSpec(format!("family `{name}` needs numeric param `{key}`")))
                };
                let get_or = |key: &str, default: f64| params.get(key).and_then(Value::as_f64).unwrap_or(default);
                match name.as_str() {
                    "homogeneous" => {
                        if height.is_finite() {
                            return Err(Error::InvalidSpec("homogeneous family requires R = \"inf\"".into()));
                        }
                        let s = OperatorSpec::homogeneous(get("p")?, get("q")?, get("mu")?)?;
                        (s.a_density, s.b)
                    }
                    "constant" | "strip" | "half-plane" | "half_plane" => {
                        let a0 = get("a0")?;
                        (Profile::constant(a0), Profile::constant(get_or("b0", 0.0)))
                    }
                    "atom" => {
                        atoms.push(Atom { y: get("y0")?, w: get("w")? });
                        (Profile::zero(), Profile::zero())
                    }
                    "power" => (
                        Profile::power(get("a_coef")?, get_or("a_exp", 0.0)),
                        Profile::power(get_or("b_coef", 0.0), get_or("b_exp", 0.0)),
                    ),
                    other => return Err(Error::InvalidSpec(format!("unknown family `{other}`"))),
                }
            }
        };
        OperatorSpec::new(height, a, b, atoms)
    }
}

/// Cell-averaged coefficients on `[y_j, y_{j+1}]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// Average of `a_density`.
    pub a: f64,
    /// Average of `b`.
    pub b: f64,
    /// Average of `b²`.
    pub b2: f64,
}

/// What the bounded solution satisfies at the top of the mesh.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Terminal {
    /// `φ(R) = 0`; the mesh reaches a finite `R`.
    Dirichlet,
    /// Truncated half-line: continue with the decaying solution of the
    /// frozen coefficients `(a, b)` above the last node.
    Tail { a: f64, b: f64 },
}

/// Discretisation carrier for the spectral ODE.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub nodes: Vec<f64>,
    pub cells: Vec<Cell>,
    /// Atom weight sitting on each node (`atoms[0] = a({0})`).
    pub atoms: Vec<f64>,
    pub terminal: Terminal,
}

/// Layout of a mesh: graded on `[0, y_active]`, geometrically coarsening
/// with `far_ratio` on `[y_active, y_max]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshPlan {
    pub y_active: f64,
    pub y_max: f64,
    pub cells: usize,
    pub grading: f64,
    pub far_ratio: f64,
    /// Heights that must be nodes (atoms are always added).
    pub required: Vec<f64>,
}

impl MeshPlan {
    pub fn uniform_zone(y_max: f64, cells: usize, grading: f64) -> Self {
        MeshPlan { y_active: y_max, y_max, cells, grading, far_ratio: 1.05, required: Vec::new() }
    }
}

/// Graded mesh on `[0, y_max]` with `n_cells` cells clustered towards 0.
///
/// `grading` is the width ratio of neighbouring cells in the geometric part
/// (`1.0` gives a uniform mesh); widths are capped once the geometric part
/// spans nine decades so the remaining cells are uniform.
pub fn build_mesh(spec: &OperatorSpec, y_max: f64, n_cells: usize, grading: f64) -> Result<Mesh> {
    build_mesh_with(spec, &MeshPlan::uniform_zone(y_max, n_cells, grading))
}

pub fn build_mesh_with(spec: &OperatorSpec, plan: &MeshPlan) -> Result<Mesh> {
    let r = spec.height.value();
    if !(plan.y_max > 0.0 && plan.y_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("mesh height must be positive and finite, got {}", plan.y_max)));
    }
    if plan.y_max > r * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!("mesh height {} exceeds R = {r}", plan.y_max)));
    }
    if plan.cells < 1 {
        return Err(Error::InvalidArgument("mesh needs at least one cell".into()));
    }
    if !(plan.grading >= 1.0) {
        return Err(Error::InvalidArgument(format!("grading must be >= 1, got {}", plan.grading)));
    }
    let y_active = plan.y_active.min(plan.y_max);
    let mut nodes = graded_nodes(y_active, plan.cells, plan.grading);
    if plan.y_max > y_active {
        let far = plan.far_ratio.max(1.0 + 1e-3);
        let mut h = nodes[nodes.len() - 1] - nodes[nodes.len() - 2];
        let mut y = y_active;
        loop {
            h *= far;
            if y + 1.5 * h >= plan.y_max {
                break;
            }
            y += h;
            nodes.push(y);
        }
        nodes.push(plan.y_max);
    }
    Mesh::from_nodes(spec, nodes, &plan.required)
}

fn graded_nodes(y_max: f64, n: usize, r: f64) -> Vec<f64> {
    let k = if r <= 1.0 + 1e-12 {
        0
    } else {
        ((GRADED_DECADES * std::f64::consts::LN_10 / r.ln()).ceil() as usize).min(n / 2)
    };
    let geometric: f64 = (1..=k).map(|m| r.powi(-(m as i32))).sum();
    let cap = y_max / (geometric + (n - k) as f64);
    let mut nodes = Vec::with_capacity(n + 1);
    nodes.push(0.0);
    let mut y = 0.0;
    for j in 0..n {
        let width = if j < k { cap * r.powi(-((k - j) as i32)) } else { cap };
        y += width;
        nodes.push(y);
    }
    nodes[n] = y_max;
    nodes
}

impl Mesh {
    /// Mesh with the given breakpoints plus the spec's atoms and `required`
    /// heights (those inside `[0, y_max]`). Generated breakpoints closer than
    /// a relative `1e-9` to a required one are dropped.
    pub fn from_nodes(spec: &OperatorSpec, mut nodes: Vec<f64>, required: &[f64]) -> Result<Self> {
        nodes.sort_by(f64::total_cmp);
        let y_max = *nodes.last().ok_or_else(|| Error::InvalidArgument("empty node list".into()))?;
        let snap = 1e-9 * y_max;
        let mut fixed: Vec<f64> =
            spec.atoms.iter().map(|a| a.y).chain(required.iter().copied()).filter(|&y| y > 0.0 && y < y_max).collect();
        fixed.sort_by(f64::total_cmp);
        fixed.dedup();
        nodes.retain(|&y| y == 0.0 || y == y_max || fixed.iter().all(|&f| (f - y).abs() > snap));
        nodes.extend(fixed);
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        if nodes[0] != 0.0 {
            nodes.insert(0, 0.0);
        }

        let mut cells = Vec::with_capacity(nodes.len() - 1);
        for w in nodes.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let h = hi - lo;
            let ia = spec.a_density.integral(lo, hi);
            if !ia.is_finite() {
                return Err(Error::NotLocallyIntegrable { coefficient: "a", lo, hi });
            }
            let ib = spec.b.integral(lo, hi);
            let ib2 = spec.b.square_integral(lo, hi);
            if !ib.is_finite() || !ib2.is_finite() {
                return Err(Error::NotLocallyIntegrable { coefficient: "b^2", lo, hi });
            }
            cells.push(Cell { a: ia / h, b: ib / h, b2: ib2 / h });
        }

        let mut atoms = vec![0.0; nodes.len()];
        for atom in &spec.atoms {
            if atom.y <= y_max {
                let j = nodes.partition_point(|&y| y < atom.y);
                atoms[j] += atom.w;
            }
        }

        let r = spec.height.value();
        let terminal = if spec.height.is_finite() && (y_max - r).abs() <= 1e-12 * r {
            Terminal::Dirichlet
        } else {
            Terminal::Tail { a: spec.a_density.eval(y_max), b: spec.b.eval(y_max) }
        };
        Ok(Mesh { nodes, cells, atoms, terminal })
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn y_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn width(&self, j: usize) -> f64 {
        self.nodes[j + 1] - self.nodes[j]
    }

    /// Index of the node at `y` (within a relative `1e-12`).
    pub fn node_index(&self, y: f64) -> Option<usize> {
        let tol = 1e-12 * self.y_max().max(1.0);
        let j = self.nodes.partition_point(|&n| n < y - tol);
        (j < self.nodes.len() && (self.nodes[j] - y).abs() <= tol).then_some(j)
    }

    /// Index of the cell containing `y` (the last cell for `y = y_max`).
    pub fn locate(&self, y: f64) -> usize {
        let j = self.nodes.partition_point(|&n| n <= y);
        j.saturating_sub(1).min(self.cells.len() - 1)
    }

    /// The part `[0, y_j]` reflected about its midpoint: cells reversed,
    /// drift negated, Dirichlet at the top. An atom at node `j` lands on the
    /// new origin; the atom at the old origin is dropped (the reflected
    /// measure lives on `[0, y_j)`).
    pub fn reflect_prefix(&self, j: usize) -> Mesh {
        let top = self.nodes[j];
        let nodes: Vec<f64> = (0..=j).rev().map(|i| top - self.nodes[i]).collect();
        let cells = self.cells[..j].iter().rev().map(|c| Cell { a: c.a, b: -c.b, b2: c.b2 }).collect();
        let mut atoms: Vec<f64> = (0..=j).rev().map(|i| self.atoms[i]).collect();
        atoms[j] = 0.0;
        Mesh { nodes, cells, atoms, terminal: Terminal::Dirichlet }
    }

    /// The part `[y_j, y_max]` translated to start at 0; an atom at node `j`
    /// is dropped (the translated measure lives on `(0, R̂)`).
    pub fn suffix(&self, j: usize) -> Mesh {
        let base = self.nodes[j];
        let nodes = self.nodes[j..].iter().map(|y| y - base).collect();
        let cells = self.cells[j..].to_vec();
        let mut atoms = self.atoms[j..].to_vec();
        atoms[0] = 0.0;
        Mesh { nodes, cells, atoms, terminal: self.terminal }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn homogeneous_unit_is_constant() {
        let s = OperatorSpec::homogeneous(1.0, 0.0, 1.0).unwrap();
        assert_eq!(s.a_density, Profile::constant(1.0));
        assert_eq!(s.b, Profile::zero());
        assert_eq!(s.height, Height::Infinite);
        assert!(s.is_piecewise_constant());
    }

    #[test]
    fn homogeneous_pure_drift() {
        let s = OperatorSpec::homogeneous(0.0, 1.0, 0.5).unwrap();
        assert_eq!(s.a_density.eval(0.3), 0.0);
        assert_relative_eq!(s.b.eval(0.3), -0.3, epsilon = 1e-15);
    }

    #[test]
    fn homogeneous_rejects_bad_mu() {
        for mu in [0.0, 2.0, -1.0, 3.0] {
            assert!(OperatorSpec::homogeneous(1.0, 0.0, mu).is_err());
        }
        assert!(OperatorSpec::homogeneous(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn rejects_non_integrable_density() {
        let a = Profile::power(1.0, -1.5);
        let err = OperatorSpec::new(Height::Infinite, a, Profile::zero(), vec![]).unwrap_err();
        assert!(matches!(err, Error::NotLocallyIntegrable { coefficient: "a", .. }));
        let b = Profile::power(1.0, -0.5);
        let err = OperatorSpec::new(Height::Infinite, Profile::zero(), b, vec![]).unwrap_err();
        assert!(matches!(err, Error::NotLocallyIntegrable { coefficient: "b^2", .. }));
    }

    #[test]
    fn rejects_bad_atoms() {
        let bad = |atoms| OperatorSpec::new(Height::Finite(1.0), Profile::zero(), Profile::zero(), atoms);
        assert!(bad(vec![Atom { y: 1.0, w: 1.0 }]).is_err());
        assert!(bad(vec![Atom { y: 0.5, w: -1.0 }]).is_err());
        assert!(bad(vec![Atom { y: 0.5, w: 1.0 }, Atom { y: 0.5, w: 2.0 }]).is_err());
        assert!(bad(vec![Atom { y: 0.0, w: 1.0 }]).is_ok());
    }

    #[test]
    fn uniform_strip_mesh_averages() {
        let s = OperatorSpec::strip(1.0, 1.0).unwrap();
        let m = build_mesh(&s, 1.0, 4, 1.0).unwrap();
        assert_eq!(m.nodes, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        for c in &m.cells {
            assert_eq!(c.a, 1.0);
            assert_eq!(c.b, 0.0);
        }
        assert_eq!(m.terminal, Terminal::Dirichlet);
    }

    #[test]
    fn first_cell_average_of_quadratic_density() {
        let s = OperatorSpec::homogeneous(1.0, 0.0, 0.5).unwrap();
        let m = build_mesh(&s, 2.0, 40, 1.15).unwrap();
        let h = m.width(0);
        assert_relative_eq!(m.cells[0].a, h * h / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn atoms_are_snapped_onto_nodes() {
        let s = OperatorSpec::atom(1.0, 1.0).unwrap();
        let m = build_mesh(&s, 3.0, 7, 1.0).unwrap();
        let j = m.node_index(1.0).expect("atom must be a node");
        assert_eq!(m.atoms[j], 1.0);
        assert_eq!(m.atoms.iter().sum::<f64>(), 1.0);
        assert!(m.nodes.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn cell_integrals_agree_across_refinements() {
        let s = OperatorSpec::homogeneous(1.3, 0.7, 1.6).unwrap();
        let total = |n| {
            let m = build_mesh(&s, 2.0, n, 1.1).unwrap();
            let upto = m.node_index(2.0).unwrap();
            (0..upto).map(|j| m.cells[j].a * m.width(j)).sum::<f64>()
        };
        let exact = 1.3f64.powi(2) * power_integral(2.0 / 1.6 - 2.0, 0.0, 2.0);
        assert_relative_eq!(total(50), exact, max_relative = 1e-12);
        assert_relative_eq!(total(400), exact, max_relative = 1e-12);
    }

    #[test]
    fn table_integrals_are_exact() {
        let p = Profile::Table { points: vec![(0.0, 1.0), (1.0, 3.0), (2.0, 3.0)] };
        assert_relative_eq!(p.integral(0.0, 1.0), 2.0);
        assert_relative_eq!(p.integral(0.5, 3.0), 1.25 + 3.0 + 3.0);
        // ∫_0^1 (1+2y)^2 dy = 13/3
        assert_relative_eq!(p.square_integral(0.0, 1.0), 13.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn remap_reflects_integrals() {
        let inner = Profile::power(1.0, 1.0);
        let refl = Profile::Remap { inner: Box::new(inner.clone()), origin: 1.0, direction: -1.0, scale: -1.0 };
        // b(y) = y on [0,1] reflected: -(1-y)
        assert_relative_eq!(refl.eval(0.25), -0.75);
        assert_relative_eq!(refl.integral(0.0, 0.5), -(0.5 - 0.125), max_relative = 1e-14);
        assert_relative_eq!(refl.square_integral(0.0, 1.0), inner.square_integral(0.0, 1.0));
    }

    #[test]
    fn graded_mesh_clusters_at_zero() {
        let s = OperatorSpec::homogeneous(1.0, 0.0, 1.5).unwrap();
        let m = build_mesh(&s, 10.0, 300, DEFAULT_GRADING).unwrap();
        assert_eq!(m.n_cells(), 300);
        assert!(m.width(0) < 1e-8 * m.width(299));
        assert_relative_eq!(m.y_max(), 10.0);
    }

    #[test]
    fn reflect_and_suffix() {
        let s = OperatorSpec::new(
            Height::Infinite,
            Profile::power(1.0, 1.0),
            Profile::power(1.0, 1.0),
            vec![Atom { y: 0.0, w: 0.3 }, Atom { y: 0.5, w: 2.0 }, Atom { y: 1.5, w: 1.0 }],
        )
        .unwrap();
        let m = Mesh::from_nodes(&s, vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0], &[]).unwrap();
        let j = m.node_index(1.0).unwrap();
        let check = m.reflect_prefix(j);
        assert_eq!(check.nodes, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(check.atoms, vec![0.0, 0.0, 2.0, 0.0, 0.0]);
        assert_eq!(check.cells[0].b, -m.cells[3].b);
        let hat = m.suffix(j);
        assert_eq!(hat.nodes, vec![0.0, 0.5, 1.0]);
        assert_eq!(hat.atoms, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn json_spec_files() {
        let s = OperatorSpec::from_json(r#"{"R": 1.0, "family": {"name": "strip", "params": {"a0": 1.0}}}"#).unwrap();
        assert_eq!(s, OperatorSpec::strip(1.0, 1.0).unwrap());
        let s = OperatorSpec::from_json(
            r#"{"R": "inf", "family": {"name": "homogeneous", "params": {"p": 1, "q": 1, "mu": 0.8}}}"#,
        )
        .unwrap();
        assert_eq!(s, OperatorSpec::homogeneous(1.0, 1.0, 0.8).unwrap());
        let s = OperatorSpec::from_json(
            r#"{"R": "inf", "family": {"table": [[0,1],[1,2]], "b_table": [[0,0.5]]}, "atoms": [{"y": 0.0, "w": 0.5}]}"#,
        )
        .unwrap();
        assert_eq!(s.boundary_atom(), 0.5);
        assert_eq!(s.a_density.eval(0.5), 1.5);
        assert!(OperatorSpec::from_json(r#"{"R": 1.0, "family": {"name": "nope"}}"#).is_err());
        assert!(OperatorSpec::from_json("not json").is_err());
    }
}
