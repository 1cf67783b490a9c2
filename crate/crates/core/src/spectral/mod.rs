//! The spectral ODE
//!
//! ```text
//! ½ φ″(dy) = ½ ξ² φ(y) a(dy) + (½ ξ² b(y)² φ(y) − i ξ b(y) φ′(y)) dy
//! ```
//!
//! solved by piecewise-exact propagation on a [`Mesh`]: the fundamental
//! solutions `φᴰ`, `φᴺ` by forward integration, the bounded solution `φ_ξ`
//! by backward integration from the top of the mesh, and the Rogers function
//! `ψ(ξ) = −½ φ_ξ′(0⁺) + ½ a({0}) ξ²`.

pub mod propagator;
pub mod zeros;

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{build_mesh_with, Mesh, MeshPlan, OperatorSpec, Terminal};
use crate::par::{try_map_indexed, Execution};
use propagator::{cell_matrix, ScaledState};

pub use zeros::{check_no_rhp_zeros, scan_imaginary_zeros};

/// Largest tolerated accumulated log-scale of a forward trajectory.
pub const LOG_SCALE_BUDGET: f64 = 1e5;

/// `exp(-DECAY)` is the attenuation the bounded solution must reach before
/// the half-line is truncated.
const DECAY: f64 = 16.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolutionKind {
    Dirichlet,
    Neumann,
    Bounded,
}

/// A trajectory `(φ, φ′)` at the mesh nodes for one spectral parameter.
///
/// Node values are stored as mantissas with a per-node log-scale:
/// `φ(y_j) = u[j] · exp(log_scale[j])`. `v[j]` is the right limit `φ′(y_j⁺)`.
/// Bounded solutions are normalised so that `u[0] = 1`, `log_scale[0] = 0`.
#[derive(Clone, Debug)]
pub struct SpectralSolution {
    pub xi: C64,
    pub kind: SolutionKind,
    pub mesh: Arc<Mesh>,
    pub u: Vec<C64>,
    pub v: Vec<C64>,
    pub log_scale: Vec<f64>,
}

impl SpectralSolution {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// `φ(y_j)`.
    pub fn phi(&self, j: usize) -> C64 {
        self.u[j] * self.log_scale[j].exp()
    }

    /// `φ′(y_j⁺)`.
    pub fn dphi(&self, j: usize) -> C64 {
        self.v[j] * self.log_scale[j].exp()
    }

    /// `ln |φ(y_j)|`, finite even where `φ` itself would overflow.
    pub fn log_abs_phi(&self, j: usize) -> f64 {
        self.u[j].norm().ln() + self.log_scale[j]
    }

    /// `(φ(y), φ′(y⁺))` at an arbitrary height in `[0, y_max]`.
    pub fn eval(&self, y: f64) -> (C64, C64) {
        let s = self.eval_scaled(y);
        let f = s.log_scale.exp();
        (s.u * f, s.v * f)
    }

    pub(crate) fn eval_scaled(&self, y: f64) -> ScaledState {
        let j = match self.mesh.node_index(y) {
            Some(j) => {
                return ScaledState { u: self.u[j], v: self.v[j], log_scale: self.log_scale[j] };
            }
            None => self.mesh.locate(y),
        };
        if self.kind == SolutionKind::Bounded {
            // The decaying solution is only stable backwards: start from the
            // left limit at the cell's right node.
            let k = j + 1;
            let w = self.mesh.atoms[k];
            let v = self.v[k] - self.xi * self.xi * w * self.u[k];
            let mut s = ScaledState { u: self.u[k], v, log_scale: self.log_scale[k] };
            s.apply(&cell_matrix(&self.mesh.cells[j], self.xi, y - self.mesh.nodes[k]));
            return s;
        }
        let mut s = ScaledState { u: self.u[j], v: self.v[j], log_scale: self.log_scale[j] };
        s.apply(&cell_matrix(&self.mesh.cells[j], self.xi, y - self.mesh.nodes[j]));
        s
    }

    /// Rogers function `ψ = −½ φ′(0⁺) + ½ a({0}) ξ²` of a bounded solution.
    pub fn psi(&self) -> C64 {
        -0.5 * self.v[0] / self.u[0] + 0.5 * self.mesh.atoms[0] * self.xi * self.xi
    }
}

fn check_budget(xi: C64, log_scale: f64) -> Result<()> {
    if log_scale.abs() > LOG_SCALE_BUDGET || !log_scale.is_finite() {
        return Err(Error::Overflow { xi: format!("{xi}"), log_scale });
    }
    Ok(())
}

/// Forward integration from `(u, v)` given at `0⁺`.
fn forward(mesh: &Arc<Mesh>, xi: C64, u0: C64, v0: C64, kind: SolutionKind) -> Result<SpectralSolution> {
    let n = mesh.nodes.len();
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut logs = Vec::with_capacity(n);
    let mut s = ScaledState::new(u0, v0);
    u.push(s.u);
    v.push(s.v);
    logs.push(s.log_scale);
    let xi2 = xi * xi;
    for j in 0..mesh.n_cells() {
        s.apply(&cell_matrix(&mesh.cells[j], xi, mesh.width(j)));
        let w = mesh.atoms[j + 1];
        if w != 0.0 {
            s.jump(xi2 * w);
        }
        check_budget(xi, s.log_scale)?;
        u.push(s.u);
        v.push(s.v);
        logs.push(s.log_scale);
    }
    Ok(SpectralSolution { xi, kind, mesh: Arc::clone(mesh), u, v, log_scale: logs })
}

/// Fundamental solutions `(φᴰ, φᴺ)` with `φᴰ(0) = 0, φᴰ′(0⁺) = 1` and
/// `φᴺ(0) = 1, φᴺ′(0⁺) = a({0}) ξ²`.
pub fn solve_fundamental(mesh: &Arc<Mesh>, xi: C64) -> Result<(SpectralSolution, SpectralSolution)> {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let d = forward(mesh, xi, zero, one, SolutionKind::Dirichlet)?;
    let n = forward(mesh, xi, one, mesh.atoms[0] * xi * xi, SolutionKind::Neumann)?;
    Ok((d, n))
}

/// Bounded-solution data `(u, v)` at the top node of the mesh.
fn terminal_state(mesh: &Mesh, xi: C64) -> (C64, C64) {
    match mesh.terminal {
        Terminal::Dirichlet => (C64::new(0.0, 0.0), C64::new(-1.0, 0.0)),
        Terminal::Tail { a, b } => (C64::new(1.0, 0.0), tail_exponent(xi, a, b)),
    }
}

/// Decay rate `λ` of the bounded solution `e^{λy}` for frozen coefficients.
/// The roots are `−iξb ± ξ√a`; the bounded one has the smaller real part.
fn tail_exponent(xi: C64, a: f64, b: f64) -> C64 {
    let root = if xi.re < 0.0 { -xi } else { xi };
    C64::new(0.0, -1.0) * xi * b - root * a.max(0.0).sqrt()
}

/// The bounded solution `φ_ξ` on a given mesh, by backward integration from
/// the mesh's terminal condition, normalised to `φ_ξ(0) = 1`.
///
/// Works for any complex `ξ`; at `−ξ̄` it returns the conjugate of the
/// solution at `ξ`. Backward integration follows the
/// decaying solution, so the log-scale only records attenuation and is not
/// subject to [`LOG_SCALE_BUDGET`].
pub fn solve_bounded_on(mesh: &Arc<Mesh>, xi: C64) -> Result<SpectralSolution> {
    let n = mesh.nodes.len();
    let mut u = vec![C64::new(0.0, 0.0); n];
    let mut v = vec![C64::new(0.0, 0.0); n];
    let mut logs = vec![0.0; n];
    let (ut, vt) = terminal_state(mesh, xi);
    let mut s = ScaledState::new(ut, vt);
    u[n - 1] = s.u;
    v[n - 1] = s.v;
    logs[n - 1] = s.log_scale;
    let xi2 = xi * xi;
    for j in (0..mesh.n_cells()).rev() {
        let w = mesh.atoms[j + 1];
        if w != 0.0 {
            s.jump(-xi2 * w);
        }
        s.apply(&cell_matrix(&mesh.cells[j], xi, -mesh.width(j)));
        u[j] = s.u;
        v[j] = s.v;
        logs[j] = s.log_scale;
    }
    let u0 = u[0];
    if u0.norm() == 0.0 || !u0.is_finite() {
        return Err(Error::InvalidArgument(format!("bounded solution vanishes at y = 0 for xi = {xi}")));
    }
    let l0 = logs[0];
    for j in 0..n {
        u[j] /= u0;
        v[j] /= u0;
        logs[j] -= l0;
    }
    Ok(SpectralSolution { xi, kind: SolutionKind::Bounded, mesh: Arc::clone(mesh), u, v, log_scale: logs })
}

/// `φ_ξ(y_j)` alone, without storing the trajectory (the hot path of kernel
/// sweeps).
pub fn bounded_value_at(mesh: &Mesh, xi: C64, j: usize) -> Result<C64> {
    let (ut, vt) = terminal_state(mesh, xi);
    let mut s = ScaledState::new(ut, vt);
    let xi2 = xi * xi;
    let mut at_j = s;
    for k in (0..mesh.n_cells()).rev() {
        let w = mesh.atoms[k + 1];
        if w != 0.0 {
            s.jump(-xi2 * w);
        }
        s.apply(&cell_matrix(&mesh.cells[k], xi, -mesh.width(k)));
        if k == j {
            at_j = s;
        }
    }
    if s.u.norm() == 0.0 || !s.u.is_finite() {
        return Err(Error::InvalidArgument(format!("bounded solution vanishes at y = 0 for xi = {xi}")));
    }
    Ok(at_j.u / s.u * (at_j.log_scale - s.log_scale).exp())
}

/// `ψ` through the fundamental solutions: the combination `φᴺ − 2ψφᴰ` that
/// satisfies the terminal condition at the top of the mesh. For a Dirichlet
/// top this is `½ φᴺ(R)/φᴰ(R)`.
pub fn psi_ratio_limit(mesh: &Arc<Mesh>, xi: C64) -> Result<C64> {
    let (d, n) = solve_fundamental(mesh, xi)?;
    let k = mesh.nodes.len() - 1;
    let rel = (n.log_scale[k] - d.log_scale[k]).exp();
    let (un, vn, ud, vd) = (n.u[k] * rel, n.v[k] * rel, d.u[k], d.v[k]);
    let value = match mesh.terminal {
        Terminal::Dirichlet => 0.5 * un / ud,
        Terminal::Tail { a, b } => {
            let lambda = tail_exponent(xi, a, b);
            (vn - lambda * un) / (2.0 * (vd - lambda * ud))
        }
    };
    Ok(value)
}

/// Controls for the automatic mesh used by [`solve_bounded`] and the kernel
/// sweeps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Change in `φ_ξ` and `ψ` below which doubling the truncation height
    /// stops.
    pub tol: f64,
    /// Cells in the graded part of the mesh.
    pub cells: usize,
    /// Geometric grading ratio near `y = 0`.
    pub grading: f64,
    /// Growth ratio of cells beyond the graded part (half-line only).
    pub far_ratio: f64,
    /// Truncation heights are clipped to `[1, max_height]`.
    pub max_height: f64,
    pub max_doublings: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-6, cells: 800, grading: 1.05, far_ratio: 1.05, max_height: 1e4, max_doublings: 6 }
    }
}

/// Height at which `ξ ∫₀^Y √a` reaches the decay target, clipped to
/// `[1, max_height]`.
pub fn decay_height(spec: &OperatorSpec, xi: f64, max_height: f64) -> f64 {
    let target = DECAY / xi;
    let mut integral = 0.0;
    let mut y = 1e-9;
    let mut f = spec.a_density.eval(y).max(0.0).sqrt();
    while y < max_height {
        let y1 = (y * 1.02).min(max_height);
        let f1 = spec.a_density.eval(y1).max(0.0).sqrt();
        integral += 0.5 * (f + f1) * (y1 - y);
        y = y1;
        f = f1;
        if integral >= target {
            break;
        }
    }
    y.max(1.0)
}

/// Mesh for the bounded problem at all `ξ ≥ xi_min`, with the given heights
/// among its nodes. On the half-line the truncation height is doubled until
/// `ψ(xi_min)` and `φ_{xi_min}` at the probe heights change by less than
/// `opts.tol`.
pub fn prepare_mesh(spec: &OperatorSpec, xi_min: f64, required: &[f64], opts: &SolverOptions) -> Result<Arc<Mesh>> {
    if !(xi_min > 0.0) {
        return Err(Error::InvalidArgument(format!("xi_min must be positive, got {xi_min}")));
    }
    let mut required: Vec<f64> = required.to_vec();
    required.extend(spec.a_density.breakpoints());
    required.extend(spec.b.breakpoints());
    let structure = required.iter().copied().chain(spec.atoms.iter().map(|a| a.y)).fold(0.0f64, f64::max);
    let build = |y_max: f64| -> Result<Arc<Mesh>> {
        let y_active = y_max.min(structure.max(0.5) * 2.0).max(y_max.min(1.0));
        let plan = if spec.is_piecewise_constant() {
            MeshPlan {
                y_active: y_max,
                y_max,
                cells: 1,
                grading: 1.0,
                far_ratio: opts.far_ratio,
                required: required.clone(),
            }
        } else {
            MeshPlan {
                y_active,
                y_max,
                cells: opts.cells,
                grading: opts.grading,
                far_ratio: opts.far_ratio,
                required: required.clone(),
            }
        };
        Ok(Arc::new(build_mesh_with(spec, &plan)?))
    };

    if let crate::operators::Height::Finite(r) = spec.height {
        return build(r);
    }
    if let Some(yc) = spec.constant_beyond() {
        // Exact frozen tail: any height above the last structure will do.
        return build((1.5 * yc.max(structure)).max(1.0));
    }
    let mut y_max = decay_height(spec, xi_min, opts.max_height).max(2.0 * structure);
    let xi = C64::new(xi_min, 0.0);
    let mut mesh = build(y_max)?;
    let mut sol = solve_bounded_on(&mesh, xi)?;
    let mut change = f64::INFINITY;
    for _ in 0..opts.max_doublings {
        let next_mesh = build(2.0 * y_max)?;
        let next = solve_bounded_on(&next_mesh, xi)?;
        let mut probes = required.clone();
        probes.push(y_max / 8.0);
        probes.push(y_max / 4.0);
        change = (next.psi() - sol.psi()).norm() / next.psi().norm().max(1e-300);
        for &y in &probes {
            change = change.max((next.eval(y).0 - sol.eval(y).0).norm());
        }
        mesh = next_mesh;
        sol = next;
        y_max *= 2.0;
        if change < opts.tol {
            return Ok(mesh);
        }
        if y_max > 2.0 * opts.max_height {
            break;
        }
    }
    Err(Error::TruncationNotConverged { xi: xi_min, change, height: y_max })
}

/// The bounded solution `φ_ξ` for real `ξ > 0` on an automatically chosen mesh.
pub fn solve_bounded(spec: &OperatorSpec, xi: f64, opts: &SolverOptions) -> Result<SpectralSolution> {
    let mesh = prepare_mesh(spec, xi, &[], opts)?;
    solve_bounded_on(&mesh, C64::new(xi, 0.0))
}

/// `ψ(ξ)` for real `ξ > 0`.
pub fn compute_psi(spec: &OperatorSpec, xi: f64, opts: &SolverOptions) -> Result<C64> {
    Ok(solve_bounded(spec, xi, opts)?.psi())
}

/// Which formula produced a [`RogersSample`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsiSource {
    BoundaryDerivative,
    RatioLimit,
    LevyRepresentation,
}

/// Values of `ψ` on a grid of spectral parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RogersSample {
    pub xi_grid: Vec<C64>,
    pub psi: Vec<C64>,
    pub source: PsiSource,
}

/// `ψ` on `xi_grid` (any `Re ξ > 0`) on one mesh.
pub fn rogers_sample(mesh: &Arc<Mesh>, xi_grid: &[C64], source: PsiSource, exec: Execution) -> Result<RogersSample> {
    let psi = try_map_indexed(exec, xi_grid.len(), |k| match source {
        PsiSource::RatioLimit => psi_ratio_limit(mesh, xi_grid[k]),
        _ => solve_bounded_on(mesh, xi_grid[k]).map(|s| s.psi()),
    })?;
    Ok(RogersSample { xi_grid: xi_grid.to_vec(), psi, source })
}

/// Worst violations of the shape invariants of a bounded solution along the
/// mesh: `|φ|²` nonincreasing and convex, `|φ′|` nonincreasing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeInvariants {
    pub max_increase: f64,
    pub max_concavity: f64,
    pub max_derivative_increase: f64,
}

impl ShapeInvariants {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_increase <= tol && self.max_concavity <= tol && self.max_derivative_increase <= tol
    }
}

/// Invariant check on a bounded solution. Convexity of `|φ|²` is tested on
/// its exact right derivative `2 Re(φ̄ φ′)` at the nodes (chord slopes on the
/// finest cells are dominated by rounding), relative to the largest slope;
/// the monotonicity checks are relative to `|φ(0)| = 1` and `max |φ′|`.
pub fn shape_invariants(sol: &SpectralSolution) -> ShapeInvariants {
    let sq: Vec<f64> = (0..sol.len()).map(|j| sol.phi(j).norm_sqr()).collect();
    let slopes: Vec<f64> = (0..sol.len()).map(|j| 2.0 * (sol.phi(j).conj() * sol.dphi(j)).re).collect();
    let dn: Vec<f64> = (0..sol.len()).map(|j| sol.dphi(j).norm()).collect();
    let max_increase = sq.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let slope_scale = slopes.iter().fold(1e-300_f64, |m, s| m.max(s.abs()));
    let max_concavity = slopes.windows(2).map(|w| (w[0] - w[1]) / slope_scale).fold(0.0, f64::max);
    let d_scale = dn.iter().fold(1e-300_f64, |m, d| m.max(*d));
    let max_derivative_increase = dn.windows(2).map(|w| (w[1] - w[0]) / d_scale).fold(0.0, f64::max);
    ShapeInvariants { max_increase, max_concavity, max_derivative_increase }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{build_mesh, Atom, Height, Profile};
    use approx::assert_relative_eq;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn strip_fundamental_solutions() {
        let spec = OperatorSpec::strip(1.0, 1.0).unwrap();
        let mesh = Arc::new(build_mesh(&spec, 1.0, 8, 1.0).unwrap());
        let (d, n) = solve_fundamental(&mesh, c(1.0)).unwrap();
        assert_relative_eq!(d.phi(8).re, 1.0f64.sinh(), max_relative = 1e-13);
        assert_relative_eq!(n.phi(8).re, 1.0f64.cosh(), max_relative = 1e-13);
    }

    #[test]
    fn zero_frequency_fundamentals_are_linear() {
        let spec = OperatorSpec::homogeneous(1.0, 0.5, 0.7).unwrap();
        let mesh = Arc::new(build_mesh(&spec, 3.0, 30, 1.1).unwrap());
        let (d, n) = solve_fundamental(&mesh, c(0.0)).unwrap();
        for j in 0..mesh.nodes.len() {
            assert_relative_eq!(d.phi(j).re, mesh.nodes[j], epsilon = 1e-13);
            assert_relative_eq!(n.phi(j).re, 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn atom_neumann_solution_kinks() {
        let spec = OperatorSpec::atom(1.0, 1.0).unwrap();
        let mesh = Arc::new(build_mesh(&spec, 2.0, 4, 1.0).unwrap());
        let (_, n) = solve_fundamental(&mesh, c(1.0)).unwrap();
        let j = mesh.node_index(1.0).unwrap();
        assert_relative_eq!(n.phi(j).re, 1.0, epsilon = 1e-14);
        assert_relative_eq!(n.dphi(j).re, 1.0, epsilon = 1e-14);
        assert_relative_eq!(n.phi(mesh.nodes.len() - 1).re, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn bounded_solution_examples() {
        let opts = SolverOptions::default();
        let strip = OperatorSpec::strip(1.0, 1.0).unwrap();
        let s = solve_bounded(&strip, 2.0, &opts).unwrap();
        assert_relative_eq!(s.eval(0.5).0.re, 1.0f64.sinh() / 2.0f64.sinh(), max_relative = 1e-12);
        assert_relative_eq!(s.eval(0.5).0.re, 0.324027, epsilon = 1e-6);

        let half = OperatorSpec::half_plane(1.0).unwrap();
        let s = solve_bounded(&half, 1.0, &opts).unwrap();
        assert_relative_eq!(s.eval(1.0).0.re, (-1.0f64).exp(), max_relative = 1e-12);

        let atom = OperatorSpec::atom(1.0, 1.0).unwrap();
        let s = solve_bounded(&atom, 1.0, &opts).unwrap();
        assert_relative_eq!(s.eval(1.0).0.re, 0.5, epsilon = 1e-12);
        assert_relative_eq!(s.eval(0.5).0.re, 0.75, epsilon = 1e-12);
        assert_relative_eq!(s.psi().re, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn psi_examples() {
        let opts = SolverOptions::default();
        let half = OperatorSpec::half_plane(1.0).unwrap();
        assert_relative_eq!(compute_psi(&half, 3.0, &opts).unwrap().re, 1.5, max_relative = 1e-12);
        let strip = OperatorSpec::strip(1.0, 1.0).unwrap();
        assert_relative_eq!(compute_psi(&strip, 1.0, &opts).unwrap().re, 0.5 / 1.0f64.tanh(), max_relative = 1e-12);
        let atom = OperatorSpec::atom(2.0, 0.5).unwrap();
        assert_relative_eq!(compute_psi(&atom, 1.0, &opts).unwrap().re, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn ratio_limit_agrees_with_boundary_derivative() {
        let spec = OperatorSpec::new(
            Height::Infinite,
            Profile::power(1.0, 0.5),
            Profile::power(-0.7, -0.2),
            vec![Atom { y: 0.0, w: 0.4 }, Atom { y: 0.8, w: 0.3 }],
        )
        .unwrap();
        let mesh = prepare_mesh(&spec, 0.5, &[], &SolverOptions::default()).unwrap();
        for xi in [0.5, 1.0, 3.0] {
            let a = solve_bounded_on(&mesh, c(xi)).unwrap().psi();
            let b = psi_ratio_limit(&mesh, c(xi)).unwrap();
            assert_relative_eq!((a - b).norm() / a.norm(), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn neumann_dirichlet_decomposition() {
        let spec = OperatorSpec::new(
            Height::Finite(2.0),
            Profile::power(1.5, 0.3),
            Profile::constant(0.6),
            vec![Atom { y: 0.0, w: 0.5 }, Atom { y: 1.0, w: 0.25 }],
        )
        .unwrap();
        let mesh = prepare_mesh(&spec, 1.0, &[], &SolverOptions::default()).unwrap();
        let xi = c(1.3);
        let phi = solve_bounded_on(&mesh, xi).unwrap();
        let psi = phi.psi();
        let (d, n) = solve_fundamental(&mesh, xi).unwrap();
        for j in 0..mesh.nodes.len() {
            let r = n.phi(j) - 2.0 * psi * d.phi(j) - phi.phi(j);
            assert!(r.norm() < 1e-9, "residual {r} at node {j}");
        }
    }

    #[test]
    fn conjugation_symmetry() {
        let spec = OperatorSpec::homogeneous(1.0, 1.0, 0.8).unwrap();
        let mesh = prepare_mesh(&spec, 0.7, &[], &SolverOptions::default()).unwrap();
        let xi = C64::new(0.7, 0.3);
        let a = solve_bounded_on(&mesh, xi).unwrap();
        let b = solve_bounded_on(&mesh, -xi.conj()).unwrap();
        for j in (0..a.len()).step_by(37) {
            assert_relative_eq!((a.phi(j) - b.phi(j).conj()).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn bounded_invariants_hold() {
        let spec = OperatorSpec::homogeneous(1.0, 1.0, 0.8).unwrap();
        let mesh = prepare_mesh(&spec, 0.5, &[], &SolverOptions::default()).unwrap();
        for xi in [0.5, 2.0, 10.0] {
            let s = solve_bounded_on(&mesh, c(xi)).unwrap();
            let inv = shape_invariants(&s);
            assert!(inv.holds(1e-9), "{inv:?} at xi={xi}");
        }
    }

    #[test]
    fn large_frequencies_do_not_overflow() {
        let spec = OperatorSpec::strip(1.0, 1.0).unwrap();
        let mesh = prepare_mesh(&spec, 1.0, &[0.5], &SolverOptions::default()).unwrap();
        let s = solve_bounded_on(&mesh, c(2000.0)).unwrap();
        assert_relative_eq!(s.psi().re, 1000.0, max_relative = 1e-12);
        assert_relative_eq!(s.log_abs_phi(mesh.node_index(0.5).unwrap()), -1000.0, max_relative = 1e-12);
        let (d, _) = solve_fundamental(&mesh, c(2000.0)).unwrap();
        assert_relative_eq!(
            d.log_abs_phi(mesh.nodes.len() - 1),
            2000.0 - 2.0f64.ln() - 2000.0f64.ln(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn single_value_matches_full_trajectory() {
        let spec = OperatorSpec::homogeneous(1.0, -0.5, 1.3).unwrap();
        let mesh = prepare_mesh(&spec, 0.3, &[0.7], &SolverOptions::default()).unwrap();
        let j = mesh.node_index(0.7).unwrap();
        for xi in [0.0, 0.3, 5.0, 80.0] {
            let full = solve_bounded_on(&mesh, c(xi)).unwrap().phi(j);
            let one = bounded_value_at(&mesh, c(xi), j).unwrap();
            assert!((full - one).norm() <= 1e-15 * full.norm().max(1e-300), "{full} vs {one}");
        }
    }

    #[test]
    fn zero_frequency_gives_the_mass() {
        let strip = OperatorSpec::strip(1.0, 2.0).unwrap();
        let mesh = prepare_mesh(&strip, 1.0, &[0.5], &SolverOptions::default()).unwrap();
        let j = mesh.node_index(0.5).unwrap();
        assert_relative_eq!(bounded_value_at(&mesh, c(0.0), j).unwrap().re, 0.75, max_relative = 1e-14);
    }

    #[test]
    fn overflow_budget_is_enforced() {
        let spec = OperatorSpec::strip(1.0, 1.0).unwrap();
        let mesh = prepare_mesh(&spec, 1.0, &[], &SolverOptions::default()).unwrap();
        let err = solve_fundamental(&mesh, c(2e5)).unwrap_err();
        assert!(matches!(err, Error::Overflow { .. }));
    }
}
