//! Splitting the spectral problem at a height `Ř` and the factorisation
//!
//! ```text
//! φ_ξ(Ř) = 1/φ̌ᴰ_ξ(Ř) · 1/(2ψ̌(ξ) + 2ψ̂(ξ))
//! ```
//!
//! The lower half `[0, Ř)` is reflected (`ǎ(dy) = a(Ř − dy)`,
//! `b̌(y) = −b(Ř − y)`), the upper half `[Ř, R)` is translated to start at 0.
//! The verifier works on one mesh of the full problem and cuts it at the node
//! `Ř`, so all three sides of the identity are evaluated on the same
//! discretisation and agree up to rounding.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::analysis::rogers::{check_rogers, psi_at_zero, RogersVerdict};
use crate::error::{Error, Result};
use crate::operators::{Atom, Height, Mesh, OperatorSpec, Profile};
use crate::par::{try_map_indexed, Execution};
use crate::spectral::{
    prepare_mesh, psi_ratio_limit, solve_bounded_on, solve_fundamental, PsiSource, RogersSample, SolverOptions,
};

/// The two halves of a spec split at `check_r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpecs {
    /// Reflected lower half on `[0, Ř)`.
    pub check_spec: OperatorSpec,
    /// Translated upper half on `[0, R − Ř)`.
    pub hat_spec: OperatorSpec,
    pub check_r: f64,
}

fn remap(p: &Profile, origin: f64, direction: f64, scale: f64) -> Profile {
    if let Some(c) = p.as_constant() {
        return Profile::constant(scale * c);
    }
    Profile::Remap { inner: Box::new(p.clone()), origin, direction, scale }
}

/// Splits `spec` at `check_r ∈ (0, R)`. An atom at `check_r` itself is
/// rejected; an atom at 0 belongs to neither half.
pub fn split(spec: &OperatorSpec, check_r: f64) -> Result<SplitSpecs> {
    let r = spec.height.value();
    if !(check_r > 0.0 && check_r < r) {
        return Err(Error::InvalidArgument(format!("split point {check_r} outside (0, {r})")));
    }
    if spec.atoms.iter().any(|a| (a.y - check_r).abs() <= 1e-12 * check_r) {
        return Err(Error::InvalidArgument(format!("atom at the split point {check_r}")));
    }
    let check_atoms =
        spec.atoms.iter().filter(|a| a.y > 0.0 && a.y < check_r).map(|a| Atom { y: check_r - a.y, w: a.w }).collect();
    let check_spec = OperatorSpec::new(
        Height::Finite(check_r),
        remap(&spec.a_density, check_r, -1.0, 1.0),
        remap(&spec.b, check_r, -1.0, -1.0),
        check_atoms,
    )?;
    let hat_height = match spec.height {
        Height::Finite(r) => Height::Finite(r - check_r),
        Height::Infinite => Height::Infinite,
    };
    let hat_atoms = spec.atoms.iter().filter(|a| a.y > check_r).map(|a| Atom { y: a.y - check_r, w: a.w }).collect();
    let hat_spec = OperatorSpec::new(
        hat_height,
        remap(&spec.a_density, check_r, 1.0, 1.0),
        remap(&spec.b, check_r, 1.0, 1.0),
        hat_atoms,
    )?;
    Ok(SplitSpecs { check_spec, hat_spec, check_r })
}

/// `ψ̌(0⁺)` of the lower half, by Richardson extrapolation of
/// `½ φ̌ᴺ_ξ(Ř)/φ̌ᴰ_ξ(Ř)` as `ξ → 0⁺`.
pub fn psi_check_at_zero(split: &SplitSpecs) -> Result<f64> {
    let mesh = prepare_mesh(&split.check_spec, 1.0, &[], &SolverOptions::default())?;
    let h = 0.05 / split.check_r.max(1.0);
    let (est, _) = psi_at_zero(&|xi| psi_ratio_limit(&mesh, xi), h, 5)?;
    Ok(est.re)
}

/// `n` log-spaced frequencies on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|k| lo * (step * k as f64).exp()).collect()
}

/// 60 log-spaced frequencies on `[0.05, 20]`.
pub fn default_xi_grid() -> Vec<f64> {
    log_grid(0.05, 20.0, 60)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub check_r: f64,
    pub xi_grid: Vec<f64>,
    /// `φ_ξ(Ř)`.
    pub lhs: Vec<C64>,
    /// `1/φ̌ᴰ_ξ(Ř)`.
    pub factor1: Vec<C64>,
    /// `1/(2ψ̌(ξ) + 2ψ̂(ξ))`.
    pub factor2: Vec<C64>,
    pub psi_check: Vec<C64>,
    pub psi_hat: Vec<C64>,
    /// `|lhs − factor1·factor2| / |lhs|`.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// Relative residual of `φ(y) = φ(Ř)φ̌ᴺ(Ř − y) − φ′(Ř)φ̌ᴰ(Ř − y)` at `y = 0`.
    pub boundary_residuals: Vec<f64>,
    /// The same at `y = Ř/2`.
    pub interior_residuals: Vec<f64>,
    pub max_boundary_residual: f64,
    pub max_interior_residual: f64,
    pub psi_check_at_zero: f64,
    pub rogers_check: RogersVerdict,
    pub rogers_hat: RogersVerdict,
}

impl FactorizationReport {
    /// Every residual at most `tol`, and both halves Rogers functions.
    pub fn pass(&self, tol: f64) -> bool {
        self.max_residual <= tol
            && self.max_boundary_residual <= tol
            && self.max_interior_residual <= tol
            && self.rogers_check.pass
            && self.rogers_hat.pass
    }
}

struct Point {
    lhs: C64,
    factor1: C64,
    factor2: C64,
    psi_check: C64,
    psi_hat: C64,
    boundary: f64,
    interior: f64,
}

struct Cut {
    full: Arc<Mesh>,
    check: Arc<Mesh>,
    hat: Arc<Mesh>,
    /// Node of `Ř` in the full mesh.
    j: usize,
    /// Node of `Ř/2` in the full mesh.
    i: usize,
}

fn evaluate(cut: &Cut, xi: f64) -> Result<Point> {
    let xi = C64::new(xi, 0.0);
    let phi = solve_bounded_on(&cut.full, xi)?;
    let (d, n) = solve_fundamental(&cut.check, xi)?;
    let psi_check = solve_bounded_on(&cut.check, xi)?.psi();
    let psi_hat = solve_bounded_on(&cut.hat, xi)?.psi();

    let (j, i) = (cut.j, cut.i);
    let top = cut.check.nodes.len() - 1;
    let lhs = phi.phi(j);
    let factor1 = (-d.log_scale[top]).exp() / d.u[top];
    let factor2 = 1.0 / (2.0 * psi_check + 2.0 * psi_hat);

    // Lower-half solutions at Ř − y, from the Ř-end of the reflected mesh.
    let relation = |z: usize| -> C64 { phi.phi(j) * n.phi(z) - phi.dphi(j) * d.phi(z) };
    let boundary = (relation(top) - 1.0).norm();
    let target = phi.phi(i);
    let interior = (relation(j - i) - target).norm() / target.norm();
    Ok(Point { lhs, factor1, factor2, psi_check, psi_hat, boundary, interior })
}

/// Checks the factorisation of `φ_ξ(Ř)` on `xi_grid` (positive), together
/// with the underlying connection identity at `y = 0` and `y = Ř/2` and the
/// Rogers property of both halves.
pub fn verify_factorization(
    spec: &OperatorSpec,
    check_r: f64,
    xi_grid: &[f64],
    opts: &SolverOptions,
    exec: Execution,
) -> Result<FactorizationReport> {
    if xi_grid.is_empty() || xi_grid.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::InvalidArgument("frequency grid must be nonempty and positive".into()));
    }
    let halves = split(spec, check_r)?;
    let xi_min = xi_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let full = prepare_mesh(spec, xi_min, &[check_r, 0.5 * check_r], opts)?;
    let j = full.node_index(check_r).ok_or_else(|| Error::InvalidArgument("split point not on the mesh".into()))?;
    let i = full.node_index(0.5 * check_r).expect("required node");
    let cut = Cut { check: Arc::new(full.reflect_prefix(j)), hat: Arc::new(full.suffix(j)), full, j, i };

    let points = try_map_indexed(exec, xi_grid.len(), |k| evaluate(&cut, xi_grid[k]))?;
    let residuals: Vec<f64> = points.iter().map(|p| (p.lhs - p.factor1 * p.factor2).norm() / p.lhs.norm()).collect();
    let boundary_residuals: Vec<f64> = points.iter().map(|p| p.boundary).collect();
    let interior_residuals: Vec<f64> = points.iter().map(|p| p.interior).collect();
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let grid: Vec<C64> = xi_grid.iter().map(|&x| C64::new(x, 0.0)).collect();
    let sample = |psi: Vec<C64>| RogersSample { xi_grid: grid.clone(), psi, source: PsiSource::BoundaryDerivative };
    let psi_check: Vec<C64> = points.iter().map(|p| p.psi_check).collect();
    let psi_hat: Vec<C64> = points.iter().map(|p| p.psi_hat).collect();

    Ok(FactorizationReport {
        check_r,
        xi_grid: xi_grid.to_vec(),
        lhs: points.iter().map(|p| p.lhs).collect(),
        factor1: points.iter().map(|p| p.factor1).collect(),
        factor2: points.iter().map(|p| p.factor2).collect(),
        max_residual: max(&residuals),
        max_boundary_residual: max(&boundary_residuals),
        max_interior_residual: max(&interior_residuals),
        residuals,
        boundary_residuals,
        interior_residuals,
        psi_check_at_zero: psi_check_at_zero(&halves)?,
        rogers_check: check_rogers(&sample(psi_check.clone()), 1e-9),
        rogers_hat: check_rogers(&sample(psi_hat.clone()), 1e-9),
        psi_check,
        psi_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn strip_halves_are_strips() {
        let s = split(&OperatorSpec::strip(1.0, 1.0).unwrap(), 0.5).unwrap();
        assert_eq!(s.check_spec, OperatorSpec::strip(1.0, 0.5).unwrap());
        assert_eq!(s.hat_spec, OperatorSpec::strip(1.0, 0.5).unwrap());
    }

    #[test]
    fn half_plane_split() {
        let s = split(&OperatorSpec::homogeneous(1.0, 0.0, 1.0).unwrap(), 1.0).unwrap();
        assert_eq!(s.check_spec, OperatorSpec::strip(1.0, 1.0).unwrap());
        assert_eq!(s.hat_spec, OperatorSpec::half_plane(1.0).unwrap());
    }

    #[test]
    fn drift_is_reflected_and_negated() {
        let b = Profile::Table { points: vec![(0.0, 0.0), (1.0, 1.0)] };
        let spec = OperatorSpec::new(Height::Finite(1.0), Profile::constant(1.0), b, vec![]).unwrap();
        let s = split(&spec, 1.0 - 1e-9).unwrap();
        for y in [0.0, 0.3, 0.8] {
            assert_relative_eq!(s.check_spec.b.eval(y), -(1.0 - 1e-9 - y), epsilon = 1e-12);
        }
    }

    #[test]
    fn atoms_are_moved_and_split_point_checked() {
        let spec = OperatorSpec::new(
            Height::Infinite,
            Profile::zero(),
            Profile::zero(),
            vec![Atom { y: 0.0, w: 2.0 }, Atom { y: 0.5, w: 1.0 }, Atom { y: 2.0, w: 3.0 }],
        )
        .unwrap();
        let s = split(&spec, 1.0).unwrap();
        assert_eq!(s.check_spec.atoms, vec![Atom { y: 0.5, w: 1.0 }]);
        assert_eq!(s.hat_spec.atoms, vec![Atom { y: 1.0, w: 3.0 }]);
        assert!(split(&spec, 0.5).is_err());
        assert!(split(&OperatorSpec::strip(1.0, 1.0).unwrap(), 1.0).is_err());
        assert!(split(&OperatorSpec::strip(1.0, 1.0).unwrap(), 0.0).is_err());
    }

    #[test]
    fn psi_check_at_zero_is_inverse_double_height() {
        let spec = OperatorSpec::homogeneous(1.0, 1.0, 0.8).unwrap();
        for (r, expect) in [(0.25, 2.0), (0.5, 1.0), (1.0, 0.5)] {
            let s = split(&spec, r).unwrap();
            assert_relative_eq!(psi_check_at_zero(&s).unwrap(), expect, max_relative = 1e-6);
        }
    }

    #[test]
    fn strip_closed_forms() {
        let spec = OperatorSpec::strip(1.0, 1.0).unwrap();
        let r = verify_factorization(&spec, 0.5, &[1.0], &SolverOptions::default(), Execution::Sequential).unwrap();
        assert_relative_eq!(r.lhs[0].re, 1.0 / (2.0 * 0.5f64.cosh()), max_relative = 1e-12);
        assert_relative_eq!(r.factor1[0].re, 1.0 / 0.5f64.sinh(), max_relative = 1e-12);
        assert_relative_eq!(1.0 / r.factor2[0].re, 2.0 / 0.5f64.tanh(), max_relative = 1e-12);
        assert!(r.max_residual < 1e-10);
    }

    #[test]
    fn half_plane_closed_forms() {
        let spec = OperatorSpec::half_plane(1.0).unwrap();
        let r = verify_factorization(&spec, 1.0, &[1.0], &SolverOptions::default(), Execution::Sequential).unwrap();
        assert_relative_eq!(r.lhs[0].re, (-1.0f64).exp(), max_relative = 1e-10);
        assert_relative_eq!(r.factor1[0].re, 1.0 / 1.0f64.sinh(), max_relative = 1e-12);
        assert_relative_eq!(1.0 / r.factor2[0].re, 1.0 / 1.0f64.tanh() + 1.0, max_relative = 1e-10);
    }

    #[test]
    fn small_frequency_limit() {
        let spec = OperatorSpec::strip(1.0, 1.0).unwrap();
        let r = verify_factorization(&spec, 0.5, &[1e-4], &SolverOptions::default(), Execution::Sequential).unwrap();
        assert_relative_eq!(r.lhs[0].re, 0.5, epsilon = 1e-6);
        assert_relative_eq!(r.psi_check[0].re, 1.0, epsilon = 1e-6);
        assert_relative_eq!(r.psi_hat[0].re, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn drifted_spec_factorises() {
        let spec = OperatorSpec::homogeneous(1.0, 1.0, 0.8).unwrap();
        let grid = log_grid(0.05, 20.0, 12);
        let r = verify_factorization(&spec, 0.5, &grid, &SolverOptions::default(), Execution::Parallel).unwrap();
        assert!(
            r.pass(1e-8),
            "{} {} {} {:?}",
            r.max_residual,
            r.max_boundary_residual,
            r.max_interior_residual,
            r.rogers_hat
        );
    }
}
