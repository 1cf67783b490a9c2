//! Zeros of `ξ ↦ φᴰ_ξ(y)`.
//!
//! On the imaginary axis `ξ = iζ` the ODE has real coefficients, so
//! `φᴰ_{iζ}(y)` is real and its zeros are sign changes in `ζ`. In the open
//! right half-plane `φᴰ_ξ(y)` has no zeros; [`check_no_rhp_zeros`] measures
//! how far it stays from 0 on a grid.

use std::sync::Arc;

use num_complex::Complex64 as C64;

use super::{solve_fundamental, SolutionKind};
use crate::error::{Error, Result};
use crate::operators::Mesh;

/// `φᴰ_ξ(y)` as a scaled state (mantissa, log-scale).
fn dirichlet_at(mesh: &Arc<Mesh>, xi: C64, y: f64) -> Result<(C64, f64)> {
    let (d, _) = solve_fundamental(mesh, xi)?;
    debug_assert_eq!(d.kind, SolutionKind::Dirichlet);
    let s = d.eval_scaled(y);
    Ok((s.u, s.log_scale))
}

/// Real zeros of `ζ ↦ φᴰ_{iζ}(y)` in `[lo, hi]`, bracketed on `n_brackets`
/// uniform subintervals and refined by bisection to `1e-13` relative.
pub fn scan_imaginary_zeros(mesh: &Arc<Mesh>, y: f64, lo: f64, hi: f64, n_brackets: usize) -> Result<Vec<f64>> {
    if !(y > 0.0 && y <= mesh.y_max()) {
        return Err(Error::InvalidArgument(format!("y = {y} outside (0, {}]", mesh.y_max())));
    }
    if !(hi > lo) || n_brackets == 0 {
        return Err(Error::InvalidArgument("empty zeta range".into()));
    }
    let f = |zeta: f64| -> Result<f64> {
        let (m, _) = dirichlet_at(mesh, C64::new(0.0, zeta), y)?;
        Ok(m.re)
    };
    let mut zeros = Vec::new();
    let step = (hi - lo) / n_brackets as f64;
    let mut a = lo;
    let mut fa = f(a)?;
    for k in 1..=n_brackets {
        let b = lo + step * k as f64;
        let fb = f(b)?;
        if fa == 0.0 {
            if zeros.last().is_none_or(|&z: &f64| (z - a).abs() > 1e-12 * a.abs().max(1.0)) {
                zeros.push(a);
            }
        } else if fa * fb < 0.0 {
            let (mut l, mut r, mut fl) = (a, b, fa);
            while r - l > 1e-13 * r.abs().max(1.0) {
                let m = 0.5 * (l + r);
                let fm = f(m)?;
                if fm == 0.0 {
                    l = m;
                    r = m;
                    break;
                }
                if fl * fm < 0.0 {
                    r = m;
                } else {
                    l = m;
                    fl = fm;
                }
            }
            zeros.push(0.5 * (l + r));
        }
        a = b;
        fa = fb;
    }
    Ok(zeros)
}

/// `min |φᴰ_ξ(y)|` over the grid of spectral parameters.
pub fn check_no_rhp_zeros(mesh: &Arc<Mesh>, y: f64, grid: &[C64]) -> Result<f64> {
    let mut best = f64::INFINITY;
    for &xi in grid {
        let (m, log) = dirichlet_at(mesh, xi, y)?;
        best = best.min(m.norm() * log.exp());
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{build_mesh, OperatorSpec};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn strip_mesh() -> Arc<Mesh> {
        let spec = OperatorSpec::strip(1.0, 2.0).unwrap();
        Arc::new(build_mesh(&spec, 2.0, 4, 1.0).unwrap())
    }

    #[test]
    fn sine_zeros_on_the_imaginary_axis() {
        let mesh = strip_mesh();
        let z = scan_imaginary_zeros(&mesh, 1.0, 0.5, 10.0, 40).unwrap();
        assert_eq!(z.len(), 3);
        for (k, zeta) in z.iter().enumerate() {
            assert_relative_eq!(*zeta, (k + 1) as f64 * PI, max_relative = 1e-12);
        }
        let z = scan_imaginary_zeros(&mesh, 0.5, 0.5, 10.0, 40).unwrap();
        assert_eq!(z.len(), 1);
        assert_relative_eq!(z[0], 2.0 * PI, max_relative = 1e-12);
    }

    #[test]
    fn no_zero_at_the_origin() {
        let mesh = strip_mesh();
        let z = scan_imaginary_zeros(&mesh, 1.0, 0.0, 3.0, 10).unwrap();
        assert!(z.is_empty());
    }

    #[test]
    fn right_half_plane_minimum() {
        let mesh = strip_mesh();
        let m = check_no_rhp_zeros(&mesh, 1.0, &[C64::new(1.0, 1.0)]).unwrap();
        let exact = (C64::new(1.0, 1.0).sinh() / C64::new(1.0, 1.0)).norm();
        assert_relative_eq!(m, exact, max_relative = 1e-13);
        assert_relative_eq!(m, 1.0222, epsilon = 5e-4);
    }
}
