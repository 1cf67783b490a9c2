//! Exact propagation of the frozen-coefficient system
//!
//! ```text
//! u' = v,   v' = ξ²(ā + b²̄) u − 2iξ b̄ v
//! ```
//!
//! across one cell. With `c = ξ²(ā + b²̄)`, `d = −2iξb̄` and
//! `Δ² = c + d²/4 = ξ²(ā + b²̄ − b̄²)` the matrix exponential is
//!
//! ```text
//! exp(hM) = e^{hd/2} [cosh(hΔ) I + h sinhc(hΔ) (M − d/2 I)].
//! ```
//!
//! Growth is split off into a real log-scale so that states never overflow.

use num_complex::Complex64 as C64;

use crate::operators::Cell;

/// A 2×2 complex matrix times `exp(log_scale)`.
#[derive(Clone, Copy, Debug)]
pub struct ScaledMatrix {
    pub m: [[C64; 2]; 2],
    pub log_scale: f64,
}

/// `Δ/ξ`: the square root of the cell's effective diffusivity.
fn root_coefficient(cell: &Cell) -> f64 {
    (cell.a + (cell.b2 - cell.b * cell.b).max(0.0)).max(0.0).sqrt()
}

/// `cosh z` and `sinh(z)/z`, both divided by `exp(shift)`; `Re z ≥ 0`.
fn cosh_sinhc_scaled(z: C64) -> (C64, C64, f64) {
    if z.norm() < 1e-3 {
        let z2 = z * z;
        let ch = 1.0 + z2 * (0.5 + z2 * (1.0 / 24.0 + z2 / 720.0));
        let sc = 1.0 + z2 * (1.0 / 6.0 + z2 * (1.0 / 120.0 + z2 / 5040.0));
        return (ch, sc, 0.0);
    }
    if z.re <= 1.0 {
        return (z.cosh(), z.sinh() / z, 0.0);
    }
    // e^{-z} cosh z = (1 + e^{-2z})/2, e^{-z} sinh z = (1 - e^{-2z})/2; the
    // phase e^{i Im z} stays in the mantissa.
    let e2 = (-2.0 * z).exp();
    let phase = C64::from_polar(1.0, z.im);
    let ch = 0.5 * (1.0 + e2) * phase;
    let sh = 0.5 * (1.0 - e2) * phase;
    (ch, sh / z, z.re)
}

/// Propagator over a cell of signed length `h` (negative for backward steps).
pub fn cell_matrix(cell: &Cell, xi: C64, h: f64) -> ScaledMatrix {
    let c = xi * xi * (cell.a + cell.b2);
    let half_d = C64::new(0.0, -1.0) * xi * cell.b;
    let delta = xi * root_coefficient(cell);
    let mut z = delta * h;
    if z.re < 0.0 || (z.re == 0.0 && z.im < 0.0) {
        z = -z;
    }
    let (ch, sc, shift) = cosh_sinhc_scaled(z);
    let hd = half_d * h;
    let front = C64::from_polar(1.0, hd.im);
    let hs = sc * h;
    let m = [[front * (ch - hs * half_d), front * hs], [front * (hs * c), front * (ch + hs * half_d)]];
    ScaledMatrix { m, log_scale: shift + hd.re }
}

/// Unscaled single-cell step `(u, v) ↦ exp(hM)(u, v)`.
pub fn propagate(state: (C64, C64), cell: &Cell, xi: C64, h: f64) -> (C64, C64) {
    let s = cell_matrix(cell, xi, h);
    let f = s.log_scale.exp();
    let (u, v) = state;
    ((s.m[0][0] * u + s.m[0][1] * v) * f, (s.m[1][0] * u + s.m[1][1] * v) * f)
}

/// A state `(u, v) · exp(log_scale)` kept with `max(|u|, |v|) = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledState {
    pub u: C64,
    pub v: C64,
    pub log_scale: f64,
}

impl ScaledState {
    pub fn new(u: C64, v: C64) -> Self {
        let mut s = ScaledState { u, v, log_scale: 0.0 };
        s.normalise();
        s
    }

    pub fn apply(&mut self, p: &ScaledMatrix) {
        let u = p.m[0][0] * self.u + p.m[0][1] * self.v;
        let v = p.m[1][0] * self.u + p.m[1][1] * self.v;
        self.u = u;
        self.v = v;
        self.log_scale += p.log_scale;
        self.normalise();
    }

    /// `v ↦ v + k u` (an atom jump, `k = ±ξ² w`).
    pub fn jump(&mut self, k: C64) {
        self.v += k * self.u;
        self.normalise();
    }

    fn normalise(&mut self) {
        let s = self.u.norm().max(self.v.norm());
        if s > 0.0 && s.is_finite() {
            self.u /= s;
            self.v /= s;
            self.log_scale += s.ln();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cell(a: f64, b: f64) -> Cell {
        Cell { a, b, b2: b * b }
    }

    #[test]
    fn unit_diffusion_gives_hyperbolic_functions() {
        let (u, v) = propagate((C64::new(0.0, 0.0), C64::new(1.0, 0.0)), &cell(1.0, 0.0), C64::new(1.0, 0.0), 1.0);
        assert_relative_eq!(u.re, 1.0f64.sinh(), max_relative = 1e-14);
        assert_relative_eq!(v.re, 1.0f64.cosh(), max_relative = 1e-14);
        assert!(u.im.abs() < 1e-15 && v.im.abs() < 1e-15);
    }

    #[test]
    fn zero_coefficients_are_inert() {
        let xi = C64::new(3.7, -1.2);
        let (u, v) = propagate((C64::new(1.0, 0.0), C64::new(0.0, 0.0)), &cell(0.0, 0.0), xi, 1.0);
        assert_eq!(u, C64::new(1.0, 0.0));
        assert_eq!(v, C64::new(0.0, 0.0));
    }

    #[test]
    fn doubled_root_with_imaginary_frequency() {
        // xi = i, a = 0, b = 1: u'' - 2u' + u = 0, u = t e^t.
        let (u, v) = propagate((C64::new(0.0, 0.0), C64::new(1.0, 0.0)), &cell(0.0, 1.0), C64::new(0.0, 1.0), 1.0);
        let e = std::f64::consts::E;
        assert_relative_eq!(u.re, e, max_relative = 1e-14);
        assert_relative_eq!(v.re, 2.0 * e, max_relative = 1e-14);
        assert!(u.im.abs() < 1e-14 && v.im.abs() < 1e-14);
    }

    #[test]
    fn backward_step_inverts_forward_step() {
        let c = Cell { a: 0.7, b: -0.4, b2: 0.3 };
        for xi in [C64::new(0.3, 0.0), C64::new(2.0, 1.5), C64::new(0.0, 4.0), C64::new(6.0, 0.0)] {
            let h = 0.37;
            let f = cell_matrix(&c, xi, h);
            let b = cell_matrix(&c, xi, -h);
            let mut s = ScaledState::new(C64::new(0.2, 0.1), C64::new(-1.0, 0.5));
            let start = s;
            s.apply(&f);
            s.apply(&b);
            let scale = (s.log_scale - start.log_scale).exp();
            assert_relative_eq!((s.u * scale - start.u).norm(), 0.0, epsilon = 1e-11);
            assert_relative_eq!((s.v * scale - start.v).norm(), 0.0, epsilon = 1e-11);
        }
    }

    #[test]
    fn scaling_matches_direct_exponential() {
        let c = cell(2.0, 0.5);
        let xi = C64::new(3.0, 0.2);
        let direct = propagate((C64::new(1.0, 0.0), C64::new(0.0, 0.0)), &c, xi, 1.0);
        let mut s = ScaledState::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        for _ in 0..4 {
            s.apply(&cell_matrix(&c, xi, 0.25));
        }
        let f = s.log_scale.exp();
        assert_relative_eq!((s.u * f - direct.0).norm() / direct.0.norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!((s.v * f - direct.1).norm() / direct.1.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn series_branch_matches_direct_branch() {
        // |hΔ| = 0.8e-3 uses the series, 1.6e-3 the direct formula.
        let c = Cell { a: 1.0, b: 0.3, b2: 0.09 };
        let xi = C64::new(1.0, 0.0);
        let start = (C64::new(1.0, 0.0), C64::new(0.5, 0.0));
        let half = propagate(propagate(start, &c, xi, 0.8e-3), &c, xi, 0.8e-3);
        let whole = propagate(start, &c, xi, 1.6e-3);
        assert!((half.0 - whole.0).norm() < 1e-14);
        assert!((half.1 - whole.1).norm() < 1e-14);
    }
}
