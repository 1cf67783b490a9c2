//! Explicit kernels: the classical half-space Poisson kernel, the
//! Caffarelli–Silvestre kernel, and the profile `P` of the homogeneous family
//!
//! ```text
//! L = (p² + q²) y^{2/μ−2} ∂xx − 2q y^{1/μ−1} ∂xy + ∂yy,
//! ```
//!
//! which solves
//!
//! ```text
//! (x² − 2μqx + μ²(p²+q²)) P″ + ((3+μ)x − 4μq) P′ + (μ+1) P = 0.
//! ```

pub mod gamma;

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use gamma::{gamma, gamma_abs_sq, ln_gamma};

fn dist_sq(x: &[f64], x0: &[f64]) -> Result<f64> {
    if x.len() != x0.len() || x.is_empty() {
        return Err(Error::InvalidArgument("points must have the same positive dimension".into()));
    }
    Ok(x.iter().zip(x0).map(|(a, b)| (a - b).powi(2)).sum())
}

/// `Γ((d+1)/2)/π^{(d+1)/2} · y/(|x−x0|² + y²)^{(d+1)/2}`.
pub fn classical_kernel(d: usize, x: &[f64], y: f64, x0: &[f64]) -> Result<f64> {
    if d == 0 || x.len() != d {
        return Err(Error::InvalidArgument(format!("dimension mismatch: d = {d}, |x| = {}", x.len())));
    }
    if !(y > 0.0) {
        return Err(Error::InvalidArgument(format!("y must be positive, got {y}")));
    }
    let r2 = dist_sq(x, x0)?;
    let e = (d as f64 + 1.0) / 2.0;
    Ok(gamma(e) / PI.powf(e) * y / (r2 + y * y).powf(e))
}

/// Caffarelli–Silvestre kernel with the constant normalised to unit mass:
/// `Γ((d+α)/2)/(π^{d/2} Γ(α/2)) · y^α/(|x−x0|² + y²)^{(d+α)/2}`.
pub fn cs_kernel(d: usize, alpha: f64, x: &[f64], y: f64, x0: &[f64]) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 2), got {alpha}")));
    }
    if d == 0 || x.len() != d {
        return Err(Error::InvalidArgument(format!("dimension mismatch: d = {d}, |x| = {}", x.len())));
    }
    if !(y > 0.0) {
        return Err(Error::InvalidArgument(format!("y must be positive, got {y}")));
    }
    let r2 = dist_sq(x, x0)?;
    let df = d as f64;
    let c = gamma((df + alpha) / 2.0) / (PI.powf(df / 2.0) * gamma(alpha / 2.0));
    Ok(c * y.powf(alpha) / (r2 + y * y).powf((df + alpha) / 2.0))
}

/// Caffarelli–Silvestre height matching reduced height `y` of
/// `homogeneous(1, 0, α)`: `Y = α y^{1/α}`.
pub fn cs_height(alpha: f64, y: f64) -> f64 {
    alpha * y.powf(1.0 / alpha)
}

/// A profile with value and first two derivatives.
pub trait SmoothProfile {
    fn value(&self, x: f64) -> f64;

    /// `(P, P′, P″)`; by default eighth-order central differences with step
    /// `1e-3·max(1, |x|)`.
    fn derivatives(&self, x: f64) -> (f64, f64, f64) {
        const D1: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
        const D2: [f64; 4] = [8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];
        const D2_0: f64 = -205.0 / 72.0;
        let h = 1e-3 * x.abs().max(1.0);
        let f0 = self.value(x);
        let (mut d1, mut d2) = (0.0, D2_0 * f0);
        for k in 0..4 {
            let s = (k + 1) as f64 * h;
            let (fp, fm) = (self.value(x + s), self.value(x - s));
            d1 += D1[k] * (fp - fm);
            d2 += D2[k] * (fp + fm);
        }
        (f0, d1 / h, d2 / (h * h))
    }
}

/// Any closure as a profile with finite-difference derivatives.
pub struct FnProfile<F>(pub F);

impl<F: Fn(f64) -> f64> SmoothProfile for FnProfile<F> {
    fn value(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

/// Parameters `(p, q, μ)` of the homogeneous family and the normalising
/// constant of its kernel profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousKernelParams {
    pub p: f64,
    pub q: f64,
    pub mu: f64,
    pub c: f64,
    /// `p = 0` only: the coefficient `β` of `exp(−β/(x − μq))`.
    pub beta: f64,
}

impl HomogeneousKernelParams {
    /// For `p > 0`:
    /// `C = (2μp)^μ/(2πΓ(μ)) · |Γ((1+μ)/2 + i(1−μ)q/(2p))|²`.
    ///
    /// For `p = 0` the profile is `C exp(−β/s) |s|^{−μ−1}` on the side
    /// `sign s = sign((1−μ)q)` of `s = x − μq`, with `β = (1−μ)μq` (the value
    /// for which the ODE holds) and `C = |β|^μ/Γ(μ)` (unit mass).
    pub fn new(p: f64, q: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu < 2.0) {
            return Err(Error::InvalidArgument(format!("mu must lie in (0, 2), got {mu}")));
        }
        if !(p >= 0.0) || !q.is_finite() || !p.is_finite() {
            return Err(Error::InvalidArgument("need p >= 0 and finite q".into()));
        }
        if p > 0.0 {
            let z = C64::new((1.0 + mu) / 2.0, (1.0 - mu) * q / (2.0 * p));
            debug_assert!(z.re > 0.0);
            let c = (2.0 * mu * p).powf(mu) / (2.0 * PI * gamma(mu)) * gamma_abs_sq(z);
            return Ok(HomogeneousKernelParams { p, q, mu, c, beta: 0.0 });
        }
        let beta = (1.0 - mu) * mu * q;
        if beta == 0.0 {
            return Err(Error::InvalidArgument(
                "p = 0 requires q != 0 and mu != 1 (otherwise the kernel is a point mass)".into(),
            ));
        }
        let c = beta.abs().powf(mu) / gamma(mu);
        Ok(HomogeneousKernelParams { p, q, mu, c, beta })
    }

    /// `(P, P′, P″)` from the exact logarithmic derivative.
    pub fn exact_derivatives(&self, x: f64) -> (f64, f64, f64) {
        let (p, q, mu) = (self.p, self.q, self.mu);
        let s = x - mu * q;
        if p > 0.0 {
            let k = (1.0 - mu) * q / p;
            let mp = mu * p;
            let dd = mp * mp + s * s;
            let val = self.c * (k * (s / mp).atan()).exp() / dd.powf((mu + 1.0) / 2.0);
            let num = k * mp - (mu + 1.0) * s;
            let g = num / dd;
            let dg = (-(mu + 1.0) * dd - num * 2.0 * s) / (dd * dd);
            (val, val * g, val * (dg + g * g))
        } else {
            let beta = self.beta;
            if s == 0.0 || s.signum() != beta.signum() {
                return (0.0, 0.0, 0.0);
            }
            let val = self.c * (-beta / s).exp() * s.abs().powf(-mu - 1.0);
            let g = beta / (s * s) - (mu + 1.0) / s;
            let dg = -2.0 * beta / (s * s * s) + (mu + 1.0) / (s * s);
            (val, val * g, val * (dg + g * g))
        }
    }

    /// The kernel `P_y` of the reduced problem, normalised so that
    /// `∫ e^{−iξs} P_y(s) ds = φ_ξ(y)`: `P_y(s) = y^{−1/μ} P(−y^{−1/μ} s)`.
    pub fn fourier_kernel(&self, y: f64, s: f64) -> f64 {
        let k = y.powf(-1.0 / self.mu);
        k * self.value(-k * s)
    }
}

impl SmoothProfile for HomogeneousKernelParams {
    fn value(&self, x: f64) -> f64 {
        self.exact_derivatives(x).0
    }

    fn derivatives(&self, x: f64) -> (f64, f64, f64) {
        self.exact_derivatives(x)
    }
}

/// `P(x)` of the homogeneous family.
pub fn homogeneous_profile(params: &HomogeneousKernelParams, x: f64) -> f64 {
    params.value(x)
}

/// Largest residual of the profile ODE over the grid, each relative to the
/// sum of the magnitudes of the three terms at that point.
pub fn homogeneous_ode_residual<P: SmoothProfile + ?Sized>(
    profile: &P,
    params: &HomogeneousKernelParams,
    xs: &[f64],
) -> f64 {
    let (p, q, mu) = (params.p, params.q, params.mu);
    xs.iter()
        .map(|&x| {
            let (f, d1, d2) = profile.derivatives(x);
            let t2 = (x * x - 2.0 * mu * q * x + mu * mu * (p * p + q * q)) * d2;
            let t1 = ((3.0 + mu) * x - 4.0 * mu * q) * d1;
            let t0 = (mu + 1.0) * f;
            let scale = t2.abs() + t1.abs() + t0.abs();
            if scale == 0.0 {
                0.0
            } else {
                (t2 + t1 + t0).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

/// `x′ ↦ y^{−1/μ} P(y^{−1/μ}(x′ − x))`.
pub fn scale_kernel<P: SmoothProfile>(profile: P, y: f64, mu: f64, x: f64) -> impl Fn(f64) -> f64 {
    let k = y.powf(-1.0 / mu);
    move |xp| k * profile.value(k * (xp - x))
}
