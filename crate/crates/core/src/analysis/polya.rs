//! Integrable Pólya frequency functions in their Fourier form
//!
//! ```text
//! ℱf(ξ) = e^{−aξ² + ibξ + c} ∏ₙ e^{−iλₙξ} / (1 − iλₙξ),
//! ```
//!
//! the law of `−b + N(0, 2a) + Σ λₙ(1 − Eₙ)` with independent standard
//! exponentials `Eₙ`, scaled by `e^c`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::SpectralSamples;
use crate::quadrature::gauss_kronrod;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyaFrequencyForm {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub lambdas: Vec<f64>,
}

impl PolyaFrequencyForm {
    pub fn new(a: f64, b: f64, c: f64, lambdas: Vec<f64>) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::InvalidArgument(format!("need a >= 0 and finite b, c, got ({a}, {b}, {c})")));
        }
        if lambdas.iter().any(|l| *l == 0.0 || !l.is_finite()) {
            return Err(Error::InvalidArgument("lambda_n must be finite and nonzero".into()));
        }
        Ok(PolyaFrequencyForm { a, b, c, lambdas })
    }

    /// `ℱf(ξ)`.
    pub fn fourier(&self, xi: f64) -> C64 {
        let i = C64::new(0.0, 1.0);
        let mut v = (-self.a * xi * xi + i * self.b * xi + self.c).exp();
        for &l in &self.lambdas {
            v *= (-i * l * xi).exp() / (1.0 - i * l * xi);
        }
        v
    }

    /// `f(x)`: by partial fractions when `a = 0` (distinct `λₙ`, at least
    /// two), otherwise `(1/π) Re ∫_0^∞ e^{iξx} ℱf(ξ) dξ` by quadrature.
    pub fn density(&self, x: f64, tol: f64) -> Result<f64> {
        if self.a == 0.0 {
            return self.exponential_mixture(x);
        }
        let xi_max = self.frequency_cutoff(1e-16);
        let g = |xi: f64| (C64::new(0.0, xi * x)).exp() * self.fourier(xi);
        let q = gauss_kronrod(g, 0.0, xi_max, tol, 0.0, 20_000)?;
        Ok(q.value.re / PI)
    }

    /// Density of `m − Σ λₙEₙ`, `m = −b + Σ λₙ`: with
    /// `∏ 1/(1 + iλₙξ) = Σ Aₙ/(1 + iλₙξ)`, `Aₙ = ∏_{k≠n} λₙ/(λₙ − λₖ)`.
    fn exponential_mixture(&self, x: f64) -> Result<f64> {
        let l = &self.lambdas;
        if l.len() < 2 {
            return Err(Error::InvalidArgument("a = 0 needs at least two lambdas for a continuous density".into()));
        }
        for (n, ln) in l.iter().enumerate() {
            if l[..n].iter().any(|lk| (lk - ln).abs() <= 1e-12 * ln.abs()) {
                return Err(Error::InvalidArgument("a = 0 needs distinct lambdas".into()));
            }
        }
        let m = -self.b + l.iter().sum::<f64>();
        let s = m - x;
        let mut total = 0.0;
        for (n, &ln) in l.iter().enumerate() {
            if s / ln <= 0.0 {
                continue;
            }
            let an: f64 = l.iter().enumerate().filter(|&(k, _)| k != n).map(|(_, &lk)| ln / (ln - lk)).product();
            total += an * (-s / ln).exp() / ln.abs();
        }
        Ok(self.c.exp() * total)
    }

    /// A frequency beyond which `|ℱf| < eps · e^{c}`.
    pub fn frequency_cutoff(&self, eps: f64) -> f64 {
        let mut xi: f64 = 1.0;
        while xi < 1e9 {
            let gauss = (-self.a * xi * xi).exp();
            let rational: f64 = self.lambdas.iter().map(|l| 1.0 / (1.0 + (l * xi).powi(2)).sqrt()).product();
            if gauss * rational < eps {
                return xi;
            }
            xi *= 1.25;
        }
        xi
    }

    /// `ℱf` on `ξ_k = k·dξ` for use with the kernel inversion.
    pub fn samples(&self, dxi: f64, n: usize) -> SpectralSamples {
        SpectralSamples::from_fn(0.0, dxi, n, |xi| self.fourier(xi))
    }
}
