//! Fourier inversion `ξ ↦ φ_ξ(y)` into the Poisson kernel
//!
//! ```text
//! P_y(x) = (1/2π) ∫ e^{iξx} e^{−tξ²} φ_ξ(y) dξ,     φ_{−ξ} = conj φ_ξ,
//! ```
//!
//! so that `ℱP_y = φ(y)` with `ℱf(ξ) = ∫ e^{−iξx} f(x) dx`. The law of the
//! hitting position `X(T₀)` started at height `y` has density `P_y(−x)`.
//!
//! Samples live on a uniform grid `ξ_k = k·dξ`; the transform is a zero-padded
//! FFT whose period is `L = 2π/dξ`. Only `|x| ≤ L/4` is reported, far from the
//! wrap-around of slowly decaying kernels.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::OperatorSpec;
use crate::par::{try_map_indexed, Execution};
use crate::spectral::{bounded_value_at, prepare_mesh, SolverOptions};

/// Samples are computed in blocks of this many frequencies until the tail
/// has decayed.
const BLOCK: usize = 1024;

/// Gauss–Weierstrass smoothing `e^{−tξ²}` applied before inversion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoothing {
    /// No smoothing when `φ` decays below the tail tolerance before
    /// `xi_limit`, otherwise `t = 10/Ξ²`.
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelOptions {
    /// Half-width of the reported x-window; sets `dξ = 2π/(4·x_window)`.
    pub x_window: f64,
    /// Truncate the ξ-grid once `|φ_ξ| e^{−tξ²}` stays below this.
    pub tail_tol: f64,
    /// Zero-padding factor of the FFT (at least 4).
    pub padding: usize,
    pub smoothing: Smoothing,
    /// Largest frequency ever sampled.
    pub xi_limit: f64,
    pub solver: SolverOptions,
    pub exec: Execution,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions {
            x_window: 200.0,
            tail_tol: 1e-12,
            padding: 4,
            smoothing: Smoothing::Auto,
            xi_limit: 4000.0,
            solver: SolverOptions::default(),
            exec: Execution::default(),
        }
    }
}

/// `φ_{k·dξ}(y)` for `k = 0, …, n−1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSamples {
    pub y: f64,
    pub dxi: f64,
    pub values: Vec<C64>,
}

impl SpectralSamples {
    /// Samples of a given transform `ξ ↦ f(ξ)`, `ξ ≥ 0`.
    pub fn from_fn(y: f64, dxi: f64, n: usize, f: impl Fn(f64) -> C64) -> Self {
        SpectralSamples { y, dxi, values: (0..n).map(|k| f(k as f64 * dxi)).collect() }
    }

    pub fn xi(&self, k: usize) -> f64 {
        k as f64 * self.dxi
    }

    pub fn xi_cutoff(&self) -> f64 {
        self.xi(self.values.len().saturating_sub(1))
    }

    /// `φ_0(y)`, the total mass of `P_y`.
    pub fn mass(&self) -> f64 {
        self.values.first().map_or(0.0, |v| v.re)
    }

    /// `max_{ξ ≥ from} |φ_ξ| e^{−tξ²}` over the sampled grid.
    pub fn tail(&self, from: f64, t: f64) -> f64 {
        let k0 = (from / self.dxi).ceil() as usize;
        self.values
            .iter()
            .enumerate()
            .skip(k0)
            .map(|(k, v)| v.norm() * (-t * self.xi(k).powi(2)).exp())
            .fold(0.0, f64::max)
    }

    /// Every other sample (the same function on a grid with twice the step).
    pub fn coarsen(&self) -> SpectralSamples {
        SpectralSamples { y: self.y, dxi: 2.0 * self.dxi, values: self.values.iter().step_by(2).copied().collect() }
    }

    /// `(1/2π) ∫ |φ_ξ e^{−tξ²}|² dξ` by the rectangle rule over `ℝ`.
    pub fn l2_norm_sq(&self, t: f64) -> f64 {
        let sum: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let w = if k == 0 { 1.0 } else { 2.0 };
                w * v.norm_sqr() * (-2.0 * t * self.xi(k).powi(2)).exp()
            })
            .sum();
        sum * self.dxi / (2.0 * PI)
    }
}

/// Real samples of `P_y` (or a derivative) on a uniform x-grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelEstimate {
    pub y: f64,
    pub x_min: f64,
    pub dx: f64,
    pub values: Vec<f64>,
    pub smoothing_t: f64,
    /// Derivative order in `x` (0 for the kernel itself).
    pub order: u32,
    /// Integral over one full period, equal to `φ_0(y)` for `order = 0`.
    pub mass: f64,
    pub xi_cutoff: f64,
    /// Largest imaginary residue of the inversion relative to `max |P|`.
    pub imag_residue: f64,
    /// `dx Σ |P|²` over one full period.
    pub l2_norm_sq: f64,
    pub provenance: String,
}

impl KernelEstimate {
    pub fn x(&self, m: usize) -> f64 {
        self.x_min + m as f64 * self.dx
    }

    pub fn x_grid(&self) -> Vec<f64> {
        (0..self.values.len()).map(|m| self.x(m)).collect()
    }

    /// Linear interpolation; 0 outside the grid.
    pub fn eval(&self, x: f64) -> f64 {
        let s = (x - self.x_min) / self.dx;
        if s < 0.0 || s > (self.values.len() - 1) as f64 {
            return 0.0;
        }
        let m = (s.floor() as usize).min(self.values.len() - 2);
        let f = s - m as f64;
        self.values[m] * (1.0 - f) + self.values[m + 1] * f
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `x ↦ P(−x)`: the density of the hitting position `X(T₀)`.
    pub fn mirrored(&self) -> KernelEstimate {
        let n = self.values.len();
        let mut out = self.clone();
        out.x_min = -self.x(n - 1);
        out.values = self.values.iter().rev().copied().collect();
        if self.order % 2 == 1 {
            out.values.iter_mut().for_each(|v| *v = -*v);
        }
        out
    }

    /// CSV with `x,value` rows preceded by `# key=value` metadata lines.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# y={}, t={}, mass={}, spec={}, order={}, xi_cutoff={}",
            self.y, self.smoothing_t, self.mass, self.provenance, self.order, self.xi_cutoff
        );
        s.push_str("x,value\n");
        for (m, v) in self.values.iter().enumerate() {
            let _ = writeln!(s, "{},{}", self.x(m), v);
        }
        s
    }
}

/// `φ_{k·dξ}(y)`, `k = 0..n`, for every frequency on one mesh, until
/// `|φ_ξ| e^{−t_min ξ²}` drops below `opts.tail_tol` over a whole block.
pub fn sample_spectrum(
    spec: &OperatorSpec,
    y: f64,
    dxi: f64,
    t_min: f64,
    opts: &KernelOptions,
) -> Result<SpectralSamples> {
    sample_spectrum_weighted(spec, y, dxi, |xi| (-t_min * xi * xi).exp(), opts.tail_tol, false, opts)
}

/// Like [`sample_spectrum`] with the stopping rule `|φ_ξ| w(ξ) < tol`, where
/// `tol` is relative to the largest weighted sample so far when `relative`.
pub fn sample_spectrum_weighted(
    spec: &OperatorSpec,
    y: f64,
    dxi: f64,
    weight: impl Fn(f64) -> f64,
    tol: f64,
    relative: bool,
    opts: &KernelOptions,
) -> Result<SpectralSamples> {
    if !(y > 0.0 && y < spec.height.value()) {
        return Err(Error::InvalidArgument(format!("height y = {y} outside (0, R)")));
    }
    if !(dxi > 0.0) {
        return Err(Error::InvalidArgument(format!("frequency step must be positive, got {dxi}")));
    }
    let mesh = prepare_mesh(spec, dxi, &[y], &opts.solver)?;
    let j = mesh.node_index(y).expect("evaluation height is a mesh node");
    let max_n = (opts.xi_limit / dxi).floor() as usize + 1;
    let mut values: Vec<C64> = Vec::new();
    let mut peak = 0.0f64;
    while values.len() < max_n {
        let start = values.len();
        let count = BLOCK.min(max_n - start);
        let block =
            try_map_indexed(opts.exec, count, |i| bounded_value_at(&mesh, C64::new((start + i) as f64 * dxi, 0.0), j))?;
        let tail =
            block.iter().enumerate().map(|(i, v)| v.norm() * weight((start + i) as f64 * dxi)).fold(0.0, f64::max);
        peak = peak.max(tail);
        values.extend(block);
        let bound = if relative { tol * peak } else { tol };
        if tail < bound {
            break;
        }
    }
    Ok(SpectralSamples { y, dxi, values })
}

/// Discrete inverse transform of `(iξ)^order e^{−tξ²} φ_ξ` on the
/// Hermitian-extended grid; returns the trusted window `|x| ≤ L/4`.
pub fn invert(samples: &SpectralSamples, t: f64, order: u32, padding: usize, tail_tol: f64) -> Result<KernelEstimate> {
    let n = samples.values.len();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two spectral samples".into()));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("smoothing must be >= 0, got {t}")));
    }
    let last = samples.values[n - 1].norm() * (-t * samples.xi_cutoff().powi(2)).exp();
    if !(last < tail_tol) {
        return Err(Error::InsufficientDecay { xi: samples.xi_cutoff(), magnitude: last });
    }
    let size = (padding.max(4) * 2 * n).next_power_of_two();
    let dxi = samples.dxi;
    let mut buf = vec![C64::new(0.0, 0.0); size];
    for (k, v) in samples.values.iter().enumerate() {
        let xi = samples.xi(k);
        let f = *v * (-t * xi * xi).exp() * C64::new(0.0, xi).powu(order);
        buf[k] = f;
        if k > 0 {
            buf[size - k] = f.conj();
        }
    }
    // e^{+iξx} with x_m = m·dx: the unnormalised inverse DFT.
    FftPlanner::new().plan_fft_inverse(size).process(&mut buf);
    let scale = dxi / (2.0 * PI);
    let dx = 2.0 * PI / (size as f64 * dxi);
    let period = 2.0 * PI / dxi;
    let total: f64 = buf.iter().map(|z| z.re * scale).sum::<f64>() * dx;
    let l2: f64 = buf.iter().map(|z| (z.re * scale).powi(2)).sum::<f64>() * dx;
    let half = ((period / 4.0) / dx).floor() as usize;
    let mut values = Vec::with_capacity(2 * half + 1);
    let mut max_re = 0.0f64;
    let mut max_im = 0.0f64;
    for m in 0..=2 * half {
        let idx = (m + size - half) % size;
        let z = buf[idx] * scale;
        values.push(z.re);
        max_re = max_re.max(z.re.abs());
        max_im = max_im.max(z.im.abs());
    }
    Ok(KernelEstimate {
        y: samples.y,
        x_min: -(half as f64) * dx,
        dx,
        values,
        smoothing_t: t,
        order,
        mass: total,
        xi_cutoff: samples.xi_cutoff(),
        imag_residue: if max_re > 0.0 { max_im / max_re } else { max_im },
        l2_norm_sq: l2,
        provenance: String::new(),
    })
}

/// Frequency step that puts the x-window at a quarter of the FFT period.
pub fn xi_step(x_window: f64) -> f64 {
    2.0 * PI / (4.0 * x_window)
}

/// Samples plus the smoothing parameter actually used.
pub fn spectrum_for(spec: &OperatorSpec, y: f64, opts: &KernelOptions) -> Result<(SpectralSamples, f64)> {
    let t_min = match opts.smoothing {
        Smoothing::Auto => 0.0,
        Smoothing::Fixed(t) => t,
    };
    let samples = sample_spectrum(spec, y, xi_step(opts.x_window), t_min, opts)?;
    let tail = samples.tail(samples.xi_cutoff(), t_min);
    let t = match opts.smoothing {
        Smoothing::Fixed(t) => t,
        Smoothing::Auto if tail < opts.tail_tol => 0.0,
        Smoothing::Auto => 10.0 / samples.xi_cutoff().powi(2),
    };
    Ok((samples, t))
}

/// `P_y` for a spec: spectral sweep on one mesh, then inversion.
pub fn build_kernel(spec: &OperatorSpec, y: f64, opts: &KernelOptions) -> Result<KernelEstimate> {
    let (samples, t) = spectrum_for(spec, y, opts)?;
    let mut k = invert(&samples, t, 0, opts.padding, f64::INFINITY)?;
    let last = samples.values.last().map_or(0.0, |v| v.norm()) * (-t * samples.xi_cutoff().powi(2)).exp();
    if !(last < opts.tail_tol.max(1e-10)) {
        return Err(Error::InsufficientDecay { xi: samples.xi_cutoff(), magnitude: last });
    }
    k.provenance = spec.fingerprint();
    Ok(k)
}

/// Normalised cumulative distribution of a kernel on its grid.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelCdf {
    pub x: Vec<f64>,
    pub cdf: Vec<f64>,
}

impl KernelCdf {
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x <= self.x[0] {
            return 0.0;
        }
        if x >= self.x[n - 1] {
            return 1.0;
        }
        let m = self.x.partition_point(|&v| v <= x) - 1;
        let f = (x - self.x[m]) / (self.x[m + 1] - self.x[m]);
        self.cdf[m] * (1.0 - f) + self.cdf[m + 1] * f
    }

    /// Smallest grid-interpolated `x` with `F(x) ≥ p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.cdf.len();
        let m = self.cdf.partition_point(|&c| c < p);
        if m == 0 {
            return self.x[0];
        }
        if m >= n {
            return self.x[n - 1];
        }
        let (c0, c1) = (self.cdf[m - 1], self.cdf[m]);
        let f = if c1 > c0 { (p - c0) / (c1 - c0) } else { 0.0 };
        self.x[m - 1] + f * (self.x[m] - self.x[m - 1])
    }
}

/// Cumulative trapezoid integral normalised to end at 1. Negative rounding
/// noise is clipped so the table is nondecreasing.
pub fn cdf(estimate: &KernelEstimate) -> Result<KernelCdf> {
    let n = estimate.values.len();
    let mut acc = vec![0.0; n];
    for m in 1..n {
        let piece = 0.5 * (estimate.values[m - 1] + estimate.values[m]) * estimate.dx;
        acc[m] = acc[m - 1] + piece.max(0.0);
    }
    let total = acc[n - 1];
    if !(total > 0.0) {
        return Err(Error::ZeroMass);
    }
    acc.iter_mut().for_each(|c| *c /= total);
    Ok(KernelCdf { x: estimate.x_grid(), cdf: acc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fast() -> KernelOptions {
        KernelOptions { x_window: 50.0, ..Default::default() }
    }

    #[test]
    fn cauchy_kernel_from_half_plane() {
        let spec = OperatorSpec::half_plane(1.0).unwrap();
        let k = build_kernel(&spec, 1.0, &fast()).unwrap();
        assert_eq!(k.smoothing_t, 0.0);
        assert_relative_eq!(k.eval(0.0), 1.0 / PI, epsilon = 3e-5);
        let err =
            k.x_grid().iter().zip(&k.values).map(|(x, v)| (v - 1.0 / (PI * (1.0 + x * x))).abs()).fold(0.0, f64::max);
        // Periodisation of the x^{-2} tail costs about 2·Σ_k 1/(π (kL)²).
        assert!(err < 1e-4, "sup error {err}");
        assert_relative_eq!(k.mass, 1.0, epsilon = 1e-12);
        assert!(k.imag_residue < 1e-9);
    }

    #[test]
    fn sech_kernel_from_strip() {
        let spec = OperatorSpec::strip(1.0, 1.0).unwrap();
        let k = build_kernel(&spec, 0.5, &fast()).unwrap();
        assert_relative_eq!(k.eval(0.0), 0.5, epsilon = 1e-9);
        let err = k.x_grid().iter().zip(&k.values).map(|(x, v)| (v - 0.5 / (PI * x).cosh()).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "sup error {err}");
        assert_relative_eq!(k.mass, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn mass_ignores_smoothing() {
        let spec = OperatorSpec::strip(1.0, 1.0).unwrap();
        let (s, _) = spectrum_for(&spec, 0.5, &fast()).unwrap();
        for t in [0.0, 0.01, 1.0, 100.0] {
            let k = invert(&s, t, 0, 4, 1e-10).unwrap();
            assert_relative_eq!(k.mass, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn heavy_smoothing_gives_gaussian() {
        let spec = OperatorSpec::strip(1.0, 1.0).unwrap();
        let (s, _) = spectrum_for(&spec, 0.5, &fast()).unwrap();
        let t = 25.0;
        let k = invert(&s, t, 0, 4, 1e-10).unwrap();
        // Variance of the sech(πx) law is 1/4, small next to 2t.
        let var = 2.0 * t + 0.25;
        let g = 0.5 / (2.0 * PI * var).sqrt();
        assert_relative_eq!(k.eval(0.0), g, max_relative = 1e-3);
    }

    #[test]
    fn plancherel_identity() {
        let spec = OperatorSpec::homogeneous(1.0, 1.0, 0.8).unwrap();
        let (s, _) = spectrum_for(&spec, 1.0, &fast()).unwrap();
        for t in [0.0, 0.01] {
            let k = invert(&s, t, 0, 4, 1e-10).unwrap();
            assert_relative_eq!(k.l2_norm_sq, s.l2_norm_sq(t), max_relative = 1e-6);
        }
    }

    #[test]
    fn parity_without_drift() {
        let spec = OperatorSpec::homogeneous(1.0, 0.0, 1.4).unwrap();
        let k = build_kernel(&spec, 0.5, &fast()).unwrap();
        let n = k.values.len();
        let peak = k.max_abs();
        for m in 0..n {
            assert!((k.values[m] - k.values[n - 1 - m]).abs() < 1e-12 * peak);
        }
    }

    #[test]
    fn spectral_derivative_of_cauchy() {
        let spec = OperatorSpec::half_plane(1.0).unwrap();
        let (s, _) = spectrum_for(&spec, 1.0, &fast()).unwrap();
        let d = invert(&s, 0.0, 1, 4, 1e-10).unwrap();
        let x: f64 = 0.7;
        let exact = -2.0 * x / (PI * (1.0 + x * x).powi(2));
        assert_relative_eq!(d.eval(x), exact, epsilon = 1e-4);
    }

    #[test]
    fn flat_spectrum_is_rejected_without_smoothing() {
        let s = SpectralSamples { y: 0.0, dxi: 0.1, values: vec![C64::new(1.0, 0.0); 100] };
        assert!(matches!(invert(&s, 0.0, 0, 4, 1e-10), Err(Error::InsufficientDecay { .. })));
        assert!(invert(&s, 10.0 / (9.9f64).powi(2), 0, 4, 1e-3).is_ok());
    }

    #[test]
    fn cdf_of_symmetric_kernels() {
        let spec = OperatorSpec::strip(1.0, 1.0).unwrap();
        let k = build_kernel(&spec, 0.5, &fast()).unwrap();
        let f = cdf(&k).unwrap();
        assert_relative_eq!(f.eval(0.0), 0.5, epsilon = 1e-9);
        assert_eq!(f.eval(1e9), 1.0);
        assert!(f.cdf.windows(2).all(|w| w[1] >= w[0]));
        assert_relative_eq!(f.quantile(0.5), 0.0, epsilon = 1e-6);
        let half = OperatorSpec::half_plane(1.0).unwrap();
        let f = cdf(&build_kernel(&half, 1.0, &fast()).unwrap()).unwrap();
        assert_relative_eq!(f.eval(0.0), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn zero_kernel_has_no_cdf() {
        let k = KernelEstimate {
            y: 1.0,
            x_min: -1.0,
            dx: 0.5,
            values: vec![0.0; 5],
            smoothing_t: 0.0,
            order: 0,
            mass: 0.0,
            xi_cutoff: 1.0,
            imag_residue: 0.0,
            l2_norm_sq: 0.0,
            provenance: String::new(),
        };
        assert_eq!(cdf(&k).unwrap_err(), Error::ZeroMass);
    }
}
