//! Monte Carlo for the hitting position of the diffusion `(X, Y)`.
//!
//! `Y` is Brownian motion started at `y0`, reflected at 0 and killed at `R`.
//! Until `T₀` (the first hit of 0) the reflection plays no role, so a path
//! is an Euler walk with Brownian-bridge corrections for crossings of 0 and
//! `R` within a step. Along the path
//!
//! ```text
//! A = ∫ a(Y) dt + Σ w_k · occupation([y_k − ε, y_k + ε]) / (2ε),
//! B = ∫ b(Y) dY,
//! ```
//!
//! and, given the path, `X(T₀) ~ N(B, A)`.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::OperatorSpec;
use crate::par::{map_indexed, Execution};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub spec: OperatorSpec,
    pub y0: f64,
    pub dt: f64,
    pub max_time: f64,
    pub seed: u64,
    /// Half-width of the occupation band standing in for local time at
    /// atoms; `None` means `√dt`.
    pub epsilon: Option<f64>,
}

impl PathConfig {
    pub fn new(spec: OperatorSpec, y0: f64, dt: f64, seed: u64) -> Result<Self> {
        let config = PathConfig { spec, y0, dt, max_time: 1e3, seed, epsilon: None };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.spec.height.value();
        if !(self.y0 > 0.0 && self.y0 < r) {
            return Err(Error::InvalidArgument(format!("y0 = {} outside (0, {r})", self.y0)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.max_time > 0.0) {
            return Err(Error::InvalidArgument("dt and max_time must be positive".into()));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                return Err(Error::InvalidArgument(format!("band half-width must be positive, got {e}")));
            }
        }
        Ok(())
    }

    pub fn band(&self) -> f64 {
        self.epsilon.unwrap_or(self.dt.sqrt())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Hit0 { x: f64 },
    HitR,
    Censored,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitSample {
    #[serde(flatten)]
    pub outcome: Outcome,
    pub elapsed: f64,
    /// `A` at the end of the path.
    pub a: f64,
    /// `B` at the end of the path.
    pub b: f64,
}

impl HitSample {
    pub fn x(&self) -> Option<f64> {
        match self.outcome {
            Outcome::Hit0 { x } => Some(x),
            _ => None,
        }
    }
}

/// A draw of `X` given the path functionals `(A, B)`.
pub fn draw_x<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    b + a.max(0.0).sqrt() * z
}

/// Probability that a Brownian bridge over `dt` between two points at
/// distances `d0, d1 > 0` from a barrier touches it.
fn bridge_hit(d0: f64, d1: f64, dt: f64) -> f64 {
    let e = 2.0 * d0 * d1 / dt;
    if e > 40.0 {
        0.0
    } else {
        (-e).exp()
    }
}

/// One path from `y0` until it hits 0, hits `R`, or runs out of time.
pub fn simulate_hit<R: Rng + ?Sized>(config: &PathConfig, rng: &mut R) -> HitSample {
    let spec = &config.spec;
    let r = spec.height.value();
    let dt = config.dt;
    let sdt = dt.sqrt();
    let eps = config.band();
    let atoms: Vec<(f64, f64)> = spec.atoms.iter().filter(|a| a.y > 0.0).map(|a| (a.y, a.w)).collect();
    let a_const = spec.a_density.as_constant();
    let b_const = spec.b.as_constant();
    let a_at = |y: f64| a_const.unwrap_or_else(|| spec.a_density.eval(y));
    let b_at = |y: f64| b_const.unwrap_or_else(|| spec.b.eval(y));

    let (mut y, mut t, mut a, mut b) = (config.y0, 0.0, 0.0, 0.0);
    loop {
        if t >= config.max_time {
            return HitSample { outcome: Outcome::Censored, elapsed: t, a, b };
        }
        let dw = sdt * rng.sample::<f64, _>(StandardNormal);
        let next = y + dw;
        a += a_at(y) * dt;
        for &(yk, w) in &atoms {
            if (y - yk).abs() <= eps {
                a += w * dt / (2.0 * eps);
            }
        }
        b += b_at(y) * dw;
        t += dt;
        let hit0 = next <= 0.0 || {
            let p = bridge_hit(y, next, dt);
            p > 0.0 && rng.random::<f64>() < p
        };
        if hit0 {
            let x = draw_x(a, b, rng);
            return HitSample { outcome: Outcome::Hit0 { x }, elapsed: t, a, b };
        }
        if r.is_finite() {
            let hit_r = next >= r || {
                let p = bridge_hit(r - y, r - next, dt);
                p > 0.0 && rng.random::<f64>() < p
            };
            if hit_r {
                return HitSample { outcome: Outcome::HitR, elapsed: t, a, b };
            }
        }
        y = next;
    }
}

/// The generator of path `index`: stream `index` of the master seed, so the
/// batch does not depend on how paths are scheduled.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn simulate_batch(config: &PathConfig, n_paths: usize, exec: Execution) -> Result<Vec<HitSample>> {
    config.validate()?;
    Ok(map_indexed(exec, n_paths, |i| simulate_hit(config, &mut path_rng(config.seed, i as u64))))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharfnEstimate {
    pub xi: f64,
    pub value: C64,
    /// Jackknife standard error of the real and imaginary parts combined.
    pub std_error: f64,
}

/// Empirical `E[e^{iξX} 1{hit 0}]` with jackknife standard errors.
pub fn estimate_charfn(samples: &[HitSample], xi_grid: &[f64]) -> Result<Vec<CharfnEstimate>> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let nf = n as f64;
    Ok(xi_grid
        .iter()
        .map(|&xi| {
            let z: Vec<C64> =
                samples.iter().map(|s| s.x().map_or(C64::new(0.0, 0.0), |x| C64::new(0.0, xi * x).exp())).collect();
            let total: C64 = z.iter().sum();
            let mean = total / nf;
            // Leave-one-out means and their spread.
            let spread: f64 = z.iter().map(|zi| ((total - zi) / (nf - 1.0) - mean).norm_sqr()).sum();
            CharfnEstimate { xi, value: mean, std_error: ((nf - 1.0) / nf * spread).sqrt() }
        })
        .collect())
}

/// Fraction of paths that hit 0, with its standard error.
pub fn hit_probability(samples: &[HitSample]) -> (f64, f64) {
    let n = samples.len() as f64;
    let p = samples.iter().filter(|s| s.x().is_some()).count() as f64 / n;
    (p, (p * (1.0 - p) / (n - 1.0).max(1.0)).sqrt())
}

/// Kolmogorov–Smirnov distance between the empirical law of `xs` and `cdf`.
pub fn ks_statistic(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Hitting positions of the paths that reached 0.
pub fn hit_positions(samples: &[HitSample]) -> Vec<f64> {
    samples.iter().filter_map(HitSample::x).collect()
}
