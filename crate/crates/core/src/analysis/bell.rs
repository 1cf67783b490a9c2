//! Bell shape: after Gauss–Weierstrass smoothing, the `n`th derivative
//! changes sign exactly `n` times.
//!
//! Derivatives are taken spectrally, multiplying the transform by `(iξ)ⁿ`
//! before inversion. Every count is repeated on a refined grid (doubled
//! FFT padding, so half the x-spacing) and on the coarsened frequency grid
//! (half the x-window); disagreement is reported as an unstable result
//! rather than accepted.

use serde::{Deserialize, Serialize};

use super::sign::{sign_changes, SignChanges, SIGN_TOL};
use crate::error::{Error, Result};
use crate::kernel::{invert, sample_spectrum_weighted, xi_step, KernelOptions, SpectralSamples};
use crate::operators::OperatorSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellOptions {
    /// Orders `0..=n_max` are tested.
    pub n_max: u32,
    /// Smoothing parameters `t` of the Gauss–Weierstrass factor `e^{−tξ²}`.
    pub t_list: Vec<f64>,
    pub padding: usize,
    /// Relative zero threshold for the sign-change count.
    pub rel_tol: f64,
    /// Largest tolerated `|φ_Ξ| Ξⁿ e^{−tΞ²}` at the last sample, relative to
    /// the largest weighted sample.
    pub tail_tol: f64,
    pub refine: bool,
}

impl Default for BellOptions {
    fn default() -> Self {
        BellOptions { n_max: 6, t_list: vec![1e-3, 1e-2], padding: 4, rel_tol: SIGN_TOL, tail_tol: 1e-10, refine: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BellVerdict {
    Pass,
    Violation { t: f64, order: u32, count: Option<usize> },
    Unstable { t: f64, order: u32, count: Option<usize>, refined: Option<usize>, coarsened: Option<usize> },
}

impl BellVerdict {
    pub fn describe(&self) -> String {
        match self {
            BellVerdict::Pass => "bell-shaped up to the tested order".into(),
            BellVerdict::Violation { t, order, count } => {
                format!("violation at order {order} (t = {t}): {} sign changes", fmt_count(*count))
            }
            BellVerdict::Unstable { t, order, count, refined, coarsened } => format!(
                "unstable under refinement at order {order} (t = {t}): {} vs {} refined, {} coarsened",
                fmt_count(*count),
                fmt_count(*refined),
                fmt_count(*coarsened)
            ),
        }
    }
}

fn fmt_count(c: Option<usize>) -> String {
    c.map_or("identically zero".into(), |n| n.to_string())
}

/// Sign-change counts of derivatives of a smoothed kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub orders: Vec<u32>,
    pub t_list: Vec<f64>,
    /// `counts[i][n]`: order `n` at `t_list[i]`; `None` for an identically
    /// zero derivative.
    pub counts: Vec<Vec<Option<usize>>>,
    pub refined_counts: Vec<Vec<Option<usize>>>,
    pub coarsened_counts: Vec<Vec<Option<usize>>>,
    pub locations: Vec<Vec<Vec<f64>>>,
    pub verdict: String,
    pub status: BellVerdict,
    pub tol: f64,
}

impl ShapeReport {
    pub fn pass(&self) -> bool {
        self.status == BellVerdict::Pass
    }
}

fn count_at(
    samples: &SpectralSamples,
    t: f64,
    order: u32,
    padding: usize,
    rel_tol: f64,
) -> Result<(SignChanges, Vec<f64>)> {
    let est = invert(samples, t, order, padding, f64::INFINITY)?;
    sign_changes(&est.values, Some(&est.x_grid()), rel_tol)
}

/// `|φ_Ξ| Ξⁿ e^{−tΞ²}` at the last sample relative to the largest such value.
fn relative_tail(samples: &SpectralSamples, t: f64, order: u32) -> f64 {
    let w = |k: usize, v: &num_complex::Complex64| {
        let xi = samples.xi(k);
        v.norm() * xi.powi(order as i32) * (-t * xi * xi).exp()
    };
    let peak = samples.values.iter().enumerate().map(|(k, v)| w(k, v)).fold(0.0, f64::max);
    let n = samples.values.len();
    let last = w(n - 1, &samples.values[n - 1]);
    if peak > 0.0 {
        last / peak
    } else {
        0.0
    }
}

/// Counts sign changes of the derivatives of orders `0..=n_max` of the
/// smoothed kernel for every `t` in `opts.t_list`; the verdict passes iff
/// order `n` has exactly `n` changes everywhere, stably.
pub fn check_bell_shape(samples: &SpectralSamples, opts: &BellOptions) -> Result<ShapeReport> {
    if opts.t_list.is_empty() {
        return Err(Error::InvalidArgument("empty smoothing list".into()));
    }
    let orders: Vec<u32> = (0..=opts.n_max).collect();
    let coarse = samples.coarsen();
    let mut report = ShapeReport {
        orders: orders.clone(),
        t_list: opts.t_list.clone(),
        counts: Vec::new(),
        refined_counts: Vec::new(),
        coarsened_counts: Vec::new(),
        locations: Vec::new(),
        verdict: String::new(),
        status: BellVerdict::Pass,
        tol: opts.rel_tol,
    };
    for &t in &opts.t_list {
        let tail = relative_tail(samples, t, opts.n_max);
        if !(tail <= opts.tail_tol) {
            return Err(Error::InsufficientDecay { xi: samples.xi_cutoff(), magnitude: tail });
        }
        let (mut counts, mut refined, mut coarsened, mut locs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for &n in &orders {
            let (c, at) = count_at(samples, t, n, opts.padding, opts.rel_tol)?;
            let c = c.count();
            counts.push(c);
            locs.push(at);
            let (r, k) = if opts.refine {
                let r = count_at(samples, t, n, 2 * opts.padding, opts.rel_tol)?.0.count();
                let k = count_at(&coarse, t, n, opts.padding, opts.rel_tol)?.0.count();
                (r, k)
            } else {
                (c, c)
            };
            refined.push(r);
            coarsened.push(k);
            if report.status == BellVerdict::Pass {
                if r != c || k != c {
                    report.status = BellVerdict::Unstable { t, order: n, count: c, refined: r, coarsened: k };
                } else if c != Some(n as usize) {
                    report.status = BellVerdict::Violation { t, order: n, count: c };
                }
            }
        }
        report.counts.push(counts);
        report.refined_counts.push(refined);
        report.coarsened_counts.push(coarsened);
        report.locations.push(locs);
    }
    report.verdict = report.status.describe();
    Ok(report)
}

/// Spectral samples of `P_y` that resolve derivatives up to `n_max` for
/// smoothing `t ≥ t_min`: sampled until `|φ_ξ| ξ^{n_max} e^{−t_min ξ²}` is
/// below `1e-13` of its peak.
pub fn bell_samples(
    spec: &OperatorSpec,
    y: f64,
    t_min: f64,
    n_max: u32,
    opts: &KernelOptions,
) -> Result<SpectralSamples> {
    let weight = |xi: f64| xi.powi(n_max as i32) * (-t_min * xi * xi).exp();
    sample_spectrum_weighted(spec, y, xi_step(opts.x_window), weight, 1e-13, true, opts)
}
