//! Complete monotonicity and the AM-CM class, tested by divided differences.
//!
//! If `f` is completely monotone then `(−1)ⁿ f[x₀, …, xₙ] ≥ 0` for every
//! increasing set of nodes, since the divided difference equals
//! `f⁽ⁿ⁾(ζ)/n!` for some `ζ` in the span. The nodes are consecutive points of
//! a geometric grid, so the test resolves both ends of `(0, ∞)` evenly.

use serde::{Deserialize, Serialize};

/// Highest order tested; higher divided differences are rounding noise.
pub const MAX_ORDER: usize = 6;

/// Default grid ratio.
pub const GRID_RATIO: f64 = 1.25;

/// `lo, lo·ratio, lo·ratio², …` up to and including the first point `≥ hi`.
pub fn geometric_grid(lo: f64, hi: f64, ratio: f64) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && ratio > 1.0, "bad geometric grid ({lo}, {hi}, {ratio})");
    let mut out = vec![lo];
    while *out.last().unwrap() < hi {
        let next = out.last().unwrap() * ratio;
        out.push(next);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneVerdict {
    pub pass: bool,
    pub max_order: usize,
    /// Most negative sign-corrected divided difference, relative to the
    /// largest one of the same order (0 when there is no violation).
    pub worst: f64,
    pub worst_order: Option<usize>,
    pub worst_at: Option<f64>,
    pub tol: f64,
}

/// Divided differences of all orders `0..=max_order` on `xs`.
fn divided_differences(xs: &[f64], fs: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let mut table = vec![fs.to_vec()];
    for n in 1..=max_order.min(xs.len().saturating_sub(1)) {
        let prev = &table[n - 1];
        let row = (0..prev.len() - 1).map(|i| (prev[i + 1] - prev[i]) / (xs[i + n] - xs[i])).collect();
        table.push(row);
    }
    table
}

/// `(−1)ⁿ f[xᵢ, …, xᵢ₊ₙ] ≥ −tol · max |f[…]|` for `n ≤ max_order` on the grid.
pub fn check_complete_monotone(f: impl Fn(f64) -> f64, grid: &[f64], max_order: usize, tol: f64) -> MonotoneVerdict {
    let max_order = max_order.min(MAX_ORDER);
    let fs: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let table = divided_differences(grid, &fs, max_order);
    let mut verdict = MonotoneVerdict { pass: true, max_order, worst: 0.0, worst_order: None, worst_at: None, tol };
    if fs.iter().any(|v| !v.is_finite()) {
        verdict.pass = false;
        verdict.worst = f64::NEG_INFINITY;
        return verdict;
    }
    for (n, row) in table.iter().enumerate() {
        let scale = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            continue;
        }
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        for (i, v) in row.iter().enumerate() {
            let rel = sign * v / scale;
            if rel < verdict.worst {
                verdict.worst = rel;
                verdict.worst_order = Some(n);
                verdict.worst_at = Some(grid[i]);
            }
        }
    }
    verdict.pass = verdict.worst >= -tol;
    verdict
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmCmVerdict {
    pub pass: bool,
    /// Completely monotone on `(0, ∞)`.
    pub right: MonotoneVerdict,
    /// `x ↦ f(−x)` completely monotone on `(0, ∞)`, i.e. `f` absolutely
    /// monotone on `(−∞, 0)`.
    pub left: MonotoneVerdict,
    pub atom: f64,
}

/// AM-CM test: `f` on `grid` and on `−grid`, plus `atom ≥ 0` at the origin.
pub fn check_amcm(f: impl Fn(f64) -> f64, atom: f64, grid: &[f64], max_order: usize, tol: f64) -> AmCmVerdict {
    let right = check_complete_monotone(&f, grid, max_order, tol);
    let left = check_complete_monotone(|x| f(-x), grid, max_order, tol);
    AmCmVerdict { pass: right.pass && left.pass && atom >= 0.0, right, left, atom }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        geometric_grid(0.01, 20.0, GRID_RATIO)
    }

    #[test]
    fn completely_monotone_examples() {
        assert!(check_complete_monotone(|x| 1.0 / (1.0 + x), &grid(), 6, 1e-9).pass);
        assert!(check_complete_monotone(|x| (-x).exp(), &grid(), 6, 1e-9).pass);
        assert!(check_complete_monotone(|x| x.powf(-0.5), &grid(), 6, 1e-9).pass);
    }

    #[test]
    fn gaussian_fails_at_order_two() {
        let v = check_complete_monotone(|x| (-x * x).exp(), &grid(), 6, 1e-9);
        assert!(!v.pass);
        // Order 1 is fine (decreasing); the first violation is concavity
        // near the origin.
        let low = check_complete_monotone(|x| (-x * x).exp(), &grid(), 1, 1e-9);
        assert!(low.pass);
        let two = check_complete_monotone(|x| (-x * x).exp(), &grid(), 2, 1e-9);
        assert_eq!(two.worst_order, Some(2));
        assert!(two.worst_at.unwrap() < 1.0 / 2f64.sqrt());
    }

    #[test]
    fn amcm_examples() {
        let g = grid();
        assert!(check_amcm(|x| if x > 0.0 { (-x).exp() } else { 0.0 }, 0.0, &g, 6, 1e-9).pass);
        assert!(check_amcm(|x: f64| (-x.abs()).exp(), 1.0, &g, 6, 1e-9).pass);
        let v = check_amcm(|x: f64| x.sin() * (-x.abs()).exp(), 0.0, &g, 6, 1e-9);
        assert!(!v.pass && !v.right.pass);
        assert!(!check_amcm(|x: f64| (-x.abs()).exp(), -0.1, &g, 6, 1e-9).pass);
    }

    #[test]
    fn increasing_left_side_is_required() {
        // e^{-|x|} on the left is e^{x}: absolutely monotone. e^{-x} is not.
        let v = check_amcm(|x: f64| (-x).exp(), 0.0, &grid(), 2, 1e-9);
        assert!(v.right.pass && !v.left.pass);
    }
}
