//! Total positivity of translation kernels `(f(xᵢ − xⱼ))`, tested on small
//! minors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::par::{map_indexed, Execution};

/// Largest minor size tested.
pub const MAX_MINOR: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TpVerdict {
    pub pass: bool,
    pub max_minor: usize,
    pub minors_checked: usize,
    /// Most negative minor divided by the product of its row maxima.
    pub worst: f64,
    pub worst_rows: Vec<f64>,
    pub worst_cols: Vec<f64>,
    pub tol: f64,
}

impl TpVerdict {
    fn empty(max_minor: usize, tol: f64) -> Self {
        TpVerdict {
            pass: true,
            max_minor,
            minors_checked: 0,
            worst: f64::INFINITY,
            worst_rows: Vec::new(),
            worst_cols: Vec::new(),
            tol,
        }
    }

    fn merge(mut self, other: TpVerdict) -> Self {
        self.minors_checked += other.minors_checked;
        if other.worst < self.worst {
            self.worst = other.worst;
            self.worst_rows = other.worst_rows;
            self.worst_cols = other.worst_cols;
        }
        self.pass = self.pass && other.pass;
        self
    }
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..n {
            let k = m[r][c] / m[c][c];
            for j in c..n {
                m[r][j] -= k * m[c][j];
            }
        }
    }
    det
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// All minors of `(f(xᵢ − xⱼ))` of size up to `max_minor` (capped at
/// [`MAX_MINOR`]) must be `≥ −tol` after dividing by the product of the
/// row maxima. `points` must be increasing.
pub fn check_total_positivity(f: impl Fn(f64) -> f64, points: &[f64], max_minor: usize, tol: f64) -> TpVerdict {
    let max_minor = max_minor.min(MAX_MINOR).min(points.len());
    assert!(points.windows(2).all(|w| w[0] < w[1]), "points must be increasing");
    let n = points.len();
    let matrix: Vec<Vec<f64>> = points.iter().map(|&xi| points.iter().map(|&xj| f(xi - xj)).collect()).collect();
    let mut verdict = TpVerdict::empty(max_minor, tol);
    for k in 1..=max_minor {
        let sets = subsets(n, k);
        for rows in &sets {
            for cols in &sets {
                let sub: Vec<Vec<f64>> = rows.iter().map(|&r| cols.iter().map(|&c| matrix[r][c]).collect()).collect();
                let scale: f64 = sub.iter().map(|row| row.iter().fold(0.0f64, |m, v| m.max(v.abs()))).product();
                let det = determinant(sub);
                let rel = if scale > 0.0 { det / scale } else { 0.0 };
                verdict.minors_checked += 1;
                if rel < verdict.worst {
                    verdict.worst = rel;
                    verdict.worst_rows = rows.iter().map(|&r| points[r]).collect();
                    verdict.worst_cols = cols.iter().map(|&c| points[c]).collect();
                }
            }
        }
    }
    verdict.pass = verdict.worst >= -tol;
    verdict
}

/// `count` increasing point sets of `size` points, uniform on
/// `[−spread, spread]`, from a seeded generator.
pub fn random_point_sets(seed: u64, count: usize, size: usize, spread: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| loop {
            let mut pts: Vec<f64> = (0..size).map(|_| rng.random_range(-spread..spread)).collect();
            pts.sort_by(f64::total_cmp);
            if pts.windows(2).all(|w| w[1] - w[0] > 1e-3 * spread) {
                break pts;
            }
        })
        .collect()
}

/// [`check_total_positivity`] over many point sets; the verdict keeps the
/// worst minor found.
pub fn check_total_positivity_sets(
    f: impl Fn(f64) -> f64 + Sync + Send,
    sets: &[Vec<f64>],
    max_minor: usize,
    tol: f64,
    exec: Execution,
) -> TpVerdict {
    map_indexed(exec, sets.len(), |i| check_total_positivity(&f, &sets[i], max_minor, tol))
        .into_iter()
        .fold(TpVerdict::empty(max_minor.min(MAX_MINOR), tol), TpVerdict::merge)
}
