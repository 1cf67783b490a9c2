//! Sign changes of sampled functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default threshold, relative to `max |v|`, below which a sample counts as 0.
pub const SIGN_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignChanges {
    Count(usize),
    IdenticallyZero,
}

impl SignChanges {
    pub fn count(self) -> Option<usize> {
        match self {
            SignChanges::Count(n) => Some(n),
            SignChanges::IdenticallyZero => None,
        }
    }
}

/// Signs of the samples after thresholding: `Some(±1)` or `None` for "zero".
fn signs(values: &[f64], rel_tol: f64) -> Option<Vec<Option<i8>>> {
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(peak > 0.0) {
        return None;
    }
    let cut = rel_tol * peak;
    Some(
        values
            .iter()
            .map(|&v| {
                if v.abs() <= cut {
                    None
                } else if v > 0.0 {
                    Some(1)
                } else {
                    Some(-1)
                }
            })
            .collect(),
    )
}

/// Number of `+/−` alternations after small samples are zeroed and equal-sign
/// runs collapsed.
pub fn count_sign_changes(samples: &[f64], rel_tol: f64) -> Result<SignChanges> {
    Ok(sign_changes(samples, None, rel_tol)?.0)
}

/// Like [`count_sign_changes`], also returning the change locations: the
/// midpoint between the last sample of one sign and the first of the next,
/// or the linear-interpolation root when they are adjacent.
pub fn sign_changes(values: &[f64], xs: Option<&[f64]>, rel_tol: f64) -> Result<(SignChanges, Vec<f64>)> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    if let Some(xs) = xs {
        if xs.len() != values.len() {
            return Err(Error::InvalidArgument("abscissae and samples differ in length".into()));
        }
    }
    let Some(signs) = signs(values, rel_tol) else {
        return Ok((SignChanges::IdenticallyZero, Vec::new()));
    };
    let mut count = 0;
    let mut locations = Vec::new();
    let mut last: Option<(usize, i8)> = None;
    for (i, s) in signs.iter().enumerate() {
        let Some(s) = *s else { continue };
        if let Some((j, prev)) = last {
            if prev != s {
                count += 1;
                if let Some(xs) = xs {
                    let x = if i == j + 1 {
                        let (a, b) = (values[j], values[i]);
                        xs[j] + (xs[i] - xs[j]) * a / (a - b)
                    } else {
                        0.5 * (xs[j] + xs[i])
                    };
                    locations.push(x);
                }
            }
        }
        last = Some((i, s));
    }
    Ok((SignChanges::Count(count), locations))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (0..=1000).map(|i| -5.0 + i as f64 * 0.01).collect()
    }

    #[test]
    fn gaussian_derivatives() {
        let xs = grid();
        let d1: Vec<f64> = xs.iter().map(|x| -2.0 * x * (-x * x).exp()).collect();
        assert_eq!(count_sign_changes(&d1, SIGN_TOL).unwrap(), SignChanges::Count(1));
        let d2: Vec<f64> = xs.iter().map(|x| (4.0 * x * x - 2.0) * (-x * x).exp()).collect();
        let (n, at) = sign_changes(&d2, Some(&xs), SIGN_TOL).unwrap();
        assert_eq!(n, SignChanges::Count(2));
        let r = 0.5f64.sqrt();
        assert!((at[0] + r).abs() < 1e-4 && (at[1] - r).abs() < 1e-4, "{at:?}");
    }

    #[test]
    fn constants_and_zero() {
        assert_eq!(count_sign_changes(&[3.0; 10], SIGN_TOL).unwrap(), SignChanges::Count(0));
        assert_eq!(count_sign_changes(&[0.0; 10], SIGN_TOL).unwrap(), SignChanges::IdenticallyZero);
        assert!(count_sign_changes(&[], SIGN_TOL).is_err());
    }

    #[test]
    fn noise_below_threshold_is_ignored() {
        let v = [1.0, 1e-9, -1e-9, 1e-9, 0.5, -0.2];
        assert_eq!(count_sign_changes(&v, SIGN_TOL).unwrap(), SignChanges::Count(1));
        assert_eq!(count_sign_changes(&v, 0.0).unwrap(), SignChanges::Count(3));
    }
}
