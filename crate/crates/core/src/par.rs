//! Data-parallel helpers.
//!
//! Every batch evaluation in the crate (ξ-sweeps, Monte Carlo paths, point
//! sets for total-positivity checks) goes through [`map_indexed`]. Results are
//! collected in index order, so the output never depends on how the work was
//! scheduled. Without the `parallel` feature both modes run sequentially.

use serde::{Deserialize, Serialize};

/// How a batch should be evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `true` when batches actually fan out over the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Evaluates `f(0), …, f(n-1)` and returns the results in index order.
pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if exec == Execution::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Fallible variant of [`map_indexed`]; the first error in index order wins.
pub fn try_map_indexed<T, E, F>(exec: Execution, n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indexed(exec, n, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_in_both_modes() {
        let seq = map_indexed(Execution::Sequential, 1000, |i| i * i);
        let par = map_indexed(Execution::Parallel, 1000, |i| i * i);
        assert_eq!(seq, par);
        assert_eq!(seq[31], 961);
    }

    #[test]
    fn first_error_wins() {
        let r: Result<Vec<usize>, usize> =
            try_map_indexed(Execution::Parallel, 100, |i| if i % 10 == 7 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(7));
    }
}
