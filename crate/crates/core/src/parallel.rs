//! Run fan-out.
//!
//! Monte Carlo runs are independent: each gets its own substream from
//! [`crate::rng::substream`], results are collected in run order and merged
//! sequentially by the caller, so the output is bit-identical whichever
//! policy executes the map. With the `parallel` feature disabled,
//! [`Exec::Parallel`] silently degrades to the sequential loop.

/// Execution policy for per-run maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Map `f` over `0..runs`, preserving order.
    pub fn map_runs<T, F>(self, runs: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..runs).map(f).collect(),
            Exec::Parallel => par_map(runs, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, F>(runs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..runs).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, F>(runs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..runs).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let f = |i: usize| (i as f64).sqrt();
        assert_eq!(Exec::Sequential.map_runs(1000, f), Exec::Parallel.map_runs(1000, f));
    }
}
