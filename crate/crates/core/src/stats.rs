//! Order-independent Monte Carlo plumbing.

use rayon::prelude::*;

use crate::error::Result;

/// Runs `f` for path indices `0..paths` in parallel and returns the results in
/// index order, so reductions over them do not depend on scheduling.
pub fn map_paths<T, F>(paths: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..paths as u64).into_par_iter().map(f).collect()
}

/// Sample mean and its standard error (`NaN` for fewer than two samples).
pub fn mean_and_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
