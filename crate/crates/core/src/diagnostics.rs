//! Monte Carlo functionals of Euler-Maruyama paths: occupation time near a
//! discontinuity, the discontinuity-crossing statistic, and path moments.
//!
//! The continuous-time quantities are approximated by Riemann sums on a grid
//! `r` times finer than the scheme's step, using the continuous extension of
//! the scheme between nodes.

use crate::coeffs::CoefficientModel;
use crate::drivers::{sample_driver, TimeGrid};
use crate::error::{Error, Result};
use crate::euler::{simulate_em, Coefficients, EmPath};
use crate::stats::{map_paths, mean_and_stderr};

pub const DEFAULT_REFINEMENT: usize = 16;

/// How many paths to draw, from which seed, and how finely to evaluate
/// between grid nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampling {
    pub paths: usize,
    pub seed: u64,
    pub refinement: usize,
}

impl Sampling {
    pub fn new(paths: usize, seed: u64) -> Self {
        Self {
            paths,
            seed,
            refinement: DEFAULT_REFINEMENT,
        }
    }

    pub fn with_refinement(self, refinement: usize) -> Self {
        Self { refinement, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub paths: usize,
}

impl Estimate {
    fn from_samples(samples: &[f64]) -> Self {
        let (mean, stderr) = mean_and_stderr(samples);
        Self {
            mean,
            stderr,
            paths: samples.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupationEstimate {
    pub zeta: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Mean time spent within `epsilon` of `zeta`.
    pub mean_time: f64,
    pub stderr: f64,
    pub paths: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingEstimate {
    pub zeta: f64,
    pub delta: f64,
    /// Mean over paths of the squared crossing statistic.
    pub mean_square: f64,
    pub stderr: f64,
    pub paths: usize,
}

/// Finest-grid stride between evaluation points for refinement `r`.
fn stride<C: Coefficients + ?Sized>(path: &EmPath<'_, C>, r: usize) -> Result<usize> {
    let resolution = path.resolution();
    if r == 0 || !resolution.is_multiple_of(r) {
        return Err(Error::Divisibility {
            coarse: path.grid().steps() * r.max(1),
            fine: path.driver().finest().steps(),
        });
    }
    Ok(resolution / r)
}

/// Left Riemann sum, spacing `delta / r`, of `1{|X_t - zeta| <= epsilon}` over `[0, T]`.
pub fn occupation_time<C: Coefficients + ?Sized>(
    path: &EmPath<'_, C>,
    zeta: f64,
    epsilon: f64,
    r: usize,
) -> Result<f64> {
    let stride = stride(path, r)?;
    let points = path.grid().steps() * r;
    let hits = (0..points)
        .filter(|&j| (path.value_at_fine(j * stride) - zeta).abs() <= epsilon)
        .count();
    Ok(hits as f64 * (path.grid().delta() / r as f64))
}

/// Riemann sum, spacing `delta / r`, of `1{(X(s_) - zeta)(X(s) - zeta) <= 0}`
/// over `[0, T]`, where `s_` is the grid point below `s`.
///
/// Within step `k` the samples sit at `t_k + i delta / r` for `i = 1..=r`, each
/// evaluated with step `k`'s frozen coefficients; the last one is the left
/// limit at `t_{k+1}`, i.e. `X(t_{k+1})`.
pub fn crossing_statistic<C: Coefficients + ?Sized>(
    path: &EmPath<'_, C>,
    zeta: f64,
    r: usize,
) -> Result<f64> {
    let stride = stride(path, r)?;
    let resolution = path.resolution();
    let values = path.values();
    let mut hits = 0usize;
    for k in 0..path.grid().steps() {
        let base = values[k] - zeta;
        for i in 1..=r {
            let v = if i == r {
                values[k + 1]
            } else {
                path.extend_from(k, k * resolution + i * stride)
            };
            if base * (v - zeta) <= 0.0 {
                hits += 1;
            }
        }
    }
    Ok(hits as f64 * (path.grid().delta() / r as f64))
}

fn check_power(p: u32, allowed: &[u32]) -> Result<()> {
    if allowed.contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidStudy(format!(
            "moment order {p} not in {allowed:?}"
        )))
    }
}

/// `E |X(t) - X(s)|^p` for `p` in {2, 4}; `s` and `t` must lie on the grid
/// refined by `sampling.refinement`.
pub fn increment_moment(
    model: &CoefficientModel,
    grid: TimeGrid,
    p: u32,
    s: f64,
    t: f64,
    sampling: Sampling,
) -> Result<Estimate> {
    check_power(p, &[2, 4])?;
    if s > t {
        return Err(Error::InvalidStudy(format!(
            "need s <= t, got s={s}, t={t}"
        )));
    }
    let finest = grid.refined(sampling.refinement)?;
    finest.node_index(s)?;
    finest.node_index(t)?;
    let samples = map_paths(sampling.paths, |i| {
        let driver = sample_driver(sampling.seed, i, finest, model.lambda());
        let path = simulate_em(model, grid, &driver)?;
        let diff = path.evaluate_continuous(t)? - path.evaluate_continuous(s)?;
        Ok(diff.abs().powi(p as i32))
    })?;
    Ok(Estimate::from_samples(&samples))
}

/// `E sup_k |X(t_k)|^p` for `p` in {2, 4, 8}.
pub fn sup_moment(
    model: &CoefficientModel,
    grid: TimeGrid,
    p: u32,
    sampling: Sampling,
) -> Result<Estimate> {
    check_power(p, &[2, 4, 8])?;
    let samples = map_paths(sampling.paths, |i| {
        let driver = sample_driver(sampling.seed, i, grid, model.lambda());
        let path = simulate_em(model, grid, &driver)?;
        Ok(path
            .values()
            .iter()
            .map(|x| x.abs().powi(p as i32))
            .fold(0.0, f64::max))
    })?;
    Ok(Estimate::from_samples(&samples))
}

/// Mean occupation time of `[zeta - eps, zeta + eps]` for each `eps`, all
/// estimated from the same paths.
pub fn occupation_estimates(
    model: &CoefficientModel,
    grid: TimeGrid,
    zeta: f64,
    epsilons: &[f64],
    sampling: Sampling,
) -> Result<Vec<OccupationEstimate>> {
    if let Some(&e) = epsilons.iter().find(|e| e.is_nan() || **e <= 0.0) {
        return Err(Error::InvalidStudy(format!(
            "epsilon must be positive, got {e}"
        )));
    }
    let finest = grid.refined(sampling.refinement)?;
    let per_path = map_paths(sampling.paths, |i| {
        let driver = sample_driver(sampling.seed, i, finest, model.lambda());
        let path = simulate_em(model, grid, &driver)?;
        epsilons
            .iter()
            .map(|&eps| occupation_time(&path, zeta, eps, sampling.refinement))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(epsilons
        .iter()
        .enumerate()
        .map(|(j, &epsilon)| {
            let column: Vec<f64> = per_path.iter().map(|row| row[j]).collect();
            let e = Estimate::from_samples(&column);
            OccupationEstimate {
                zeta,
                epsilon,
                delta: grid.delta(),
                mean_time: e.mean,
                stderr: e.stderr,
                paths: e.paths,
            }
        })
        .collect())
}

/// Mean squared crossing statistic on each grid. All grids are driven by the
/// same noise, sampled on the finest grid refined by `sampling.refinement`.
pub fn crossing_estimates(
    model: &CoefficientModel,
    grids: &[TimeGrid],
    zeta: f64,
    sampling: Sampling,
) -> Result<Vec<CrossingEstimate>> {
    let finest_steps = grids
        .iter()
        .map(TimeGrid::steps)
        .max()
        .ok_or_else(|| Error::InvalidStudy("no grids given".into()))?;
    let finest = TimeGrid::new(model.horizon(), finest_steps)?.refined(sampling.refinement)?;
    let per_path = map_paths(sampling.paths, |i| {
        let driver = sample_driver(sampling.seed, i, finest, model.lambda());
        grids
            .iter()
            .map(|&g| {
                let path = simulate_em(model, g, &driver)?;
                let r = path.resolution().min(sampling.refinement.max(1));
                Ok(crossing_statistic(&path, zeta, r)?.powi(2))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(grids
        .iter()
        .enumerate()
        .map(|(j, g)| {
            let column: Vec<f64> = per_path.iter().map(|row| row[j]).collect();
            let e = Estimate::from_samples(&column);
            CrossingEstimate {
                zeta,
                delta: g.delta(),
                mean_square: e.mean,
                stderr: e.stderr,
                paths: e.paths,
            }
        })
        .collect())
}
