//! Random drivers: Brownian increments on the finest grid and Poisson event
//! times, with exact aggregation to coarser power-of-two levels.
//!
//! Every path draws from its own ChaCha8 stream keyed by `(seed, path)`, so a
//! bundle depends only on `(seed, path, finest grid, lambda)` and paths can be
//! generated in any order or on any number of threads.
//!
//! Coarse Brownian increments are formed by repeated pairwise summation of
//! neighbours. Aggregating any intermediate level therefore reproduces the
//! coarser level bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::coeffs::IntensityFn;
use crate::error::{Error, Result};

/// Equidistant grid `t_k = k T / N` with `N` a power of two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if !steps.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "steps must be a power of two, got {steps}"
            )));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn delta(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `t_k`; exact because `N` is a power of two.
    pub fn node(&self, k: usize) -> f64 {
        k as f64 * self.delta()
    }

    /// The same horizon with `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.horizon, self.steps * factor)
    }

    /// `fine.steps / self.steps`, provided `self` is a coarsening of `fine`.
    pub fn ratio_to(&self, fine: &TimeGrid) -> Result<usize> {
        if self.horizon != fine.horizon || !fine.steps.is_multiple_of(self.steps) {
            return Err(Error::Divisibility {
                coarse: self.steps,
                fine: fine.steps,
            });
        }
        Ok(fine.steps / self.steps)
    }

    /// Index `k` with `t == t_k`, if `t` is a node up to rounding.
    pub fn node_index(&self, t: f64) -> Result<usize> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        let k = (t / self.delta()).round();
        if (k * self.delta() - t).abs() > 1e-9 * self.delta() {
            return Err(Error::NotOnGrid {
                t,
                steps: self.steps,
            });
        }
        Ok(k as usize)
    }
}

/// Per-path generator: stream `2 * path + channel` of the ChaCha8 key derived
/// from `seed`.
fn path_stream(seed: u64, path: u64, channel: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path.wrapping_mul(2).wrapping_add(channel));
    rng
}

const BROWNIAN_CHANNEL: u64 = 0;
const POISSON_CHANNEL: u64 = 1;

/// Brownian increments and Poisson counts on one level of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelIncrements {
    pub grid: TimeGrid,
    pub brownian: Vec<f64>,
    pub counts: Vec<u32>,
}

impl LevelIncrements {
    /// Aggregates to a grid with `steps / factor` steps by pairwise summation.
    pub fn coarsen(&self, factor: usize) -> Result<LevelIncrements> {
        if !factor.is_power_of_two() || !self.grid.steps.is_multiple_of(factor) {
            return Err(Error::Divisibility {
                coarse: self.grid.steps / factor.max(1),
                fine: self.grid.steps,
            });
        }
        let mut brownian = self.brownian.clone();
        let mut counts = self.counts.clone();
        let mut width = 1;
        while width < factor {
            brownian = brownian.chunks_exact(2).map(|p| p[0] + p[1]).collect();
            counts = counts.chunks_exact(2).map(|p| p[0] + p[1]).collect();
            width *= 2;
        }
        Ok(LevelIncrements {
            grid: TimeGrid::new(self.grid.horizon, self.grid.steps / factor)?,
            brownian,
            counts,
        })
    }
}

/// One realization of the driving noise.
#[derive(Debug, Clone, PartialEq)]
pub struct DriverBundle {
    seed: u64,
    path: u64,
    finest: TimeGrid,
    brownian: Vec<f64>,
    /// `W` at the finest nodes, a running sum of `brownian`.
    w_nodes: Vec<f64>,
    event_times: Vec<f64>,
    /// Finest-grid step `(t_b, t_{b+1}]` holding each event.
    event_bins: Vec<usize>,
}

impl DriverBundle {
    /// Assembles a bundle from explicit noise, e.g. for hand-built scenarios.
    pub fn from_parts(
        finest: TimeGrid,
        brownian: Vec<f64>,
        mut event_times: Vec<f64>,
    ) -> Result<Self> {
        if brownian.len() != finest.steps {
            return Err(Error::InvalidGrid(format!(
                "{} increments for a grid with {} steps",
                brownian.len(),
                finest.steps
            )));
        }
        event_times.sort_by(f64::total_cmp);
        if event_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid("event times must be distinct".into()));
        }
        if let Some(&t) = event_times
            .iter()
            .find(|t| !(0.0..=finest.horizon).contains(*t))
        {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: finest.horizon,
            });
        }
        Ok(Self::assemble(0, 0, finest, brownian, event_times))
    }

    fn assemble(
        seed: u64,
        path: u64,
        finest: TimeGrid,
        brownian: Vec<f64>,
        event_times: Vec<f64>,
    ) -> Self {
        let mut w_nodes = Vec::with_capacity(brownian.len() + 1);
        w_nodes.push(0.0);
        let mut w = 0.0;
        for &dw in &brownian {
            w += dw;
            w_nodes.push(w);
        }
        let delta = finest.delta();
        let event_bins = event_times
            .iter()
            .map(|&t| {
                ((t / delta).ceil() as usize)
                    .saturating_sub(1)
                    .min(finest.steps - 1)
            })
            .collect();
        Self {
            seed,
            path,
            finest,
            brownian,
            w_nodes,
            event_times,
            event_bins,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> u64 {
        self.path
    }

    pub fn finest(&self) -> &TimeGrid {
        &self.finest
    }

    pub fn brownian_increments(&self) -> &[f64] {
        &self.brownian
    }

    pub fn event_times(&self) -> &[f64] {
        &self.event_times
    }

    /// Increments on `level`, which must coarsen the finest grid.
    pub fn increments_at_level(&self, level: &TimeGrid) -> Result<LevelIncrements> {
        let factor = level.ratio_to(&self.finest)?;
        let mut counts = vec![0u32; self.finest.steps];
        for &b in &self.event_bins {
            counts[b] += 1;
        }
        LevelIncrements {
            grid: self.finest,
            brownian: self.brownian.clone(),
            counts,
        }
        .coarsen(factor)
    }

    /// `(W_t, N_t)` at a node of the finest grid.
    pub fn driver_values_at(&self, t: f64) -> Result<(f64, u64)> {
        let i = self.finest.node_index(t)?;
        Ok((self.w_nodes[i], self.count_up_to(i) as u64))
    }

    /// `W` at finest node `i`.
    pub(crate) fn w_at(&self, i: usize) -> f64 {
        self.w_nodes[i]
    }

    /// `N` at finest node `i`: events in `(0, t_i]`.
    pub(crate) fn count_up_to(&self, i: usize) -> usize {
        self.event_bins.partition_point(|&b| b < i)
    }

    /// `N_t` for any `t`.
    pub fn count_at(&self, t: f64) -> usize {
        self.event_times.partition_point(|&e| e <= t)
    }
}

/// Samples the noise for path `path` of a study keyed by `seed`.
///
/// Brownian increments are i.i.d. `N(0, delta)`; events come from thinning a
/// rate-`sup lambda` homogeneous process, keeping a candidate at `t` with
/// probability `lambda(t) / sup lambda`.
pub fn sample_driver(seed: u64, path: u64, finest: TimeGrid, lambda: &IntensityFn) -> DriverBundle {
    let mut rng = path_stream(seed, path, BROWNIAN_CHANNEL);
    let scale = finest.delta().sqrt();
    let brownian: Vec<f64> = (0..finest.steps)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();

    let mut rng = path_stream(seed, path, POISSON_CHANNEL);
    let rate = lambda.sup();
    let mut events = Vec::new();
    let mut t = 0.0;
    loop {
        t += rng.sample::<f64, _>(Exp1) / rate;
        if t > finest.horizon {
            break;
        }
        let u: f64 = rng.random();
        if u * rate < lambda.eval(t) && events.last().is_none_or(|&last| last < t) {
            events.push(t);
        }
    }
    DriverBundle::assemble(seed, path, finest, brownian, events)
}
