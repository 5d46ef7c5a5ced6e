//! Euler-Maruyama scheme for `dX = mu(X) dt + sigma(X) dW + rho(X-) dN`.
//!
//! On each step the scheme freezes the coefficients at the left grid value
//! `X(t_k)`, so the time-continuous extension between nodes is
//!
//! ```text
//! X(t) = X(t_k) + mu(X(t_k)) (t - t_k) + sigma(X(t_k)) (W_t - W_{t_k}) + rho(X(t_k)) (N_t - N_{t_k})
//! ```
//!
//! Reading only left grid values also takes care of the `X_{t-}` in the jump term.

use crate::coeffs::CoefficientModel;
use crate::drivers::{DriverBundle, LevelIncrements, TimeGrid};
use crate::error::{Error, Result};
use crate::transform::TransformG;

/// Coefficients of a scalar jump-diffusion.
pub trait Coefficients: Sync {
    fn drift(&self, x: f64) -> f64;
    fn diffusion(&self, x: f64) -> f64;
    fn jump(&self, x: f64) -> f64;
    fn initial_value(&self) -> f64;
}

impl Coefficients for CoefficientModel {
    #[inline]
    fn drift(&self, x: f64) -> f64 {
        self.eval_mu(x)
    }

    #[inline]
    fn diffusion(&self, x: f64) -> f64 {
        self.sigma().eval(x)
    }

    #[inline]
    fn jump(&self, x: f64) -> f64 {
        self.rho().eval(x)
    }

    fn initial_value(&self) -> f64 {
        self.xi()
    }
}

/// The transformed equation for `Z = G(X)`, started at `G(xi)`.
impl Coefficients for TransformG {
    fn drift(&self, z: f64) -> f64 {
        self.tilde_mu(z)
    }

    fn diffusion(&self, z: f64) -> f64 {
        self.tilde_sigma(z)
    }

    fn jump(&self, z: f64) -> f64 {
        self.tilde_rho(z)
    }

    fn initial_value(&self) -> f64 {
        self.g(self.model().xi())
    }
}

/// Grid values of the scheme on one level; the recursion is applied in this
/// exact order so stored values can be replayed.
pub fn em_values<C: Coefficients + ?Sized>(coeffs: &C, increments: &LevelIncrements) -> Vec<f64> {
    let delta = increments.grid.delta();
    let mut values = Vec::with_capacity(increments.brownian.len() + 1);
    let mut x = coeffs.initial_value();
    values.push(x);
    for (&dw, &dn) in increments.brownian.iter().zip(&increments.counts) {
        let mut next = x + coeffs.drift(x) * delta + coeffs.diffusion(x) * dw;
        if dn != 0 {
            next += coeffs.jump(x) * dn as f64;
        }
        x = next;
        values.push(x);
    }
    values
}

/// A simulated path together with the noise that drove it.
#[derive(Debug, Clone)]
pub struct EmPath<'a, C: ?Sized> {
    grid: TimeGrid,
    values: Vec<f64>,
    driver: &'a DriverBundle,
    coeffs: &'a C,
}

impl<'a, C: Coefficients + ?Sized> EmPath<'a, C> {
    pub fn simulate(coeffs: &'a C, grid: TimeGrid, driver: &'a DriverBundle) -> Result<Self> {
        let increments = driver.increments_at_level(&grid)?;
        let values = em_values(coeffs, &increments);
        Ok(Self {
            grid,
            values,
            driver,
            coeffs,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn driver(&self) -> &DriverBundle {
        self.driver
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("path has at least one value")
    }

    /// Steps of the driver's finest grid per step of this path.
    pub fn resolution(&self) -> usize {
        self.driver.finest().steps() / self.grid.steps()
    }

    /// The continuous extension at finest node `i`.
    pub(crate) fn value_at_fine(&self, i: usize) -> f64 {
        let r = self.resolution();
        let (k, offset) = (i / r, i % r);
        if offset == 0 {
            return self.values[k];
        }
        self.extend_from(k, i)
    }

    /// Value at finest node `i` using the frozen coefficients of step `k`.
    pub(crate) fn extend_from(&self, k: usize, i: usize) -> f64 {
        let base_index = k * self.resolution();
        let x = self.values[k];
        let dt = (i - base_index) as f64 * self.driver.finest().delta();
        let dw = self.driver.w_at(i) - self.driver.w_at(base_index);
        let dn = self.driver.count_up_to(i) - self.driver.count_up_to(base_index);
        let mut out = x + self.coeffs.drift(x) * dt + self.coeffs.diffusion(x) * dw;
        if dn != 0 {
            out += self.coeffs.jump(x) * dn as f64;
        }
        out
    }

    /// `X(t)` for `t` on the driver's finest grid.
    pub fn evaluate_continuous(&self, t: f64) -> Result<f64> {
        let horizon = self.grid.horizon();
        if !(0.0..=horizon).contains(&t) {
            return Err(Error::TimeOutOfRange { t, horizon });
        }
        let i = self.driver.finest().node_index(t)?;
        Ok(self.value_at_fine(i))
    }
}

pub fn simulate_em<'a>(
    model: &'a CoefficientModel,
    grid: TimeGrid,
    bundle: &'a DriverBundle,
) -> Result<EmPath<'a, CoefficientModel>> {
    EmPath::simulate(model, grid, bundle)
}

/// The scheme applied to the transformed equation, sharing the driver.
pub fn simulate_transformed_em<'a>(
    transform: &'a TransformG,
    grid: TimeGrid,
    bundle: &'a DriverBundle,
) -> Result<EmPath<'a, TransformG>> {
    EmPath::simulate(transform, grid, bundle)
}
