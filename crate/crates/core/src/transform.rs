//! The discontinuity-removing transform
//!
//! ```text
//! G(x) = x + sum_k alpha_k phi((x - zeta_k) / c) (x - zeta_k) |x - zeta_k|
//! alpha_k = (mu(zeta_k-) - mu(zeta_k+)) / (2 sigma(zeta_k)^2)
//! ```
//!
//! with the bump `phi(u) = (1 + u)^3 (1 - u)^3` on `[-1, 1]`. `G` is a strictly
//! increasing C^1 bijection that agrees with the identity outside the bumps,
//! and `Z = G(X)` solves an SDE whose coefficients (`tilde_mu`, `tilde_sigma`,
//! `tilde_rho`) are Lipschitz.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coeffs::CoefficientModel;
use crate::error::{Error, Result};

/// Fraction of the admissible upper bound used for the bump half-width `c`.
pub const BUMP_WIDTH_FRACTION: f64 = 0.9;

const INVERSE_MAX_ITER: usize = 200;

pub fn bump(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        let w = 1.0 - u * u;
        w * w * w
    } else {
        0.0
    }
}

fn bump_d1(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        let w = 1.0 - u * u;
        -6.0 * u * w * w
    } else {
        0.0
    }
}

fn bump_d2(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        let w = 1.0 - u * u;
        -6.0 * w * w + 24.0 * u * u * w
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct TransformG {
    model: CoefficientModel,
    alphas: Vec<f64>,
    zetas: Vec<f64>,
    c: f64,
    c_bound: f64,
}

impl TransformG {
    /// Builds `G` for a validated model; `c` is [`BUMP_WIDTH_FRACTION`] times
    /// the strict upper bound `min{1/(6|alpha_k|), (zeta_{k+1} - zeta_k)/2}`.
    pub fn build(model: &CoefficientModel) -> Result<Self> {
        let zetas = model.breakpoints().to_vec();
        let mut alphas = Vec::with_capacity(zetas.len());
        for (i, &zeta) in zetas.iter().enumerate() {
            let s = model.sigma().eval(zeta);
            if s == 0.0 {
                return Err(Error::DegenerateDiffusion { index: i + 1, zeta });
            }
            let (left, right) = model.one_sided_limits(i + 1)?;
            alphas.push((left - right) / (2.0 * s * s));
        }
        let amplitude_bound = alphas
            .iter()
            .filter(|a| **a != 0.0)
            .map(|a| 1.0 / (6.0 * a.abs()))
            .fold(f64::INFINITY, f64::min);
        let gap_bound = zetas
            .windows(2)
            .map(|w| (w[1] - w[0]) / 2.0)
            .fold(f64::INFINITY, f64::min);
        let c_bound = amplitude_bound.min(gap_bound);
        // with nothing to remove the width is irrelevant
        let c = if c_bound.is_finite() {
            BUMP_WIDTH_FRACTION * c_bound
        } else {
            1.0
        };
        Ok(Self {
            model: model.clone(),
            alphas,
            zetas,
            c,
            c_bound,
        })
    }

    pub fn model(&self) -> &CoefficientModel {
        &self.model
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn zetas(&self) -> &[f64] {
        &self.zetas
    }

    /// Bump half-width.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// The strict upper bound `c` was derived from (infinite without breakpoints).
    pub fn c_bound(&self) -> f64 {
        self.c_bound
    }

    /// The breakpoint whose bump support `(zeta_k - c, zeta_k + c)` contains `x`.
    /// Supports are disjoint, so at most one qualifies.
    fn active(&self, x: f64) -> Option<usize> {
        let k = self.zetas.partition_point(|&z| z <= x);
        [k.checked_sub(1), (k < self.zetas.len()).then_some(k)]
            .into_iter()
            .flatten()
            .find(|&j| (x - self.zetas[j]).abs() < self.c && self.alphas[j] != 0.0)
    }

    pub fn g(&self, x: f64) -> f64 {
        match self.active(x) {
            None => x,
            Some(k) => {
                let d = x - self.zetas[k];
                x + self.alphas[k] * bump(d / self.c) * d * d.abs()
            }
        }
    }

    pub fn g_prime(&self, x: f64) -> f64 {
        match self.active(x) {
            None => 1.0,
            Some(k) => {
                let (c, d) = (self.c, x - self.zetas[k]);
                let u = d / c;
                1.0 + self.alphas[k] * (bump_d1(u) / c * d * d.abs() + 2.0 * bump(u) * d.abs())
            }
        }
    }

    /// `G''`, which jumps by `4 alpha_k` at `zeta_k`; there the right limit is returned.
    pub fn g_second(&self, x: f64) -> f64 {
        match self.active(x) {
            None => 0.0,
            Some(k) => {
                let (c, d) = (self.c, x - self.zetas[k]);
                let u = d / c;
                let sign = if d >= 0.0 { 1.0 } else { -1.0 };
                self.alphas[k]
                    * (bump_d2(u) / (c * c) * d * d.abs()
                        + 4.0 * bump_d1(u) / c * d.abs()
                        + 2.0 * bump(u) * sign)
            }
        }
    }

    /// `G^{-1}(z)` by safeguarded Newton iteration inside a bracket.
    pub fn inverse(&self, z: f64) -> f64 {
        // G maps each support [zeta_k - c, zeta_k + c] onto itself
        let Some(k) = self.active(z) else {
            return z;
        };
        let zeta = self.zetas[k];
        let spread = self.alphas[k].abs() * self.c * self.c;
        let mut lo = (zeta - self.c).max(z - spread);
        let mut hi = (zeta + self.c).min(z + spread);
        let tol = 1e-12 * z.abs().max(1.0);
        let mut x = z.clamp(lo, hi);
        for _ in 0..INVERSE_MAX_ITER {
            let r = self.g(x) - z;
            if r == 0.0 {
                return x;
            }
            if r < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let newton = x - r / self.g_prime(x);
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if next == x || (hi - lo) <= f64::EPSILON * x.abs().max(1.0) {
                break;
            }
            if (next - x).abs() <= 1e-15 * x.abs().max(1.0) && r.abs() <= tol {
                return next;
            }
            x = next;
        }
        x
    }

    pub fn tilde_mu(&self, z: f64) -> f64 {
        let x = self.inverse(z);
        let s = self.model.sigma().eval(x);
        self.g_prime(x) * self.model.eval_mu(x) + 0.5 * self.g_second(x) * s * s
    }

    pub fn tilde_sigma(&self, z: f64) -> f64 {
        let x = self.inverse(z);
        self.g_prime(x) * self.model.sigma().eval(x)
    }

    pub fn tilde_rho(&self, z: f64) -> f64 {
        let x = self.inverse(z);
        let jump = self.model.rho().eval(x);
        let target = x + jump;
        if jump == 0.0 || (self.active(x).is_none() && self.active(target).is_none()) {
            // G is the identity at both ends
            return jump;
        }
        self.g(target) - z
    }

    /// Sampling interval used by the invariant checks: `[zeta_1 - 1, zeta_m + 1]`.
    pub fn check_range(&self) -> (f64, f64) {
        match (self.zetas.first(), self.zetas.last()) {
            (Some(&a), Some(&b)) => (a - 1.0, b + 1.0),
            _ => (self.model.xi() - 1.0, self.model.xi() + 1.0),
        }
    }

    /// Checks the structural properties of `G` on `samples` random points
    /// drawn from [`check_range`](Self::check_range), plus points clustered
    /// around every bump.
    pub fn check_invariants(&self, samples: usize, seed: u64) -> InvariantReport {
        let (lo, hi) = self.check_range();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs: Vec<f64> = (0..samples).map(|_| rng.random_range(lo..hi)).collect();
        for &zeta in &self.zetas {
            xs.extend((0..samples / 10).map(|_| zeta + self.c * rng.random_range(-1.2..1.2)));
        }
        xs.sort_by(f64::total_cmp);

        let mut report = InvariantReport {
            samples: xs.len(),
            monotonicity_violations: 0,
            max_roundtrip_error: 0.0,
            min_g_prime: f64::INFINITY,
            fixed_points_exact: self.zetas.iter().all(|&z| self.g(z) == z),
            identity_outside_exact: true,
            tilde_mu_lipschitz: 0.0,
        };
        for w in xs.windows(2) {
            if w[0] < w[1] && self.g(w[0]) >= self.g(w[1]) {
                report.monotonicity_violations += 1;
            }
        }
        for &x in &xs {
            let gx = self.g(x);
            report.max_roundtrip_error =
                report.max_roundtrip_error.max((self.inverse(gx) - x).abs());
            report.min_g_prime = report.min_g_prime.min(self.g_prime(x));
            let outside = self.zetas.iter().all(|&z| (x - z).abs() >= self.c);
            if outside && gx != x {
                report.identity_outside_exact = false;
            }
        }
        for _ in 0..samples {
            let z1 = rng.random_range(lo..hi);
            let z2 = rng.random_range(lo..hi);
            if z1 != z2 {
                let slope = (self.tilde_mu(z1) - self.tilde_mu(z2)).abs() / (z1 - z2).abs();
                report.tilde_mu_lipschitz = report.tilde_mu_lipschitz.max(slope);
            }
        }
        report
    }

    /// Largest difference quotient of `tilde_mu` between neighbours of a
    /// uniform grid with `points` nodes over `[zeta_k - c, zeta_k + c]`.
    pub fn tilde_mu_local_slope(&self, k: usize, points: usize) -> Result<f64> {
        let zeta = *self
            .zetas
            .get(k.wrapping_sub(1))
            .ok_or(Error::BreakpointIndex {
                index: k,
                count: self.zetas.len(),
            })?;
        let h = 2.0 * self.c / (points - 1) as f64;
        let values: Vec<f64> = (0..points)
            .map(|i| self.tilde_mu(zeta - self.c + i as f64 * h))
            .collect();
        Ok(values
            .windows(2)
            .map(|w| (w[1] - w[0]).abs() / h)
            .fold(0.0, f64::max))
    }
}

/// Outcome of [`TransformG::check_invariants`].
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantReport {
    pub samples: usize,
    pub monotonicity_violations: usize,
    pub max_roundtrip_error: f64,
    pub min_g_prime: f64,
    pub fixed_points_exact: bool,
    pub identity_outside_exact: bool,
    /// Empirical Lipschitz bound of `tilde_mu` over random pairs.
    pub tilde_mu_lipschitz: f64,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        self.monotonicity_violations == 0
            && self.max_roundtrip_error <= 1e-10
            && self.min_g_prime > 0.0
            && self.fixed_points_exact
            && self.identity_outside_exact
            && self.tilde_mu_lipschitz.is_finite()
    }
}
