//! SDE coefficients: a piecewise polynomial drift with finitely many
//! discontinuities, affine diffusion and jump coefficients, and a piecewise
//! constant jump intensity.
//!
//! The drift is evaluated with a right-continuity convention: at a breakpoint
//! the value of the piece to the right is returned.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_DEGREE: usize = 3;

/// Polynomial with coefficients in ascending order, `c0 + c1 x + c2 x^2 + c3 x^3`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidModel(
                "non-finite polynomial coefficient".into(),
            ));
        }
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        if coeffs.len() > MAX_DEGREE + 1 {
            return Err(Error::InvalidModel(format!(
                "polynomial degree {} exceeds {MAX_DEGREE}",
                coeffs.len() - 1
            )));
        }
        Ok(Self { coeffs })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            coeffs: vec![value],
        }
    }

    pub fn affine(intercept: f64, slope: f64) -> Self {
        Self::new(vec![intercept, slope]).expect("finite affine coefficients")
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() == 1 {
            return Polynomial::constant(0.0);
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| i as f64 * c)
            .collect();
        Polynomial { coeffs }
    }

    /// Real roots of the derivative (at most two, since the degree is at most 3).
    fn critical_points(&self) -> Vec<f64> {
        let d = self.derivative();
        match *d.coeffs.as_slice() {
            [_] => Vec::new(),
            [b, a] => vec![-b / a],
            [c, b, a] => {
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 {
                    Vec::new()
                } else {
                    let s = disc.sqrt();
                    vec![(-b - s) / (2.0 * a), (-b + s) / (2.0 * a)]
                }
            }
            _ => unreachable!("degree bounded by {MAX_DEGREE}"),
        }
    }

    /// `sup |p|` over the closed interval `[lo, hi]`.
    pub fn max_abs_on(&self, lo: f64, hi: f64) -> f64 {
        self.critical_points()
            .into_iter()
            .filter(|x| (lo..=hi).contains(x))
            .chain([lo, hi])
            .map(|x| self.eval(x).abs())
            .fold(0.0, f64::max)
    }

    /// Lipschitz constant on `[lo, hi]`, i.e. `sup |p'|` there.
    pub fn lipschitz_on(&self, lo: f64, hi: f64) -> f64 {
        self.derivative().max_abs_on(lo, hi)
    }
}

/// Piecewise polynomial with breakpoints `zeta_1 < ... < zeta_m`; piece `j`
/// lives on `(zeta_j, zeta_{j+1})` with `zeta_0 = -inf`, `zeta_{m+1} = +inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePoly {
    breakpoints: Vec<f64>,
    pieces: Vec<Polynomial>,
}

impl PiecewisePoly {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Polynomial>) -> Result<Self> {
        if pieces.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidModel(format!(
                "{} breakpoints need {} pieces, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                pieces.len()
            )));
        }
        if breakpoints.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidModel("non-finite breakpoint".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidModel(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        let outer = [pieces.first(), pieces.last()];
        if outer.into_iter().flatten().any(|p| p.degree() > 1) {
            return Err(Error::InvalidModel(
                "unbounded outer drift pieces must have degree <= 1".into(),
            ));
        }
        Ok(Self {
            breakpoints,
            pieces,
        })
    }

    /// A drift without breakpoints: a single affine function.
    pub fn affine(intercept: f64, slope: f64) -> Self {
        Self {
            breakpoints: Vec::new(),
            pieces: vec![Polynomial::affine(intercept, slope)],
        }
    }

    /// Piecewise constant with the given breakpoints.
    pub fn step(breakpoints: Vec<f64>, values: &[f64]) -> Result<Self> {
        Self::new(
            breakpoints,
            values.iter().map(|&v| Polynomial::constant(v)).collect(),
        )
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Polynomial] {
        &self.pieces
    }

    /// Index of the piece used at `x`; breakpoints belong to the right piece.
    pub fn piece_index(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|&z| z <= x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.pieces[self.piece_index(x)].eval(x)
    }

    /// `(f(zeta_k-), f(zeta_k+))` for the 1-based breakpoint index `k`.
    pub fn one_sided_limits(&self, k: usize) -> Result<(f64, f64)> {
        if k == 0 || k > self.breakpoints.len() {
            return Err(Error::BreakpointIndex {
                index: k,
                count: self.breakpoints.len(),
            });
        }
        let zeta = self.breakpoints[k - 1];
        Ok((self.pieces[k - 1].eval(zeta), self.pieces[k].eval(zeta)))
    }

    /// Lipschitz constant of each piece on its own interval.
    pub fn lipschitz_constants(&self) -> Vec<f64> {
        let last = self.pieces.len() - 1;
        self.pieces
            .iter()
            .enumerate()
            .map(|(j, p)| {
                if j == 0 || j == last {
                    p.derivative().eval(0.0).abs()
                } else {
                    p.lipschitz_on(self.breakpoints[j - 1], self.breakpoints[j])
                }
            })
            .collect()
    }

    /// Smallest `c` (by the construction below) with `|f(x)| <= c (1 + |x|)`.
    ///
    /// Outer affine pieces `a + b x` give `max(|a|, |b|)`; inner pieces are
    /// bounded by their sup on `[zeta_1, zeta_m]`.
    pub fn growth_constant(&self) -> f64 {
        let last = self.pieces.len() - 1;
        let outer = [&self.pieces[0], &self.pieces[last]]
            .into_iter()
            .map(|p| p.eval(0.0).abs().max(p.derivative().eval(0.0).abs()));
        let inner = (1..last)
            .map(|j| self.pieces[j].max_abs_on(self.breakpoints[j - 1], self.breakpoints[j]));
        outer.chain(inner).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct AffineFn {
    pub intercept: f64,
    pub slope: f64,
}

impl AffineFn {
    pub const fn new(intercept: f64, slope: f64) -> Self {
        Self { intercept, slope }
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    pub fn lipschitz(&self) -> f64 {
        self.slope.abs()
    }

    /// `max(L, |f(0)|)`.
    pub fn growth_constant(&self) -> f64 {
        self.lipschitz().max(self.intercept.abs())
    }
}

impl From<[f64; 2]> for AffineFn {
    fn from([intercept, slope]: [f64; 2]) -> Self {
        Self::new(intercept, slope)
    }
}

impl From<AffineFn> for [f64; 2] {
    fn from(f: AffineFn) -> Self {
        [f.intercept, f.slope]
    }
}

/// Piecewise constant jump intensity. `values[i]` applies on
/// `[knots[i], knots[i+1])`, the last value up to the horizon; `knots[0] = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityFn {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl IntensityFn {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.is_empty() || knots.len() != values.len() {
            return Err(Error::InvalidModel(
                "intensity needs one value per knot and at least one knot".into(),
            ));
        }
        if knots[0] != 0.0 {
            return Err(Error::InvalidModel("first intensity knot must be 0".into()));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) || knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidModel(
                "intensity knots must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidModel(
                "intensity values must be positive and finite".into(),
            ));
        }
        Ok(Self { knots, values })
    }

    pub fn constant(rate: f64) -> Result<Self> {
        Self::new(vec![0.0], vec![rate])
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = self.knots.partition_point(|&k| k <= t).max(1) - 1;
        self.values[i]
    }

    /// `||lambda||_inf`.
    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// `int_0^t lambda(s) ds` for `t >= 0`.
    pub fn integral(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (i, (&start, &v)) in self.knots.iter().zip(&self.values).enumerate() {
            if t <= start {
                break;
            }
            let end = self.knots.get(i + 1).map_or(t, |&next| next.min(t));
            acc += v * (end - start);
        }
        acc
    }
}

/// Linear growth constants `|f(x)| <= c (1 + |x|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthConstants {
    pub mu: f64,
    pub sigma: f64,
    pub rho: f64,
}

/// `dX = mu(X) dt + sigma(X) dW + rho(X-) dN`, `X_0 = xi`, on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientModel {
    mu: PiecewisePoly,
    sigma: AffineFn,
    rho: AffineFn,
    lambda: IntensityFn,
    xi: f64,
    horizon: f64,
}

impl CoefficientModel {
    pub fn new(
        mu: PiecewisePoly,
        sigma: AffineFn,
        rho: AffineFn,
        lambda: IntensityFn,
        xi: f64,
        horizon: f64,
    ) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if !xi.is_finite() {
            return Err(Error::InvalidModel("initial value must be finite".into()));
        }
        let finite = [sigma.intercept, sigma.slope, rho.intercept, rho.slope];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite sigma or rho".into()));
        }
        if lambda.knots.iter().any(|&k| k > horizon) {
            return Err(Error::InvalidModel(
                "intensity knot beyond the horizon".into(),
            ));
        }
        for (i, &zeta) in mu.breakpoints().iter().enumerate() {
            if sigma.eval(zeta) == 0.0 {
                return Err(Error::DegenerateDiffusion { index: i + 1, zeta });
            }
            let (left, right) = mu.one_sided_limits(i + 1)?;
            if left == right {
                return Err(Error::InvalidModel(format!(
                    "drift is continuous at listed breakpoint {zeta}"
                )));
            }
        }
        Ok(Self {
            mu,
            sigma,
            rho,
            lambda,
            xi,
            horizon,
        })
    }

    pub fn mu(&self) -> &PiecewisePoly {
        &self.mu
    }

    pub fn sigma(&self) -> AffineFn {
        self.sigma
    }

    pub fn rho(&self) -> AffineFn {
        self.rho
    }

    pub fn lambda(&self) -> &IntensityFn {
        &self.lambda
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn breakpoints(&self) -> &[f64] {
        self.mu.breakpoints()
    }

    /// Same coefficients started from a different initial value.
    pub fn with_xi(&self, xi: f64) -> Self {
        Self { xi, ..self.clone() }
    }

    pub fn eval_mu(&self, x: f64) -> f64 {
        self.mu.eval(x)
    }

    pub fn one_sided_limits(&self, k: usize) -> Result<(f64, f64)> {
        self.mu.one_sided_limits(k)
    }

    pub fn growth_constants(&self) -> GrowthConstants {
        GrowthConstants {
            mu: self.mu.growth_constant(),
            sigma: self.sigma.growth_constant(),
            rho: self.rho.growth_constant(),
        }
    }

    /// `kappa_t`, the exact integral of the intensity over `[0, t]`.
    pub fn cumulative_intensity(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        Ok(self.lambda.integral(t))
    }

    /// One of the built-in models: `example1` (drift pointing away from the
    /// discontinuity at 0) or `example2` (drift pointing towards it). Both use
    /// `sigma(x) = x + 0.1`, `rho(x) = x`, `lambda = 1`, `xi = 0.1`, `T = 1`.
    pub fn builtin(name: &str) -> Result<Self> {
        let (left, right) = match name {
            "example1" => (-1.0, 1.0),
            "example2" => (1.0, -1.0),
            _ => return Err(Error::UnknownModel(name.to_string())),
        };
        Self::new(
            PiecewisePoly::step(vec![0.0], &[left, right])?,
            AffineFn::new(0.1, 1.0),
            AffineFn::new(0.0, 1.0),
            IntensityFn::constant(1.0)?,
            0.1,
            1.0,
        )
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &["example1", "example2"]
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from(self))?)
    }

    /// Resolves a built-in name, otherwise reads a JSON model file.
    pub fn load(source: &str) -> Result<Self> {
        if Self::builtin_names().contains(&source) {
            return Self::builtin(source);
        }
        let text = std::fs::read_to_string(Path::new(source))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DriftFile {
    breakpoints: Vec<f64>,
    pieces: Vec<Vec<f64>>,
}

/// On-disk model layout.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    mu: DriftFile,
    sigma: AffineFn,
    rho: AffineFn,
    lambda: IntensityFn,
    xi: f64,
    #[serde(rename = "T")]
    horizon: f64,
}

impl TryFrom<ModelFile> for CoefficientModel {
    type Error = Error;

    fn try_from(file: ModelFile) -> Result<Self> {
        let pieces = file
            .mu
            .pieces
            .into_iter()
            .map(Polynomial::new)
            .collect::<Result<Vec<_>>>()?;
        let lambda = IntensityFn::new(file.lambda.knots, file.lambda.values)?;
        CoefficientModel::new(
            PiecewisePoly::new(file.mu.breakpoints, pieces)?,
            file.sigma,
            file.rho,
            lambda,
            file.xi,
            file.horizon,
        )
    }
}

impl From<&CoefficientModel> for ModelFile {
    fn from(m: &CoefficientModel) -> Self {
        ModelFile {
            mu: DriftFile {
                breakpoints: m.mu.breakpoints.clone(),
                pieces: m.mu.pieces.iter().map(|p| p.coeffs.clone()).collect(),
            },
            sigma: m.sigma,
            rho: m.rho,
            lambda: m.lambda.clone(),
            xi: m.xi,
            horizon: m.horizon,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example1() -> CoefficientModel {
        CoefficientModel::builtin("example1").unwrap()
    }

    #[test]
    fn example1_drift_values() {
        let m = example1();
        assert_eq!(m.eval_mu(0.5), 1.0);
        assert_eq!(m.eval_mu(-0.5), -1.0);
        assert_eq!(m.eval_mu(0.0), 1.0);
    }

    #[test]
    fn one_sided_limits_of_examples() {
        assert_eq!(example1().one_sided_limits(1).unwrap(), (-1.0, 1.0));
        let ex2 = CoefficientModel::builtin("example2").unwrap();
        assert_eq!(ex2.one_sided_limits(1).unwrap(), (1.0, -1.0));
        assert!(matches!(
            example1().one_sided_limits(2),
            Err(Error::BreakpointIndex { index: 2, count: 1 })
        ));
        assert!(example1().one_sided_limits(0).is_err());
    }

    #[test]
    fn identical_pieces_have_equal_limits() {
        let f = PiecewisePoly::step(vec![0.3], &[2.5, 2.5]).unwrap();
        assert_eq!(f.one_sided_limits(1).unwrap(), (2.5, 2.5));
    }

    #[test]
    fn growth_constants_follow_the_recipe() {
        let g = example1().growth_constants();
        assert_eq!(g.sigma, 1.0);
        assert_eq!(g.rho, 1.0);
        assert_eq!(g.mu, 1.0);
        // brute force over a dense grid
        for i in 0..=100_000 {
            let x = -100.0 + 200.0 * i as f64 / 100_000.0;
            assert!(example1().eval_mu(x).abs() <= g.mu * (1.0 + x.abs()));
        }
    }

    #[test]
    fn cumulative_intensity_of_step_function() {
        let lambda = IntensityFn::new(vec![0.0, 0.5], vec![2.0, 4.0]).unwrap();
        let m = CoefficientModel::new(
            PiecewisePoly::affine(0.0, 0.0),
            AffineFn::new(1.0, 0.0),
            AffineFn::zero(),
            lambda,
            0.0,
            1.0,
        )
        .unwrap();
        assert_eq!(m.cumulative_intensity(0.0).unwrap(), 0.0);
        assert_eq!(m.cumulative_intensity(0.75).unwrap(), 2.0);
        assert_eq!(m.cumulative_intensity(1.0).unwrap(), 3.0);
        assert!(m.cumulative_intensity(1.5).is_err());
        assert!(m.cumulative_intensity(-0.1).is_err());
        assert_eq!(example1().cumulative_intensity(1.0).unwrap(), 1.0);
    }

    #[test]
    fn rejects_vanishing_sigma_at_breakpoint() {
        let err = CoefficientModel::new(
            PiecewisePoly::step(vec![-0.1], &[-1.0, 1.0]).unwrap(),
            AffineFn::new(0.1, 1.0),
            AffineFn::zero(),
            IntensityFn::constant(1.0).unwrap(),
            0.0,
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateDiffusion { index: 1, .. }));
    }

    #[test]
    fn rejects_malformed_drift() {
        let cubic = Polynomial::new(vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(PiecewisePoly::new(vec![], vec![cubic.clone()]).is_err());
        assert!(PiecewisePoly::new(vec![1.0, 0.0], vec![Polynomial::constant(0.0); 3]).is_err());
        assert!(PiecewisePoly::new(vec![0.0], vec![Polynomial::constant(0.0)]).is_err());
        assert!(Polynomial::new(vec![1.0; 5]).is_err());
        // a cubic is fine on a bounded middle piece
        assert!(PiecewisePoly::new(
            vec![0.0, 1.0],
            vec![Polynomial::constant(0.0), cubic, Polynomial::constant(2.0)]
        )
        .is_ok());
    }

    #[test]
    fn rejects_continuous_breakpoint_in_model() {
        let err = CoefficientModel::new(
            PiecewisePoly::step(vec![0.0], &[1.0, 1.0]).unwrap(),
            AffineFn::new(1.0, 0.0),
            AffineFn::zero(),
            IntensityFn::constant(1.0).unwrap(),
            0.0,
            1.0,
        );
        assert!(err.is_err());
    }

    #[test]
    fn polynomial_sup_and_lipschitz() {
        // p(x) = x^3 - 3x on [-2, 2]: |p| peaks at 2, |p'| = |3x^2 - 3| peaks at 9.
        let p = Polynomial::new(vec![0.0, -3.0, 0.0, 1.0]).unwrap();
        assert_eq!(p.max_abs_on(-2.0, 2.0), 2.0);
        assert_eq!(p.lipschitz_on(-2.0, 2.0), 9.0);
        assert_eq!(p.max_abs_on(-0.5, 0.5), 1.375);
        let f = PiecewisePoly::new(
            vec![-2.0, 2.0],
            vec![Polynomial::affine(1.0, -4.0), p, Polynomial::constant(3.0)],
        )
        .unwrap();
        assert_eq!(f.lipschitz_constants(), vec![4.0, 9.0, 0.0]);
        assert_eq!(f.growth_constant(), 4.0);
    }

    #[test]
    fn json_round_trip() {
        let m = example1();
        let text = m.to_json().unwrap();
        assert!(text.contains("\"T\""));
        assert_eq!(CoefficientModel::from_json(&text).unwrap(), m);
    }

    #[test]
    fn json_schema_matches_layout() {
        let text = r#"{"mu": {"breakpoints": [0.0], "pieces": [[-1], [1]]},
            "sigma": [0.1, 1.0], "rho": [0.0, 1.0],
            "lambda": {"knots": [0.0], "values": [1.0]}, "xi": 0.1, "T": 1.0}"#;
        assert_eq!(CoefficientModel::from_json(text).unwrap(), example1());
        assert!(CoefficientModel::from_json("{}").is_err());
        assert!(matches!(
            CoefficientModel::builtin("nope"),
            Err(Error::UnknownModel(_))
        ));
    }
}
