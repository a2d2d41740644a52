//! Simulation of RCAR(1) paths and classification of parameterisations.
//!
//! A path is generated from the recursion
//! `X_t = (phi + b_t) X_{t-1} + e_t` started at `X_0 = x0`; the first
//! `burn_in` values are discarded and an optional deterministic component
//! `d_t` is added to the retained window.
//!
//! The process admits a strictly stationary solution iff the top Lyapunov
//! exponent `E ln|phi + b_0|` is negative. For Gaussian `b_0` it is computed
//! here by quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::rngdist::{Dist, RngStream};
use crate::series::TimeSeries;

/// Sub-stream tag for the `b_t` draws of [`simulate`].
pub const COEFFICIENT_STREAM: u64 = 1;
/// Sub-stream tag for the `e_t` draws of [`simulate`].
pub const ERROR_STREAM: u64 = 2;

pub const DEFAULT_BURN_IN: usize = 1000;

/// Deterministic component added to the simulated path, indexed `t = 1..T`
/// over the retained window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Deterministic {
    #[default]
    None,
    Constant { level: f64 },
    /// `(start, level)` pairs; each level holds from `start` until the next
    /// start. Starts must increase strictly and the first must be 1.
    PiecewiseConstant { levels: Vec<(usize, f64)> },
    Sinusoid { amplitude: f64, period: f64, phase: f64 },
    LinearTrend { intercept: f64, slope: f64 },
}

impl Deterministic {
    pub fn validate(&self) -> Result<()> {
        match self {
            Deterministic::PiecewiseConstant { levels } => {
                if levels.first().map(|l| l.0) != Some(1) {
                    return Err(Error::param("piecewise-constant levels must start at index 1"));
                }
                if levels.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::param("piecewise-constant starts must increase strictly"));
                }
                if levels.iter().any(|l| !l.1.is_finite()) {
                    return Err(Error::param("piecewise-constant levels must be finite"));
                }
                Ok(())
            }
            Deterministic::Sinusoid { amplitude, period, phase } => {
                if !(*period > 0.0) || !amplitude.is_finite() || !phase.is_finite() {
                    return Err(Error::param("sinusoid needs a positive period and finite amplitude/phase"));
                }
                Ok(())
            }
            Deterministic::Constant { level } if !level.is_finite() => {
                Err(Error::param("constant level must be finite"))
            }
            Deterministic::LinearTrend { intercept, slope } if !(intercept.is_finite() && slope.is_finite()) => {
                Err(Error::param("trend coefficients must be finite"))
            }
            _ => Ok(()),
        }
    }

    /// Whether `T^{-1} sum d_t^2` stays bounded, i.e. the test can be run
    /// on the raw data without detrending.
    pub fn is_square_integrable(&self) -> bool {
        match self {
            Deterministic::LinearTrend { slope, .. } => *slope == 0.0,
            _ => true,
        }
    }

    pub fn value(&self, t: usize) -> f64 {
        match self {
            Deterministic::None => 0.0,
            Deterministic::Constant { level } => *level,
            Deterministic::PiecewiseConstant { levels } => {
                let i = levels.partition_point(|l| l.0 <= t);
                if i == 0 {
                    0.0
                } else {
                    levels[i - 1].1
                }
            }
            Deterministic::Sinusoid { amplitude, period, phase } => {
                amplitude * (2.0 * std::f64::consts::PI * t as f64 / period + phase).sin()
            }
            Deterministic::LinearTrend { intercept, slope } => intercept + slope * t as f64,
        }
    }
}

/// Full description of a data generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcarParams {
    pub phi: f64,
    pub b_dist: Dist,
    pub e_dist: Dist,
    pub x0: f64,
    pub burn_in: usize,
    pub deterministic: Deterministic,
}

impl RcarParams {
    /// Pure AR(1) with standard normal errors, `x0 = 0` and the default burn-in.
    pub fn ar1(phi: f64) -> Self {
        Self {
            phi,
            b_dist: Dist::Degenerate { value: 0.0 },
            e_dist: Dist::standard_normal(),
            x0: 0.0,
            burn_in: DEFAULT_BURN_IN,
            deterministic: Deterministic::None,
        }
    }

    /// RCAR(1) with `b_t ~ N(0, sigma_b2)` (degenerate at zero if `sigma_b2 = 0`).
    pub fn gaussian(phi: f64, sigma_b2: f64) -> Self {
        let mut p = Self::ar1(phi);
        if sigma_b2 > 0.0 {
            p.b_dist = Dist::Gaussian { variance: sigma_b2 };
        }
        p
    }

    pub fn with_errors(mut self, e_dist: Dist) -> Self {
        self.e_dist = e_dist;
        self
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_x0(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }

    pub fn with_deterministic(mut self, d: Deterministic) -> Self {
        self.deterministic = d;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.phi.is_finite() || !self.x0.is_finite() {
            return Err(Error::param("phi and x0 must be finite"));
        }
        self.b_dist.validate()?;
        self.e_dist.validate()?;
        if !self.b_dist.is_symmetric() || !self.e_dist.is_symmetric() {
            return Err(Error::param("b_t and e_t must have symmetric laws"));
        }
        self.deterministic.validate()
    }
}

/// Generate `t` observations of `d_t + X_t`.
///
/// `b_t` and `e_t` are drawn from the sub-streams [`COEFFICIENT_STREAM`] and
/// [`ERROR_STREAM`] of `stream`, one value per step including the burn-in.
pub fn simulate(params: &RcarParams, t: usize, stream: RngStream) -> Result<TimeSeries> {
    if t == 0 {
        return Err(Error::param("sample size must be at least 1"));
    }
    params.validate()?;
    let b = params.b_dist.sampler()?;
    let e = params.e_dist.sampler()?;
    let mut b_rng = stream.derive(COEFFICIENT_STREAM).rng();
    let mut e_rng = stream.derive(ERROR_STREAM).rng();

    let total = params.burn_in + t;
    let mut out = Vec::with_capacity(t);
    let mut x = params.x0;
    for step in 1..=total {
        x = (params.phi + b.sample(&mut b_rng)) * x + e.sample(&mut e_rng);
        if !x.is_finite() {
            return Err(Error::Overflow { step });
        }
        if step > params.burn_in {
            let idx = step - params.burn_in;
            let y = params.deterministic.value(idx) + x;
            if !y.is_finite() {
                return Err(Error::Overflow { step });
            }
            out.push(y);
        }
    }
    TimeSeries::new(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    StrictlyStationary,
    BoundaryNonstationary,
    ExplosiveNonstationary,
}

impl Regime {
    pub fn is_stationary(self) -> bool {
        self == Regime::StrictlyStationary
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::StrictlyStationary => "stationary",
            Regime::BoundaryNonstationary => "boundary",
            Regime::ExplosiveNonstationary => "explosive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeLabel {
    #[serde(with = "crate::serde_float")]
    pub lyapunov: f64,
    pub regime: Regime,
    /// `phi^2 + E b_0^2 < 1`.
    pub finite_variance: bool,
}

fn std_normal_pdf(z: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// `E ln|Z + c|` for standard normal `Z`.
///
/// Writing `w = |Z + c| = s^2` folds both sides of the singularity at
/// `Z = -c` into one integral over `s >= 0` whose integrand
/// `4 s ln s [pdf(s^2 - c) + pdf(s^2 + c)]` is continuous.
fn expected_log_abs_shifted_normal(c: f64) -> f64 {
    let c = c.abs();
    let f = |s: f64| {
        if s == 0.0 {
            return 0.0;
        }
        let w = s * s;
        4.0 * s * s.ln() * (std_normal_pdf(w - c) + std_normal_pdf(w + c))
    };
    // Beyond w = c + 40 both densities are below 1e-340.
    let upper = (c + 40.0).sqrt();
    // Break points around the mode s = sqrt(c) keep the adaptive rule honest
    // when the mass is concentrated far from zero.
    let mut cuts = vec![0.0];
    for k in [-8.0, -4.0, -2.0, 0.0, 2.0, 4.0, 8.0] {
        let w: f64 = c + k;
        if w > 0.0 {
            let s = w.sqrt();
            if s > *cuts.last().unwrap() && s < upper {
                cuts.push(s);
            }
        }
    }
    cuts.push(upper);
    cuts.windows(2).map(|w| quad::integrate(&f, w[0], w[1], 1e-14, 50).0).sum()
}

/// `E ln|phi + b_0|` for `b_0 ~ N(0, sigma_b2)`.
///
/// Returns `ln|phi|` when `sigma_b2 = 0` (negative infinity at `phi = 0`)
/// and NaN for non-finite or negative input.
pub fn lyapunov_gaussian(phi: f64, sigma_b2: f64) -> f64 {
    if !phi.is_finite() || !sigma_b2.is_finite() || sigma_b2 < 0.0 {
        return f64::NAN;
    }
    if sigma_b2 == 0.0 {
        return phi.abs().ln();
    }
    let sigma = sigma_b2.sqrt();
    sigma.ln() + expected_log_abs_shifted_normal(phi / sigma)
}

pub const DEFAULT_ZERO_TOL: f64 = 1e-6;

pub fn classify(phi: f64, sigma_b2: f64, zero_tol: f64) -> RegimeLabel {
    let lyapunov = lyapunov_gaussian(phi, sigma_b2);
    let regime = if lyapunov.abs() <= zero_tol {
        Regime::BoundaryNonstationary
    } else if lyapunov < 0.0 {
        Regime::StrictlyStationary
    } else {
        Regime::ExplosiveNonstationary
    };
    RegimeLabel { lyapunov, regime, finite_variance: phi * phi + sigma_b2 < 1.0 }
}

/// The `sigma_b2 > 0` at which `E ln|phi + b_0|` crosses zero from below,
/// for `|phi| <= 1` (the exponent is even in `phi`).
pub fn solve_boundary_sigma(phi: f64) -> Result<f64> {
    let phi = phi.abs();
    if !(phi <= 1.0) {
        return Err(Error::param(format!("boundary search needs |phi| <= 1, got {phi}")));
    }
    // For small variance the exponent is ln(phi) - sigma^2/(2 phi^2) < 0,
    // which also covers phi = 1 where it starts at exactly zero.
    let mut lo = if phi == 0.0 { 1e-3 } else { 1e-3 * phi * phi };
    if lyapunov_gaussian(phi, lo) >= 0.0 {
        return Err(Error::Numeric("no sign change below the lower bracket".into()));
    }
    let mut hi = 1.0;
    while lyapunov_gaussian(phi, hi) <= 0.0 {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::Numeric("no root bracketed".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = lyapunov_gaussian(phi, mid);
        if v.abs() < 1e-8 && hi - lo < 1e-9 {
            return Ok(mid);
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    if lyapunov_gaussian(phi, mid).abs() < 1e-8 {
        Ok(mid)
    } else {
        Err(Error::Numeric("bisection did not converge".into()))
    }
}
