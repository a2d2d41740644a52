//! The randomised test and the strong decision rule.
//!
//! The diagnostic `D_T` has only rates, not a usable limit law, so it is
//! mapped to `l_T = g(psi(T) D_T)` (or `g(1 / (psi(T) D_T))` when the null is
//! non-stationarity), which diverges under the null and vanishes under the
//! alternative. The researcher then injects randomness:
//!
//! 1. draw `xi_1..xi_R` i.i.d. from `G`;
//! 2. for each atom `u` of the two-point law `F`, set
//!    `zeta_j(u) = 1{ sqrt(l_T) xi_j <= u }`;
//! 3. `vartheta(u) = [G(0)(1 - G(0))]^{-1/2} R^{-1/2} sum_j (zeta_j(u) - G(0))`;
//! 4. `Theta = sum_u F({u}) vartheta(u)^2`.
//!
//! Under the null `Theta` is asymptotically chi-squared(1); under the
//! alternative `Theta / R -> 1`. Repeating step 1-4 `S` times and comparing
//! the acceptance fraction `Q(alpha)` with an iterated-logarithm bound gives
//! a verdict that no longer depends on the injected randomness.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::rngdist::{Dist, RngStream};
use crate::series::TimeSeries;
use crate::stat::{compute_diagnostic, DiagnosticConfig};

/// The increasing map `g` with `g(0) = 0` applied to `psi(T) D_T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GFunction {
    /// `exp(exp(x) - 1) - 1`
    #[default]
    DoubleExp,
    /// `exp(x) - 1`
    SingleExp,
    Identity,
}

impl GFunction {
    /// Evaluates `g(x)` for `x >= 0`, saturating to `+inf` on overflow.
    pub fn apply(self, x: f64) -> f64 {
        match self {
            GFunction::DoubleExp => x.exp_m1().exp_m1(),
            GFunction::SingleExp => x.exp_m1(),
            GFunction::Identity => x,
        }
    }
}

/// Number of randomisation draws `R` as a function of the sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RRule {
    #[default]
    EqualT,
    Fixed { r: usize },
    /// `R = ceil(k T)`.
    Ratio { k: f64 },
}

impl RRule {
    pub fn resolve(self, t: usize) -> Result<usize> {
        let r = match self {
            RRule::EqualT => t,
            RRule::Fixed { r } => r,
            RRule::Ratio { k } => {
                if !(k > 0.0 && k.is_finite()) {
                    return Err(Error::param(format!("R ratio must be positive, got {k}")));
                }
                (k * t as f64).ceil() as usize
            }
        };
        if r == 0 {
            return Err(Error::param("R must be at least 1"));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NullHypothesis {
    /// H0: the series is strictly stationary.
    #[default]
    Stationary,
    /// H0: the series is non-stationary.
    Nonstationary,
}

/// Law used for the critical value `c_alpha` and the p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CriticalValueLaw {
    /// Upper quantile of chi-squared with one degree of freedom, the null
    /// limit of `Theta`.
    #[default]
    ChiSquared1,
    /// `P(N(0,1) >= c_alpha) = alpha`.
    StdNormalLiteral,
}

impl CriticalValueLaw {
    pub fn critical_value(self, alpha: f64) -> f64 {
        let n = Normal::standard();
        match self {
            CriticalValueLaw::ChiSquared1 => n.inverse_cdf(1.0 - alpha / 2.0).powi(2),
            CriticalValueLaw::StdNormalLiteral => n.inverse_cdf(1.0 - alpha),
        }
    }

    /// Upper-tail probability of `theta`.
    pub fn p_value(self, theta: f64) -> f64 {
        let n = Normal::standard();
        match self {
            // P(chi2_1 >= x) = 2 (1 - Phi(sqrt x))
            CriticalValueLaw::ChiSquared1 => (2.0 * n.sf(theta.max(0.0).sqrt())).min(1.0),
            CriticalValueLaw::StdNormalLiteral => n.sf(theta),
        }
    }
}

/// Every tuning knob of the randomised test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    /// Exponent in `psi(T) = (ln T)^beta`.
    pub beta: f64,
    pub g: GFunction,
    pub r_rule: RRule,
    pub alpha: f64,
    /// Law `G` of the randomisation draws `xi_j`.
    pub xi_dist: Dist,
    /// Discrete law `F` of the threshold `u`.
    pub u_dist: Dist,
    pub null: NullHypothesis,
    /// Repetitions `S` of the strong decision rule.
    pub s_reps: usize,
    pub critical_value_law: CriticalValueLaw,
    pub diagnostic: DiagnosticConfig,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            beta: 1.25,
            g: GFunction::DoubleExp,
            r_rule: RRule::EqualT,
            alpha: 0.05,
            xi_dist: Dist::standard_normal(),
            u_dist: Dist::TwoPoint { magnitude: std::f64::consts::SQRT_2 },
            null: NullHypothesis::Stationary,
            s_reps: 1000,
            critical_value_law: CriticalValueLaw::ChiSquared1,
            diagnostic: DiagnosticConfig::default(),
        }
    }
}

impl TestConfig {
    pub fn with_null(mut self, null: NullHypothesis) -> Self {
        self.null = null;
        self
    }

    pub fn with_s_reps(mut self, s: usize) -> Self {
        self.s_reps = s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::param(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        self.xi_dist.validate()?;
        if !matches!(self.xi_dist, Dist::Gaussian { .. } | Dist::StudentT { .. }) {
            return Err(Error::param("the randomisation law G must have a bounded density"));
        }
        self.u_dist.validate()?;
        if self.u_dist.atoms().is_none() {
            return Err(Error::param("the threshold law F must be discrete (two-point or degenerate)"));
        }
        self.diagnostic.validate()
    }

    /// `G(0)`, strictly inside (0, 1) for the admissible laws.
    pub fn g0(&self) -> f64 {
        self.xi_dist.cdf_at_zero()
    }
}

/// `psi(T) = (ln T)^beta`.
pub fn psi(t: usize, beta: f64) -> f64 {
    (t as f64).ln().powf(beta)
}

/// The argument fed to `g`: `psi D_T` or its reciprocal.
pub fn lt_argument(d_t: f64, t: usize, cfg: &TestConfig) -> f64 {
    let x = psi(t, cfg.beta) * d_t;
    match cfg.null {
        NullHypothesis::Stationary => x,
        NullHypothesis::Nonstationary => {
            if x == 0.0 {
                f64::INFINITY
            } else {
                1.0 / x
            }
        }
    }
}

/// `l_T`, possibly `+inf`.
pub fn compute_lt(d_t: f64, t: usize, cfg: &TestConfig) -> f64 {
    cfg.g.apply(lt_argument(d_t, t, cfg))
}

/// `zeta_j = 1{ sqrt(l) xi_j <= u }` written as `xi_j <= u / sqrt(l)`, with
/// the limits taken explicitly at `l = 0` and `l = inf`.
pub fn threshold(l_t: f64, u: f64) -> f64 {
    if u == 0.0 || l_t == f64::INFINITY {
        0.0
    } else if l_t == 0.0 {
        if u > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    } else {
        u / l_t.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomTerm {
    pub u: f64,
    pub weight: f64,
    pub vartheta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaDetails {
    pub r: usize,
    pub atoms: Vec<AtomTerm>,
}

/// `Theta` for given randomisation draws.
pub fn theta_from_draws(l_t: f64, xi: &[f64], cfg: &TestConfig) -> Result<(f64, ThetaDetails)> {
    let atoms = cfg
        .u_dist
        .atoms()
        .ok_or_else(|| Error::param("the threshold law F must be discrete"))?;
    if xi.is_empty() {
        return Err(Error::param("R must be at least 1"));
    }
    let g0 = cfg.g0();
    if !(g0 > 0.0 && g0 < 1.0) {
        return Err(Error::param("G(0) must lie strictly inside (0, 1)"));
    }
    let r = xi.len();
    let scale = 1.0 / ((g0 * (1.0 - g0)).sqrt() * (r as f64).sqrt());
    let mut theta = 0.0;
    let mut terms = Vec::with_capacity(atoms.len());
    for (u, weight) in atoms {
        let thr = threshold(l_t, u);
        let hits = xi.iter().filter(|&&x| x <= thr).count();
        let vartheta = scale * (hits as f64 - g0 * r as f64);
        theta += weight * vartheta * vartheta;
        terms.push(AtomTerm { u, weight, vartheta });
    }
    Ok((theta, ThetaDetails { r, atoms: terms }))
}

/// Draw `xi_1..xi_R` from the start of `stream` and compute `Theta`.
pub fn randomized_theta(l_t: f64, r: usize, cfg: &TestConfig, stream: RngStream) -> Result<(f64, ThetaDetails)> {
    let xi = crate::rngdist::draw(stream, cfg.xi_dist, r)?;
    theta_from_draws(l_t, &xi, cfg)
}

/// Result of a single randomised test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub null: NullHypothesis,
    pub theta: f64,
    #[serde(with = "crate::serde_float")]
    pub l_t: f64,
    pub d_t: f64,
    pub v_p: f64,
    pub p: usize,
    pub t: usize,
    pub r: usize,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
}

fn warn_if_r_too_large(r: usize, t: usize, cfg: &TestConfig) {
    if matches!(cfg.r_rule, RRule::EqualT) {
        return;
    }
    let bound = cfg.g.apply(psi(t, cfg.beta));
    if (r as f64).sqrt() > bound {
        log::warn!("R = {r} exceeds g(psi(T))^2 = {:.3e}; the test may be oversized", bound * bound);
    }
}

pub fn run_test(series: &TimeSeries, cfg: &TestConfig, stream: RngStream) -> Result<TestOutcome> {
    cfg.validate()?;
    let diag = compute_diagnostic(series, &cfg.diagnostic)?;
    let t = series.len();
    let r = cfg.r_rule.resolve(t)?;
    warn_if_r_too_large(r, t, cfg);
    let l_t = compute_lt(diag.d_t, t, cfg);
    let (theta, _) = randomized_theta(l_t, r, cfg, stream)?;
    let critical_value = cfg.critical_value_law.critical_value(cfg.alpha);
    Ok(TestOutcome {
        null: cfg.null,
        theta,
        l_t,
        d_t: diag.d_t,
        v_p: diag.v_p,
        p: diag.p,
        t,
        r,
        critical_value,
        p_value: cfg.critical_value_law.p_value(theta),
        reject: theta >= critical_value,
    })
}

/// `D_{alpha,S} = (1 - alpha) - sqrt(alpha (1 - alpha)) sqrt(2 ln ln S / S)`.
pub fn decision_bound(alpha: f64, s: usize) -> f64 {
    let s = s as f64;
    (1.0 - alpha) - (alpha * (1.0 - alpha)).sqrt() * (2.0 * s.ln().ln() / s).sqrt()
}

pub const MIN_STRONG_REPS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    AcceptNull,
    RejectNull,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionReport {
    pub null: NullHypothesis,
    /// Fraction of repetitions with `Theta <= c_alpha`.
    pub q_alpha: f64,
    pub bound: f64,
    pub decision: Decision,
    pub s_used: usize,
    pub d_t: f64,
    #[serde(with = "crate::serde_float")]
    pub l_t: f64,
}

impl DecisionReport {
    /// The verdict in terms of the series rather than the null.
    pub fn verdict(&self) -> &'static str {
        match (self.null, self.decision) {
            (NullHypothesis::Stationary, Decision::AcceptNull)
            | (NullHypothesis::Nonstationary, Decision::RejectNull) => "stationary",
            _ => "nonstationary",
        }
    }
}

/// Thetas of the `S` repetitions; repetition `s` uses `stream.derive(s)`.
pub fn repeated_thetas(l_t: f64, r: usize, cfg: &TestConfig, stream: RngStream, s_reps: usize) -> Result<Vec<f64>> {
    let one = |s: usize| randomized_theta(l_t, r, cfg, stream.derive(s as u64)).map(|x| x.0);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..s_reps).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..s_reps).map(one).collect()
    }
}

/// Strong decision rule: accept the null iff `Q(alpha) >= D_{alpha,S}`.
pub fn strong_decide(series: &TimeSeries, cfg: &TestConfig, stream: RngStream) -> Result<DecisionReport> {
    cfg.validate()?;
    if cfg.s_reps < MIN_STRONG_REPS {
        return Err(Error::param(format!(
            "the strong rule needs S >= {MIN_STRONG_REPS}, got {}",
            cfg.s_reps
        )));
    }
    let diag = compute_diagnostic(series, &cfg.diagnostic)?;
    let t = series.len();
    let r = cfg.r_rule.resolve(t)?;
    warn_if_r_too_large(r, t, cfg);
    let l_t = compute_lt(diag.d_t, t, cfg);
    let c_alpha = cfg.critical_value_law.critical_value(cfg.alpha);
    let thetas = repeated_thetas(l_t, r, cfg, stream, cfg.s_reps)?;
    let accepted = thetas.iter().filter(|&&th| th <= c_alpha).count();
    Ok(report_from_count(accepted, cfg, diag.d_t, l_t))
}

fn report_from_count(accepted: usize, cfg: &TestConfig, d_t: f64, l_t: f64) -> DecisionReport {
    let q_alpha = accepted as f64 / cfg.s_reps as f64;
    let bound = decision_bound(cfg.alpha, cfg.s_reps);
    DecisionReport {
        null: cfg.null,
        q_alpha,
        bound,
        decision: if q_alpha >= bound { Decision::AcceptNull } else { Decision::RejectNull },
        s_used: cfg.s_reps,
        d_t,
        l_t,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_values() {
        assert_eq!(GFunction::DoubleExp.apply(0.0), 0.0);
        let e = std::f64::consts::E;
        assert!((GFunction::DoubleExp.apply(1.0) - ((e - 1.0).exp() - 1.0)).abs() < 1e-12);
        assert!((GFunction::DoubleExp.apply(1.0) - 4.5749).abs() < 1e-4);
        assert_eq!(GFunction::SingleExp.apply(0.0), 0.0);
        assert_eq!(GFunction::Identity.apply(2.5), 2.5);
        assert_eq!(GFunction::DoubleExp.apply(f64::INFINITY), f64::INFINITY);
    }

    #[test]
    fn lt_saturates_for_typical_stationary_values() {
        let cfg = TestConfig::default();
        let psi_t = psi(2000, 1.25);
        assert!((psi_t - 2000f64.ln().powf(1.25)).abs() < 1e-12);
        assert!((lt_argument(0.5, 2000, &cfg) - 6.31).abs() < 0.01);
        // exp(exp(6.31) - 1) ~ 1e238 is still finite; the threshold
        // sqrt(2) / sqrt(l_T) is ~1e-119, indistinguishable from zero.
        let l = compute_lt(0.5, 2000, &cfg);
        assert!(l.is_finite() && l > 1e230, "{l}");
        // Saturation starts at x = ln(ln(f64::MAX) + 1) ~ 6.567.
        assert!(GFunction::DoubleExp.apply(6.56).is_finite());
        assert_eq!(GFunction::DoubleExp.apply(6.58), f64::INFINITY);
        assert_eq!(compute_lt(0.6, 2000, &cfg), f64::INFINITY);
    }

    #[test]
    fn orientation_duality() {
        let st = TestConfig::default();
        let ns = st.with_null(NullHypothesis::Nonstationary);
        for &d in &[1e-6, 0.01, 0.3, 1.0] {
            for &t in &[250usize, 1000, 2000] {
                let a = lt_argument(d, t, &st);
                let b = lt_argument(d, t, &ns);
                assert!((a * b - 1.0).abs() < 1e-14);
            }
        }
        assert_eq!(compute_lt(0.0, 100, &ns), f64::INFINITY);
        assert_eq!(compute_lt(0.0, 100, &st), 0.0);
    }

    #[test]
    fn infinite_lt_balanced_signs_gives_zero() {
        let (theta, det) = theta_from_draws(f64::INFINITY, &[1.0, -1.0], &TestConfig::default()).unwrap();
        assert_eq!(theta, 0.0);
        assert!(det.atoms.iter().all(|a| a.vartheta == 0.0));
    }

    #[test]
    fn zero_lt_gives_theta_equal_r() {
        let cfg = TestConfig::default();
        for r in [1usize, 2, 7, 100, 1000] {
            let (theta, _) = randomized_theta(0.0, r, &cfg, RngStream::new(3, r as u64)).unwrap();
            assert!((theta / r as f64 - 1.0).abs() < 1e-12, "R={r}: {theta}");
        }
    }

    #[test]
    fn hand_computed_example() {
        // Thresholds +-sqrt(2): zeta(+) = [1,1,0,1], zeta(-) = [0,0,0,1]
        // (-1.5 <= -1.414), so vartheta = 2 * 4^{-1/2} * (3 - 2) = 1 and
        // 2 * 4^{-1/2} * (1 - 2) = -1, and Theta = (1 + 1) / 2 = 1.
        let xi = [0.3, -0.8, 2.0, -1.5];
        let (theta, det) = theta_from_draws(1.0, &xi, &TestConfig::default()).unwrap();
        assert!((det.atoms[0].vartheta - 1.0).abs() < 1e-12);
        assert!((det.atoms[1].vartheta + 1.0).abs() < 1e-12);
        assert!((theta - 1.0).abs() < 1e-12);
        // Moving the last draw above -sqrt(2) empties zeta(-).
        let (theta, det) = theta_from_draws(1.0, &[0.3, -0.8, 2.0, -1.3], &TestConfig::default()).unwrap();
        assert!((det.atoms[1].vartheta + 2.0).abs() < 1e-12);
        assert!((theta - 2.5).abs() < 1e-12);
    }

    #[test]
    fn theta_bounded_by_r() {
        let cfg = TestConfig::default();
        for (k, &l) in [0.0, 1e-3, 0.5, 3.0, 1e4, f64::INFINITY].iter().enumerate() {
            let (theta, _) = randomized_theta(l, 500, &cfg, RngStream::new(8, k as u64)).unwrap();
            assert!(theta >= 0.0 && theta <= 500.0 * (1.0 + 1e-12), "l={l}: {theta}");
        }
    }

    #[test]
    fn critical_values() {
        let c = CriticalValueLaw::ChiSquared1.critical_value(0.05);
        assert!((c - 3.841_458_820_694_124).abs() < 1e-9, "{c}");
        let z = CriticalValueLaw::StdNormalLiteral.critical_value(0.05);
        assert!((z - 1.644_853_626_951_472_2).abs() < 1e-9, "{z}");
        assert!((CriticalValueLaw::ChiSquared1.p_value(c) - 0.05).abs() < 1e-9);
        assert!((CriticalValueLaw::StdNormalLiteral.p_value(z) - 0.05).abs() < 1e-9);
        assert_eq!(CriticalValueLaw::ChiSquared1.p_value(0.0), 1.0);
    }

    #[test]
    fn bound_matches_closed_form() {
        assert!((decision_bound(0.05, 5000) - 0.9436).abs() < 5e-5);
        for &a in &[0.01f64, 0.05, 0.1, 0.5] {
            for &s in &[16usize, 100, 1000, 5000, 100_000] {
                let sf = s as f64;
                let closed = (1.0 - a) - (a * (1.0 - a)).sqrt() * (2.0 * sf.ln().ln() / sf).sqrt();
                assert!((decision_bound(a, s) - closed).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = TestConfig::default();
        cfg.alpha = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = TestConfig::default();
        cfg.u_dist = Dist::standard_normal();
        assert!(cfg.validate().is_err());
        let mut cfg = TestConfig::default();
        cfg.xi_dist = Dist::Degenerate { value: 0.0 };
        assert!(cfg.validate().is_err());
        let mut cfg = TestConfig::default();
        cfg.beta = 0.0;
        assert!(cfg.validate().is_err());
        assert!(RRule::Fixed { r: 0 }.resolve(10).is_err());
        assert_eq!(RRule::Ratio { k: 0.5 }.resolve(11).unwrap(), 6);
    }

    #[test]
    fn strong_rule_rejects_small_s() {
        let s = TimeSeries::new((0..100).map(|i| (i as f64).sin()).collect()).unwrap();
        let cfg = TestConfig::default().with_s_reps(15);
        assert!(matches!(strong_decide(&s, &cfg, RngStream::new(0, 0)), Err(Error::Parameter(_))));
    }

    #[test]
    fn all_accepted_means_q_one() {
        let cfg = TestConfig::default().with_s_reps(100);
        let r = report_from_count(100, &cfg, 0.5, f64::INFINITY);
        assert_eq!(r.q_alpha, 1.0);
        assert_eq!(r.decision, Decision::AcceptNull);
        assert_eq!(r.verdict(), "stationary");
    }

    #[test]
    fn outcome_json_round_trip_with_infinite_lt() {
        let o = TestOutcome {
            null: NullHypothesis::Stationary,
            theta: 0.25,
            l_t: f64::INFINITY,
            d_t: 0.6,
            v_p: 1.2,
            p: 4,
            t: 1000,
            r: 1000,
            critical_value: 3.84,
            p_value: 0.6,
            reject: false,
        };
        let s = serde_json::to_string(&o).unwrap();
        assert!(s.contains("\"inf\""));
        assert_eq!(serde_json::from_str::<TestOutcome>(&s).unwrap(), o);
    }
}
