//! The scale-invariant diagnostic
//!
//! ```text
//! D_T = (T - p)^{-1} sum_{t=p+1}^{T} v_p / (v_p + |X_t|^s),
//! v_p = p^{-1} sum_{t=1}^{p} |X_t|^s,
//! ```
//!
//! (default `s = 2`), and the preprocessing steps applied to data before
//! testing. `D_T` settles at a positive constant for strictly stationary
//! data and decays polynomially to zero otherwise; it needs no moments of
//! `X_t` since every summand lies in `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// How the training-window length `p` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum PRule {
    /// `p = ceil(c0 * ln ln T)`, at least 1.
    Auto { c0: f64 },
    Fixed { p: usize },
}

impl Default for PRule {
    fn default() -> Self {
        PRule::Auto { c0: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticConfig {
    pub p_rule: PRule,
    /// Moment exponent applied to `|X_t|`.
    pub varsigma: f64,
    /// Demean the first `p` observations before computing `v_p`.
    pub demean_window: bool,
}

impl Default for DiagnosticConfig {
    fn default() -> Self {
        Self { p_rule: PRule::default(), varsigma: 2.0, demean_window: true }
    }
}

impl DiagnosticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.varsigma > 0.0 && self.varsigma.is_finite()) {
            return Err(Error::param(format!("moment exponent must be positive, got {}", self.varsigma)));
        }
        match self.p_rule {
            PRule::Auto { c0 } if !(c0 > 0.0 && c0.is_finite()) => {
                Err(Error::param(format!("C0 must be positive, got {c0}")))
            }
            PRule::Fixed { p: 0 } => Err(Error::param("window length p must be at least 1")),
            _ => Ok(()),
        }
    }

    /// Window length for a sample of size `t`; errors unless `p < t`.
    pub fn window_length(&self, t: usize) -> Result<usize> {
        self.validate()?;
        let p = match self.p_rule {
            PRule::Fixed { p } => p,
            PRule::Auto { c0 } => {
                if t < 3 {
                    return Err(Error::InsufficientData { needed: 2, got: t });
                }
                let lnln = (t as f64).ln().ln();
                ((c0 * lnln).ceil() as usize).max(1)
            }
        };
        if t <= p {
            return Err(Error::InsufficientData { needed: p, got: t });
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticResult {
    pub d_t: f64,
    pub v_p: f64,
    pub p: usize,
    pub t: usize,
    pub varsigma: f64,
}

#[inline]
fn abs_pow(x: f64, s: f64) -> f64 {
    if s == 2.0 {
        x * x
    } else {
        x.abs().powf(s)
    }
}

/// `v_p` and the window length `p` used for it.
pub fn compute_vp(series: &TimeSeries, cfg: &DiagnosticConfig) -> Result<(f64, usize)> {
    let p = cfg.window_length(series.len())?;
    let window = &series.values()[..p];
    let centre = if cfg.demean_window { window.iter().sum::<f64>() / p as f64 } else { 0.0 };
    let vp = window.iter().map(|x| abs_pow(x - centre, cfg.varsigma)).sum::<f64>() / p as f64;
    if !vp.is_finite() {
        return Err(Error::NonFinite { index: p });
    }
    Ok((vp, p))
}

/// `D_T` on the raw (not demeaned) observations `X_{p+1..T}`.
///
/// When `v_p = 0` every summand is taken as its `v_p -> 0+` limit, which is
/// zero for `X_t != 0`; a series that is identically zero has no defined
/// diagnostic.
pub fn compute_diagnostic(series: &TimeSeries, cfg: &DiagnosticConfig) -> Result<DiagnosticResult> {
    let (v_p, p) = compute_vp(series, cfg)?;
    let tail = &series.values()[p..];
    let n = tail.len() as f64;
    let d_t = if v_p == 0.0 {
        if series.values().iter().all(|&x| x == 0.0) {
            return Err(Error::DegenerateSeries);
        }
        0.0
    } else {
        let mut acc = 0.0;
        for &x in tail {
            let m = abs_pow(x, cfg.varsigma);
            // m = inf gives 0, the correct limit.
            acc += v_p / (v_p + m);
        }
        acc / n
    };
    Ok(DiagnosticResult { d_t, v_p, p, t: series.len(), varsigma: cfg.varsigma })
}

/// Transformations applied to a series before it is tested.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Preprocess {
    /// Leave the data alone; bounded deterministics need no treatment.
    None,
    /// Subtract the full-sample mean.
    Demean,
    /// Remove a least-squares line in `t = 1..T`.
    OlsDetrend,
    /// Remove intercept and trend estimated on quasi-differenced data
    /// with local-to-unity parameter `cbar`.
    GlsDetrend { cbar: f64 },
    LogTransform,
    FirstDifference,
}

/// Conventional local-to-unity constant for GLS detrending with a trend.
pub const DEFAULT_GLS_CBAR: f64 = -13.5;

impl Preprocess {
    pub fn gls() -> Self {
        Preprocess::GlsDetrend { cbar: DEFAULT_GLS_CBAR }
    }
}

/// Least squares fit of `y` on regressors `(a_t, b_t)`; returns the two
/// coefficients.
fn ols2(y: &[f64], a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let (mut saa, mut sab, mut sbb, mut say, mut sby) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..y.len() {
        saa += a[i] * a[i];
        sab += a[i] * b[i];
        sbb += b[i] * b[i];
        say += a[i] * y[i];
        sby += b[i] * y[i];
    }
    let det = saa * sbb - sab * sab;
    if det.abs() <= 1e-12 * saa * sbb || !det.is_finite() {
        return Err(Error::Numeric("singular detrending regression".into()));
    }
    Ok(((sbb * say - sab * sby) / det, (saa * sby - sab * say) / det))
}

pub fn preprocess(series: &TimeSeries, mode: Preprocess) -> Result<TimeSeries> {
    let x = series.values();
    let n = x.len();
    let out = match mode {
        Preprocess::None => x.to_vec(),
        Preprocess::Demean => {
            let m = x.iter().sum::<f64>() / n as f64;
            x.iter().map(|v| v - m).collect()
        }
        Preprocess::OlsDetrend => {
            if n < 3 {
                return Err(Error::InsufficientData { needed: 2, got: n });
            }
            let ones = vec![1.0; n];
            let t: Vec<f64> = (1..=n).map(|i| i as f64).collect();
            let (a, b) = ols2(x, &ones, &t)?;
            x.iter().zip(&t).map(|(v, ti)| v - a - b * ti).collect()
        }
        Preprocess::GlsDetrend { cbar } => {
            if n < 3 {
                return Err(Error::InsufficientData { needed: 2, got: n });
            }
            if !cbar.is_finite() {
                return Err(Error::param("cbar must be finite"));
            }
            let rho = 1.0 + cbar / n as f64;
            let t: Vec<f64> = (1..=n).map(|i| i as f64).collect();
            let mut yq = Vec::with_capacity(n);
            let mut cq = Vec::with_capacity(n);
            let mut tq = Vec::with_capacity(n);
            yq.push(x[0]);
            cq.push(1.0);
            tq.push(1.0);
            for i in 1..n {
                yq.push(x[i] - rho * x[i - 1]);
                cq.push(1.0 - rho);
                tq.push(t[i] - rho * t[i - 1]);
            }
            let (a, b) = ols2(&yq, &cq, &tq)?;
            x.iter().zip(&t).map(|(v, ti)| v - a - b * ti).collect()
        }
        Preprocess::LogTransform => {
            if let Some(i) = x.iter().position(|&v| v <= 0.0) {
                return Err(Error::Domain(format!("log of non-positive value {} at index {i}", x[i])));
            }
            x.iter().map(|v| v.ln()).collect()
        }
        Preprocess::FirstDifference => {
            if n < 2 {
                return Err(Error::InsufficientData { needed: 1, got: n });
            }
            x.windows(2).map(|w| w[1] - w[0]).collect()
        }
    };
    series.map_values(out)
}

/// Apply `modes` in order.
pub fn preprocess_chain(series: &TimeSeries, modes: &[Preprocess]) -> Result<TimeSeries> {
    modes.iter().try_fold(series.clone(), |s, &m| preprocess(&s, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{simulate, RcarParams};
    use crate::rngdist::RngStream;

    fn ts(v: &[f64]) -> TimeSeries {
        TimeSeries::new(v.to_vec()).unwrap()
    }

    fn fixed(p: usize, demean: bool) -> DiagnosticConfig {
        DiagnosticConfig { p_rule: PRule::Fixed { p }, varsigma: 2.0, demean_window: demean }
    }

    #[test]
    fn auto_window_length() {
        let cfg = DiagnosticConfig::default();
        assert_eq!(cfg.window_length(250).unwrap(), 4);
        assert_eq!(cfg.window_length(1000).unwrap(), 4);
        assert_eq!(cfg.window_length(2000).unwrap(), 5);
        assert_eq!(cfg.window_length(100_000).unwrap(), 5);
        assert!(cfg.window_length(2).is_err());
    }

    #[test]
    fn vp_examples() {
        let (vp, p) = compute_vp(&ts(&[1.0, -1.0, 1.0, -1.0, 5.0]), &fixed(4, false)).unwrap();
        assert_eq!((vp, p), (1.0, 4));
        let c = ts(&[3.0; 10]);
        assert_eq!(compute_vp(&c, &fixed(4, true)).unwrap().0, 0.0);
        assert_eq!(compute_vp(&c, &fixed(4, false)).unwrap().0, 9.0);
        assert_eq!(
            compute_vp(&ts(&[1.0, 2.0, 3.0]), &fixed(3, false)).unwrap_err(),
            Error::InsufficientData { needed: 3, got: 3 }
        );
    }

    #[test]
    fn vp_matches_brute_force() {
        let s = simulate(&RcarParams::ar1(0.4), 40, RngStream::new(8, 8)).unwrap();
        let w = &s.values()[..7];
        let m = (w[0] + w[1] + w[2] + w[3] + w[4] + w[5] + w[6]) / 7.0;
        let mut brute = 0.0;
        for x in w {
            brute += (x - m) * (x - m);
        }
        brute /= 7.0;
        let (vp, _) = compute_vp(&s, &fixed(7, true)).unwrap();
        assert!((vp - brute).abs() < 1e-14 * brute.max(1.0));
    }

    #[test]
    fn constant_series() {
        let c = ts(&[2.5; 20]);
        assert_eq!(compute_diagnostic(&c, &fixed(4, false)).unwrap().d_t, 0.5);
        // Demeaned window: v_p = 0 so every summand is zero.
        assert_eq!(compute_diagnostic(&c, &fixed(4, true)).unwrap().d_t, 0.0);
        assert_eq!(compute_diagnostic(&ts(&[0.0; 8]), &fixed(4, true)).unwrap_err(), Error::DegenerateSeries);
    }

    /// Gauss-Hermite oracle for `E f(Z)`, `Z ~ N(0,1)`: roots of the
    /// normalised Hermite polynomial by sign scan plus Newton polishing.
    fn gauss_hermite_expectation(f: impl Fn(f64) -> f64, n: usize) -> f64 {
        let herm = |x: f64| -> (f64, f64) {
            let mut p0 = std::f64::consts::PI.powf(-0.25);
            let mut p1 = 0.0;
            for j in 1..=n {
                let p2 = p1;
                p1 = p0;
                p0 = x * (2.0 / j as f64).sqrt() * p1 - ((j as f64 - 1.0) / j as f64).sqrt() * p2;
            }
            (p0, (2.0 * n as f64).sqrt() * p1)
        };
        let lim = (2.0 * n as f64 + 1.0).sqrt() + 1.0;
        let steps = 200 * n;
        let mut roots = Vec::new();
        let mut prev = herm(-lim).0;
        for k in 1..=steps {
            let x = -lim + 2.0 * lim * k as f64 / steps as f64;
            let cur = herm(x).0;
            if prev.signum() != cur.signum() {
                let mut r = x;
                for _ in 0..100 {
                    let (p, dp) = herm(r);
                    r -= p / dp;
                }
                roots.push(r);
            }
            prev = cur;
        }
        assert_eq!(roots.len(), n);
        let total: f64 = roots
            .iter()
            .map(|&r| {
                let (_, dp) = herm(r);
                2.0 / (dp * dp) * f(std::f64::consts::SQRT_2 * r)
            })
            .sum();
        total / std::f64::consts::PI.sqrt()
    }

    #[test]
    fn stationary_ar_limit_matches_quadrature_oracle() {
        let target = gauss_hermite_expectation(|z| 1.0 / (1.0 + z * z), 120);
        assert!((target - 0.6557).abs() < 1e-4, "oracle {target}");
        // A long window makes v_p a consistent variance estimate.
        let s = simulate(&RcarParams::ar1(0.5), 100_000, RngStream::new(555, 0)).unwrap();
        let cfg = DiagnosticConfig { p_rule: PRule::Fixed { p: 20_000 }, ..Default::default() };
        let d = compute_diagnostic(&s, &cfg).unwrap().d_t;
        assert!((d - target).abs() < 0.02, "D_T {d} vs {target}");
    }

    #[test]
    fn random_walk_diagnostic_shrinks_with_t() {
        // Started at zero. With the default burn-in the walk begins far from
        // the origin and D_T is not monotone over short horizons.
        let cfg = DiagnosticConfig::default();
        let median = |t: usize| {
            let mut ds: Vec<f64> = (0..200)
                .map(|k| {
                    let p = RcarParams::ar1(1.0).with_burn_in(0);
                    let s = simulate(&p, t, RngStream::new(31337, k)).unwrap();
                    compute_diagnostic(&s, &cfg).unwrap().d_t
                })
                .collect();
            ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ds[100]
        };
        let (small, large) = (median(1_000), median(10_000));
        assert!(large < small, "median D_T: T=1e3 {small}, T=1e4 {large}");
        assert!(large < 0.05, "{large}");
    }

    #[test]
    fn stationary_limits_bounded_away_from_zero() {
        let cfg = DiagnosticConfig::default();
        for (k, &(phi, s2)) in [(0.5, 0.0), (0.0, 0.25)].iter().enumerate() {
            let s = simulate(&RcarParams::gaussian(phi, s2), 100_000, RngStream::new(77, k as u64)).unwrap();
            let d = compute_diagnostic(&s, &cfg).unwrap().d_t;
            assert!(d >= 0.3, "({phi},{s2}): D_T {d}");
        }
    }

    #[test]
    fn infinite_variance_stur_tends_to_one() {
        // The limit needs p -> infinity so that v_p diverges; with the
        // default p = 5 at T = 1e5, D_T is still spread over (0.2, 0.8).
        let median = |p: usize| {
            let cfg = DiagnosticConfig { p_rule: PRule::Fixed { p }, ..Default::default() };
            let mut ds: Vec<f64> = (0..20)
                .map(|k| {
                    let s = simulate(&RcarParams::gaussian(1.0, 0.25), 100_000, RngStream::new(78, k)).unwrap();
                    compute_diagnostic(&s, &cfg).unwrap().d_t
                })
                .collect();
            ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ds[10]
        };
        let (m100, m20k) = (median(100), median(20_000));
        assert!(m100 < m20k, "{m100} {m20k}");
        assert!(m20k >= 0.9, "median D_T {m20k}");
    }

    #[test]
    fn general_moment_variant() {
        let s = simulate(&RcarParams::ar1(0.5), 500, RngStream::new(1, 2)).unwrap();
        let base = compute_diagnostic(&s, &DiagnosticConfig::default()).unwrap();
        assert_eq!(base.varsigma, 2.0);
        let one = compute_diagnostic(&s, &DiagnosticConfig { varsigma: 1.0, ..Default::default() }).unwrap();
        assert!(one.d_t > 0.0 && one.d_t < 1.0 && one.d_t != base.d_t);
        assert!(compute_diagnostic(&s, &DiagnosticConfig { varsigma: 0.0, ..Default::default() }).is_err());
    }

    #[test]
    fn preprocess_examples() {
        let line: Vec<f64> = (1..=50).map(|t| 3.0 - 0.7 * t as f64).collect();
        let r = preprocess(&ts(&line), Preprocess::OlsDetrend).unwrap();
        assert!(r.values().iter().all(|v| v.abs() < 1e-10));
        let g = preprocess(&ts(&line), Preprocess::gls()).unwrap();
        assert!(g.values().iter().all(|v| v.abs() < 1e-9));
        assert_eq!(preprocess(&ts(&[1.0, 3.0, 6.0]), Preprocess::FirstDifference).unwrap().values(), &[2.0, 3.0]);
        assert!(matches!(preprocess(&ts(&[1.0, 0.0]), Preprocess::LogTransform), Err(Error::Domain(_))));
        assert_eq!(preprocess(&ts(&[1.0, 3.0]), Preprocess::Demean).unwrap().values(), &[-1.0, 1.0]);
        assert!(preprocess(&ts(&[1.0, 3.0]), Preprocess::OlsDetrend).is_err());
        let chain = preprocess_chain(
            &ts(&[1.0, std::f64::consts::E, 10.0]),
            &[Preprocess::LogTransform, Preprocess::FirstDifference],
        )
        .unwrap();
        assert!((chain.values()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gls_detrend_residual_mean_is_small() {
        use crate::dgp::Deterministic;
        let p = RcarParams::ar1(0.5).with_deterministic(Deterministic::LinearTrend { intercept: 5.0, slope: 0.2 });
        let s = simulate(&p, 2000, RngStream::new(42, 9)).unwrap();
        let r = preprocess(&s, Preprocess::gls()).unwrap();
        let v = r.values();
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        // Long-run standard error of an AR(0.5) mean: sd(e) / (1 - phi) / sqrt(n).
        let se = 1.0 / 0.5 / n.sqrt();
        assert!(m.abs() < 2.0 * se, "mean {m}, se {se}");
    }

    proptest::proptest! {
        #[test]
        fn diagnostic_in_unit_interval(v in proptest::collection::vec(-1e6f64..1e6, 5..200)) {
            if let Ok(d) = compute_diagnostic(&ts(&v), &DiagnosticConfig::default()) {
                proptest::prop_assert!((0.0..=1.0).contains(&d.d_t));
                proptest::prop_assert!(d.v_p >= 0.0);
            }
        }

        #[test]
        fn scale_invariant(v in proptest::collection::vec(-100f64..100.0, 20..100), c in 1e-3f64..1e3) {
            let cfg = DiagnosticConfig::default();
            if let Ok(a) = compute_diagnostic(&ts(&v), &cfg) {
                let scaled: Vec<f64> = v.iter().map(|x| -c * x).collect();
                let b = compute_diagnostic(&ts(&scaled), &cfg).unwrap();
                proptest::prop_assert!((a.d_t - b.d_t).abs() < 1e-12);
            }
        }
    }
}
