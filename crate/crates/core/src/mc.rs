//! Monte Carlo harness: empirical rejection frequencies (and strong-rule
//! acceptance rates) over grids of RCAR designs.
//!
//! Replication `k` of scenario `i` runs on `master.derive2(i, k)`, so the
//! report depends only on the master seed, never on how replications are
//! scheduled across workers.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dgp::{classify, simulate, RcarParams, RegimeLabel, DEFAULT_ZERO_TOL};
use crate::error::{Error, Result};
use crate::rngdist::{Dist, RngStream};
use crate::rtest::{run_test, strong_decide, Decision, NullHypothesis, TestConfig};

pub const DEFAULT_REPS: usize = 500;

const SIM_STREAM: u64 = 0;
const TEST_STREAM: u64 = 1;
const STRONG_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorLaw {
    Gaussian,
    StudentT2,
    StudentT1,
}

impl ErrorLaw {
    pub const ALL: [ErrorLaw; 3] = [ErrorLaw::Gaussian, ErrorLaw::StudentT2, ErrorLaw::StudentT1];

    pub fn dist(self) -> Dist {
        match self {
            ErrorLaw::Gaussian => Dist::standard_normal(),
            ErrorLaw::StudentT2 => Dist::StudentT { df: 2.0 },
            ErrorLaw::StudentT1 => Dist::StudentT { df: 1.0 },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorLaw::Gaussian => "N(0,1)",
            ErrorLaw::StudentT2 => "t2",
            ErrorLaw::StudentT1 => "t1",
        }
    }

    /// Comma-free identifier accepted by `FromStr`, used in CSV output.
    pub fn id(self) -> &'static str {
        match self {
            ErrorLaw::Gaussian => "gaussian",
            other => other.name(),
        }
    }
}

impl std::str::FromStr for ErrorLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" | "n(0,1)" => Ok(ErrorLaw::Gaussian),
            "t2" => Ok(ErrorLaw::StudentT2),
            "t1" | "cauchy" => Ok(ErrorLaw::StudentT1),
            other => Err(Error::param(format!("unknown error law '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McScenario {
    pub phi: f64,
    pub sigma_b2: f64,
    pub error_law: ErrorLaw,
    pub t: usize,
    pub n_reps: usize,
    pub test_cfg: TestConfig,
    pub with_strong_rule: bool,
}

impl McScenario {
    pub fn new(phi: f64, sigma_b2: f64, error_law: ErrorLaw, t: usize) -> Self {
        Self {
            phi,
            sigma_b2,
            error_law,
            t,
            n_reps: DEFAULT_REPS,
            test_cfg: TestConfig::default(),
            with_strong_rule: false,
        }
    }

    pub fn reps(mut self, n: usize) -> Self {
        self.n_reps = n;
        self
    }

    pub fn null(mut self, null: NullHypothesis) -> Self {
        self.test_cfg.null = null;
        self
    }

    pub fn strong(mut self, on: bool) -> Self {
        self.with_strong_rule = on;
        self
    }

    pub fn params(&self) -> RcarParams {
        RcarParams::gaussian(self.phi, self.sigma_b2).with_errors(self.error_law.dist())
    }

    pub fn regime(&self) -> RegimeLabel {
        classify(self.phi, self.sigma_b2, DEFAULT_ZERO_TOL)
    }
}

/// Aggregated outcome of one scenario. Frequencies are over completed
/// (non-overflowing) replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: McScenario,
    pub regime: RegimeLabel,
    pub rejections: usize,
    pub completed: usize,
    pub overflow_count: usize,
    pub strong_accepts: Option<usize>,
}

impl ScenarioResult {
    pub fn rejection_frequency(&self) -> f64 {
        if self.completed == 0 {
            f64::NAN
        } else {
            self.rejections as f64 / self.completed as f64
        }
    }

    pub fn strong_accept_rate(&self) -> Option<f64> {
        self.strong_accepts.map(|a| if self.completed == 0 { f64::NAN } else { a as f64 / self.completed as f64 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub master_seed: u64,
    pub results: Vec<ScenarioResult>,
    /// Wall-clock seconds per scenario; excluded from equality.
    #[serde(default)]
    pub wall_time_secs: Vec<f64>,
}

impl McReport {
    /// Report content without timings, for reproducibility checks.
    pub fn same_results(&self, other: &McReport) -> bool {
        self.master_seed == other.master_seed && self.results == other.results
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RepOutcome {
    Done { reject: bool, strong_accept: Option<bool> },
    Overflow,
}

fn run_replication(sc: &McScenario, params: &RcarParams, stream: RngStream) -> Result<RepOutcome> {
    let series = match simulate(params, sc.t, stream.derive(SIM_STREAM)) {
        Ok(s) => s,
        Err(Error::Overflow { .. }) => return Ok(RepOutcome::Overflow),
        Err(e) => return Err(e),
    };
    let outcome = run_test(&series, &sc.test_cfg, stream.derive(TEST_STREAM))?;
    let strong_accept = if sc.with_strong_rule {
        let rep = strong_decide(&series, &sc.test_cfg, stream.derive(STRONG_STREAM))?;
        Some(rep.decision == Decision::AcceptNull)
    } else {
        None
    };
    Ok(RepOutcome::Done { reject: outcome.reject, strong_accept })
}

fn run_scenario(index: usize, sc: &McScenario, master: RngStream) -> Result<ScenarioResult> {
    if sc.n_reps == 0 {
        return Err(Error::param("a scenario needs at least one replication"));
    }
    let params = sc.params();
    params.validate()?;
    sc.test_cfg.validate()?;
    let one = |k: usize| run_replication(sc, &params, master.derive2(index as u64, k as u64));
    #[cfg(feature = "parallel")]
    let outcomes: Vec<RepOutcome> = {
        use rayon::prelude::*;
        (0..sc.n_reps).into_par_iter().map(one).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<RepOutcome> = (0..sc.n_reps).map(one).collect::<Result<_>>()?;

    let mut res = ScenarioResult {
        scenario: sc.clone(),
        regime: sc.regime(),
        rejections: 0,
        completed: 0,
        overflow_count: 0,
        strong_accepts: sc.with_strong_rule.then_some(0),
    };
    for o in outcomes {
        match o {
            RepOutcome::Overflow => res.overflow_count += 1,
            RepOutcome::Done { reject, strong_accept } => {
                res.completed += 1;
                res.rejections += reject as usize;
                if let (Some(acc), Some(true)) = (res.strong_accepts.as_mut(), strong_accept) {
                    *acc += 1;
                }
            }
        }
    }
    Ok(res)
}

/// Run every scenario on the global worker pool.
pub fn run_grid(scenarios: &[McScenario], master_seed: u64) -> Result<McReport> {
    if scenarios.is_empty() {
        return Err(Error::param("no scenarios to run"));
    }
    let master = RngStream::new(master_seed, 0);
    let mut results = Vec::with_capacity(scenarios.len());
    let mut wall = Vec::with_capacity(scenarios.len());
    for (i, sc) in scenarios.iter().enumerate() {
        let start = Instant::now();
        results.push(run_scenario(i, sc, master)?);
        wall.push(start.elapsed().as_secs_f64());
    }
    Ok(McReport { master_seed, results, wall_time_secs: wall })
}

/// [`run_grid`] on a dedicated pool of `workers` threads (`None`: all cores).
#[cfg(feature = "parallel")]
pub fn run_grid_with_workers(scenarios: &[McScenario], master_seed: u64, workers: Option<usize>) -> Result<McReport> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(|e| Error::param(format!("cannot build worker pool: {e}")))?;
    pool.install(|| run_grid(scenarios, master_seed))
}

/// Normal-approximation band `alpha +- 1.96 sqrt(alpha (1 - alpha) / n)`,
/// clipped to `[0, 1]`.
pub fn size_confidence_band(n_reps: usize, alpha: f64) -> (f64, f64) {
    const Z975: f64 = 1.959_963_984_540_054;
    let half = Z975 * (alpha * (1.0 - alpha) / n_reps.max(1) as f64).sqrt();
    ((alpha - half).max(0.0), (alpha + half).min(1.0))
}

/// Predefined Monte Carlo scenario grids.
pub mod presets {
    use super::*;

    pub const SAMPLE_SIZES: [usize; 4] = [250, 500, 1000, 2000];
    pub const PHIS: [f64; 5] = [1.05, 1.0, 0.95, 0.5, 0.0];
    pub const SIGMAS: [f64; 3] = [0.0, 0.1, 0.25];

    /// `(phi, sigma_b2)` pairs reported as lying on `E ln|phi + b_0| = 0`.
    pub const BOUNDARY_PAIRS: [(f64, f64); 9] = [
        (0.2, 3.6190),
        (0.3, 3.5556),
        (0.4, 3.4460),
        (0.5, 3.3390),
        (0.6, 3.2245),
        (0.7, 3.1310),
        (0.8, 2.8650),
        (0.9, 2.6815),
        (1.0, 2.4440),
    ];

    fn grid(pairs: &[(f64, f64)], null: NullHypothesis, strong: bool, n_reps: usize) -> Vec<McScenario> {
        let mut out = Vec::new();
        for &(phi, s2) in pairs {
            for law in ErrorLaw::ALL {
                for t in SAMPLE_SIZES {
                    out.push(McScenario::new(phi, s2, law, t).reps(n_reps).null(null).strong(strong));
                }
            }
        }
        out
    }

    fn standard_pairs() -> Vec<(f64, f64)> {
        PHIS.iter().flat_map(|&p| SIGMAS.iter().map(move |&s| (p, s))).collect()
    }

    /// Stationary null, standard designs, with the strong rule.
    pub fn table1(n_reps: usize) -> Vec<McScenario> {
        grid(&standard_pairs(), NullHypothesis::Stationary, true, n_reps)
    }

    /// Stationary null, boundary designs, with the strong rule.
    pub fn table2(n_reps: usize) -> Vec<McScenario> {
        grid(&BOUNDARY_PAIRS, NullHypothesis::Stationary, true, n_reps)
    }

    /// Non-stationary null, standard designs.
    pub fn table3(n_reps: usize) -> Vec<McScenario> {
        grid(&standard_pairs(), NullHypothesis::Nonstationary, false, n_reps)
    }

    /// Non-stationary null, boundary designs.
    pub fn table4(n_reps: usize) -> Vec<McScenario> {
        grid(&BOUNDARY_PAIRS, NullHypothesis::Nonstationary, false, n_reps)
    }

    pub fn by_name(name: &str, n_reps: usize) -> Option<Vec<McScenario>> {
        match name {
            "table1" => Some(table1(n_reps)),
            "table2" => Some(table2(n_reps)),
            "table3" => Some(table3(n_reps)),
            "table4" => Some(table4(n_reps)),
            _ => None,
        }
    }
}

pub const CSV_HEADER: &str =
    "phi,sigma_b2,error_law,T,n_reps,rejection_freq,strong_accept_rate,regime,overflow_count";

impl McReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.results {
            let sc = &r.scenario;
            let strong = r.strong_accept_rate().map(|v| format!("{v:.4}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.4},{},{},{}",
                sc.phi,
                sc.sigma_b2,
                sc.error_law.id(),
                sc.t,
                sc.n_reps,
                r.rejection_frequency(),
                strong,
                r.regime.regime,
                r.overflow_count
            );
        }
        out
    }

    /// Rows `(phi, sigma_b2)`, column blocks per error law, columns per T;
    /// strong-rule acceptance rates in brackets on the line below.
    pub fn to_text(&self) -> String {
        let mut rows: Vec<(f64, f64)> = Vec::new();
        let mut laws: Vec<ErrorLaw> = Vec::new();
        let mut ts: Vec<usize> = Vec::new();
        for r in &self.results {
            let key = (r.scenario.phi, r.scenario.sigma_b2);
            if !rows.contains(&key) {
                rows.push(key);
            }
            if !laws.contains(&r.scenario.error_law) {
                laws.push(r.scenario.error_law);
            }
            if !ts.contains(&r.scenario.t) {
                ts.push(r.scenario.t);
            }
        }
        let find = |key: (f64, f64), law: ErrorLaw, t: usize| {
            self.results
                .iter()
                .find(|r| (r.scenario.phi, r.scenario.sigma_b2) == key && r.scenario.error_law == law && r.scenario.t == t)
        };
        let mut out = String::new();
        let _ = write!(out, "{:<18}{:<12}", "(phi, sigma_b2)", "regime");
        for law in &laws {
            let _ = write!(out, "| {:<width$}", law.name(), width = 8 * ts.len());
        }
        out.push('\n');
        let _ = write!(out, "{:<30}", "T");
        for _ in &laws {
            out.push_str("| ");
            for t in &ts {
                let _ = write!(out, "{t:<8}");
            }
        }
        out.push('\n');
        for &key in &rows {
            let regime = classify(key.0, key.1, DEFAULT_ZERO_TOL).regime;
            let _ = write!(out, "{:<18}{:<12}", format!("({}, {})", key.0, key.1), regime.to_string());
            let mut strong_line = format!("{:<30}", "");
            let mut any_strong = false;
            for &law in &laws {
                out.push_str("| ");
                strong_line.push_str("| ");
                for &t in &ts {
                    match find(key, law, t) {
                        Some(r) => {
                            let _ = write!(out, "{:<8}", format!("{:.3}", r.rejection_frequency()));
                            match r.strong_accept_rate() {
                                Some(a) => {
                                    any_strong = true;
                                    let _ = write!(strong_line, "{:<8}", format!("({a:.2})"));
                                }
                                None => strong_line.push_str(&" ".repeat(8)),
                            }
                        }
                        None => {
                            out.push_str(&format!("{:<8}", "-"));
                            strong_line.push_str(&" ".repeat(8));
                        }
                    }
                }
            }
            out.push('\n');
            if any_strong {
                out.push_str(strong_line.trim_end());
                out.push('\n');
            }
        }
        let overflow: usize = self.results.iter().map(|r| r.overflow_count).sum();
        if overflow > 0 {
            let _ = writeln!(out, "overflowed replications (excluded): {overflow}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_examples() {
        let (lo, hi) = size_confidence_band(2000, 0.05);
        assert!((lo - 0.040).abs() < 5e-4 && (hi - 0.060).abs() < 5e-4, "{lo} {hi}");
        let (lo, hi) = size_confidence_band(500, 0.05);
        assert!((lo - 0.031).abs() < 5e-4 && (hi - 0.069).abs() < 5e-4, "{lo} {hi}");
        let (lo, hi) = size_confidence_band(10_000_000_000, 0.05);
        assert!((lo - 0.05).abs() < 1e-5 && (hi - 0.05).abs() < 1e-5);
        // Direct formula.
        let half = 1.959_963_984_540_054 * (0.05f64 * 0.95 / 500.0).sqrt();
        assert_eq!(size_confidence_band(500, 0.05), (0.05 - half, 0.05 + half));
        assert_eq!(size_confidence_band(1, 0.5).0, 0.0);
    }

    #[test]
    fn preset_sizes() {
        assert_eq!(presets::table1(10).len(), 15 * 12);
        assert_eq!(presets::table2(10).len(), 9 * 12);
        assert!(presets::table3(1).iter().all(|s| s.test_cfg.null == NullHypothesis::Nonstationary));
        assert!(presets::by_name("table5", 1).is_none());
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(run_grid(&[], 1).is_err());
        assert!(run_grid(&[McScenario::new(0.5, 0.0, ErrorLaw::Gaussian, 100).reps(0)], 1).is_err());
    }

    #[test]
    fn small_grid_reports() {
        let sc = vec![
            McScenario::new(0.5, 0.0, ErrorLaw::Gaussian, 200).reps(40).strong(true),
            McScenario::new(1.05, 0.0, ErrorLaw::StudentT1, 200).reps(40),
        ];
        let rep = run_grid(&sc, 9).unwrap();
        assert_eq!(rep.results.len(), 2);
        for r in &rep.results {
            assert_eq!(r.completed + r.overflow_count, r.scenario.n_reps);
            assert!(r.rejections <= r.completed);
            let f = r.rejection_frequency();
            assert!((0.0..=1.0).contains(&f));
        }
        assert!(rep.results[0].strong_accept_rate().is_some());
        assert!(rep.results[1].strong_accept_rate().is_none());
        assert!(rep.results[1].rejection_frequency() > 0.9);
        let csv = rep.to_csv();
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 3);
        let text = rep.to_text();
        assert!(text.contains("(0.5, 0)") && text.contains("(1.05, 0)"));
    }

    #[test]
    fn overflow_is_counted() {
        let mut sc = McScenario::new(4.0, 0.0, ErrorLaw::Gaussian, 1000).reps(5);
        sc.phi = 4.0;
        let rep = run_grid(&[sc], 1).unwrap();
        assert_eq!(rep.results[0].overflow_count, 5);
        assert!(rep.results[0].rejection_frequency().is_nan());
        assert!(rep.to_text().contains("overflowed"));
    }
}
