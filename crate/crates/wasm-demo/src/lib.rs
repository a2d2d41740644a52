//! Browser bindings: simulate a path, test a series, map the regimes.
//!
//! The `*_impl` functions hold the logic and are tested natively; the
//! `#[wasm_bindgen]` wrappers only convert errors to `JsValue`.

use rcar_core::dgp::{lyapunov_gaussian, simulate, solve_boundary_sigma};
use rcar_core::mc::ErrorLaw;
use rcar_core::rtest::{run_test, strong_decide};
use rcar_core::stat::{preprocess_chain, Preprocess};
use rcar_core::{DecisionReport, NullHypothesis, RcarParams, RngStream, TestConfig, TestOutcome, TimeSeries};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Randomisations used by the demo's strong rule; kept small for the UI.
pub const DEMO_S: usize = 200;

pub fn simulate_path_impl(phi: f64, sigma_b2: f64, law: &str, t: usize, seed: u64) -> Result<Vec<f64>, String> {
    if !(1..=100_000).contains(&t) {
        return Err("T must be between 1 and 100000".into());
    }
    if !(sigma_b2 >= 0.0) {
        return Err("sigma_b2 must be non-negative".into());
    }
    let law: ErrorLaw = law.parse().map_err(|e: rcar_core::Error| e.to_string())?;
    let params = RcarParams::gaussian(phi, sigma_b2).with_errors(law.dist());
    simulate(&params, t, RngStream::new(seed, 0)).map(|s| s.into_values()).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct DemoResult {
    pub outcome: TestOutcome,
    pub decision: DecisionReport,
    pub verdict: &'static str,
}

/// Parse numbers separated by commas, whitespace or newlines.
pub fn parse_numbers(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("not a number: '{s}'")))
        .collect()
}

pub fn test_series_impl(values: &[f64], null: &str, log_gls: bool, seed: u64) -> Result<DemoResult, String> {
    let null = match null {
        "stationary" => NullHypothesis::Stationary,
        "nonstationary" => NullHypothesis::Nonstationary,
        other => return Err(format!("unknown null '{other}'")),
    };
    let mut series = TimeSeries::new(values.to_vec()).map_err(|e| e.to_string())?;
    if log_gls {
        series = preprocess_chain(&series, &[Preprocess::LogTransform, Preprocess::gls()]).map_err(|e| e.to_string())?;
    }
    let cfg = TestConfig::default().with_null(null).with_s_reps(DEMO_S);
    let outcome = run_test(&series, &cfg, RngStream::new(seed, 0)).map_err(|e| e.to_string())?;
    let decision = strong_decide(&series, &cfg, RngStream::new(seed, 1)).map_err(|e| e.to_string())?;
    let verdict = decision.verdict();
    Ok(DemoResult { outcome, decision, verdict })
}

#[derive(Debug, Serialize, PartialEq)]
pub struct RegimeMap {
    pub phis: Vec<f64>,
    pub sigmas: Vec<f64>,
    /// Row-major `E ln|phi + b_0|`, one row per sigma.
    pub lyapunov: Vec<f64>,
    /// Boundary variance for each phi, `null` where none exists.
    pub boundary: Vec<Option<f64>>,
}

pub fn regime_map_impl(phi_max: f64, sigma_max: f64, n: usize) -> Result<RegimeMap, String> {
    if !(2..=200).contains(&n) || !(phi_max > 0.0) || !(sigma_max > 0.0) {
        return Err("need 2 <= n <= 200 and positive ranges".into());
    }
    let step = |max: f64, i: usize| max * i as f64 / (n - 1) as f64;
    let phis: Vec<f64> = (0..n).map(|i| step(phi_max, i)).collect();
    let sigmas: Vec<f64> = (0..n).map(|i| step(sigma_max, i)).collect();
    let lyapunov = sigmas.iter().flat_map(|&s| phis.iter().map(move |&p| lyapunov_gaussian(p, s))).collect();
    let boundary = phis.iter().map(|&p| solve_boundary_sigma(p).ok()).collect();
    Ok(RegimeMap { phis, sigmas, lyapunov, boundary })
}

fn js_err(e: String) -> JsValue {
    JsValue::from_str(&e)
}

#[wasm_bindgen]
pub fn simulate_path(phi: f64, sigma_b2: f64, law: &str, t: usize, seed: u32) -> Result<Vec<f64>, JsValue> {
    simulate_path_impl(phi, sigma_b2, law, t, seed as u64).map_err(js_err)
}

/// JSON with the single test outcome, the strong-rule report and a verdict.
#[wasm_bindgen]
pub fn test_series(text: &str, null: &str, log_gls: bool, seed: u32) -> Result<String, JsValue> {
    let values = parse_numbers(text).map_err(js_err)?;
    let res = test_series_impl(&values, null, log_gls, seed as u64).map_err(js_err)?;
    serde_json::to_string(&res).map_err(|e| js_err(e.to_string()))
}

#[wasm_bindgen]
pub fn regime_map(phi_max: f64, sigma_max: f64, n: usize) -> Result<String, JsValue> {
    let map = regime_map_impl(phi_max, sigma_max, n).map_err(js_err)?;
    serde_json::to_string(&map).map_err(|e| js_err(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulate_matches_core() {
        let a = simulate_path_impl(0.5, 0.1, "t2", 50, 3).unwrap();
        let core = simulate(&RcarParams::gaussian(0.5, 0.1).with_errors(ErrorLaw::StudentT2.dist()), 50, RngStream::new(3, 0))
            .unwrap();
        assert_eq!(a, core.values());
        assert!(simulate_path_impl(0.5, -1.0, "gaussian", 50, 3).is_err());
        assert!(simulate_path_impl(0.5, 0.0, "t7", 50, 3).is_err());
    }

    #[test]
    fn numbers_parse() {
        assert_eq!(parse_numbers("1, 2\n3.5\t-4").unwrap(), vec![1.0, 2.0, 3.5, -4.0]);
        assert!(parse_numbers("1, x").is_err());
    }

    #[test]
    fn random_walk_is_nonstationary() {
        let rw = simulate_path_impl(1.0, 0.0, "gaussian", 1000, 8).unwrap();
        let res = test_series_impl(&rw, "stationary", false, 1).unwrap();
        assert!(res.outcome.reject);
        assert_eq!(res.verdict, "nonstationary");
        let json = serde_json::to_value(&res).unwrap();
        assert_eq!(json["decision"]["s_used"], DEMO_S);
        assert!(test_series_impl(&rw, "maybe", false, 1).is_err());
    }

    #[test]
    fn log_gls_needs_positive_data() {
        let x: Vec<f64> = (1..=100).map(|i| 10.0 + (i as f64 * 0.3).sin()).collect();
        assert!(test_series_impl(&x, "stationary", true, 0).is_ok());
        let y: Vec<f64> = x.iter().map(|v| v - 10.5).collect();
        assert!(test_series_impl(&y, "stationary", true, 0).is_err());
    }

    #[test]
    fn regime_map_shape_and_signs() {
        let m = regime_map_impl(1.2, 4.0, 5).unwrap();
        assert_eq!(m.lyapunov.len(), 25);
        // sigma = 0 row: ln|phi|, negative below one, positive above.
        assert!(m.lyapunov[1] < 0.0 && m.lyapunov[4] > 0.0);
        assert!(m.boundary[..4].iter().all(|b| b.is_some()), "{:?}", m.boundary);
        assert!(regime_map_impl(1.0, 1.0, 1).is_err());
    }
}
