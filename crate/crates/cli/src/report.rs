//! Text, CSV and JSON-lines renderings of test results.

use std::io::Write;

use anyhow::Result;
use rcar_core::{Decision, DecisionReport, NullHypothesis, RegimeLabel, TestOutcome};

use crate::input::Loaded;
use crate::Format;

fn null_name(null: NullHypothesis) -> &'static str {
    match null {
        NullHypothesis::Stationary => "stationary",
        NullHypothesis::Nonstationary => "nonstationary",
    }
}

fn lt_text(l: f64) -> String {
    if l.is_infinite() {
        "saturated (+inf)".into()
    } else {
        format!("{l:.6e}")
    }
}

fn csv_line<W: Write + ?Sized>(out: &mut W, fields: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(fields)?;
    out.write_all(&w.into_inner().map_err(|e| anyhow::anyhow!(e.to_string()))?)?;
    Ok(())
}

fn header<W: Write + ?Sized>(out: &mut W, loaded: &Loaded, t: usize) -> Result<()> {
    writeln!(out, "{:<14}{} (T = {t})", "series", loaded.label)?;
    if let Some((a, b)) = &loaded.dates {
        writeln!(out, "{:<14}{a} .. {b}", "sample")?;
    }
    Ok(())
}

pub fn write_outcome<W: Write + ?Sized>(out: &mut W, format: Format, loaded: &Loaded, o: &TestOutcome) -> Result<()> {
    match format {
        Format::Text => {
            header(out, loaded, o.t)?;
            writeln!(out, "{:<14}{}", "null", null_name(o.null))?;
            writeln!(out, "{:<14}{}", "p", o.p)?;
            writeln!(out, "{:<14}{:.6e}", "v_p", o.v_p)?;
            writeln!(out, "{:<14}{:.6}", "D_T", o.d_t)?;
            writeln!(out, "{:<14}{}", "l_T", lt_text(o.l_t))?;
            writeln!(out, "{:<14}{}", "R", o.r)?;
            writeln!(out, "{:<14}{:.6}", "Theta", o.theta)?;
            writeln!(out, "{:<14}{:.4}", "critical", o.critical_value)?;
            writeln!(out, "{:<14}{:.4}", "p-value", o.p_value)?;
            writeln!(out, "{:<14}{}", "decision", if o.reject { "reject H0" } else { "do not reject H0" })?;
        }
        Format::Csv => {
            csv_line(out, &["series", "null", "t", "p", "v_p", "d_t", "l_t", "r", "theta", "critical_value", "p_value", "reject"].map(String::from))?;
            csv_line(
                out,
                &[
                    loaded.label.clone(),
                    null_name(o.null).into(),
                    o.t.to_string(),
                    o.p.to_string(),
                    o.v_p.to_string(),
                    o.d_t.to_string(),
                    o.l_t.to_string(),
                    o.r.to_string(),
                    o.theta.to_string(),
                    o.critical_value.to_string(),
                    o.p_value.to_string(),
                    o.reject.to_string(),
                ],
            )?;
        }
        Format::JsonLines => writeln!(out, "{}", serde_json::to_string(o)?)?,
    }
    Ok(())
}

pub fn write_decisions<W: Write + ?Sized>(
    out: &mut W,
    format: Format,
    loaded: &Loaded,
    alpha: f64,
    reports: &[(&str, DecisionReport)],
) -> Result<()> {
    match format {
        Format::Text => {
            header(out, loaded, loaded.values.len())?;
            for (name, r) in reports {
                writeln!(out)?;
                writeln!(out, "{:<14}{name}", "pass")?;
                writeln!(out, "{:<14}{}", "null", null_name(r.null))?;
                writeln!(out, "{:<14}{:.6}", "D_T", r.d_t)?;
                writeln!(out, "{:<14}{}", "l_T", lt_text(r.l_t))?;
                writeln!(out, "{:<14}{:.4}", "Q(alpha)", r.q_alpha)?;
                writeln!(out, "{:<14}{:.4} (alpha = {alpha}, S = {})", "bound", r.bound, r.s_used)?;
                let d = match r.decision {
                    Decision::AcceptNull => "accept H0",
                    Decision::RejectNull => "reject H0",
                };
                writeln!(out, "{:<14}{d}: {}", "decision", r.verdict())?;
            }
        }
        Format::Csv => {
            csv_line(out, &["series", "pass", "null", "s", "q_alpha", "bound", "decision", "verdict", "d_t", "l_t"].map(String::from))?;
            for (name, r) in reports {
                csv_line(
                    out,
                    &[
                        loaded.label.clone(),
                        name.to_string(),
                        null_name(r.null).into(),
                        r.s_used.to_string(),
                        r.q_alpha.to_string(),
                        format!("{:.4}", r.bound),
                        format!("{:?}", r.decision),
                        r.verdict().into(),
                        r.d_t.to_string(),
                        r.l_t.to_string(),
                    ],
                )?;
            }
        }
        Format::JsonLines => {
            for (_, r) in reports {
                writeln!(out, "{}", serde_json::to_string(r)?)?;
            }
        }
    }
    Ok(())
}

pub fn write_regime<W: Write + ?Sized>(out: &mut W, format: Format, phi: f64, sigma_b2: f64, l: &RegimeLabel) -> Result<()> {
    match format {
        Format::Text => {
            writeln!(out, "{:<20}{phi}", "phi")?;
            writeln!(out, "{:<20}{sigma_b2}", "sigma_b2")?;
            writeln!(out, "{:<20}{:+.6e}", "E ln|phi + b_0|", l.lyapunov)?;
            writeln!(out, "{:<20}{}", "regime", l.regime)?;
            writeln!(out, "{:<20}{}", "finite variance", l.finite_variance)?;
        }
        Format::Csv => {
            csv_line(out, &["phi", "sigma_b2", "lyapunov", "regime", "finite_variance"].map(String::from))?;
            csv_line(
                out,
                &[phi.to_string(), sigma_b2.to_string(), l.lyapunov.to_string(), l.regime.to_string(), l.finite_variance.to_string()],
            )?;
        }
        Format::JsonLines => {
            let v = serde_json::json!({ "phi": phi, "sigma_b2": sigma_b2, "label": l });
            writeln!(out, "{v}")?;
        }
    }
    Ok(())
}
