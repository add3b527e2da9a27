//! Frozen on-disk formats: per-step CSV, the result record with its chain,
//! and structured-text reports.
//!
//! Floats are printed with 17 significant digits (`{:.16e}`), which
//! round-trips every finite `f64` exactly; emission is hand-rolled so the
//! byte layout is fully deterministic.

use anyhow::{anyhow, bail, Context, Result};
use kam_core::conjugacy::{
    ActionSampledField, AngleTransform, ConjugacyChain, TwistChain, TwistTransform,
};
use kam_core::diagnostics::{ConvergenceReport, StepRecord};
use kam_core::fourier::FourierSeries;
use kam_core::frequency_solver::TranslationLedger;
use kam_core::kam_param::{ParamRunResult, RunOutcome};
use kam_core::kam_twist::TwistRunResult;
use kam_core::Complex64;
use serde_json::Value;
use std::fmt::Write as _;

/// 17 significant digits: exact decimal round-trip for every finite double.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_f64_array(out: &mut String, values: &[f64]) {
    out.push('[');
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&fmt_f64(*v));
    }
    out.push(']');
}

/// Serialize a series as
/// `{"dim":n,"value_dim":d,"cutoff":K,"entries":[[[k...],re0,im0,...],...]}`.
pub fn series_to_json(f: &FourierSeries) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "{{\"dim\":{},\"value_dim\":{},\"cutoff\":{},\"real\":{},\"entries\":[",
        f.dim(),
        f.value_dim(),
        f.cutoff(),
        f.real_valued()
    );
    for i in 0..f.mode_count() {
        if i > 0 {
            out.push(',');
        }
        out.push_str("[[");
        for (a, k) in f.mode_at(i).iter().enumerate() {
            if a > 0 {
                out.push(',');
            }
            let _ = write!(out, "{k}");
        }
        out.push_str("]");
        for c in f.coeff_at(i) {
            let _ = write!(out, ",{},{}", fmt_f64(c.re), fmt_f64(c.im));
        }
        out.push(']');
    }
    out.push_str("]}");
    out
}

pub fn series_from_json(value: &Value) -> Result<FourierSeries> {
    let obj = value.as_object().ok_or_else(|| anyhow!("series must be an object"))?;
    let dim = obj.get("dim").and_then(Value::as_u64).ok_or_else(|| anyhow!("series.dim"))? as usize;
    let value_dim = obj
        .get("value_dim")
        .and_then(Value::as_u64)
        .ok_or_else(|| anyhow!("series.value_dim"))? as usize;
    let cutoff =
        obj.get("cutoff").and_then(Value::as_u64).ok_or_else(|| anyhow!("series.cutoff"))? as usize;
    let real =
        obj.get("real").and_then(Value::as_bool).ok_or_else(|| anyhow!("series.real"))?;
    let entries =
        obj.get("entries").and_then(Value::as_array).ok_or_else(|| anyhow!("series.entries"))?;
    let mut out = FourierSeries::zero(dim, value_dim, cutoff);
    if entries.len() != out.mode_count() {
        bail!("series entry count {} does not match cutoff {cutoff}", entries.len());
    }
    for entry in entries {
        let row = entry.as_array().ok_or_else(|| anyhow!("series entry must be an array"))?;
        if row.len() != 1 + 2 * value_dim {
            bail!("series entry has {} fields, expected {}", row.len(), 1 + 2 * value_dim);
        }
        let k: Vec<i64> = row[0]
            .as_array()
            .ok_or_else(|| anyhow!("series entry index"))?
            .iter()
            .map(|v| v.as_i64().ok_or_else(|| anyhow!("series mode index must be an integer")))
            .collect::<Result<_>>()?;
        let idx = out
            .index_of(&k)
            .ok_or_else(|| anyhow!("mode {k:?} outside the declared cutoff"))?;
        for c in 0..value_dim {
            let re = row[1 + 2 * c].as_f64().ok_or_else(|| anyhow!("series coefficient"))?;
            let im = row[2 + 2 * c].as_f64().ok_or_else(|| anyhow!("series coefficient"))?;
            out.coeff_at_mut(idx)[c] = Complex64::new(re, im);
        }
    }
    let coeffs: Vec<_> = (0..out.mode_count()).flat_map(|i| out.coeff_at(i).to_vec()).collect();
    Ok(FourierSeries::from_coeffs(dim, value_dim, cutoff, coeffs, real))
}

fn ledger_to_json(ledger: &TranslationLedger) -> String {
    let mut out = String::from("[");
    for (i, step) in ledger.steps.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{{\"nu\":{},\"shift\":", step.index);
        push_f64_array(&mut out, &step.shift);
        let _ = write!(
            out,
            ",\"mu\":{},\"residual\":{}}}",
            fmt_f64(step.mu),
            fmt_f64(step.residual)
        );
    }
    out.push(']');
    out
}

fn ledger_from_json(value: &Value, dim: usize) -> Result<TranslationLedger> {
    let mut ledger = TranslationLedger::new(dim);
    for step in value.as_array().ok_or_else(|| anyhow!("ledger must be an array"))? {
        let obj = step.as_object().ok_or_else(|| anyhow!("ledger step"))?;
        let nu = obj.get("nu").and_then(Value::as_u64).ok_or_else(|| anyhow!("ledger nu"))? as usize;
        let shift: Vec<f64> = obj
            .get("shift")
            .and_then(Value::as_array)
            .ok_or_else(|| anyhow!("ledger shift"))?
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| anyhow!("ledger shift entry")))
            .collect::<Result<_>>()?;
        let mu = obj.get("mu").and_then(Value::as_f64).ok_or_else(|| anyhow!("ledger mu"))?;
        let residual = obj
            .get("residual")
            .and_then(Value::as_f64)
            .ok_or_else(|| anyhow!("ledger residual"))?;
        ledger.push(nu, shift, mu, residual);
    }
    Ok(ledger)
}

fn outcome_str(outcome: &RunOutcome) -> &'static str {
    match outcome {
        RunOutcome::Converged => "converged",
        RunOutcome::MaxSteps => "max-steps",
        RunOutcome::Diverged { .. } => "diverged",
    }
}

/// Identity of the model a result was produced from, for re-verification.
#[derive(Debug, Clone)]
pub struct ModelStamp {
    pub model: String,
    pub epsilon: f64,
    pub tol: f64,
    pub freq_tol: f64,
}

pub fn param_result_to_json(r: &ParamRunResult, stamp: &ModelStamp) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "{{\"schema_version\":1,\"kind\":\"param\",\"model\":\"{}\",\"epsilon\":{},\"outcome\":\"{}\",\"steps\":{},\"tol\":{},\"freq_tol\":{},",
        stamp.model,
        fmt_f64(stamp.epsilon),
        outcome_str(&r.outcome),
        r.records.len() - 1,
        fmt_f64(stamp.tol),
        fmt_f64(stamp.freq_tol),
    );
    out.push_str("\"target\":");
    push_f64_array(&mut out, &r.target);
    out.push_str(",\"base_final\":");
    push_f64_array(&mut out, &r.xi_inf);
    let _ = write!(
        out,
        ",\"freq_residual\":{},\"conjugacy_residual\":{},",
        fmt_f64(r.freq_residual),
        fmt_f64(r.conjugacy_residual)
    );
    out.push_str("\"chain\":{\"parts\":[");
    for (i, part) in r.chain.parts.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&series_to_json(&part.displacement));
    }
    out.push_str("],\"ledger\":");
    out.push_str(&ledger_to_json(&r.chain.translations));
    out.push_str("}}");
    out
}

pub fn twist_result_to_json(r: &TwistRunResult, stamp: &ModelStamp) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "{{\"schema_version\":1,\"kind\":\"twist\",\"model\":\"{}\",\"epsilon\":{},\"outcome\":\"{}\",\"steps\":{},\"tol\":{},\"freq_tol\":{},",
        stamp.model,
        fmt_f64(stamp.epsilon),
        outcome_str(&r.outcome),
        r.records.len() - 1,
        fmt_f64(stamp.tol),
        fmt_f64(stamp.freq_tol),
    );
    out.push_str("\"target\":");
    push_f64_array(&mut out, &r.target);
    out.push_str(",\"base_final\":");
    push_f64_array(&mut out, &r.r_hat_inf);
    out.push_str(",\"shift_total\":");
    push_f64_array(&mut out, &r.shift_total);
    let _ = write!(
        out,
        ",\"freq_residual\":{},\"conjugacy_residual\":{},",
        fmt_f64(r.freq_residual),
        fmt_f64(r.conjugacy_residual)
    );
    out.push_str("\"chain\":{\"parts\":[");
    for (i, part) in r.chain.parts.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str("{\"axes\":[");
        for (a, axis) in part.field.axes().iter().enumerate() {
            if a > 0 {
                out.push(',');
            }
            push_f64_array(&mut out, axis);
        }
        out.push_str("],\"series\":[");
        for (s, series) in part.field.series().iter().enumerate() {
            if s > 0 {
                out.push(',');
            }
            out.push_str(&series_to_json(series));
        }
        out.push_str("]}");
    }
    out.push_str("],\"ledger\":");
    out.push_str(&ledger_to_json(&r.chain.translations));
    out.push_str("}}");
    out
}

/// What `verify residual` needs back from a result record.
#[derive(Debug)]
pub struct StoredResult {
    pub kind: String,
    pub model: String,
    pub epsilon: f64,
    pub tol: f64,
    pub freq_tol: f64,
    pub target: Vec<f64>,
    pub base_final: Vec<f64>,
    pub conjugacy_residual: f64,
    pub param_chain: Option<ConjugacyChain>,
    pub twist_chain: Option<TwistChain>,
}

pub fn result_from_json(text: &str) -> Result<StoredResult> {
    let value: Value = serde_json::from_str(text).context("result record is not valid JSON")?;
    let obj = value.as_object().ok_or_else(|| anyhow!("result root must be an object"))?;
    let kind = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| anyhow!("result.kind"))?
        .to_string();
    let model = obj
        .get("model")
        .and_then(Value::as_str)
        .ok_or_else(|| anyhow!("result.model"))?
        .to_string();
    let epsilon =
        obj.get("epsilon").and_then(Value::as_f64).ok_or_else(|| anyhow!("result.epsilon"))?;
    let tol = obj.get("tol").and_then(Value::as_f64).ok_or_else(|| anyhow!("result.tol"))?;
    let freq_tol =
        obj.get("freq_tol").and_then(Value::as_f64).ok_or_else(|| anyhow!("result.freq_tol"))?;
    let target: Vec<f64> = obj
        .get("target")
        .and_then(Value::as_array)
        .ok_or_else(|| anyhow!("result.target"))?
        .iter()
        .map(|v| v.as_f64().ok_or_else(|| anyhow!("result.target entry")))
        .collect::<Result<_>>()?;
    let base_final: Vec<f64> = obj
        .get("base_final")
        .and_then(Value::as_array)
        .ok_or_else(|| anyhow!("result.base_final"))?
        .iter()
        .map(|v| v.as_f64().ok_or_else(|| anyhow!("result.base_final entry")))
        .collect::<Result<_>>()?;
    let conjugacy_residual = obj
        .get("conjugacy_residual")
        .and_then(Value::as_f64)
        .ok_or_else(|| anyhow!("result.conjugacy_residual"))?;
    let chain = obj
        .get("chain")
        .and_then(Value::as_object)
        .ok_or_else(|| anyhow!("result.chain"))?;
    let parts = chain
        .get("parts")
        .and_then(Value::as_array)
        .ok_or_else(|| anyhow!("result.chain.parts"))?;
    let dim = target.len();
    let ledger = ledger_from_json(
        chain.get("ledger").ok_or_else(|| anyhow!("result.chain.ledger"))?,
        dim,
    )?;
    let mut out = StoredResult {
        kind: kind.clone(),
        model,
        epsilon,
        tol,
        freq_tol,
        target,
        base_final,
        conjugacy_residual,
        param_chain: None,
        twist_chain: None,
    };
    match kind.as_str() {
        "param" => {
            let mut c = ConjugacyChain::identity(dim);
            c.translations = ledger;
            for p in parts {
                c.push(AngleTransform::new(series_from_json(p)?));
            }
            out.param_chain = Some(c);
        }
        "twist" => {
            let mut c = TwistChain::identity(dim);
            c.translations = ledger;
            for p in parts {
                let pobj = p.as_object().ok_or_else(|| anyhow!("twist chain part"))?;
                let axes: Vec<Vec<f64>> = pobj
                    .get("axes")
                    .and_then(Value::as_array)
                    .ok_or_else(|| anyhow!("twist part axes"))?
                    .iter()
                    .map(|axis| {
                        axis.as_array()
                            .ok_or_else(|| anyhow!("twist axis"))?
                            .iter()
                            .map(|v| v.as_f64().ok_or_else(|| anyhow!("twist axis node")))
                            .collect::<Result<Vec<f64>>>()
                    })
                    .collect::<Result<_>>()?;
                let series: Vec<FourierSeries> = pobj
                    .get("series")
                    .and_then(Value::as_array)
                    .ok_or_else(|| anyhow!("twist part series"))?
                    .iter()
                    .map(series_from_json)
                    .collect::<Result<_>>()?;
                c.push(TwistTransform::new(ActionSampledField::new(axes, series), dim));
            }
            out.twist_chain = Some(c);
        }
        other => bail!("unknown result kind '{other}'"),
    }
    Ok(out)
}

/// Frozen per-step CSV for the parameter engine:
/// `nu,k_nu,f_grid,f_coeff,xi_shift,freq_residual`.
pub fn param_steps_csv(records: &[StepRecord]) -> String {
    let mut out = String::from("nu,k_nu,f_grid,f_coeff,xi_shift,freq_residual\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.index,
            r.cutoff,
            fmt_f64(r.f_grid_norm),
            fmt_f64(r.f_coeff_norm),
            fmt_f64(r.shift_norm),
            fmt_f64(r.freq_residual)
        );
    }
    out
}

/// Frozen per-step CSV for the twist engine:
/// `nu,k_nu,f_grid,f_coeff,g_grid,g_coeff,r_shift,shift_sum,freq_residual,intersection_margin`.
pub fn twist_steps_csv(records: &[StepRecord]) -> String {
    let mut out = String::from(
        "nu,k_nu,f_grid,f_coeff,g_grid,g_coeff,r_shift,shift_sum,freq_residual,intersection_margin\n",
    );
    let mut shift_sum = 0.0;
    for r in records {
        shift_sum += r.shift_norm;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.index,
            r.cutoff,
            fmt_f64(r.f_grid_norm),
            fmt_f64(r.f_coeff_norm),
            fmt_f64(r.g_grid_norm),
            fmt_f64(r.g_coeff_norm),
            fmt_f64(r.shift_norm),
            fmt_f64(shift_sum),
            fmt_f64(r.freq_residual),
            fmt_f64(r.intersection_margin)
        );
    }
    out
}

/// Translation-ledger CSV: `nu,shift_0..,shift_norm,mu,ratio,residual`.
pub fn ledger_csv(ledger: &TranslationLedger) -> String {
    let dim = ledger.cumulative.len();
    let mut out = String::from("nu");
    for a in 0..dim {
        let _ = write!(out, ",shift_{a}");
    }
    out.push_str(",shift_norm,mu,ratio,residual\n");
    for s in &ledger.steps {
        let _ = write!(out, "{}", s.index);
        for v in &s.shift {
            let _ = write!(out, ",{}", fmt_f64(*v));
        }
        let ratio = if s.mu > 0.0 { s.shift_norm / s.mu } else { 0.0 };
        let _ = writeln!(
            out,
            ",{},{},{},{}",
            fmt_f64(s.shift_norm),
            fmt_f64(s.mu),
            fmt_f64(ratio),
            fmt_f64(s.residual)
        );
    }
    out
}

/// Human-readable run report with the hypothesis flags.
pub fn report_text(
    outcome: &RunOutcome,
    report: &ConvergenceReport,
    shift_total_norm: f64,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "outcome: {}", outcome_str(outcome));
    if let RunOutcome::Diverged { step, reason } = outcome {
        let reason = match reason {
            kam_core::kam_param::DivergenceReason::NormGrowth => "norm-growth",
            kam_core::kam_param::DivergenceReason::InversionFailure => "inversion-failure",
            kam_core::kam_param::DivergenceReason::IntersectionLost => "intersection-lost",
            kam_core::kam_param::DivergenceReason::TranslationOutOfReach => {
                "translation-out-of-reach"
            }
        };
        let _ = writeln!(out, "divergence_detected: step {step} ({reason})");
    }
    let _ = writeln!(out, "final_norm: {}", fmt_f64(report.final_norm));
    let _ = writeln!(out, "freq_residual: {}", fmt_f64(report.final_freq_residual));
    let _ = writeln!(out, "shift_total: {}", fmt_f64(shift_total_norm));
    match report.fitted_order {
        Some(order) => {
            let _ = writeln!(out, "fitted_order: {}", fmt_f64(order));
        }
        None => {
            let _ = writeln!(out, "fitted_order: not-measurable");
        }
    }
    let _ = writeln!(out, "hypotheses (step: H1 H2 H3 H4 H5 H6, ok/viol with log10 margins):");
    for row in &report.rows {
        let cell = |(ok, m): (bool, f64)| {
            format!("{}{:+.1}", if ok { "ok" } else { "VIOL" }, m)
        };
        let _ = writeln!(
            out,
            "  {}: {} {} {} {} {} {}",
            row.step,
            cell(row.h1),
            cell(row.h2),
            cell(row.h3),
            cell(row.h4),
            cell(row.h5),
            cell(row.h6)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_roundtrips() {
        for &x in &[
            0.0,
            1.0,
            -1.0,
            core::f64::consts::PI,
            3.883_222_077_450_933e0,
            1.234_567_890_123_456_7e-300,
            -9.87e250,
            f64::EPSILON,
        ] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn series_record_roundtrips() {
        let samples: Vec<f64> = (0..16)
            .map(|j| {
                let t = kam_core::TWO_PI * j as f64 / 16.0;
                0.3 + t.cos() - 0.25 * (3.0 * t).sin()
            })
            .collect();
        let f = kam_core::fourier::analyze_real(
            &samples,
            kam_core::fourier::GridShape::new(1, 16),
            1,
            4,
        )
        .unwrap();
        let text = series_to_json(&f);
        let value: Value = serde_json::from_str(&text).unwrap();
        let back = series_from_json(&value).unwrap();
        assert_eq!(back.cutoff(), f.cutoff());
        for i in 0..f.mode_count() {
            for c in 0..f.value_dim() {
                assert_eq!(back.coeff_at(i)[c].re.to_bits(), f.coeff_at(i)[c].re.to_bits());
                assert_eq!(back.coeff_at(i)[c].im.to_bits(), f.coeff_at(i)[c].im.to_bits());
            }
        }
    }
}
