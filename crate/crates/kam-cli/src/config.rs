//! Run configuration: a single JSON document with a schema version.

use anyhow::{anyhow, bail, Context, Result};
use kam_core::small_divisors::{golden_like_frequency, DiophantineParams};
use serde_json::Value;
use std::path::Path;

/// Everything one engine run needs, resolved to concrete numbers.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: String,
    pub epsilon: f64,
    pub target: Vec<f64>,
    pub tol: f64,
    pub freq_tol: f64,
    pub guard: f64,
    pub max_steps: usize,
    pub kfloor: usize,
    pub kcap: usize,
    pub rho: f64,
    pub eta: f64,
    pub sched_m: usize,
    pub s0: f64,
    pub dioph_gamma: f64,
    pub dioph_tau: f64,
    pub dioph_kmax: usize,
    pub ablation: bool,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: String::from("standard-drift"),
            epsilon: 1e-4,
            target: vec![golden_like_frequency(&[1]).expect("golden seed")],
            tol: 1e-12,
            freq_tol: 2e-12,
            guard: kam_core::small_divisors::DEFAULT_GUARD,
            max_steps: 24,
            kfloor: 8,
            kcap: 48,
            rho: 0.5,
            eta: 2.0,
            sched_m: 1,
            s0: 0.25,
            dioph_gamma: 1.0,
            dioph_tau: 1.5,
            dioph_kmax: 50,
            ablation: false,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn dioph(&self) -> DiophantineParams {
        DiophantineParams::new(self.dioph_gamma, self.dioph_tau, 8.0, self.dioph_kmax)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_str(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn from_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).context("config is not valid JSON")?;
        let obj = value.as_object().ok_or_else(|| anyhow!("config root must be an object"))?;
        match obj.get("schema_version").and_then(Value::as_i64) {
            Some(1) => {}
            Some(v) => bail!("unsupported schema_version {v} (expected 1)"),
            None => bail!("missing field 'schema_version'"),
        }
        let mut cfg = Self::default();
        cfg.model = obj
            .get("model")
            .and_then(Value::as_str)
            .ok_or_else(|| anyhow!("missing or non-string field 'model'"))?
            .to_string();
        cfg.epsilon = require_f64(obj, "epsilon")?;
        if cfg.epsilon < 0.0 {
            bail!("field 'epsilon' must be >= 0");
        }
        cfg.target = parse_target(obj.get("target").ok_or_else(|| anyhow!("missing field 'target'"))?)?;

        if let Some(t) = obj.get("tolerances") {
            let t = t.as_object().ok_or_else(|| anyhow!("field 'tolerances' must be an object"))?;
            opt_f64(t, "tol", &mut cfg.tol)?;
            opt_f64(t, "freq_tol", &mut cfg.freq_tol)?;
            opt_f64(t, "guard", &mut cfg.guard)?;
        }
        for (name, v) in [("tol", cfg.tol), ("freq_tol", cfg.freq_tol), ("guard", cfg.guard)] {
            if v <= 0.0 {
                bail!("tolerance '{name}' must be positive");
            }
        }
        if let Some(s) = obj.get("schedule") {
            let s = s.as_object().ok_or_else(|| anyhow!("field 'schedule' must be an object"))?;
            opt_f64(s, "rho", &mut cfg.rho)?;
            opt_f64(s, "eta", &mut cfg.eta)?;
            opt_usize(s, "m", &mut cfg.sched_m)?;
            opt_f64(s, "s0", &mut cfg.s0)?;
            opt_usize(s, "kcap", &mut cfg.kcap)?;
            opt_usize(s, "kfloor", &mut cfg.kfloor)?;
        }
        if let Some(d) = obj.get("diophantine") {
            let d = d.as_object().ok_or_else(|| anyhow!("field 'diophantine' must be an object"))?;
            opt_f64(d, "gamma", &mut cfg.dioph_gamma)?;
            opt_f64(d, "tau", &mut cfg.dioph_tau)?;
            opt_usize(d, "kmax", &mut cfg.dioph_kmax)?;
        }
        if let Some(v) = obj.get("max_steps") {
            cfg.max_steps = v
                .as_u64()
                .ok_or_else(|| anyhow!("field 'max_steps' must be a non-negative integer"))?
                as usize;
        }
        if let Some(v) = obj.get("ablation") {
            cfg.ablation =
                v.as_bool().ok_or_else(|| anyhow!("field 'ablation' must be a boolean"))?;
        }
        if let Some(v) = obj.get("seed") {
            cfg.seed =
                v.as_u64().ok_or_else(|| anyhow!("field 'seed' must be a non-negative integer"))?;
        }
        Ok(cfg)
    }
}

/// Targets accept named frequencies, a bare number, or an array.
pub fn parse_target(value: &Value) -> Result<Vec<f64>> {
    match value {
        Value::String(s) => Ok(vec![named_frequency(s)?]),
        Value::Number(n) => {
            Ok(vec![n.as_f64().ok_or_else(|| anyhow!("field 'target' is not finite"))?])
        }
        Value::Array(items) => items
            .iter()
            .map(|item| match item {
                Value::String(s) => named_frequency(s),
                Value::Number(n) => {
                    n.as_f64().ok_or_else(|| anyhow!("field 'target' entry is not finite"))
                }
                _ => bail!("field 'target' entries must be numbers or names"),
            })
            .collect(),
        _ => bail!("field 'target' must be a number, name, or array"),
    }
}

/// `golden` and `silver` are `2 pi` times the corresponding quadratic
/// irrational; anything else must parse as a number.
pub fn named_frequency(name: &str) -> Result<f64> {
    match name {
        "golden" => Ok(golden_like_frequency(&[1]).expect("golden seed")),
        "silver" => Ok(golden_like_frequency(&[2]).expect("silver seed")),
        other => other
            .parse::<f64>()
            .map_err(|_| anyhow!("unknown frequency '{other}' (use golden, silver, or a number)")),
    }
}

fn require_f64(obj: &serde_json::Map<String, Value>, field: &str) -> Result<f64> {
    obj.get(field)
        .and_then(Value::as_f64)
        .ok_or_else(|| anyhow!("missing or non-numeric field '{field}'"))
}

fn opt_f64(obj: &serde_json::Map<String, Value>, field: &str, slot: &mut f64) -> Result<()> {
    if let Some(v) = obj.get(field) {
        *slot = v.as_f64().ok_or_else(|| anyhow!("field '{field}' must be a number"))?;
    }
    Ok(())
}

fn opt_usize(obj: &serde_json::Map<String, Value>, field: &str, slot: &mut usize) -> Result<()> {
    if let Some(v) = obj.get(field) {
        *slot = v
            .as_u64()
            .ok_or_else(|| anyhow!("field '{field}' must be a non-negative integer"))?
            as usize;
    }
    Ok(())
}

/// Sweep specs look like `eps=1e-5..1e-3:geometric:5`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub lo: f64,
    pub hi: f64,
    pub geometric: bool,
    pub count: usize,
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let body = text
            .strip_prefix("eps=")
            .ok_or_else(|| anyhow!("sweep must start with 'eps=' (got '{text}')"))?;
        let mut parts = body.split(':');
        let range = parts.next().unwrap_or_default();
        let scale = parts.next().ok_or_else(|| anyhow!("sweep missing scale (geometric|linear)"))?;
        let count: usize = parts
            .next()
            .ok_or_else(|| anyhow!("sweep missing count"))?
            .parse()
            .context("sweep count")?;
        if parts.next().is_some() {
            bail!("trailing sweep fields in '{text}'");
        }
        let (lo_s, hi_s) =
            range.split_once("..").ok_or_else(|| anyhow!("sweep range must be lo..hi"))?;
        let lo: f64 = lo_s.parse().context("sweep lower bound")?;
        let hi: f64 = hi_s.parse().context("sweep upper bound")?;
        let geometric = match scale {
            "geometric" => true,
            "linear" => false,
            other => bail!("unknown sweep scale '{other}'"),
        };
        if count < 2 || lo <= 0.0 || hi <= lo {
            bail!("sweep needs 0 < lo < hi and count >= 2");
        }
        Ok(Self { lo, hi, geometric, count })
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count)
            .map(|i| {
                let t = i as f64 / (self.count - 1) as f64;
                if self.geometric {
                    (self.lo.ln() * (1.0 - t) + self.hi.ln() * t).exp()
                } else {
                    self.lo * (1.0 - t) + self.hi * t
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses() {
        let cfg = RunConfig::from_str(
            r#"{"schema_version": 1, "model": "standard", "epsilon": 1e-4, "target": "golden"}"#,
        )
        .unwrap();
        assert_eq!(cfg.model, "standard");
        assert!((cfg.target[0] - 3.883_222_077_450_933).abs() < 1e-12);
        assert_eq!(cfg.max_steps, 24);
    }

    #[test]
    fn bad_fields_are_reported_by_name() {
        let err = RunConfig::from_str(
            r#"{"schema_version": 1, "model": "standard", "epsilon": "big", "target": 1.0}"#,
        )
        .unwrap_err();
        assert!(format!("{err}").contains("epsilon"));

        let err = RunConfig::from_str(r#"{"model": "standard"}"#).unwrap_err();
        assert!(format!("{err}").contains("schema_version"));

        let err = RunConfig::from_str(
            r#"{"schema_version": 1, "model": "standard", "epsilon": 1e-4, "target": 1.0,
                "tolerances": {"tol": -1.0}}"#,
        )
        .unwrap_err();
        assert!(format!("{err}").contains("tol"));
    }

    #[test]
    fn sweep_specs() {
        let s = SweepSpec::parse("eps=1e-5..1e-3:geometric:5").unwrap();
        let v = s.values();
        assert_eq!(v.len(), 5);
        assert!((v[0] - 1e-5).abs() < 1e-18);
        assert!((v[4] - 1e-3).abs() < 1e-16);
        assert!((v[2] - 1e-4).abs() < 1e-17);
        assert!(SweepSpec::parse("eps=1e-3..1e-5:geometric:5").is_err());
        assert!(SweepSpec::parse("steps=1..2:linear:3").is_err());
    }
}
