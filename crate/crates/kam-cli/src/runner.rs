//! Drive one configured engine run (or a sweep of them) and emit the
//! artifact set: per-step CSV, translation-ledger CSV, result record, report.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use kam_core::diagnostics::{self, hypothesis_report};
use kam_core::kam_param::{param_kam_run, ParamRunConfig, RunOutcome};
use kam_core::kam_twist::{twist_kam_run, TwistRunConfig};
use kam_core::testbed_maps::{build, CatalogModel};

use crate::config::{RunConfig, SweepSpec};
use crate::formats::{
    ledger_csv, param_result_to_json, param_steps_csv, report_text, twist_result_to_json,
    twist_steps_csv, ModelStamp,
};
use crate::{EXIT_DIVERGED, EXIT_OK};

/// The emitted artifact set, kept in memory for tests and determinism checks.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub exit_code: i32,
    pub outcome: RunOutcome,
    pub steps_csv: String,
    pub ledger_csv: String,
    pub result_json: String,
    pub report: String,
}

/// Execute the configured run without touching the filesystem.
pub fn run_in_memory(cfg: &RunConfig) -> Result<RunArtifacts> {
    let model = build(&cfg.model, cfg.epsilon, &cfg.target)
        .map_err(|_| anyhow!("unknown catalog model '{}'", cfg.model))?;
    let stamp = ModelStamp {
        model: cfg.model.clone(),
        epsilon: cfg.epsilon,
        tol: cfg.tol,
        freq_tol: cfg.freq_tol,
    };
    match model {
        CatalogModel::Twist(m) => {
            let mut ec = TwistRunConfig::new(cfg.target.clone());
            ec.tol = cfg.tol;
            ec.freq_tol = cfg.freq_tol;
            ec.guard = cfg.guard;
            ec.max_steps = cfg.max_steps;
            ec.kfloor = cfg.kfloor;
            ec.kcap = cfg.kcap;
            ec.rho = cfg.rho;
            ec.eta = cfg.eta;
            ec.sched_m = cfg.sched_m;
            ec.s0 = cfg.s0;
            ec.dioph = cfg.dioph();
            ec.ablation = cfg.ablation;
            let result = twist_kam_run(&m, &ec).context("twist run failed")?;
            let report = hypothesis_report(
                &result.schedule,
                &result.records,
                m.freq.modulus_upper.as_ref(),
            );
            Ok(RunArtifacts {
                exit_code: if result.converged() { EXIT_OK } else { EXIT_DIVERGED },
                outcome: result.outcome.clone(),
                steps_csv: twist_steps_csv(&result.records),
                ledger_csv: ledger_csv(&result.chain.translations),
                result_json: twist_result_to_json(&result, &stamp),
                report: report_text(&result.outcome, &report, result.shift_total_norm()),
            })
        }
        CatalogModel::Param(m) => {
            let mut ec = ParamRunConfig::new(cfg.target.clone());
            ec.tol = cfg.tol;
            ec.freq_tol = cfg.freq_tol;
            ec.guard = cfg.guard;
            ec.max_steps = cfg.max_steps;
            ec.kfloor = cfg.kfloor;
            ec.kcap = cfg.kcap;
            ec.rho = cfg.rho;
            ec.eta = cfg.eta;
            ec.sched_m = cfg.sched_m;
            ec.s0 = cfg.s0;
            ec.dioph = cfg.dioph();
            ec.ablation = cfg.ablation;
            let result = param_kam_run(&m, &ec).context("param run failed")?;
            let report = hypothesis_report(
                &result.schedule,
                &result.records,
                m.freq.modulus_upper.as_ref(),
            );
            Ok(RunArtifacts {
                exit_code: if result.converged() { EXIT_OK } else { EXIT_DIVERGED },
                outcome: result.outcome.clone(),
                steps_csv: param_steps_csv(&result.records),
                ledger_csv: ledger_csv(&result.chain.translations),
                result_json: param_result_to_json(&result, &stamp),
                report: report_text(
                    &result.outcome,
                    &report,
                    result.chain.translations.total_norm(),
                ),
            })
        }
    }
}

/// Execute and write `steps.csv`, `ledger.csv`, `result.json`, `report.txt`.
pub fn execute_run(cfg: &RunConfig, out_dir: &Path) -> Result<RunArtifacts> {
    let artifacts = run_in_memory(cfg)?;
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    std::fs::write(out_dir.join("steps.csv"), &artifacts.steps_csv)?;
    std::fs::write(out_dir.join("ledger.csv"), &artifacts.ledger_csv)?;
    std::fs::write(out_dir.join("result.json"), &artifacts.result_json)?;
    std::fs::write(out_dir.join("report.txt"), &artifacts.report)?;
    Ok(artifacts)
}

/// Fan a sweep out over worker threads (capped by `KAMFORGE_THREADS`), one
/// isolated output directory per value. Returns the worst exit code.
pub fn execute_sweep(cfg: &RunConfig, spec: &SweepSpec, out_root: &Path) -> Result<i32> {
    let values = spec.values();
    let workers: usize = std::env::var("KAMFORGE_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&w| w >= 1)
        .unwrap_or(4)
        .min(values.len());
    let jobs: Vec<(usize, f64)> = values.iter().copied().enumerate().collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<std::sync::Mutex<Option<Result<i32>>>> =
        values.iter().map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if j >= jobs.len() {
                    break;
                }
                let (idx, eps) = jobs[j];
                let mut sub = cfg.clone();
                sub.epsilon = eps;
                let dir = out_root.join(format!("eps_{idx:03}"));
                let outcome = execute_run(&sub, &dir).map(|a| a.exit_code);
                *results[idx].lock().expect("sweep result slot") = Some(outcome);
            });
        }
    });
    let mut worst = EXIT_OK;
    for (idx, slot) in results.iter().enumerate() {
        match slot.lock().expect("sweep result slot").take() {
            Some(Ok(code)) => worst = worst.max(code),
            Some(Err(e)) => bail!("sweep member {idx} failed: {e:#}"),
            None => bail!("sweep member {idx} never ran"),
        }
    }
    Ok(worst)
}

/// Rotation number of a catalog member orbit (used by `verify rotation`).
pub fn catalog_rotation(
    name: &str,
    epsilon: f64,
    target: &[f64],
    start_action: f64,
    theta0: f64,
    iters: usize,
) -> Result<diagnostics::RotationEstimate> {
    match build(name, epsilon, target).map_err(|_| anyhow!("unknown catalog model '{name}'"))? {
        CatalogModel::Twist(m) => {
            Ok(diagnostics::twist_orbit_rotation(&m, theta0, start_action, iters))
        }
        CatalogModel::Param(m) => {
            if m.dim() != 1 {
                bail!("rotation verification handles one-dimensional members");
            }
            let xi = vec![start_action];
            Ok(diagnostics::rotation_number(
                move |t| m.apply(&[t], &xi)[0],
                theta0,
                iters,
            ))
        }
    }
}
