//! `kamforge` — compute invariant tori with a prescribed, preserved frequency.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use kam_cli::config::{named_frequency, RunConfig, SweepSpec};
use kam_cli::formats::{fmt_f64, result_from_json};
use kam_cli::{runner, EXIT_DIVERGED, EXIT_ERROR, EXIT_OK};
use kam_core::frequency_solver::degree_1d;
use kam_core::small_divisors::{check_diophantine, DiophantineParams};
use kam_core::testbed_maps::{build, catalog, verify_known_facts, CatalogModel};

#[derive(Parser)]
#[command(name = "kamforge", version, about = "Frequency-preserving invariant torus engines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured engine and write its artifacts.
    Run {
        /// JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Fan out over epsilon values, e.g. `eps=1e-5..1e-3:geometric:5`.
        #[arg(long)]
        sweep: Option<String>,
        /// Override the configured step cap.
        #[arg(long)]
        max_steps: Option<usize>,
        /// Override the configured convergence tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Disable the translation step (frequency is allowed to drift).
        #[arg(long)]
        ablation: bool,
    },
    /// Check a property and exit 0 iff it holds.
    Verify {
        #[command(subcommand)]
        check: VerifyCommand,
    },
    /// List the model catalog.
    Catalog {
        /// Also verify each member's recorded facts.
        #[arg(long)]
        check: bool,
        /// Epsilon used when checking facts.
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
    },
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Scan small divisors of a frequency up to a mode cutoff.
    Diophantine {
        /// Frequency: `golden`, `silver`, or comma-separated numbers.
        #[arg(long)]
        omega: String,
        #[arg(long, default_value_t = 1.5)]
        tau: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 50)]
        kmax: usize,
    },
    /// Topological degree of a catalog member's frequency map.
    Degree {
        #[arg(long)]
        map: String,
        /// Target frequency value.
        #[arg(long, allow_hyphen_values = true)]
        p: String,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
    },
    /// Orbit-averaged rotation number of a catalog member.
    Rotation {
        #[arg(long)]
        map: String,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        /// Starting action (twist members) or parameter (rotation members).
        #[arg(long, allow_hyphen_values = true)]
        r: f64,
        #[arg(long, default_value_t = 0.0)]
        theta0: f64,
        #[arg(long, default_value_t = 1_000_000)]
        iters: usize,
    },
    /// Recompute the conjugacy residual of a completed run directory.
    Residual {
        #[arg(long)]
        run: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { config, out, sweep, max_steps, tol, ablation } => {
            let mut cfg = RunConfig::from_path(&config)?;
            if let Some(m) = max_steps {
                cfg.max_steps = m;
            }
            if let Some(t) = tol {
                if t <= 0.0 {
                    bail!("--tol must be positive");
                }
                cfg.tol = t;
            }
            if ablation {
                cfg.ablation = true;
            }
            match sweep {
                Some(spec) => {
                    let spec = SweepSpec::parse(&spec)?;
                    runner::execute_sweep(&cfg, &spec, &out)
                }
                None => {
                    let artifacts = runner::execute_run(&cfg, &out)?;
                    println!("outcome: {:?}", artifacts.outcome);
                    println!("artifacts: {}", out.display());
                    Ok(artifacts.exit_code)
                }
            }
        }
        Command::Verify { check } => verify(check),
        Command::Catalog { check, eps } => {
            let golden = named_frequency("golden")?;
            let mut all_ok = true;
            for entry in catalog() {
                println!("{:<16} [{:?}] {}", entry.name, entry.kind, entry.summary);
                if check {
                    let target = if entry.name == "param-2d" {
                        vec![golden, named_frequency("silver")?]
                    } else {
                        vec![golden]
                    };
                    for fact in verify_known_facts(entry.name, eps, &target)
                        .map_err(|e| anyhow!("{e}"))?
                    {
                        println!("    {} {}", if fact.pass { "ok  " } else { "FAIL" }, fact.description);
                        all_ok &= fact.pass;
                    }
                }
            }
            Ok(if all_ok { EXIT_OK } else { EXIT_ERROR })
        }
    }
}

fn parse_omega(text: &str) -> Result<Vec<f64>> {
    text.split(',').map(named_frequency).collect()
}

fn verify(check: VerifyCommand) -> Result<i32> {
    match check {
        VerifyCommand::Diophantine { omega, tau, gamma, kmax } => {
            let w = parse_omega(&omega)?;
            let params = DiophantineParams::new(gamma, tau, 8.0, kmax);
            let report = check_diophantine(&w, &params);
            println!("omega: {}", w.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(","));
            println!("worst_k: {:?}", report.worst_k);
            println!("worst_value: {}", fmt_f64(report.worst_value));
            println!("worst_distance: {}", fmt_f64(report.worst_distance));
            println!("gamma: {}", fmt_f64(report.gamma));
            println!("satisfied: {}", report.satisfied);
            Ok(if report.satisfied { EXIT_OK } else { EXIT_DIVERGED })
        }
        VerifyCommand::Degree { map, p, eps } => {
            let target = named_frequency(&p)?;
            let model = build(&map, eps, &[target])
                .map_err(|_| anyhow!("unknown catalog model '{map}'"))?;
            let freq = match &model {
                CatalogModel::Twist(m) => &m.freq,
                CatalogModel::Param(m) => &m.freq,
            };
            if freq.domain_dim != 1 {
                bail!("degree verification handles one-dimensional members");
            }
            let deg = degree_1d(freq, freq.region[0], target)
                .map_err(|e| anyhow!("degree query failed: {e}"))?;
            println!("{deg}");
            Ok(if deg != 0 { EXIT_OK } else { EXIT_DIVERGED })
        }
        VerifyCommand::Rotation { map, eps, r, theta0, iters } => {
            let golden = named_frequency("golden")?;
            let est = runner::catalog_rotation(&map, eps, &[golden], r, theta0, iters)?;
            println!("{}", fmt_f64(est.value));
            println!("uncertainty: {}", fmt_f64(est.uncertainty));
            Ok(EXIT_OK)
        }
        VerifyCommand::Residual { run } => {
            let path = run.join("result.json");
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            let stored = result_from_json(&text)?;
            let model = build(&stored.model, stored.epsilon, &stored.target)
                .map_err(|_| anyhow!("unknown catalog model '{}'", stored.model))?;
            let residual = match (&model, &stored.param_chain, &stored.twist_chain) {
                (CatalogModel::Param(m), Some(chain), _) => {
                    let xi = stored.base_final.clone();
                    let map = move |theta: &[f64]| m.apply(theta, &xi);
                    kam_core::diagnostics::param_conjugacy_residual(
                        chain,
                        &map,
                        &stored.target,
                        1024,
                    )
                }
                (CatalogModel::Twist(m), _, Some(chain)) => {
                    let map = |theta: &[f64], rr: &[f64]| m.apply(theta, rr);
                    let zero = vec![0.0; stored.target.len()];
                    kam_core::diagnostics::twist_conjugacy_residual(
                        chain,
                        &map,
                        &stored.target,
                        &zero,
                        &stored.base_final,
                        1024,
                    )
                }
                _ => bail!("result kind does not match the catalog member"),
            };
            let bound = 10.0 * stored.tol;
            println!("residual: {}", fmt_f64(residual));
            println!("recorded: {}", fmt_f64(stored.conjugacy_residual));
            println!("bound: {}", fmt_f64(bound));
            Ok(if residual <= bound { EXIT_OK } else { EXIT_DIVERGED })
        }
    }
}
