//! Experiment runner around the invariant-torus engines: configuration
//! parsing, frozen file formats (per-step CSV, result records, reports) and
//! the verification subcommands.
//!
//! All emitted floats carry 17 significant digits, which round-trips `f64`
//! exactly; identical configurations produce byte-identical artifacts.

pub mod config;
pub mod formats;
pub mod runner;

pub use config::RunConfig;
pub use runner::{execute_run, execute_sweep, RunArtifacts};

/// Exit status conventions: converged runs exit 0, controlled divergence
/// (including step-cap exhaustion) exits 2, hard errors exit 1.
pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;
