//! Batch experiment driver behind the `polycbo` binary.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical divergence,
//! 4 failed check.

mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

pub use commands::{
    cmd_bench, cmd_compare, cmd_fpcheck, cmd_laplace, cmd_run, compare, compare_configs, fpcheck, laplace_instance,
    CompareReport, FpCheckReport, FpCheckRow, KernelTrace, LaplaceInstance, Status,
};
pub use config::{load_config, parse_config, ExperimentConfig, Mode};

use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Diverged { .. }
        | Error::NonFiniteObjective { .. }
        | Error::BelowDeclaredMinimum { .. }
        | Error::CflViolation { .. } => EXIT_DIVERGED,
        _ => EXIT_CONFIG,
    }
}

pub fn dispatch(mode: Mode, cfg: &ExperimentConfig) -> crate::Result<Status> {
    match mode {
        Mode::Run => cmd_run(cfg),
        Mode::Compare => cmd_compare(cfg),
        Mode::Fpcheck => cmd_fpcheck(cfg),
        Mode::Laplace => cmd_laplace(cfg),
        Mode::Bench => cmd_bench(cfg),
    }
}

/// Loads the configuration, applies overrides and runs `mode`; returns the
/// process exit code.
pub fn execute(mode: Mode, config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> i32 {
    let mut cfg = match load_config(config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    cfg.mode = mode;
    if let Some(s) = seed {
        cfg.dynamics.seed = s;
    }
    if let Some(dir) = out {
        cfg.outputs = dir;
    }
    match dispatch(mode, &cfg) {
        Ok(Status::Ok) => EXIT_OK,
        Ok(Status::CheckFailed) => EXIT_CHECK_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
