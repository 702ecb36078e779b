//! Command-line front end for `ctmdp-core`.
//!
//! Every command turns a [`RunConfig`] into a [`Report`]. Exit codes:
//!
//! * `0`: success, every check passed;
//! * `1`: a model axiom or constraint is violated, the constrained set is
//!   empty, or a reported check failed;
//! * `2`: unreadable or malformed input, or a usage error.

pub mod config;
mod continuous;
pub mod files;
mod finite;
pub mod report;

use std::time::Instant;

pub use config::{Cli, Command, Format, RunConfig};
pub use report::{emit, Check, Report, Table};

use ctmdp_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("malformed input: {0}")]
    Structure(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Parse { .. } | CliError::Structure(_) | CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                Error::Dimension { .. }
                | Error::Parameter(_)
                | Error::InadmissibleAction { .. }
                | Error::CostIndex { .. }
                | Error::EnumerationCap { .. } => 2,
                _ => 1,
            },
        }
    }
}

/// Exit code of a finished run.
pub fn report_exit_code(report: &Report) -> i32 {
    if report.passed {
        0
    } else {
        1
    }
}

/// Runs one command.
pub fn run(config: &RunConfig) -> Result<Report, CliError> {
    let start = Instant::now();
    let mut report = match (config.command, config.model.is_some(), config.example) {
        (_, true, Some(_)) => return Err(CliError::Usage("give either --model or --example, not both".into())),
        (Command::Bench, _, _) => continuous::bench(config)?,
        (Command::Validate, false, Some(_)) => continuous::validate(config)?,
        (Command::DriftCheck, false, Some(_)) => continuous::drift_check(config)?,
        (Command::Simulate, false, Some(_)) => continuous::simulate(config)?,
        (_, false, Some(_)) => {
            return Err(CliError::Usage(format!(
                "`{}` works on finite models; pass --model",
                config.command.name()
            )))
        }
        (_, false, None) => {
            return Err(CliError::Usage(
                "an input is required: --model PATH or --example ID".into(),
            ))
        }
        (Command::Validate, true, None) => finite::validate(config)?,
        (Command::DriftCheck, true, None) => finite::drift_check(config)?,
        (Command::Solve, true, None) => finite::solve(config)?,
        (Command::EvalPolicy, true, None) => finite::eval_policy(config)?,
        (Command::Simulate, true, None) => finite::simulate(config)?,
        (Command::Occupation, true, None) => finite::occupation(config)?,
        (Command::Decompose, true, None) => finite::decompose(config)?,
    };
    if config.timings {
        let mut t = std::collections::BTreeMap::new();
        t.insert("total_seconds".to_string(), start.elapsed().as_secs_f64());
        report.timings = Some(t);
    }
    Ok(report)
}
