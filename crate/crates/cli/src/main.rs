use std::process::ExitCode;

use clap::Parser;
use ctmdp::{emit, report_exit_code, run, Cli, RunConfig};

fn main() -> ExitCode {
    let config = RunConfig::from(Cli::parse());
    let code = match run(&config) {
        Ok(report) => match emit(&report, config.format, config.out.as_deref()) {
            Ok(()) => {
                for check in report.checks.iter().filter(|c| !c.passed) {
                    eprintln!(
                        "check failed: {} = {} (tolerance {})",
                        check.name, check.value, check.tolerance
                    );
                }
                report_exit_code(&report)
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
