//! Command-line experiments over the `tiltlab` library: each experiment
//! reproduces one worked example end to end and emits a JSON report or a CSV
//! table, with named checks that decide the exit code.
//!
//! Exit codes: `0` every check passed, `1` some check failed, `2` the
//! configuration was invalid or the requested problem is infeasible.

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

use std::fs::File;
use std::io::{self, Write};
use std::time::Instant;

pub use config::{Experiment, ExperimentConfig, Format};
pub use error::{CliError, CliResult};
pub use experiments::run;
pub use report::{Check, Report, Table};

/// JSON schema every report validates against.
pub const REPORT_SCHEMA: &str = include_str!("../report.schema.json");

/// Runs the experiment, writes its output and returns the exit code.
pub fn execute(config: &ExperimentConfig, timing: bool) -> CliResult<i32> {
    let start = Instant::now();
    let mut report = run(config)?;
    let elapsed = start.elapsed().as_secs_f64();
    log::info!("{} finished in {elapsed:.3} s", config.experiment);
    if timing {
        report.wall_clock_seconds = Some(elapsed);
    }
    match &config.out {
        Some(path) => write_output(&report, config.format, File::create(path)?)?,
        None => write_output(&report, config.format, io::stdout().lock())?,
    }
    for c in &report.checks {
        eprintln!(
            "{} {}: value {} (threshold {}, margin {}) — {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            report::format_g12(c.value),
            report::format_g12(c.threshold),
            report::format_g12(c.margin),
            c.invariant
        );
    }
    Ok(report.exit_code())
}

fn write_output<W: Write>(report: &Report, format: Format, mut out: W) -> CliResult<()> {
    match format {
        Format::Json => out.write_all(report.to_json()?.as_bytes())?,
        Format::Csv => report.write_csv(&mut out)?,
    }
    out.flush()?;
    Ok(())
}
