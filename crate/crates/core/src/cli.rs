//! Command-line front end.
//!
//! Exit codes: 0 when every check passes, 1 when a verification check fails,
//! 2 on input, parse or validation errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::io::{parse_scenario, preset, render_batch, render_frames_table, render_no_signalling, serialize_scenario, RunConfig, RunReport};
use crate::objects::Scenario;
use crate::verify::{batch_verify, verify_frame_equality, verify_no_signalling, BatchConfig, DEFAULT_TOL};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "causal-frames", version, about = "Check that forward, reverse and space-like observers assign identical joint probabilities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate a scenario file.
    Validate {
        /// Scenario file, or `preset:<name>`.
        file: String,
    },
    /// Compare the three frames' joint distributions.
    Frames {
        file: String,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Write a JSON report here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Check that B's marginals do not depend on A's measurement choice.
    Nosignal {
        file: String,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Verify frame equality on seeded random scenarios.
    Random {
        #[arg(long)]
        d1: usize,
        #[arg(long)]
        d2: usize,
        #[arg(long)]
        kraus: usize,
        #[arg(long)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print or write a built-in scenario.
    Preset {
        /// stern-gerlach, depolarizing or bell.
        name: String,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
}

fn load(source: &str) -> Result<Scenario> {
    if let Some(name) = source.strip_prefix("preset:") {
        return preset(name);
    }
    let text = fs::read_to_string(source).map_err(|e| Error::InvalidArgument(format!("cannot read {source}: {e}")))?;
    parse_scenario(&text)
}

fn check_tol(tol: f64) -> Result<()> {
    if tol >= 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("--tol must be a nonnegative number, got {tol}")))
    }
}

fn write_json(path: &Option<PathBuf>, report: &RunReport) -> Result<()> {
    if let Some(path) = path {
        fs::write(path, report.to_json())
            .map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn verdict(passed: bool) -> i32 {
    if passed {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Validate { file } => {
            let s = load(&file)?;
            let _ = writeln!(
                out,
                "valid: {} (d1={}, d2={}, {} Kraus operators, {}x{} outcomes{})",
                s.name(),
                s.dims().d1(),
                s.dims().d2(),
                s.channel().kraus().len(),
                s.povm_a().len(),
                s.povm_b().len(),
                if s.povm_a_alt().is_some() { ", alternative POVM for A" } else { "" }
            );
            Ok(EXIT_PASS)
        }
        Command::Frames { file, tol, json } => {
            check_tol(tol)?;
            let report = verify_frame_equality(&load(&file)?, tol)?;
            let _ = write!(out, "{}", render_frames_table(&report));
            let mut run = RunReport::new(RunConfig {
                command: "frames".into(),
                input: Some(file),
                tol,
            });
            run.passed = report.passed;
            run.frames = Some(report);
            write_json(&json, &run)?;
            Ok(verdict(run.passed))
        }
        Command::Nosignal { file, tol, json } => {
            check_tol(tol)?;
            let report = verify_no_signalling(&load(&file)?, tol)?;
            let _ = write!(out, "{}", render_no_signalling(&report));
            let mut run = RunReport::new(RunConfig {
                command: "nosignal".into(),
                input: Some(file),
                tol,
            });
            run.passed = report.passed;
            run.no_signalling = Some(report);
            write_json(&json, &run)?;
            Ok(verdict(run.passed))
        }
        Command::Random {
            d1,
            d2,
            kraus,
            trials,
            seed,
            tol,
            json,
        } => {
            check_tol(tol)?;
            let config = BatchConfig {
                dims: vec![(d1, d2)],
                kraus_counts: vec![kraus],
                n_trials: trials,
                base_seed: seed,
                tol,
            };
            let report = batch_verify(&config)?;
            let _ = write!(out, "{}", render_batch(&report));
            let mut run = RunReport::new(RunConfig {
                command: "random".into(),
                input: None,
                tol,
            });
            run.passed = report.all_passed();
            run.batch = Some(report);
            write_json(&json, &run)?;
            Ok(verdict(run.passed))
        }
        Command::Preset { name, emit } => {
            let text = serialize_scenario(&preset(&name)?);
            match emit {
                Some(path) => {
                    fs::write(&path, text + "\n")
                        .map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display())))?;
                    let _ = writeln!(out, "wrote preset {name} to {}", path.display());
                }
                None => {
                    let _ = writeln!(out, "{text}");
                }
            }
            Ok(EXIT_PASS)
        }
    }
}

/// Run the CLI with explicit output streams and return the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT_ERROR } else { EXIT_PASS };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{rendered}")
            } else {
                write!(out, "{rendered}")
            };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT_ERROR
        }
    }
}

/// Entry point used by the binary.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
