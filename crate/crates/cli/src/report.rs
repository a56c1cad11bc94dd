use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use coarsetk::verify::Verdict;
use coarsetk::Error;
use serde::Serialize;
use serde_json::Value;

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_BUDGET: u8 = 3;

/// Command result: an echo of the configuration, exact verdicts and the
/// payload. Reports carry no timings so identical runs are byte-identical.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config: Value,
    pub pass: bool,
    pub checks: Vec<Verdict>,
    pub result: Value,
}

impl RunReport {
    pub fn new(command: &str, config: Value, checks: Vec<Verdict>, result: Value) -> RunReport {
        RunReport {
            command: command.to_string(),
            config,
            pass: checks.iter().all(|c| c.pass),
            checks,
            result,
        }
    }
}

pub enum Outcome {
    /// A report on stdout; exit 2 when a check failed.
    Report(RunReport),
    /// An artifact (space, cover, precode, export) on stdout.
    Artifact(String),
}

impl Outcome {
    pub fn report(command: &str, config: Value, checks: Vec<Verdict>, result: impl Serialize) -> coarsetk::Result<Outcome> {
        Ok(Outcome::Report(RunReport::new(command, config, checks, serde_json::to_value(result)?)))
    }

    pub fn json(value: &impl Serialize) -> coarsetk::Result<Outcome> {
        Ok(Outcome::Artifact(serde_json::to_string_pretty(value)?))
    }

    pub fn emit(self) -> ExitCode {
        match self {
            Outcome::Artifact(text) => {
                if !text.is_empty() {
                    print_line(&text);
                }
                ExitCode::SUCCESS
            }
            Outcome::Report(r) => {
                match serde_json::to_string_pretty(&r) {
                    Ok(text) => print_line(&text),
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(1);
                    }
                }
                if r.pass {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(EXIT_VALIDATION)
                }
            }
        }
    }
}

/// Writes to stdout, ignoring a closed pipe.
fn print_line(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}").and_then(|_| out.flush());
}

/// 3 for exhausted budgets, 2 for objects that fail their own axioms or
/// claims, 1 for unusable input.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::BudgetExceeded { .. } => EXIT_BUDGET,
        Error::InvalidSpace(_)
        | Error::NotAMetric(_)
        | Error::TriangleViolation { .. }
        | Error::NotACover { .. }
        | Error::EmptyElement(_)
        | Error::NotDisjoint { .. }
        | Error::ClaimFailed(_)
        | Error::Internal(_) => EXIT_VALIDATION,
        _ => 1,
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> coarsetk::Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Precondition(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> coarsetk::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Writes `value` to `out` when given, otherwise prints it.
pub fn artifact(out: Option<&Path>, value: &impl Serialize) -> coarsetk::Result<Outcome> {
    match out {
        Some(path) => {
            write_json(path, value)?;
            Outcome::report(
                "write",
                serde_json::json!({ "out": path.display().to_string() }),
                Vec::new(),
                Value::Null,
            )
        }
        None => Outcome::json(value),
    }
}
