//! Acceptance matrix. Prints one `PASS` or `FAIL` line per criterion and
//! exits non-zero on any unexpected failure. Extra arguments filter by id.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use coarsetk::verify::{self, Criterion};
use coarsetk::{Budgets, Result};

const SEED: u64 = 7;

/// Criteria reported as FAIL, with the exact set of checks allowed to fail.
const KNOWN_FAILING: &[(&str, &[&str])] = &[("dyadic_example", &["dyadic_min_d_closed_form"])];

type Run = fn() -> Result<Criterion>;

const CRITERIA: &[(&str, u64, Run)] = &[
    ("c01", 60, || verify::ultrametric_axioms(SEED)),
    ("c02", 30, || verify::dyadic_example(Budgets::default())),
    ("c03", 30, || verify::triadic_example(Budgets::default())),
    ("c04", 120, || verify::asdim_builder(Budgets::default())),
    ("c05", 120, || verify::an_builder(Budgets::default())),
    ("c06", 60, || verify::dimension_raising(SEED, 50, Budgets::default())),
    ("c07", 60, || verify::closure(SEED, 20, Budgets::default())),
    ("c08", 60, || verify::control_covers(Budgets::default())),
    ("c09", 10, || verify::zero_dim_equivalence(Budgets::default())),
];

/// Runs one criterion; `Err` carries the reason it failed unexpectedly.
fn run(label: &str, limit: Duration, f: Run) -> std::result::Result<(), String> {
    let start = Instant::now();
    let c = f().map_err(|e| format!("{label}: {e}"))?;
    let elapsed = start.elapsed();
    let in_time = elapsed < limit;
    println!(
        "{} {label} ({}) {:.2}s limit {}s",
        if c.pass && in_time { "PASS" } else { "FAIL" },
        c.name,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    let failed: Vec<&str> = c.failures().map(|v| v.check.as_str()).collect();
    for v in c.failures() {
        println!("  failed check {}: {}", v.check, v.detail);
    }
    if !in_time {
        return Err(format!("{label} took {elapsed:?}, limit {limit:?}"));
    }
    match KNOWN_FAILING.iter().find(|(name, _)| *name == c.name) {
        Some((_, expected)) if failed != *expected => Err(format!("{label}: failing checks {failed:?}, expected {expected:?}")),
        None if !c.pass => Err(format!("{label} failed: {failed:?}")),
        _ => Ok(()),
    }
}

fn determinism() -> std::result::Result<(), String> {
    let once = || {
        Command::new(env!("CARGO_BIN_EXE_coarsetk"))
            .args(["verify", "--suite", "all", "--seed", "7"])
            .output()
            .map_err(|e| format!("spawn coarsetk: {e}"))
    };
    let a = once()?;
    let b = once()?;
    let same = a.stdout == b.stdout && !a.stdout.is_empty() && a.status.code() == b.status.code();
    println!("{} c10 (determinism) {} bytes", if same { "PASS" } else { "FAIL" }, a.stdout.len());
    if !same {
        return Err("c10: reports differ".into());
    }
    if a.status.code() != Some(2) {
        return Err(format!("c10: exit code {:?}, expected 2", a.status.code()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |id: &str| filters.is_empty() || filters.iter().any(|f| id.contains(f.as_str()));
    let mut errors = Vec::new();
    for &(id, limit, f) in CRITERIA {
        if wanted(id) {
            errors.extend(run(id, Duration::from_secs(limit), f).err());
        }
    }
    if wanted("c10") {
        errors.extend(determinism().err());
    }
    for e in &errors {
        eprintln!("error: {e}");
    }
    if errors.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
