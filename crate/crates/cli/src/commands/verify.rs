use clap::Args;
use coarsetk::verify::{run_suite, Suite, Verdict};
use coarsetk::{Budgets, Result};
use serde_json::json;

use crate::report::Outcome;

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// lemmas, examples, builders or all.
    #[arg(long)]
    suite: String,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

pub fn run(args: VerifyArgs, budgets: Budgets) -> Result<Outcome> {
    let suite: Suite = args.suite.parse()?;
    let report = run_suite(suite, args.seed, budgets)?;
    let checks = report
        .criteria
        .iter()
        .map(|c| Verdict::new(c.name, c.pass, serde_json::to_value(&c.checks).unwrap_or_default()))
        .collect();
    Outcome::report(
        "verify",
        json!({ "suite": suite, "seed": args.seed, "budgets": budgets }),
        checks,
        report.matrix,
    )
}
