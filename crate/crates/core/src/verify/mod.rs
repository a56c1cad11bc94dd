//! Acceptance sweeps: every check re-derives its verdict from exact
//! arithmetic, and reports carry no timings so they are byte-stable.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::Serialize;
use serde_json::Value;

use crate::budget::Budgets;
use crate::coarse_maps::check_bn;
use crate::dist::Dist;
use crate::error::{Error, Result};
use crate::precode::{PrecodeReport, PrecodeStructure, Quotient};

mod builders;
mod examples;
mod lemmas;

pub use self::builders::{an_builder, asdim_builder, zero_dim_builder};
pub use examples::{dyadic_example, dyadic_min_d_oracle, triadic_example, ultrametric_axioms, zero_dim_equivalence};
pub use lemmas::{closure, control_covers, dimension_raising};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Lemmas,
    Examples,
    Builders,
    All,
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Suite> {
        match s.trim() {
            "lemmas" => Ok(Suite::Lemmas),
            "examples" => Ok(Suite::Examples),
            "builders" => Ok(Suite::Builders),
            "all" => Ok(Suite::All),
            "" => Err(Error::Precondition("empty suite name".into())),
            other => Err(Error::Precondition(format!(
                "unknown suite {other:?} (expected lemmas, examples, builders or all)"
            ))),
        }
    }
}

/// One exact check with its values and, on failure, a counterexample.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub check: String,
    pub pass: bool,
    pub detail: Value,
}

impl Verdict {
    pub fn new(check: impl Into<String>, pass: bool, detail: Value) -> Verdict {
        Verdict {
            check: check.into(),
            pass,
            detail,
        }
    }
}

/// A named group of checks; it passes when all of them do.
#[derive(Debug, Clone, Serialize)]
pub struct Criterion {
    pub name: &'static str,
    pub pass: bool,
    pub checks: Vec<Verdict>,
}

impl Criterion {
    pub fn new(name: &'static str, checks: Vec<Verdict>) -> Criterion {
        Criterion {
            name,
            pass: checks.iter().all(|c| c.pass),
            checks,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Verdict> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub seed: u64,
    pub budgets: Budgets,
    pub matrix: BTreeMap<&'static str, &'static str>,
    pub pass: bool,
    pub criteria: Vec<Criterion>,
}

pub fn run_suite(suite: Suite, seed: u64, budgets: Budgets) -> Result<VerifyReport> {
    let mut criteria = Vec::new();
    if matches!(suite, Suite::Examples | Suite::All) {
        criteria.push(ultrametric_axioms(seed)?);
        criteria.push(dyadic_example(budgets)?);
        criteria.push(triadic_example(budgets)?);
        criteria.push(zero_dim_equivalence(budgets)?);
    }
    if matches!(suite, Suite::Builders | Suite::All) {
        criteria.push(asdim_builder(budgets)?);
        criteria.push(an_builder(budgets)?);
        criteria.push(zero_dim_builder(budgets)?);
    }
    if matches!(suite, Suite::Lemmas | Suite::All) {
        criteria.push(dimension_raising(seed, 50, budgets)?);
        criteria.push(closure(seed, 20, budgets)?);
        criteria.push(control_covers(budgets)?);
    }
    let matrix = criteria
        .iter()
        .map(|c| (c.name, if c.pass { "pass" } else { "fail" }))
        .collect();
    Ok(VerifyReport {
        suite,
        seed,
        budgets,
        matrix,
        pass: criteria.iter().all(|c| c.pass),
        criteria,
    })
}

/// `check_bn(q, parts, r)` at every scheduled `r` of `report`, against the
/// bound `base^i(r)` coming from the certified level.
pub fn quotient_bn(
    p: &PrecodeStructure,
    q: &Quotient,
    report: &PrecodeReport,
    parts: usize,
    budgets: Budgets,
) -> Result<Verdict> {
    let mut rows = Vec::new();
    let mut pass = true;
    for e in &report.schedule {
        let Some(level) = e.level else {
            pass = false;
            rows.push(serde_json::json!({ "r": e.r, "level": null, "pass": false }));
            continue;
        };
        let bound = p.power(level)?;
        let s = check_bn(&q.map, parts, e.r, budgets)?;
        let ok = s.complete && s.d.upper() <= bound;
        pass &= ok;
        rows.push(serde_json::json!({ "r": e.r, "level": level, "d": s.d, "bound": bound, "pass": ok }));
    }
    Ok(Verdict::new(
        format!("quotient_bn_{parts}"),
        pass,
        serde_json::json!({ "parts": parts, "scales": rows }),
    ))
}

pub(crate) fn validation_verdict(name: &str, report: &PrecodeReport) -> Verdict {
    Verdict::new(
        name,
        report.valid,
        serde_json::json!({
            "n": report.n,
            "levels": report.levels,
            "mesh": report.mesh,
            "failures": report.failures,
        }),
    )
}

pub(crate) fn dists(values: impl IntoIterator<Item = u64>) -> Vec<Dist> {
    values.into_iter().map(Dist::from_int).collect()
}
