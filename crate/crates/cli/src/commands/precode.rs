use std::path::PathBuf;

use clap::{Subcommand, ValueEnum};
use coarsetk::precode::{
    certify_zero_dim_equivalence, default_scales, example_clusters, example_dyadic, example_triadic, example_triadic_on,
    quotient_map, validate_precode, PrecodeStructure, Selector, UltrametricSpace,
};
use coarsetk::verify::Verdict;
use coarsetk::{Budgets, Error, MetricSpace, Result};
use serde_json::json;

use super::{dists, PrecodeDocument};
use crate::report::{artifact, Outcome};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Example {
    /// Dyadic blocks on `[0, size - 1]`.
    Dyadic,
    /// Triadic intervals, levels `0..=size`.
    Triadic,
    /// Triadic intervals on `[lo, hi]`.
    TriadicOn,
    /// `2^size` points in nested clusters.
    Clusters,
}

#[derive(Debug, Subcommand)]
pub enum PrecodeCommand {
    /// Writes one of the worked examples as a precode document.
    BuildExample {
        #[arg(value_enum)]
        example: Example,
        #[arg(long, default_value_t = 8)]
        size: u64,
        #[arg(long, allow_hyphen_values = true)]
        lo: Option<i64>,
        #[arg(long, allow_hyphen_values = true)]
        hi: Option<i64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parents, absorption, the multiplicity schedule and AN conditions.
    Validate {
        file: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',')]
        scales: Vec<u64>,
    },
    /// Strong triangle inequality of the level ultrametric.
    Ultrametric {
        file: PathBuf,
        /// Sample this many triples instead of checking all of them.
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// The quotient map of the bottom level, its moduli and, for n = 1, the equivalence.
    Quotient {
        file: PathBuf,
        #[arg(long)]
        n: usize,
    },
}

fn example(which: Example, size: u64, lo: Option<i64>, hi: Option<i64>) -> Result<PrecodeStructure> {
    match which {
        Example::Dyadic => example_dyadic(size as usize),
        Example::Triadic => example_triadic(size as u32),
        Example::Clusters => example_clusters(size as u32),
        Example::TriadicOn => match (lo, hi) {
            (Some(lo), Some(hi)) => example_triadic_on(lo, hi),
            _ => Err(Error::Precondition("triadic-on needs --lo and --hi".into())),
        },
    }
}

pub fn run(cmd: PrecodeCommand, budgets: Budgets) -> Result<Outcome> {
    match cmd {
        PrecodeCommand::BuildExample {
            example: which,
            size,
            lo,
            hi,
            out,
        } => {
            let p = example(which, size, lo, hi)?;
            artifact(out.as_deref(), &PrecodeDocument::of(&p)?)
        }
        PrecodeCommand::Validate { file, n, scales } => {
            let p = PrecodeDocument::load(&file)?;
            let scales = if scales.is_empty() { default_scales(&p) } else { dists(&scales) };
            let report = validate_precode(&p, n, &scales, budgets)?;
            Outcome::report(
                "precode validate",
                json!({ "file": file.display().to_string(), "n": n }),
                vec![Verdict::new("precode", report.valid, json!({ "failures": report.failures }))],
                report,
            )
        }
        PrecodeCommand::Ultrametric { file, samples, seed } => {
            let p = PrecodeDocument::load(&file)?;
            let u = UltrametricSpace::build(&p)?;
            let violation = u.strong_triangle_violation(samples.map(|s| (s, seed)));
            Outcome::report(
                "precode ultrametric",
                json!({ "file": file.display().to_string(), "samples": samples, "seed": seed }),
                vec![Verdict::new("strong_triangle", violation.is_none(), json!({ "violation": violation }))],
                json!({
                    "id": u.id(),
                    "leaves": u.len(),
                    "base": u.base(),
                    "levels": u.levels(),
                    "distinct_distances": u.distinct_distances(),
                    "divergences": u.divergences(),
                }),
            )
        }
        PrecodeCommand::Quotient { file, n } => {
            let p = PrecodeDocument::load(&file)?;
            let report = validate_precode(&p, n, &default_scales(&p), budgets)?;
            let q = quotient_map(&p, &Selector::MinPoint)?;
            let mut checks = vec![
                Verdict::new("precode", report.valid, json!({ "failures": report.failures })),
                Verdict::new("level_moduli", q.modulus_holds(), json!({ "levels": q.modulus })),
                coarsetk::verify::quotient_bn(&p, &q, &report, n, budgets)?,
            ];
            if n == 1 && report.valid {
                let z = certify_zero_dim_equivalence(&p, budgets)?;
                checks.push(Verdict::new(
                    "zero_dim_equivalence",
                    z.holds,
                    json!({ "closeness": z.closeness, "mesh_bottom": z.mesh_bottom, "section_identity": z.section_identity }),
                ));
            }
            Outcome::report(
                "precode quotient",
                json!({ "file": file.display().to_string(), "n": n }),
                checks,
                json!({ "section": q.section, "moduli": q.record().moduli }),
            )
        }
    }
}
