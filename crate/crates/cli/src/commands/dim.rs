use std::path::PathBuf;

use clap::Subcommand;
use coarsetk::dimension::{dimension_witness, FamilyGenerator};
use coarsetk::verify::Verdict;
use coarsetk::{Dist, Result};
use serde_json::json;

use super::load_space;
use crate::report::Outcome;

#[derive(Debug, Subcommand)]
pub enum DimCommand {
    /// Per-scale certificates that the space has dimension at most n.
    Witness {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        n: usize,
        /// Largest scale (default: the space's scale cap).
        #[arg(long)]
        r_max: Option<u64>,
        #[arg(long)]
        generator: Option<FamilyGenerator>,
    },
}

pub fn run(cmd: DimCommand) -> Result<Outcome> {
    match cmd {
        DimCommand::Witness {
            space,
            n,
            r_max,
            generator,
        } => {
            let x = load_space(&space)?;
            let g = generator.unwrap_or_else(|| FamilyGenerator::for_space(x.as_ref()));
            let r_max = r_max.map_or_else(|| x.scale_cap(), Dist::from_int);
            let w = dimension_witness(&x, n, r_max, g)?;
            Outcome::report(
                "dim witness",
                json!({ "space": x.id(), "n": n, "r_max": r_max, "generator": g }),
                vec![Verdict::new("witness_checks", w.all_checks_pass(), json!({ "scales": w.per_scale.len() }))],
                w,
            )
        }
    }
}
