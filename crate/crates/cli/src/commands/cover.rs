use std::path::PathBuf;

use clap::Subcommand;
use coarsetk::covers::CoverFile;
use coarsetk::dimension::{expand_to_lebesgue_cover, FamilyGenerator};
use coarsetk::metric::scale_schedule;
use coarsetk::verify::Verdict;
use coarsetk::{Budgets, Cover, Dist, Result};
use serde_json::json;

use super::{dists, load_space};
use crate::report::{read_json, write_json, Outcome};

#[derive(Debug, Subcommand)]
pub enum CoverCommand {
    /// Mesh, multiplicity, r-multiplicity table and Lebesgue number.
    Report {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        cover: PathBuf,
        /// Scales for the r-multiplicity table (default: geometric up to the scale cap).
        #[arg(long, value_delimiter = ',')]
        scales: Vec<u64>,
    },
    /// r-disjoint families from a generator, verified.
    Families {
        #[arg(long)]
        space: PathBuf,
        /// blocks, bricks, greedy-net or components (default: by space kind).
        #[arg(long)]
        generator: Option<FamilyGenerator>,
        #[arg(long)]
        r: u64,
        /// Writes the union of the families as a cover file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cover with s-multiplicity at most the family count and Lebesgue number at least t.
    Expand {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        generator: Option<FamilyGenerator>,
        #[arg(long)]
        s: u64,
        #[arg(long)]
        t: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run(cmd: CoverCommand, budgets: Budgets) -> Result<Outcome> {
    match cmd {
        CoverCommand::Report { space, cover, scales } => {
            let x = load_space(&space)?;
            let c = Cover::from_file(x.clone(), read_json::<CoverFile>(&cover)?)?;
            let scales = if scales.is_empty() {
                scale_schedule(x.scale_cap())
            } else {
                dists(&scales)
            };
            let report = c.report(&scales, budgets)?;
            Outcome::report(
                "cover report",
                json!({ "space": x.id(), "scales": scales }),
                vec![Verdict::new("is_cover", report.is_cover, json!({ "elements": report.elements }))],
                report,
            )
        }
        CoverCommand::Families { space, generator, r, out } => {
            let x = load_space(&space)?;
            let g = generator.unwrap_or_else(|| FamilyGenerator::for_space(x.as_ref()));
            let fams = g.generate(&x, Dist::from_int(r))?;
            let cover = fams.union_cover()?;
            if let Some(path) = &out {
                write_json(path, &cover.to_file())?;
            }
            let families: Vec<Vec<Vec<usize>>> = fams
                .families
                .iter()
                .map(|f| f.iter().map(|e| e.members().to_vec()).collect())
                .collect();
            Outcome::report(
                "cover families",
                json!({ "space": x.id(), "generator": g, "r": r }),
                vec![Verdict::new("r_disjoint", true, json!({ "families": families.len() }))],
                json!({ "r": r, "mesh": fams.mesh(), "families": families }),
            )
        }
        CoverCommand::Expand {
            space,
            generator,
            s,
            t,
            out,
        } => {
            let x = load_space(&space)?;
            let g = generator.unwrap_or_else(|| FamilyGenerator::for_space(x.as_ref()));
            let fams = g.generate(&x, Dist::from_int(s + 4 * t))?;
            let e = expand_to_lebesgue_cover(&fams, Dist::from_int(s), Dist::from_int(t), budgets)?;
            if let Some(path) = &out {
                write_json(path, &e.cover.to_file())?;
            }
            let checks = e
                .checks
                .iter()
                .map(|c| Verdict::new(c.check, c.pass, json!({ "value": c.value, "bound": c.bound })))
                .collect();
            Outcome::report(
                "cover expand",
                json!({ "space": x.id(), "generator": g, "s": s, "t": t }),
                checks,
                e,
            )
        }
    }
}
