use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use coarsetk::coarse_maps::{check_bn, check_cn, fit_moduli, MapFile};
use coarsetk::verify::Verdict;
use coarsetk::{Budgets, CoarseMap, Result};
use serde_json::json;

use super::{dists, load_space};
use crate::report::{read_json, Outcome};

#[derive(Debug, Args)]
pub struct MapFiles {
    /// Map JSON: `{ "domain", "codomain", "table" }`.
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    domain: PathBuf,
    /// Codomain space (default: the domain).
    #[arg(long)]
    codomain: Option<PathBuf>,
}

impl MapFiles {
    fn load(&self) -> Result<CoarseMap> {
        let domain = load_space(&self.domain)?;
        let codomain = match &self.codomain {
            Some(p) => load_space(p)?,
            None => domain.clone(),
        };
        CoarseMap::from_file(domain, codomain, read_json::<MapFile>(Path::new(&self.map))?)
    }
}

#[derive(Debug, Subcommand)]
pub enum MapCommand {
    /// Least d such that every r-bounded set has a preimage in n parts of diameter at most d.
    CheckBn {
        #[command(flatten)]
        files: MapFiles,
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        r: Vec<u64>,
    },
    /// check-bn over the geometric schedule with linear and affine fits.
    CheckCn {
        #[command(flatten)]
        files: MapFiles,
        #[arg(long)]
        n: usize,
    },
    /// Empirical moduli and fitted Lipschitz and quasi-isometry constants.
    Moduli {
        #[command(flatten)]
        files: MapFiles,
    },
}

pub fn run(cmd: MapCommand, budgets: Budgets) -> Result<Outcome> {
    match cmd {
        MapCommand::CheckBn { files, n, r } => {
            let f = files.load()?;
            let mut checks = Vec::new();
            let mut scales = Vec::new();
            for r in dists(&r) {
                let s = check_bn(&f, n, r, budgets)?;
                checks.push(Verdict::new(format!("bn_{r}"), s.complete, json!({ "d": s.d, "sets": s.sets_checked })));
                scales.push(s);
            }
            Outcome::report("map check-bn", json!({ "n": n, "r": r }), checks, scales)
        }
        MapCommand::CheckCn { files, n } => {
            let f = files.load()?;
            let c = check_cn(&f, n, budgets)?;
            let complete = c.bn.scales.iter().all(|s| s.complete);
            Outcome::report(
                "map check-cn",
                json!({ "n": n }),
                vec![Verdict::new("cn", complete, json!({ "c": c.c, "r0": c.r0, "affine": c.affine.to_string() }))],
                c,
            )
        }
        MapCommand::Moduli { files } => {
            let f = files.load()?;
            let record = fit_moduli(&f);
            Outcome::report("map moduli", json!({}), Vec::new(), record)
        }
    }
}
