use std::path::PathBuf;

use clap::{Args, ValueEnum};
use coarsetk::builders::{build_precode_an, build_precode_asdim, ControlCoverProvider, ProviderKind, TableEntry};
use coarsetk::covers::CoverFile;
use coarsetk::precode::{default_scales, validate_precode};
use coarsetk::verify::Verdict;
use coarsetk::{Budgets, Cover, Dist, Error, Result, SpaceRef};
use serde::Deserialize;
use serde_json::json;

use super::{load_space, PrecodeDocument};
use crate::report::{read_json, write_json, Outcome};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Construction {
    Asdim,
    An,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(value_enum)]
    construction: Construction,
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    n: usize,
    /// grid-brick, greedy-net, components or table.
    #[arg(long, default_value = "grid-brick")]
    provider: ProviderKind,
    /// Covers for the table provider: `[{ "s", "t", "cover": { "space", "elements" } }]`.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Center of the absorbed balls.
    #[arg(long, default_value_t = 0)]
    x0: usize,
    /// Level cap.
    #[arg(long, default_value_t = 64)]
    levels: usize,
    /// AN constants; measured from the provider when absent.
    #[arg(long, requires = "d")]
    c: Option<u64>,
    #[arg(long, requires = "c")]
    d: Option<u64>,
    /// Precode document; the trace is written next to it as `<stem>.trace.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Deserialize)]
struct TableFileEntry {
    s: Dist,
    t: Dist,
    cover: CoverFile,
}

fn provider(args: &BuildArgs, space: &SpaceRef) -> Result<ControlCoverProvider> {
    if args.provider != ProviderKind::Table {
        return ControlCoverProvider::new(space.clone(), args.provider);
    }
    let path = args
        .table
        .as_ref()
        .ok_or_else(|| Error::Precondition("the table provider needs --table".into()))?;
    let entries = read_json::<Vec<TableFileEntry>>(path)?
        .into_iter()
        .map(|e| {
            Ok(TableEntry {
                s: e.s,
                t: e.t,
                cover: Cover::from_file(space.clone(), e.cover)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ControlCoverProvider::table(space.clone(), entries))
}

pub fn run(args: BuildArgs, budgets: Budgets) -> Result<Outcome> {
    let space = load_space(&args.space)?;
    let mut provider = provider(&args, &space)?;
    let (p, trace) = match args.construction {
        Construction::Asdim => build_precode_asdim(&provider, args.n, args.x0, args.levels, budgets)?,
        Construction::An => {
            provider = match (args.c, args.d) {
                (Some(c), Some(d)) => provider.with_an(c, d)?,
                _ => {
                    let probes = provider.default_probes();
                    provider.measure_an(&probes)?;
                    provider
                }
            };
            build_precode_an(&provider, args.n, args.x0, args.levels, budgets)?
        }
    };
    let report = validate_precode(&p, args.n + 1, &default_scales(&p), budgets)?;
    write_json(&args.out, &PrecodeDocument::of(&p)?)?;
    let trace_path = args.out.with_extension("trace.json");
    write_json(&trace_path, &trace)?;
    Outcome::report(
        "build",
        json!({
            "construction": format!("{:?}", args.construction).to_lowercase(),
            "space": space.id(),
            "n": args.n,
            "provider": args.provider,
            "x0": args.x0,
            "levels": args.levels,
            "out": args.out.display().to_string(),
            "trace": trace_path.display().to_string(),
        }),
        vec![
            Verdict::new("trace", trace.complete && trace.all_checks_pass(), json!({ "levels": trace.levels.len() })),
            Verdict::new(format!("{}_precode", args.n + 1), report.valid, json!({ "failures": report.failures })),
        ],
        json!({ "kind": p.kind, "levels": p.depth(), "mesh": report.mesh, "constants": trace.constants }),
    )
}
