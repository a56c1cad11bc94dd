use std::path::{Path, PathBuf};

use clap::Subcommand;
use coarsetk::metric::SpaceFile;
use coarsetk::verify::Verdict;
use coarsetk::{Error, FiniteMetricSpace, MetricSpace, Norm, Result};
use serde_json::json;

use crate::report::{artifact, exit_code, read_json, Outcome, EXIT_VALIDATION};

#[derive(Debug, Subcommand)]
pub enum SpaceCommand {
    /// Integer points of a box under an L1, Linf or L2 norm.
    Gen {
        /// Dimension of the lattice.
        #[arg(long)]
        lattice: usize,
        /// `lo:hi` per axis; a single box applies to every axis.
        #[arg(long = "box", required = true, allow_hyphen_values = true)]
        bounds: Vec<String>,
        #[arg(long, default_value = "l1")]
        norm: Norm,
        #[arg(long)]
        id: Option<String>,
        #[arg(long)]
        scale_cap: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distance matrix from a JSON array of rows or whitespace separated text.
    Import {
        matrix: PathBuf,
        #[arg(long)]
        id: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Metric axioms, with a counterexample on failure.
    Validate { file: PathBuf },
    /// Size, diameter and scale cap.
    Info { file: PathBuf },
}

fn parse_box(s: &str) -> Result<(i64, i64)> {
    let bad = || Error::Precondition(format!("box {s:?} is not lo:hi"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    Ok((lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?))
}

fn read_matrix(path: &Path) -> Result<Vec<Vec<u64>>> {
    let text = std::fs::read_to_string(path)?;
    if let Ok(rows) = serde_json::from_str(&text) {
        return Ok(rows);
    }
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse().map_err(|_| Error::InvalidSpace(format!("bad matrix entry {t:?}"))))
                .collect()
        })
        .collect()
}

pub fn run(cmd: SpaceCommand) -> Result<Outcome> {
    match cmd {
        SpaceCommand::Gen {
            lattice,
            bounds,
            norm,
            id,
            scale_cap,
            out,
        } => {
            let mut axes = bounds.iter().map(|b| parse_box(b)).collect::<Result<Vec<_>>>()?;
            if axes.len() == 1 {
                axes = vec![axes[0]; lattice];
            }
            if axes.len() != lattice {
                return Err(Error::Precondition(format!("{} boxes for a {lattice}-dimensional lattice", axes.len())));
            }
            let id = id.unwrap_or_else(|| {
                let b: Vec<String> = axes.iter().map(|(lo, hi)| format!("[{lo},{hi}]")).collect();
                format!("Z{lattice}{}{}", b.join(""), format!("{norm:?}").to_lowercase())
            });
            let mut space = FiniteMetricSpace::lattice(id, axes, norm)?;
            if let Some(cap) = scale_cap {
                space = space.with_scale_cap(coarsetk::Dist::from_int(cap));
            }
            artifact(out.as_deref(), &space.to_file())
        }
        SpaceCommand::Import { matrix, id, out } => {
            let rows = read_matrix(&matrix)?;
            let id = id.unwrap_or_else(|| matrix.file_stem().map_or("matrix".into(), |s| s.to_string_lossy().into_owned()));
            let space = FiniteMetricSpace::from_matrix(id, rows)?;
            artifact(out.as_deref(), &space.to_file())
        }
        SpaceCommand::Validate { file } => {
            let raw: SpaceFile = read_json(&file)?;
            let config = json!({ "file": file.display().to_string() });
            let checked = FiniteMetricSpace::from_file(raw).and_then(|s| s.validate().map(|_| s));
            match checked {
                Ok(s) => Outcome::report(
                    "space validate",
                    config,
                    vec![Verdict::new("metric_axioms", true, json!({ "points": s.len() }))],
                    json!({ "id": s.id(), "points": s.len(), "diameter": s.diameter() }),
                ),
                Err(e) if exit_code(&e) == EXIT_VALIDATION => {
                    let counterexample = match &e {
                        Error::TriangleViolation { i, j, k, dij, djk, dik } => {
                            json!({ "i": i, "j": j, "k": k, "d_ij": dij, "d_jk": djk, "d_ik": dik })
                        }
                        _ => json!(null),
                    };
                    Outcome::report(
                        "space validate",
                        config,
                        vec![Verdict::new(
                            "metric_axioms",
                            false,
                            json!({ "error": e.to_string(), "counterexample": counterexample }),
                        )],
                        json!(null),
                    )
                }
                Err(e) => Err(e),
            }
        }
        SpaceCommand::Info { file } => {
            let s = FiniteMetricSpace::from_file(read_json(&file)?)?;
            Outcome::json(&json!({
                "id": s.id(),
                "points": s.len(),
                "diameter": s.diameter(),
                "scale_cap": s.scale_cap(),
                "lattice": s.as_lattice().map(|l| json!({ "dim": l.dim(), "box": l.bounds(), "norm": l.norm() })),
            }))
        }
    }
}
