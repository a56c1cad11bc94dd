use std::path::PathBuf;

use clap::{Args, ValueEnum};
use coarsetk::precode::{distance_matrix, newick, UltrametricSpace};
use coarsetk::Result;

use super::PrecodeDocument;
use crate::report::{artifact, Outcome};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Newick,
    Json,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Precode document.
    file: PathBuf,
    #[arg(long, value_enum, default_value = "newick")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: ExportArgs) -> Result<Outcome> {
    let p = PrecodeDocument::load(&args.file)?;
    let u = UltrametricSpace::build(&p)?;
    match args.format {
        Format::Newick => {
            let tree = newick(&u);
            match &args.out {
                Some(path) => {
                    std::fs::write(path, format!("{tree}\n"))?;
                    Ok(Outcome::Artifact(String::new()))
                }
                None => Ok(Outcome::Artifact(tree)),
            }
        }
        Format::Json => artifact(args.out.as_deref(), &distance_matrix(&u)),
    }
}
