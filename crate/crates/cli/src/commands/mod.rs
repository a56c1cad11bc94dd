use std::path::Path;

use coarsetk::metric::SpaceFile;
use coarsetk::precode::{PrecodeFile, PrecodeStructure};
use coarsetk::{Dist, Error, FiniteMetricSpace, Result, SpaceRef};
use serde::{Deserialize, Serialize};

use crate::report::read_json;

pub mod build;
pub mod cover;
pub mod dim;
pub mod export;
pub mod map;
pub mod precode;
pub mod space;
pub mod verify;

pub fn load_space(path: &Path) -> Result<SpaceRef> {
    Ok(FiniteMetricSpace::from_file(read_json(path)?)?.into_ref())
}

pub fn dists(values: &[u64]) -> Vec<Dist> {
    values.iter().copied().map(Dist::from_int).collect()
}

/// A precode together with its space, so that one file is self-contained.
#[derive(Debug, Serialize, Deserialize)]
pub struct PrecodeDocument {
    pub space: SpaceFile,
    pub precode: PrecodeFile,
}

impl PrecodeDocument {
    pub fn of(p: &PrecodeStructure) -> Result<PrecodeDocument> {
        let space = p
            .space
            .space_file()
            .ok_or_else(|| Error::Precondition(format!("space {} has no file form", p.space.id())))?;
        Ok(PrecodeDocument {
            space,
            precode: p.to_file(),
        })
    }

    pub fn load(path: &Path) -> Result<PrecodeStructure> {
        let doc: PrecodeDocument = read_json(path)?;
        let space = FiniteMetricSpace::from_file(doc.space)?.into_ref();
        PrecodeStructure::from_file(space, doc.precode)
    }
}
