//! Precode structures: nested cover sequences with unique parents, their
//! validation, the level ultrametric on the bottom cover, and the quotient map.

mod examples;
mod export;
mod ultrametric;

pub use examples::{example_clusters, example_dyadic, example_triadic, example_triadic_on, triadic_bounds, triadic_interval};
pub use export::{distance_matrix, newick, DistanceMatrix};
pub use ultrametric::{
    an_lower_bound, certify_zero_dim_equivalence, inverse_section, quotient_map, AnLowerBound, LevelModulus,
    PDivergence, Quotient, Selector, UltrametricSpace, ZeroDimEquivalence,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::budget::Budgets;
use crate::covers::Cover;
use crate::dist::{Dist, DistRatio};
use crate::error::{Error, Result};
use crate::metric::{scale_schedule, PointSet, SpaceRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrecodeKind {
    Asdim,
    /// Levels `i >= i0` have mesh at most `a^i`.
    An { a: u64, i0: usize },
}

impl PrecodeKind {
    pub fn base(&self) -> u64 {
        match self {
            PrecodeKind::Asdim => 3,
            PrecodeKind::An { a, .. } => *a,
        }
    }
}

/// Claimed constants for the linear scale condition: for `r >= r0` some level
/// `i` has `a^i <= c r` and `r`-multiplicity at most `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnConstants {
    pub c: u64,
    pub r0: u64,
}

/// Covers `levels[0], levels[1], ...` with `parent[i][e]` the element of
/// level `i + 1` containing element `e` of level `i`.
#[derive(Debug, Clone)]
pub struct PrecodeStructure {
    pub space: SpaceRef,
    pub levels: Vec<Cover>,
    pub parent: Vec<Vec<usize>>,
    pub kind: PrecodeKind,
    pub an_constants: Option<AnConstants>,
    /// Set by constructions that produce pairwise disjoint levels.
    pub disjoint: bool,
}

impl PrecodeStructure {
    /// Builds a structure, deriving each parent as the first containing element.
    pub fn new(space: SpaceRef, levels: Vec<Vec<PointSet>>, kind: PrecodeKind) -> Result<PrecodeStructure> {
        if levels.is_empty() {
            return Err(Error::Precondition("a precode needs at least one level".into()));
        }
        let levels = levels
            .into_iter()
            .map(|l| Cover::family(space.clone(), l))
            .collect::<Result<Vec<_>>>()?;
        let parent = (0..levels.len() - 1)
            .map(|i| {
                (0..levels[i].len())
                    .map(|e| containing(&levels[i + 1], levels[i].element(e)).first().copied().unwrap_or(usize::MAX))
                    .collect()
            })
            .collect();
        let disjoint = levels.iter().all(|c| c.multiplicity() <= 1);
        Ok(PrecodeStructure {
            space,
            levels,
            parent,
            kind,
            an_constants: None,
            disjoint,
        })
    }

    pub fn with_an_constants(mut self, constants: AnConstants) -> PrecodeStructure {
        self.an_constants = Some(constants);
        self
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn top(&self) -> &Cover {
        self.levels.last().expect("nonempty levels")
    }

    /// `base^k` as an exact distance.
    pub fn power(&self, k: usize) -> Result<Dist> {
        pow_dist(self.kind.base(), k)
    }

    pub fn to_file(&self) -> PrecodeFile {
        PrecodeFile {
            space: self.space.id().to_string(),
            kind: self.kind,
            an_constants: self.an_constants,
            levels: self
                .levels
                .iter()
                .map(|c| c.elements().iter().map(|e| e.members().to_vec()).collect())
                .collect(),
            parent: self.parent.clone(),
        }
    }

    /// Loads a structure; stored parents are kept as given and checked by validation.
    pub fn from_file(space: SpaceRef, file: PrecodeFile) -> Result<PrecodeStructure> {
        if file.space != space.id() {
            return Err(Error::SpaceMismatch {
                expected: space.id().to_string(),
                found: file.space,
            });
        }
        let levels: Vec<Vec<PointSet>> = file
            .levels
            .into_iter()
            .map(|l| l.into_iter().map(PointSet::new).collect())
            .collect();
        let mut p = PrecodeStructure::new(space, levels, file.kind)?;
        if file.parent.len() != p.parent.len()
            || file.parent.iter().zip(&p.levels).any(|(row, level)| row.len() != level.len())
        {
            return Err(Error::InvalidSpace("parent arrays do not match the levels".into()));
        }
        p.parent = file.parent;
        p.an_constants = file.an_constants;
        Ok(p)
    }
}

pub(crate) fn pow_dist(base: u64, k: usize) -> Result<Dist> {
    u32::try_from(k)
        .ok()
        .and_then(|k| base.checked_pow(k))
        .map(Dist::from_int)
        .ok_or_else(|| Error::Precondition(format!("{base}^{k} overflows")))
}

fn containing(level: &Cover, set: &PointSet) -> Vec<usize> {
    let Some(x) = set.members().first() else {
        return Vec::new();
    };
    level
        .incident(*x)
        .iter()
        .map(|&e| e as usize)
        .filter(|&e| set.is_subset(level.element(e)))
        .collect()
}

/// JSON form: `{ "space", "kind", "levels": [[[indices]]], "parent": [[index]] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrecodeFile {
    pub space: String,
    pub kind: PrecodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub an_constants: Option<AnConstants>,
    pub levels: Vec<Vec<Vec<usize>>>,
    pub parent: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "failure", rename_all = "snake_case")]
pub enum PrecodeFailure {
    /// A point outside every element of a level.
    NotACover { level: usize, point: usize },
    /// An element contained in zero or several elements of the next level.
    Uniqueness { level: usize, element: usize, containing: Vec<usize> },
    /// The stored parent is not the unique containing element.
    ParentMismatch { level: usize, element: usize, stored: usize, actual: usize },
    /// The top level is not a single element covering the space.
    Absorption { top_elements: usize },
    /// No level has `r`-multiplicity at most `n`.
    Schedule { r: Dist, best_level: usize, multiplicity: usize },
    Mesh { level: usize, mesh: Dist, bound: Dist },
    /// The scale condition fails for the claimed constants.
    AnScale { r: Dist, level: usize, power: Dist, c: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScheduleEntry {
    pub r: Dist,
    /// Smallest level with `r`-multiplicity at most `n`.
    pub level: Option<usize>,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MeshEntry {
    pub level: usize,
    pub mesh: Dist,
    pub bound: Option<Dist>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnReport {
    pub a: u64,
    pub i0: usize,
    /// `max a^i(r) / r` over scheduled `r >= r0`, with `r0` the smallest scheduled scale.
    pub measured_c: Option<DistRatio>,
    pub r0: Option<Dist>,
    pub claimed: Option<AnConstants>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PrecodeReport {
    pub space: String,
    pub n: usize,
    pub levels: usize,
    pub disjoint: bool,
    pub valid: bool,
    pub mesh: Vec<MeshEntry>,
    pub schedule: Vec<ScheduleEntry>,
    pub an: Option<AnReport>,
    pub failures: Vec<PrecodeFailure>,
}

impl PrecodeReport {
    /// Certified level for `r`: the entry at the smallest scheduled scale `>= r`.
    pub fn level_for(&self, r: Dist) -> Option<usize> {
        self.schedule.iter().filter(|e| e.r >= r).min_by_key(|e| e.r).and_then(|e| e.level)
    }
}

/// The default scale schedule: the geometric schedule up to the space's cap.
pub fn default_scales(p: &PrecodeStructure) -> Vec<Dist> {
    scale_schedule(p.space.scale_cap())
        .into_iter()
        .filter(|&r| r > Dist::ZERO)
        .collect()
}

/// Checks uniqueness of parents, absorption, the multiplicity schedule over
/// `scales` and, for the AN kind, the mesh and linear scale conditions.
pub fn validate_precode(p: &PrecodeStructure, n: usize, scales: &[Dist], budgets: Budgets) -> Result<PrecodeReport> {
    let mut failures = Vec::new();
    for (i, level) in p.levels.iter().enumerate() {
        if !level.is_cover() {
            let point = (0..p.space.len()).find(|&x| level.incident(x).is_empty()).unwrap_or(0);
            failures.push(PrecodeFailure::NotACover { level: i, point });
        }
    }
    for i in 0..p.levels.len().saturating_sub(1) {
        let found: Vec<PrecodeFailure> = (0..p.levels[i].len())
            .into_par_iter()
            .filter_map(|e| {
                let c = containing(&p.levels[i + 1], p.levels[i].element(e));
                if c.len() != 1 {
                    Some(PrecodeFailure::Uniqueness {
                        level: i,
                        element: e,
                        containing: c,
                    })
                } else if p.parent[i][e] != c[0] {
                    Some(PrecodeFailure::ParentMismatch {
                        level: i,
                        element: e,
                        stored: p.parent[i][e],
                        actual: c[0],
                    })
                } else {
                    None
                }
            })
            .collect();
        failures.extend(found);
    }
    let top = p.top();
    if top.len() != 1 || !top.is_cover() {
        failures.push(PrecodeFailure::Absorption { top_elements: top.len() });
    }

    let mut schedule = Vec::with_capacity(scales.len());
    for &r in scales {
        let mut entry = ScheduleEntry {
            r,
            level: None,
            multiplicity: usize::MAX,
        };
        let mut best = 0;
        for (i, level) in p.levels.iter().enumerate() {
            let m = level.r_multiplicity(r, budgets)?;
            if m < entry.multiplicity {
                entry.multiplicity = m;
                best = i;
            }
            if m <= n {
                entry.level = Some(i);
                entry.multiplicity = m;
                break;
            }
        }
        if entry.level.is_none() {
            failures.push(PrecodeFailure::Schedule {
                r,
                best_level: best,
                multiplicity: entry.multiplicity,
            });
        }
        schedule.push(entry);
    }

    let mut mesh = Vec::with_capacity(p.levels.len());
    let mut an = None;
    match p.kind {
        PrecodeKind::Asdim => {
            for (i, level) in p.levels.iter().enumerate() {
                mesh.push(MeshEntry {
                    level: i,
                    mesh: level.mesh(),
                    bound: None,
                });
            }
        }
        PrecodeKind::An { a, i0 } => {
            if a < 2 {
                return Err(Error::Precondition(format!("base a = {a} must exceed 1")));
            }
            for (i, level) in p.levels.iter().enumerate() {
                let bound = if i >= i0 { Some(p.power(i)?) } else { None };
                let m = level.mesh();
                if let Some(b) = bound {
                    if m > b {
                        failures.push(PrecodeFailure::Mesh {
                            level: i,
                            mesh: m,
                            bound: b,
                        });
                    }
                }
                mesh.push(MeshEntry { level: i, mesh: m, bound });
            }
            let mut measured: Option<DistRatio> = None;
            for e in &schedule {
                if let Some(i) = e.level {
                    let ratio = DistRatio::new(p.power(i)?, e.r);
                    measured = Some(measured.map_or(ratio, |m| m.max(ratio)));
                    if let Some(k) = p.an_constants {
                        if e.r >= Dist::from_int(k.r0) && p.power(i)? > e.r.times(k.c) {
                            failures.push(PrecodeFailure::AnScale {
                                r: e.r,
                                level: i,
                                power: p.power(i)?,
                                c: k.c,
                            });
                        }
                    }
                }
            }
            an = Some(AnReport {
                a,
                i0,
                measured_c: measured,
                r0: schedule.first().map(|e| e.r),
                claimed: p.an_constants,
            });
        }
    }

    Ok(PrecodeReport {
        space: p.space.id().to_string(),
        n,
        levels: p.levels.len(),
        disjoint: p.disjoint,
        valid: failures.is_empty(),
        mesh,
        schedule,
        an,
        failures,
    })
}

/// Validation that turns the first failure into an error.
pub fn require_valid(p: &PrecodeStructure, n: usize, budgets: Budgets) -> Result<PrecodeReport> {
    let report = validate_precode(p, n, &default_scales(p), budgets)?;
    match report.failures.first() {
        None => Ok(report),
        Some(f) => Err(Error::ClaimFailed(format!("not a {n}-precode: {f:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::FiniteMetricSpace;

    fn line(lo: i64, hi: i64) -> SpaceRef {
        FiniteMetricSpace::interval("line", lo, hi).unwrap().into_ref()
    }

    /// Oracle: smallest dyadic level whose blocks are met at most twice by
    /// every run of `r + 1` consecutive integers.
    fn dyadic_level_oracle(r: u64, n_points: u64) -> usize {
        (0..)
            .find(|&i| {
                let size = 1u64 << i;
                (0..n_points.saturating_sub(r).max(1)).all(|s| {
                    let e = (s + r).min(n_points - 1);
                    (e / size - s / size + 1) <= 2
                })
            })
            .unwrap()
    }

    #[test]
    fn dyadic_validates_with_oracle_schedule() {
        let p = example_dyadic(128).unwrap();
        let scales: Vec<Dist> = (1..=127).map(Dist::from_int).collect();
        let rep = validate_precode(&p, 2, &scales, Budgets::default()).unwrap();
        assert!(rep.valid, "{:?}", rep.failures);
        for e in &rep.schedule {
            let r = e.r.as_int().unwrap();
            assert_eq!(e.level, Some(dyadic_level_oracle(r, 128)), "r = {r}");
        }
        assert_eq!(rep.level_for(Dist::ONE), Some(0));
        assert_eq!(rep.level_for(Dist::from_int(5)), Some(3));
    }

    #[test]
    fn two_parents_is_a_uniqueness_failure() {
        let s = line(0, 3);
        let levels = vec![
            vec![PointSet::new([0, 1]), PointSet::new([2]), PointSet::new([3])],
            vec![PointSet::new([0, 1, 2]), PointSet::new([0, 1, 3])],
            vec![PointSet::range(0, 4)],
        ];
        let p = PrecodeStructure::new(s, levels, PrecodeKind::Asdim).unwrap();
        let rep = validate_precode(&p, 2, &default_scales(&p), Budgets::default()).unwrap();
        assert!(!rep.valid);
        assert!(rep.failures.contains(&PrecodeFailure::Uniqueness {
            level: 0,
            element: 0,
            containing: vec![0, 1],
        }));
        assert!(!p.disjoint);
    }

    #[test]
    fn singletons_alone_are_not_a_one_precode() {
        let s = line(0, 15);
        let p = PrecodeStructure::new(s.clone(), vec![(0..16).map(PointSet::singleton).collect()], PrecodeKind::Asdim)
            .unwrap();
        let rep = validate_precode(&p, 1, &[Dist::ONE], Budgets::default()).unwrap();
        assert!(rep.failures.contains(&PrecodeFailure::Schedule {
            r: Dist::ONE,
            best_level: 0,
            multiplicity: 2,
        }));
        assert!(rep.failures.contains(&PrecodeFailure::Absorption { top_elements: 16 }));
    }

    #[test]
    fn an_mesh_failure_is_reported() {
        let p = example_dyadic(16).unwrap();
        let mut q = p.clone();
        q.kind = PrecodeKind::An { a: 2, i0: 0 };
        let rep = validate_precode(&q, 2, &default_scales(&q), Budgets::default()).unwrap();
        assert!(rep.valid, "mesh 2^i - 1 <= 2^i: {:?}", rep.failures);
        let mut tight = p;
        tight.kind = PrecodeKind::An { a: 2, i0: 0 };
        tight.levels[1] = Cover::family(tight.space.clone(), vec![PointSet::range(0, 3), PointSet::range(3, 16)]).unwrap();
        let rep = validate_precode(&tight, 2, &default_scales(&tight), Budgets::default()).unwrap();
        assert!(rep
            .failures
            .iter()
            .any(|f| matches!(f, PrecodeFailure::Mesh { level: 1, .. })));
    }

    #[test]
    fn claimed_constants_are_checked() {
        let p = example_triadic(3).unwrap();
        let mut q = p.clone();
        q.kind = PrecodeKind::An { a: 3, i0: 0 };
        let rep = validate_precode(&q, 2, &default_scales(&q), Budgets::default()).unwrap();
        let c = rep.an.as_ref().unwrap().measured_c.unwrap();
        let ok = q.clone().with_an_constants(AnConstants { c: c.ceil_int(), r0: 1 });
        assert!(validate_precode(&ok, 2, &default_scales(&ok), Budgets::default()).unwrap().valid);
        let bad = q.with_an_constants(AnConstants { c: 1, r0: 1 });
        let rep = validate_precode(&bad, 2, &default_scales(&bad), Budgets::default()).unwrap();
        assert!(rep.failures.iter().any(|f| matches!(f, PrecodeFailure::AnScale { .. })));
    }

    #[test]
    fn file_round_trip() {
        let p = example_dyadic(8).unwrap();
        let json = serde_json::to_string(&p.to_file()).unwrap();
        let back = PrecodeStructure::from_file(p.space.clone(), serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.parent, p.parent);
        assert_eq!(back.levels, p.levels);
        let mut file = p.to_file();
        file.parent[0][0] = 3;
        let tampered = PrecodeStructure::from_file(p.space.clone(), file).unwrap();
        let rep = validate_precode(&tampered, 2, &[], Budgets::default()).unwrap();
        assert!(matches!(rep.failures[0], PrecodeFailure::ParentMismatch { level: 0, element: 0, .. }));
    }
}
