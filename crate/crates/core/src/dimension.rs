//! Scale-truncated dimension witnesses: r-disjoint family generators,
//! Lebesgue expansion, cover-form conversions and product witnesses.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::budget::Budgets;
use crate::coloring::{dsatur_greedy, Graph};
use crate::covers::{Cover, DisjointFamilyList};
use crate::dist::{Dist, DistRatio};
use crate::error::{Error, Result};
use crate::fit::{fit_upper, upper_points, AffineFit};
use crate::metric::{closed_neighborhood, neighborhood, scale_schedule, MetricSpace, PointSet, ProductSpace, SpaceRef};

/// Strategy for producing `r`-disjoint families that jointly cover a space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyGenerator {
    /// Alternating runs of `r + 1` points on a one-dimensional lattice.
    Blocks,
    /// `m + 1` diagonally shifted cube tilings of `Z^m`, cubes shrunk by `⌈r/2⌉`.
    Bricks,
    /// Voronoi cells of a greedy `r`-net, grouped by a coloring of the cell conflict graph.
    GreedyNet,
    /// The `r`-components as a single family.
    Components,
}

impl std::str::FromStr for FamilyGenerator {
    type Err = Error;
    fn from_str(s: &str) -> Result<FamilyGenerator> {
        match s {
            "blocks" => Ok(FamilyGenerator::Blocks),
            "bricks" | "grid-brick" => Ok(FamilyGenerator::Bricks),
            "greedy-net" | "net" => Ok(FamilyGenerator::GreedyNet),
            "components" => Ok(FamilyGenerator::Components),
            other => Err(Error::Precondition(format!("unknown family generator {other:?}"))),
        }
    }
}

impl FamilyGenerator {
    /// The natural generator for a space.
    pub fn for_space(space: &dyn MetricSpace) -> FamilyGenerator {
        match space.as_lattice() {
            Some(l) if l.dim() == 1 => FamilyGenerator::Blocks,
            Some(_) => FamilyGenerator::Bricks,
            None => FamilyGenerator::GreedyNet,
        }
    }

    /// Generates and verifies the families.
    pub fn generate(self, space: &SpaceRef, r: Dist) -> Result<DisjointFamilyList> {
        let fams = match self {
            FamilyGenerator::Blocks => line_blocks(space, r)?,
            FamilyGenerator::Bricks => brick_families(space, r)?,
            FamilyGenerator::GreedyNet => greedy_net_families(space, r),
            FamilyGenerator::Components => r_components(space, r),
        };
        fams.verify()?;
        Ok(fams)
    }
}

/// Two families of alternating runs of `r + 1` consecutive points.
pub fn line_blocks(space: &SpaceRef, r: Dist) -> Result<DisjointFamilyList> {
    let lattice = space
        .as_lattice()
        .filter(|l| l.dim() == 1)
        .ok_or_else(|| Error::Precondition("blocks need a one-dimensional lattice".into()))?;
    let len = r.floor_int() as usize + 1;
    let n = lattice.len();
    let mut families = vec![Vec::new(), Vec::new()];
    for (k, start) in (0..n).step_by(len).enumerate() {
        families[k % 2].push(PointSet::range(start, (start + len).min(n)));
    }
    families.retain(|f: &Vec<PointSet>| !f.is_empty());
    Ok(DisjointFamilyList::new(space.clone(), r, families))
}

/// `m + 1` families on a lattice in `Z^m`: tiling `j` uses cubes of side
/// `(m + 1) g` shifted by `j g` along the diagonal, each shrunk by `δ = ⌈r/2⌉`
/// on every side (`g = max(2δ, 1)`). Pieces of one tiling are more than `r`
/// apart, and each coordinate rules out at most one tiling for a given point.
pub fn brick_families(space: &SpaceRef, r: Dist) -> Result<DisjointFamilyList> {
    let lattice = space
        .as_lattice()
        .ok_or_else(|| Error::Precondition("bricks need a lattice space".into()))?;
    let m = lattice.dim();
    let r_int = r.floor_int() as i64;
    let delta = (r_int + 1) / 2;
    let g = (2 * delta).max(1);
    let side = (m as i64 + 1) * g;
    let mut families = Vec::with_capacity(m + 1);
    for j in 0..=m as i64 {
        let mut pieces: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
        for x in 0..lattice.len() {
            let c = lattice.coords(x);
            let good = c.iter().all(|&v| {
                let o = (v - j * g).rem_euclid(side);
                o >= delta && o <= side - 1 - delta
            });
            if good {
                let key = c.iter().map(|&v| (v - j * g).div_euclid(side)).collect();
                pieces.entry(key).or_default().push(x);
            }
        }
        let fam: Vec<PointSet> = pieces.into_values().map(PointSet::new).collect();
        if !fam.is_empty() {
            families.push(fam);
        }
    }
    Ok(DisjointFamilyList::new(space.clone(), r, families))
}

/// Families from a greedy net of separation `r`: Voronoi cells (ties to the
/// earlier net point) colored so that same-colored cells are more than `r` apart.
pub fn greedy_net_families(space: &SpaceRef, r: Dist) -> DisjointFamilyList {
    let n = space.len();
    let mut net: Vec<usize> = Vec::new();
    for x in 0..n {
        if net.iter().all(|&p| space.dist(p, x) > r) {
            net.push(x);
        }
    }
    let mut cells = vec![Vec::new(); net.len()];
    for x in 0..n {
        let (cell, _) = net
            .iter()
            .enumerate()
            .min_by_key(|&(i, &p)| (space.dist(p, x), i))
            .expect("nonempty net");
        cells[cell].push(x);
    }
    let mut owner = vec![0usize; n];
    for (c, cell) in cells.iter().enumerate() {
        for &x in cell {
            owner[x] = c;
        }
    }
    let mut close = vec![Vec::new(); net.len()];
    for x in 0..n {
        for y in space.close_points(x, r) {
            let (a, b) = (owner[x], owner[y]);
            if a < b {
                close[a].push(b);
            }
        }
    }
    for c in close.iter_mut() {
        c.sort_unstable();
        c.dedup();
    }
    let graph = Graph::from_predicate(net.len(), |a, b| close[a].binary_search(&b).is_ok());
    let colors = dsatur_greedy(&graph);
    let k = colors.iter().copied().max().map_or(0, |m| m + 1);
    let mut families = vec![Vec::new(); k];
    for (c, cell) in cells.into_iter().enumerate() {
        families[colors[c]].push(PointSet::new(cell));
    }
    DisjointFamilyList::new(space.clone(), r, families)
}

/// Connected components of the graph `d <= r`, as one family.
pub fn r_components(space: &SpaceRef, r: Dist) -> DisjointFamilyList {
    let n = space.len();
    let labels = space.ball_classes(r).unwrap_or_else(|| {
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            let mut stack = vec![s];
            while let Some(x) = stack.pop() {
                for y in space.close_points(x, r) {
                    if label[y] == usize::MAX {
                        label[y] = next;
                        stack.push(y);
                    }
                }
            }
            next += 1;
        }
        label
    });
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (x, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(x);
    }
    let mut fam: Vec<PointSet> = groups.into_values().map(PointSet::new).collect();
    fam.sort_by_key(|e| e.min());
    DisjointFamilyList::new(space.clone(), r, vec![fam])
}

/// A check that ran, with the exact value found and the bound it was held to.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub check: &'static str,
    pub value: String,
    pub bound: String,
    pub pass: bool,
}

impl CheckRecord {
    pub fn new(check: &'static str, value: impl ToString, bound: impl ToString, pass: bool) -> CheckRecord {
        CheckRecord {
            check,
            value: value.to_string(),
            bound: bound.to_string(),
            pass,
        }
    }
}

fn serialize_families<S: Serializer>(f: &DisjointFamilyList, s: S) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Families<'a> {
        r: Dist,
        families: &'a [Vec<PointSet>],
    }
    Families {
        r: f.r,
        families: &f.families,
    }
    .serialize(s)
}

fn serialize_cover<S: Serializer>(c: &Cover, s: S) -> std::result::Result<S::Ok, S::Error> {
    c.elements().serialize(s)
}

/// The certificate stored for one scale.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ScaleCertificate {
    Families {
        #[serde(flatten, serialize_with = "serialize_families")]
        families: DisjointFamilyList,
    },
    MultiplicityCover {
        s: Dist,
        #[serde(serialize_with = "serialize_cover")]
        cover: Cover,
    },
    LebesgueCover {
        t: Dist,
        #[serde(serialize_with = "serialize_cover")]
        cover: Cover,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaleEntry {
    pub r: Dist,
    pub mesh: Dist,
    pub certificate: ScaleCertificate,
    pub checks: Vec<CheckRecord>,
}

/// Control functions fitted over the recorded mesh table; each dominates it.
#[derive(Debug, Clone, Serialize)]
pub struct Control {
    pub table: Vec<(Dist, Dist)>,
    pub constant: Dist,
    pub linear: Option<DistRatio>,
    pub affine: AffineFit,
}

impl Control {
    pub fn from_table(table: Vec<(Dist, Dist)>) -> Control {
        let constant = table.iter().map(|e| e.1).max().unwrap_or(Dist::ZERO);
        let linear = table
            .iter()
            .filter(|e| e.0 > Dist::ZERO)
            .map(|&(r, d)| DistRatio::new(d, r))
            .max();
        let positive: Vec<(Dist, Dist)> = table.iter().copied().filter(|e| e.0 > Dist::ZERO).collect();
        Control {
            affine: fit_upper(&upper_points(&positive)),
            table,
            constant,
            linear,
        }
    }
}

/// Upper-bound certificate `dim <= n` over a range of scales.
#[derive(Debug, Clone, Serialize)]
pub struct DimensionWitness {
    pub space: String,
    pub n: usize,
    pub scale_range: (Dist, Dist),
    pub per_scale: Vec<ScaleEntry>,
    pub control: Control,
}

impl DimensionWitness {
    fn from_entries(space: &SpaceRef, n: usize, per_scale: Vec<ScaleEntry>) -> Result<DimensionWitness> {
        if per_scale.is_empty() {
            return Err(Error::Precondition("witness without scales".into()));
        }
        let lo = per_scale.iter().map(|e| e.r).min().expect("nonempty");
        let hi = per_scale.iter().map(|e| e.r).max().expect("nonempty");
        let control = Control::from_table(per_scale.iter().map(|e| (e.r, e.mesh)).collect());
        Ok(DimensionWitness {
            space: space.id().to_string(),
            n,
            scale_range: (lo, hi),
            per_scale,
            control,
        })
    }

    pub fn families_at(&self, r: Dist) -> Option<&DisjointFamilyList> {
        self.per_scale.iter().find_map(|e| match &e.certificate {
            ScaleCertificate::Families { families } if e.r == r => Some(families),
            _ => None,
        })
    }

    pub fn all_checks_pass(&self) -> bool {
        self.per_scale.iter().all(|e| e.checks.iter().all(|c| c.pass))
    }
}

fn family_entry(families: DisjointFamilyList) -> Result<ScaleEntry> {
    let cover = families.verify()?;
    let mesh = families.mesh();
    let checks = vec![
        CheckRecord::new("r_disjoint", families.r, families.r, true),
        CheckRecord::new("covers", cover.is_cover(), true, cover.is_cover()),
    ];
    Ok(ScaleEntry {
        r: families.r,
        mesh,
        certificate: ScaleCertificate::Families { families },
        checks,
    })
}

/// Witness `dim <= |families| - 1` at the families' scale, after verifying
/// disjointness and coverage.
pub fn witness_from_disjoint_families(families: DisjointFamilyList) -> Result<DimensionWitness> {
    let space = families.space.clone();
    let n = families.families.len().saturating_sub(1);
    DimensionWitness::from_entries(&space, n, vec![family_entry(families)?])
}

/// Sweeps the geometric schedule up to `r_max`, generating and verifying
/// families at each scale; fails if a scale needs more than `n + 1` families.
pub fn dimension_witness(space: &SpaceRef, n: usize, r_max: Dist, generator: FamilyGenerator) -> Result<DimensionWitness> {
    let mut entries = Vec::new();
    for r in scale_schedule(r_max) {
        let fams = generator.generate(space, r)?;
        if fams.families.len() > n + 1 {
            return Err(Error::ClaimFailed(format!(
                "{generator:?} produced {} families at r = {r}, more than {}",
                fams.families.len(),
                n + 1
            )));
        }
        entries.push(family_entry(fams)?);
    }
    DimensionWitness::from_entries(space, n, entries)
}

/// A cover built from `r`-disjoint families with its exact re-verification.
#[derive(Debug, Clone, Serialize)]
pub struct Expansion {
    pub s: Dist,
    pub t: Dist,
    #[serde(serialize_with = "serialize_cover")]
    pub cover: Cover,
    pub families_mesh: Dist,
    pub mesh: Dist,
    pub s_multiplicity: usize,
    pub lebesgue_at_least_t: bool,
    pub checks: Vec<CheckRecord>,
}

impl Expansion {
    /// `mesh <= c (s + 4t) + d`; exact for integral `s` and `t`, conservative otherwise.
    pub fn mesh_within_affine(&self, c: u64, d: u64) -> bool {
        match (self.s.as_int(), self.t.as_int()) {
            (Some(s), Some(t)) => self.mesh <= Dist::from_int(c * (s + 4 * t) + d),
            (Some(s), None) => self.mesh.le_affine(DistRatio::integer(c), self.t.times(4), c * s + d),
            _ => self
                .mesh
                .le_affine(DistRatio::integer(c), self.s, 4 * c * self.t.ceil_int() + d),
        }
    }
}

/// The cover of `expand_to_lebesgue_cover` without its verification.
pub(crate) fn expanded_cover(families: &DisjointFamilyList, s: Dist, t: Dist) -> Result<Cover> {
    if !families.r.ge_sum(s, t.times(4)) {
        return Err(Error::Precondition(format!(
            "families are {}-disjoint, need at least s + 4t = {s} + 4*{t}",
            families.r
        )));
    }
    let space = families.space.clone();
    let two_t = t.times(2);
    let elements = families
        .families
        .iter()
        .flatten()
        .map(|e| neighborhood(space.as_ref(), e, two_t))
        .collect::<Result<Vec<_>>>()?;
    Cover::new(space, elements)
}

/// Covers the space by the open `2t`-neighborhoods of all family elements.
///
/// Requires `r >= s + 4t`. The result is re-verified: `s`-multiplicity at most
/// the number of families, Lebesgue number at least `t`, and mesh at most
/// `mesh(F) + 4t`.
pub fn expand_to_lebesgue_cover(families: &DisjointFamilyList, s: Dist, t: Dist, budgets: Budgets) -> Result<Expansion> {
    let four_t = t.times(4);
    families.verify_disjoint()?;
    let cover = expanded_cover(families, s, t)?;
    let k = families.families.len();
    let s_mul = cover.r_multiplicity(s, budgets)?;
    let lebesgue_ok = cover.lebesgue_violation(t, budgets)?.is_none();
    let fam_mesh = families.mesh();
    let mesh = cover.mesh();
    let mesh_ok = mesh.le_sum(fam_mesh, four_t);
    let checks = vec![
        CheckRecord::new("s_multiplicity", s_mul, k, s_mul <= k),
        CheckRecord::new("lebesgue_at_least", if lebesgue_ok { "ok" } else { "violated" }, t, lebesgue_ok),
        CheckRecord::new("mesh", mesh, format!("{fam_mesh} + 4*{t}"), mesh_ok),
    ];
    if let Some(bad) = checks.iter().find(|c| !c.pass) {
        return Err(Error::ClaimFailed(format!(
            "expanded cover fails {}: {} vs {}",
            bad.check, bad.value, bad.bound
        )));
    }
    Ok(Expansion {
        s,
        t,
        cover,
        families_mesh: fam_mesh,
        mesh,
        s_multiplicity: s_mul,
        lebesgue_at_least_t: lebesgue_ok,
        checks,
    })
}

/// From a cover with Lebesgue number at least `2s`: the cores
/// `{x : B̄(x, s) ⊂ U}` form a cover whose `s`-multiplicity is at most the
/// multiplicity of the input.
pub fn lebesgue_to_multiplicity_cover(cover: &Cover, s: Dist, budgets: Budgets) -> Result<Cover> {
    let space = cover.space().clone();
    if let Some(bad) = cover.lebesgue_violation(s.times(2), budgets)? {
        return Err(Error::Precondition(format!("Lebesgue number below 2s = {}: set {bad:?}", s.times(2))));
    }
    let balls: Vec<Vec<usize>> = (0..space.len()).map(|x| space.close_points(x, s)).collect();
    let cores: Vec<PointSet> = cover
        .elements()
        .iter()
        .map(|u| {
            u.members()
                .iter()
                .copied()
                .filter(|&x| balls[x].iter().all(|&y| u.contains(y)))
                .collect::<PointSet>()
        })
        .filter(|c| !c.is_empty())
        .collect();
    let out = Cover::new(space, cores)?;
    let (got, bound) = (out.r_multiplicity(s, budgets)?, cover.multiplicity());
    if got > bound {
        return Err(Error::ClaimFailed(format!("core cover has {s}-multiplicity {got} > {bound}")));
    }
    Ok(out)
}

/// From a cover with `s`-multiplicity `k` and `s >= 2t`: the closed
/// `t`-neighborhoods form a cover of multiplicity at most `k` and Lebesgue
/// number at least `t`.
pub fn multiplicity_to_lebesgue_cover(cover: &Cover, t: Dist, s: Dist, budgets: Budgets) -> Result<Cover> {
    if t.times(2) > s {
        return Err(Error::Precondition(format!("need s >= 2t, got s = {s}, t = {t}")));
    }
    let space = cover.space().clone();
    let k = cover.r_multiplicity(s, budgets)?;
    let elements = cover
        .elements()
        .iter()
        .map(|u| closed_neighborhood(space.as_ref(), u, t))
        .collect::<Result<Vec<_>>>()?;
    let out = Cover::new(space, elements)?;
    if out.multiplicity() > k {
        return Err(Error::ClaimFailed(format!("neighborhood cover has multiplicity {} > {k}", out.multiplicity())));
    }
    if let Some(bad) = out.lebesgue_violation(t, budgets)? {
        return Err(Error::ClaimFailed(format!("neighborhood cover misses {bad:?} at scale {t}")));
    }
    Ok(out)
}

/// Product families `{U × V}` on the max-metric product of a space with a
/// single `r`-disjoint family and a space with `n + 1` families at the same `r`.
pub fn product_zero_dim_families(x: &DisjointFamilyList, y: &DisjointFamilyList) -> Result<DisjointFamilyList> {
    if x.r != y.r {
        return Err(Error::Precondition(format!("scales differ: {} vs {}", x.r, y.r)));
    }
    if x.families.len() != 1 {
        return Err(Error::Precondition(format!(
            "left witness has {} families, expected one",
            x.families.len()
        )));
    }
    let product = ProductSpace::new(x.space.clone(), y.space.clone());
    let families = y
        .families
        .iter()
        .map(|fam| {
            let mut out = Vec::new();
            for u in &x.families[0] {
                for v in fam {
                    out.push(PointSet::new(
                        u.members()
                            .iter()
                            .flat_map(|&a| v.members().iter().map(move |&b| (a, b)))
                            .map(|(a, b)| product.index(a, b)),
                    ));
                }
            }
            out
        })
        .collect();
    let space: SpaceRef = Arc::new(product);
    let out = DisjointFamilyList::new(space, x.r, families);
    out.verify()?;
    Ok(out)
}

/// Witness for `X × Y` from a `0`-witness of `X` and an `n`-witness of `Y` at
/// every scale they share.
pub fn product_zero_dim_witness(wx: &DimensionWitness, wy: &DimensionWitness) -> Result<DimensionWitness> {
    if wx.n != 0 {
        return Err(Error::Precondition(format!("left witness has n = {}, expected 0", wx.n)));
    }
    let mut entries = Vec::new();
    let mut space = None;
    for e in &wy.per_scale {
        let (Some(fx), Some(fy)) = (wx.families_at(e.r), wy.families_at(e.r)) else {
            continue;
        };
        let fams = product_zero_dim_families(fx, fy)?;
        space = Some(fams.space.clone());
        entries.push(family_entry(fams)?);
    }
    let space = space.ok_or_else(|| Error::Precondition("scale ranges do not overlap".into()))?;
    DimensionWitness::from_entries(&space, wy.n, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covers::is_r_disjoint;
    use crate::metric::{FiniteMetricSpace, Norm};
    use proptest::prelude::*;

    fn line(lo: i64, hi: i64) -> SpaceRef {
        FiniteMetricSpace::interval("line", lo, hi).unwrap().into_ref()
    }

    fn grid(lo: i64, hi: i64, norm: Norm) -> SpaceRef {
        FiniteMetricSpace::lattice("grid", vec![(lo, hi), (lo, hi)], norm).unwrap().into_ref()
    }

    /// Oracle: pairwise scan of every cross-element pair within each family.
    fn oracle_disjoint(f: &DisjointFamilyList) -> bool {
        f.families.iter().all(|fam| {
            fam.iter().enumerate().all(|(a, u)| {
                fam[a + 1..].iter().all(|v| {
                    u.members()
                        .iter()
                        .all(|&x| v.members().iter().all(|&y| f.space.dist(x, y) > f.r))
                })
            })
        })
    }

    #[test]
    fn two_block_families_on_a_line() {
        let s = line(0, 100);
        let f = line_blocks(&s, Dist::from_int(5)).unwrap();
        assert_eq!(f.families[0][0], PointSet::range(0, 6));
        assert_eq!(f.families[1][0], PointSet::range(6, 12));
        assert_eq!(f.families[0][1], PointSet::range(12, 18));
        assert!(oracle_disjoint(&f));
        let w = witness_from_disjoint_families(f).unwrap();
        assert_eq!(w.n, 1);
        assert_eq!(w.control.constant, Dist::from_int(5));
    }

    #[test]
    fn single_family_of_everything() {
        let s = line(0, 20);
        for r in [0u64, 3, 50] {
            let f = DisjointFamilyList::new(s.clone(), Dist::from_int(r), vec![vec![PointSet::range(0, 21)]]);
            assert_eq!(witness_from_disjoint_families(f).unwrap().n, 0);
        }
    }

    #[test]
    fn violations_carry_counterexamples() {
        let s = line(0, 10);
        let f = DisjointFamilyList::new(s, Dist::from_int(5), vec![vec![PointSet::new([0]), PointSet::new([5])]]);
        match witness_from_disjoint_families(f) {
            Err(Error::NotDisjoint { x, y, d, .. }) => assert_eq!((x, y, d), (0, 5, Dist::from_int(5))),
            other => panic!("expected disjointness failure, got {other:?}"),
        }
    }

    #[test]
    fn bricks_cover_with_m_plus_one_families() {
        for norm in [Norm::Linf, Norm::L1] {
            let s = grid(-9, 9, norm);
            for r in 0..7u64 {
                let f = brick_families(&s, Dist::from_int(r)).unwrap();
                assert!(f.families.len() <= 3);
                assert!(oracle_disjoint(&f), "r={r}");
                f.union_cover().unwrap();
            }
        }
        let cube = FiniteMetricSpace::lattice("cube", vec![(0, 6); 3], Norm::Linf).unwrap().into_ref();
        let f = brick_families(&cube, Dist::from_int(2)).unwrap();
        assert_eq!(f.families.len(), 4);
        assert!(oracle_disjoint(&f));
        f.union_cover().unwrap();
    }

    #[test]
    fn greedy_net_families_verify() {
        let pts: Vec<Vec<i64>> = (0..60).map(|i| vec![(i * 7) % 23, (i * 11) % 19]).collect();
        let s = FiniteMetricSpace::from_points("cloud", &pts, Norm::L1).unwrap().into_ref();
        for r in [1u64, 3, 6] {
            let f = FamilyGenerator::GreedyNet.generate(&s, Dist::from_int(r)).unwrap();
            assert!(oracle_disjoint(&f));
        }
    }

    #[test]
    fn expansion_on_a_line() {
        let s = line(0, 100);
        let f = line_blocks(&s, Dist::from_int(5)).unwrap();
        let e = expand_to_lebesgue_cover(&f, Dist::ONE, Dist::ONE, Budgets::default()).unwrap();
        assert!(e.s_multiplicity <= 2);
        assert!(e.lebesgue_at_least_t);
        let zero = expand_to_lebesgue_cover(&f, Dist::ONE, Dist::ZERO, Budgets::default()).unwrap();
        assert_eq!(zero.cover.elements().len(), f.families.iter().flatten().count());
        assert!(zero.cover.elements().iter().zip(f.families.iter().flatten()).all(|(a, b)| a == b));
        assert!(matches!(
            expand_to_lebesgue_cover(&f, Dist::from_int(2), Dist::ONE, Budgets::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn expansion_with_t_three_has_lebesgue_three() {
        let s = line(0, 120);
        let f = line_blocks(&s, Dist::from_int(13)).unwrap();
        let e = expand_to_lebesgue_cover(&f, Dist::ONE, Dist::from_int(3), Budgets::default()).unwrap();
        let l = e.cover.lebesgue_number(crate::covers::LebesgueMode::Exact, Budgets::default()).unwrap();
        assert!(l.value >= Dist::from_int(3));
    }

    #[test]
    fn an_mesh_bound_on_bricks() {
        let s = grid(-12, 12, Norm::Linf);
        let (sv, tv) = (Dist::from_int(2), Dist::ONE);
        let f = brick_families(&s, Dist::from_int(6)).unwrap();
        let e = expand_to_lebesgue_cover(&f, sv, tv, Budgets::default()).unwrap();
        assert_eq!(f.mesh(), Dist::from_int(11));
        assert_eq!(e.mesh, Dist::from_int(13));
        assert!(e.mesh_within_affine(2, 1));
        assert!(!e.mesh_within_affine(2, 0));
    }

    #[test]
    fn form_conversions_round_trip() {
        let s = line(0, 80);
        let b = Budgets::default();
        let f = line_blocks(&s, Dist::from_int(12)).unwrap();
        let w = expand_to_lebesgue_cover(&f, Dist::from_int(4), Dist::from_int(2), b).unwrap();
        let v = lebesgue_to_multiplicity_cover(&w.cover, Dist::ONE, b).unwrap();
        assert!(v.r_multiplicity(Dist::ONE, b).unwrap() <= w.cover.multiplicity());
        let back = multiplicity_to_lebesgue_cover(&v, Dist::ONE, Dist::from_int(2), b).unwrap();
        assert!(back.multiplicity() <= 2);
        assert!(back.lebesgue_violation(Dist::ONE, b).unwrap().is_none());
    }

    #[test]
    fn product_with_a_point_relabels() {
        let point = line(0, 0);
        let y = line(0, 30);
        let r = Dist::from_int(3);
        let wx = dimension_witness(&point, 0, r, FamilyGenerator::Components).unwrap();
        let wy = dimension_witness(&y, 1, r, FamilyGenerator::Blocks).unwrap();
        let wp = product_zero_dim_witness(&wx, &wy).unwrap();
        assert_eq!(wp.n, 1);
        for (a, b) in wp.per_scale.iter().zip(&wy.per_scale) {
            assert_eq!(a.mesh, b.mesh);
        }
    }

    #[test]
    fn product_families_are_disjoint_under_max_metric() {
        let x = FiniteMetricSpace::from_points("clusters", &[vec![0], vec![1], vec![10], vec![11], vec![30]], Norm::L1)
            .unwrap()
            .into_ref();
        let y = line(0, 20);
        let r = Dist::from_int(3);
        let fx = r_components(&x, r);
        let fy = line_blocks(&y, r).unwrap();
        let p = product_zero_dim_families(&fx, &fy).unwrap();
        assert!(oracle_disjoint(&p));
        assert_eq!(p.families.len(), 2);
        assert!(p.mesh() <= Dist::from_int(2 * 3));
    }

    proptest! {
        #[test]
        fn bricks_are_valid_for_any_box(lo in -20i64..0, w in 0i64..12, h in 0i64..12, r in 0u64..9) {
            let s = FiniteMetricSpace::lattice("b", vec![(lo, lo + w), (lo, lo + h)], Norm::Linf).unwrap().into_ref();
            let f = brick_families(&s, Dist::from_int(r)).unwrap();
            prop_assert!(oracle_disjoint(&f));
            prop_assert!(f.union_cover().is_ok());
            for fam in &f.families {
                prop_assert!(is_r_disjoint(s.as_ref(), fam, Dist::from_int(r)));
            }
        }
    }
}
