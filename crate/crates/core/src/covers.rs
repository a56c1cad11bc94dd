//! Covers, their scale invariants, and r-disjoint families.

use std::fmt;
use std::ops::ControlFlow;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::budget::Budgets;
use crate::coarse_maps::CoarseMap;
use crate::dist::Dist;
use crate::error::{Error, Result};
use crate::metric::{check_index, check_same_space, closed_neighborhood, MetricSpace, PointSet, SpaceRef};

/// A family of nonempty point sets of a space, usually covering it.
#[derive(Clone)]
pub struct Cover {
    space: SpaceRef,
    elements: Vec<PointSet>,
    incidence: Vec<Vec<u32>>,
    covers: bool,
    mesh: OnceLock<Dist>,
}

impl fmt::Debug for Cover {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Cover")
            .field("space", &self.space.id())
            .field("elements", &self.elements)
            .finish()
    }
}

impl PartialEq for Cover {
    fn eq(&self, other: &Self) -> bool {
        self.space.id() == other.space.id() && self.elements == other.elements
    }
}

impl Cover {
    /// A validated cover: nonempty elements whose union is the whole space.
    pub fn new(space: SpaceRef, elements: Vec<PointSet>) -> Result<Cover> {
        let c = Cover::family(space, elements)?;
        if let Some(point) = c.incidence.iter().position(Vec::is_empty) {
            return Err(Error::NotACover { point });
        }
        Ok(c)
    }

    /// A family of nonempty elements that need not cover the space.
    pub fn family(space: SpaceRef, elements: Vec<PointSet>) -> Result<Cover> {
        let mut incidence = vec![Vec::new(); space.len()];
        for (e, el) in elements.iter().enumerate() {
            if el.is_empty() {
                return Err(Error::EmptyElement(e));
            }
            for &x in el.members() {
                check_index(space.as_ref(), x)?;
                incidence[x].push(e as u32);
            }
        }
        let covers = incidence.iter().all(|v| !v.is_empty());
        Ok(Cover {
            space,
            elements,
            incidence,
            covers,
            mesh: OnceLock::new(),
        })
    }

    pub fn singletons(space: SpaceRef) -> Cover {
        let elements = (0..space.len()).map(PointSet::singleton).collect();
        Cover::new(space, elements).expect("singletons cover")
    }

    pub fn whole(space: SpaceRef) -> Cover {
        let n = space.len();
        Cover::new(space, vec![PointSet::range(0, n)]).expect("whole space covers")
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }

    pub fn elements(&self) -> &[PointSet] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &PointSet {
        &self.elements[i]
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn is_cover(&self) -> bool {
        self.covers
    }

    /// Indices of the elements containing `x`, ascending.
    pub fn incident(&self, x: usize) -> &[u32] {
        &self.incidence[x]
    }

    /// Smallest index of an element containing every member of `set`.
    pub fn containing_element(&self, set: &[usize]) -> Option<usize> {
        let (&first, rest) = set.split_first()?;
        self.incidence[first]
            .iter()
            .map(|&e| e as usize)
            .find(|&e| rest.iter().all(|&x| self.elements[e].contains(x)))
    }

    /// Number of distinct elements meeting `set`.
    pub fn elements_met(&self, set: &[usize]) -> usize {
        let mut met: Vec<u32> = set.iter().flat_map(|&x| self.incidence[x].iter().copied()).collect();
        met.sort_unstable();
        met.dedup();
        met.len()
    }

    pub fn mesh(&self) -> Dist {
        *self.mesh.get_or_init(|| {
            self.elements
                .par_iter()
                .map(|e| self.space.diameter_of(e.members()))
                .max()
                .unwrap_or(Dist::ZERO)
        })
    }

    pub fn multiplicity(&self) -> usize {
        self.incidence.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Exact r-multiplicity: the most elements met by a set of diameter <= r.
    pub fn r_multiplicity(&self, r: Dist, budgets: Budgets) -> Result<usize> {
        let mut stamp = vec![usize::MAX; self.elements.len()];
        let mut best = 0;
        let mut token = 0;
        let walk = self.space.for_each_maximal_set(r, budgets.clique_expansions, &mut |set| {
            let mut count = 0;
            for &x in set {
                for &e in &self.incidence[x] {
                    if stamp[e as usize] != token {
                        stamp[e as usize] = token;
                        count += 1;
                    }
                }
            }
            token += 1;
            best = best.max(count);
            ControlFlow::Continue(())
        });
        match walk {
            Ok(_) => Ok(best),
            Err(Error::BudgetExceeded { resource, limit, .. }) => Err(Error::BudgetExceeded {
                resource,
                limit,
                lower_bound: Some(best as u64),
            }),
            Err(e) => Err(e),
        }
    }

    /// A maximal set of diameter <= r meeting more than `n` elements, if any.
    pub fn r_multiplicity_violation(&self, r: Dist, n: usize, budgets: Budgets) -> Result<Option<Vec<usize>>> {
        let mut stamp = vec![usize::MAX; self.elements.len()];
        let mut token = 0;
        let mut witness = None;
        self.space.for_each_maximal_set(r, budgets.clique_expansions, &mut |set| {
            let mut count = 0;
            for &x in set {
                for &e in &self.incidence[x] {
                    if stamp[e as usize] != token {
                        stamp[e as usize] = token;
                        count += 1;
                    }
                }
            }
            token += 1;
            if count > n {
                witness = Some(set.to_vec());
                return ControlFlow::Break(());
            }
            ControlFlow::Continue(())
        })?;
        Ok(witness)
    }

    /// `r_multiplicity` over several scales, in input order.
    pub fn r_multiplicity_table(&self, scales: &[Dist], budgets: Budgets) -> Result<Vec<(Dist, usize)>> {
        scales
            .par_iter()
            .map(|&r| Ok((r, self.r_multiplicity(r, budgets)?)))
            .collect()
    }

    /// A maximal set of diameter <= t contained in no element, if any.
    /// `None` certifies Lebesgue number >= t.
    pub fn lebesgue_violation(&self, t: Dist, budgets: Budgets) -> Result<Option<Vec<usize>>> {
        let mut witness = None;
        self.space.for_each_maximal_set(t, budgets.clique_expansions, &mut |set| {
            if self.containing_element(set).is_none() {
                witness = Some(set.to_vec());
                return ControlFlow::Break(());
            }
            ControlFlow::Continue(())
        })?;
        Ok(witness)
    }

    fn lebesgue_candidates(&self) -> Vec<Dist> {
        let cap = self.space.scale_cap();
        let mut c: Vec<Dist> = self.space.distinct_distances().into_iter().filter(|&d| d <= cap).collect();
        c.push(cap);
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn lebesgue_number(&self, mode: LebesgueMode, budgets: Budgets) -> Result<LebesgueNumber> {
        if !self.covers {
            return Ok(LebesgueNumber {
                value: Dist::ZERO,
                mode,
                fallback: false,
            });
        }
        let candidates = self.lebesgue_candidates();
        if mode == LebesgueMode::Exact {
            match self.lebesgue_exact(&candidates, budgets) {
                Ok(value) => return Ok(LebesgueNumber { value, mode, fallback: false }),
                Err(e) if e.is_budget() => {
                    return Ok(LebesgueNumber {
                        value: self.lebesgue_ball(&candidates),
                        mode: LebesgueMode::BallCertificate,
                        fallback: true,
                    })
                }
                Err(e) => return Err(e),
            }
        }
        Ok(LebesgueNumber {
            value: self.lebesgue_ball(&candidates),
            mode,
            fallback: false,
        })
    }

    fn lebesgue_exact(&self, candidates: &[Dist], budgets: Budgets) -> Result<Dist> {
        // largest index whose threshold passes; the property is monotone in r
        let (mut lo, mut hi) = (0usize, candidates.len());
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.lebesgue_violation(candidates[mid], budgets)?.is_none() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(candidates[lo])
    }

    fn lebesgue_ball(&self, candidates: &[Dist]) -> Dist {
        let space = self.space.as_ref();
        let n = space.len();
        // per point, the largest escape radius over incident elements (None = unbounded)
        let bound = (0..n)
            .into_par_iter()
            .map(|x| {
                let mut best: Option<Option<Dist>> = None;
                for &e in &self.incidence[x] {
                    let el = &self.elements[e as usize];
                    let escape = (0..n).filter(|&y| !el.contains(y)).map(|y| space.dist(x, y)).min();
                    best = Some(match (best, escape) {
                        (None, esc) => esc,
                        (Some(None), _) | (_, None) => None,
                        (Some(Some(a)), Some(b)) => Some(a.max(b)),
                    });
                }
                best.flatten()
            })
            .reduce(
                || None,
                |a, b| match (a, b) {
                    (None, v) | (v, None) => v,
                    (Some(a), Some(b)) => Some(a.min(b)),
                },
            );
        match bound {
            None => *candidates.last().expect("cap present"),
            Some(m) => candidates.iter().copied().filter(|&c| c < m).max().unwrap_or(Dist::ZERO),
        }
    }

    pub fn to_file(&self) -> CoverFile {
        CoverFile {
            space: self.space.id().to_string(),
            elements: self.elements.iter().map(|e| e.members().to_vec()).collect(),
        }
    }

    pub fn from_file(space: SpaceRef, file: CoverFile) -> Result<Cover> {
        if file.space != space.id() {
            return Err(Error::SpaceMismatch {
                expected: space.id().to_string(),
                found: file.space,
            });
        }
        Cover::new(space, file.elements.into_iter().map(PointSet::new).collect())
    }

    /// Deterministic summary of the invariants at the given scales.
    pub fn report(&self, scales: &[Dist], budgets: Budgets) -> Result<CoverReport> {
        Ok(CoverReport {
            space: self.space.id().to_string(),
            elements: self.elements.len(),
            is_cover: self.covers,
            mesh: self.mesh(),
            multiplicity: self.multiplicity(),
            r_multiplicity: self
                .r_multiplicity_table(scales, budgets)?
                .into_iter()
                .map(|(r, m)| RMul { r, mul: m })
                .collect(),
            lebesgue: self.lebesgue_number(LebesgueMode::Exact, budgets)?,
        })
    }
}

/// Images `f(U)` of the elements, duplicates merged (first occurrence kept).
/// The result is flagged as a cover of the codomain iff `f` hits every point.
pub fn pushforward(cover: &Cover, f: &CoarseMap) -> Result<Cover> {
    check_same_space(f.domain().as_ref(), cover.space().as_ref())?;
    let mut seen = std::collections::HashSet::new();
    let mut images = Vec::new();
    for el in cover.elements() {
        let image = PointSet::new(el.members().iter().map(|&x| f.apply(x)));
        if seen.insert(image.clone()) {
            images.push(image);
        }
    }
    Cover::family(f.codomain().clone(), images)
}

/// `true` iff points of different elements are more than `r` apart.
pub fn is_r_disjoint(space: &dyn MetricSpace, family: &[PointSet], r: Dist) -> bool {
    r_disjoint_violation(space, family, r).is_none()
}

/// A pair `(a, b, x, y)` with `x ∈ F[a]`, `y ∈ F[b]`, `a != b`, `d(x, y) <= r`.
pub fn r_disjoint_violation(
    space: &dyn MetricSpace,
    family: &[PointSet],
    r: Dist,
) -> Option<(usize, usize, usize, usize)> {
    let mut owner: Vec<Option<usize>> = vec![None; space.len()];
    for (a, el) in family.iter().enumerate() {
        for &x in el.members() {
            if let Some(b) = owner[x] {
                return Some((b, a, x, x));
            }
            owner[x] = Some(a);
        }
    }
    if space.as_lattice().is_some() {
        for (a, el) in family.iter().enumerate() {
            let Ok(near) = closed_neighborhood(space, el, r) else { continue };
            if let Some((y, b)) = near.members().iter().find_map(|&y| owner[y].filter(|&b| b != a).map(|b| (y, b))) {
                let x = el.members().iter().copied().find(|&x| space.dist(x, y) <= r).unwrap_or(y);
                return Some((a.min(b), a.max(b), if a < b { x } else { y }, if a < b { y } else { x }));
            }
        }
        return None;
    }
    for (a, el) in family.iter().enumerate() {
        for &x in el.members() {
            for y in space.close_points(x, r) {
                if let Some(b) = owner[y] {
                    if b != a {
                        return Some((a.min(b), a.max(b), if a < b { x } else { y }, if a < b { y } else { x }));
                    }
                }
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LebesgueMode {
    Exact,
    BallCertificate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LebesgueNumber {
    pub value: Dist,
    pub mode: LebesgueMode,
    /// Exact mode ran out of budget and the ball certificate was used.
    pub fallback: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RMul {
    pub r: Dist,
    pub mul: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverReport {
    pub space: String,
    pub elements: usize,
    pub is_cover: bool,
    pub mesh: Dist,
    pub multiplicity: usize,
    pub r_multiplicity: Vec<RMul>,
    pub lebesgue: LebesgueNumber,
}

/// JSON form of a cover: `{ "space": id, "elements": [[indices]...] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverFile {
    pub space: String,
    pub elements: Vec<Vec<usize>>,
}

/// Families `U^0, ..., U^n`, each claimed to be `r`-disjoint.
#[derive(Debug, Clone)]
pub struct DisjointFamilyList {
    pub space: SpaceRef,
    pub r: Dist,
    pub families: Vec<Vec<PointSet>>,
}

impl DisjointFamilyList {
    pub fn new(space: SpaceRef, r: Dist, families: Vec<Vec<PointSet>>) -> DisjointFamilyList {
        DisjointFamilyList { space, r, families }
    }

    /// Checks each family for `r`-disjointness, reporting the first violating pair.
    pub fn verify_disjoint(&self) -> Result<()> {
        let found = self
            .families
            .par_iter()
            .enumerate()
            .map(|(i, fam)| r_disjoint_violation(self.space.as_ref(), fam, self.r).map(|v| (i, v)))
            .collect::<Vec<_>>();
        if let Some((family, (a, b, x, y))) = found.into_iter().flatten().next() {
            return Err(Error::NotDisjoint {
                family,
                a,
                b,
                x,
                y,
                d: self.space.dist(x, y),
                r: self.r,
            });
        }
        Ok(())
    }

    /// All elements of all families as one cover (validated to cover the space).
    pub fn union_cover(&self) -> Result<Cover> {
        let all = self.families.iter().flatten().cloned().collect();
        Cover::new(self.space.clone(), all)
    }

    pub fn verify(&self) -> Result<Cover> {
        self.verify_disjoint()?;
        self.union_cover()
    }

    pub fn mesh(&self) -> Dist {
        self.families
            .iter()
            .flatten()
            .map(|e| self.space.diameter_of(e.members()))
            .max()
            .unwrap_or(Dist::ZERO)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::FiniteMetricSpace;
    use proptest::prelude::*;

    fn line(lo: i64, hi: i64) -> SpaceRef {
        FiniteMetricSpace::interval("line", lo, hi).unwrap().into_ref()
    }

    fn blocks(space: &SpaceRef, size: usize) -> Cover {
        let n = space.len();
        let els = (0..n).step_by(size).map(|s| PointSet::range(s, (s + size).min(n))).collect();
        Cover::new(space.clone(), els).unwrap()
    }

    /// Oracle: every contiguous run of the line is a subset of bounded diameter,
    /// and every subset of diameter <= r sits inside a run of length r + 1.
    fn line_r_mul_oracle(cover: &Cover, r: usize) -> usize {
        let n = cover.space().len();
        (0..n)
            .map(|s| cover.elements_met(&(s..(s + r + 1).min(n)).collect::<Vec<_>>()))
            .max()
            .unwrap_or(0)
    }

    #[test]
    fn mesh_examples() {
        let s = line(0, 7);
        assert_eq!(Cover::singletons(s.clone()).mesh(), Dist::ZERO);
        assert_eq!(blocks(&s, 4).mesh(), Dist::from_int(3));
        let t = line(-4, 4);
        let tri = Cover::new(t.clone(), vec![PointSet::range(0, 3), PointSet::range(3, 6), PointSet::range(6, 9)]).unwrap();
        assert_eq!(tri.mesh(), Dist::from_int(2));
    }

    #[test]
    fn multiplicity_examples() {
        let s = line(0, 2);
        assert_eq!(blocks(&s, 2).multiplicity(), 1);
        let c = Cover::new(s, vec![PointSet::new([0, 1]), PointSet::new([1, 2])]).unwrap();
        assert_eq!(c.multiplicity(), 2);
    }

    #[test]
    fn r_multiplicity_examples() {
        let b = Budgets::default();
        let s = line(0, 63);
        for i in 0..5u32 {
            let c = blocks(&s, 1 << i);
            assert_eq!(c.r_multiplicity(Dist::ZERO, b).unwrap(), c.multiplicity());
            for r in 0..(1usize << i) {
                let got = c.r_multiplicity(Dist::from_int(r as u64), b).unwrap();
                assert!(got <= 2);
                assert_eq!(got, line_r_mul_oracle(&c, r));
            }
        }
        let t = line(-40, 40);
        let k = 2;
        let els = (0..81).step_by(9).map(|s| PointSet::range(s, s + 9)).collect();
        let tri = Cover::new(t, els).unwrap();
        assert_eq!(tri.r_multiplicity(Dist::from_int(3u64.pow(k)), b).unwrap(), 2);
        assert_eq!(line_r_mul_oracle(&tri, 9), 2);
    }

    #[test]
    fn lebesgue_examples() {
        let b = Budgets::default();
        let s = line(0, 31);
        let single = Cover::singletons(s.clone());
        assert_eq!(single.lebesgue_number(LebesgueMode::Exact, b).unwrap().value, Dist::ZERO);
        let dy = blocks(&s, 8);
        assert_eq!(dy.lebesgue_number(LebesgueMode::Exact, b).unwrap().value, Dist::ZERO);
        assert_eq!(dy.lebesgue_violation(Dist::ONE, b).unwrap(), Some(vec![7, 8]));
        let whole = Cover::whole(s.clone());
        assert_eq!(whole.lebesgue_number(LebesgueMode::Exact, b).unwrap().value, s.scale_cap());
        // overlapping windows of length 6 every 3 points: every 4-run fits
        let els = (0..=27).step_by(3).map(|st| PointSet::range(st, (st + 6).min(32))).collect();
        let ov = Cover::new(s, els).unwrap();
        assert_eq!(ov.lebesgue_number(LebesgueMode::Exact, b).unwrap().value, Dist::from_int(3));
        assert_eq!(ov.lebesgue_number(LebesgueMode::BallCertificate, b).unwrap().value, Dist::from_int(1));
    }

    #[test]
    fn lebesgue_budget_falls_back_to_ball_certificate() {
        let pts: Vec<Vec<i64>> = (0..12).map(|i| vec![i * 3 % 7, i]).collect();
        let s = FiniteMetricSpace::from_points("pts", &pts, crate::metric::Norm::L1).unwrap().into_ref();
        let c = Cover::whole(s);
        let tiny = Budgets {
            clique_expansions: 1,
            coloring_nodes: 1,
        };
        let l = c.lebesgue_number(LebesgueMode::Exact, tiny).unwrap();
        assert!(l.fallback);
        assert_eq!(l.mode, LebesgueMode::BallCertificate);
    }

    #[test]
    fn disjointness_examples() {
        let s = line(0, 10);
        let f = [PointSet::singleton(0), PointSet::singleton(5)];
        assert!(is_r_disjoint(s.as_ref(), &f, Dist::from_int(4)));
        assert!(!is_r_disjoint(s.as_ref(), &f, Dist::from_int(5)));
        assert!(is_r_disjoint(s.as_ref(), &[PointSet::range(0, 11)], Dist::from_int(100)));
    }

    #[test]
    fn pushforward_examples() {
        let dom = line(0, 15);
        let cod = line(0, 7);
        let half = CoarseMap::new(dom.clone(), cod.clone(), (0..16).map(|x| x / 2).collect()).unwrap();
        let pairs = blocks(&dom, 2);
        let image = pushforward(&pairs, &half).unwrap();
        assert!(image.is_cover());
        assert_eq!(image.elements(), Cover::singletons(cod.clone()).elements());
        let quads = blocks(&dom, 4);
        assert_eq!(pushforward(&quads, &half).unwrap().elements(), blocks(&cod, 2).elements());
        let id = CoarseMap::identity(dom.clone());
        let dup = Cover::new(dom.clone(), vec![PointSet::range(0, 16), PointSet::range(0, 16)]).unwrap();
        assert_eq!(pushforward(&dup, &id).unwrap().len(), 1);
    }

    #[test]
    fn cover_validation() {
        let s = line(0, 3);
        assert!(matches!(
            Cover::new(s.clone(), vec![PointSet::new([0, 1])]),
            Err(Error::NotACover { point: 2 })
        ));
        assert!(matches!(
            Cover::new(s.clone(), vec![PointSet::range(0, 4), PointSet::default()]),
            Err(Error::EmptyElement(1))
        ));
        let file = blocks(&s, 2).to_file();
        let back = Cover::from_file(s, serde_json::from_str(&serde_json::to_string(&file).unwrap()).unwrap()).unwrap();
        assert_eq!(back.len(), 2);
    }

    fn random_cover(n: usize, seeds: &[u8]) -> Cover {
        let s = line(0, n as i64 - 1);
        let mut els: Vec<PointSet> = Vec::new();
        let mut start = 0;
        for (i, &k) in seeds.iter().enumerate() {
            if start >= n {
                break;
            }
            let len = 1 + (k as usize % 5);
            let back = (i % 3).min(start);
            els.push(PointSet::range(start - back, (start + len).min(n)));
            start += len;
        }
        if start < n {
            els.push(PointSet::range(start, n));
        }
        Cover::new(s, els).unwrap()
    }

    proptest! {
        #[test]
        fn r_multiplicity_is_monotone_and_exact(n in 2usize..40, seeds in prop::collection::vec(any::<u8>(), 1..40)) {
            let c = random_cover(n, &seeds);
            let b = Budgets::default();
            let mut prev = 0;
            for r in 0..n {
                let m = c.r_multiplicity(Dist::from_int(r as u64), b).unwrap();
                prop_assert!(m >= prev);
                prop_assert_eq!(m, line_r_mul_oracle(&c, r));
                prev = m;
            }
            prop_assert_eq!(c.r_multiplicity(Dist::ZERO, b).unwrap(), c.multiplicity());
        }

        #[test]
        fn ball_certificate_is_a_lower_bound(n in 2usize..40, seeds in prop::collection::vec(any::<u8>(), 1..40)) {
            let c = random_cover(n, &seeds);
            let b = Budgets::default();
            let exact = c.lebesgue_number(LebesgueMode::Exact, b).unwrap().value;
            let ball = c.lebesgue_number(LebesgueMode::BallCertificate, b).unwrap().value;
            prop_assert!(ball <= exact);
            // oracle: every run of exact+1 points fits, the next length does not (unless capped)
            let fits = |len: usize| (0..=n - len).all(|s| c.containing_element(&(s..s + len).collect::<Vec<_>>()).is_some());
            let e = exact.as_int().unwrap() as usize;
            prop_assert!(fits(e + 1));
            if e + 1 < n {
                prop_assert!(!fits(e + 2));
            }
        }
    }
}
