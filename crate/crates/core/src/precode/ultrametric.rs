use std::ops::ControlFlow;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::{pow_dist, require_valid, validate_precode, PrecodeFailure, PrecodeReport, PrecodeStructure};
use crate::budget::Budgets;
use crate::coarse_maps::{check_coarse_equivalence, fit_moduli, CoarseMap, CoarseMapRecord, EquivalenceReport};
use crate::dist::{Dist, DistRatio};
use crate::error::{Error, Result};
use crate::metric::{MetricSpace, SpaceRef, Walk};

const MAX_MATRIX_LEAVES: usize = 4096;

/// Leaves where the parent-chain level and the direct minimal common level differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PDivergence {
    pub a: usize,
    pub b: usize,
    pub chain: usize,
    pub direct: usize,
}

/// The bottom cover of a precode with `d(V, W) = base^p(V, W)`, where `p` is
/// the first level at which `V` and `W` share an element.
#[derive(Debug)]
pub struct UltrametricSpace {
    id: String,
    base_space: String,
    base: u64,
    powers: Vec<Dist>,
    /// `chains[k][leaf]`: element of level `k` above `leaf`.
    chains: Vec<Vec<u32>>,
    /// Direct minimal common level per pair, used when levels overlap.
    direct: Option<Vec<u16>>,
    labels: Vec<String>,
    diameter: Dist,
    distinct: Vec<Dist>,
    divergences: Vec<PDivergence>,
}

impl UltrametricSpace {
    /// Builds the level ultrametric of a structure with unique parents and an
    /// absorbing top level.
    pub fn build(p: &PrecodeStructure) -> Result<UltrametricSpace> {
        let report = validate_precode(p, usize::MAX, &[], Budgets::default())?;
        if let Some(f) = report.failures.iter().find(|f| {
            matches!(
                f,
                PrecodeFailure::NotACover { .. }
                    | PrecodeFailure::Uniqueness { .. }
                    | PrecodeFailure::ParentMismatch { .. }
                    | PrecodeFailure::Absorption { .. }
            )
        }) {
            return Err(Error::Precondition(format!("structure is not validated: {f:?}")));
        }
        let leaves = p.levels[0].len();
        let mut chains = vec![(0..leaves as u32).collect::<Vec<u32>>()];
        for k in 0..p.levels.len() - 1 {
            let next = chains[k].iter().map(|&e| p.parent[k][e as usize] as u32).collect();
            chains.push(next);
        }
        let powers = (0..p.levels.len()).map(|k| pow_dist(p.kind.base(), k)).collect::<Result<Vec<_>>>()?;
        let base_space = p.space.as_ref();
        let labels = p.levels[0]
            .elements()
            .iter()
            .map(|e| base_space.label(e.min().expect("nonempty element")))
            .collect();
        let mut u = UltrametricSpace {
            id: format!("ultrametric({})", p.space.id()),
            base_space: p.space.id().to_string(),
            base: p.kind.base(),
            powers,
            chains,
            direct: None,
            labels,
            diameter: Dist::ZERO,
            distinct: Vec::new(),
            divergences: Vec::new(),
        };
        if !p.disjoint {
            u.attach_direct_levels(p)?;
        }
        u.diameter = match &u.direct {
            None => u.powers[u.common_level(&(0..leaves).collect::<Vec<_>>())],
            Some(_) => (0..leaves)
                .flat_map(|a| (a + 1..leaves).map(move |b| (a, b)))
                .map(|(a, b)| u.dist(a, b))
                .max()
                .unwrap_or(Dist::ZERO),
        };
        u.distinct = u.compute_distinct();
        Ok(u)
    }

    /// Minimal `k` with an element of level `k` containing both leaves, by
    /// scanning elements directly; divergences from the chain level are kept.
    fn attach_direct_levels(&mut self, p: &PrecodeStructure) -> Result<()> {
        let leaves = self.labels.len();
        if leaves > MAX_MATRIX_LEAVES {
            return Err(Error::Precondition(format!(
                "overlapping levels with {leaves} leaves exceed the direct-scan limit {MAX_MATRIX_LEAVES}"
            )));
        }
        let mut direct = vec![u16::MAX; leaves * leaves];
        for i in 0..leaves {
            direct[i * leaves + i] = 0;
        }
        let bottom = p.levels[0].elements();
        for (k, level) in p.levels.iter().enumerate() {
            for e in level.elements() {
                let inside: Vec<usize> = (0..leaves).filter(|&v| bottom[v].is_subset(e)).collect();
                for (ai, &a) in inside.iter().enumerate() {
                    for &b in &inside[ai + 1..] {
                        for idx in [a * leaves + b, b * leaves + a] {
                            direct[idx] = direct[idx].min(k as u16);
                        }
                    }
                }
            }
        }
        for a in 0..leaves {
            for b in a + 1..leaves {
                let chain = self.chain_level(a, b);
                let d = direct[a * leaves + b] as usize;
                if chain != d {
                    self.divergences.push(PDivergence { a, b, chain, direct: d });
                }
            }
        }
        self.direct = Some(direct);
        Ok(())
    }

    fn chain_level(&self, a: usize, b: usize) -> usize {
        if a == b {
            return 0;
        }
        self.chains.partition_point(|row| row[a] != row[b])
    }

    /// `p(V, W)`.
    pub fn level(&self, a: usize, b: usize) -> usize {
        match &self.direct {
            Some(m) => m[a * self.labels.len() + b] as usize,
            None => self.chain_level(a, b),
        }
    }

    fn common_level(&self, members: &[usize]) -> usize {
        let Some(&first) = members.first() else {
            return 0;
        };
        self.chains
            .iter()
            .position(|row| members.iter().all(|&m| row[m] == row[first]))
            .unwrap_or(self.chains.len() - 1)
    }

    /// Largest level `k` with `base^k <= r`.
    fn level_within(&self, r: Dist) -> Option<usize> {
        self.powers.partition_point(|&p| p <= r).checked_sub(1)
    }

    fn compute_distinct(&self) -> Vec<Dist> {
        let n = self.labels.len();
        if let Some(m) = &self.direct {
            let mut out = vec![Dist::ZERO];
            for a in 0..n {
                out.extend((a + 1..n).map(|b| self.powers[m[a * n + b] as usize]));
            }
            out.sort_unstable();
            out.dedup();
            return out;
        }
        let mut out = vec![Dist::ZERO];
        let mut prev = n;
        for (k, row) in self.chains.iter().enumerate() {
            let mut seen = row.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() < prev {
                out.push(self.powers[k]);
            }
            prev = seen.len();
        }
        out
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn base_space(&self) -> &str {
        &self.base_space
    }

    pub fn levels(&self) -> usize {
        self.chains.len()
    }

    pub fn chains(&self) -> &[Vec<u32>] {
        &self.chains
    }

    pub fn divergences(&self) -> &[PDivergence] {
        &self.divergences
    }

    /// Exact strong triangle inequality over all triples, or over `samples`
    /// seeded triples when given; returns the first violating triple.
    pub fn strong_triangle_violation(&self, samples: Option<(u64, u64)>) -> Option<(usize, usize, usize)> {
        let n = self.labels.len();
        let bad = |x: usize, y: usize, z: usize| self.dist(x, z) > self.dist(x, y).max(self.dist(y, z));
        match samples {
            None => (0..n).into_par_iter().find_map_first(|x| {
                for y in 0..n {
                    for z in 0..n {
                        if bad(x, y, z) {
                            return Some((x, y, z));
                        }
                    }
                }
                None
            }),
            Some((count, seed)) => {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                (0..count).find_map(|_| {
                    let (x, y, z) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
                    bad(x, y, z).then_some((x, y, z))
                })
            }
        }
    }
}

impl MetricSpace for UltrametricSpace {
    fn id(&self) -> &str {
        &self.id
    }

    fn len(&self) -> usize {
        self.labels.len()
    }

    fn dist(&self, i: usize, j: usize) -> Dist {
        if i == j {
            Dist::ZERO
        } else {
            self.powers[self.level(i, j)]
        }
    }

    fn label(&self, i: usize) -> String {
        self.labels[i].clone()
    }

    fn diameter(&self) -> Dist {
        self.diameter
    }

    fn diameter_of(&self, members: &[usize]) -> Dist {
        if members.len() < 2 {
            return Dist::ZERO;
        }
        match &self.direct {
            None => self.powers[self.common_level(members)],
            Some(_) => {
                let mut best = Dist::ZERO;
                for (a, &i) in members.iter().enumerate() {
                    for &j in &members[a + 1..] {
                        best = best.max(self.dist(i, j));
                    }
                }
                best
            }
        }
    }

    fn distinct_distances(&self) -> Vec<Dist> {
        self.distinct.clone()
    }

    fn for_each_maximal_set(
        &self,
        r: Dist,
        budget: u64,
        visit: &mut dyn FnMut(&[usize]) -> ControlFlow<()>,
    ) -> Result<Walk> {
        let Some(classes) = self.ball_classes(r) else {
            return crate::cliques::maximal_cliques(self.len(), &|i, j| self.dist(i, j) <= r, budget, visit);
        };
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot = std::collections::HashMap::new();
        for (x, &c) in classes.iter().enumerate() {
            let i = *slot.entry(c).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[i].push(x);
        }
        for g in &groups {
            if visit(g).is_break() {
                return Ok(Walk::Stopped);
            }
        }
        Ok(Walk::Complete)
    }

    fn close_points(&self, x: usize, r: Dist) -> Vec<usize> {
        match (&self.direct, self.level_within(r)) {
            (_, None) => vec![x],
            (None, Some(k)) => {
                let row = &self.chains[k];
                (0..self.len()).filter(|&y| row[y] == row[x]).collect()
            }
            (Some(_), Some(_)) => (0..self.len()).filter(|&y| self.dist(x, y) <= r).collect(),
        }
    }

    fn ball_classes(&self, r: Dist) -> Option<Vec<usize>> {
        if self.direct.is_some() {
            return None;
        }
        Some(match self.level_within(r) {
            None => (0..self.len()).collect(),
            Some(k) => self.chains[k].iter().map(|&e| e as usize).collect(),
        })
    }
}

/// Point chosen inside each bottom element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selector {
    MinPoint,
    Table(Vec<usize>),
}

/// `max d(qU, qV)` over pairs with `d(U, V) <= base^k`, against `mesh(level k)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LevelModulus {
    pub level: usize,
    pub power: Dist,
    pub observed: Dist,
    pub mesh: Dist,
    pub pass: bool,
}

/// The quotient map `q: U_0 -> X` with its verified level moduli.
#[derive(Debug, Clone, Serialize)]
pub struct Quotient {
    #[serde(skip)]
    pub ultrametric: Arc<UltrametricSpace>,
    #[serde(skip)]
    pub map: CoarseMap,
    pub section: Vec<usize>,
    pub modulus: Vec<LevelModulus>,
    pub divergences: Vec<PDivergence>,
}

impl Quotient {
    pub fn domain(&self) -> SpaceRef {
        self.ultrametric.clone()
    }

    pub fn record(&self) -> CoarseMapRecord {
        fit_moduli(&self.map)
    }

    pub fn modulus_holds(&self) -> bool {
        self.modulus.iter().all(|m| m.pass)
    }
}

/// Sends each bottom element to a chosen point inside it.
pub fn quotient_map(p: &PrecodeStructure, selector: &Selector) -> Result<Quotient> {
    let u = Arc::new(UltrametricSpace::build(p)?);
    let bottom = p.levels[0].elements();
    let section: Vec<usize> = match selector {
        Selector::MinPoint => bottom.iter().map(|e| e.min().expect("nonempty element")).collect(),
        Selector::Table(t) => {
            if t.len() != bottom.len() {
                return Err(Error::Precondition(format!(
                    "selector table has {} entries for {} elements",
                    t.len(),
                    bottom.len()
                )));
            }
            if let Some(e) = (0..t.len()).find(|&e| !bottom[e].contains(t[e])) {
                return Err(Error::Precondition(format!("selected point {} is not in element {e}", t[e])));
            }
            t.clone()
        }
    };
    let domain: SpaceRef = u.clone();
    let map = CoarseMap::new(domain, p.space.clone(), section.clone())?;
    let modulus = level_moduli(p, &u, &section);
    Ok(Quotient {
        divergences: u.divergences().to_vec(),
        ultrametric: u,
        map,
        section,
        modulus,
    })
}

fn level_moduli(p: &PrecodeStructure, u: &UltrametricSpace, section: &[usize]) -> Vec<LevelModulus> {
    let x = p.space.as_ref();
    (0..u.levels())
        .into_par_iter()
        .map(|k| {
            let power = u.powers[k];
            let observed = match u.ball_classes(power) {
                Some(classes) => {
                    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
                    for (leaf, &c) in classes.iter().enumerate() {
                        groups.entry(c).or_default().push(section[leaf]);
                    }
                    groups
                        .into_values()
                        .map(|mut g| {
                            g.sort_unstable();
                            g.dedup();
                            x.diameter_of(&g)
                        })
                        .max()
                        .unwrap_or(Dist::ZERO)
                }
                None => {
                    let n = u.len();
                    let mut best = Dist::ZERO;
                    for a in 0..n {
                        for b in a + 1..n {
                            if u.dist(a, b) <= power {
                                best = best.max(x.dist(section[a], section[b]));
                            }
                        }
                    }
                    best
                }
            };
            let mesh = p.levels[k].mesh();
            LevelModulus {
                level: k,
                power,
                observed,
                mesh,
                pass: observed <= mesh,
            }
        })
        .collect()
}

/// `g: X -> U_0`, each point to the first bottom element containing it.
/// Requires the structure to validate as a 1-precode.
pub fn inverse_section(p: &PrecodeStructure, q: &Quotient, budgets: Budgets) -> Result<CoarseMap> {
    require_valid(p, 1, budgets)?;
    let bottom = &p.levels[0];
    CoarseMap::from_fn(p.space.clone(), q.domain(), |x| bottom.incident(x)[0] as usize)
}

/// Coarse equivalence of `U_0` and `X` through `(q, g)` for a 1-precode.
#[derive(Debug, Clone, Serialize)]
pub struct ZeroDimEquivalence {
    pub validation: PrecodeReport,
    pub quotient: Quotient,
    /// `max d(q g x, x)`.
    pub closeness: Dist,
    pub mesh_bottom: Dist,
    /// `g ∘ q` is the identity of `U_0`.
    pub section_identity: bool,
    pub equivalence: EquivalenceReport,
    pub holds: bool,
}

pub fn certify_zero_dim_equivalence(p: &PrecodeStructure, budgets: Budgets) -> Result<ZeroDimEquivalence> {
    let validation = require_valid(p, 1, budgets)?;
    let q = quotient_map(p, &Selector::MinPoint)?;
    let g = inverse_section(p, &q, budgets)?;
    let equivalence = check_coarse_equivalence(&q.map, &g)?;
    let section_identity = (0..q.map.domain().len()).all(|u| g.apply(q.map.apply(u)) == u);
    let mesh_bottom = p.levels[0].mesh();
    let closeness = equivalence.f_after_g;
    Ok(ZeroDimEquivalence {
        holds: section_identity && closeness <= mesh_bottom && q.modulus_holds(),
        validation,
        quotient: q,
        closeness,
        mesh_bottom,
        section_identity,
        equivalence,
    })
}

/// Checks `d_C(U, V) <= (c a) d(qU, qV) + c r0` on every pair of leaves.
#[derive(Debug, Clone, Serialize)]
pub struct AnLowerBound {
    pub a: u64,
    pub c: u64,
    pub r0: u64,
    pub pairs: u64,
    pub violations: u64,
    pub first_violation: Option<(usize, usize)>,
}

pub fn an_lower_bound(q: &Quotient, a: u64, c: u64, r0: u64) -> AnLowerBound {
    let u = q.ultrametric.as_ref();
    let x = q.map.codomain();
    let n = u.len();
    let slope = DistRatio::integer(c * a);
    let (violations, first) = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut count = 0u64;
            let mut first = None;
            for j in i + 1..n {
                let dy = x.dist(q.section[i], q.section[j]);
                if !u.dist(i, j).le_affine(slope, dy, c * r0) {
                    count += 1;
                    first.get_or_insert((i, j));
                }
            }
            (count, first)
        })
        .reduce(|| (0, None), |a, b| (a.0 + b.0, a.1.or(b.1)));
    AnLowerBound {
        a,
        c,
        r0,
        pairs: (n as u64) * (n.saturating_sub(1) as u64) / 2,
        violations,
        first_violation: first,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{FiniteMetricSpace, PointSet};
    use crate::precode::{example_dyadic, example_triadic, PrecodeKind};

    /// Oracle: minimal level with an element containing both leaves, scanning every element.
    fn brute_level(p: &PrecodeStructure, a: usize, b: usize) -> usize {
        let (va, vb) = (p.levels[0].element(a), p.levels[0].element(b));
        (0..p.levels.len())
            .find(|&k| p.levels[k].elements().iter().any(|e| va.is_subset(e) && vb.is_subset(e)))
            .unwrap()
    }

    #[test]
    fn dyadic_distances() {
        let p = example_dyadic(8).unwrap();
        let u = UltrametricSpace::build(&p).unwrap();
        assert_eq!(u.dist(0, 1), Dist::from_int(3));
        assert_eq!(u.dist(1, 2), Dist::from_int(9));
        assert_eq!(u.dist(3, 4), Dist::from_int(27));
        assert_eq!(u.dist(5, 5), Dist::ZERO);
        for a in 0..8 {
            for b in 0..8 {
                if a != b {
                    assert_eq!(u.level(a, b), brute_level(&p, a, b));
                }
            }
        }
        assert_eq!(u.distinct_distances(), vec![Dist::ZERO, Dist::from_int(3), Dist::from_int(9), Dist::from_int(27)]);
        assert_eq!(u.diameter(), Dist::from_int(27));
        assert!(u.strong_triangle_violation(None).is_none());
    }

    #[test]
    fn an_base_matches_asdim_for_three() {
        let p = example_triadic(3).unwrap();
        let mut an = p.clone();
        an.kind = PrecodeKind::An { a: 3, i0: 0 };
        let (b, c) = (UltrametricSpace::build(&p).unwrap(), UltrametricSpace::build(&an).unwrap());
        for i in 0..b.len() {
            for j in 0..b.len() {
                assert_eq!(b.dist(i, j), c.dist(i, j));
            }
        }
    }

    #[test]
    fn overlapping_levels_use_direct_levels_and_flag_divergence() {
        let s = FiniteMetricSpace::interval("s", 0, 3).unwrap().into_ref();
        let levels = vec![
            (0..4).map(PointSet::singleton).collect(),
            vec![PointSet::new([0, 1]), PointSet::new([2, 3])],
            vec![PointSet::new([0, 1, 2]), PointSet::new([1, 2, 3])],
            vec![PointSet::range(0, 4)],
        ];
        let p = PrecodeStructure::new(s, levels, PrecodeKind::Asdim).unwrap();
        assert!(!p.disjoint);
        let u = UltrametricSpace::build(&p).unwrap();
        assert_eq!(u.level(1, 2), 2);
        let pairs: Vec<(usize, usize)> = u.divergences().iter().map(|d| (d.a, d.b)).collect();
        assert_eq!(pairs, vec![(0, 2), (1, 2), (1, 3)]);
        assert!(u.divergences().iter().all(|d| (d.chain, d.direct) == (3, 2)));
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    assert_eq!(u.level(a, b), brute_level(&p, a, b));
                }
            }
        }
    }

    #[test]
    fn quotient_moduli_on_dyadic() {
        let p = example_dyadic(64).unwrap();
        let q = quotient_map(&p, &Selector::MinPoint).unwrap();
        assert!(q.modulus_holds());
        let at9 = q.modulus.iter().find(|m| m.power == Dist::from_int(9)).unwrap();
        assert_eq!(at9.observed, Dist::from_int(3));
        let rec = q.record();
        assert_eq!(rec.moduli.delta_at(Dist::from_int(9)), Dist::from_int(3));
        for k in 0..6u32 {
            assert!(rec.moduli.delta_at(Dist::from_int(3u64.pow(k))) <= Dist::from_int((1 << k) - 1));
        }
    }

    #[test]
    fn selector_must_stay_inside() {
        let p = example_dyadic(4).unwrap();
        let bad = Selector::Table(vec![1, 1, 2, 3]);
        assert!(matches!(quotient_map(&p, &bad), Err(Error::Precondition(_))));
        let other = quotient_map(&p, &Selector::Table(vec![0, 1, 2, 3])).unwrap();
        assert!(other.modulus_holds());
    }

    #[test]
    fn constant_structure_is_a_point_map() {
        let s = FiniteMetricSpace::interval("s", 0, 9).unwrap().into_ref();
        let p = PrecodeStructure::new(s, vec![vec![PointSet::range(0, 10)]], PrecodeKind::Asdim).unwrap();
        let q = quotient_map(&p, &Selector::MinPoint).unwrap();
        assert_eq!(q.map.table(), &[0]);
        assert_eq!(q.ultrametric.len(), 1);
    }

    #[test]
    fn one_point_equivalence() {
        let s = FiniteMetricSpace::interval("pt", 0, 0).unwrap().into_ref();
        let p = PrecodeStructure::new(s, vec![vec![PointSet::singleton(0)]], PrecodeKind::Asdim).unwrap();
        let z = certify_zero_dim_equivalence(&p, Budgets::default()).unwrap();
        assert!(z.holds);
        assert_eq!(z.closeness, Dist::ZERO);
        assert_eq!(z.equivalence.g_after_f, Dist::ZERO);
    }

    #[test]
    fn truncated_dyadic_reaches_multiplicity_one_only_at_the_top() {
        let p = example_dyadic(16).unwrap();
        let q = quotient_map(&p, &Selector::MinPoint).unwrap();
        let rep = require_valid(&p, 1, Budgets::default()).unwrap();
        assert!(rep.schedule.iter().all(|e| e.level == Some(4)));
        assert!(inverse_section(&p, &q, Budgets::default()).is_ok());
    }
}
