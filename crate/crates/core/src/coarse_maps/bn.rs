use std::ops::ControlFlow;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use super::CoarseMap;
use crate::budget::Budgets;
use crate::coloring::{color_with, Graph};
use crate::dist::{Dist, DistRatio};
use crate::error::{Error, Result};
use crate::fit::{fit_upper, upper_points, AffineFit};
use crate::metric::{scale_schedule, MetricSpace};

const MAX_TRANSCRIPTS: usize = 16;

/// A certified value, or bounds when a search budget ran out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bound {
    Exact { value: Dist },
    Interval { lower: Dist, upper: Dist },
}

impl Bound {
    pub fn upper(&self) -> Dist {
        match *self {
            Bound::Exact { value } => value,
            Bound::Interval { upper, .. } => upper,
        }
    }

    pub fn lower(&self) -> Dist {
        match *self {
            Bound::Exact { value } => value,
            Bound::Interval { lower, .. } => lower,
        }
    }

    pub fn exact(&self) -> Option<Dist> {
        match *self {
            Bound::Exact { value } => Some(value),
            Bound::Interval { .. } => None,
        }
    }
}

/// A codomain set `B` and a split of its preimage into bounded parts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Decomposition {
    pub set: Vec<usize>,
    pub parts: Vec<Vec<usize>>,
    pub diameters: Vec<Dist>,
}

/// A set whose preimage admits no split at the next smaller candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Tightness {
    pub set: Vec<usize>,
    pub infeasible_at: Dist,
}

#[derive(Debug, Clone, Serialize)]
pub struct BnScale {
    pub r: Dist,
    pub d: Bound,
    pub sets_checked: usize,
    pub complete: bool,
    pub tight: Option<Tightness>,
    pub transcripts: Vec<Decomposition>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BnCertificate {
    pub n: usize,
    pub codomain_diameter: Dist,
    pub scales: Vec<BnScale>,
}

impl BnCertificate {
    /// Certified `d` for scale `r`: the value at the smallest certified scale
    /// `>= r`. Scales past the codomain diameter all behave alike.
    pub fn d_for(&self, r: Dist) -> Option<Dist> {
        let r = r.min(self.codomain_diameter);
        self.scales
            .iter()
            .filter(|s| s.r >= r)
            .min_by_key(|s| s.r)
            .map(|s| s.d.upper())
    }
}

enum Split {
    Feasible(Vec<Vec<usize>>),
    Infeasible,
}

struct Checker<'a> {
    domain: &'a dyn MetricSpace,
    n: usize,
    candidates: Vec<Dist>,
    classes: Option<Vec<Vec<usize>>>,
    budgets: Budgets,
}

impl<'a> Checker<'a> {
    fn new(f: &'a CoarseMap, n: usize, budgets: Budgets) -> Checker<'a> {
        let domain = f.domain().as_ref();
        let candidates = domain.distinct_distances();
        let classes = domain
            .ball_classes(candidates[0])
            .map(|_| candidates.iter().map(|&d| domain.ball_classes(d).expect("classes")).collect());
        Checker {
            domain,
            n,
            candidates,
            classes,
            budgets,
        }
    }

    fn index_of(&self, d: Dist) -> usize {
        self.candidates.partition_point(|&c| c < d)
    }

    fn split(&self, pre: &[usize], idx: usize) -> Result<Split> {
        let d = self.candidates[idx];
        if pre.is_empty() {
            return Ok(Split::Feasible(Vec::new()));
        }
        if let Some(classes) = &self.classes {
            let labels = &classes[idx];
            let mut keys: Vec<usize> = pre.iter().map(|&x| labels[x]).collect();
            keys.sort_unstable();
            keys.dedup();
            if keys.len() > self.n {
                return Ok(Split::Infeasible);
            }
            let parts = keys
                .iter()
                .map(|&k| pre.iter().copied().filter(|&x| labels[x] == k).collect())
                .collect();
            return Ok(Split::Feasible(parts));
        }
        match self.n {
            0 => Ok(Split::Infeasible),
            1 => Ok(if self.domain.diameter_of(pre) <= d {
                Split::Feasible(vec![pre.to_vec()])
            } else {
                Split::Infeasible
            }),
            n => {
                let g = Graph::from_predicate(pre.len(), |i, j| self.domain.dist(pre[i], pre[j]) > d);
                Ok(match color_with(&g, n, self.budgets.coloring_nodes)? {
                    None => Split::Infeasible,
                    Some(colors) => {
                        let k = colors.iter().copied().max().map_or(0, |m| m + 1);
                        let mut parts = vec![Vec::new(); k];
                        for (i, &c) in colors.iter().enumerate() {
                            parts[c].push(pre[i]);
                        }
                        parts.retain(|p: &Vec<usize>| !p.is_empty());
                        Split::Feasible(parts)
                    }
                })
            }
        }
    }

    fn feasible(&self, pre: &[usize], idx: usize) -> Result<bool> {
        Ok(matches!(self.split(pre, idx)?, Split::Feasible(_)))
    }

    /// Minimal feasible index above `known_infeasible`, searching up to `hi` (feasible).
    fn minimal_index(&self, pre: &[usize], known_infeasible: usize, mut hi: usize) -> Result<usize> {
        let mut lo = known_infeasible;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.feasible(pre, mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    fn decomposition(&self, set: &[usize], pre: &[usize], idx: usize) -> Result<Option<Decomposition>> {
        Ok(match self.split(pre, idx)? {
            Split::Feasible(parts) => Some(Decomposition {
                set: set.to_vec(),
                diameters: parts.iter().map(|p| self.domain.diameter_of(p)).collect(),
                parts,
            }),
            Split::Infeasible => None,
        })
    }
}

enum PerSet {
    AtMost,
    Exact(usize),
    Unknown { lo: usize, hi: usize },
}

fn preimage(fibers: &[Vec<usize>], set: &[usize]) -> Vec<usize> {
    let mut pre: Vec<usize> = set.iter().flat_map(|&y| fibers[y].iter().copied()).collect();
    pre.sort_unstable();
    pre
}

/// The minimal `d` such that the preimage of every subset of the codomain of
/// diameter at most `r` splits into at most `n` parts of diameter at most `d`.
///
/// Candidates for `d` are the realized distances of the domain. Only
/// inclusion-maximal subsets are enumerated.
pub fn check_bn(f: &CoarseMap, n: usize, r: Dist, budgets: Budgets) -> Result<BnScale> {
    if n == 0 {
        return Err(Error::Precondition("at least one part is required".into()));
    }
    let cap = f.codomain().scale_cap();
    if r > cap {
        return Err(Error::Precondition(format!("scale {r} exceeds the scale cap {cap}")));
    }
    let checker = Checker::new(f, n, budgets);
    let fibers = f.fibers();
    let mut sets: Vec<Vec<usize>> = Vec::new();
    let complete = match f.codomain().for_each_maximal_set(r, budgets.clique_expansions, &mut |s| {
        sets.push(s.to_vec());
        ControlFlow::Continue(())
    }) {
        Ok(_) => true,
        Err(e) if e.is_budget() => false,
        Err(e) => return Err(e),
    };
    let top = checker.candidates.len() - 1;
    let hint = AtomicUsize::new(0);
    let outcomes: Vec<Result<PerSet>> = sets
        .par_iter()
        .map(|set| {
            let pre = preimage(&fibers, set);
            let start = hint.load(Ordering::Relaxed);
            let upper = checker.index_of(checker.domain.diameter_of(&pre));
            if start >= upper {
                return Ok(PerSet::AtMost);
            }
            match checker.feasible(&pre, start) {
                Ok(true) => return Ok(PerSet::AtMost),
                Ok(false) => {}
                Err(e) if e.is_budget() => return Ok(PerSet::Unknown { lo: 0, hi: upper }),
                Err(e) => return Err(e),
            }
            match checker.minimal_index(&pre, start, upper) {
                Ok(idx) => {
                    hint.fetch_max(idx, Ordering::Relaxed);
                    Ok(PerSet::Exact(idx))
                }
                Err(e) if e.is_budget() => Ok(PerSet::Unknown { lo: start + 1, hi: upper }),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut exact = 0usize;
    let mut unknown_lo = 0usize;
    let mut unknown_hi = 0usize;
    let mut any_unknown = false;
    for o in outcomes {
        match o? {
            PerSet::AtMost => {}
            PerSet::Exact(i) => exact = exact.max(i),
            PerSet::Unknown { lo, hi } => {
                any_unknown = true;
                unknown_lo = unknown_lo.max(lo);
                unknown_hi = unknown_hi.max(hi);
            }
        }
    }
    let d = if any_unknown || !complete {
        let upper = if complete { exact.max(unknown_hi) } else { top };
        Bound::Interval {
            lower: checker.candidates[exact.max(unknown_lo)],
            upper: checker.candidates[upper],
        }
    } else {
        Bound::Exact {
            value: checker.candidates[exact],
        }
    };
    let d_idx = checker.index_of(d.upper());
    let mut tight = None;
    if d.exact().is_some() && d_idx > 0 {
        for set in &sets {
            let pre = preimage(&fibers, set);
            if let Ok(false) = checker.feasible(&pre, d_idx - 1) {
                tight = Some((set.clone(), pre));
                break;
            }
        }
    }
    let mut transcripts = Vec::new();
    if let Some((set, pre)) = &tight {
        if let Some(dec) = checker.decomposition(set, pre, d_idx)? {
            transcripts.push(dec);
        }
    }
    for set in &sets {
        if transcripts.len() >= MAX_TRANSCRIPTS {
            break;
        }
        if tight.as_ref().is_some_and(|(s, _)| s == set) {
            continue;
        }
        let pre = preimage(&fibers, set);
        match checker.decomposition(set, &pre, d_idx) {
            Ok(Some(dec)) => transcripts.push(dec),
            Ok(None) => {
                return Err(Error::Internal(format!("set {set:?} has no split at the certified value")))
            }
            Err(e) if e.is_budget() => {}
            Err(e) => return Err(e),
        }
    }
    Ok(BnScale {
        r,
        d,
        sets_checked: sets.len(),
        complete,
        tight: tight.map(|(set, _)| Tightness {
            set,
            infeasible_at: checker.candidates[d_idx - 1],
        }),
        transcripts,
    })
}

pub fn check_bn_schedule(f: &CoarseMap, n: usize, scales: &[Dist], budgets: Budgets) -> Result<BnCertificate> {
    let scales = scales
        .iter()
        .map(|&r| check_bn(f, n, r, budgets))
        .collect::<Result<Vec<_>>>()?;
    Ok(BnCertificate {
        n,
        codomain_diameter: f.codomain().diameter(),
        scales,
    })
}

/// `c(r0) = max d(r) / r` over scheduled `r >= r0`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailConstant {
    pub r0: Dist,
    pub c: DistRatio,
}

#[derive(Debug, Clone, Serialize)]
pub struct CnCertificate {
    pub n: usize,
    /// Linear form: `d(r) <= c r` for every scheduled `r >= r0`.
    pub c: DistRatio,
    pub r0: Dist,
    pub tail: Vec<TailConstant>,
    /// Affine form: `d(r) <= c' r + d'` for every scheduled `r`.
    pub affine: AffineFit,
    pub note: &'static str,
    pub bn: BnCertificate,
}

/// Runs `check_bn` over the geometric schedule of the codomain and fits both
/// the linear and the affine control forms.
pub fn check_cn(f: &CoarseMap, n: usize, budgets: Budgets) -> Result<CnCertificate> {
    let scales: Vec<Dist> = scale_schedule(f.codomain().scale_cap())
        .into_iter()
        .filter(|&r| r > Dist::ZERO)
        .collect();
    check_cn_on(f, n, &scales, budgets)
}

pub(crate) fn check_cn_on(f: &CoarseMap, n: usize, scales: &[Dist], budgets: Budgets) -> Result<CnCertificate> {
    if scales.is_empty() {
        return Err(Error::Precondition("empty scale schedule".into()));
    }
    let bn = check_bn_schedule(f, n, scales, budgets)?;
    let mut tail: Vec<TailConstant> = Vec::new();
    let mut running = DistRatio::ZERO;
    for s in bn.scales.iter().rev() {
        running = running.max(DistRatio::new(s.d.upper(), s.r));
        tail.push(TailConstant { r0: s.r, c: running });
    }
    tail.reverse();
    let table: Vec<(Dist, Dist)> = bn.scales.iter().map(|s| (s.r, s.d.upper())).collect();
    Ok(CnCertificate {
        n,
        c: tail[0].c,
        r0: tail[0].r0,
        tail,
        affine: fit_upper(&upper_points(&table)),
        note: "linear and affine control forms are both reported; neither is preferred",
        bn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{FiniteMetricSpace, SpaceRef};

    fn line(id: &str, lo: i64, hi: i64) -> SpaceRef {
        FiniteMetricSpace::interval(id, lo, hi).unwrap().into_ref()
    }

    /// Oracle: smallest realized d such that every run of r+1 codomain points
    /// has a preimage splitting into n parts, by trying all assignments.
    fn brute_bn(f: &CoarseMap, n: usize, r: usize) -> Dist {
        let dom = f.domain();
        let mut cands = dom.distinct_distances();
        cands.sort();
        let m = f.codomain().len();
        let fibers = f.fibers();
        let ok = |d: Dist| {
            (0..m.saturating_sub(r).max(1)).all(|s| {
                let set: Vec<usize> = (s..(s + r + 1).min(m)).collect();
                let pre: Vec<usize> = set.iter().flat_map(|&y| fibers[y].clone()).collect();
                let total = n.pow(pre.len() as u32);
                (0..total).any(|code| {
                    let part = |i: usize| code / n.pow(i as u32) % n;
                    (0..pre.len()).all(|i| (0..pre.len()).all(|j| part(i) != part(j) || dom.dist(pre[i], pre[j]) <= d))
                })
            })
        };
        cands.into_iter().find(|&d| ok(d)).unwrap()
    }

    #[test]
    fn identity_gives_r() {
        let s = line("z", 0, 30);
        let id = CoarseMap::identity(s);
        for n in 1..3 {
            for r in [1u64, 2, 5, 9] {
                let b = check_bn(&id, n, Dist::from_int(r), Budgets::default()).unwrap();
                if n == 1 {
                    assert_eq!(b.d, Bound::Exact { value: Dist::from_int(r) });
                } else {
                    assert!(b.d.upper() <= Dist::from_int(r));
                }
            }
        }
    }

    #[test]
    fn constant_map_needs_the_whole_domain() {
        let a = line("a", 0, 12);
        let b = line("b", 0, 3);
        let f = CoarseMap::constant(a, b, 2).unwrap();
        let res = check_bn(&f, 1, Dist::ONE, Budgets::default()).unwrap();
        assert_eq!(res.d, Bound::Exact { value: Dist::from_int(12) });
        let t = res.tight.unwrap();
        assert_eq!(t.infeasible_at, Dist::from_int(11));
    }

    #[test]
    fn folding_map_matches_brute_force() {
        let a = line("a", 0, 11);
        let b = line("b", 0, 5);
        // fold: x and 11 - x land on the same point
        let f = CoarseMap::from_fn(a, b, |x| x.min(11 - x)).unwrap();
        for n in 1..=3 {
            for r in 0..4usize {
                let got = check_bn(&f, n, Dist::from_int(r as u64), Budgets::default()).unwrap();
                assert_eq!(got.d.exact(), Some(brute_bn(&f, n, r)), "n={n} r={r}");
                for dec in &got.transcripts {
                    assert!(dec.parts.len() <= n);
                    assert!(dec.diameters.iter().all(|&d| d <= got.d.upper()));
                }
            }
        }
    }

    #[test]
    fn doubling_map_cn() {
        let a = line("a", 0, 40);
        let b = line("b", 0, 80);
        let f = CoarseMap::from_fn(a, b, |x| 2 * x).unwrap();
        let cert = check_cn(&f, 1, Budgets::default()).unwrap();
        for s in &cert.bn.scales {
            assert_eq!(s.d.exact(), Some(Dist::from_int(s.r.as_int().unwrap() / 2)));
        }
        assert!(cert.c <= DistRatio::integer(1));
    }

    #[test]
    fn coloring_budget_yields_interval() {
        let pts: Vec<Vec<i64>> = (0..9).map(|i| vec![(i * 5) % 9, (i * 2) % 9]).collect();
        let dom = FiniteMetricSpace::from_points("p", &pts, crate::metric::Norm::L1).unwrap().into_ref();
        let cod = line("c", 0, 0);
        let f = CoarseMap::constant(dom, cod, 0).unwrap();
        let tiny = Budgets {
            clique_expansions: 1_000,
            coloring_nodes: 0,
        };
        let res = check_bn(&f, 3, Dist::ZERO, tiny).unwrap();
        match res.d {
            Bound::Interval { lower, upper } => assert!(lower <= upper),
            Bound::Exact { .. } => {}
        }
    }

    #[test]
    fn scale_above_cap_is_rejected() {
        let s = line("z", 0, 3);
        let id = CoarseMap::identity(s);
        assert!(matches!(
            check_bn(&id, 1, Dist::from_int(4), Budgets::default()),
            Err(Error::Precondition(_))
        ));
    }
}
