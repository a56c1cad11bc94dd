use std::ops::ControlFlow;

use serde::Serialize;

use super::bn::{check_bn, BnCertificate, Bound};
use super::CoarseMap;
use crate::budget::Budgets;
use crate::dist::{Dist, DistRatio};
use crate::error::{Error, Result};
use crate::metric::MetricSpace;

#[derive(Debug, Clone, Serialize)]
pub struct ClosureScale {
    pub r: Dist,
    /// The predicted bound is the sum of these terms.
    pub predicted: Vec<Dist>,
    pub verified: Bound,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosureReport {
    pub parts: usize,
    pub scales: Vec<ClosureScale>,
    #[serde(skip)]
    pub map: CoarseMap,
}

impl ClosureReport {
    pub fn holds(&self) -> bool {
        self.scales.iter().all(|s| s.holds)
    }
}

fn bound_holds(verified: &Bound, predicted: &[Dist]) -> bool {
    let v = verified.upper();
    match predicted {
        [a] => v <= *a,
        [a, b] => v.le_sum(*a, *b),
        _ => false,
    }
}

fn certified(cert: &BnCertificate, r: Dist, which: &str) -> Result<Dist> {
    cert.d_for(r)
        .ok_or_else(|| Error::CertificateAbsent(format!("{which} has no certified scale at or above {r}")))
}

/// `g ∘ f` for `f` with `(B)_n` and `g` with `(B)_m`: predicts parts `n m`
/// with `d(r) = d_f(d_g(r))`, then re-checks every scale of `g`'s certificate.
pub fn compose_bn(
    f: &CoarseMap,
    f_cert: &BnCertificate,
    g: &CoarseMap,
    g_cert: &BnCertificate,
    budgets: Budgets,
) -> Result<ClosureReport> {
    let map = f.then(g)?;
    let parts = f_cert.n * g_cert.n;
    let mut scales = Vec::new();
    for gs in &g_cert.scales {
        let dg = gs.d.upper();
        let predicted = certified(f_cert, dg, "inner map")?;
        let verified = check_bn(&map, parts, gs.r, budgets)?.d;
        scales.push(ClosureScale {
            r: gs.r,
            holds: bound_holds(&verified, &[predicted]),
            predicted: vec![predicted],
            verified,
        });
    }
    Ok(ClosureReport { parts, scales, map })
}

/// `f × g` on max-metric products: predicts `n m` parts with
/// `d(r) <= d_f(r) + d_g(r)`, then re-checks at every common scale.
pub fn product_bn(
    f: &CoarseMap,
    f_cert: &BnCertificate,
    g: &CoarseMap,
    g_cert: &BnCertificate,
    budgets: Budgets,
) -> Result<ClosureReport> {
    let map = CoarseMap::product(f, g);
    let parts = f_cert.n * g_cert.n;
    let cap = map.codomain().scale_cap();
    let mut rs: Vec<Dist> = f_cert.scales.iter().chain(&g_cert.scales).map(|s| s.r).filter(|&r| r <= cap).collect();
    rs.sort_unstable();
    rs.dedup();
    let mut scales = Vec::new();
    for r in rs {
        let predicted = vec![certified(f_cert, r, "left factor")?, certified(g_cert, r, "right factor")?];
        let verified = check_bn(&map, parts, r, budgets)?.d;
        scales.push(ClosureScale {
            r,
            holds: bound_holds(&verified, &predicted),
            predicted,
            verified,
        });
    }
    Ok(ClosureReport { parts, scales, map })
}

#[derive(Debug, Clone, Serialize)]
pub struct BLinearScale {
    pub r: Dist,
    /// Largest over maximal sets `B` of the least diameter of a selection `A` with `f(A) = B`.
    pub selection_diameter: Dist,
    pub exact: bool,
    pub worst_set: Vec<usize>,
    pub selection: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BLinearCertificate {
    /// `max selection_diameter / r` over the schedule.
    pub d: DistRatio,
    pub scales: Vec<BLinearScale>,
}

struct Selector<'a> {
    space: &'a dyn MetricSpace,
    fibers: Vec<&'a [usize]>,
    best: Dist,
    best_pick: Vec<usize>,
    pick: Vec<usize>,
    nodes: u64,
    budget: u64,
}

impl Selector<'_> {
    fn search(&mut self, depth: usize, current: Dist) -> bool {
        if depth == self.fibers.len() {
            if current < self.best || self.best_pick.is_empty() {
                self.best = current;
                self.best_pick = self.pick.clone();
            }
            return true;
        }
        for &x in self.fibers[depth] {
            self.nodes += 1;
            if self.nodes > self.budget {
                return false;
            }
            let spread = self.pick.iter().map(|&p| self.space.dist(p, x)).max().unwrap_or(Dist::ZERO).max(current);
            if !self.best_pick.is_empty() && spread >= self.best {
                continue;
            }
            self.pick.push(x);
            let ok = self.search(depth + 1, spread);
            self.pick.pop();
            if !ok {
                return false;
            }
        }
        true
    }
}

fn min_selection(space: &dyn MetricSpace, fibers: &[Vec<usize>], set: &[usize], budget: u64) -> (Dist, Vec<usize>, bool) {
    let mut order: Vec<&[usize]> = set.iter().map(|&y| fibers[y].as_slice()).collect();
    order.sort_by_key(|f| f.len());
    // greedy: around each anchor of the smallest fiber take the nearest point of every other fiber
    let mut best: Option<(Dist, Vec<usize>)> = None;
    for &a in order[0] {
        let pick: Vec<usize> = std::iter::once(a)
            .chain(order[1..].iter().map(|f| *f.iter().min_by_key(|&&x| (space.dist(a, x), x)).expect("nonempty fiber")))
            .collect();
        let mut sorted = pick.clone();
        sorted.sort_unstable();
        let d = space.diameter_of(&sorted);
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, pick));
        }
    }
    let (greedy_d, greedy_pick) = best.expect("nonempty set");
    let mut sel = Selector {
        space,
        fibers: order,
        best: greedy_d,
        best_pick: greedy_pick,
        pick: Vec::new(),
        nodes: 0,
        budget,
    };
    let exact = sel.search(0, Dist::ZERO);
    let mut pick = sel.best_pick;
    pick.sort_unstable();
    (sel.best, pick, exact)
}

/// For a surjective `f`, the least ratio `d` such that every set of diameter
/// at most `r` has a preimage selection of diameter at most `d r`, over `scales`.
pub fn check_b_linear(f: &CoarseMap, scales: &[Dist], budgets: Budgets) -> Result<BLinearCertificate> {
    if !f.is_surjective() {
        return Err(Error::Precondition("map is not surjective".into()));
    }
    let fibers = f.fibers();
    let mut out = Vec::new();
    let mut ratio = DistRatio::ZERO;
    for &r in scales.iter().filter(|&&r| r > Dist::ZERO) {
        let mut worst: Option<BLinearScale> = None;
        let mut exact_all = true;
        f.codomain().for_each_maximal_set(r, budgets.clique_expansions, &mut |set| {
            let (d, pick, exact) = min_selection(f.domain().as_ref(), &fibers, set, budgets.coloring_nodes);
            exact_all &= exact;
            if worst.as_ref().is_none_or(|w| d > w.selection_diameter) {
                worst = Some(BLinearScale {
                    r,
                    selection_diameter: d,
                    exact,
                    worst_set: set.to_vec(),
                    selection: pick,
                });
            }
            ControlFlow::Continue(())
        })?;
        if let Some(mut w) = worst {
            w.exact = exact_all;
            ratio = ratio.max(DistRatio::new(w.selection_diameter, r));
            out.push(w);
        }
    }
    Ok(BLinearCertificate { d: ratio, scales: out })
}
