//! Maps between finite metric spaces: moduli, closeness, and the
//! finite-to-one decomposition conditions.

mod bn;
mod closure;

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{Dist, DistRatio};
use crate::error::{Error, Result};
use crate::fit::{fit_two_sided, fit_upper, lower_points, upper_points, AffineFit};
use crate::metric::{check_index, check_same_space, MetricSpace, ProductSpace, SpaceRef};

pub use bn::{check_bn, check_bn_schedule, check_cn, BnCertificate, BnScale, Bound, CnCertificate, Decomposition, TailConstant, Tightness};
pub use closure::{check_b_linear, compose_bn, product_bn, BLinearCertificate, BLinearScale, ClosureReport, ClosureScale};

/// A total function between two finite spaces, stored as a table.
#[derive(Clone)]
pub struct CoarseMap {
    domain: SpaceRef,
    codomain: SpaceRef,
    table: Vec<usize>,
}

impl std::fmt::Debug for CoarseMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoarseMap")
            .field("domain", &self.domain.id())
            .field("codomain", &self.codomain.id())
            .field("table", &self.table)
            .finish()
    }
}

impl CoarseMap {
    pub fn new(domain: SpaceRef, codomain: SpaceRef, table: Vec<usize>) -> Result<CoarseMap> {
        if table.len() != domain.len() {
            return Err(Error::InvalidSpace(format!(
                "map table has {} entries for a domain of {} points",
                table.len(),
                domain.len()
            )));
        }
        for &y in &table {
            check_index(codomain.as_ref(), y)?;
        }
        Ok(CoarseMap { domain, codomain, table })
    }

    pub fn identity(space: SpaceRef) -> CoarseMap {
        let table = (0..space.len()).collect();
        CoarseMap {
            domain: space.clone(),
            codomain: space,
            table,
        }
    }

    pub fn constant(domain: SpaceRef, codomain: SpaceRef, y: usize) -> Result<CoarseMap> {
        let n = domain.len();
        CoarseMap::new(domain, codomain, vec![y; n])
    }

    pub fn from_fn(domain: SpaceRef, codomain: SpaceRef, f: impl Fn(usize) -> usize) -> Result<CoarseMap> {
        let table = (0..domain.len()).map(f).collect();
        CoarseMap::new(domain, codomain, table)
    }

    #[inline]
    pub fn apply(&self, x: usize) -> usize {
        self.table[x]
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    pub fn domain(&self) -> &SpaceRef {
        &self.domain
    }

    pub fn codomain(&self) -> &SpaceRef {
        &self.codomain
    }

    /// Preimage of every codomain point, each sorted.
    pub fn fibers(&self) -> Vec<Vec<usize>> {
        let mut fibers = vec![Vec::new(); self.codomain.len()];
        for (x, &y) in self.table.iter().enumerate() {
            fibers[y].push(x);
        }
        fibers
    }

    pub fn max_fiber(&self) -> usize {
        self.fibers().iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_surjective(&self) -> bool {
        self.fibers().iter().all(|f| !f.is_empty())
    }

    /// `g ∘ self`.
    pub fn then(&self, g: &CoarseMap) -> Result<CoarseMap> {
        check_same_space(g.domain.as_ref(), self.codomain.as_ref())?;
        Ok(CoarseMap {
            domain: self.domain.clone(),
            codomain: g.codomain.clone(),
            table: self.table.iter().map(|&y| g.table[y]).collect(),
        })
    }

    /// `f × g` between max-metric products.
    pub fn product(f: &CoarseMap, g: &CoarseMap) -> CoarseMap {
        let domain = ProductSpace::new(f.domain.clone(), g.domain.clone());
        let codomain = ProductSpace::new(f.codomain.clone(), g.codomain.clone());
        let table = (0..domain.len())
            .map(|i| {
                let (a, b) = domain.split(i);
                codomain.index(f.apply(a), g.apply(b))
            })
            .collect();
        CoarseMap {
            domain: Arc::new(domain),
            codomain: Arc::new(codomain),
            table,
        }
    }

    /// Largest distance from a codomain point to the image.
    pub fn density_radius(&self) -> Dist {
        let image: Vec<usize> = {
            let mut v = self.table.clone();
            v.sort_unstable();
            v.dedup();
            v
        };
        (0..self.codomain.len())
            .into_par_iter()
            .map(|y| image.iter().map(|&z| self.codomain.dist(y, z)).min().unwrap_or(Dist::ZERO))
            .max()
            .unwrap_or(Dist::ZERO)
    }

    pub fn to_file(&self) -> MapFile {
        MapFile {
            domain: self.domain.id().to_string(),
            codomain: self.codomain.id().to_string(),
            table: self.table.clone(),
        }
    }

    pub fn from_file(domain: SpaceRef, codomain: SpaceRef, file: MapFile) -> Result<CoarseMap> {
        for (expected, found) in [(domain.id(), &file.domain), (codomain.id(), &file.codomain)] {
            if expected != found {
                return Err(Error::SpaceMismatch {
                    expected: expected.to_string(),
                    found: found.clone(),
                });
            }
        }
        CoarseMap::new(domain, codomain, file.table)
    }
}

/// JSON form of a map: `{ "domain", "codomain", "table": [y per x] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapFile {
    pub domain: String,
    pub codomain: String,
    pub table: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ModulusEntry {
    pub r: Dist,
    pub value: Dist,
}

/// Quasi-isometry constants: `d/c - b <= d(fx, fx') <= c d + b`, image `density`-dense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QuasiIsometryFit {
    pub constants: AffineFit,
    pub density: Dist,
}

#[derive(Debug, Clone, Serialize)]
pub struct Moduli {
    /// `r -> max d(fx, fx')` over `d(x, x') <= r`, at realized domain distances.
    pub delta: Vec<ModulusEntry>,
    /// `r -> min d(fx, fx')` over `d(x, x') >= r`.
    pub gamma: Vec<ModulusEntry>,
    /// `s -> max d(x, x')` over `d(fx, fx') <= s`, at realized image distances.
    pub preimage_spread: Vec<ModulusEntry>,
    pub lipschitz: Option<DistRatio>,
    pub asymptotic_lipschitz: AffineFit,
    pub quasi_isometry: QuasiIsometryFit,
}

impl Moduli {
    /// `delta` evaluated at an arbitrary scale (value at the largest realized `r' <= r`).
    pub fn delta_at(&self, r: Dist) -> Dist {
        let i = self.delta.partition_point(|e| e.r <= r);
        if i == 0 {
            Dist::ZERO
        } else {
            self.delta[i - 1].value
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoarseMapRecord {
    pub domain: String,
    pub codomain: String,
    pub table: Vec<usize>,
    pub moduli: Moduli,
    #[serde(skip)]
    pub map: CoarseMap,
}

#[derive(Default)]
struct PairStats {
    // domain distance -> (max, min) image distance
    by_dx: HashMap<Dist, (Dist, Dist)>,
    // image distance -> max domain distance
    by_dy: HashMap<Dist, Dist>,
}

impl PairStats {
    fn add(&mut self, dx: Dist, dy: Dist) {
        let e = self.by_dx.entry(dx).or_insert((dy, dy));
        e.0 = e.0.max(dy);
        e.1 = e.1.min(dy);
        let s = self.by_dy.entry(dy).or_insert(dx);
        *s = (*s).max(dx);
    }

    fn merge(mut self, other: PairStats) -> PairStats {
        for (dx, (hi, lo)) in other.by_dx {
            let e = self.by_dx.entry(dx).or_insert((hi, lo));
            e.0 = e.0.max(hi);
            e.1 = e.1.min(lo);
        }
        for (dy, dx) in other.by_dy {
            let s = self.by_dy.entry(dy).or_insert(dx);
            *s = (*s).max(dx);
        }
        self
    }
}

/// Exact empirical moduli of `f` and the fitted Lipschitz, asymptotically
/// Lipschitz and quasi-isometry constants.
pub fn fit_moduli(f: &CoarseMap) -> CoarseMapRecord {
    let n = f.domain.len();
    let stats = (0..n)
        .into_par_iter()
        .fold(PairStats::default, |mut acc, x| {
            for x2 in x..n {
                acc.add(f.domain.dist(x, x2), f.codomain.dist(f.apply(x), f.apply(x2)));
            }
            acc
        })
        .reduce(PairStats::default, PairStats::merge);
    let mut per_dx: Vec<(Dist, Dist, Dist)> = stats.by_dx.into_iter().map(|(dx, (hi, lo))| (dx, hi, lo)).collect();
    per_dx.sort_unstable();
    let mut delta = Vec::with_capacity(per_dx.len());
    let mut running = Dist::ZERO;
    for &(r, hi, _) in &per_dx {
        running = running.max(hi);
        delta.push(ModulusEntry { r, value: running });
    }
    let mut gamma = vec![
        ModulusEntry {
            r: Dist::ZERO,
            value: Dist::ZERO
        };
        per_dx.len()
    ];
    let mut running: Option<Dist> = None;
    for (i, &(r, _, lo)) in per_dx.iter().enumerate().rev() {
        let v = running.map_or(lo, |m| m.min(lo));
        running = Some(v);
        gamma[i] = ModulusEntry { r, value: v };
    }
    let mut per_dy: Vec<(Dist, Dist)> = stats.by_dy.into_iter().collect();
    per_dy.sort_unstable();
    let mut preimage_spread = Vec::with_capacity(per_dy.len());
    let mut running = Dist::ZERO;
    for (s, dx) in per_dy {
        running = running.max(dx);
        preimage_spread.push(ModulusEntry { r: s, value: running });
    }
    let lipschitz = per_dx
        .iter()
        .filter(|e| e.0 > Dist::ZERO)
        .map(|&(dx, hi, _)| DistRatio::new(hi, dx))
        .max();
    let positive: Vec<(Dist, Dist, Dist)> = per_dx.iter().copied().filter(|e| e.0 > Dist::ZERO).collect();
    let upper: Vec<(Dist, Dist)> = positive.iter().map(|&(dx, hi, _)| (dx, hi)).collect();
    let lower: Vec<(Dist, Dist)> = positive.iter().map(|&(dx, _, lo)| (dx, lo)).collect();
    let up = upper_points(&upper);
    let asymptotic_lipschitz = fit_upper(&up);
    let quasi_isometry = QuasiIsometryFit {
        constants: fit_two_sided(&up, &lower_points(&lower)),
        density: f.density_radius(),
    };
    CoarseMapRecord {
        domain: f.domain.id().to_string(),
        codomain: f.codomain.id().to_string(),
        table: f.table.clone(),
        moduli: Moduli {
            delta,
            gamma,
            preimage_spread,
            lipschitz,
            asymptotic_lipschitz,
            quasi_isometry,
        },
        map: f.clone(),
    }
}

/// Smallest `S` with `d(f x, g x) <= S` for every `x`.
pub fn check_close(f: &CoarseMap, g: &CoarseMap) -> Result<Dist> {
    check_same_space(g.domain.as_ref(), f.domain.as_ref())?;
    check_same_space(g.codomain.as_ref(), f.codomain.as_ref())?;
    Ok((0..f.domain.len())
        .map(|x| f.codomain.dist(f.apply(x), g.apply(x)))
        .max()
        .unwrap_or(Dist::ZERO))
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    /// `d(f g y, y) <= S` on the codomain of `f`.
    pub f_after_g: Dist,
    /// `d(g f x, x) <= S` on the domain of `f`.
    pub g_after_f: Dist,
    pub f: CoarseMapRecord,
    pub g: CoarseMapRecord,
    /// Both closeness constants lie within the respective scale caps.
    pub within_scale_cap: bool,
}

/// Closeness of `f ∘ g` and `g ∘ f` to the identities, plus both moduli.
pub fn check_coarse_equivalence(f: &CoarseMap, g: &CoarseMap) -> Result<EquivalenceReport> {
    check_same_space(g.domain.as_ref(), f.codomain.as_ref())?;
    check_same_space(g.codomain.as_ref(), f.domain.as_ref())?;
    let fg = g.then(f)?;
    let gf = f.then(g)?;
    let f_after_g = check_close(&fg, &CoarseMap::identity(f.codomain.clone()))?;
    let g_after_f = check_close(&gf, &CoarseMap::identity(f.domain.clone()))?;
    Ok(EquivalenceReport {
        f_after_g,
        g_after_f,
        within_scale_cap: f_after_g <= f.codomain.scale_cap() && g_after_f <= f.domain.scale_cap(),
        f: fit_moduli(f),
        g: fit_moduli(g),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::Rational;
    use crate::metric::FiniteMetricSpace;
    use proptest::prelude::*;

    fn line(id: &str, lo: i64, hi: i64) -> SpaceRef {
        FiniteMetricSpace::interval(id, lo, hi).unwrap().into_ref()
    }

    #[test]
    fn identity_moduli() {
        let s = line("z", 0, 20);
        let rec = fit_moduli(&CoarseMap::identity(s));
        assert!(rec.moduli.delta.iter().all(|e| e.r == e.value));
        assert_eq!(rec.moduli.lipschitz, Some(DistRatio::integer(1)));
        assert_eq!(rec.moduli.quasi_isometry.constants.slope, Rational::from_integer(1));
        assert_eq!(rec.moduli.quasi_isometry.density, Dist::ZERO);
    }

    #[test]
    fn doubling_fit() {
        let a = line("a", 0, 50);
        let b = line("b", 0, 100);
        let f = CoarseMap::from_fn(a, b, |x| 2 * x).unwrap();
        let rec = fit_moduli(&f);
        assert_eq!(rec.moduli.lipschitz, Some(DistRatio::integer(2)));
        let fit = rec.moduli.asymptotic_lipschitz;
        assert_eq!((fit.slope, fit.offset), (Rational::from_integer(2), Rational::from_integer(0)));
        assert_eq!(rec.moduli.quasi_isometry.density, Dist::ONE);
    }

    #[test]
    fn closeness_examples() {
        let s = line("z", 0, 23);
        let id = CoarseMap::identity(s.clone());
        assert_eq!(check_close(&id, &id).unwrap(), Dist::ZERO);
        let a = line("a", 0, 20);
        let f = CoarseMap::from_fn(a.clone(), s.clone(), |x| x).unwrap();
        let g = CoarseMap::from_fn(a, s, |x| x + 3).unwrap();
        assert_eq!(check_close(&f, &g).unwrap(), Dist::from_int(3));
        assert!(matches!(check_close(&f, &id), Err(Error::SpaceMismatch { .. })));
    }

    #[test]
    fn sparse_image_equivalence_is_flagged() {
        let x = line("x", 0, 9);
        let y = line("y", 0, 90);
        let f = CoarseMap::from_fn(x.clone(), y.clone(), |i| 10 * i).unwrap();
        let g = CoarseMap::from_fn(y, x, |j| ((j + 5) / 10).min(9)).unwrap();
        let rep = check_coarse_equivalence(&f, &g).unwrap();
        assert_eq!(rep.g_after_f, Dist::ZERO);
        assert_eq!(rep.f_after_g, Dist::from_int(5));
        assert!(rep.within_scale_cap);
    }

    #[test]
    fn composition_and_product_tables() {
        let a = line("a", 0, 7);
        let b = line("b", 0, 3);
        let half = CoarseMap::from_fn(a.clone(), b.clone(), |x| x / 2).unwrap();
        let id = CoarseMap::identity(b.clone());
        assert_eq!(half.then(&id).unwrap().table(), half.table());
        let p = CoarseMap::product(&half, &id);
        assert_eq!(p.domain().len(), 32);
        assert_eq!(p.apply(3 * 4 + 2), 4 + 2);
        assert!(p.is_surjective());
        assert_eq!(half.max_fiber(), 2);
    }

    proptest! {
        #[test]
        fn delta_dominates_every_pair(table in prop::collection::vec(0usize..12, 1..25)) {
            let a = line("a", 0, table.len() as i64 - 1);
            let b = line("b", 0, 11);
            let f = CoarseMap::new(a.clone(), b.clone(), table.clone()).unwrap();
            let rec = fit_moduli(&f);
            prop_assert!(rec.moduli.delta.windows(2).all(|w| w[0].value <= w[1].value));
            prop_assert!(rec.moduli.gamma.windows(2).all(|w| w[0].value <= w[1].value));
            let fit = rec.moduli.asymptotic_lipschitz;
            for x in 0..table.len() {
                for x2 in 0..table.len() {
                    let dx = a.dist(x, x2);
                    let dy = b.dist(table[x], table[x2]);
                    prop_assert!(dy <= rec.moduli.delta_at(dx));
                    if dx > Dist::ZERO {
                        prop_assert!(DistRatio::new(dy, dx) <= rec.moduli.lipschitz.unwrap());
                        let bound = fit.slope * Rational::from_integer(dx.as_int().unwrap() as i128) + fit.offset;
                        prop_assert!(Rational::from_integer(dy.as_int().unwrap() as i128) <= bound);
                    }
                }
            }
        }
    }
}
