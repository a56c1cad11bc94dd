use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::{Criterion, Verdict};
use crate::budget::Budgets;
use crate::builders::{ControlCoverProvider, ProviderKind};
use crate::coarse_maps::{check_bn, check_bn_schedule, check_cn, compose_bn, product_bn, CoarseMap};
use crate::covers::{pushforward, Cover};
use crate::dimension::{expand_to_lebesgue_cover, FamilyGenerator};
use crate::dist::Dist;
use crate::error::Result;
use crate::metric::{ball, scale_schedule, FiniteMetricSpace, MetricSpace, Norm, SpaceRef};
use crate::precode::{example_dyadic, quotient_map, Selector};

fn instance_rng(seed: u64, salt: u64, i: u64) -> (u64, ChaCha8Rng) {
    let s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (salt << 32) ^ i;
    (s, ChaCha8Rng::seed_from_u64(s))
}

/// Distinct random points of the box `[-side, side]^2`.
fn random_space(rng: &mut ChaCha8Rng, id: String, side: i64, max_points: usize) -> Result<(Vec<Vec<i64>>, SpaceRef)> {
    let mut all: Vec<Vec<i64>> = (-side..=side).flat_map(|a| (-side..=side).map(move |b| vec![a, b])).collect();
    all.shuffle(rng);
    let count = rng.gen_range(all.len().min(max_points) / 2..=all.len().min(max_points)).max(2);
    all.truncate(count);
    all.sort();
    let norm = if rng.gen_bool(0.5) { Norm::L1 } else { Norm::Linf };
    let space = FiniteMetricSpace::from_points(id, &all, norm)?.into_ref();
    Ok((all, space))
}

/// A surjection quantizing coordinates by `q` after optionally folding the
/// first coordinate.
fn random_map(rng: &mut ChaCha8Rng, id: String, points: &[Vec<i64>], domain: &SpaceRef) -> Result<CoarseMap> {
    let q = rng.gen_range(1..=3i64);
    let fold = rng.gen_bool(0.5);
    let image = |p: &Vec<i64>| {
        let a = if fold { p[0].abs() } else { p[0] };
        vec![a.div_euclid(q), p[1].div_euclid(q)]
    };
    let mut targets: BTreeMap<Vec<i64>, usize> = points.iter().map(|p| (image(p), 0)).collect();
    for (i, v) in targets.values_mut().enumerate() {
        *v = i;
    }
    let ys: Vec<Vec<i64>> = targets.keys().cloned().collect();
    let norm = if rng.gen_bool(0.5) { Norm::L1 } else { Norm::Linf };
    let codomain = FiniteMetricSpace::from_points(id, &ys, norm)?.into_ref();
    let table = points.iter().map(|p| targets[&image(p)]).collect();
    CoarseMap::new(domain.clone(), codomain, table)
}

/// Closed balls around uncovered points in random order, plus a few extra.
fn random_cover(rng: &mut ChaCha8Rng, space: &SpaceRef) -> Result<Cover> {
    let n = space.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut covered = vec![false; n];
    let mut elements = Vec::new();
    for &x in &order {
        if covered[x] {
            continue;
        }
        let radius = Dist::from_int(rng.gen_range(0..=4));
        let b = ball(space.as_ref(), x, radius, true)?;
        for &y in b.members() {
            covered[y] = true;
        }
        elements.push(b);
    }
    for _ in 0..rng.gen_range(0..=n / 10) {
        let x = rng.gen_range(0..n);
        elements.push(ball(space.as_ref(), x, Dist::from_int(rng.gen_range(1..=3)), true)?);
    }
    Cover::new(space.clone(), elements)
}

/// Largest realized distance of `space` at most `c r`.
fn scaled_distance(space: &dyn MetricSpace, c: crate::dist::DistRatio, r: Dist) -> Dist {
    space
        .distinct_distances()
        .into_iter()
        .filter(|d| d.le_affine(c, r, 0))
        .max()
        .unwrap_or(Dist::ZERO)
}

#[derive(Default)]
struct Tally {
    instances: usize,
    checks: usize,
    violations: usize,
    first: Option<Value>,
}

impl Tally {
    fn record(&mut self, ok: bool, witness: impl FnOnce() -> Value) {
        self.checks += 1;
        if !ok {
            self.violations += 1;
            if self.first.is_none() {
                self.first = Some(witness());
            }
        }
    }

    fn verdict(self, name: &str, seed: u64) -> Verdict {
        Verdict::new(
            name,
            self.violations == 0 && self.checks > 0,
            json!({
                "seed": seed,
                "instances": self.instances,
                "checks": self.checks,
                "violations": self.violations,
                "counterexample": self.first,
            }),
        )
    }
}

/// Pushforward multiplicity bounds on seeded random instances: fibers of
/// size at most `n` multiply multiplicity by at most `n`; `(B)_n` at `(r, d)`
/// bounds the `r`-multiplicity by `n` times the `d`-multiplicity; `(C)_n`
/// with `(c, r0)` does the same with `d = c r` for scheduled `r >= r0`.
pub fn dimension_raising(seed: u64, instances: usize, budgets: Budgets) -> Result<Criterion> {
    let mut fibers = Tally::default();
    let mut scaled = Tally::default();
    let mut linear = Tally::default();
    for i in 0..instances as u64 {
        let (s, mut rng) = instance_rng(seed, 1, i);
        let side = rng.gen_range(4..=10);
        let (points, x) = random_space(&mut rng, format!("rand-{s}"), side, 300)?;
        let f = random_map(&mut rng, format!("rand-{s}-image"), &points, &x)?;
        let cover = random_cover(&mut rng, &x)?;
        let image = pushforward(&cover, &f)?;
        let n = rng.gen_range(1..=3usize);

        fibers.instances += 1;
        let k = f.max_fiber();
        fibers.record(image.multiplicity() <= cover.multiplicity() * k, || {
            json!({ "seed": s, "fiber": k, "mul": cover.multiplicity(), "image_mul": image.multiplicity() })
        });

        scaled.instances += 1;
        let cap = f.codomain().scale_cap();
        for r in scale_schedule(cap).into_iter().filter(|&r| r > Dist::ZERO) {
            let d = check_bn(&f, n, r, budgets)?.d.upper();
            let lhs = image.r_multiplicity(r, budgets)?;
            let rhs = cover.r_multiplicity(d, budgets)? * n;
            scaled.record(lhs <= rhs, || json!({ "seed": s, "n": n, "r": r, "d": d, "image_r_mul": lhs, "bound": rhs }));
        }

        linear.instances += 1;
        let cn = check_cn(&f, n, budgets)?;
        for sc in cn.bn.scales.iter().filter(|sc| sc.r >= cn.r0) {
            let v = scaled_distance(x.as_ref(), cn.c, sc.r);
            let lhs = image.r_multiplicity(sc.r, budgets)?;
            let rhs = cover.r_multiplicity(v, budgets)? * n;
            linear.record(lhs <= rhs, || {
                json!({ "seed": s, "n": n, "c": cn.c, "r": sc.r, "image_r_mul": lhs, "bound": rhs })
            });
        }
    }
    Ok(Criterion::new(
        "dimension_raising",
        vec![
            fibers.verdict("fiber_multiplicity", seed),
            scaled.verdict("bn_scale_multiplicity", seed),
            linear.verdict("cn_linear_multiplicity", seed),
        ],
    ))
}

fn codomain_scales(f: &CoarseMap) -> Vec<Dist> {
    f.codomain().distinct_distances().into_iter().filter(|&r| r > Dist::ZERO).collect()
}

/// Composition and product predictions against direct `(B)_n` checks on
/// seeded instances, with the dyadic quotient times an identity first.
pub fn closure(seed: u64, instances: usize, budgets: Budgets) -> Result<Criterion> {
    let mut checks = Vec::new();
    let p = example_dyadic(16)?;
    let q = quotient_map(&p, &Selector::MinPoint)?.map;
    let line = FiniteMetricSpace::interval("Z[0,7]", 0, 7)?.into_ref();
    let id = CoarseMap::identity(line);
    let qc = check_bn_schedule(&q, 2, &codomain_scales(&q), budgets)?;
    let ic = check_bn_schedule(&id, 1, &codomain_scales(&id), budgets)?;
    let report = product_bn(&q, &qc, &id, &ic, budgets)?;
    checks.push(Verdict::new(
        "dyadic_quotient_times_identity",
        report.holds(),
        json!({ "parts": report.parts, "scales": report.scales }),
    ));
    let mut composed = Tally::default();
    let mut products = Tally::default();
    for i in 1..instances as u64 {
        let (s, mut rng) = instance_rng(seed, 2, i);
        let side = rng.gen_range(2..=3);
        let (points, x) = random_space(&mut rng, format!("rand-{s}"), side, 30)?;
        let f = random_map(&mut rng, format!("rand-{s}-y"), &points, &x)?;
        let (n, m) = (rng.gen_range(1..=2usize), rng.gen_range(1..=2usize));
        let fc = check_bn_schedule(&f, n, &codomain_scales(&f), budgets)?;
        if i % 2 == 1 {
            let ys = f.codomain().clone();
            let ypoints: Vec<Vec<i64>> = (0..ys.len()).map(|y| label_point(ys.as_ref(), y)).collect();
            let g = random_map(&mut rng, format!("rand-{s}-z"), &ypoints, &ys)?;
            let gc = check_bn_schedule(&g, m, &codomain_scales(&g), budgets)?;
            let r = compose_bn(&f, &fc, &g, &gc, budgets)?;
            composed.instances += 1;
            composed.record(r.holds(), || json!({ "seed": s, "scales": r.scales }));
        } else {
            let (points2, x2) = random_space(&mut rng, format!("rand-{s}-b"), 2, 12)?;
            let g = random_map(&mut rng, format!("rand-{s}-b-y"), &points2, &x2)?;
            let gc = check_bn_schedule(&g, m, &codomain_scales(&g), budgets)?;
            let r = product_bn(&f, &fc, &g, &gc, budgets)?;
            products.instances += 1;
            products.record(r.holds(), || json!({ "seed": s, "scales": r.scales }));
        }
    }
    checks.push(composed.verdict("composition", seed));
    checks.push(products.verdict("product", seed));
    Ok(Criterion::new("closure", checks))
}

fn label_point(space: &dyn MetricSpace, y: usize) -> Vec<i64> {
    space
        .label(y)
        .trim_matches(|c| c == '(' || c == ')' || c == '[' || c == ']')
        .split(',')
        .map(|t| t.trim().parse().expect("integer coordinates"))
        .collect()
}

/// Expansion of disjoint families to covers with Lebesgue number `t` on a
/// 6 by 6 grid of `(s, t)`: exact `s`-multiplicity and Lebesgue checks, the
/// mesh growth `4 t`, and the affine mesh bound of the provider.
pub fn control_covers(budgets: Budgets) -> Result<Criterion> {
    let grid = [1u64, 2, 3, 5, 8, 13];
    let line = FiniteMetricSpace::interval("Z[-100,100]", -100, 100)?.into_ref();
    let square = FiniteMetricSpace::lattice("Z2[-20,20]linf", vec![(-20, 20), (-20, 20)], Norm::Linf)?.into_ref();
    let mut checks = Vec::new();
    for (name, space) in [("line", line), ("square", square)] {
        let mut provider = ControlCoverProvider::new(space.clone(), ProviderKind::GridBrick)?;
        let probes = provider.default_probes();
        let g = provider.measure_an(&probes)?;
        let generator = FamilyGenerator::for_space(space.as_ref());
        let mut tally = Tally::default();
        let mut an = Tally::default();
        for &s in &grid {
            for &t in &grid {
                let (sd, td) = (Dist::from_int(s), Dist::from_int(t));
                let families = generator.generate(&space, Dist::from_int(s + 4 * t))?;
                let parts = families.families.len();
                let e = expand_to_lebesgue_cover(&families, sd, td, budgets)?;
                let mesh = e.cover.mesh();
                let smul = e.cover.r_multiplicity(sd, budgets)?;
                let leb = e.cover.lebesgue_violation(td, budgets)?;
                let grow = mesh.le_sum(families.mesh(), Dist::from_int(4 * t));
                tally.instances += 1;
                tally.record(smul <= parts && leb.is_none() && grow, || {
                    json!({ "s": s, "t": t, "s_mul": smul, "parts": parts, "lebesgue_violation": leb, "mesh": mesh, "families_mesh": families.mesh() })
                });
                an.instances += 1;
                an.record(mesh.le_affine(crate::dist::DistRatio::integer(g.c), Dist::from_int(s + 4 * t), g.d), || {
                    json!({ "s": s, "t": t, "mesh": mesh, "c": g.c, "d": g.d })
                });
            }
        }
        checks.push(tally.verdict(&format!("{name}_expansion"), 0));
        checks.push(an.verdict(&format!("{name}_an_mesh"), 0));
    }
    Ok(Criterion::new("control_covers", checks))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_maps_are_surjective_and_seeded() {
        let (_, mut a) = instance_rng(7, 1, 3);
        let (_, mut b) = instance_rng(7, 1, 3);
        let (pa, xa) = random_space(&mut a, "a".into(), 5, 60).unwrap();
        let (pb, _) = random_space(&mut b, "a".into(), 5, 60).unwrap();
        assert_eq!(pa, pb);
        let f = random_map(&mut a, "y".into(), &pa, &xa).unwrap();
        assert!(f.is_surjective());
        let c = random_cover(&mut a, &xa).unwrap();
        assert!(c.is_cover());
    }

    #[test]
    fn labels_round_trip_to_points() {
        let s = FiniteMetricSpace::from_points("p", &[vec![-1, 2], vec![3, 0]], Norm::L1).unwrap();
        assert_eq!(label_point(&s, 0), vec![-1, 2]);
    }
}
