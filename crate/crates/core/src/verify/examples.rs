use serde_json::json;

use super::{dists, quotient_bn, validation_verdict, Criterion, Verdict};
use crate::budget::Budgets;
use crate::coarse_maps::{check_bn, check_cn};
use crate::dist::{Dist, DistRatio};
use crate::error::Result;
use crate::metric::MetricSpace;
use crate::precode::{
    certify_zero_dim_equivalence, default_scales, example_clusters, example_dyadic, example_triadic, example_triadic_on,
    quotient_map, validate_precode, PrecodeStructure, Quotient, Selector, UltrametricSpace,
};

const EXHAUSTIVE_LEAVES: usize = 1000;
const SAMPLED_TRIPLES: u64 = 1_000_000;

fn strong_triangle(name: &str, p: &PrecodeStructure, seed: u64) -> Result<Verdict> {
    let u = UltrametricSpace::build(p)?;
    let n = u.len();
    let exhaustive = n <= EXHAUSTIVE_LEAVES;
    let violation = u.strong_triangle_violation((!exhaustive).then_some((SAMPLED_TRIPLES, seed)));
    let axioms = (0..n).all(|x| {
        (0..n).all(|y| {
            let d = u.dist(x, y);
            d == u.dist(y, x) && ((d == Dist::ZERO) == (x == y))
        })
    });
    Ok(Verdict::new(
        name,
        violation.is_none() && axioms,
        json!({
            "leaves": n,
            "triples": if exhaustive { (n as u64).pow(3) } else { SAMPLED_TRIPLES },
            "exhaustive": exhaustive,
            "seed": if exhaustive { None } else { Some(seed) },
            "symmetric_and_definite": axioms,
            "violation": violation,
        }),
    ))
}

/// Strong triangle inequality of the level ultrametric on the dyadic and
/// triadic truncations.
pub fn ultrametric_axioms(seed: u64) -> Result<Criterion> {
    Ok(Criterion::new(
        "ultrametric_axioms",
        vec![
            strong_triangle("dyadic_1024", &example_dyadic(1024)?, seed)?,
            strong_triangle("triadic_364", &example_triadic_on(-364, 364)?, seed)?,
        ],
    ))
}

fn ceil_log2(m: u64) -> u32 {
    64 - (m - 1).leading_zeros()
}

fn bipartite_above(leaves: &[usize], u: &dyn MetricSpace, threshold: Dist) -> bool {
    let n = leaves.len();
    let mut side: Vec<Option<bool>> = vec![None; n];
    for start in 0..n {
        if side[start].is_some() {
            continue;
        }
        side[start] = Some(false);
        let mut stack = vec![start];
        while let Some(a) = stack.pop() {
            let sa = side[a].expect("colored");
            for b in 0..n {
                if b == a || u.dist(leaves[a], leaves[b]) <= threshold {
                    continue;
                }
                match side[b] {
                    None => {
                        side[b] = Some(!sa);
                        stack.push(b);
                    }
                    Some(sb) if sb == sa => return false,
                    Some(_) => {}
                }
            }
        }
    }
    true
}

/// Least `d` such that the preimage under `q` of every interval of length
/// `r` splits into two parts of domain diameter at most `d`: a part split is
/// a 2-coloring of the graph joining leaves farther apart than `d`.
pub fn dyadic_min_d_oracle(q: &Quotient, r: u64) -> Dist {
    let u = q.ultrametric.as_ref();
    let n = q.map.codomain().len() as u64;
    let mut worst = Dist::ZERO;
    for x in 0..n.saturating_sub(r).max(1) {
        let hi = (x + r).min(n - 1);
        let leaves: Vec<usize> = (0..u.len())
            .filter(|&l| (x..=hi).contains(&(q.section[l] as u64)))
            .collect();
        let mut candidates: Vec<Dist> = leaves
            .iter()
            .flat_map(|&a| leaves.iter().map(move |&b| u.dist(a, b)))
            .collect();
        candidates.push(Dist::ZERO);
        candidates.sort_unstable();
        candidates.dedup();
        let d = candidates
            .into_iter()
            .find(|&d| bipartite_above(&leaves, u, d))
            .expect("the diameter always splits");
        worst = worst.max(d);
    }
    worst
}

/// The dyadic truncation of 128 points: 2-precode, `(B)_2` of the quotient
/// on `1..=64`, and the closed form `3^ceil(log2(r + 1))` for the least `d`.
pub fn dyadic_example(budgets: Budgets) -> Result<Criterion> {
    let p = example_dyadic(128)?;
    let scales = dists(1..=64);
    let report = validate_precode(&p, 2, &scales, budgets)?;
    let q = quotient_map(&p, &Selector::MinPoint)?;
    let bn = quotient_bn(&p, &q, &report, 2, budgets)?;
    let mut rows = Vec::new();
    let mut agree = true;
    let mut formula = true;
    for r in 1..=16u64 {
        let oracle = dyadic_min_d_oracle(&q, r);
        let checked = check_bn(&q.map, 2, Dist::from_int(r), budgets)?.d;
        let closed = Dist::from_int(3u64.pow(ceil_log2(r + 1)));
        agree &= checked.exact() == Some(oracle);
        formula &= oracle == closed;
        rows.push(json!({ "r": r, "oracle": oracle, "check_bn": checked, "closed_form": closed }));
    }
    Ok(Criterion::new(
        "dyadic_example",
        vec![
            validation_verdict("dyadic_128_is_2_precode", &report),
            bn,
            Verdict::new("dyadic_min_d_matches_oracle", agree, json!({ "scales": rows.clone() })),
            Verdict::new("dyadic_min_d_closed_form", formula, json!({ "scales": rows })),
        ],
    ))
}

/// The triadic truncation: 2-precode, exact 3-to-1 nesting, `(C)_2` of the
/// quotient with fitted `c <= 3`.
pub fn triadic_example(budgets: Budgets) -> Result<Criterion> {
    let p = example_triadic(4)?;
    let report = validate_precode(&p, 2, &default_scales(&p), budgets)?;
    let mut unclipped = 0usize;
    let mut bad_nesting = Vec::new();
    for i in 1..p.depth() {
        let full = 3usize.pow(i as u32);
        for (e, el) in p.levels[i].elements().iter().enumerate() {
            if el.len() != full {
                continue;
            }
            unclipped += 1;
            let children = p.parent[i - 1].iter().filter(|&&x| x == e).count();
            if children != 3 {
                bad_nesting.push(json!({ "level": i, "element": e, "children": children }));
            }
        }
    }
    let q = quotient_map(&p, &Selector::MinPoint)?;
    let cn = check_cn(&q.map, 2, budgets)?;
    let complete = cn.bn.scales.iter().all(|s| s.complete);
    let c_ok = cn.c <= DistRatio::integer(3);
    let bn = quotient_bn(&p, &q, &report, 2, budgets)?;
    Ok(Criterion::new(
        "triadic_example",
        vec![
            validation_verdict("triadic_4_is_2_precode", &report),
            Verdict::new(
                "triadic_nesting_three_to_one",
                bad_nesting.is_empty() && unclipped > 0,
                json!({ "unclipped_parents": unclipped, "violations": bad_nesting }),
            ),
            Verdict::new(
                "triadic_cn_2",
                complete && c_ok,
                json!({
                    "c": cn.c,
                    "c_bound": 3,
                    "r0": cn.r0,
                    "affine": cn.affine.to_string(),
                    "scales": cn.bn.scales.iter().map(|s| json!({ "r": s.r, "d": s.d })).collect::<Vec<_>>(),
                }),
            ),
            bn,
        ],
    ))
}

/// Cluster space: the 1-precode quotient and its section are inverse up to
/// the bottom mesh, and the section after the quotient is the identity.
pub fn zero_dim_equivalence(budgets: Budgets) -> Result<Criterion> {
    let p = example_clusters(8)?;
    let z = certify_zero_dim_equivalence(&p, budgets)?;
    Ok(Criterion::new(
        "zero_dim_equivalence",
        vec![
            validation_verdict("clusters_are_1_precode", &z.validation),
            Verdict::new(
                "quotient_section_equivalence",
                z.holds,
                json!({
                    "closeness": z.closeness,
                    "mesh_bottom": z.mesh_bottom,
                    "section_identity": z.section_identity,
                    "g_after_q": z.equivalence.g_after_f,
                    "level_moduli": z.quotient.modulus,
                }),
            ),
        ],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(17), 5);
    }

    #[test]
    fn oracle_on_small_dyadic() {
        let q = quotient_map(&example_dyadic(16).unwrap(), &Selector::MinPoint).unwrap();
        assert_eq!(dyadic_min_d_oracle(&q, 1), Dist::ZERO);
        assert_eq!(dyadic_min_d_oracle(&q, 2), Dist::from_int(3));
        assert_eq!(dyadic_min_d_oracle(&q, 3), Dist::from_int(9));
    }
}
