use super::{PrecodeKind, PrecodeStructure};
use crate::error::{Error, Result};
use crate::metric::{FiniteMetricSpace, Norm, PointSet};

/// Dyadic blocks on `[0, n - 1]`: level `i` is the blocks of `2^i` consecutive points.
pub fn example_dyadic(n: usize) -> Result<PrecodeStructure> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Precondition(format!("dyadic truncation needs a power of two, got {n}")));
    }
    let space = FiniteMetricSpace::interval(format!("dyadic-{n}"), 0, n as i64 - 1)?.into_ref();
    let levels = (0..=n.trailing_zeros())
        .map(|i| {
            let size = 1usize << i;
            (0..n).step_by(size).map(|s| PointSet::range(s, s + size)).collect()
        })
        .collect();
    PrecodeStructure::new(space, levels, PrecodeKind::Asdim)
}

/// The interval `[n, n + 3^k - 1]` of level `k` containing `x`, where starts
/// are `(3^(k+1) - 1)/2 + j 3^k`.
pub fn triadic_interval(k: u32, x: i64) -> (i64, i64) {
    let len = 3i64.pow(k);
    let anchor = (3 * len - 1) / 2;
    let start = x - (x - anchor).rem_euclid(len);
    (start, start + len - 1)
}

/// The largest symmetric interval inside the level-`k` element containing 0.
pub fn triadic_bounds(k: u32) -> (i64, i64) {
    let (lo, hi) = triadic_interval(k, 0);
    let m = (-lo).min(hi);
    (-m, m)
}

/// Triadic levels `0..=k` on the truncation of `triadic_bounds(k)`.
pub fn example_triadic(k: u32) -> Result<PrecodeStructure> {
    if k == 0 {
        return Err(Error::Precondition("triadic example needs K >= 1".into()));
    }
    let (lo, hi) = triadic_bounds(k);
    triadic_levels(lo, hi, k)
}

/// Triadic levels on `[lo, hi]` up to the first level with a single element.
pub fn example_triadic_on(lo: i64, hi: i64) -> Result<PrecodeStructure> {
    if lo > hi {
        return Err(Error::Precondition(format!("empty interval [{lo}, {hi}]")));
    }
    let k = (0..40u32)
        .find(|&k| {
            let (a, b) = triadic_interval(k, lo);
            a <= lo && hi <= b
        })
        .ok_or_else(|| Error::Precondition("interval too long".into()))?;
    triadic_levels(lo, hi, k)
}

fn triadic_levels(lo: i64, hi: i64, k: u32) -> Result<PrecodeStructure> {
    let space = FiniteMetricSpace::interval(format!("triadic[{lo},{hi}]"), lo, hi)?.into_ref();
    let levels = (0..=k)
        .map(|i| {
            let mut out = Vec::new();
            let mut x = lo;
            while x <= hi {
                let (_, b) = triadic_interval(i, x);
                let end = b.min(hi);
                out.push(PointSet::range((x - lo) as usize, (end - lo) as usize + 1));
                x = end + 1;
            }
            out
        })
        .collect();
    PrecodeStructure::new(space, levels, PrecodeKind::Asdim)
}

/// `2^depth` points at `sum bit_b(j) 4^b` on the line: blocks of four indices
/// form the bottom clusters and sibling blocks at level `i` sit more than
/// `(2 * 4^(i+2) + 1)/3 - 1` apart. Levels are dyadic unions of clusters.
pub fn example_clusters(depth: u32) -> Result<PrecodeStructure> {
    if !(2..=16).contains(&depth) {
        return Err(Error::Precondition(format!("cluster depth {depth} outside 2..=16")));
    }
    let n = 1usize << depth;
    let points: Vec<Vec<i64>> = (0..n)
        .map(|j| vec![(0..depth).filter(|b| j >> b & 1 == 1).map(|b| 4i64.pow(b)).sum()])
        .collect();
    let space = FiniteMetricSpace::from_points(format!("clusters-{depth}"), &points, Norm::L1)?.into_ref();
    let levels = (2..=depth)
        .map(|i| {
            let size = 1usize << i;
            (0..n).step_by(size).map(|s| PointSet::range(s, s + size)).collect()
        })
        .collect();
    PrecodeStructure::new(space, levels, PrecodeKind::Asdim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::budget::Budgets;
    use crate::dist::Dist;
    use crate::precode::{default_scales, validate_precode};

    fn level_sets(p: &PrecodeStructure, i: usize) -> Vec<Vec<i64>> {
        let lo = match p.space.as_lattice() {
            Some(l) => l.bounds()[0].0,
            None => 0,
        };
        p.levels[i]
            .elements()
            .iter()
            .map(|e| e.members().iter().map(|&x| x as i64 + lo).collect())
            .collect()
    }

    #[test]
    fn dyadic_eight_unrolled() {
        let p = example_dyadic(8).unwrap();
        assert_eq!(p.depth(), 4);
        assert_eq!(level_sets(&p, 1), vec![vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7]]);
        assert_eq!(level_sets(&p, 2), vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]]);
        assert_eq!(level_sets(&p, 3), vec![(0..8).collect::<Vec<i64>>()]);
        assert_eq!(example_dyadic(1).unwrap().depth(), 1);
        assert!(example_dyadic(12).is_err());
    }

    #[test]
    fn dyadic_mesh_is_two_to_the_level_minus_one() {
        let p = example_dyadic(64).unwrap();
        for (i, level) in p.levels.iter().enumerate() {
            let brute = level
                .elements()
                .iter()
                .map(|e| {
                    let m = e.members();
                    (m[m.len() - 1] - m[0]) as u64
                })
                .max()
                .unwrap();
            assert_eq!(level.mesh(), Dist::from_int(brute));
            assert_eq!(brute, (1 << i) - 1);
        }
    }

    #[test]
    fn triadic_start_formula() {
        assert_eq!(triadic_interval(1, -1), (-2, 0));
        assert_eq!(triadic_interval(1, 2), (1, 3));
        for j in -5..5 {
            assert_eq!(triadic_interval(0, 1 + j), (1 + j, 1 + j));
            assert_eq!(triadic_interval(1, 4 + 3 * j).0, 4 + 3 * j);
            assert_eq!(triadic_interval(2, 13 + 9 * j).0, 13 + 9 * j);
        }
        assert_eq!(triadic_interval(2, 1), (-5, 3));
        assert_eq!(triadic_bounds(4), (-39, 39));
    }

    #[test]
    fn triadic_nesting_is_three_to_one() {
        let p = example_triadic(4).unwrap();
        assert_eq!(p.depth(), 5);
        assert_eq!(p.top().len(), 1);
        for i in 1..p.depth() {
            let unclipped = 3usize.pow(i as u32);
            for (e, el) in p.levels[i].elements().iter().enumerate() {
                let children = p.parent[i - 1].iter().filter(|&&q| q == e).count();
                if el.len() == unclipped {
                    assert_eq!(children, 3, "level {i} element {e}");
                }
            }
        }
        let rep = validate_precode(&p, 2, &default_scales(&p), Budgets::default()).unwrap();
        assert!(rep.valid, "{:?}", rep.failures);
    }

    #[test]
    fn triadic_on_named_intervals() {
        for (m, k) in [(121i64, 7usize), (364, 8)] {
            let p = example_triadic_on(-m, m).unwrap();
            assert_eq!(p.depth(), k);
            assert_eq!(p.space.len(), 2 * m as usize + 1);
        }
        let p = example_triadic_on(-121, 121).unwrap();
        let rep = validate_precode(&p, 2, &default_scales(&p), Budgets::default()).unwrap();
        assert!(rep.valid);
    }

    #[test]
    fn clusters_are_a_one_precode() {
        let p = example_clusters(6).unwrap();
        let mut scales = default_scales(&p);
        scales.extend([Dist::from_int(10), Dist::from_int(11)]);
        scales.sort();
        let rep = validate_precode(&p, 1, &scales, Budgets::default()).unwrap();
        assert!(rep.valid, "{:?}", rep.failures);
        assert_eq!(p.levels[0].mesh(), Dist::from_int(5));
        assert_eq!(rep.level_for(Dist::from_int(10)), Some(0));
        assert_eq!(rep.level_for(Dist::from_int(11)), Some(1));
    }
}
