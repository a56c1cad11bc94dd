use coarsetk::coarse_maps::{check_bn_schedule, compose_bn, product_bn};
use coarsetk::dimension::{dimension_witness, expand_to_lebesgue_cover, product_zero_dim_witness, FamilyGenerator};
use coarsetk::precode::{example_dyadic, quotient_map, Selector};
use coarsetk::{Budgets, CoarseMap, Dist, FiniteMetricSpace, Norm};

fn b() -> Budgets {
    Budgets::default()
}

fn dists(rs: &[u64]) -> Vec<Dist> {
    rs.iter().map(|&r| Dist::from_int(r)).collect()
}

#[test]
fn folding_a_line_is_two_to_one() {
    let line = FiniteMetricSpace::interval("line", -20, 20).unwrap().into_ref();
    let half = FiniteMetricSpace::interval("half", 0, 20).unwrap().into_ref();
    let fold = CoarseMap::from_fn(line, half, |x| (x as i64 - 20).unsigned_abs() as usize).unwrap();
    let cert = check_bn_schedule(&fold, 2, &dists(&[1, 2, 4]), b()).unwrap();
    for s in &cert.scales {
        assert_eq!(s.d.exact(), Some(s.r), "r = {}", s.r);
    }
    assert!(check_bn_schedule(&fold, 1, &dists(&[1]), b()).unwrap().scales[0].d.upper() > Dist::from_int(1));
}

#[test]
fn composition_and_product_predictions_hold() {
    let line = FiniteMetricSpace::interval("line", -12, 12).unwrap().into_ref();
    let half = FiniteMetricSpace::interval("half", 0, 12).unwrap().into_ref();
    let fold = CoarseMap::from_fn(line, half.clone(), |x| (x as i64 - 12).unsigned_abs() as usize).unwrap();
    let id = CoarseMap::identity(half);
    let rs = dists(&[1, 2, 4, 8]);
    let fc = check_bn_schedule(&fold, 2, &rs, b()).unwrap();
    let ic = check_bn_schedule(&id, 1, &rs, b()).unwrap();
    let composed = compose_bn(&fold, &fc, &id, &ic, b()).unwrap();
    assert_eq!(composed.parts, 2);
    assert!(composed.holds());

    let p = example_dyadic(8).unwrap();
    let q = quotient_map(&p, &Selector::MinPoint).unwrap();
    let qc = check_bn_schedule(&q.map, 2, &dists(&[1, 2, 4]), b()).unwrap();
    let small = FiniteMetricSpace::interval("id", 0, 7).unwrap().into_ref();
    let idm = CoarseMap::identity(small);
    let idc = check_bn_schedule(&idm, 1, &dists(&[1, 2, 4]), b()).unwrap();
    let prod = product_bn(&q.map, &qc, &idm, &idc, b()).unwrap();
    assert_eq!(prod.parts, 2);
    assert!(prod.holds());
}

#[test]
fn product_with_a_zero_dimensional_factor_keeps_the_dimension() {
    let line = FiniteMetricSpace::interval("line", 0, 24).unwrap().into_ref();
    let pts: Vec<Vec<i64>> = (0..4).map(|j| vec![100 * j]).collect();
    let sparse = FiniteMetricSpace::from_points("sparse", &pts, Norm::L1).unwrap().into_ref();
    let r = Dist::from_int(8);
    let wx = dimension_witness(&sparse, 0, r, FamilyGenerator::Components).unwrap();
    let wy = dimension_witness(&line, 1, r, FamilyGenerator::Blocks).unwrap();
    let w = product_zero_dim_witness(&wx, &wy).unwrap();
    assert_eq!(w.n, 1);
    assert!(w.all_checks_pass());
    assert_eq!(w.per_scale.len(), wy.per_scale.len());
}

#[test]
fn expansion_meets_its_guarantees_on_a_grid() {
    let grid = FiniteMetricSpace::lattice("grid", vec![(-10, 10), (-10, 10)], Norm::Linf).unwrap().into_ref();
    assert_eq!(grid.len(), 441);
    for (s, t) in [(1u64, 1u64), (2, 3), (5, 2)] {
        let r = Dist::from_int(s + 4 * t);
        let fams = FamilyGenerator::Bricks.generate(&grid, r).unwrap();
        let e = expand_to_lebesgue_cover(&fams, Dist::from_int(s), Dist::from_int(t), b()).unwrap();
        assert!(e.s_multiplicity <= fams.families.len());
        assert!(e.lebesgue_at_least_t);
        assert!(e.mesh.le_sum(e.families_mesh, Dist::from_int(4 * t)));
    }
}
