use coarsetk::builders::{build_precode_asdim, ControlCoverProvider, ProviderKind};
use coarsetk::coarse_maps::check_bn;
use coarsetk::precode::{
    default_scales, example_dyadic, example_triadic, newick, quotient_map, validate_precode, PrecodeKind,
    PrecodeStructure, Selector, UltrametricSpace,
};
use coarsetk::verify::dyadic_min_d_oracle;
use coarsetk::{Budgets, Dist, FiniteMetricSpace, MetricSpace, PointSet};
use proptest::prelude::*;

fn b() -> Budgets {
    Budgets::default()
}

#[test]
fn dyadic_newick_and_distances() {
    let p = example_dyadic(4).unwrap();
    let u = UltrametricSpace::build(&p).unwrap();
    assert_eq!(newick(&u), "((0:1,1:1):1,(2:1,3:1):1);");
    assert_eq!(u.dist(0, 1), Dist::from_int(3));
    assert_eq!(u.dist(0, 2), Dist::from_int(9));
    assert_eq!(u.dist(1, 1), Dist::ZERO);
}

#[test]
fn dyadic_quotient_matches_oracle_at_small_scales() {
    let p = example_dyadic(32).unwrap();
    let q = quotient_map(&p, &Selector::MinPoint).unwrap();
    for r in 1..=8u64 {
        let got = check_bn(&q.map, 2, Dist::from_int(r), b()).unwrap();
        assert_eq!(got.d.exact(), Some(dyadic_min_d_oracle(&q, r)), "r = {r}");
    }
}

#[test]
fn triadic_meets_one_only_at_its_top_level() {
    let p = example_triadic(3).unwrap();
    let two = validate_precode(&p, 2, &default_scales(&p), b()).unwrap();
    assert!(two.valid);
    assert_eq!(two.level_for(Dist::ONE), Some(0));
    let one = validate_precode(&p, 1, &[Dist::ONE], b()).unwrap();
    assert_eq!(one.level_for(Dist::ONE), Some(p.depth() - 1));
}

#[test]
fn singletons_alone_are_not_a_one_precode() {
    let space = FiniteMetricSpace::interval("z", -8, 8).unwrap().into_ref();
    let singletons = (0..space.len()).map(PointSet::singleton).collect();
    let p = PrecodeStructure::new(space, vec![singletons], PrecodeKind::Asdim).unwrap();
    let rep = validate_precode(&p, 1, &[Dist::ONE], b()).unwrap();
    assert!(!rep.valid);
}

#[test]
fn builder_output_round_trips_and_validates() {
    let space = FiniteMetricSpace::interval("line", -30, 30).unwrap().into_ref();
    let provider = ControlCoverProvider::new(space.clone(), ProviderKind::GridBrick).unwrap();
    let (p, trace) = build_precode_asdim(&provider, 1, 30, 64, b()).unwrap();
    assert!(trace.all_checks_pass());
    assert_eq!(p.top().len(), 1);
    let rep = validate_precode(&p, 2, &default_scales(&p), b()).unwrap();
    assert!(rep.valid, "{:?}", rep.failures);
    let again = PrecodeStructure::from_file(space, p.to_file()).unwrap();
    assert_eq!(again.levels, p.levels);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dyadic_distance_is_an_ultrametric(log in 1u32..7, a in 0usize..64, x in 0usize..64, y in 0usize..64) {
        let n = 1usize << log;
        let (a, x, y) = (a % n, x % n, y % n);
        let u = UltrametricSpace::build(&example_dyadic(n).unwrap()).unwrap();
        prop_assert!(u.dist(a, y) <= u.dist(a, x).max(u.dist(x, y)));
        prop_assert_eq!(u.dist(a, x), u.dist(x, a));
    }

    #[test]
    fn quotient_is_a_section_of_the_bottom_level(log in 1u32..6) {
        let p = example_dyadic(1 << log).unwrap();
        let q = quotient_map(&p, &Selector::MinPoint).unwrap();
        for (e, el) in p.levels[0].elements().iter().enumerate() {
            prop_assert!(el.members().contains(&q.map.apply(e)));
        }
    }
}
