use std::hint::black_box;
use std::ops::ControlFlow;

use coarsetk::cliques::maximal_cliques;
use coarsetk::coarse_maps::check_bn;
use coarsetk::dimension::FamilyGenerator;
use coarsetk::precode::{example_dyadic, quotient_map, Selector};
use coarsetk::{Budgets, CoarseMap, Dist, FiniteMetricSpace, Norm};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn r_multiplicity(c: &mut Criterion) {
    let mut group = c.benchmark_group("r_multiplicity");
    for side in [10i64, 20] {
        let grid = FiniteMetricSpace::lattice("grid", vec![(-side, side); 2], Norm::Linf).unwrap().into_ref();
        let cover = FamilyGenerator::Bricks.generate(&grid, Dist::from_int(4)).unwrap().verify().unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(side), &cover, |b, cover| {
            b.iter(|| cover.r_multiplicity(black_box(Dist::from_int(3)), Budgets::default()).unwrap())
        });
    }
    group.finish();
}

fn bron_kerbosch(c: &mut Criterion) {
    let mut group = c.benchmark_group("maximal_cliques");
    for n in [60usize, 120] {
        let adjacent = move |i: usize, j: usize| (i * 7 + j * 13) % 5 < 3 && i.abs_diff(j) < 12;
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| {
                let mut count = 0usize;
                maximal_cliques(n, &adjacent, u64::MAX, &mut |_| {
                    count += 1;
                    ControlFlow::Continue(())
                })
                .unwrap();
                count
            })
        });
    }
    group.finish();
}

fn bn(c: &mut Criterion) {
    let mut group = c.benchmark_group("check_bn");
    let p = example_dyadic(64).unwrap();
    let q = quotient_map(&p, &Selector::MinPoint).unwrap();
    let line = FiniteMetricSpace::interval("line", -64, 64).unwrap().into_ref();
    let half = FiniteMetricSpace::interval("half", 0, 64).unwrap().into_ref();
    let fold = CoarseMap::from_fn(line, half, |x| (x as i64 - 64).unsigned_abs() as usize).unwrap();
    for r in [2u64, 8] {
        group.bench_with_input(BenchmarkId::new("dyadic_quotient", r), &r, |b, &r| {
            b.iter(|| check_bn(&q.map, 2, Dist::from_int(r), Budgets::default()).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("fold", r), &r, |b, &r| {
            b.iter(|| check_bn(&fold, 2, Dist::from_int(r), Budgets::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, r_multiplicity, bron_kerbosch, bn);
criterion_main!(benches);
