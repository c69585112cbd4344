use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use frogsim_core::walkstats::{pz_exact_check, unit_box_subsets};
use frogsim_core::{passage_time, BoxRegion, Configuration, FrontEngine, SitePoint, WalkOracle};

fn walk_stepping(c: &mut Criterion) {
    let oracle = WalkOracle::new(7, 3).unwrap();
    c.bench_function("walk_10k_steps_d3", |b| {
        b.iter(|| {
            let mut w = oracle.walker(&SitePoint::origin(3));
            for _ in 0..10_000 {
                black_box(w.advance());
            }
        })
    });
}

fn passage_engines(c: &mut Criterion) {
    let origin = SitePoint::origin(2);
    let domain = BoxRegion::linf(origin, 40);
    let target = SitePoint::new(&[20, 0]);
    let oracle = WalkOracle::new(3, 2).unwrap();
    let config = Configuration::bernoulli(3, domain, 0.3).unwrap().force_occupied(origin).force_occupied(target);
    let mut group = c.benchmark_group("passage_r0.3_dist20");
    group.sample_size(20);
    group.bench_function("dijkstra", |b| {
        b.iter(|| passage_time(&oracle, &config, &origin, &target, &domain, 20_000).unwrap())
    });
    group.bench_function("front_engine", |b| {
        b.iter_batched(
            || FrontEngine::new(&oracle, &config, &domain, 20_000),
            |engine| engine.passage(&origin, &target).unwrap(),
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

fn pz_enumeration(c: &mut Criterion) {
    let sets = unit_box_subsets(2).unwrap();
    let mut group = c.benchmark_group("pz_enumeration");
    group.sample_size(10);
    group.bench_function("all_unit_box_subsets_n5", |b| {
        b.iter(|| {
            for g in &sets {
                black_box(pz_exact_check(2, 5, g).unwrap());
            }
        })
    });
    group.finish();
}

criterion_group!(benches, walk_stepping, passage_engines, pz_enumeration);
criterion_main!(benches);
