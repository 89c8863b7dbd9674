use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;
use rckrmsf::construct::initialize;
use rckrmsf::engine::{self, AlnsParams};
use rckrmsf::exact::{brute_force, contracted_msf, milp};
use rckrmsf::instance::Instance;
use rckrmsf::instances::{generate, ConstraintSpec, Family, GenSpec};
use rckrmsf::neighborhoods::LocalSearch;
use rckrmsf::shaking::max_reliability_path;
use std::hint::black_box;

fn euclidean(n: usize, m: usize, seed: u64) -> Instance {
    generate(&GenSpec {
        family: Family::Euclidean,
        n,
        m,
        constraint: ConstraintSpec::Reliability { alpha: 0.9 },
        seed,
    })
    .unwrap()
}

fn bench_construct(c: &mut Criterion) {
    let mut group = c.benchmark_group("construct");
    for n in [20, 50] {
        let inst = euclidean(n, 3, 7);
        group.bench_with_input(BenchmarkId::from_parameter(n), &inst, |b, inst| {
            let mut rng = Xoshiro256StarStar::seed_from_u64(1);
            b.iter(|| initialize(black_box(inst), &mut rng).unwrap());
        });
    }
    group.finish();
}

fn bench_local_searches(c: &mut Criterion) {
    let inst = euclidean(50, 3, 11);
    let mut rng = Xoshiro256StarStar::seed_from_u64(2);
    let start = initialize(&inst, &mut rng).unwrap();
    let mut group = c.benchmark_group("local_search_n50");
    for op in LocalSearch::ALL {
        group.bench_function(op.name(), |b| {
            let mut rng = Xoshiro256StarStar::seed_from_u64(3);
            b.iter(|| {
                let mut f = start.clone();
                op.apply(&mut f, &inst, &mut rng);
                black_box(f.cost())
            });
        });
    }
    group.finish();
}

fn bench_max_reliability_path(c: &mut Criterion) {
    let inst = euclidean(50, 3, 13);
    c.bench_function("max_reliability_path_n50", |b| {
        let mut rng = Xoshiro256StarStar::seed_from_u64(4);
        b.iter(|| black_box(max_reliability_path(&inst, 49, &mut rng)));
    });
}

fn bench_engine_run(c: &mut Criterion) {
    let inst = euclidean(50, 3, 17);
    let params = AlnsParams::default();
    let mut group = c.benchmark_group("engine_run_n50");
    group.sample_size(10);
    group.bench_function("default_params", |b| {
        b.iter(|| engine::run(black_box(&inst), &params, 5).unwrap().1.best_cost);
    });
    group.finish();
}

fn bench_oracles(c: &mut Criterion) {
    let small = euclidean(10, 2, 19);
    let mut group = c.benchmark_group("oracles");
    group.bench_function("brute_force_k8", |b| {
        b.iter(|| brute_force(black_box(&small)).unwrap().1);
    });
    let large = euclidean(50, 3, 23);
    group.bench_function("contracted_msf_n50", |b| {
        b.iter(|| contracted_msf(black_box(&large)).1);
    });
    group.finish();
}

fn bench_milp_export(c: &mut Criterion) {
    let inst = euclidean(20, 2, 29);
    c.bench_function("milp_build_write_n20", |b| {
        b.iter(|| milp::write_mps(&milp::build_milp(black_box(&inst))).len());
    });
}

criterion_group!(
    benches,
    bench_construct,
    bench_local_searches,
    bench_max_reliability_path,
    bench_engine_run,
    bench_oracles,
    bench_milp_export
);
criterion_main!(benches);
