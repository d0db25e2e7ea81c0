use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use gclr_core::cost::CostModel;
use gclr_core::exact::{run_cg, solve_pricing_bnb, StabilizationState};
use gclr_core::heuristics::{run_ga_lloyd, run_spaeth, run_two_stage, GaParams};
use gclr_core::synth::{gen_type2, SyntheticConfig};
use gclr_core::{fit_ols, partition_sse};

fn fitting(c: &mut Criterion) {
    let inst = gen_type2(&SyntheticConfig::new(20, 3, 1)).unwrap();
    let ds = &inst.dataset;
    let target = inst.target.clone().unwrap();
    c.bench_function("partition_sse 20x52x53", |b| b.iter(|| partition_sse(ds, &target).unwrap()));
    let e = ds.entity(0);
    c.bench_function("fit_ols 52x53", |b| b.iter(|| fit_ols(&e.x, e.len(), e.num_predictors(), &e.y).unwrap()));
}

fn pricing(c: &mut Criterion) {
    let inst = gen_type2(&SyntheticConfig::new(12, 2, 4)).unwrap();
    let ds = &inst.dataset;
    let r = run_cg(ds, StabilizationState::new(ds.len()), 0).unwrap();
    c.bench_function("pricing at final duals I=12", |b| {
        b.iter_batched(
            || CostModel::new(ds),
            |model| solve_pricing_bnb(&model, &r.pi, r.upsilon, 2),
            BatchSize::SmallInput,
        )
    });
}

fn solvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("solvers I=15 K=3");
    group.sample_size(10);
    let inst = gen_type2(&SyntheticConfig::new(15, 3, 2)).unwrap();
    let ds = &inst.dataset;
    group.bench_function("cg", |b| b.iter(|| run_cg(ds, StabilizationState::new(15), 0).unwrap()));
    group.bench_function("ga-lloyd", |b| b.iter(|| run_ga_lloyd(ds, &GaParams::with_seed(0)).unwrap()));
    group.bench_function("spaeth", |b| b.iter(|| run_spaeth(ds, 0).unwrap()));
    group.bench_function("two-stage", |b| b.iter(|| run_two_stage(ds, 0).unwrap()));
    group.finish();
}

criterion_group!(benches, fitting, pricing, solvers);
criterion_main!(benches);
