use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use tdg_bench::APPLE_PROGRAM;
use tdg_core::solver::{execute, parse_program, DEFAULT_STEP_BUDGET};
use tdg_core::verifier::verify;

fn bench_interpreter(c: &mut Criterion) {
    let parsed = parse_program(APPLE_PROGRAM).unwrap();

    let mut group = c.benchmark_group("interpreter");
    group.throughput(Throughput::Elements(1));
    group.bench_function("parse", |b| b.iter(|| parse_program(APPLE_PROGRAM).unwrap()));
    group.bench_function("execute", |b| {
        b.iter(|| execute(&parsed, DEFAULT_STEP_BUDGET).unwrap())
    });
    group.bench_function("verify_with_nl", |b| {
        b.iter(|| verify(APPLE_PROGRAM, Some("So Emily has 55 apples."), DEFAULT_STEP_BUDGET))
    });
    group.finish();
}

criterion_group!(benches, bench_interpreter);
criterion_main!(benches);
