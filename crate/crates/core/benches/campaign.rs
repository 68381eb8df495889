use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gencvx::campaign::{classify_with, Execution, SamplingPlan};
use gencvx::corpus::{corpus_entry, Property};

fn campaign(c: &mut Criterion) {
    let mut group = c.benchmark_group("classify");
    group.sample_size(10);
    let plan = SamplingPlan::default();
    for name in ["fractional", "piecewise", "paraboloid"] {
        let e = corpus_entry(name).unwrap();
        for (label, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(label, name), &exec, |b, &exec| {
                b.iter(|| classify_with(&e.function, &e.region, &Property::ALL, &plan, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, campaign);
criterion_main!(benches);
