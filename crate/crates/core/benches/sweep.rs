use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use specfence::bench::{load_corpus, run_bench, BenchOptions};

fn sweep(c: &mut Criterion) {
    let corpus = load_corpus(&Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus/kocher")).unwrap();
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for parallel in [true, false] {
        let name = if parallel { "parallel" } else { "sequential" };
        let opts = BenchOptions { parallel, ..Default::default() };
        group.bench_with_input(BenchmarkId::new(name, corpus.len()), &opts, |b, opts| {
            b.iter(|| run_bench(&corpus, opts))
        });
    }
    group.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
