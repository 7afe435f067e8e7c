use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use foamforge_bench::synthetic_records;
use foamforge_core::index::{build_index_set, RetrievalParams, Stage};
use foamforge_core::llm::HashEmbedder;
use std::hint::black_box;

const DIM: usize = 256;
const QUERY: &str = "incompressible lid driven cavity pisoFoam movingWall 1 m/s";

fn retrieval(c: &mut Criterion) {
    let embedder = HashEmbedder::new(DIM);
    let mut group = c.benchmark_group("retrieve");
    for n in [10, 100, 400] {
        let set = build_index_set(&synthetic_records(n), &embedder, DIM).unwrap();
        let params = RetrievalParams { top_k: 5, threshold: 0.0 };
        group.bench_with_input(BenchmarkId::from_parameter(n), &set, |b, set| {
            b.iter(|| black_box(set.retrieve(&embedder, black_box(QUERY), Stage::InputWriter, "", params).unwrap()))
        });
    }
    group.finish();

    let records = synthetic_records(50);
    c.bench_function("build index 50 cases", |b| b.iter(|| black_box(build_index_set(&records, &embedder, DIM).unwrap())));
}

criterion_group!(benches, retrieval);
criterion_main!(benches);
