//! Sequential (one worker) versus pooled throughput of the data-parallel paths.
//!
//! Build with `--no-default-features` to measure the fallback without rayon.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lagcd_core::baselines::{bootstrap_probabilities, BootstrapConfig, Method, DEFAULT_RIDGE};
use lagcd_core::corpus::{build_corpus, CorpusSpec, MemorySink, SeriesInstance, MANIFEST};
use lagcd_core::model::{predict, ToyPredictor};
use lagcd_core::{illustrative, par};

/// 1 = sequential, 0 = default pool.
const MODES: [(&str, usize); 2] = [("sequential", 1), ("parallel", 0)];

fn spec() -> CorpusSpec {
    CorpusSpec { count: 32, num_steps: 300, seed: 1, ..CorpusSpec::default() }
}

fn corpus() -> Vec<SeriesInstance> {
    let mut sink = MemorySink::default();
    build_corpus(&spec(), &mut sink, 0).unwrap();
    sink.files.iter().filter(|(n, _)| n != MANIFEST).map(|(_, b)| SeriesInstance::decode(b).unwrap()).collect()
}

fn corpus_build(c: &mut Criterion) {
    let mut g = c.benchmark_group("corpus_build");
    g.sample_size(10);
    for (name, jobs) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let mut sink = MemorySink::default();
                build_corpus(&spec(), &mut sink, jobs).unwrap()
            })
        });
    }
    g.finish();
}

fn bootstrap(c: &mut Criterion) {
    let inst = illustrative::instance(500, 0).unwrap();
    let scorer = Method::Var.scorer(3, DEFAULT_RIDGE);
    let cfg = BootstrapConfig { n: 64, seed: 2, ..BootstrapConfig::default() };
    let mut g = c.benchmark_group("bootstrap");
    for (name, jobs) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| par::with_jobs(jobs, || bootstrap_probabilities(&inst.series, scorer.as_ref(), &cfg).unwrap()))
        });
    }
    g.finish();
}

fn batch_evaluation(c: &mut Criterion) {
    let instances = corpus();
    let model = ToyPredictor::init(5, 3, 32, 3);
    let mut g = c.benchmark_group("batch_predict");
    for (name, jobs) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| par::with_jobs(jobs, || par::map_slice(&instances, |inst| predict(&model, inst, 500, 0).unwrap())))
        });
    }
    g.finish();
}

criterion_group!(benches, corpus_build, bootstrap, batch_evaluation);
criterion_main!(benches);
