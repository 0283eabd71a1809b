use std::collections::BTreeMap;

use lagcd_core::container::{self, Kind};
use lagcd_core::corpus::{
    build_corpus, minmax_normalize, pad_instance, read_instance, split_counts, write_instance, Corpus, CorpusSpec,
    DirSink, MemorySink, MixtureComponent, Provenance, SeriesInstance, MANIFEST, SYNTHETIC,
};
use lagcd_core::graph::LaggedEdge;
use lagcd_core::rng;
use lagcd_core::{illustrative, Error, LaggedGraph};
use ndarray::{s, Array2};
use proptest::prelude::*;
use rand::Rng as _;
use serde_json::{Map, Value};

fn column(v: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((v.len(), 1), v.to_vec()).unwrap()
}

fn external(id: &str, series: Array2<f64>, graph: LaggedGraph) -> SeriesInstance {
    SeriesInstance::new(id, series, graph, Provenance::External { tag: "ext".into(), origin: String::new() }).unwrap()
}

fn random_instance(r: &mut rng::Rng, len: usize, v: usize, max_lag: usize) -> SeriesInstance {
    let series = Array2::from_shape_fn((len, v), |_| r.random_range(-5.0..5.0));
    let mut edges = Vec::new();
    for target in 0..v {
        for source in 0..v {
            for lag in 1..=max_lag {
                if r.random::<f64>() < 0.3 {
                    edges.push(LaggedEdge { source, target, lag });
                }
            }
        }
    }
    external("r", series, LaggedGraph::from_edges(v, max_lag, edges).unwrap())
}

#[test]
fn minmax_examples() {
    let expect = [0.0, 0.5, 1.0];
    for input in [[1.0, 2.0, 3.0], [-2.0, 0.0, 2.0]] {
        let out = minmax_normalize(&column(&input));
        for (a, b) in out.iter().zip(expect) {
            assert!((a - b).abs() <= 1e-7, "{a} vs {b}");
        }
    }
    assert!(minmax_normalize(&column(&[5.0, 5.0, 5.0])).iter().all(|&x| x == 0.0));
}

#[test]
fn pad_layout_for_short_instance() {
    let inst = illustrative::instance(500, 1).unwrap();
    let p = pad_instance(&inst, 500, 12, 3, 8).unwrap();
    assert_eq!(p.series.dim(), (500, 12));
    assert_eq!(p.label.dim(), (12, 12, 3));
    assert_eq!(p.series.slice(s![.., ..3]), inst.series);
    for ((j, i, _), &x) in p.label.indexed_iter() {
        if j >= 3 || i >= 3 {
            assert_eq!(x, 0);
        }
    }
    assert_eq!(p.label.slice(s![..3, ..3, ..]), *inst.graph.tensor());
    assert_eq!(p.mask, (0..12).map(|j| j < 3).collect::<Vec<_>>());
    // Padding columns carry noise of standard deviation 0.1.
    let noise: Vec<f64> = p.series.slice(s![.., 3..]).iter().copied().collect();
    let m = noise.iter().sum::<f64>() / noise.len() as f64;
    let sd = (noise.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / noise.len() as f64).sqrt();
    assert!((sd - 0.1).abs() < 0.01, "sd {sd}");
}

#[test]
fn full_size_instance_is_unchanged() {
    let inst = illustrative::instance(200, 2).unwrap();
    let p = pad_instance(&inst, 200, 3, 3, 0).unwrap();
    assert_eq!(p.series, inst.series);
    assert_eq!(p.label, *inst.graph.tensor());
}

#[test]
fn long_instance_keeps_most_recent_rows() {
    let inst = illustrative::instance(700, 3).unwrap();
    let p = pad_instance(&inst, 500, 3, 3, 0).unwrap();
    assert_eq!(p.series, inst.series.slice(s![200..700, ..]));
    assert_eq!(p.kept_rows, 500);
}

#[test]
fn too_many_variables_is_an_error() {
    let inst = illustrative::instance(100, 0).unwrap();
    assert!(matches!(pad_instance(&inst, 100, 2, 3, 0), Err(Error::Shape(_))));
}

#[test]
fn padding_is_seeded() {
    let inst = illustrative::instance(80, 0).unwrap();
    let a = pad_instance(&inst, 120, 6, 4, 5).unwrap();
    assert_eq!(a, pad_instance(&inst, 120, 6, 4, 5).unwrap());
    assert_ne!(a.series, pad_instance(&inst, 120, 6, 4, 6).unwrap().series);
}

#[test]
fn randomized_pad_round_trips() {
    let mut r = rng::rng_from(99);
    for k in 0..1000 {
        let v = r.random_range(2..=6);
        let max_lag = r.random_range(1..=4);
        let len = r.random_range(10..=80);
        let inst = random_instance(&mut r, len, v, max_lag);
        let l_max = len + r.random_range(0..=20);
        let v_max = v + r.random_range(0..=3);
        let p = pad_instance(&inst, l_max, v_max, max_lag + r.random_range(0..=2), k).unwrap();
        assert_eq!(p.unpad(), inst.series);
        assert_eq!(p.label.iter().filter(|&&x| x == 1).count(), inst.graph.num_edges());
    }
}

proptest! {
    #[test]
    fn normalization_is_idempotent(values in proptest::collection::vec(-1e3f64..1e3, 2..200)) {
        let x = column(&values);
        let once = minmax_normalize(&x);
        let twice = minmax_normalize(&once);
        for (a, b) in once.iter().zip(twice.iter()) {
            prop_assert!((a - b).abs() <= 1e-6);
        }
    }
}

#[test]
fn write_read_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let inst = illustrative::instance(300, 4).unwrap();
    let path = dir.path().join("a.tci");
    write_instance(&path, &inst).unwrap();
    let back = read_instance(&path).unwrap();
    let stored: Vec<u32> = inst.stored_series().iter().map(|x| x.to_bits()).collect();
    let read: Vec<u32> = back.stored_series().iter().map(|x| x.to_bits()).collect();
    assert_eq!(stored, read);
    assert_eq!(back.graph, inst.graph);
    assert_eq!(back.provenance, inst.provenance);
    assert_eq!(back.id, inst.id);
    // A second pass over already-rounded values is exact.
    assert_eq!(SeriesInstance::decode(&back.encode().unwrap()).unwrap(), back);
}

#[test]
fn truncated_files_name_the_missing_section() {
    let bytes = illustrative::instance(50, 0).unwrap().encode().unwrap();
    let cases = [(8, "header"), (40, "metadata"), (bytes.len() - 20, "payload"), (bytes.len() - 3, "trailer")];
    for (cut, section) in cases {
        match SeriesInstance::decode(&bytes[..cut]) {
            Err(Error::Format(m)) => assert!(m.contains(section), "{cut}: {m}"),
            other => panic!("{cut}: {other:?}"),
        }
    }
}

#[test]
fn flipped_payload_byte_fails_the_hash() {
    let mut bytes = illustrative::instance(50, 0).unwrap().encode().unwrap();
    let k = bytes.len() - 12;
    bytes[k] ^= 1;
    assert!(matches!(SeriesInstance::decode(&bytes), Err(Error::HashMismatch(_))));
}

#[test]
fn graph_and_series_width_must_agree() {
    let g = LaggedGraph::empty(5, 2).unwrap();
    let mut meta = Map::new();
    meta.insert("id".into(), Value::from("x"));
    meta.insert("graph".into(), serde_json::to_value(&g).unwrap());
    meta.insert(
        "provenance".into(),
        serde_json::to_value(Provenance::External { tag: "t".into(), origin: String::new() }).unwrap(),
    );
    let bytes = container::encode(Kind::Instance, meta, &[10, 4], &[0.0; 40]).unwrap();
    assert!(matches!(SeriesInstance::decode(&bytes), Err(Error::Shape(_))));
    assert!(SeriesInstance::new(
        "x",
        Array2::zeros((10, 4)),
        g,
        Provenance::External { tag: "t".into(), origin: String::new() }
    )
    .is_err());
}

fn small_spec(count: usize, seed: u64) -> CorpusSpec {
    CorpusSpec { count, vars: (3, 5), density: (0.1, 0.4), num_steps: 500, seed, ..CorpusSpec::default() }
}

#[test]
fn corpus_hash_is_a_function_of_the_spec() {
    let spec = small_spec(100, 7);
    let mut a = MemorySink::default();
    let mut b = MemorySink::default();
    let ma = build_corpus(&spec, &mut a, 1).unwrap();
    let mb = build_corpus(&spec, &mut b, 0).unwrap();
    assert_eq!(ma.content_hash, mb.content_hash);
    assert_eq!(a.files, b.files);
    assert_eq!(ma.count, 100);
    let other = build_corpus(&small_spec(100, 8), &mut MemorySink::default(), 0).unwrap();
    assert_ne!(other.content_hash, ma.content_hash);
}

#[test]
fn manifest_hash_is_sha256_of_instance_files() {
    use sha2::{Digest, Sha256};
    let mut sink = MemorySink::default();
    let m = build_corpus(&small_spec(5, 1), &mut sink, 0).unwrap();
    let mut h = Sha256::new();
    for (name, bytes) in &sink.files {
        if name != MANIFEST {
            h.update(bytes);
        }
    }
    let hex: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(hex, m.content_hash);
}

#[test]
fn empty_corpus_has_a_valid_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let m = build_corpus(&small_spec(0, 3), &mut DirSink::new(dir.path()).unwrap(), 0).unwrap();
    assert_eq!(m.count, 0);
    let c = Corpus::open(dir.path()).unwrap();
    assert!(c.is_empty());
    assert_eq!(c.manifest, m);
}

#[test]
fn corpus_directory_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let m = build_corpus(&small_spec(6, 5), &mut DirSink::new(dir.path()).unwrap(), 0).unwrap();
    let c = Corpus::open(dir.path()).unwrap();
    let all = c.load_all().unwrap();
    assert_eq!(all.len(), 6);
    for (inst, entry) in all.iter().zip(&m.instances) {
        assert_eq!(inst.id, entry.id);
        assert_eq!(inst.num_vars(), entry.num_vars);
        assert_eq!(inst.graph.num_edges(), entry.num_edges);
        assert!(inst.series.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }
}

#[test]
fn mixture_split_is_exact() {
    let pool = tempfile::tempdir().unwrap();
    for k in 0..7 {
        let mut inst = illustrative::instance(500, k).unwrap();
        inst.id = format!("p{k}");
        write_instance(&pool.path().join(format!("p{k}.tci")), &inst).unwrap();
    }
    let mut spec = small_spec(50, 11);
    spec.mixture = vec![
        MixtureComponent { source: SYNTHETIC.into(), proportion: 0.8 },
        MixtureComponent { source: "external".into(), proportion: 0.2 },
    ];
    spec.external_pools = BTreeMap::from([("external".to_string(), pool.path().to_path_buf())]);
    let m = build_corpus(&spec, &mut MemorySink::default(), 0).unwrap();
    let synthetic = m.instances.iter().filter(|e| e.source == SYNTHETIC).count();
    assert_eq!((synthetic, m.count - synthetic), (40, 10));
}

#[test]
fn split_counts_rounding() {
    assert_eq!(split_counts(10, &[0.8, 0.2]), vec![8, 2]);
    assert_eq!(split_counts(7, &[0.5, 0.5]), vec![4, 3]);
    assert_eq!(split_counts(3, &[1.0 / 3.0; 3]), vec![1, 1, 1]);
    for total in 0..50 {
        assert_eq!(split_counts(total, &[0.15, 0.35, 0.5]).iter().sum::<usize>(), total);
    }
}

#[test]
fn invalid_mixtures_are_rejected() {
    let mut spec = small_spec(10, 0);
    spec.mixture = vec![MixtureComponent { source: SYNTHETIC.into(), proportion: 0.7 }];
    assert!(spec.validate().is_err());
    spec.mixture = vec![
        MixtureComponent { source: SYNTHETIC.into(), proportion: 0.5 },
        MixtureComponent { source: "nowhere".into(), proportion: 0.5 },
    ];
    assert!(spec.validate().is_err());
}
