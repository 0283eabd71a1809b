//! Normalization, padding, instance files and corpus assembly.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{s, Array2, Array3};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::container::{self, Kind};
use crate::graph::{sample_er_graph, GraphConfig, LaggedGraph};
use crate::rng::{self, stream};
use crate::tscm::{sample_tscm, MechanismPolicy, SimConfig, StabilityCriteria, Tscm};
use crate::{par, Error, Result};

/// Guard added to the range in min–max normalization.
pub const MINMAX_EPS: f64 = 1e-8;
/// Standard deviation of padding noise (variance 0.01).
pub const PAD_NOISE_STD: f64 = 0.1;
/// Tag of generated instances in a mixture.
pub const SYNTHETIC: &str = "synthetic";

/// Per-column `(x - min) / (max - min + eps)`; constant columns become 0.
pub fn minmax_normalize(series: &Array2<f64>) -> Array2<f64> {
    let mut out = series.clone();
    for mut col in out.columns_mut() {
        let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        if !lo.is_finite() {
            continue;
        }
        let range = hi - lo + MINMAX_EPS;
        col.mapv_inplace(|x| (x - lo) / range);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    Synthetic {
        tscm: Tscm,
        /// Seed of the accepted attempt.
        seed: u64,
        attempts: usize,
    },
    External {
        tag: String,
        #[serde(default)]
        origin: String,
    },
}

/// One supervised pair: a `(L, V)` series and its ground-truth graph.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesInstance {
    pub id: String,
    pub series: Array2<f64>,
    pub graph: LaggedGraph,
    pub provenance: Provenance,
}

impl SeriesInstance {
    pub fn new(id: impl Into<String>, series: Array2<f64>, graph: LaggedGraph, provenance: Provenance) -> Result<Self> {
        let inst = Self { id: id.into(), series, graph, provenance };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let (_, v) = self.series.dim();
        if v != self.graph.num_vars() {
            return Err(Error::Shape(format!(
                "series has {v} columns but the graph declares {} variables",
                self.graph.num_vars()
            )));
        }
        if self.series.iter().any(|x| !x.is_finite()) {
            return Err(Error::Format(format!("instance {} has non-finite values", self.id)));
        }
        Ok(())
    }

    pub fn num_steps(&self) -> usize {
        self.series.nrows()
    }

    pub fn num_vars(&self) -> usize {
        self.series.ncols()
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let mut meta = Map::new();
        meta.insert("id".into(), Value::from(self.id.clone()));
        meta.insert("num_steps".into(), Value::from(self.num_steps()));
        meta.insert("num_vars".into(), Value::from(self.num_vars()));
        meta.insert("graph".into(), serde_json::to_value(&self.graph)?);
        meta.insert("provenance".into(), serde_json::to_value(&self.provenance)?);
        let payload: Vec<f32> = self.series.iter().map(|&x| x as f32).collect();
        container::encode(Kind::Instance, meta, &[self.num_steps(), self.num_vars()], &payload)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let frame = container::decode(bytes, Kind::Instance)?;
        let [rows, cols] = frame.shape[..] else {
            return Err(Error::Format(format!("instance shape {:?} is not 2-D", frame.shape)));
        };
        let graph: LaggedGraph = container::meta_field(&frame.meta, "graph")?;
        if graph.num_vars() != cols {
            return Err(Error::Shape(format!(
                "graph declares {} variables but the series has {cols} columns",
                graph.num_vars()
            )));
        }
        let series = Array2::from_shape_vec((rows, cols), frame.payload.iter().map(|&x| x as f64).collect())
            .map_err(|e| Error::Format(e.to_string()))?;
        let inst = SeriesInstance {
            id: container::meta_field(&frame.meta, "id")?,
            series,
            graph,
            provenance: container::meta_field(&frame.meta, "provenance")?,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// The series as stored on disk (rounded to f32).
    pub fn stored_series(&self) -> Array2<f32> {
        self.series.mapv(|x| x as f32)
    }
}

pub fn write_instance(path: &Path, inst: &SeriesInstance) -> Result<()> {
    fs::write(path, inst.encode()?).map_err(|e| Error::io(path, e))
}

pub fn read_instance(path: &Path) -> Result<SeriesInstance> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    SeriesInstance::decode(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Model input: fixed-size series, label and variable mask.
#[derive(Clone, Debug, PartialEq)]
pub struct PaddedInstance {
    /// `(l_max, v_max)`.
    pub series: Array2<f64>,
    /// `(v_max, v_max, max_lag)`.
    pub label: Array3<u8>,
    /// `true` for original (non-padded) variables.
    pub mask: Vec<bool>,
    /// Rows of the original series kept, before time padding.
    pub kept_rows: usize,
}

impl PaddedInstance {
    /// Restores the original variables and rows (exact when no truncation
    /// happened).
    pub fn unpad(&self) -> Array2<f64> {
        let v = self.mask.iter().filter(|&&m| m).count();
        self.series.slice(s![..self.kept_rows, ..v]).to_owned()
    }
}

/// Pads or truncates to `(l_max, v_max)` with Gaussian noise; the label is
/// zero-padded to `(v_max, v_max, max_lag)`.
///
/// Longer series keep their most recent `l_max` rows. Instances with more
/// than `v_max` variables are rejected.
pub fn pad_instance(
    inst: &SeriesInstance,
    l_max: usize,
    v_max: usize,
    max_lag: usize,
    seed: u64,
) -> Result<PaddedInstance> {
    let (len, v) = inst.series.dim();
    if v > v_max {
        return Err(Error::Shape(format!("instance {} has {v} variables, more than v_max = {v_max}", inst.id)));
    }
    if l_max == 0 {
        return Err(Error::config("l_max must be positive"));
    }
    let label = inst.graph.padded_tensor(v_max, max_lag)?;
    let kept_rows = len.min(l_max);
    let mut rng = rng::child_rng(seed, stream::PADDING, 0);
    let noise = Normal::new(0.0, PAD_NOISE_STD).expect("valid std");
    let mut series = Array2::zeros((l_max, v_max));
    series.slice_mut(s![..kept_rows, ..v]).assign(&inst.series.slice(s![len - kept_rows.., ..]));
    // Fill padded rows, then padded columns, in a fixed order.
    for t in kept_rows..l_max {
        for j in 0..v {
            series[[t, j]] = noise.sample(&mut rng);
        }
    }
    for t in 0..l_max {
        for j in v..v_max {
            series[[t, j]] = noise.sample(&mut rng);
        }
    }
    let mask = (0..v_max).map(|j| j < v).collect();
    Ok(PaddedInstance { series, label, mask, kept_rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub source: String,
    pub proportion: f64,
}

/// Everything needed to regenerate a corpus bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    pub count: usize,
    /// Inclusive range of variable counts.
    pub vars: (usize, usize),
    /// Inclusive range of edge densities.
    pub density: (f64, f64),
    pub num_steps: usize,
    pub max_lag: usize,
    pub min_lag: usize,
    pub allow_self_lagged: bool,
    pub warmup: usize,
    pub clamp_abs: f64,
    pub policy: MechanismPolicy,
    pub stability: StabilityCriteria,
    pub max_attempts: usize,
    pub mixture: Vec<MixtureComponent>,
    /// Directories of instance files for non-synthetic mixture sources.
    pub external_pools: BTreeMap<String, PathBuf>,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            count: 100,
            vars: (3, 5),
            density: (0.1, 0.4),
            num_steps: 500,
            max_lag: 3,
            min_lag: 1,
            allow_self_lagged: true,
            warmup: SimConfig::default().warmup,
            clamp_abs: SimConfig::default().clamp_abs,
            policy: MechanismPolicy::default(),
            stability: StabilityCriteria::default(),
            max_attempts: 100,
            mixture: vec![MixtureComponent { source: SYNTHETIC.into(), proportion: 1.0 }],
            external_pools: BTreeMap::new(),
            seed: 0,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.vars.0 < 2 || self.vars.0 > self.vars.1 {
            return Err(Error::config(format!("variable range {:?} must satisfy 2 <= min <= max", self.vars)));
        }
        let (dlo, dhi) = self.density;
        if !(dlo > 0.0 && dlo <= dhi && dhi <= 1.0) {
            return Err(Error::config(format!("density range {:?} must lie in (0, 1]", self.density)));
        }
        if self.max_attempts == 0 || self.max_attempts > 65_536 {
            return Err(Error::config("max_attempts must lie in 1..=65536"));
        }
        self.sim_config().validate(self.max_lag)?;
        if self.min_lag == 0 || self.min_lag > self.max_lag {
            return Err(Error::config("need 1 <= min_lag <= max_lag"));
        }
        self.policy.validate()?;
        if self.mixture.is_empty() {
            return Err(Error::config("mixture is empty"));
        }
        let mut total = 0.0;
        for c in &self.mixture {
            if !(0.0..=1.0).contains(&c.proportion) {
                return Err(Error::config(format!("proportion of {} outside [0, 1]", c.source)));
            }
            if c.source != SYNTHETIC && !self.external_pools.contains_key(&c.source) {
                return Err(Error::config(format!("no external pool for mixture source {:?}", c.source)));
            }
            total += c.proportion;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("mixture proportions sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig { num_steps: self.num_steps, warmup: self.warmup, clamp_abs: self.clamp_abs }
    }

    /// Instance counts per mixture component, largest-remainder rounding.
    pub fn mixture_counts(&self) -> Vec<usize> {
        split_counts(self.count, &self.mixture.iter().map(|c| c.proportion).collect::<Vec<_>>())
    }
}

/// Splits `total` by `weights` (summing to 1) with largest-remainder rounding;
/// ties go to the earlier component.
pub fn split_counts(total: usize, weights: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for &k in order.iter().take(total.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

/// Seed of attempt `attempt` of instance `index`.
pub fn instance_seed(corpus_seed: u64, index: usize, attempt: usize) -> u64 {
    rng::derive(rng::derive(corpus_seed, stream::INSTANCE, index as u64), stream::INSTANCE, attempt as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub index: usize,
    pub attempt: usize,
    pub seed: u64,
    pub reason: String,
}

/// Generates one synthetic instance, retrying unstable draws with fresh seeds.
pub fn generate_instance(spec: &CorpusSpec, index: usize) -> Result<(SeriesInstance, Vec<Rejection>)> {
    let mut rejections = Vec::new();
    let sim = spec.sim_config();
    for attempt in 0..spec.max_attempts {
        let seed = instance_seed(spec.seed, index, attempt);
        let mut rng = rng::child_rng(seed, stream::MIXTURE, 0);
        let num_vars = rng.random_range(spec.vars.0..=spec.vars.1);
        let density = if spec.density.1 > spec.density.0 {
            rng.random_range(spec.density.0..=spec.density.1)
        } else {
            spec.density.0
        };
        let graph = sample_er_graph(&GraphConfig {
            num_vars,
            max_lag: spec.max_lag,
            edge_density: density,
            allow_self_lagged: spec.allow_self_lagged,
            min_lag: spec.min_lag,
            seed,
        })?;
        let tscm = sample_tscm(&graph, &spec.policy, seed)?;
        let screen = tscm.stability_screen(&sim);
        let reject = |reason: String| Rejection { index, attempt, seed, reason };
        if !screen.is_stable(&spec.stability) {
            rejections.push(reject(format!(
                "unstable probe: overflow={} max_abs={:.3e} variance_ratio={:.3} mean_shift={:.3} min_variance={:.3e}",
                screen.overflow, screen.max_abs, screen.max_variance_ratio, screen.max_mean_shift, screen.min_variance
            )));
            continue;
        }
        let series = match tscm.simulate(&sim) {
            Ok(x) => x,
            Err(e @ Error::NonFinite { .. }) => {
                rejections.push(reject(e.to_string()));
                continue;
            }
            Err(e) => return Err(e),
        };
        let inst = SeriesInstance::new(
            instance_id(index),
            minmax_normalize(&series),
            graph,
            Provenance::Synthetic { tscm, seed, attempts: attempt + 1 },
        )?;
        return Ok((inst, rejections));
    }
    Err(Error::config(format!(
        "instance {index}: no stable model after {} attempts; last: {}",
        spec.max_attempts,
        rejections.last().map_or("", |r| r.reason.as_str())
    )))
}

pub fn instance_id(index: usize) -> String {
    format!("{index:07}")
}

pub fn instance_file_name(index: usize) -> String {
    format!("{index:07}.tci")
}

pub const MANIFEST: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub file: String,
    pub id: String,
    pub source: String,
    pub seed: u64,
    pub attempts: usize,
    pub num_vars: usize,
    pub num_edges: usize,
    /// Container trailer hash, hex.
    pub hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub spec: CorpusSpec,
    pub count: usize,
    pub rejection_count: usize,
    pub rejections: Vec<Rejection>,
    pub instances: Vec<ManifestEntry>,
    /// SHA-256 over all instance files in index order, hex.
    pub content_hash: String,
}

/// Destination of corpus files.
pub trait CorpusSink {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()>;
}

/// Writes files into an existing directory.
pub struct DirSink {
    dir: PathBuf,
}

impl DirSink {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        match fs::metadata(&dir) {
            Ok(m) if m.is_dir() => Ok(Self { dir }),
            Ok(_) => Err(Error::io(&dir, std::io::Error::other("not a directory"))),
            Err(e) => Err(Error::io(&dir, e)),
        }
    }
}

impl CorpusSink for DirSink {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(path, e))
    }
}

/// Keeps files in memory, in write order.
#[derive(Default)]
pub struct MemorySink {
    pub files: Vec<(String, Vec<u8>)>,
}

impl CorpusSink for MemorySink {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        self.files.push((name.to_owned(), bytes.to_vec()));
        Ok(())
    }
}

const CHUNK: usize = 64;

enum Planned {
    Synthetic,
    External { tag: String, path: PathBuf },
}

fn plan(spec: &CorpusSpec) -> Result<Vec<Planned>> {
    let counts = spec.mixture_counts();
    let mut plan: Vec<Planned> = Vec::with_capacity(spec.count);
    for (component, &n) in spec.mixture.iter().zip(&counts) {
        if n == 0 {
            continue;
        }
        if component.source == SYNTHETIC {
            plan.extend((0..n).map(|_| Planned::Synthetic));
            continue;
        }
        let dir = &spec.external_pools[&component.source];
        let mut pool = list_instance_files(dir)?;
        if pool.is_empty() {
            return Err(Error::config(format!("external pool {} is empty", dir.display())));
        }
        let mut rng = rng::child_rng(spec.seed, stream::MIXTURE, hash_tag(&component.source));
        pool.shuffle(&mut rng);
        plan.extend(
            pool.iter().cycle().take(n).map(|p| Planned::External { tag: component.source.clone(), path: p.clone() }),
        );
    }
    let mut rng = rng::child_rng(spec.seed, stream::MIXTURE, u64::MAX);
    plan.shuffle(&mut rng);
    Ok(plan)
}

fn hash_tag(tag: &str) -> u64 {
    container::hash64(tag.as_bytes())
}

/// Instance files (`*.tci`) in `dir`, sorted by name.
pub fn list_instance_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "tci") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

struct Built {
    bytes: Vec<u8>,
    entry: ManifestEntry,
    rejections: Vec<Rejection>,
}

fn build_one(spec: &CorpusSpec, index: usize, planned: &Planned) -> Result<Built> {
    let (inst, rejections, source, seed) = match planned {
        Planned::Synthetic => {
            let (inst, rej) = generate_instance(spec, index)?;
            let seed = match &inst.provenance {
                Provenance::Synthetic { seed, .. } => *seed,
                Provenance::External { .. } => unreachable!(),
            };
            (inst, rej, SYNTHETIC.to_owned(), seed)
        }
        Planned::External { tag, path } => {
            let src = read_instance(path)?;
            let origin = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let inst = SeriesInstance::new(
                instance_id(index),
                minmax_normalize(&src.series),
                src.graph,
                Provenance::External { tag: tag.clone(), origin },
            )?;
            (inst, Vec::new(), tag.clone(), 0)
        }
    };
    let bytes = inst.encode()?;
    let hash = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().expect("8 bytes"));
    let attempts = rejections.len() + 1;
    Ok(Built {
        entry: ManifestEntry {
            index,
            file: instance_file_name(index),
            id: inst.id.clone(),
            source,
            seed,
            attempts,
            num_vars: inst.num_vars(),
            num_edges: inst.graph.num_edges(),
            hash: format!("{hash:016x}"),
        },
        bytes,
        rejections,
    })
}

/// Streams `spec.count` instances into `sink` followed by `manifest.json`.
///
/// Instances are generated in parallel chunks and written in index order,
/// so the output does not depend on `jobs`.
pub fn build_corpus(spec: &CorpusSpec, sink: &mut dyn CorpusSink, jobs: usize) -> Result<Manifest> {
    spec.validate()?;
    let plan = plan(spec)?;
    let mut hasher = Sha256::new();
    let mut instances = Vec::with_capacity(spec.count);
    let mut rejections = Vec::new();
    for start in (0..plan.len()).step_by(CHUNK) {
        let end = (start + CHUNK).min(plan.len());
        let built =
            par::with_jobs(jobs, || par::map_range(end - start, |k| build_one(spec, start + k, &plan[start + k])));
        for b in built {
            let b = b?;
            sink.put(&b.entry.file, &b.bytes)?;
            hasher.update(&b.bytes);
            instances.push(b.entry);
            rejections.extend(b.rejections);
        }
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        spec: spec.clone(),
        count: instances.len(),
        rejection_count: rejections.len(),
        rejections,
        instances,
        content_hash: hasher.finalize().iter().map(|b| format!("{b:02x}")).collect(),
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    sink.put(MANIFEST, &json)?;
    Ok(manifest)
}

/// Read access to a corpus directory.
pub struct Corpus {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl Corpus {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        let path = dir.join(MANIFEST);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest =
            serde_json::from_slice(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        Ok(Self { dir, manifest })
    }

    pub fn len(&self) -> usize {
        self.manifest.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.instances.is_empty()
    }

    pub fn path(&self, k: usize) -> PathBuf {
        self.dir.join(&self.manifest.instances[k].file)
    }

    pub fn load(&self, k: usize) -> Result<SeriesInstance> {
        read_instance(&self.path(k))
    }

    pub fn load_all(&self) -> Result<Vec<SeriesInstance>> {
        par::map_range(self.len(), |k| self.load(k)).into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::illustrative;

    fn inst(len: usize, v: usize) -> SeriesInstance {
        let series = Array2::from_shape_fn((len, v), |(t, j)| (t * 7 + j * 3) as f64 % 11.0);
        let graph = LaggedGraph::from_edges(v, 3, [crate::graph::LaggedEdge { source: 0, target: 1, lag: 2 }]).unwrap();
        SeriesInstance::new("x", series, graph, Provenance::External { tag: "t".into(), origin: String::new() })
            .unwrap()
    }

    #[test]
    fn minmax_examples() {
        let col = |v: &[f64]| Array2::from_shape_vec((v.len(), 1), v.to_vec()).unwrap();
        let out = minmax_normalize(&col(&[1.0, 2.0, 3.0]));
        for (a, b) in out.iter().zip([0.0, 0.5, 1.0]) {
            assert!((a - b).abs() < 1e-7);
        }
        assert!(minmax_normalize(&col(&[5.0; 3])).iter().all(|&x| x == 0.0));
        let out = minmax_normalize(&col(&[-2.0, 0.0, 2.0]));
        for (a, b) in out.iter().zip([0.0, 0.5, 1.0]) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn pad_to_fig3_layout() {
        let p = pad_instance(&inst(500, 3), 500, 12, 3, 1).unwrap();
        assert_eq!(p.series.dim(), (500, 12));
        assert_eq!(p.label.dim(), (12, 12, 3));
        assert_eq!(p.label.sum(), 1);
        assert_eq!(p.label[[1, 0, 1]], 1);
        assert_eq!(p.mask.iter().filter(|&&m| m).count(), 3);
    }

    #[test]
    fn pad_identity_when_sizes_match() {
        let i = inst(50, 4);
        let p = pad_instance(&i, 50, 4, 3, 1).unwrap();
        assert_eq!(p.series, i.series);
        assert_eq!(&p.label, i.graph.tensor());
    }

    #[test]
    fn truncation_keeps_latest_rows() {
        let i = inst(700, 3);
        let p = pad_instance(&i, 500, 3, 3, 1).unwrap();
        assert_eq!(p.series, i.series.slice(s![200.., ..]));
    }

    #[test]
    fn too_many_variables_rejected() {
        assert!(matches!(pad_instance(&inst(10, 5), 10, 4, 3, 0), Err(Error::Shape(_))));
    }

    #[test]
    fn instance_bytes_round_trip() {
        let m = illustrative::tscm(3);
        let series = m.simulate(&SimConfig::new(40)).unwrap();
        let i = SeriesInstance::new(
            "ex",
            series,
            m.graph().clone(),
            Provenance::Synthetic { tscm: m, seed: 3, attempts: 1 },
        )
        .unwrap();
        let back = SeriesInstance::decode(&i.encode().unwrap()).unwrap();
        assert_eq!(back.stored_series(), i.stored_series());
        assert_eq!(back.graph, i.graph);
        assert_eq!(back.provenance, i.provenance);
        assert_eq!(back.encode().unwrap(), i.encode().unwrap());
    }

    #[test]
    fn split_counts_exact() {
        assert_eq!(split_counts(100, &[0.8, 0.2]), vec![80, 20]);
        assert_eq!(split_counts(7, &[0.5, 0.5]), vec![4, 3]);
        assert_eq!(split_counts(10, &[1.0 / 3.0; 3]).iter().sum::<usize>(), 10);
        assert_eq!(split_counts(0, &[1.0]), vec![0]);
    }

    #[test]
    fn spec_validation() {
        assert!(CorpusSpec::default().validate().is_ok());
        let bad = CorpusSpec { density: (0.0, 0.2), ..CorpusSpec::default() };
        assert!(bad.validate().is_err());
        let bad = CorpusSpec {
            mixture: vec![MixtureComponent { source: SYNTHETIC.into(), proportion: 0.7 }],
            ..CorpusSpec::default()
        };
        assert!(bad.validate().is_err());
        let bad = CorpusSpec {
            policy: MechanismPolicy { kinds: vec![], ..MechanismPolicy::default() },
            ..CorpusSpec::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn empty_corpus_has_manifest() {
        let mut sink = MemorySink::default();
        let m = build_corpus(&CorpusSpec { count: 0, ..CorpusSpec::default() }, &mut sink, 1).unwrap();
        assert_eq!(m.count, 0);
        assert_eq!(sink.files.len(), 1);
        assert_eq!(sink.files[0].0, MANIFEST);
    }
}
