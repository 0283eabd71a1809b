use std::path::PathBuf;

use clap::Args;
use lagcd_core::corpus::{build_corpus, instance_file_name, CorpusSpec, DirSink, MixtureComponent};
use lagcd_core::tscm::{MechanismKind, Wrap, WrapPolicy};
use lagcd_core::{container, illustrative};
use serde::Serialize;

use crate::common::{self, ensure_dir, parse_pair, parse_range};
use crate::error::{CliError, CliResult};
use crate::Globals;

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Existing output directory.
    pub out: PathBuf,
    #[arg(long)]
    pub count: Option<usize>,
    /// Variable count range, `lo:hi`.
    #[arg(long, value_parser = parse_range::<usize>)]
    pub vars: Option<(usize, usize)>,
    /// Edge density range, `lo:hi`.
    #[arg(long, value_parser = parse_range::<f64>)]
    pub density: Option<(f64, f64)>,
    /// Time steps per instance.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub max_lag: Option<usize>,
    #[arg(long)]
    pub min_lag: Option<usize>,
    /// Never sample autoregressive edges.
    #[arg(long)]
    pub no_self_lagged: bool,
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Mechanism kinds, comma separated (e.g. `linear,tanh`).
    #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
    pub kinds: Option<Vec<MechanismKind>>,
    /// Parent weight magnitude range, `lo:hi`.
    #[arg(long, value_parser = parse_range::<f64>)]
    pub weights: Option<(f64, f64)>,
    /// Which mechanisms get a bounded wrap: unbounded, always or never.
    #[arg(long, value_parser = parse_enum::<WrapPolicy>)]
    pub wrap_policy: Option<WrapPolicy>,
    /// Bounded wrap function: tanh or sigmoid.
    #[arg(long, value_parser = parse_enum::<Wrap>)]
    pub wrap: Option<Wrap>,
    #[arg(long)]
    pub wrap_scale: Option<f64>,
    #[arg(long)]
    pub max_attempts: Option<usize>,
    /// Mixture component `source=proportion`; repeatable.
    #[arg(long, value_parser = parse_pair::<f64>)]
    pub mixture: Vec<(String, f64)>,
    /// Directory of instance files for a mixture source, `source=DIR`; repeatable.
    #[arg(long, value_parser = parse_pair::<PathBuf>)]
    pub pool: Vec<(String, PathBuf)>,
    /// Write only the three-variable worked example (`--steps` rows).
    #[arg(long)]
    pub illustrative: bool,
}

fn parse_kind(s: &str) -> Result<MechanismKind, String> {
    MechanismKind::parse(s).ok_or_else(|| format!("unknown mechanism kind {s:?}"))
}

pub fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase())).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Output<'a> {
    command: &'static str,
    out_dir: String,
    count: usize,
    rejection_count: usize,
    content_hash: &'a str,
    spec: &'a CorpusSpec,
}

pub fn resolve(g: &Globals, a: &GenerateArgs) -> CliResult<CorpusSpec> {
    let (mut spec, raw): (CorpusSpec, _) = common::load_config(g.config.as_deref())?;
    spec.seed = common::resolve_seed(g, &raw)?;
    macro_rules! set {
        ($field:expr, $value:expr) => {
            if let Some(v) = $value {
                $field = v;
            }
        };
    }
    set!(spec.count, a.count);
    set!(spec.vars, a.vars);
    set!(spec.density, a.density);
    set!(spec.num_steps, a.steps);
    set!(spec.max_lag, a.max_lag);
    set!(spec.min_lag, a.min_lag);
    set!(spec.warmup, a.warmup);
    set!(spec.max_attempts, a.max_attempts);
    set!(spec.policy.kinds, a.kinds.clone());
    set!(spec.policy.weight_range, a.weights);
    set!(spec.policy.wrap_policy, a.wrap_policy);
    set!(spec.policy.wrap, a.wrap);
    set!(spec.policy.wrap_scale, a.wrap_scale);
    if a.no_self_lagged {
        spec.allow_self_lagged = false;
    }
    if !a.mixture.is_empty() {
        spec.mixture =
            a.mixture.iter().map(|(source, p)| MixtureComponent { source: source.clone(), proportion: *p }).collect();
    }
    for (tag, dir) in &a.pool {
        spec.external_pools.insert(tag.clone(), dir.clone());
    }
    spec.validate().map_err(|e| CliError::config(e.to_string()))?;
    Ok(spec)
}

#[derive(Serialize)]
struct IllustrativeOutput {
    command: &'static str,
    out_dir: String,
    count: usize,
    num_steps: usize,
    seed: u64,
    hash: String,
}

fn run_illustrative(g: &Globals, a: &GenerateArgs, spec: &CorpusSpec) -> CliResult<()> {
    let inst = illustrative::instance(spec.num_steps, spec.seed)?;
    let bytes = inst.encode()?;
    common::write_bytes(&a.out.join(instance_file_name(0)), &bytes)?;
    let hash = format!("{:016x}", container::hash64(&bytes));
    let out = IllustrativeOutput {
        command: "generate",
        out_dir: a.out.display().to_string(),
        count: 1,
        num_steps: spec.num_steps,
        seed: spec.seed,
        hash,
    };
    common::emit(g, &out, || format!("instances:    1 (worked example)\nfile hash:    {}\n", out.hash))
}

pub fn run(g: &Globals, a: GenerateArgs) -> CliResult<()> {
    let spec = resolve(g, &a)?;
    ensure_dir(&a.out)?;
    if a.illustrative {
        return run_illustrative(g, &a, &spec);
    }
    let mut sink = DirSink::new(&a.out)?;
    let manifest = build_corpus(&spec, &mut sink, g.jobs)?;
    let out = Output {
        command: "generate",
        out_dir: a.out.display().to_string(),
        count: manifest.count,
        rejection_count: manifest.rejection_count,
        content_hash: &manifest.content_hash,
        spec: &manifest.spec,
    };
    common::emit(g, &out, || {
        format!(
            "instances:    {}\nrejections:   {}\ncontent hash: {}\n",
            manifest.count, manifest.rejection_count, manifest.content_hash
        )
    })
}
