use std::path::PathBuf;

use clap::Args;
use lagcd_core::baselines::{
    bootstrap_probabilities, Binarize, BootstrapConfig, Method, Resampling, ScoreTensor, DEFAULT_RIDGE,
};
use lagcd_core::container::hash64;
use lagcd_core::corpus::SeriesInstance;
use lagcd_core::par;
use lagcd_core::rng::{self, stream};
use lagcd_core::stats::EvalReport;
use serde::{Deserialize, Serialize};

use crate::common::{self, ensure_dir, load_instances};
use crate::error::{CliError, CliResult};
use crate::generate::parse_enum;
use crate::Globals;

#[derive(Args, Debug)]
pub struct BaselineArgs {
    /// Corpus directory or instance file.
    pub corpus: PathBuf,
    /// Scorer: `corr` or `var`.
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    /// Lags to score; defaults to each instance's own maximum lag.
    #[arg(long)]
    pub max_lag: Option<usize>,
    /// Ridge factor for `var` (relative to the mean design variance).
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Wrap the scorer in this many bootstrap resamples (0 = off).
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long)]
    pub block_len: Option<usize>,
    /// Binarize each resample by keeping this top fraction of cells.
    #[arg(long, conflicts_with = "threshold")]
    pub top_fraction: Option<f64>,
    /// Binarize each resample by thresholding absolute scores.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Resampling scheme for the bootstrap: moving_block or rows.
    #[arg(long, value_parser = parse_enum::<Resampling>)]
    pub resampling: Option<Resampling>,
    /// Directory receiving one score file per instance.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the evaluation report JSON here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| format!("unknown method {s:?} (expected corr or var)"))
}

/// Resolved settings of a baseline run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub method: Option<Method>,
    pub max_lag: Option<usize>,
    pub ridge: f64,
    /// Present when the scorer is bootstrap-wrapped.
    pub bootstrap: Option<BootstrapConfig>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { method: None, max_lag: None, ridge: DEFAULT_RIDGE, bootstrap: None }
    }
}

#[derive(Serialize)]
struct Output<'a> {
    command: &'static str,
    config: &'a BaselineConfig,
    report: &'a EvalReport,
}

fn resolve(g: &Globals, a: &BaselineArgs) -> CliResult<BaselineConfig> {
    let (mut cfg, raw): (BaselineConfig, _) = common::load_config(g.config.as_deref())?;
    if a.method.is_some() {
        cfg.method = a.method;
    }
    if a.max_lag.is_some() {
        cfg.max_lag = a.max_lag;
    }
    if let Some(r) = a.ridge {
        cfg.ridge = r;
    }
    if !(cfg.ridge >= 0.0) {
        return Err(CliError::config("ridge must be non-negative"));
    }
    if cfg.method.is_none() {
        return Err(CliError::config("--method is required (corr or var)"));
    }
    if cfg.max_lag == Some(0) {
        return Err(CliError::config("max lag must be at least 1"));
    }
    let wants_bootstrap = match a.bootstrap {
        Some(0) => false,
        Some(_) => true,
        None => cfg.bootstrap.is_some(),
    };
    cfg.bootstrap = if wants_bootstrap {
        let mut b = cfg.bootstrap.unwrap_or_default();
        if let Some(n) = a.bootstrap {
            b.n = n;
        }
        if let Some(l) = a.block_len {
            b.block_len = l;
        }
        if let Some(q) = a.top_fraction {
            b.binarize = Binarize::TopFraction(q);
        }
        if let Some(t) = a.threshold {
            b.binarize = Binarize::Above(t);
        }
        if let Some(r) = a.resampling {
            b.resampling = r;
        }
        let raw_seed = raw.get("bootstrap").cloned().unwrap_or_default();
        b.seed = common::resolve_seed(g, &raw_seed)?;
        b.validate(cfg.max_lag.unwrap_or(1)).map_err(|e| CliError::config(e.to_string()))?;
        Some(b)
    } else {
        None
    };
    Ok(cfg)
}

fn score(inst: &SeriesInstance, cfg: &BaselineConfig) -> lagcd_core::Result<ScoreTensor> {
    let max_lag = cfg.max_lag.unwrap_or(inst.graph.max_lag());
    let scorer = cfg.method.expect("resolved").scorer(max_lag, cfg.ridge);
    match &cfg.bootstrap {
        None => scorer.score(&inst.series),
        Some(b) => {
            let b = BootstrapConfig { seed: rng::derive(b.seed, stream::BOOTSTRAP, hash64(inst.id.as_bytes())), ..*b };
            bootstrap_probabilities(&inst.series, scorer.as_ref(), &b)
        }
    }
}

pub fn run(g: &Globals, a: BaselineArgs) -> CliResult<()> {
    let cfg = resolve(g, &a)?;
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
    }
    let instances = load_instances(&a.corpus)?;
    let scores: Vec<ScoreTensor> =
        par::map_slice(&instances, |inst| score(inst, &cfg)).into_iter().collect::<Result<_, _>>()?;
    if let Some(dir) = &a.out {
        for (inst, s) in instances.iter().zip(&scores) {
            common::write_bytes(&common::score_file(dir, &inst.id), &s.encode(&inst.id)?)?;
        }
        common::write_json(&dir.join("run.json"), &cfg)?;
    }
    let values: Vec<_> = scores.into_iter().map(|s| s.values).collect();
    let name = match (cfg.method.expect("resolved"), cfg.bootstrap.is_some()) {
        (Method::Corr, false) => "corr",
        (Method::Var, false) => "var",
        (Method::Corr, true) => "corr+bootstrap",
        (Method::Var, true) => "var+bootstrap",
    };
    let report = common::report(name, &instances, &values)?;
    if let Some(path) = &a.report {
        common::write_json(path, &report)?;
    }
    common::emit(g, &Output { command: "baseline", config: &cfg, report: &report }, || EvalReport::table(&[&report]))
}
