use std::path::{Path, PathBuf};

use clap::Args;
use lagcd_core::model::{self as toy, History, InputConfig, LossConfig, ToyPredictor, TrainConfig};
use lagcd_core::par;
use lagcd_core::stats::{CcNormalization, EvalReport};
use serde::{Deserialize, Serialize};

use crate::common::{self, ensure_dir, load_instances};
use crate::error::{CliError, CliResult};
use crate::generate::parse_enum;
use crate::Globals;

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Corpus directory or instance file.
    pub corpus: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    pub model: PathBuf,
    /// Per-epoch history CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub v_max: Option<usize>,
    #[arg(long)]
    pub max_lag: Option<usize>,
    #[arg(long)]
    pub l_max: Option<usize>,
    #[arg(long)]
    pub lambda_edge: Option<f64>,
    #[arg(long)]
    pub lambda_corr: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Correlation feature normalization: abs_max or abs.
    #[arg(long, value_parser = parse_enum::<CcNormalization>)]
    pub cc_normalization: Option<CcNormalization>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainRunConfig {
    pub input: InputConfig,
    pub hidden: usize,
    pub loss: LossConfig,
    pub train: TrainConfig,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        Self { input: InputConfig::default(), hidden: 64, loss: LossConfig::default(), train: TrainConfig::default() }
    }
}

#[derive(Serialize)]
struct TrainOutput<'a> {
    command: &'static str,
    model: String,
    config: &'a TrainRunConfig,
    num_params: usize,
    history: &'a History,
}

fn resolve_train(g: &Globals, a: &TrainArgs) -> CliResult<TrainRunConfig> {
    let (mut cfg, raw): (TrainRunConfig, _) = common::load_config(g.config.as_deref())?;
    let seed_src = if raw.get("seed").is_some() { raw.clone() } else { raw.get("train").cloned().unwrap_or_default() };
    cfg.train.seed = common::resolve_seed(g, &seed_src)?;
    macro_rules! set {
        ($field:expr, $value:expr) => {
            if let Some(v) = $value {
                $field = v;
            }
        };
    }
    set!(cfg.hidden, a.hidden);
    set!(cfg.train.epochs, a.epochs);
    set!(cfg.train.batch_size, a.batch_size);
    set!(cfg.train.learning_rate, a.lr);
    set!(cfg.train.momentum, a.momentum);
    set!(cfg.train.val_fraction, a.val_fraction);
    set!(cfg.train.patience, a.patience);
    set!(cfg.input.v_max, a.v_max);
    set!(cfg.input.max_lag, a.max_lag);
    set!(cfg.input.l_max, a.l_max);
    set!(cfg.input.cc_normalization, a.cc_normalization);
    set!(cfg.loss.lambda_edge, a.lambda_edge);
    set!(cfg.loss.lambda_corr, a.lambda_corr);
    set!(cfg.loss.gamma, a.gamma);
    cfg.loss.validate().map_err(|e| CliError::config(e.to_string()))?;
    if cfg.hidden == 0 || cfg.input.v_max < 2 || cfg.input.max_lag == 0 || cfg.input.l_max == 0 {
        return Err(CliError::config("hidden, v_max (>= 2), max_lag and l_max must be positive"));
    }
    if !(0.0..1.0).contains(&cfg.train.val_fraction) {
        return Err(CliError::config("val_fraction must lie in [0, 1)"));
    }
    Ok(cfg)
}

/// Sidecar recording the resolved training configuration.
fn run_record_path(model: &Path) -> PathBuf {
    let mut name = model.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".json");
    model.with_file_name(name)
}

pub fn train(g: &Globals, a: TrainArgs) -> CliResult<()> {
    let cfg = resolve_train(g, &a)?;
    let instances = load_instances(&a.corpus)?;
    if instances.is_empty() {
        return Err(CliError::config("training corpus is empty"));
    }
    let samples = toy::prepare_all(&instances, &cfg.input, cfg.train.seed)?;
    let init = ToyPredictor::init(cfg.input.v_max, cfg.input.max_lag, cfg.hidden, cfg.train.seed);
    let (model, history) = toy::train(&samples, init, &cfg.loss, &cfg.train)?;
    model.save(&a.model)?;
    common::write_json(&run_record_path(&a.model), &cfg)?;
    if let Some(path) = &a.history {
        toy::write_history(path, &history)?;
    }
    let out = TrainOutput {
        command: "train",
        model: a.model.display().to_string(),
        config: &cfg,
        num_params: model.num_params(),
        history: &history,
    };
    common::emit(g, &out, || {
        let mut s = String::from("epoch  train_loss  val_loss  val_auc\n");
        for r in &history.epochs {
            s.push_str(&format!("{:>5}  {:>10.5}  {:>8.5}  {:>7.4}\n", r.epoch, r.train_loss, r.val_loss, r.val_auc));
        }
        match history.best_epoch {
            Some(e) => {
                s.push_str(&format!("kept epoch {e}{}\n", if history.stopped_early { " (early stop)" } else { "" }))
            }
            None => s.push_str("no epochs run; model unchanged\n"),
        }
        s
    })
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Corpus directory or instance file.
    pub input: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Series length fed to the model (pad or truncate).
    #[arg(long)]
    pub l_max: Option<usize>,
    /// Directory receiving one score file per instance.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the evaluation report JSON here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictConfig {
    pub l_max: usize,
    pub seed: u64,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self { l_max: InputConfig::default().l_max, seed: 0 }
    }
}

#[derive(Serialize)]
struct PredictOutput<'a> {
    command: &'static str,
    model: String,
    config: &'a PredictConfig,
    report: &'a EvalReport,
}

pub fn predict(g: &Globals, a: PredictArgs) -> CliResult<()> {
    let (mut cfg, raw): (PredictConfig, _) = common::load_config(g.config.as_deref())?;
    cfg.seed = common::resolve_seed(g, &raw)?;
    if let Some(l) = a.l_max {
        cfg.l_max = l;
    }
    if cfg.l_max == 0 {
        return Err(CliError::config("l_max must be positive"));
    }
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
    }
    let model = ToyPredictor::load(&a.model)?;
    let instances = load_instances(&a.input)?;
    let scores: Vec<_> = par::map_slice(&instances, |inst| toy::predict(&model, inst, cfg.l_max, cfg.seed))
        .into_iter()
        .collect::<Result<_, _>>()?;
    if let Some(dir) = &a.out {
        for (inst, s) in instances.iter().zip(&scores) {
            common::write_bytes(&common::score_file(dir, &inst.id), &s.encode(&inst.id)?)?;
        }
        common::write_json(&dir.join("run.json"), &cfg)?;
    }
    let values: Vec<_> = scores.into_iter().map(|s| s.values).collect();
    let report = common::report("toy", &instances, &values)?;
    if let Some(path) = &a.report {
        common::write_json(path, &report)?;
    }
    let out = PredictOutput { command: "predict", model: a.model.display().to_string(), config: &cfg, report: &report };
    common::emit(g, &out, || EvalReport::table(&[&report]))
}
