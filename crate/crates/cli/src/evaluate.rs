use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use clap::Args;
use lagcd_core::baselines::ScoreTensor;
use lagcd_core::stats::{wilcoxon_signed_rank, EvalReport, WilcoxonResult};
use lagcd_core::{par, Error};
use serde::Serialize;
use serde_json::Value;

use crate::common::{self, load_instances};
use crate::error::{CliError, CliResult};
use crate::Globals;

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Corpus directory or instance file holding the ground truth.
    pub corpus: PathBuf,
    /// Directory of `<id>.tcs` score files.
    #[arg(long)]
    pub scores: PathBuf,
    /// Method name recorded in the report.
    #[arg(long, default_value = "scores")]
    pub method: String,
    /// Write the evaluation report JSON here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    command: &'static str,
    report: &'a EvalReport,
}

pub fn eval(g: &Globals, a: EvalArgs) -> CliResult<()> {
    common::ensure_dir(&a.scores)?;
    let instances = load_instances(&a.corpus)?;
    let loaded: Vec<CliResult<ScoreTensor>> = par::map_slice(&instances, |inst| {
        let path = common::score_file(&a.scores, &inst.id);
        let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        let (id, scores) = ScoreTensor::decode(&bytes)
            .map_err(|e| CliError::from(Error::Format(format!("{}: {e}", path.display()))))?;
        if id != inst.id {
            return Err(
                Error::Format(format!("{} holds scores for {id:?}, expected {:?}", path.display(), inst.id)).into()
            );
        }
        Ok(scores)
    });
    let values: Vec<_> = loaded.into_iter().map(|r| r.map(|s| s.values)).collect::<CliResult<_>>()?;
    let report = common::report(&a.method, &instances, &values)?;
    if let Some(path) = &a.report {
        common::write_json(path, &report)?;
    }
    common::emit(g, &EvalOutput { command: "eval", report: &report }, || EvalReport::table(&[&report]))
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// Evaluation report files (two or more).
    #[arg(required = true, num_args = 2..)]
    pub reports: Vec<PathBuf>,
    /// Family-wise significance level before Bonferroni correction.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Serialize)]
struct Comparison {
    a: String,
    b: String,
    mean_a: f64,
    mean_b: f64,
    paired: usize,
    result: WilcoxonResult,
}

#[derive(Serialize)]
struct StatsOutput {
    command: &'static str,
    alpha: f64,
    comparisons: usize,
    results: Vec<Comparison>,
}

/// Accepts a bare report or any command output carrying a `report` field.
fn read_report(path: &PathBuf) -> CliResult<EvalReport> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let v: Value = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Format(format!("{}: not valid JSON: {e}", path.display())))?;
    let v = match v.get("report") {
        Some(inner) => inner.clone(),
        None => v,
    };
    serde_json::from_value(v)
        .map_err(|e| Error::Format(format!("{}: not an evaluation report: {e}", path.display())).into())
}

pub fn stats(g: &Globals, a: StatsArgs) -> CliResult<()> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(CliError::config("alpha must lie in (0, 1)"));
    }
    let reports: Vec<EvalReport> = a.reports.iter().map(read_report).collect::<CliResult<_>>()?;
    let names: Vec<String> = reports
        .iter()
        .zip(&a.reports)
        .map(|(r, p)| if r.method.is_empty() { p.display().to_string() } else { r.method.clone() })
        .collect();
    let k = reports.len() * (reports.len() - 1) / 2;
    let mut results = Vec::with_capacity(k);
    for x in 0..reports.len() {
        for y in x + 1..reports.len() {
            let bm: BTreeMap<&str, f64> = reports[y].per_dataset_auc.iter().map(|d| (d.id.as_str(), d.auc)).collect();
            let (va, vb): (Vec<f64>, Vec<f64>) =
                reports[x].per_dataset_auc.iter().filter_map(|d| bm.get(d.id.as_str()).map(|&b| (d.auc, b))).unzip();
            let result = wilcoxon_signed_rank(&va, &vb).map_err(|e| match e {
                Error::Degenerate(m) => CliError::Degenerate(format!("{} vs {}: {m}", names[x], names[y])),
                other => other.into(),
            })?;
            results.push(Comparison {
                a: names[x].clone(),
                b: names[y].clone(),
                mean_a: mean(&va),
                mean_b: mean(&vb),
                paired: va.len(),
                result: result.with_correction(a.alpha, k),
            });
        }
    }
    let out = StatsOutput { command: "stats", alpha: a.alpha, comparisons: k, results };
    common::emit(g, &out, || {
        let mut s = format!("Wilcoxon signed-rank, Bonferroni level {} / {k}\n", a.alpha);
        for c in &out.results {
            let r = &c.result;
            let verdict = match (r.significant, c.mean_a >= c.mean_b) {
                (Some(true), true) => format!("{} better", c.a),
                (Some(true), false) => format!("{} better", c.b),
                _ => "not significant".into(),
            };
            s.push_str(&format!(
                "{} vs {}: n={} W+={} p={:.4e} ({:?}) -> {verdict}\n",
                c.a, c.b, r.n_effective, r.statistic, r.p_value, r.method
            ));
        }
        s
    })
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}
