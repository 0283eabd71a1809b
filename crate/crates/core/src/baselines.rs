//! Classical edge scorers and bootstrap edge probabilities.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, Array3};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::container::{self, Kind};
use crate::corpus::SeriesInstance;
use crate::rng::{self, stream};
use crate::stats::{lagged_crosscorr, normalize_cc};
use crate::{lag_slice, par, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Probability,
    Confidence,
    Coefficient,
}

/// Real-valued edge scores with the adjacency-tensor layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTensor {
    pub values: Array3<f64>,
    pub kind: ScoreKind,
}

impl ScoreTensor {
    pub fn new(values: Array3<f64>, kind: ScoreKind) -> Result<Self> {
        if kind == ScoreKind::Probability && values.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Format("probability scores must lie in [0, 1]".into()));
        }
        Ok(Self { values, kind })
    }

    pub fn encode(&self, id: &str) -> Result<Vec<u8>> {
        let mut meta = Map::new();
        meta.insert("id".into(), Value::from(id));
        meta.insert("kind".into(), serde_json::to_value(self.kind)?);
        let (a, b, c) = self.values.dim();
        let payload: Vec<f32> = self.values.iter().map(|&x| x as f32).collect();
        container::encode(Kind::Scores, meta, &[a, b, c], &payload)
    }

    /// Returns the instance id and the scores.
    pub fn decode(bytes: &[u8]) -> Result<(String, Self)> {
        let frame = container::decode(bytes, Kind::Scores)?;
        let [a, b, c] = frame.shape[..] else {
            return Err(Error::Format(format!("score shape {:?} is not 3-D", frame.shape)));
        };
        if a != b {
            return Err(Error::Format(format!("score tensor {a}x{b}x{c} is not square")));
        }
        let values = Array3::from_shape_vec((a, b, c), frame.payload.iter().map(|&x| x as f64).collect())
            .map_err(|e| Error::Format(e.to_string()))?;
        let id = container::meta_field(&frame.meta, "id")?;
        Ok((id, Self::new(values, container::meta_field(&frame.meta, "kind")?)?))
    }
}

/// Anything that turns a `(L, V)` series into a `(V, V, max_lag)` score tensor.
pub trait Scorer: Sync {
    fn name(&self) -> String;
    fn max_lag(&self) -> usize;
    fn score(&self, series: &Array2<f64>) -> Result<ScoreTensor>;
}

/// Normalized absolute lagged cross-correlation.
#[derive(Clone, Copy, Debug)]
pub struct CorrScorer {
    pub max_lag: usize,
}

impl Scorer for CorrScorer {
    fn name(&self) -> String {
        "corr".into()
    }

    fn max_lag(&self) -> usize {
        self.max_lag
    }

    fn score(&self, series: &Array2<f64>) -> Result<ScoreTensor> {
        let cc = lagged_crosscorr(series, self.max_lag, series.ncols())?;
        ScoreTensor::new(normalize_cc(&cc).values, ScoreKind::Confidence)
    }
}

pub fn corr_scorer(inst: &SeriesInstance, max_lag: usize) -> Result<ScoreTensor> {
    CorrScorer { max_lag }.score(&inst.series)
}

/// Ridge-regularized VAR(max_lag) fitted per target; scores are absolute
/// coefficient t-statistics.
///
/// The penalty is `ridge * trace(X'X) / p` on every lag coefficient (never
/// the intercept); `ridge = 0` is ordinary least squares.
#[derive(Clone, Copy, Debug)]
pub struct VarGrangerScorer {
    pub max_lag: usize,
    pub ridge: f64,
}

pub const DEFAULT_RIDGE: f64 = 1e-3;

impl VarGrangerScorer {
    pub fn new(max_lag: usize) -> Self {
        Self { max_lag, ridge: DEFAULT_RIDGE }
    }
}

impl Scorer for VarGrangerScorer {
    fn name(&self) -> String {
        "var".into()
    }

    fn max_lag(&self) -> usize {
        self.max_lag
    }

    fn score(&self, series: &Array2<f64>) -> Result<ScoreTensor> {
        let (len, v) = series.dim();
        let lag = self.max_lag;
        if lag == 0 {
            return Err(Error::config("max_lag must be at least 1"));
        }
        if len <= v * lag + 10 {
            return Err(Error::SeriesTooShort { len, required: v * lag + 10 });
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::config("ridge must be non-negative"));
        }
        let n = len - lag;
        let p = 1 + v * lag;
        // Column 1 + (lag - 1) * v + i holds X^i_{t - lag}.
        let design = DMatrix::from_fn(n, p, |r, c| {
            if c == 0 {
                1.0
            } else {
                let l = (c - 1) / v + 1;
                let i = (c - 1) % v;
                series[[r + lag - l, i]]
            }
        });
        let mut gram = design.transpose() * &design;
        let penalty = self.ridge * (1..p).map(|k| gram[(k, k)]).sum::<f64>() / (p - 1) as f64;
        for k in 1..p {
            gram[(k, k)] += penalty;
        }
        let chol =
            gram.cholesky().ok_or_else(|| Error::Singular(format!("{n}x{p} lag design is not positive definite")))?;
        let inv = chol.inverse();
        let dof = n.saturating_sub(p).max(1) as f64;
        let mut values = Array3::zeros((v, v, lag));
        for j in 0..v {
            let y = DVector::from_fn(n, |r, _| series[[r + lag, j]]);
            let beta = chol.solve(&(design.transpose() * &y));
            let resid = &y - &design * &beta;
            let scale = y.iter().map(|x| x * x).sum::<f64>() / n as f64;
            let sigma2 = (resid.norm_squared() / dof).max(1e-30 * scale.max(f64::MIN_POSITIVE));
            for l in 1..=lag {
                for i in 0..v {
                    let c = 1 + (l - 1) * v + i;
                    let se = (sigma2 * inv[(c, c)]).sqrt();
                    values[[j, i, lag_slice(lag, l)]] = (beta[c] / se).abs();
                }
            }
        }
        if values.iter().any(|x: &f64| x.is_nan()) {
            return Err(Error::Singular("NaN t-statistic".into()));
        }
        ScoreTensor::new(values, ScoreKind::Confidence)
    }
}

pub fn var_granger_scorer(inst: &SeriesInstance, max_lag: usize, ridge: f64) -> Result<ScoreTensor> {
    VarGrangerScorer { max_lag, ridge }.score(&inst.series)
}

/// Rule turning one run's scores into edge indicators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum Binarize {
    /// Keep the top `q` fraction of cells (at least one); ties at the cut are kept.
    TopFraction(f64),
    /// Keep cells whose absolute score exceeds the threshold.
    Above(f64),
}

impl Binarize {
    pub fn apply(&self, scores: &Array3<f64>) -> Array3<f64> {
        match *self {
            Binarize::Above(t) => scores.mapv(|x| if x.abs() > t { 1.0 } else { 0.0 }),
            Binarize::TopFraction(q) => {
                let mut sorted: Vec<f64> = scores.iter().copied().collect();
                if sorted.is_empty() {
                    return scores.clone();
                }
                sorted.sort_by(|a, b| b.total_cmp(a));
                let k = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
                let cut = sorted[k - 1];
                scores.mapv(|x| if x >= cut { 1.0 } else { 0.0 })
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resampling {
    /// Concatenated blocks of consecutive rows with uniform start positions.
    #[default]
    MovingBlock,
    /// Independent rows drawn with replacement; destroys lag structure.
    Rows,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub n: usize,
    pub block_len: usize,
    pub binarize: Binarize,
    pub resampling: Resampling,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            n: 10,
            block_len: 25,
            binarize: Binarize::TopFraction(0.15),
            resampling: Resampling::MovingBlock,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self, max_lag: usize) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("bootstrap needs at least one resample"));
        }
        if self.resampling == Resampling::MovingBlock && self.block_len < max_lag + 1 {
            return Err(Error::config(format!(
                "block length {} shorter than max_lag + 1 = {}",
                self.block_len,
                max_lag + 1
            )));
        }
        if let Binarize::TopFraction(q) = self.binarize {
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::config(format!("top fraction {q} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Resampled copy of `series` with the same number of rows.
pub fn resample(series: &Array2<f64>, cfg: &BootstrapConfig, rng: &mut rng::Rng) -> Array2<f64> {
    let (len, v) = series.dim();
    let mut out = Array2::zeros((len, v));
    match cfg.resampling {
        Resampling::Rows => {
            for t in 0..len {
                out.row_mut(t).assign(&series.row(rng.random_range(0..len)));
            }
        }
        Resampling::MovingBlock => {
            let block = cfg.block_len.clamp(1, len);
            let mut t = 0;
            while t < len {
                let start = rng.random_range(0..=len - block);
                let take = block.min(len - t);
                out.slice_mut(ndarray::s![t..t + take, ..]).assign(&series.slice(ndarray::s![start..start + take, ..]));
                t += take;
            }
        }
    }
    out
}

/// Fraction of bootstrap resamples in which each edge is selected.
///
/// Failed resamples are skipped and the average runs over the successful
/// ones; if at least half fail the whole estimate fails.
pub fn bootstrap_probabilities(
    series: &Array2<f64>,
    scorer: &dyn Scorer,
    cfg: &BootstrapConfig,
) -> Result<ScoreTensor> {
    cfg.validate(scorer.max_lag())?;
    let runs = par::map_range(cfg.n, |b| {
        let mut rng = rng::child_rng(cfg.seed, stream::BOOTSTRAP, b as u64);
        let sample = resample(series, cfg, &mut rng);
        scorer.score(&sample).map(|s| cfg.binarize.apply(&s.values))
    });
    let mut sum: Option<Array3<f64>> = None;
    let (mut ok, mut failed, mut last) = (0usize, 0usize, String::new());
    for run in runs {
        match run {
            Ok(ind) => {
                ok += 1;
                match sum.as_mut() {
                    Some(s) => *s += &ind,
                    None => sum = Some(ind),
                }
            }
            Err(e) => {
                failed += 1;
                last = e.to_string();
            }
        }
    }
    if 2 * failed >= cfg.n || ok == 0 {
        return Err(Error::Bootstrap { failed, total: cfg.n, last });
    }
    let values = sum.expect("at least one success") / ok as f64;
    ScoreTensor::new(values, ScoreKind::Probability)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Corr,
    Var,
}

impl Method {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "corr" => Some(Method::Corr),
            "var" | "var-granger" | "granger" => Some(Method::Var),
            _ => None,
        }
    }

    pub fn scorer(self, max_lag: usize, ridge: f64) -> Box<dyn Scorer> {
        match self {
            Method::Corr => Box::new(CorrScorer { max_lag }),
            Method::Var => Box::new(VarGrangerScorer { max_lag, ridge }),
        }
    }
}
