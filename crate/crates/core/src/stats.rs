//! Lagged cross-correlations, AUC and paired significance tests.

use std::fmt::Write as _;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::graph::LaggedGraph;
use crate::{lag_slice, Error, Result};

/// Lagged Pearson correlations laid out like an adjacency tensor:
/// `values[[j, i, max_lag - tau]] = corr(X^i_t, X^j_{t+tau})`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrTensor {
    pub values: Array3<f64>,
    pub normalized: bool,
}

/// Pearson correlation of two equal-length slices; 0 when either side is
/// constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    if x.is_empty() {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    let denom = (sxx * syy).sqrt();
    // Relative guard: float noise in a constant column must not produce a
    // spurious correlation.
    let scale_x = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let scale_y = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if sxx <= 1e-24 * n * scale_x * scale_x || syy <= 1e-24 * n * scale_y * scale_y || denom == 0.0 {
        return 0.0;
    }
    (sxy / denom).clamp(-1.0, 1.0)
}

/// Cross-correlations of every ordered variable pair at lags `1..=max_lag`,
/// zero-padded to `v_max` variables.
pub fn lagged_crosscorr(series: &Array2<f64>, max_lag: usize, v_max: usize) -> Result<CorrTensor> {
    let (len, v) = series.dim();
    if max_lag == 0 {
        return Err(Error::config("max_lag must be at least 1"));
    }
    if len <= max_lag + 2 {
        return Err(Error::SeriesTooShort { len, required: max_lag + 2 });
    }
    if v > v_max {
        return Err(Error::Shape(format!("{v} variables exceed the padded size {v_max}")));
    }
    let cols: Vec<Vec<f64>> = (0..v).map(|j| series.column(j).to_vec()).collect();
    let mut values = Array3::zeros((v_max, v_max, max_lag));
    for tau in 1..=max_lag {
        let s = lag_slice(max_lag, tau);
        for (i, xi) in cols.iter().enumerate() {
            let cause = &xi[..len - tau];
            for (j, xj) in cols.iter().enumerate() {
                values[[j, i, s]] = pearson(cause, &xj[tau..]);
            }
        }
    }
    Ok(CorrTensor { values, normalized: false })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CcNormalization {
    /// Absolute value divided by the largest absolute entry.
    #[default]
    AbsMax,
    /// Absolute value only.
    Abs,
}

pub fn normalize_cc(cc: &CorrTensor) -> CorrTensor {
    normalize_cc_with(cc, CcNormalization::AbsMax)
}

pub fn normalize_cc_with(cc: &CorrTensor, how: CcNormalization) -> CorrTensor {
    let mut values = cc.values.mapv(f64::abs);
    if how == CcNormalization::AbsMax {
        let max = values.iter().fold(0.0f64, |m, &x| m.max(x));
        if max > 0.0 {
            values.mapv_inplace(|x| x / max);
        }
    }
    CorrTensor { values, normalized: true }
}

/// Mann–Whitney AUC of `scores` against binary `labels`, ties credited ½.
pub fn auc_from_labels(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Degenerate("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Degenerate(format!("AUC undefined with {n_pos} positives and {n_neg} negatives")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of (doubled) midranks of the positives, kept integral.
    let mut rank_sum2: u128 = 0;
    let mut k = 0;
    while k < order.len() {
        let mut end = k + 1;
        while end < order.len() && scores[order[end]] == scores[order[k]] {
            end += 1;
        }
        // Ranks k+1..=end share the midrank (k + 1 + end) / 2.
        let midrank2 = (k + 1 + end) as u128;
        let pos_in_block = order[k..end].iter().filter(|&&ix| labels[ix]).count() as u128;
        rank_sum2 += midrank2 * pos_in_block;
        k = end;
    }
    let np = n_pos as u128;
    let u2 = rank_sum2 - np * (np + 1);
    Ok(u2 as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

/// Cells of a `(V, V, L)` tensor that belong to real variables.
pub fn masked_cells(shape: (usize, usize, usize), mask: Option<&[bool]>) -> Vec<(usize, usize, usize)> {
    let (a, b, l) = shape;
    let real = |k: usize| mask.map_or(true, |m| m.get(k).copied().unwrap_or(false));
    let mut out = Vec::with_capacity(a * b * l);
    for j in (0..a).filter(|&j| real(j)) {
        for i in (0..b).filter(|&i| real(i)) {
            for s in 0..l {
                out.push((j, i, s));
            }
        }
    }
    out
}

/// AUC over all `(j, i, slice)` cells whose variables are both unmasked.
pub fn auc(scores: &Array3<f64>, truth: &Array3<u8>, mask: Option<&[bool]>) -> Result<f64> {
    if scores.dim() != truth.dim() {
        return Err(Error::Shape(format!("score tensor {:?} vs truth {:?}", scores.dim(), truth.dim())));
    }
    let cells = masked_cells(scores.dim(), mask);
    let s: Vec<f64> = cells.iter().map(|&(j, i, l)| scores[[j, i, l]]).collect();
    let y: Vec<bool> = cells.iter().map(|&(j, i, l)| truth[[j, i, l]] == 1).collect();
    auc_from_labels(&s, &y)
}

/// AUC of a possibly padded `(v_max, v_max, max_lag)` score tensor against
/// `graph`; variables beyond the graph's count are masked out.
pub fn auc_against(scores: &Array3<f64>, graph: &LaggedGraph) -> Result<f64> {
    let (a, b, l) = scores.dim();
    if a != b {
        return Err(Error::Shape(format!("score tensor {:?} is not square in its variables", scores.dim())));
    }
    let truth = graph.padded_tensor(a, l)?;
    let mask: Vec<bool> = (0..a).map(|k| k < graph.num_vars()).collect();
    auc(scores, &truth, Some(&mask))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of ranks of the positive differences `a - b`.
    pub statistic: f64,
    pub w_minus: f64,
    pub p_value: f64,
    pub n_effective: usize,
    pub method: WilcoxonMethod,
    /// Median of the nonzero paired differences `a - b`.
    pub median_difference: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub significant_at: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub significant: Option<bool>,
}

impl WilcoxonResult {
    /// Records the verdict at the Bonferroni level `alpha / comparisons`.
    pub fn with_correction(mut self, alpha: f64, comparisons: usize) -> Self {
        let level = alpha / comparisons.max(1) as f64;
        self.significant_at = Some(level);
        self.significant = Some(self.p_value < level);
        self
    }
}

/// Largest effective sample size handled by exact enumeration.
pub const WILCOXON_EXACT_MAX_N: usize = 20;
pub const WILCOXON_MIN_N: usize = 5;

/// Two-sided Wilcoxon signed-rank test on paired samples.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    wilcoxon_signed_rank_with(a, b, None)
}

/// Absolute ranks (midranks on ties) of the nonzero differences, with signs.
pub fn signed_ranks(a: &[f64], b: &[f64]) -> Result<(Vec<f64>, Vec<bool>)> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("paired samples of length {} and {}", a.len(), b.len())));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::Degenerate("non-finite paired difference".into()));
    }
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&x, &y| d[x].abs().total_cmp(&d[y].abs()));
    let mut ranks = vec![0.0; d.len()];
    let mut k = 0;
    while k < order.len() {
        let mut end = k + 1;
        while end < order.len() && d[order[end]].abs() == d[order[k]].abs() {
            end += 1;
        }
        let mid = (k + 1 + end) as f64 / 2.0;
        for &ix in &order[k..end] {
            ranks[ix] = mid;
        }
        k = end;
    }
    Ok((ranks, d.iter().map(|x| *x > 0.0).collect()))
}

/// Like [`wilcoxon_signed_rank`], optionally forcing the null distribution.
pub fn wilcoxon_signed_rank_with(a: &[f64], b: &[f64], method: Option<WilcoxonMethod>) -> Result<WilcoxonResult> {
    let (ranks, positive) = signed_ranks(a, b)?;
    let n = ranks.len();
    if n < WILCOXON_MIN_N {
        return Err(Error::Degenerate(format!(
            "Wilcoxon test needs at least {WILCOXON_MIN_N} nonzero differences, got {n}"
        )));
    }
    let w_plus: f64 = ranks.iter().zip(&positive).filter(|(_, &p)| p).map(|(r, _)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let method =
        method.unwrap_or(if n <= WILCOXON_EXACT_MAX_N { WilcoxonMethod::Exact } else { WilcoxonMethod::Normal });
    let p_value = match method {
        WilcoxonMethod::Exact => exact_p(&ranks, w_plus)?,
        WilcoxonMethod::Normal => normal_p(&ranks, w_plus)?,
    };
    let mut diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    diffs.sort_by(f64::total_cmp);
    let median_difference = if n % 2 == 1 { diffs[n / 2] } else { (diffs[n / 2 - 1] + diffs[n / 2]) / 2.0 };
    Ok(WilcoxonResult {
        statistic: w_plus,
        w_minus: total - w_plus,
        p_value,
        n_effective: n,
        method,
        median_difference,
        significant_at: None,
        significant: None,
    })
}

/// Exact two-sided p-value from the distribution of W+ over all `2^n` sign
/// assignments. Midranks are half-integers, so doubled ranks are integral
/// and the distribution is counted exactly by subset-sum convolution.
fn exact_p(ranks: &[f64], w_plus: f64) -> Result<f64> {
    let n = ranks.len();
    if n > 62 {
        return Err(Error::config("exact Wilcoxon enumeration limited to n <= 62"));
    }
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    let mut counts = vec![0u64; max_sum + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let observed = (2.0 * w_plus).round() as usize;
    let le: u64 = counts[..=observed].iter().sum();
    let ge: u64 = counts[observed..].iter().sum();
    Ok(two_sided_from_counts(le, ge, n))
}

/// `min(1, 2 min(le, ge) / 2^n)`, shared with the enumeration oracle.
pub fn two_sided_from_counts(le: u64, ge: u64, n: usize) -> f64 {
    let tail = 2 * le.min(ge);
    (tail as f64 / (1u64 << n) as f64).min(1.0)
}

fn normal_p(ranks: &[f64], w_plus: f64) -> Result<f64> {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut k = 0;
    while k < sorted.len() {
        let mut end = k + 1;
        while end < sorted.len() && sorted[end] == sorted[k] {
            end += 1;
        }
        let t = (end - k) as f64;
        tie_term += t * t * t - t;
        k = end;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return Err(Error::Degenerate("zero variance in Wilcoxon statistic".into()));
    }
    // Continuity-corrected two-sided normal tail.
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    Ok(erfc(z / std::f64::consts::SQRT_2).min(1.0))
}

/// `flag_i = p_i < alpha / k`.
pub fn bonferroni(p_values: &[f64], alpha: f64) -> Vec<bool> {
    let k = p_values.len().max(1) as f64;
    p_values.iter().map(|&p| p < alpha / k).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetAuc {
    pub id: String,
    pub auc: f64,
}

/// Per-dataset AUCs with their aggregate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(default)]
    pub method: String,
    pub per_dataset_auc: Vec<DatasetAuc>,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for fewer than two datasets.
    pub sd: f64,
    pub n: usize,
    /// Datasets without an AUC (ground truth all-positive or all-negative).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<String>,
}

impl EvalReport {
    pub fn new(method: impl Into<String>, per_dataset_auc: Vec<DatasetAuc>, skipped: Vec<String>) -> Self {
        let n = per_dataset_auc.len();
        let mean = if n == 0 { 0.0 } else { per_dataset_auc.iter().map(|d| d.auc).sum::<f64>() / n as f64 };
        let sd = if n < 2 {
            0.0
        } else {
            let ss: f64 = per_dataset_auc.iter().map(|d| (d.auc - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        };
        Self { method: method.into(), per_dataset_auc, mean, sd, n, skipped }
    }

    /// Fixed-width `mean ± sd` table, one row per report.
    pub fn table(reports: &[&EvalReport]) -> String {
        let width = reports.iter().map(|r| r.method.len()).max().unwrap_or(0).max(6);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>6}  {:>15}", "method", "n", "AUC mean ± sd");
        for r in reports {
            let _ = writeln!(out, "{:<width$}  {:>6}  {:>7.3} ± {:<5.3}", r.method, r.n, r.mean, r.sd);
        }
        out
    }
}
