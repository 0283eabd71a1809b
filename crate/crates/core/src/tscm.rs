//! Temporal structural causal models and ancestral sampling.

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::graph::LaggedGraph;
use crate::rng::{self, stream};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    Linear,
    Polynomial,
    Exponential,
    Sinusoid,
    MultiplicativePair,
    LogAbs,
    Tanh,
    Sigmoid,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 8] = [
        MechanismKind::Linear,
        MechanismKind::Polynomial,
        MechanismKind::Exponential,
        MechanismKind::Sinusoid,
        MechanismKind::MultiplicativePair,
        MechanismKind::LogAbs,
        MechanismKind::Tanh,
        MechanismKind::Sigmoid,
    ];

    /// Kinds whose output can grow without bound in their inputs.
    pub fn is_unbounded(self) -> bool {
        matches!(
            self,
            MechanismKind::Linear
                | MechanismKind::Polynomial
                | MechanismKind::Exponential
                | MechanismKind::MultiplicativePair
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            MechanismKind::Linear => "linear",
            MechanismKind::Polynomial => "polynomial",
            MechanismKind::Exponential => "exponential",
            MechanismKind::Sinusoid => "sinusoid",
            MechanismKind::MultiplicativePair => "multiplicative_pair",
            MechanismKind::LogAbs => "log_abs",
            MechanismKind::Tanh => "tanh",
            MechanismKind::Sigmoid => "sigmoid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL.into_iter().find(|k| k.name() == s || (s == "poly" && *k == Self::Polynomial))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wrap {
    #[default]
    None,
    Tanh,
    Sigmoid,
}

/// Functional mechanism of one variable, applied to its lagged parents in
/// `(lag, source)` order.
///
/// `coefficients` holds one weight per parent, then the intercept, then for
/// [`MechanismKind::Polynomial`] the polynomial coefficients from the highest
/// degree down to the constant term. The aggregate
/// `f = sum_k w_k g(x_k) + b` is passed through the bounded wrap
/// `scale * wrap(f / scale)` before noise is added.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    pub kind: MechanismKind,
    pub coefficients: Vec<f64>,
    #[serde(default)]
    pub wrap: Wrap,
    #[serde(default = "one")]
    pub wrap_scale: f64,
}

fn one() -> f64 {
    1.0
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Mechanism {
    /// Mechanism of a variable without parents: contributes nothing.
    pub fn root() -> Self {
        Self::linear(&[], 0.0)
    }

    pub fn linear(weights: &[f64], intercept: f64) -> Self {
        let mut coefficients = weights.to_vec();
        coefficients.push(intercept);
        Self { kind: MechanismKind::Linear, coefficients, wrap: Wrap::None, wrap_scale: 1.0 }
    }

    pub fn with_wrap(mut self, wrap: Wrap, scale: f64) -> Self {
        self.wrap = wrap;
        self.wrap_scale = scale;
        self
    }

    fn check(&self, parents: usize) -> Result<()> {
        let need = match self.kind {
            MechanismKind::Polynomial => parents + 1 + 2,
            _ => parents + 1,
        };
        let ok = match self.kind {
            MechanismKind::Polynomial => self.coefficients.len() >= need,
            _ => self.coefficients.len() == need,
        };
        if !ok {
            return Err(Error::config(format!(
                "{} mechanism with {parents} parents needs {need} coefficients, got {}",
                self.kind.name(),
                self.coefficients.len()
            )));
        }
        if self.wrap != Wrap::None && !(self.wrap_scale > 0.0 && self.wrap_scale.is_finite()) {
            return Err(Error::config("wrap scale must be positive and finite"));
        }
        if self.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::config("mechanism coefficients must be finite"));
        }
        Ok(())
    }

    fn per_parent(&self, x: f64, poly: &[f64]) -> f64 {
        match self.kind {
            MechanismKind::Linear | MechanismKind::MultiplicativePair => x,
            MechanismKind::Polynomial => poly.iter().fold(0.0, |acc, &c| acc * x + c),
            MechanismKind::Exponential => x.exp(),
            MechanismKind::Sinusoid => x.sin(),
            MechanismKind::LogAbs => x.abs().ln_1p(),
            MechanismKind::Tanh => x.tanh(),
            MechanismKind::Sigmoid => sigmoid(x),
        }
    }

    /// Pre-noise contribution given parent values in `(lag, source)` order.
    pub fn apply(&self, parents: &[f64]) -> f64 {
        let k = parents.len();
        let weights = &self.coefficients[..k];
        let intercept = self.coefficients[k];
        let poly = &self.coefficients[k + 1..];
        let f = match self.kind {
            MechanismKind::MultiplicativePair if k >= 2 => {
                let pair = weights[0] * parents[0] * weights[1] * parents[1];
                pair + weights[2..].iter().zip(&parents[2..]).map(|(w, x)| w * x).sum::<f64>()
            }
            _ => weights.iter().zip(parents).map(|(w, &x)| w * self.per_parent(x, poly)).sum(),
        } + intercept;
        match self.wrap {
            Wrap::None => f,
            Wrap::Tanh => self.wrap_scale * (f / self.wrap_scale).tanh(),
            Wrap::Sigmoid => self.wrap_scale * sigmoid(f / self.wrap_scale),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(default)]
    pub kind: NoiseKind,
    pub mean: f64,
    pub std: f64,
}

impl NoiseSpec {
    pub fn gaussian(mean: f64, std: f64) -> Self {
        Self { kind: NoiseKind::Gaussian, mean, std }
    }

    pub fn standard() -> Self {
        Self::gaussian(0.0, 1.0)
    }

    fn validate(&self) -> Result<()> {
        if !(self.std > 0.0 && self.std.is_finite() && self.mean.is_finite()) {
            return Err(Error::config(format!("noise std must be positive, got {}", self.std)));
        }
        Ok(())
    }
}

/// A temporal SCM: graph, one mechanism and one noise term per variable.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tscm {
    graph: LaggedGraph,
    mechanisms: Vec<Mechanism>,
    noises: Vec<NoiseSpec>,
    seed: u64,
    #[serde(skip)]
    parents: Vec<Vec<(usize, usize)>>,
}

#[derive(Deserialize)]
struct TscmWire {
    graph: LaggedGraph,
    mechanisms: Vec<Mechanism>,
    noises: Vec<NoiseSpec>,
    seed: u64,
}

impl<'de> Deserialize<'de> for Tscm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = TscmWire::deserialize(d)?;
        Tscm::new(w.graph, w.mechanisms, w.noises, w.seed).map_err(serde::de::Error::custom)
    }
}

impl Tscm {
    pub fn new(graph: LaggedGraph, mechanisms: Vec<Mechanism>, noises: Vec<NoiseSpec>, seed: u64) -> Result<Self> {
        let v = graph.num_vars();
        if mechanisms.len() != v || noises.len() != v {
            return Err(Error::Shape(format!(
                "{v} variables but {} mechanisms and {} noise terms",
                mechanisms.len(),
                noises.len()
            )));
        }
        let mut parents = Vec::with_capacity(v);
        for (j, (m, n)) in mechanisms.iter().zip(&noises).enumerate() {
            let pa = graph.parents_of(j)?;
            m.check(pa.len()).map_err(|e| Error::config(format!("variable {j}: {e}")))?;
            n.validate()?;
            parents.push(pa);
        }
        Ok(Self { graph, mechanisms, noises, seed, parents })
    }

    pub fn graph(&self) -> &LaggedGraph {
        &self.graph
    }

    pub fn mechanisms(&self) -> &[Mechanism] {
        &self.mechanisms
    }

    pub fn noises(&self) -> &[NoiseSpec] {
        &self.noises
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_vars(&self) -> usize {
        self.graph.num_vars()
    }

    /// Parents of `j` in `(lag, source)` order, as used by its mechanism.
    pub fn parents(&self, j: usize) -> &[(usize, usize)] {
        &self.parents[j]
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("tscm serializes")
    }

    /// Ancestral sampling: returns exactly `sc.num_steps` rows after
    /// discarding `max_lag + warmup` initial steps.
    pub fn simulate(&self, sc: &SimConfig) -> Result<Array2<f64>> {
        sc.validate(self.graph.max_lag())?;
        let mut rng = rng::child_rng(self.seed, stream::SIMULATION, 0);
        match self.run(sc, &mut rng) {
            Run::Finished(x) => Ok(x),
            Run::Overflow { step, var, .. } => Err(Error::NonFinite { step, var }),
        }
    }

    fn run(&self, sc: &SimConfig, rng: &mut rng::Rng) -> Run {
        let v = self.num_vars();
        let lag = self.graph.max_lag();
        let burn = lag + sc.warmup;
        let total = burn + sc.num_steps;
        let mut x = Array2::<f64>::zeros((total, v));
        let noise: Vec<Normal<f64>> =
            self.noises.iter().map(|n| Normal::new(n.mean, n.std).expect("validated noise")).collect();

        for t in 0..lag {
            for j in 0..v {
                x[[t, j]] = StandardNormal.sample(rng);
            }
        }
        let mut buf = Vec::new();
        let mut max_abs = 0.0f64;
        for t in lag..total {
            // Every parent lies strictly in the past, so index order is a
            // valid topological order within a time step.
            for j in 0..v {
                buf.clear();
                buf.extend(self.parents[j].iter().map(|&(i, l)| x[[t - l, i]]));
                let value = self.mechanisms[j].apply(&buf) + noise[j].sample(rng);
                if !value.is_finite() || value.abs() > sc.clamp_abs {
                    return Run::Overflow { step: t, var: j, max_abs: max_abs.max(value.abs()) };
                }
                max_abs = max_abs.max(value.abs());
                x[[t, j]] = value;
            }
        }
        Run::Finished(x.slice(ndarray::s![burn.., ..]).to_owned())
    }

    /// Probe simulation on an independent noise stream; never fails.
    pub fn stability_screen(&self, sc: &SimConfig) -> StabilityReport {
        let mut rng = rng::child_rng(self.seed, stream::SIMULATION, 1);
        let sc = SimConfig { warmup: sc.warmup.max(self.graph.max_lag()), ..*sc };
        match self.run(&sc, &mut rng) {
            Run::Overflow { max_abs, .. } => StabilityReport {
                max_abs,
                overflow: true,
                non_finite: !max_abs.is_finite(),
                max_variance_ratio: f64::INFINITY,
                max_mean_shift: f64::INFINITY,
                min_variance: 0.0,
            },
            Run::Finished(x) => StabilityReport::from_series(&x),
        }
    }
}

enum Run {
    Finished(Array2<f64>),
    Overflow { step: usize, var: usize, max_abs: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub num_steps: usize,
    pub warmup: usize,
    pub clamp_abs: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { num_steps: 500, warmup: 100, clamp_abs: 1e6 }
    }
}

impl SimConfig {
    pub fn new(num_steps: usize) -> Self {
        Self { num_steps, ..Self::default() }
    }

    pub fn validate(&self, max_lag: usize) -> Result<()> {
        if self.num_steps == 0 {
            return Err(Error::config("num_steps must be at least 1"));
        }
        if self.warmup < max_lag {
            return Err(Error::config(format!("warmup {} shorter than max_lag {max_lag}", self.warmup)));
        }
        if !(self.clamp_abs > 0.0) {
            return Err(Error::config("clamp_abs must be positive"));
        }
        Ok(())
    }
}

/// Outcome of a probe simulation.
///
/// Drift is measured between the first and second half of the probe run:
/// `max_variance_ratio` is the worst `max(v2/v1, v1/v2)` over variables and
/// `max_mean_shift` the worst `|m2 - m1| / sqrt((v1 + v2) / 2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub max_abs: f64,
    pub overflow: bool,
    pub non_finite: bool,
    pub max_variance_ratio: f64,
    pub max_mean_shift: f64,
    pub min_variance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityCriteria {
    pub max_variance_ratio: f64,
    pub max_mean_shift: f64,
    pub min_variance: f64,
}

impl Default for StabilityCriteria {
    fn default() -> Self {
        Self { max_variance_ratio: 4.0, max_mean_shift: 1.5, min_variance: 1e-10 }
    }
}

impl StabilityReport {
    fn from_series(x: &Array2<f64>) -> Self {
        let (t, v) = x.dim();
        let half = t / 2;
        let mut report = StabilityReport {
            max_abs: x.iter().fold(0.0f64, |m, &a| m.max(a.abs())),
            overflow: false,
            non_finite: false,
            max_variance_ratio: 1.0,
            max_mean_shift: 0.0,
            min_variance: f64::INFINITY,
        };
        if half < 2 {
            return report;
        }
        for j in 0..v {
            let col = x.column(j);
            let (m1, v1) = mean_var(col.iter().take(half).copied());
            let (m2, v2) = mean_var(col.iter().skip(half).copied());
            let (_, vall) = mean_var(col.iter().copied());
            report.min_variance = report.min_variance.min(vall);
            let ratio = if v1 > 0.0 && v2 > 0.0 { (v2 / v1).max(v1 / v2) } else { f64::INFINITY };
            report.max_variance_ratio = report.max_variance_ratio.max(ratio);
            let pooled = ((v1 + v2) / 2.0).sqrt();
            let shift = if pooled > 0.0 { (m2 - m1).abs() / pooled } else { 0.0 };
            report.max_mean_shift = report.max_mean_shift.max(shift);
        }
        report
    }

    pub fn is_stable(&self, c: &StabilityCriteria) -> bool {
        !self.overflow
            && !self.non_finite
            && self.max_variance_ratio <= c.max_variance_ratio
            && self.max_mean_shift <= c.max_mean_shift
            && self.min_variance >= c.min_variance
    }
}

fn mean_var(it: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for x in it {
        n += 1;
        let d = x - mean;
        mean += d / n as f64;
        m2 += d * (x - mean);
    }
    if n < 2 {
        (mean, 0.0)
    } else {
        (mean, m2 / (n - 1) as f64)
    }
}

/// Which mechanisms get wrapped by a bounded function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WrapPolicy {
    /// Wrap every kind whose output is unbounded in its inputs.
    Unbounded,
    Always,
    Never,
}

/// Sampling policy for [`sample_tscm`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MechanismPolicy {
    /// Enabled kinds, drawn with equal probability per variable.
    pub kinds: Vec<MechanismKind>,
    /// Magnitude range of parent weights; the sign is drawn uniformly.
    pub weight_range: (f64, f64),
    /// Intercepts are drawn from `[-intercept_abs, intercept_abs]`.
    pub intercept_abs: f64,
    /// Inclusive polynomial degree range.
    pub poly_degree: (usize, usize),
    /// Polynomial coefficients are drawn from `[-poly_coeff_abs, poly_coeff_abs]`.
    pub poly_coeff_abs: f64,
    pub wrap_policy: WrapPolicy,
    pub wrap: Wrap,
    /// Saturation level of the wrap; contributions stay within this bound.
    pub wrap_scale: f64,
    pub noise_std: f64,
}

impl Default for MechanismPolicy {
    fn default() -> Self {
        Self {
            kinds: MechanismKind::ALL.to_vec(),
            weight_range: (0.5, 2.0),
            intercept_abs: 0.5,
            poly_degree: (2, 3),
            poly_coeff_abs: 1.0,
            wrap_policy: WrapPolicy::Unbounded,
            wrap: Wrap::Tanh,
            wrap_scale: 3.0,
            noise_std: 1.0,
        }
    }
}

impl MechanismPolicy {
    pub fn linear_only() -> Self {
        Self { kinds: vec![MechanismKind::Linear], ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() {
            return Err(Error::config("mechanism policy enables no kinds"));
        }
        let (lo, hi) = self.weight_range;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::config(format!("bad weight range {lo}..{hi}")));
        }
        if self.poly_degree.0 < 1 || self.poly_degree.0 > self.poly_degree.1 {
            return Err(Error::config("polynomial degree range must start at 1 or more"));
        }
        if !(self.noise_std > 0.0) || !(self.wrap_scale > 0.0) {
            return Err(Error::config("noise std and wrap scale must be positive"));
        }
        if self.intercept_abs < 0.0 || self.poly_coeff_abs < 0.0 {
            return Err(Error::config("coefficient bounds must be non-negative"));
        }
        Ok(())
    }

    fn wraps(&self, kind: MechanismKind) -> bool {
        match self.wrap_policy {
            WrapPolicy::Always => kind != MechanismKind::Tanh && kind != MechanismKind::Sigmoid,
            WrapPolicy::Never => false,
            WrapPolicy::Unbounded => kind.is_unbounded(),
        }
    }
}

fn uniform(rng: &mut rng::Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Attaches a randomly drawn mechanism and Gaussian noise to every variable
/// of `graph`. Variables without parents become pure noise.
pub fn sample_tscm(graph: &LaggedGraph, policy: &MechanismPolicy, seed: u64) -> Result<Tscm> {
    policy.validate()?;
    let mut rng = rng::child_rng(seed, stream::MECHANISM, 0);
    let v = graph.num_vars();
    let mut mechanisms = Vec::with_capacity(v);
    for j in 0..v {
        let k = graph.parents_of(j)?.len();
        if k == 0 {
            mechanisms.push(Mechanism::root());
            continue;
        }
        let kind = policy.kinds[rng.random_range(0..policy.kinds.len())];
        let mut coefficients: Vec<f64> = (0..k)
            .map(|_| {
                let mag = uniform(&mut rng, policy.weight_range.0, policy.weight_range.1);
                if rng.random::<bool>() {
                    mag
                } else {
                    -mag
                }
            })
            .collect();
        coefficients.push(uniform(&mut rng, -policy.intercept_abs, policy.intercept_abs));
        if kind == MechanismKind::Polynomial {
            let degree = rng.random_range(policy.poly_degree.0..=policy.poly_degree.1);
            coefficients.extend((0..=degree).map(|_| uniform(&mut rng, -policy.poly_coeff_abs, policy.poly_coeff_abs)));
        }
        let (wrap, wrap_scale) = if policy.wraps(kind) { (policy.wrap, policy.wrap_scale) } else { (Wrap::None, 1.0) };
        mechanisms.push(Mechanism { kind, coefficients, wrap, wrap_scale });
    }
    let noises = vec![NoiseSpec::gaussian(0.0, policy.noise_std); v];
    Tscm::new(graph.clone(), mechanisms, noises, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{sample_er_graph, GraphConfig, LaggedEdge};

    fn self_loop(kind: MechanismKind, coefficients: Vec<f64>, wrap: Wrap) -> Tscm {
        let g = LaggedGraph::from_edges(2, 1, [LaggedEdge { source: 0, target: 0, lag: 1 }]).unwrap();
        let m = Mechanism { kind, coefficients, wrap, wrap_scale: 2.0 };
        Tscm::new(g, vec![m, Mechanism::root()], vec![NoiseSpec::standard(); 2], 5).unwrap()
    }

    #[test]
    fn polynomial_uses_horner_order() {
        // 2x^2 - x + 3 with weight 1 and intercept 0.
        let m = Mechanism {
            kind: MechanismKind::Polynomial,
            coefficients: vec![1.0, 0.0, 2.0, -1.0, 3.0],
            wrap: Wrap::None,
            wrap_scale: 1.0,
        };
        assert_eq!(m.apply(&[2.0]), 9.0);
    }

    #[test]
    fn multiplicative_pair() {
        let m = Mechanism {
            kind: MechanismKind::MultiplicativePair,
            coefficients: vec![1.0, 2.0, 0.5, 1.0],
            wrap: Wrap::None,
            wrap_scale: 1.0,
        };
        // (1*3)(2*4) + 0.5*2 + 1
        assert_eq!(m.apply(&[3.0, 4.0, 2.0]), 26.0);
    }

    #[test]
    fn coefficient_count_checked() {
        let g = LaggedGraph::from_edges(2, 1, [LaggedEdge { source: 0, target: 1, lag: 1 }]).unwrap();
        let bad = Tscm::new(
            g.clone(),
            vec![Mechanism::root(), Mechanism::linear(&[1.0, 2.0], 0.0)],
            vec![NoiseSpec::standard(); 2],
            0,
        );
        assert!(bad.is_err());
        let bad_noise = Tscm::new(
            g,
            vec![Mechanism::root(), Mechanism::linear(&[1.0], 0.0)],
            vec![NoiseSpec::standard(), NoiseSpec::gaussian(0.0, 0.0)],
            0,
        );
        assert!(bad_noise.is_err());
    }

    #[test]
    fn output_length_ignores_warmup() {
        let m = self_loop(MechanismKind::Linear, vec![0.5, 0.0], Wrap::None);
        for warmup in [1, 10, 250] {
            let x = m.simulate(&SimConfig { num_steps: 37, warmup, clamp_abs: 1e6 }).unwrap();
            assert_eq!(x.dim(), (37, 2));
        }
        assert!(m.simulate(&SimConfig { num_steps: 0, ..SimConfig::default() }).is_err());
        assert!(m.simulate(&SimConfig { num_steps: 5, warmup: 0, clamp_abs: 1e6 }).is_err());
    }

    #[test]
    fn exponential_feedback_overflows() {
        let m = self_loop(MechanismKind::Exponential, vec![2.0, 1.0], Wrap::None);
        let d = m.stability_screen(&SimConfig::default());
        assert!(d.overflow);
        assert!(!d.is_stable(&StabilityCriteria::default()));
        assert!(matches!(m.simulate(&SimConfig::default()), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn wrapped_feedback_stays_finite() {
        let m = self_loop(MechanismKind::Exponential, vec![2.0, 1.0], Wrap::Tanh);
        assert!(!m.stability_screen(&SimConfig::default()).overflow);
        assert!(m.simulate(&SimConfig::default()).unwrap().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn isolated_nodes_get_pure_noise() {
        let g = LaggedGraph::empty(4, 3).unwrap();
        let m = sample_tscm(&g, &MechanismPolicy::default(), 3).unwrap();
        assert!(m.mechanisms().iter().all(|m| *m == Mechanism::root()));
    }

    #[test]
    fn empty_policy_rejected() {
        let g = LaggedGraph::empty(2, 1).unwrap();
        let p = MechanismPolicy { kinds: vec![], ..MechanismPolicy::default() };
        assert!(sample_tscm(&g, &p, 0).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_serializes() {
        let g = sample_er_graph(&GraphConfig::new(5, 3, 0.3, 11)).unwrap();
        let a = sample_tscm(&g, &MechanismPolicy::default(), 99).unwrap();
        let b = sample_tscm(&g, &MechanismPolicy::default(), 99).unwrap();
        let ja = serde_json::to_string(&a).unwrap();
        assert_eq!(ja, serde_json::to_string(&b).unwrap());
        let back: Tscm = serde_json::from_str(&ja).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn kind_names_parse() {
        for k in MechanismKind::ALL {
            assert_eq!(MechanismKind::parse(k.name()), Some(k));
        }
        assert_eq!(MechanismKind::parse("Poly"), Some(MechanismKind::Polynomial));
        assert_eq!(MechanismKind::parse("nope"), None);
    }
}
