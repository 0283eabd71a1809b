//! Lagged causal graphs.
//!
//! A [`LaggedGraph`] holds only lagged edges `X^i_{t-lag} -> X^j_t` with
//! `1 <= lag <= max_lag`; the unrolled graph over time-indexed nodes is
//! therefore acyclic by construction.

use ndarray::{Array2, Array3};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::{self, stream};
use crate::{lag_slice, slice_lag, Error, Result};

/// A directed edge `source` at lag `lag` into `target`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LaggedEdge {
    pub source: usize,
    pub target: usize,
    pub lag: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LaggedGraph {
    num_vars: usize,
    max_lag: usize,
    /// `adj[[j, i, max_lag - lag]] == 1` iff `X^i_{t-lag} -> X^j_t`.
    adj: Array3<u8>,
}

impl LaggedGraph {
    pub fn empty(num_vars: usize, max_lag: usize) -> Result<Self> {
        if num_vars == 0 {
            return Err(Error::config("graph needs at least one variable"));
        }
        if max_lag == 0 {
            return Err(Error::config("max_lag must be at least 1"));
        }
        Ok(Self { num_vars, max_lag, adj: Array3::zeros((num_vars, num_vars, max_lag)) })
    }

    pub fn from_edges(num_vars: usize, max_lag: usize, edges: impl IntoIterator<Item = LaggedEdge>) -> Result<Self> {
        let mut g = Self::empty(num_vars, max_lag)?;
        for e in edges {
            g.add_edge(e)?;
        }
        Ok(g)
    }

    /// Builds a graph from a binary tensor of shape `(V, V, max_lag)`.
    pub fn from_tensor(adj: Array3<u8>) -> Result<Self> {
        let (v, v2, l) = adj.dim();
        if v != v2 {
            return Err(Error::Shape(format!("adjacency tensor is {v}x{v2}x{l}, not square")));
        }
        if adj.iter().any(|&x| x > 1) {
            return Err(Error::Format("adjacency entries must be 0 or 1".into()));
        }
        let mut g = Self::empty(v, l)?;
        g.adj = adj;
        Ok(g)
    }

    pub fn add_edge(&mut self, e: LaggedEdge) -> Result<()> {
        self.check_var(e.source)?;
        self.check_var(e.target)?;
        if e.lag == 0 || e.lag > self.max_lag {
            return Err(Error::config(format!("lag {} outside 1..={}", e.lag, self.max_lag)));
        }
        self.adj[[e.target, e.source, lag_slice(self.max_lag, e.lag)]] = 1;
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    pub fn tensor(&self) -> &Array3<u8> {
        &self.adj
    }

    pub fn has_edge(&self, source: usize, target: usize, lag: usize) -> bool {
        lag >= 1
            && lag <= self.max_lag
            && source < self.num_vars
            && target < self.num_vars
            && self.adj[[target, source, lag_slice(self.max_lag, lag)]] == 1
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().filter(|&&x| x == 1).count()
    }

    /// All edges sorted by `(target, source, lag)`.
    pub fn edges(&self) -> Vec<LaggedEdge> {
        let mut out = Vec::with_capacity(self.num_edges());
        for j in 0..self.num_vars {
            for i in 0..self.num_vars {
                for lag in 1..=self.max_lag {
                    if self.adj[[j, i, lag_slice(self.max_lag, lag)]] == 1 {
                        out.push(LaggedEdge { source: i, target: j, lag });
                    }
                }
            }
        }
        out
    }

    /// Lagged parents of `target` as `(source, lag)`, sorted by `(lag, source)`.
    pub fn parents_of(&self, target: usize) -> Result<Vec<(usize, usize)>> {
        self.check_var(target)?;
        let mut out = Vec::new();
        for lag in 1..=self.max_lag {
            let s = lag_slice(self.max_lag, lag);
            for i in 0..self.num_vars {
                if self.adj[[target, i, s]] == 1 {
                    out.push((i, lag));
                }
            }
        }
        Ok(out)
    }

    /// Lag-collapsed graph: entry `[j, i]` is 1 iff `i` causes `j` at any lag.
    pub fn summary_graph(&self) -> Array2<u8> {
        let mut s = Array2::zeros((self.num_vars, self.num_vars));
        for ((j, i, _), &x) in self.adj.indexed_iter() {
            if x == 1 {
                s[[j, i]] = 1;
            }
        }
        s
    }

    /// Copy of the tensor zero-padded to `(v_max, v_max, l_max)`. Extra lag
    /// slices are prepended so slice `l_max - lag` still holds `lag`.
    pub fn padded_tensor(&self, v_max: usize, l_max: usize) -> Result<Array3<u8>> {
        if v_max < self.num_vars || l_max < self.max_lag {
            return Err(Error::Shape(format!(
                "graph ({} variables, max lag {}) exceeds padded size ({v_max}, {l_max})",
                self.num_vars, self.max_lag
            )));
        }
        let mut out = Array3::zeros((v_max, v_max, l_max));
        out.slice_mut(ndarray::s![..self.num_vars, ..self.num_vars, l_max - self.max_lag..]).assign(&self.adj);
        Ok(out)
    }

    fn check_var(&self, index: usize) -> Result<()> {
        if index >= self.num_vars {
            Err(Error::IndexOutOfRange { index, len: self.num_vars })
        } else {
            Ok(())
        }
    }
}

/// Wire form: `{num_vars, max_lag, edges: [[i, j, lag], ...]}` with edges
/// sorted by `(j, i, lag)`.
#[derive(Serialize, Deserialize)]
struct GraphWire {
    num_vars: usize,
    max_lag: usize,
    edges: Vec<[usize; 3]>,
}

impl Serialize for LaggedGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GraphWire {
            num_vars: self.num_vars,
            max_lag: self.max_lag,
            edges: self.edges().iter().map(|e| [e.source, e.target, e.lag]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LaggedGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = GraphWire::deserialize(d)?;
        LaggedGraph::from_edges(
            w.num_vars,
            w.max_lag,
            w.edges.iter().map(|&[source, target, lag]| LaggedEdge { source, target, lag }),
        )
        .map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub num_vars: usize,
    pub max_lag: usize,
    pub edge_density: f64,
    #[serde(default = "default_true")]
    pub allow_self_lagged: bool,
    #[serde(default = "default_min_lag")]
    pub min_lag: usize,
    pub seed: u64,
}

fn default_true() -> bool {
    true
}

fn default_min_lag() -> usize {
    1
}

impl GraphConfig {
    pub fn new(num_vars: usize, max_lag: usize, edge_density: f64, seed: u64) -> Self {
        Self { num_vars, max_lag, edge_density, allow_self_lagged: true, min_lag: 1, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_vars < 2 {
            return Err(Error::config(format!("num_vars must be >= 2, got {}", self.num_vars)));
        }
        if !(self.edge_density > 0.0 && self.edge_density <= 1.0) {
            return Err(Error::config(format!("edge density must lie in (0, 1], got {}", self.edge_density)));
        }
        if self.min_lag == 0 || self.min_lag > self.max_lag {
            return Err(Error::config(format!(
                "need 1 <= min_lag <= max_lag, got {}..={}",
                self.min_lag, self.max_lag
            )));
        }
        Ok(())
    }
}

/// Erdős–Rényi lagged graph: every admissible `(i, j, lag)` triple is kept
/// independently with probability `edge_density`. Triples are visited in
/// `(j, i, lag)` order, one uniform draw each, so the result depends only on
/// the config.
pub fn sample_er_graph(cfg: &GraphConfig) -> Result<LaggedGraph> {
    cfg.validate()?;
    let mut rng = rng::child_rng(cfg.seed, stream::GRAPH, 0);
    let mut g = LaggedGraph::empty(cfg.num_vars, cfg.max_lag)?;
    for j in 0..cfg.num_vars {
        for i in 0..cfg.num_vars {
            if i == j && !cfg.allow_self_lagged {
                continue;
            }
            for lag in cfg.min_lag..=cfg.max_lag {
                if rng.random::<f64>() < cfg.edge_density {
                    g.adj[[j, i, lag_slice(cfg.max_lag, lag)]] = 1;
                }
            }
        }
    }
    Ok(g)
}

/// Number of `(i, j, lag)` triples the sampler may draw for `cfg`.
pub fn admissible_triples(cfg: &GraphConfig) -> usize {
    let pairs = if cfg.allow_self_lagged { cfg.num_vars * cfg.num_vars } else { cfg.num_vars * (cfg.num_vars - 1) };
    pairs * (cfg.max_lag + 1).saturating_sub(cfg.min_lag)
}

/// Lag of the edge stored at `slice`, for callers iterating raw tensors.
pub fn lag_of_slice(max_lag: usize, slice: usize) -> usize {
    slice_lag(max_lag, slice)
}
