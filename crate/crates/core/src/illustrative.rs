//! The three-variable linear process used as a worked example throughout:
//!
//! ```text
//! V1_t = e1_t
//! V2_t = 3 V1_{t-1} + e2_t
//! V3_t = V2_{t-2} + 5 V1_{t-3} + e3_t
//! ```
//!
//! with standard Gaussian noise and `max_lag = 3`.

use crate::corpus::{instance_id, minmax_normalize, Provenance, SeriesInstance};
use crate::graph::{LaggedEdge, LaggedGraph};
use crate::tscm::{Mechanism, NoiseSpec, SimConfig, Tscm};
use crate::Result;

pub const MAX_LAG: usize = 3;

pub fn graph() -> LaggedGraph {
    LaggedGraph::from_edges(
        3,
        MAX_LAG,
        [
            LaggedEdge { source: 0, target: 1, lag: 1 },
            LaggedEdge { source: 1, target: 2, lag: 2 },
            LaggedEdge { source: 0, target: 2, lag: 3 },
        ],
    )
    .expect("static graph is valid")
}

pub fn tscm(seed: u64) -> Tscm {
    // Parent order is (lag, source): V3 sees (V2, lag 2) then (V1, lag 3).
    let mechanisms = vec![Mechanism::root(), Mechanism::linear(&[3.0], 0.0), Mechanism::linear(&[1.0, 5.0], 0.0)];
    Tscm::new(graph(), mechanisms, vec![NoiseSpec::standard(); 3], seed).expect("static model is valid")
}

/// One simulated, min-max normalized instance of the example process.
pub fn instance(num_steps: usize, seed: u64) -> Result<SeriesInstance> {
    let model = tscm(seed);
    let series = model.simulate(&SimConfig::new(num_steps))?;
    SeriesInstance::new(
        instance_id(0),
        minmax_normalize(&series),
        graph(),
        Provenance::Synthetic { tscm: model, seed, attempts: 1 },
    )
}
