//! Distributed cooperative localization and tracking with hybrid belief
//! propagation / mean field message passing and Gaussian information
//! projections.
//!
//! - [`netmodel`]: network, motion and measurement simulation.
//! - [`specfun`]: the confluent hypergeometric functions behind the range term.
//! - [`projection`]: the per-agent projection objective and its solver.
//! - [`engine`]: the synchronous message passing schedule.
//! - [`harness`]: priors, experiments, reports and reference oracles.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod csvfmt;
pub mod engine;
pub mod error;
pub mod harness;
pub mod netmodel;
pub mod projection;
pub mod specfun;

pub use engine::{BroadcastPayload, Engine, EngineConfig, Estimate, SeedRecipe};
pub use error::{Error, Result};
pub use harness::{ExperimentConfig, PriorInitRule, RunReport};
pub use netmodel::{
    AgentState, Measurement, MotionKind, MotionModel, NetworkSnapshot, NodeId, Roi, ScenarioConfig, ScenarioTimeline,
};
pub use projection::{GaussianBelief, NeighborSummary, PredictionMoments, ProjectionProblem, SolverConfig};
