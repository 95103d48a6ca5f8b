//! Network, motion and range-measurement model.

mod io;
mod scenario;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{read_timeline, write_timeline, TIMELINE_FILES};
pub use scenario::{anchor_grid, generate_scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    /// Gaussian random walk on the position (MM1).
    RandomWalk,
    /// Constant-velocity model on position and velocity (MM2).
    ConstantVelocity,
}

impl MotionKind {
    pub fn has_velocity(self) -> bool {
        matches!(self, MotionKind::ConstantVelocity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionModel {
    pub kind: MotionKind,
    /// Step duration `T` in seconds.
    pub period: f64,
    /// Driving noise std. dev. of the random walk, m/s.
    pub sigma_v: f64,
    /// Driving acceleration std. dev. of the constant-velocity model, m/s².
    pub sigma_a: f64,
}

impl MotionModel {
    pub fn random_walk(period: f64, sigma_v: f64) -> Self {
        Self { kind: MotionKind::RandomWalk, period, sigma_v, sigma_a: 0.0 }
    }

    pub fn constant_velocity(period: f64, sigma_a: f64) -> Self {
        Self { kind: MotionKind::ConstantVelocity, period, sigma_v: 0.0, sigma_a }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0) || !self.period.is_finite() {
            return Err(Error::Config(format!("step period must be positive, got {}", self.period)));
        }
        if !(self.sigma_v >= 0.0 && self.sigma_a >= 0.0) {
            return Err(Error::Config("motion noise scales must be non-negative".into()));
        }
        Ok(())
    }

    /// Per-axis transition block of `F = [[1, T], [0, 1]] ⊗ I₂`.
    pub fn transition_block(&self) -> Matrix2<f64> {
        Matrix2::new(1.0, self.period, 0.0, 1.0)
    }

    /// Per-axis noise gain of `G = [T²/2, T]ᵀ ⊗ I₂`.
    pub fn noise_gain(&self) -> Vector2<f64> {
        Vector2::new(self.period * self.period / 2.0, self.period)
    }

    /// Standard deviation of the per-component driving noise.
    pub fn driving_sigma(&self) -> f64 {
        match self.kind {
            MotionKind::RandomWalk => self.sigma_v,
            MotionKind::ConstantVelocity => self.sigma_a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub position: Vector2<f64>,
    pub velocity: Option<Vector2<f64>>,
}

impl AgentState {
    pub fn at(position: Vector2<f64>) -> Self {
        Self { position, velocity: None }
    }

    pub fn moving(position: Vector2<f64>, velocity: Vector2<f64>) -> Self {
        Self { position, velocity: Some(velocity) }
    }
}

/// Advances a true state by one step given the realized driving noise
/// (`v` for the random walk, `a` for the constant-velocity model).
pub fn state_transition(state: &AgentState, motion: &MotionModel, noise: Vector2<f64>) -> Result<AgentState> {
    match (motion.kind, state.velocity) {
        (MotionKind::RandomWalk, None) => Ok(AgentState::at(state.position + motion.period.sqrt() * noise)),
        (MotionKind::ConstantVelocity, Some(v)) => {
            let f = motion.transition_block();
            let g = motion.noise_gain();
            let position = f[(0, 0)] * state.position + f[(0, 1)] * v + g[0] * noise;
            let velocity = f[(1, 0)] * state.position + f[(1, 1)] * v + g[1] * noise;
            Ok(AgentState::moving(position, velocity))
        }
        (MotionKind::RandomWalk, Some(_)) => Err(Error::MotionMismatch("random walk state carries a velocity")),
        (MotionKind::ConstantVelocity, None) => Err(Error::MotionMismatch("constant-velocity state has no velocity")),
    }
}

/// Noisy distance between two positions.
pub fn range_measurement(p_k: Vector2<f64>, p_l: Vector2<f64>, w: f64) -> f64 {
    (p_k - p_l).norm() + w
}

/// Axis-aligned region of interest `[0, width] × [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub width: f64,
    pub height: f64,
}

impl Roi {
    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    /// Torus wrap: leaving on one side re-enters on the opposite one.
    pub fn wrap(&self, p: Vector2<f64>) -> Vector2<f64> {
        Vector2::new(wrap_coord(p.x, self.width), wrap_coord(p.y, self.height))
    }
}

fn wrap_coord(x: f64, len: f64) -> f64 {
    let r = x.rem_euclid(len);
    // rem_euclid may round up to `len` for tiny negative inputs
    if r >= len {
        0.0
    } else {
        r
    }
}

/// Time window during which an agent belongs to the network (inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipWindow {
    pub agent: NodeId,
    pub first: usize,
    pub last: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub roi: Roi,
    pub n_agents: usize,
    pub n_anchors: usize,
    pub comm_radius: f64,
    pub sigma_w: f64,
    pub motion: MotionModel,
    /// Number of time steps `N`; the timeline covers `0..=N`.
    pub n_steps: usize,
    pub rng_seed: u64,
    pub prior_position_variance: f64,
    pub prior_velocity_mean: [f64; 2],
    pub prior_velocity_variance: f64,
    /// Optional arrivals/departures; agents without an entry are always present.
    #[serde(default)]
    pub membership: Vec<MembershipWindow>,
}

impl ScenarioConfig {
    /// Simulation setup of the reference experiment: 120 m × 120 m, 41 agents,
    /// 18 anchors, 20 m radius, σ_w = 1 m, N = 30, T = 1 s.
    pub fn reference(kind: MotionKind, rng_seed: u64) -> Self {
        let motion = match kind {
            MotionKind::RandomWalk => MotionModel::random_walk(1.0, 1.5f64.sqrt()),
            MotionKind::ConstantVelocity => MotionModel::constant_velocity(1.0, 0.03f64.sqrt()),
        };
        Self {
            roi: Roi { width: 120.0, height: 120.0 },
            n_agents: 41,
            n_anchors: 18,
            comm_radius: 20.0,
            sigma_w: 1.0,
            motion,
            n_steps: 30,
            rng_seed,
            prior_position_variance: 900.0,
            prior_velocity_mean: [0.0, 0.0],
            prior_velocity_variance: 0.6,
            membership: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.motion.validate()?;
        if !(self.comm_radius > 0.0) {
            return Err(Error::Config("comm_radius must be positive".into()));
        }
        if !(self.sigma_w > 0.0) {
            return Err(Error::Config("sigma_w must be positive".into()));
        }
        if self.n_steps < 1 {
            return Err(Error::Config("need at least one time step".into()));
        }
        if !(self.roi.width > 0.0 && self.roi.height > 0.0) {
            return Err(Error::Config("region of interest must have positive size".into()));
        }
        if !(self.prior_position_variance > 0.0) {
            return Err(Error::Config("prior_position_variance must be positive".into()));
        }
        if self.motion.kind.has_velocity() && !(self.prior_velocity_variance >= 0.0) {
            return Err(Error::Config("prior_velocity_variance must be non-negative".into()));
        }
        for w in &self.membership {
            if w.agent.0 as usize >= self.n_agents || w.first > w.last {
                return Err(Error::Config(format!("bad membership window for agent {}", w.agent)));
            }
        }
        Ok(())
    }

    pub fn agent_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.n_agents as u32).map(NodeId)
    }

    /// Anchors are numbered after the agents.
    pub fn anchor_ids(&self) -> impl Iterator<Item = NodeId> {
        let start = self.n_agents as u32;
        (start..start + self.n_anchors as u32).map(NodeId)
    }

    pub fn is_member(&self, agent: NodeId, n: usize) -> bool {
        self.membership.iter().find(|w| w.agent == agent).is_none_or(|w| (w.first..=w.last).contains(&n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    AgentAgent,
    AgentAnchor,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkSnapshot {
    pub time_index: usize,
    pub agents: BTreeSet<NodeId>,
    pub anchors: BTreeMap<NodeId, Vector2<f64>>,
    pub agent_edges: BTreeSet<(NodeId, NodeId)>,
    pub agent_anchor_edges: BTreeSet<(NodeId, NodeId)>,
}

impl NetworkSnapshot {
    /// Checks symmetry of agent links, direction of anchor links and endpoint membership.
    pub fn validate(&self) -> Result<()> {
        for &(k, l) in &self.agent_edges {
            if !self.agents.contains(&k) || !self.agents.contains(&l) || k == l {
                return Err(Error::InvalidArgument(format!("agent edge ({k},{l}) has invalid endpoints")));
            }
            if !self.agent_edges.contains(&(l, k)) {
                return Err(Error::InvalidArgument(format!("agent edge ({k},{l}) lacks its reverse")));
            }
        }
        for &(k, l) in &self.agent_anchor_edges {
            if !self.agents.contains(&k) || !self.anchors.contains_key(&l) {
                return Err(Error::InvalidArgument(format!("anchor edge ({k},{l}) has invalid endpoints")));
            }
        }
        Ok(())
    }

    /// Agents and anchors that `k` receives from, in id order.
    pub fn neighbors(&self, k: NodeId) -> Vec<NodeId> {
        let mut out: Vec<NodeId> =
            self.agent_edges.range((k, NodeId(0))..=(k, NodeId(u32::MAX))).map(|&(_, l)| l).collect();
        out.extend(self.agent_anchor_edges.range((k, NodeId(0))..=(k, NodeId(u32::MAX))).map(|&(_, l)| l));
        out.sort_unstable();
        out
    }

    pub fn anchor_neighbors(&self, k: NodeId) -> Vec<NodeId> {
        self.agent_anchor_edges.range((k, NodeId(0))..=(k, NodeId(u32::MAX))).map(|&(_, l)| l).collect()
    }

    pub fn edge_kind(&self, k: NodeId, l: NodeId) -> Option<EdgeKind> {
        if self.agent_edges.contains(&(k, l)) {
            Some(EdgeKind::AgentAgent)
        } else if self.agent_anchor_edges.contains(&(k, l)) {
            Some(EdgeKind::AgentAnchor)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub observer: NodeId,
    pub target: NodeId,
    /// Measured range `d` in meters.
    pub value: f64,
    /// Realized noise `w`; kept for auditing, never read by estimators.
    pub noise: f64,
    pub time_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTimeline {
    pub config: ScenarioConfig,
    /// One snapshot per time index `0..=N`.
    pub snapshots: Vec<NetworkSnapshot>,
    pub true_states: Vec<BTreeMap<NodeId, AgentState>>,
    /// Driving noise realized between `n - 1` and `n` (empty at `n = 0`).
    pub driving_noise: Vec<BTreeMap<NodeId, Vector2<f64>>>,
    pub measurements: Vec<Vec<Measurement>>,
}

impl ScenarioTimeline {
    pub fn n_steps(&self) -> usize {
        self.snapshots.len().saturating_sub(1)
    }

    pub fn snapshot(&self, n: usize) -> Result<&NetworkSnapshot> {
        self.snapshots.get(n).ok_or(Error::EmptyData(n))
    }

    /// Measurements taken by `agent` at time `n`, in target order.
    pub fn local_measurements(&self, agent: NodeId, n: usize) -> Vec<Measurement> {
        self.measurements
            .get(n)
            .map(|ms| ms.iter().filter(|m| m.observer == agent).copied().collect())
            .unwrap_or_default()
    }

    pub fn true_position(&self, agent: NodeId, n: usize) -> Option<Vector2<f64>> {
        self.true_states.get(n)?.get(&agent).map(|s| s.position)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_walk_zero_noise_is_identity() {
        let m = MotionModel::random_walk(1.0, 1.0);
        let s = state_transition(&AgentState::at(Vector2::zeros()), &m, Vector2::zeros()).unwrap();
        assert_eq!(s.position, Vector2::zeros());
    }

    #[test]
    fn random_walk_scales_noise_by_sqrt_period() {
        let m = MotionModel::random_walk(4.0, 1.0);
        let s = state_transition(&AgentState::at(Vector2::new(1.0, 0.0)), &m, Vector2::new(1.0, 1.0)).unwrap();
        assert_eq!(s.position, Vector2::new(3.0, 2.0));
    }

    #[test]
    fn constant_velocity_step() {
        let m = MotionModel::constant_velocity(1.0, 0.1);
        let s0 = AgentState::moving(Vector2::new(1.0, 2.0), Vector2::new(3.0, 4.0));
        let s = state_transition(&s0, &m, Vector2::zeros()).unwrap();
        assert_eq!(s.position, Vector2::new(4.0, 6.0));
        assert_eq!(s.velocity, Some(Vector2::new(3.0, 4.0)));

        // noise enters as [T²/2, T]
        let m = MotionModel::constant_velocity(2.0, 0.1);
        let s = state_transition(&s0, &m, Vector2::new(1.0, -1.0)).unwrap();
        assert_eq!(s.position, Vector2::new(1.0 + 6.0 + 2.0, 2.0 + 8.0 - 2.0));
        assert_eq!(s.velocity, Some(Vector2::new(5.0, 2.0)));
    }

    #[test]
    fn state_variant_mismatch() {
        let cv = MotionModel::constant_velocity(1.0, 0.1);
        let rw = MotionModel::random_walk(1.0, 0.1);
        assert!(matches!(
            state_transition(&AgentState::at(Vector2::zeros()), &cv, Vector2::zeros()),
            Err(Error::MotionMismatch(_))
        ));
        assert!(matches!(
            state_transition(&AgentState::moving(Vector2::zeros(), Vector2::zeros()), &rw, Vector2::zeros()),
            Err(Error::MotionMismatch(_))
        ));
    }

    #[test]
    fn range_examples() {
        assert_eq!(range_measurement(Vector2::new(0.0, 0.0), Vector2::new(3.0, 4.0), 0.0), 5.0);
        assert_eq!(range_measurement(Vector2::new(2.0, 2.0), Vector2::new(2.0, 2.0), 0.7), 0.7);
        assert_eq!(range_measurement(Vector2::new(1.0, 1.0), Vector2::new(1.0, 2.0), -0.25), 0.75);
    }

    #[test]
    fn wrap_stays_inside() {
        let roi = Roi { width: 120.0, height: 60.0 };
        for p in [(-1e-18, 5.0), (120.0, 60.0), (-130.5, 250.0), (119.999, -0.001)] {
            let w = roi.wrap(Vector2::new(p.0, p.1));
            assert!(roi.contains(&w) && w.x < 120.0 && w.y < 60.0, "{w:?}");
        }
        assert_eq!(roi.wrap(Vector2::new(125.0, -5.0)), Vector2::new(5.0, 55.0));
    }

    #[test]
    fn snapshot_invariants() {
        let mut s = NetworkSnapshot::default();
        s.agents.extend([NodeId(0), NodeId(1)]);
        s.anchors.insert(NodeId(2), Vector2::new(1.0, 1.0));
        s.agent_edges.insert((NodeId(0), NodeId(1)));
        assert!(s.validate().is_err());
        s.agent_edges.insert((NodeId(1), NodeId(0)));
        s.agent_anchor_edges.insert((NodeId(0), NodeId(2)));
        s.validate().unwrap();
        assert_eq!(s.neighbors(NodeId(0)), vec![NodeId(1), NodeId(2)]);
        assert_eq!(s.anchor_neighbors(NodeId(0)), vec![NodeId(2)]);
        assert_eq!(s.edge_kind(NodeId(0), NodeId(2)), Some(EdgeKind::AgentAnchor));
        assert_eq!(s.edge_kind(NodeId(2), NodeId(0)), None);
        s.agent_anchor_edges.insert((NodeId(2), NodeId(0)));
        assert!(s.validate().is_err());
    }

    #[test]
    fn reference_config_is_valid() {
        ScenarioConfig::reference(MotionKind::RandomWalk, 1).validate().unwrap();
        ScenarioConfig::reference(MotionKind::ConstantVelocity, 1).validate().unwrap();
    }
}
