//! Synchronous message passing schedule.
//!
//! Every time step starts with a mobility update of each agent's belief. Then
//! `t*` rounds follow, each with a broadcast phase (every node emits the
//! position part of its previous-round belief) and an update phase (every
//! agent solves its own projection from its prediction, its own
//! measurements and the payloads it received). Agents never read each
//! other's state except through payloads.

mod seeds;
mod trace;

use std::collections::BTreeMap;

use log::warn;
use nalgebra::{Vector2, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{Measurement, MotionModel, NetworkSnapshot, NodeId, ScenarioTimeline};
use crate::projection::{
    predict_moments, solve_projection, GaussianBelief, NeighborSummary, PredictionMoments, ProjectionProblem,
    ProjectionSolution, SolverConfig,
};

pub use seeds::{seed_recipe, SeedRecipe};
pub use trace::{
    read_payload_trace, replay, write_payload_trace, BeliefRecord, PredictionRecord, Recording, TraceSink,
    PAYLOAD_HEADER,
};

/// What a node broadcasts in one round: its position mean and variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BroadcastPayload {
    pub sender: NodeId,
    pub time_index: usize,
    pub iteration: usize,
    pub mu_p: Vector2<f64>,
    pub c_p: f64,
}

impl BroadcastPayload {
    pub fn anchor(sender: NodeId, position: Vector2<f64>, time_index: usize, iteration: usize) -> Self {
        Self { sender, time_index, iteration, mu_p: position, c_p: 0.0 }
    }

    pub fn from_belief(sender: NodeId, belief: &GaussianBelief, time_index: usize, iteration: usize) -> Self {
        Self { sender, time_index, iteration, mu_p: belief.mu_p(), c_p: belief.c_p() }
    }

    /// The numeric content.
    pub fn values(&self) -> [f64; 3] {
        [self.mu_p.x, self.mu_p.y, self.c_p]
    }

    pub fn is_anchor(&self) -> bool {
        self.c_p == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Message passing rounds per time step.
    pub t_star: usize,
    pub solver: SolverConfig,
    pub seeds: SeedRecipe,
    /// Root of the per-agent random substreams.
    pub run_seed: u64,
    /// Solve the agents of one round on the rayon pool.
    pub parallel: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { t_star: 5, solver: SolverConfig::default(), seeds: SeedRecipe::default(), run_seed: 0, parallel: true }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_star < 1 {
            return Err(Error::Config("t_star must be at least 1".into()));
        }
        if self.solver.max_steps < 1 || !(self.solver.gradient_tolerance > 0.0) {
            return Err(Error::Config("solver needs max_steps >= 1 and a positive tolerance".into()));
        }
        self.seeds.validate()
    }
}

/// Local state of one agent during time step `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentRuntime {
    pub id: NodeId,
    /// Final belief of step `n − 1`, or the prior for an agent without history.
    pub previous_final: Option<GaussianBelief>,
    /// Belief of the latest completed round.
    pub current_belief: GaussianBelief,
    pub prediction: PredictionMoments,
    pub local_measurements: Vec<Measurement>,
    pub inbox: Vec<BroadcastPayload>,
}

impl AgentRuntime {
    /// Agent whose state at the current step is described by `prior`; the
    /// prior doubles as its "previous" belief for the seed recipe.
    pub fn from_prior(id: NodeId, prior: GaussianBelief) -> Result<Self> {
        let prediction = PredictionMoments::from_belief(&prior)?;
        Ok(Self {
            id,
            previous_final: None,
            current_belief: prior,
            prediction,
            local_measurements: Vec::new(),
            inbox: Vec::new(),
        })
    }
}

/// Prediction for step `n`: the motion update of the previous final belief,
/// or the prior moments for an agent without one.
pub fn mobility_update(
    agent: &AgentRuntime,
    motion: &MotionModel,
    prior: Option<&GaussianBelief>,
) -> Result<PredictionMoments> {
    match (&agent.previous_final, prior) {
        (Some(prev), _) => predict_moments(prev, motion),
        (None, Some(p)) => PredictionMoments::from_belief(p),
        (None, None) => Err(Error::MissingPrior(agent.id)),
    }
}

/// Round-0 belief `(μ, C) = (η, Σ)`, read off the class block of `Σ`.
pub fn initial_belief(moments: &PredictionMoments) -> GaussianBelief {
    match moments {
        PredictionMoments::Position { eta, sigma, .. } => GaussianBelief::Position { mu_p: *eta, c_p: sigma[(0, 0)] },
        PredictionMoments::Kinematic { eta, sigma, .. } => GaussianBelief::Kinematic {
            mu_p: Vector2::new(eta[0], eta[1]),
            mu_v: Vector2::new(eta[2], eta[3]),
            c_p: sigma[(0, 0)],
            c_v: sigma[(2, 2)],
            c: sigma[(0, 2)],
        },
    }
}

/// Everything agent `k` may use in round `t` of step `n`.
#[derive(Debug, Clone, Copy)]
pub struct LocalInput<'a> {
    pub agent: NodeId,
    pub time_index: usize,
    pub iteration: usize,
    pub prediction: &'a PredictionMoments,
    /// Final belief of `n − 1` (or the prior); source of seed covariances.
    pub previous_final: &'a GaussianBelief,
    pub measurements: &'a [Measurement],
    pub inbox: &'a [BroadcastPayload],
    pub sigma_w: f64,
}

/// Independent random stream for one agent in one round.
pub fn agent_rng(run_seed: u64, agent: NodeId, n: usize, t: usize) -> ChaCha8Rng {
    let mut h = splitmix64(run_seed);
    for v in [agent.0 as u64, n as u64, t as u64] {
        h = splitmix64(h ^ v);
    }
    ChaCha8Rng::seed_from_u64(h)
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Projection problem from local information only: one neighbor term per
/// received payload, paired with the agent's own range to the sender.
pub fn build_problem(input: &LocalInput) -> Result<ProjectionProblem> {
    let mut neighbors = Vec::with_capacity(input.inbox.len());
    for p in input.inbox {
        let m = input
            .measurements
            .iter()
            .find(|m| m.target == p.sender && m.observer == input.agent)
            .ok_or_else(|| Error::InvalidArgument(format!("agent {} has no range to {}", input.agent, p.sender)))?;
        neighbors.push(NeighborSummary { mu_p: p.mu_p, c_p: p.c_p, range: m.value });
    }
    ProjectionProblem::new(*input.prediction, neighbors, input.sigma_w)
}

/// One agent's round: seeds from its own random stream, then the multistart projection.
pub fn local_update(input: &LocalInput, cfg: &EngineConfig) -> Result<ProjectionSolution> {
    let problem = build_problem(input)?;
    let mut rng = agent_rng(cfg.run_seed, input.agent, input.time_index, input.iteration);
    let seeds = seed_recipe(input, &cfg.seeds, &mut rng)?;
    solve_projection(&problem, &seeds, &cfg.solver)
}

/// Counters over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineStats {
    pub solves: usize,
    /// Solves that errored; the agent kept its previous-round belief.
    pub failures: usize,
    /// Solves whose retained minimum missed the gradient tolerance.
    pub unconverged: usize,
}

/// State estimate: the mean of the final belief.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub position: Vector2<f64>,
    pub velocity: Option<Vector2<f64>>,
}

impl From<&GaussianBelief> for Estimate {
    fn from(b: &GaussianBelief) -> Self {
        match *b {
            GaussianBelief::Position { mu_p, .. } => Estimate { position: mu_p, velocity: None },
            GaussianBelief::Kinematic { mu_p, mu_v, .. } => Estimate { position: mu_p, velocity: Some(mu_v) },
        }
    }
}

/// All agents of one simulation run.
pub struct Engine {
    cfg: EngineConfig,
    motion: MotionModel,
    sigma_w: f64,
    priors: BTreeMap<NodeId, GaussianBelief>,
    agents: BTreeMap<NodeId, AgentRuntime>,
    stats: EngineStats,
}

impl Engine {
    /// `priors` describe each agent's state at the step it first appears.
    pub fn new(
        cfg: EngineConfig,
        motion: MotionModel,
        sigma_w: f64,
        priors: BTreeMap<NodeId, GaussianBelief>,
    ) -> Result<Self> {
        cfg.validate()?;
        motion.validate()?;
        if !(sigma_w > 0.0) {
            return Err(Error::InvalidArgument(format!("sigma_w must be positive, got {sigma_w}")));
        }
        for p in priors.values() {
            p.validate()?;
            if p.kind() != motion.kind {
                return Err(Error::MotionMismatch("prior does not match the motion model"));
            }
        }
        Ok(Self { cfg, motion, sigma_w, priors, agents: BTreeMap::new(), stats: EngineStats::default() })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn agents(&self) -> &BTreeMap<NodeId, AgentRuntime> {
        &self.agents
    }

    pub fn stats(&self) -> EngineStats {
        self.stats
    }

    /// Registers the agents present at `n = 0` with their priors as final beliefs.
    pub fn start(&mut self, snapshot: &NetworkSnapshot) -> Result<()> {
        self.agents.clear();
        for &k in &snapshot.agents {
            let prior = *self.priors.get(&k).ok_or(Error::MissingPrior(k))?;
            let mut rt = AgentRuntime::from_prior(k, prior)?;
            rt.previous_final = Some(prior);
            self.agents.insert(k, rt);
        }
        Ok(())
    }

    /// Mobility update followed by `t*` rounds; returns the estimates of all present agents.
    pub fn run_timestep(
        &mut self,
        timeline: &ScenarioTimeline,
        n: usize,
        sink: &mut dyn TraceSink,
    ) -> Result<BTreeMap<NodeId, Estimate>> {
        let snapshot = timeline.snapshot(n)?;
        self.agents.retain(|k, _| snapshot.agents.contains(k));
        for &k in &snapshot.agents {
            let rt = match self.agents.remove(&k) {
                Some(rt) => rt,
                None => AgentRuntime::from_prior(k, *self.priors.get(&k).ok_or(Error::MissingPrior(k))?)?,
            };
            let prediction = mobility_update(&rt, &self.motion, self.priors.get(&k))?;
            let previous_final = rt.previous_final.or_else(|| self.priors.get(&k).copied());
            let rt = AgentRuntime {
                id: k,
                previous_final,
                current_belief: initial_belief(&prediction),
                prediction,
                local_measurements: timeline.local_measurements(k, n),
                inbox: Vec::new(),
            };
            sink.on_prediction(&PredictionRecord {
                time_index: n,
                agent: k,
                prediction,
                previous_final: previous_final.ok_or(Error::MissingPrior(k))?,
            });
            self.agents.insert(k, rt);
        }
        for t in 1..=self.cfg.t_star {
            self.run_iteration(snapshot, n, t, sink)?;
        }
        let mut out = BTreeMap::new();
        for rt in self.agents.values_mut() {
            rt.previous_final = Some(rt.current_belief);
            out.insert(rt.id, Estimate::from(&rt.current_belief));
        }
        Ok(out)
    }

    /// One synchronous round: broadcast the round-`t − 1` beliefs, then let
    /// every agent solve its projection from what it received.
    pub fn run_iteration(
        &mut self,
        snapshot: &NetworkSnapshot,
        n: usize,
        t: usize,
        sink: &mut dyn TraceSink,
    ) -> Result<()> {
        let mut outbox: BTreeMap<NodeId, BroadcastPayload> = BTreeMap::new();
        for (&id, &pos) in &snapshot.anchors {
            outbox.insert(id, BroadcastPayload::anchor(id, pos, n, t));
        }
        for rt in self.agents.values() {
            outbox.insert(rt.id, BroadcastPayload::from_belief(rt.id, &rt.current_belief, n, t));
        }
        for p in outbox.values() {
            sink.on_payload(p);
        }
        for rt in self.agents.values_mut() {
            rt.inbox = snapshot.neighbors(rt.id).iter().filter_map(|l| outbox.get(l).copied()).collect();
        }

        let cfg = &self.cfg;
        let sigma_w = self.sigma_w;
        let solve = |rt: &AgentRuntime| -> Result<ProjectionSolution> {
            let previous_final = rt.previous_final.ok_or(Error::MissingPrior(rt.id))?;
            let input = LocalInput {
                agent: rt.id,
                time_index: n,
                iteration: t,
                prediction: &rt.prediction,
                previous_final: &previous_final,
                measurements: &rt.local_measurements,
                inbox: &rt.inbox,
                sigma_w,
            };
            local_update(&input, cfg)
        };
        let runtimes: Vec<&AgentRuntime> = self.agents.values().collect();
        let results: Vec<Result<ProjectionSolution>> = if cfg.parallel {
            runtimes.par_iter().map(|rt| solve(rt)).collect()
        } else {
            runtimes.iter().map(|rt| solve(rt)).collect()
        };

        for (rt, res) in self.agents.values_mut().zip(results) {
            self.stats.solves += 1;
            match res {
                Ok(sol) => {
                    if !sol.converged {
                        self.stats.unconverged += 1;
                    }
                    rt.current_belief = sol.belief;
                }
                Err(e @ (Error::MissingPrior(_) | Error::InvalidArgument(_))) => return Err(e),
                Err(e) => {
                    self.stats.failures += 1;
                    warn!("n={n} t={t} agent {}: projection failed ({e}); keeping previous belief", rt.id);
                }
            }
            sink.on_belief(&BeliefRecord { time_index: n, iteration: t, agent: rt.id, belief: rt.current_belief });
        }
        Ok(())
    }
}

/// Mean vector of a belief in `[p, v]` order (velocity zero for the random walk).
pub fn belief_mean(b: &GaussianBelief) -> Vector4<f64> {
    match *b {
        GaussianBelief::Position { mu_p, .. } => Vector4::new(mu_p.x, mu_p.y, 0.0, 0.0),
        GaussianBelief::Kinematic { mu_p, mu_v, .. } => Vector4::new(mu_p.x, mu_p.y, mu_v.x, mu_v.y),
    }
}
