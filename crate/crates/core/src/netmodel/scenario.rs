use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{
    range_measurement, state_transition, AgentState, Measurement, NetworkSnapshot, NodeId, Roi, ScenarioConfig,
    ScenarioTimeline,
};
use crate::error::{Error, Result};

/// Largest accepted column/row ratio of the anchor grid.
const MAX_GRID_ASPECT: usize = 3;

/// Regular anchor layout: `rows × cols` with the most nearly square
/// factorization of `n_anchors`, the longer side along the longer ROI edge,
/// inset half a cell from the border.
pub fn anchor_grid(roi: &Roi, n_anchors: usize) -> Result<Vec<Vector2<f64>>> {
    if n_anchors == 0 {
        return Ok(Vec::new());
    }
    let short =
        (1..=n_anchors).take_while(|r| r * r <= n_anchors).filter(|r| n_anchors.is_multiple_of(*r)).last().unwrap_or(1);
    let long = n_anchors / short;
    if long > MAX_GRID_ASPECT * short {
        return Err(Error::AnchorLayout { n_anchors });
    }
    let (cols, rows) = if roi.width >= roi.height { (long, short) } else { (short, long) };
    let (dx, dy) = (roi.width / cols as f64, roi.height / rows as f64);
    let mut out = Vec::with_capacity(n_anchors);
    for i in 0..rows {
        for j in 0..cols {
            out.push(Vector2::new((j as f64 + 0.5) * dx, (i as f64 + 0.5) * dy));
        }
    }
    Ok(out)
}

/// Draws a full timeline: initial states, trajectories, connectivity and
/// measurements for `n = 0..=N`. Deterministic in `config.rng_seed`.
pub fn generate_scenario(config: &ScenarioConfig) -> Result<ScenarioTimeline> {
    config.validate()?;
    let anchor_positions = anchor_grid(&config.roi, config.n_anchors)?;
    let anchors: BTreeMap<NodeId, Vector2<f64>> = config.anchor_ids().zip(anchor_positions).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let gauss2 =
        |rng: &mut ChaCha8Rng, sigma: f64| Vector2::new(sigma * std_normal.sample(rng), sigma * std_normal.sample(rng));

    let motion = config.motion;
    let has_velocity = motion.kind.has_velocity();
    let mut states: BTreeMap<NodeId, AgentState> = BTreeMap::new();
    for k in config.agent_ids() {
        let p = Vector2::new(rng.random_range(0.0..config.roi.width), rng.random_range(0.0..config.roi.height));
        let state = if has_velocity {
            let mean = Vector2::from(config.prior_velocity_mean);
            AgentState::moving(p, mean + gauss2(&mut rng, config.prior_velocity_variance.sqrt()))
        } else {
            AgentState::at(p)
        };
        states.insert(k, state);
    }

    let n_total = config.n_steps + 1;
    let mut timeline = ScenarioTimeline {
        config: config.clone(),
        snapshots: Vec::with_capacity(n_total),
        true_states: Vec::with_capacity(n_total),
        driving_noise: Vec::with_capacity(n_total),
        measurements: Vec::with_capacity(n_total),
    };

    for n in 0..n_total {
        let mut noise_n = BTreeMap::new();
        if n > 0 {
            let sigma = motion.driving_sigma();
            for (&k, state) in states.iter_mut() {
                let noise = gauss2(&mut rng, sigma);
                let mut next = state_transition(state, &motion, noise)?;
                next.position = config.roi.wrap(next.position);
                *state = next;
                noise_n.insert(k, noise);
            }
        }

        let snapshot = connect(config, n, &states, &anchors);
        let mut measurements = Vec::new();
        let directed = snapshot.agent_edges.iter().chain(&snapshot.agent_anchor_edges).copied();
        let mut directed: Vec<(NodeId, NodeId)> = directed.collect();
        directed.sort_unstable();
        for (k, l) in directed {
            let p_k = states[&k].position;
            let p_l = anchors.get(&l).copied().unwrap_or_else(|| states[&l].position);
            let w = config.sigma_w * std_normal.sample(&mut rng);
            measurements.push(Measurement {
                observer: k,
                target: l,
                value: range_measurement(p_k, p_l, w),
                noise: w,
                time_index: n,
            });
        }

        let members: BTreeMap<NodeId, AgentState> =
            states.iter().filter(|(k, _)| snapshot.agents.contains(k)).map(|(&k, &s)| (k, s)).collect();
        timeline.true_states.push(members);
        timeline.driving_noise.push(noise_n);
        timeline.measurements.push(measurements);
        timeline.snapshots.push(snapshot);
    }
    Ok(timeline)
}

fn connect(
    config: &ScenarioConfig,
    n: usize,
    states: &BTreeMap<NodeId, AgentState>,
    anchors: &BTreeMap<NodeId, Vector2<f64>>,
) -> NetworkSnapshot {
    let agents: BTreeSet<NodeId> = states.keys().copied().filter(|&k| config.is_member(k, n)).collect();
    let r = config.comm_radius;
    let mut agent_edges = BTreeSet::new();
    let mut agent_anchor_edges = BTreeSet::new();
    for &k in &agents {
        let p_k = states[&k].position;
        for &l in &agents {
            if k != l && (p_k - states[&l].position).norm() <= r {
                agent_edges.insert((k, l));
            }
        }
        for (&a, p_a) in anchors {
            if (p_k - p_a).norm() <= r {
                agent_anchor_edges.insert((k, a));
            }
        }
    }
    NetworkSnapshot { time_index: n, agents, anchors: anchors.clone(), agent_edges, agent_anchor_edges }
}
