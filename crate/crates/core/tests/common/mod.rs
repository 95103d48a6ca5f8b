//! Test-side oracles and generators; nothing here calls into the estimator's numerics.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use bpmf_core::netmodel::{
    AgentState, Measurement, MotionKind, MotionModel, NetworkSnapshot, NodeId, ScenarioConfig, ScenarioTimeline,
};
use bpmf_core::projection::{
    objective, objective_gradient, predict_moments, GaussianBelief, NeighborSummary, PredictionMoments,
    ProjectionProblem,
};
use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;

const SCALE_BITS: u32 = 300;

/// `M(p/2; b; num/den)` by exact fixed-point summation of the power series
/// at scale `2^300`. Truncation of each term costs at most one unit in the
/// last place, far below `f64` resolution.
pub fn series_oracle(p: i64, b: u64, num: i64, den: u64) -> f64 {
    let one = BigInt::from(1u8) << SCALE_BITS;
    let mut term = one.clone();
    let mut sum = one.clone();
    let mut k: u64 = 0;
    loop {
        // (a + k)/(b + k) · x/(k + 1) with a = p/2
        term = term * BigInt::from(p + 2 * k as i64) * BigInt::from(num)
            / (BigInt::from(2 * (b + k) * (k + 1)) * BigInt::from(den));
        if term.is_zero() {
            break;
        }
        sum += &term;
        k += 1;
    }
    sum.to_f64().unwrap() / 2f64.powi(SCALE_BITS as i32)
}

/// Nodes and weights of `n`-point Gauss-Legendre quadrature on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// `(M(-1/2; 1; x), M(1/2; 2; x))` for `x < 0` from the Rician moments
/// `E‖z‖` and `E[(d + u)/‖z‖]` with `z = (d + u, v)`, `u, v ~ N(0, 1)`,
/// `d = √(-2x)`, integrated on `[-10, 10]²` with 10 panels of 20 points per axis.
pub fn rician_oracle(x: f64) -> (f64, f64) {
    let (gx, gw) = gauss_legendre(20);
    let panels = 10;
    let h = 20.0 / panels as f64;
    let mut pts = Vec::with_capacity(panels * gx.len());
    for p in 0..panels {
        let a = -10.0 + p as f64 * h;
        for (t, w) in gx.iter().zip(&gw) {
            let u = a + 0.5 * h * (t + 1.0);
            let phi = (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
            pts.push((u, 0.5 * h * w * phi));
        }
    }
    let d = (-2.0 * x).sqrt();
    let (mut e_r, mut e_cos) = (0.0, 0.0);
    for &(u, wu) in &pts {
        let mut row_r = 0.0;
        let mut row_cos = 0.0;
        for &(v, wv) in &pts {
            let r = (d + u).hypot(v);
            row_r += wv * r;
            row_cos += wv * (d + u) / r;
        }
        e_r += wu * row_r;
        e_cos += wu * row_cos;
    }
    let k = (std::f64::consts::PI / 2.0).sqrt();
    (e_r / k, 2.0 / d * e_cos / k)
}

pub fn random_spd2<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> Matrix2<f64> {
    let a = rng.random_range(lo..hi);
    let b = rng.random_range(lo..hi);
    let rho = rng.random_range(-0.8..0.8);
    Matrix2::new(a, rho * (a * b).sqrt(), rho * (a * b).sqrt(), b)
}

/// A prediction as the engine would form it: a random in-class belief pushed
/// through the motion model.
pub fn random_in_class_moments<R: Rng>(rng: &mut R, kind: MotionKind) -> PredictionMoments {
    let at = Vector2::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
    let prev = random_belief(rng, kind, at);
    let motion = match kind {
        MotionKind::RandomWalk => MotionModel::random_walk(1.0, rng.random_range(0.1..2.0)),
        MotionKind::ConstantVelocity => MotionModel::constant_velocity(1.0, rng.random_range(0.05..0.5)),
    };
    predict_moments(&prev, &motion).unwrap()
}

/// A general SPD prediction, not restricted to the class structure.
pub fn random_general_moments<R: Rng>(rng: &mut R, kind: MotionKind) -> PredictionMoments {
    match kind {
        MotionKind::RandomWalk => {
            let eta = Vector2::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
            PredictionMoments::position(eta, random_spd2(rng, 0.2, 20.0)).unwrap()
        }
        MotionKind::ConstantVelocity => {
            let eta = Vector4::from_fn(
                |i, _| if i < 2 { rng.random_range(-20.0..20.0) } else { rng.random_range(-2.0..2.0) },
            );
            let a = Matrix4::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let sigma = a * a.transpose() + Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, 0.2, 0.2));
            PredictionMoments::kinematic(eta, sigma).unwrap()
        }
    }
}

pub fn random_belief<R: Rng>(rng: &mut R, kind: MotionKind, mu_p: Vector2<f64>) -> GaussianBelief {
    match kind {
        MotionKind::RandomWalk => GaussianBelief::Position { mu_p, c_p: rng.random_range(0.2..20.0) },
        MotionKind::ConstantVelocity => {
            let s = random_spd2(rng, 0.2, 10.0);
            GaussianBelief::Kinematic {
                mu_p,
                mu_v: Vector2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
                c_p: s[(0, 0)],
                c_v: s[(1, 1)],
                c: s[(0, 1)],
            }
        }
    }
}

/// Up to `max` neighbors around `truth`, each an anchor or an agent with a
/// noisy broadcast, with noisy ranges from `truth`.
pub fn random_neighbors<R: Rng>(rng: &mut R, truth: Vector2<f64>, count: usize, sigma_w: f64) -> Vec<NeighborSummary> {
    (0..count)
        .map(|_| {
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let dist = rng.random_range(1.0..20.0);
            let pos = truth + dist * Vector2::new(angle.cos(), angle.sin());
            let range = (dist + sigma_w * rng.random_range(-1.0..1.0)).abs();
            if rng.random_bool(0.5) {
                NeighborSummary::anchor(pos, range)
            } else {
                let c_p = rng.random_range(0.01..10.0);
                let jitter = Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                NeighborSummary::agent(pos + jitter, c_p, range)
            }
        })
        .collect()
}

pub fn random_problem<R: Rng>(rng: &mut R, kind: MotionKind, general: bool, max_neighbors: usize) -> ProjectionProblem {
    let moments = if general { random_general_moments(rng, kind) } else { random_in_class_moments(rng, kind) };
    let truth = moments.eta_p() + Vector2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
    let count = rng.random_range(0..=max_neighbors);
    let neighbors = random_neighbors(rng, truth, count, 1.0);
    ProjectionProblem::new(moments, neighbors, 1.0).unwrap()
}

/// `max_i |g_fd,i − g_i| / max(1, ‖g‖∞)` with central differences of step
/// `1e-6 · max(1, |θ_i|)`.
pub fn gradient_check(belief: &GaussianBelief, problem: &ProjectionProblem) -> f64 {
    let theta = belief.params();
    let grad = objective_gradient(belief, problem).unwrap();
    let scale = grad.iter().fold(1.0f64, |m, g| m.max(g.abs()));
    let mut worst = 0.0f64;
    for i in 0..theta.len() {
        let h = 1e-6 * theta[i].abs().max(1.0);
        let eval = |delta: f64| {
            let mut t = theta.clone();
            t[i] += delta;
            objective(&GaussianBelief::from_params(belief.kind(), &t).unwrap(), problem).unwrap()
        };
        let fd = (eval(h) - eval(-h)) / (2.0 * h);
        worst = worst.max((fd - grad[i]).abs() / scale);
    }
    worst
}

/// One agent that stays at `truth`, with noiseless ranges to fixed anchors,
/// over time indices `0..=n_steps`.
pub fn static_agent_timeline(
    anchors: &[Vector2<f64>],
    truth: Vector2<f64>,
    sigma_w: f64,
    n_steps: usize,
) -> ScenarioTimeline {
    let mut config = ScenarioConfig::reference(MotionKind::RandomWalk, 0);
    config.motion = MotionModel::random_walk(1.0, 0.0);
    config.n_agents = 1;
    config.n_anchors = anchors.len();
    config.n_steps = n_steps;
    config.sigma_w = sigma_w;
    let k = NodeId(0);
    let ids: Vec<NodeId> = (1..=anchors.len() as u32).map(NodeId).collect();
    let mut tl = ScenarioTimeline {
        config,
        snapshots: Vec::new(),
        true_states: Vec::new(),
        driving_noise: Vec::new(),
        measurements: Vec::new(),
    };
    for n in 0..=n_steps {
        tl.snapshots.push(NetworkSnapshot {
            time_index: n,
            agents: BTreeSet::from([k]),
            anchors: ids.iter().zip(anchors).map(|(&id, &a)| (id, a)).collect(),
            agent_edges: BTreeSet::new(),
            agent_anchor_edges: ids.iter().map(|&a| (k, a)).collect(),
        });
        tl.true_states.push(BTreeMap::from([(k, AgentState::at(truth))]));
        tl.driving_noise.push(if n == 0 { BTreeMap::new() } else { BTreeMap::from([(k, Vector2::zeros())]) });
        tl.measurements.push(
            ids.iter()
                .zip(anchors)
                .map(|(&id, a)| Measurement {
                    observer: k,
                    target: id,
                    value: (truth - a).norm(),
                    noise: 0.0,
                    time_index: n,
                })
                .collect(),
        );
    }
    tl
}
