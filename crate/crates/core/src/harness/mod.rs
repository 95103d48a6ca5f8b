//! Experiment orchestration: priors, trials, reports and reference oracles.

mod config;
mod oracle;
mod report;

use std::collections::BTreeMap;
use std::time::Instant;

use log::{info, warn};
use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{Engine, EngineConfig, TraceSink};
use crate::error::{Error, Result};
use crate::netmodel::{generate_scenario, MotionKind, NodeId, ScenarioConfig, ScenarioTimeline};
use crate::projection::GaussianBelief;

pub use config::{ConfigFile, ExperimentConfig};
pub use oracle::{grid_posterior_oracle, mc_g_oracle, GridBounds, GridPosterior};
pub use report::{
    default_tau_grid, mean_error, outage_curve, rmse, write_curve_csv, ReportRow, RunReport, TrialStats, CURVE_HEADER,
    REPORT_HEADER,
};

/// How initial beliefs are formed from the first range measurements.
///
/// The position mean is placed uniformly on the range circle around a single
/// adjacent anchor, at the midpoint of two adjacent anchors, at the centroid
/// of three or more, and uniformly in the region without any anchor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorInitRule {
    pub position_variance: f64,
    pub velocity_mean: [f64; 2],
    pub velocity_variance: f64,
}

impl Default for PriorInitRule {
    fn default() -> Self {
        Self { position_variance: 900.0, velocity_mean: [0.0, 0.0], velocity_variance: 0.6 }
    }
}

impl PriorInitRule {
    pub fn from_scenario(cfg: &ScenarioConfig) -> Self {
        Self {
            position_variance: cfg.prior_position_variance,
            velocity_mean: cfg.prior_velocity_mean,
            velocity_variance: cfg.prior_velocity_variance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.position_variance > 0.0) {
            return Err(Error::Config("prior position variance must be positive".into()));
        }
        if !(self.velocity_variance > 0.0) {
            return Err(Error::Config("prior velocity variance must be positive".into()));
        }
        Ok(())
    }
}

/// Which branch of the rule produced a prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorSource {
    Circle,
    Midpoint,
    Centroid,
    Uniform,
}

/// Priors for every agent, built from the snapshot in which it first appears.
pub fn init_priors<R: Rng + ?Sized>(
    timeline: &ScenarioTimeline,
    rule: &PriorInitRule,
    rng: &mut R,
) -> Result<BTreeMap<NodeId, (GaussianBelief, PriorSource)>> {
    rule.validate()?;
    let kind = timeline.config.motion.kind;
    let roi = timeline.config.roi;
    let mut out = BTreeMap::new();
    for (n, snapshot) in timeline.snapshots.iter().enumerate() {
        for &k in &snapshot.agents {
            if out.contains_key(&k) {
                continue;
            }
            let anchors = snapshot.anchor_neighbors(k);
            let pos = |a: &NodeId| snapshot.anchors[a];
            let (mu_p, source) = match anchors.as_slice() {
                [] => (
                    Vector2::new(rng.random_range(0.0..roi.width), rng.random_range(0.0..roi.height)),
                    PriorSource::Uniform,
                ),
                [a] => {
                    let d = timeline
                        .local_measurements(k, n)
                        .iter()
                        .find(|m| m.target == *a)
                        .map(|m| m.value)
                        .ok_or_else(|| Error::InvalidArgument(format!("agent {k} has no range to anchor {a}")))?;
                    let phi = std::f64::consts::TAU * rng.random::<f64>();
                    (pos(a) + d.abs() * Vector2::new(phi.cos(), phi.sin()), PriorSource::Circle)
                }
                [a, b] => ((pos(a) + pos(b)) / 2.0, PriorSource::Midpoint),
                many => (many.iter().map(pos).sum::<Vector2<f64>>() / many.len() as f64, PriorSource::Centroid),
            };
            let belief = match kind {
                MotionKind::RandomWalk => GaussianBelief::Position { mu_p, c_p: rule.position_variance },
                MotionKind::ConstantVelocity => GaussianBelief::Kinematic {
                    mu_p,
                    mu_v: Vector2::from(rule.velocity_mean),
                    c_p: rule.position_variance,
                    c_v: rule.velocity_variance,
                    c: 0.0,
                },
            };
            out.insert(k, (belief, source));
        }
    }
    Ok(out)
}

/// Independent seeds for the pieces of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub scenario: u64,
    pub priors: u64,
    pub engine: u64,
}

impl TrialSeeds {
    pub fn derive(master_seed: u64, trial: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(trial as u64);
        Self { scenario: rng.random(), priors: rng.random(), engine: rng.random() }
    }
}

/// Generates, initializes and runs trial `trial`; rows cover `n = 1..=N`.
pub fn run_trial(
    cfg: &ExperimentConfig,
    trial: usize,
    sink: &mut dyn TraceSink,
) -> Result<(Vec<ReportRow>, TrialStats, ScenarioTimeline)> {
    let seeds = TrialSeeds::derive(cfg.master_seed, trial);
    let scenario = ScenarioConfig { rng_seed: seeds.scenario, ..cfg.scenario.clone() };
    let timeline = generate_scenario(&scenario)?;
    let (rows, stats) = run_on_timeline(&timeline, &cfg.engine, &cfg.prior, trial, seeds, sink)?;
    Ok((rows, stats, timeline))
}

/// Runs the estimator on a fixed timeline.
pub fn run_on_timeline(
    timeline: &ScenarioTimeline,
    engine_cfg: &EngineConfig,
    rule: &PriorInitRule,
    trial: usize,
    seeds: TrialSeeds,
    sink: &mut dyn TraceSink,
) -> Result<(Vec<ReportRow>, TrialStats)> {
    let start = Instant::now();
    let priors = init_priors(timeline, rule, &mut ChaCha8Rng::seed_from_u64(seeds.priors))?;
    let fallback_priors = priors.values().filter(|(_, s)| *s == PriorSource::Uniform).count();
    if fallback_priors > 0 {
        warn!(
            "trial {trial}: {fallback_priors} agents without adjacent anchor at first appearance; uniform prior mean"
        );
    }
    let priors = priors.into_iter().map(|(k, (b, _))| (k, b)).collect();
    let cfg = EngineConfig { run_seed: seeds.engine, ..engine_cfg.clone() };
    let mut engine = Engine::new(cfg, timeline.config.motion, timeline.config.sigma_w, priors)?;
    engine.start(timeline.snapshot(0)?)?;
    let mut rows = Vec::new();
    for n in 1..=timeline.n_steps() {
        let estimates = engine.run_timestep(timeline, n, sink)?;
        for (k, est) in estimates {
            let truth = timeline.true_position(k, n).ok_or(Error::EmptyData(n))?;
            rows.push(ReportRow {
                trial,
                n,
                agent: k,
                true_x: truth.x,
                true_y: truth.y,
                est_x: est.position.x,
                est_y: est.position.y,
                error: (est.position - truth).norm(),
            });
        }
    }
    let es = engine.stats();
    let stats = TrialStats {
        trial,
        solves: es.solves,
        failures: es.failures,
        unconverged: es.unconverged,
        fallback_priors,
        seconds: start.elapsed().as_secs_f64(),
    };
    info!("trial {trial}: {} solves, {} failures, {:.1} s", stats.solves, stats.failures, stats.seconds);
    Ok((rows, stats))
}

/// All trials in order; the report is a deterministic function of the configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    run_experiment_traced(cfg, &mut |_| Box::new(()))
}

/// As [`run_experiment`], with a trace sink per trial.
pub fn run_experiment_traced(
    cfg: &ExperimentConfig,
    sink_for: &mut dyn FnMut(usize) -> Box<dyn TraceSink>,
) -> Result<RunReport> {
    cfg.validate()?;
    let mut report = RunReport::default();
    for trial in 0..cfg.n_trials {
        let mut sink = sink_for(trial);
        let (rows, stats, _) = run_trial(cfg, trial, sink.as_mut())?;
        report.rows.extend(rows);
        report.trials.push(stats);
    }
    Ok(report)
}
