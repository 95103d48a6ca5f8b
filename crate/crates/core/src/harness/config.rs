use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::report::default_tau_grid;
use super::PriorInitRule;
use crate::engine::{EngineConfig, SeedRecipe};
use crate::error::{Error, Result};
use crate::netmodel::{MotionKind, MotionModel, Roi, ScenarioConfig};
use crate::projection::SolverConfig;

/// Everything needed to reproduce an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Template; the per-trial `rng_seed` is derived from `master_seed`.
    pub scenario: ScenarioConfig,
    pub engine: EngineConfig,
    pub prior: PriorInitRule,
    pub n_trials: usize,
    pub master_seed: u64,
    pub tau_grid: Vec<f64>,
    pub report_path: Option<PathBuf>,
    pub trace_path: Option<PathBuf>,
}

impl ExperimentConfig {
    /// 30 trials of the reference setup with `t* = 5`.
    pub fn reference(kind: MotionKind, master_seed: u64) -> Self {
        let scenario = ScenarioConfig::reference(kind, master_seed);
        Self {
            prior: PriorInitRule::from_scenario(&scenario),
            scenario,
            engine: EngineConfig::default(),
            n_trials: 30,
            master_seed,
            tau_grid: default_tau_grid(),
            report_path: None,
            trace_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.engine.validate()?;
        self.prior.validate()?;
        if self.n_trials < 1 {
            return Err(Error::Config("n_trials must be at least 1".into()));
        }
        if self.tau_grid.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(Error::Config("tau values must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: ConfigFile = toml::from_str(&text)?;
        let cfg = file.into_experiment();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    /// The on-disk form as text.
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(&ConfigFile::from_experiment(self))?)
    }
}

/// On-disk form: one flat table of keys; absent keys take the reference values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub motion: MotionKind,
    pub master_seed: u64,
    pub n_trials: usize,
    pub roi_width: f64,
    pub roi_height: f64,
    pub n_agents: usize,
    pub n_anchors: usize,
    pub comm_radius: f64,
    pub sigma_w: f64,
    pub period: f64,
    pub sigma_v: f64,
    pub sigma_a: f64,
    pub n_steps: usize,
    pub prior_position_variance: f64,
    pub prior_velocity_mean_x: f64,
    pub prior_velocity_mean_y: f64,
    pub prior_velocity_variance: f64,
    pub t_star: usize,
    pub max_steps: usize,
    pub gradient_tolerance: f64,
    pub cg_relative_residual: f64,
    pub max_halvings: usize,
    pub hvp_step: f64,
    pub seeds_from_prediction: usize,
    pub seeds_from_previous: usize,
    pub seeds_per_anchor: usize,
    pub annulus_width: f64,
    pub parallel: bool,
    pub tau_grid: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<PathBuf>,
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self::from_experiment(&ExperimentConfig::reference(MotionKind::ConstantVelocity, 1))
    }
}

impl ConfigFile {
    pub fn from_experiment(cfg: &ExperimentConfig) -> Self {
        let s = &cfg.scenario;
        let e = &cfg.engine;
        // both noise scales are kept so that switching `motion` alone gives the reference values
        let reference = |kind| ScenarioConfig::reference(kind, 0).motion;
        let sigma_v = if s.motion.kind == MotionKind::RandomWalk {
            s.motion.sigma_v
        } else {
            reference(MotionKind::RandomWalk).sigma_v
        };
        let sigma_a = if s.motion.kind == MotionKind::ConstantVelocity {
            s.motion.sigma_a
        } else {
            reference(MotionKind::ConstantVelocity).sigma_a
        };
        Self {
            motion: s.motion.kind,
            master_seed: cfg.master_seed,
            n_trials: cfg.n_trials,
            roi_width: s.roi.width,
            roi_height: s.roi.height,
            n_agents: s.n_agents,
            n_anchors: s.n_anchors,
            comm_radius: s.comm_radius,
            sigma_w: s.sigma_w,
            period: s.motion.period,
            sigma_v,
            sigma_a,
            n_steps: s.n_steps,
            prior_position_variance: cfg.prior.position_variance,
            prior_velocity_mean_x: cfg.prior.velocity_mean[0],
            prior_velocity_mean_y: cfg.prior.velocity_mean[1],
            prior_velocity_variance: cfg.prior.velocity_variance,
            t_star: e.t_star,
            max_steps: e.solver.max_steps,
            gradient_tolerance: e.solver.gradient_tolerance,
            cg_relative_residual: e.solver.cg_relative_residual,
            max_halvings: e.solver.max_halvings,
            hvp_step: e.solver.hvp_step,
            seeds_from_prediction: e.seeds.from_prediction,
            seeds_from_previous: e.seeds.from_previous,
            seeds_per_anchor: e.seeds.per_anchor,
            annulus_width: e.seeds.annulus_width,
            parallel: e.parallel,
            tau_grid: cfg.tau_grid.clone(),
            report_path: cfg.report_path.clone(),
            trace_path: cfg.trace_path.clone(),
        }
    }

    pub fn into_experiment(self) -> ExperimentConfig {
        let motion = match self.motion {
            MotionKind::RandomWalk => MotionModel::random_walk(self.period, self.sigma_v),
            MotionKind::ConstantVelocity => MotionModel::constant_velocity(self.period, self.sigma_a),
        };
        let prior = PriorInitRule {
            position_variance: self.prior_position_variance,
            velocity_mean: [self.prior_velocity_mean_x, self.prior_velocity_mean_y],
            velocity_variance: self.prior_velocity_variance,
        };
        let scenario = ScenarioConfig {
            roi: Roi { width: self.roi_width, height: self.roi_height },
            n_agents: self.n_agents,
            n_anchors: self.n_anchors,
            comm_radius: self.comm_radius,
            sigma_w: self.sigma_w,
            motion,
            n_steps: self.n_steps,
            rng_seed: self.master_seed,
            prior_position_variance: self.prior_position_variance,
            prior_velocity_mean: prior.velocity_mean,
            prior_velocity_variance: self.prior_velocity_variance,
            membership: Vec::new(),
        };
        let engine = EngineConfig {
            t_star: self.t_star,
            solver: SolverConfig {
                max_steps: self.max_steps,
                gradient_tolerance: self.gradient_tolerance,
                cg_relative_residual: self.cg_relative_residual,
                max_halvings: self.max_halvings,
                hvp_step: self.hvp_step,
            },
            seeds: SeedRecipe {
                from_prediction: self.seeds_from_prediction,
                from_previous: self.seeds_from_previous,
                per_anchor: self.seeds_per_anchor,
                annulus_width: self.annulus_width,
            },
            run_seed: self.master_seed,
            parallel: self.parallel,
        };
        ExperimentConfig {
            scenario,
            engine,
            prior,
            n_trials: self.n_trials,
            master_seed: self.master_seed,
            tau_grid: self.tau_grid,
            report_path: self.report_path,
            trace_path: self.trace_path,
        }
    }
}
