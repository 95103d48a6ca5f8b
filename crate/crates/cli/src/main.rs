use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bpmf_core::engine::{write_payload_trace, Recording};
use bpmf_core::harness::{
    self, grid_posterior_oracle, write_curve_csv, ExperimentConfig, GridBounds, RunReport, TrialSeeds,
};
use bpmf_core::netmodel::{generate_scenario, read_timeline, write_timeline};
use bpmf_core::projection::{solve_projection, NeighborSummary, PredictionMoments, ProjectionProblem};
use bpmf_core::{csvfmt::fmt_f64, GaussianBelief, MotionKind, NodeId, ScenarioConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{Matrix2, Vector2};

#[derive(Parser)]
#[command(name = "bpmf", version, about = "Cooperative localization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a scenario (config.toml plus node, edge, state and measurement CSVs) to a directory.
    Generate {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Trial index whose scenario seed is used.
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment and write the per-agent report CSV.
    Run {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Payload trace CSV; trials are appended in order.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Outage probability and RMSE per time index from a report.
    Curve {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Largest threshold in meters.
        #[arg(long, default_value_t = 4.0)]
        tau_max: f64,
        #[arg(long, default_value_t = 0.1)]
        tau_step: f64,
    },
    /// Compare the projection against the grid posterior for agents of a scenario slice,
    /// using anchor ranges only.
    Oracle {
        /// Directory written by `generate`.
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        n: usize,
        /// Restrict to one agent.
        #[arg(long)]
        agent: Option<u32>,
        #[arg(long, default_value_t = 0.02)]
        step: f64,
        #[arg(long, default_value_t = 900.0)]
        prior_variance: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Motion {
    RandomWalk,
    ConstantVelocity,
}

impl From<Motion> for MotionKind {
    fn from(m: Motion) -> Self {
        match m {
            Motion::RandomWalk => MotionKind::RandomWalk,
            Motion::ConstantVelocity => MotionKind::ConstantVelocity,
        }
    }
}

/// Configuration file plus command-line overrides.
#[derive(Args)]
struct ExperimentArgs {
    /// Flat TOML configuration; missing keys take the reference values.
    #[arg(long, required_unless_present = "seed")]
    config: Option<PathBuf>,
    /// Motion model; selects the reference noise scale when no file is given.
    #[arg(long, value_enum)]
    motion: Option<Motion>,
    /// Master seed; required unless a configuration file supplies it.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    t_star: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long)]
    anchors: Option<usize>,
    #[arg(long)]
    roi: Option<f64>,
    #[arg(long)]
    sigma_w: Option<f64>,
    /// Seeds per family (prediction, previous belief, each anchor).
    #[arg(long)]
    seeds_per_family: Option<usize>,
    /// Solve agents sequentially.
    #[arg(long)]
    serial: bool,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => ExperimentConfig::reference(self.motion.map_or(MotionKind::ConstantVelocity, Into::into), 1),
        };
        if let (Some(m), Some(_)) = (self.motion, &self.config) {
            let kind: MotionKind = m.into();
            if kind != cfg.scenario.motion.kind {
                cfg.scenario.motion = ScenarioConfig::reference(kind, 0).motion;
            }
        }
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(v) = self.trials {
            cfg.n_trials = v;
        }
        if let Some(v) = self.t_star {
            cfg.engine.t_star = v;
        }
        if let Some(v) = self.steps {
            cfg.scenario.n_steps = v;
        }
        if let Some(v) = self.agents {
            cfg.scenario.n_agents = v;
        }
        if let Some(v) = self.anchors {
            cfg.scenario.n_anchors = v;
        }
        if let Some(v) = self.roi {
            cfg.scenario.roi.width = v;
            cfg.scenario.roi.height = v;
        }
        if let Some(v) = self.sigma_w {
            cfg.scenario.sigma_w = v;
        }
        if let Some(v) = self.seeds_per_family {
            cfg.engine.seeds.from_prediction = v;
            cfg.engine.seeds.from_previous = v;
            cfg.engine.seeds.per_anchor = v;
        }
        if self.serial {
            cfg.engine.parallel = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { exp, trial, out } => {
            let cfg = exp.resolve()?;
            let seeds = TrialSeeds::derive(cfg.master_seed, trial);
            let scenario = ScenarioConfig { rng_seed: seeds.scenario, ..cfg.scenario };
            let timeline = generate_scenario(&scenario)?;
            std::fs::create_dir_all(&out)?;
            write_timeline(&timeline, &out)?;
            println!("wrote scenario with {} steps to {}", timeline.n_steps(), out.display());
        }
        Command::Run { exp, out, trace } => {
            let mut cfg = exp.resolve()?;
            if out.is_some() {
                cfg.report_path = out;
            }
            if trace.is_some() {
                cfg.trace_path = trace;
            }
            let report = run_with_trace(&cfg)?;
            let path = cfg.report_path.clone().unwrap_or_else(|| PathBuf::from("report.csv"));
            report.write_csv(&path)?;
            let meta = path.with_extension("toml");
            write_metadata(&cfg, &meta)?;
            summarize(&report, &cfg)?;
            println!("wrote {} and {}", path.display(), meta.display());
        }
        Command::Curve { report, out, tau_max, tau_step } => {
            if !(tau_step > 0.0 && tau_max >= 0.0) {
                bail!("tau_step must be positive and tau_max non-negative");
            }
            let taus: Vec<f64> =
                (0..=(tau_max / tau_step + 1e-9).floor() as usize).map(|i| i as f64 * tau_step).collect();
            let rep = RunReport::read_csv(&report).with_context(|| format!("reading {}", report.display()))?;
            write_curve_csv(&rep, &taus, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Oracle { scenario, n, agent, step, prior_variance, out } => {
            oracle(&scenario, n, agent.map(NodeId), step, prior_variance, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn run_with_trace(cfg: &ExperimentConfig) -> Result<RunReport> {
    let Some(trace_path) = cfg.trace_path.clone() else {
        return Ok(harness::run_experiment(cfg)?);
    };
    let mut report = RunReport::default();
    let mut payloads = Vec::new();
    for trial in 0..cfg.n_trials {
        let mut rec = Recording::default();
        let (rows, stats, _) = harness::run_trial(cfg, trial, &mut rec)?;
        report.rows.extend(rows);
        report.trials.push(stats);
        payloads.extend(rec.payloads);
    }
    write_payload_trace(&payloads, &trace_path)?;
    Ok(report)
}

/// Effective configuration of a run, so that the report can be regenerated.
fn write_metadata(cfg: &ExperimentConfig, path: &Path) -> Result<()> {
    let header = "# Configuration that produced the report of the same name.\n\
                  # Outage probabilities are pooled over agents and trials at each time index.\n";
    std::fs::write(path, format!("{header}{}", cfg.to_toml()?))?;
    Ok(())
}

fn summarize(report: &RunReport, cfg: &ExperimentConfig) -> Result<()> {
    let ns = report.time_indices();
    let (Some(&first), Some(&last)) = (ns.first(), ns.last()) else { return Ok(()) };
    for n in [first, last] {
        let p = harness::outage_curve(report, n, &[2.0])?[0];
        eprintln!(
            "n={n}: P_out(2 m)={p:.4} mean error={:.3} m rmse={:.3} m",
            harness::mean_error(report, n)?,
            harness::rmse(report, n)?
        );
    }
    let solves: usize = report.trials.iter().map(|t| t.solves).sum();
    let failures: usize = report.trials.iter().map(|t| t.failures).sum();
    let unconverged: usize = report.trials.iter().map(|t| t.unconverged).sum();
    let secs: f64 = report.trials.iter().map(|t| t.seconds).sum();
    eprintln!(
        "{} trials, {solves} projections ({failures} failed, {unconverged} above tolerance), {secs:.1} s",
        cfg.n_trials
    );
    Ok(())
}

const ORACLE_HEADER: [&str; 12] = [
    "n",
    "agent",
    "anchors",
    "true_x",
    "true_y",
    "grid_x",
    "grid_y",
    "grid_var_x",
    "grid_var_y",
    "proj_x",
    "proj_y",
    "distance",
];

/// Single-snapshot check: for each agent with at least one adjacent anchor,
/// the projection using only anchor ranges against the grid posterior of the
/// same model, both with a prior centered on the anchors.
fn oracle(dir: &Path, n: usize, only: Option<NodeId>, step: f64, prior_variance: f64, out: &Path) -> Result<()> {
    let timeline = read_timeline(dir).with_context(|| format!("reading scenario {}", dir.display()))?;
    let snapshot = timeline.snapshot(n)?;
    let sigma_w = timeline.config.sigma_w;
    let margin = timeline.config.comm_radius + 5.0 * sigma_w;
    let mut w = csv::Writer::from_path(out)?;
    w.write_record(ORACLE_HEADER)?;
    for &k in &snapshot.agents {
        if only.is_some_and(|a| a != k) {
            continue;
        }
        let anchors = snapshot.anchor_neighbors(k);
        if anchors.is_empty() {
            continue;
        }
        let ms = timeline.local_measurements(k, n);
        let pos: Vec<Vector2<f64>> = anchors.iter().map(|a| snapshot.anchors[a]).collect();
        let ranges: Vec<f64> = anchors
            .iter()
            .map(|a| ms.iter().find(|m| m.target == *a).map(|m| m.value))
            .collect::<Option<_>>()
            .context("missing anchor range")?;
        let center = pos.iter().sum::<Vector2<f64>>() / pos.len() as f64;
        let bounds = GridBounds { min: center - Vector2::repeat(margin), max: center + Vector2::repeat(margin) };
        let grid = grid_posterior_oracle(&pos, &ranges, sigma_w, center, prior_variance, bounds, step)?;
        let moments = PredictionMoments::position(center, Matrix2::identity() * prior_variance)?;
        let neighbors = pos.iter().zip(&ranges).map(|(p, d)| NeighborSummary::anchor(*p, *d)).collect();
        let problem = ProjectionProblem::new(moments, neighbors, sigma_w)?;
        let mut seeds = vec![GaussianBelief::Position { mu_p: center, c_p: prior_variance }];
        for (p, d) in pos.iter().zip(&ranges) {
            for i in 0..36 {
                let phi = i as f64 * std::f64::consts::TAU / 36.0;
                seeds.push(GaussianBelief::Position {
                    mu_p: p + *d * Vector2::new(phi.cos(), phi.sin()),
                    c_p: sigma_w * sigma_w,
                });
            }
        }
        let sol = solve_projection(&problem, &seeds, &Default::default())?;
        let proj = sol.belief.mu_p();
        let truth = timeline.true_position(k, n).context("missing true state")?;
        w.write_record([
            n.to_string(),
            k.to_string(),
            anchors.len().to_string(),
            fmt_f64(truth.x),
            fmt_f64(truth.y),
            fmt_f64(grid.mean.x),
            fmt_f64(grid.mean.y),
            fmt_f64(grid.variance.x),
            fmt_f64(grid.variance.y),
            fmt_f64(proj.x),
            fmt_f64(proj.y),
            fmt_f64((proj - grid.mean).norm()),
        ])?;
    }
    w.flush()?;
    Ok(())
}
