//! Fixtures shared by the benchmarks.

use bpmf_core::netmodel::{generate_scenario, MotionKind, ScenarioTimeline};
use bpmf_core::projection::{predict_moments, GaussianBelief, NeighborSummary, ProjectionProblem};
use bpmf_core::ScenarioConfig;
use nalgebra::Vector2;

/// A projection problem of typical size: two anchors and three agent neighbors.
pub fn typical_problem(kind: MotionKind) -> ProjectionProblem {
    let truth = Vector2::new(10.0, 12.0);
    let prev = match kind {
        MotionKind::RandomWalk => GaussianBelief::Position { mu_p: Vector2::new(11.0, 11.0), c_p: 2.0 },
        MotionKind::ConstantVelocity => GaussianBelief::Kinematic {
            mu_p: Vector2::new(11.0, 11.0),
            mu_v: Vector2::new(0.5, -0.2),
            c_p: 2.0,
            c_v: 0.3,
            c: 0.1,
        },
    };
    let motion = ScenarioConfig::reference(kind, 0).motion;
    let moments = predict_moments(&prev, &motion).expect("valid belief");
    let others = [(0.0, 0.0, 0.0), (20.0, 0.0, 0.0), (15.0, 20.0, 1.5), (0.0, 18.0, 4.0), (25.0, 15.0, 0.7)];
    let neighbors = others
        .iter()
        .map(|&(x, y, c)| {
            let p = Vector2::new(x, y);
            NeighborSummary { mu_p: p, c_p: c, range: (truth - p).norm() + 0.3 }
        })
        .collect();
    ProjectionProblem::new(moments, neighbors, 1.0).expect("valid problem")
}

/// Seeds spread around the prediction, `count` of them.
pub fn seeds(problem: &ProjectionProblem, count: usize) -> Vec<GaussianBelief> {
    let base = problem.moments.class_belief();
    (0..count)
        .map(|i| {
            let phi = i as f64 * std::f64::consts::TAU / count as f64;
            base.with_mu_p(base.mu_p() + 4.0 * Vector2::new(phi.cos(), phi.sin()))
        })
        .collect()
}

/// The reference scenario shortened to `n_steps`.
pub fn reference_timeline(kind: MotionKind, n_steps: usize) -> ScenarioTimeline {
    let cfg = ScenarioConfig { n_steps, ..ScenarioConfig::reference(kind, 7) };
    generate_scenario(&cfg).expect("reference scenario")
}
