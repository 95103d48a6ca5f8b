//! Per-agent information projection onto the constrained Gaussian class.
//!
//! An agent's belief is `N(μ, S ⊗ I₂)` with `S = [[c_p, c], [c, c_v]]` under
//! the constant-velocity model, or `N(μ_p, c_p I₂)` under the random walk.
//! The projection minimizes
//!
//! ```text
//! F(θ) = D[g ‖ N(η, Σ)] − Σ_l G_l(μ_p, c_p)
//! ```
//!
//! over the class parameters `θ`, where `N(η, Σ)` is the motion-predicted
//! message and each `G_l` is the expected range log-likelihood against a
//! neighbor's broadcast `(μ_p,l, c_p,l)`. Additive constants are dropped.

mod belief;
pub mod newton_cg;
mod objective;
mod solve;

pub use belief::{GaussianBelief, PredictionMoments};
pub use objective::{
    fixed_point_map, g_term, g_term_gradient, kl_to_prediction, objective, objective_gradient, GTermGradient,
};
pub use solve::{predict_moments, solve_projection, ProjectionSolution, SolverConfig};

use nalgebra::Vector2;

/// What agent `k` knows about one neighbor `l` in the current iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborSummary {
    /// Broadcast position mean of the neighbor (true position for anchors).
    pub mu_p: Vector2<f64>,
    /// Broadcast position variance; exactly 0 for anchors.
    pub c_p: f64,
    /// Range measured by agent `k` to this neighbor.
    pub range: f64,
}

impl NeighborSummary {
    pub fn anchor(position: Vector2<f64>, range: f64) -> Self {
        Self { mu_p: position, c_p: 0.0, range }
    }

    pub fn agent(mu_p: Vector2<f64>, c_p: f64, range: f64) -> Self {
        Self { mu_p, c_p, range }
    }
}

/// One agent's objective for one message passing iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionProblem {
    pub moments: PredictionMoments,
    pub neighbors: Vec<NeighborSummary>,
    pub sigma_w: f64,
}

impl ProjectionProblem {
    pub fn new(moments: PredictionMoments, neighbors: Vec<NeighborSummary>, sigma_w: f64) -> crate::Result<Self> {
        if !(sigma_w > 0.0) {
            return Err(crate::Error::InvalidArgument(format!("sigma_w must be positive, got {sigma_w}")));
        }
        if neighbors.iter().any(|nb| !(nb.c_p >= 0.0) || !nb.range.is_finite()) {
            return Err(crate::Error::InvalidArgument("neighbor summary with negative variance".into()));
        }
        Ok(Self { moments, neighbors, sigma_w })
    }
}

/// `max_i |g_i| · max(1, |θ_i|)`: gradient norm in units of relative parameter change.
pub fn scaled_norm(theta: &[f64], grad: &[f64]) -> f64 {
    theta.iter().zip(grad).map(|(t, g)| g.abs() * t.abs().max(1.0)).fold(0.0, f64::max)
}

/// `max_i |a_i − b_i| / max(1, |b_i|)`.
pub fn scaled_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / y.abs().max(1.0)).fold(0.0, f64::max)
}
