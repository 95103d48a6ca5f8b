use nalgebra::{Matrix2, SVector};

use super::belief::kron_i2;
use super::newton_cg::{self, Objective, Outcome};
use super::objective::{KinematicObjective, PositionObjective};
use super::{GaussianBelief, PredictionMoments, ProjectionProblem};
use crate::error::{Error, Result};
use crate::netmodel::MotionModel;

pub use super::newton_cg::NewtonCgConfig as SolverConfig;

/// Propagates a belief through the motion model:
/// `η = Fμ, Σ = F C Fᵀ + σ_a² G Gᵀ` (constant velocity) or
/// `η = μ_p, Σ = (c_p + T σ_v²) I₂` (random walk).
pub fn predict_moments(prev: &GaussianBelief, motion: &MotionModel) -> Result<PredictionMoments> {
    prev.validate()?;
    motion.validate()?;
    if prev.kind() != motion.kind {
        return Err(Error::MotionMismatch("belief does not match the motion model"));
    }
    match *prev {
        GaussianBelief::Position { mu_p, c_p } => {
            let var = c_p + motion.period * motion.sigma_v * motion.sigma_v;
            PredictionMoments::position(mu_p, Matrix2::identity() * var)
        }
        GaussianBelief::Kinematic { mu_p, mu_v, c_p, c_v, c } => {
            let f = motion.transition_block();
            let g = motion.noise_gain();
            let s =
                f * Matrix2::new(c_p, c, c, c_v) * f.transpose() + motion.sigma_a * motion.sigma_a * g * g.transpose();
            let eta_p = f[(0, 0)] * mu_p + f[(0, 1)] * mu_v;
            let eta_v = f[(1, 0)] * mu_p + f[(1, 1)] * mu_v;
            PredictionMoments::kinematic(nalgebra::Vector4::new(eta_p.x, eta_p.y, eta_v.x, eta_v.y), kron_i2(&s))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionSolution {
    pub belief: GaussianBelief,
    pub objective: f64,
    pub scaled_gradient_norm: f64,
    /// Whether the gradient tolerance was reached (otherwise the step budget ran out
    /// or backtracking stalled).
    pub converged: bool,
    pub iterations: usize,
    /// Index of the seed the retained minimum was started from.
    pub seed_index: usize,
    /// Seeds that started outside the feasible region.
    pub infeasible_seeds: usize,
}

/// Multistart minimization of the projection objective: one truncated Newton
/// run per seed, keeping the lowest objective (first seed wins ties).
pub fn solve_projection(
    problem: &ProjectionProblem,
    seeds: &[GaussianBelief],
    cfg: &SolverConfig,
) -> Result<ProjectionSolution> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one seed is required".into()));
    }
    if let Some(bad) = seeds.iter().find(|s| s.kind() != problem.moments.kind()) {
        return Err(Error::MotionMismatch(match bad.kind() {
            crate::netmodel::MotionKind::RandomWalk => "random-walk seed for a constant-velocity problem",
            crate::netmodel::MotionKind::ConstantVelocity => "constant-velocity seed for a random-walk problem",
        }));
    }
    match &problem.moments {
        PredictionMoments::Position { eta, precision, .. } => {
            let obj = PositionObjective::new(eta, precision, &problem.neighbors, problem.sigma_w);
            multistart::<_, 3>(&obj, seeds, cfg, problem.moments.kind())
        }
        PredictionMoments::Kinematic { eta, precision, .. } => {
            let obj = KinematicObjective::new(eta, precision, &problem.neighbors, problem.sigma_w);
            multistart::<_, 7>(&obj, seeds, cfg, problem.moments.kind())
        }
    }
}

fn multistart<O: Objective<N>, const N: usize>(
    obj: &O,
    seeds: &[GaussianBelief],
    cfg: &SolverConfig,
    kind: crate::netmodel::MotionKind,
) -> Result<ProjectionSolution> {
    let mut best: Option<(usize, Outcome<N>)> = None;
    let mut infeasible = 0;
    for (i, seed) in seeds.iter().enumerate() {
        let theta0 = SVector::<f64, N>::from_column_slice(&seed.params());
        let Some(out) = newton_cg::minimize(obj, theta0, cfg) else {
            infeasible += 1;
            continue;
        };
        if best.as_ref().is_none_or(|(_, b)| out.value < b.value) {
            best = Some((i, out));
        }
    }
    let (seed_index, out) = best.ok_or(Error::AllSeedsFailed { best_objective: None })?;
    Ok(ProjectionSolution {
        belief: GaussianBelief::from_params(kind, out.theta.as_slice())?,
        objective: out.value,
        scaled_gradient_norm: out.scaled_gradient_norm,
        converged: out.converged(),
        iterations: out.iterations,
        seed_index,
        infeasible_seeds: infeasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::{fixed_point_map, objective, scaled_distance, NeighborSummary};
    use nalgebra::{Matrix4, Vector2, Vector4};

    fn kin(mu: [f64; 4], c_p: f64, c_v: f64, c: f64) -> GaussianBelief {
        GaussianBelief::Kinematic { mu_p: Vector2::new(mu[0], mu[1]), mu_v: Vector2::new(mu[2], mu[3]), c_p, c_v, c }
    }

    #[test]
    fn constant_velocity_prediction() {
        let m = predict_moments(
            &kin([1.0, 2.0, 3.0, 4.0], 1.0, 1.0, 0.0),
            &MotionModel::constant_velocity(1.0, 0.03f64.sqrt()),
        )
        .unwrap();
        let PredictionMoments::Kinematic { eta, sigma, .. } = m else { unreachable!() };
        assert_eq!(eta, Vector4::new(4.0, 6.0, 3.0, 4.0));
        let expected = kron_i2(&Matrix2::new(2.0075, 1.015, 1.015, 1.03));
        assert!((sigma - expected).amax() < 1e-14, "{sigma}");
        assert!(m.kron_block(1e-15).is_some());
    }

    #[test]
    fn degenerate_prediction_is_singular() {
        let m = predict_moments(&kin([0.0; 4], 1e-152, 1e-152, 0.0), &MotionModel::constant_velocity(1.0, 0.0));
        assert!(matches!(m, Err(Error::SingularCovariance)), "{m:?}");
    }

    #[test]
    fn random_walk_prediction() {
        let prev = GaussianBelief::Position { mu_p: Vector2::new(3.0, -1.0), c_p: 2.0 };
        let m = predict_moments(&prev, &MotionModel::random_walk(1.0, 1.5f64.sqrt())).unwrap();
        let PredictionMoments::Position { eta, sigma, .. } = m else { unreachable!() };
        assert_eq!(eta, Vector2::new(3.0, -1.0));
        assert!((sigma - Matrix2::identity() * 3.5).amax() < 1e-15);
    }

    #[test]
    fn prediction_rejects_mismatched_model() {
        let prev = GaussianBelief::Position { mu_p: Vector2::zeros(), c_p: 1.0 };
        assert!(matches!(
            predict_moments(&prev, &MotionModel::constant_velocity(1.0, 0.1)),
            Err(Error::MotionMismatch(_))
        ));
    }

    #[test]
    fn no_neighbors_recovers_prediction() {
        let m = PredictionMoments::kinematic(
            Vector4::new(4.0, 6.0, 3.0, 4.0),
            kron_i2(&Matrix2::new(2.0075, 1.015, 1.015, 1.03)),
        )
        .unwrap();
        let p = ProjectionProblem::new(m, vec![], 1.0).unwrap();
        let sol = solve_projection(&p, &[kin([0.0; 4], 1.0, 1.0, 0.0)], &SolverConfig::default()).unwrap();
        assert!(scaled_distance(&sol.belief.params(), &m.class_belief().params()) < 1e-9, "{sol:?}");
    }

    #[test]
    fn multistart_keeps_the_best_seed() {
        let m = PredictionMoments::position(Vector2::new(10.0, 10.0), Matrix2::identity() * 900.0).unwrap();
        let nbs = vec![
            NeighborSummary::anchor(Vector2::new(0.0, 0.0), 9.2),
            NeighborSummary::anchor(Vector2::new(20.0, 0.0), 15.6),
        ];
        let p = ProjectionProblem::new(m, nbs, 1.0).unwrap();
        let seeds = [
            GaussianBelief::Position { mu_p: Vector2::new(6.0, 7.0), c_p: 0.5 },
            GaussianBelief::Position { mu_p: Vector2::new(6.0, -7.0), c_p: 0.5 },
            GaussianBelief::Position { mu_p: Vector2::new(40.0, 40.0), c_p: 3.0 },
        ];
        let sol = solve_projection(&p, &seeds, &SolverConfig::default()).unwrap();
        for s in &seeds {
            assert!(sol.objective <= objective(s, &p).unwrap());
        }
        let mapped = fixed_point_map(&sol.belief, &p).unwrap();
        assert!(scaled_distance(&mapped.params(), &sol.belief.params()) < 1e-5);
    }

    #[test]
    fn infeasible_seeds_fail() {
        let m = PredictionMoments::kinematic(Vector4::zeros(), Matrix4::identity()).unwrap();
        let p = ProjectionProblem::new(m, vec![], 1.0).unwrap();
        let bad = kin([0.0; 4], 1.0, 1.0, 2.0);
        assert!(matches!(solve_projection(&p, &[bad], &SolverConfig::default()), Err(Error::AllSeedsFailed { .. })));
        let sol = solve_projection(&p, &[bad, kin([0.0; 4], 1.0, 1.0, 0.0)], &SolverConfig::default()).unwrap();
        assert_eq!((sol.seed_index, sol.infeasible_seeds), (1, 1));
        assert!(solve_projection(&p, &[], &SolverConfig::default()).is_err());
    }
}
