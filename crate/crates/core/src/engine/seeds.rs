use nalgebra::{Matrix2, SMatrix, SVector, Vector2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::LocalInput;
use crate::error::{Error, Result};
use crate::projection::{GaussianBelief, PredictionMoments};

/// Starting points of the multistart projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeedRecipe {
    /// Means drawn from the prediction `N(η, Σ)`.
    pub from_prediction: usize,
    /// Means drawn from the final belief of the previous step.
    pub from_previous: usize,
    /// Position means drawn uniformly from an annulus around each adjacent anchor.
    pub per_anchor: usize,
    /// Radial width of the annulus in units of `σ_w`.
    pub annulus_width: f64,
}

impl Default for SeedRecipe {
    fn default() -> Self {
        Self { from_prediction: 20, from_previous: 20, per_anchor: 20, annulus_width: 3.0 }
    }
}

impl SeedRecipe {
    pub fn validate(&self) -> Result<()> {
        if self.from_prediction + self.from_previous == 0 {
            return Err(Error::Config("seed recipe needs at least one prediction or previous-belief seed".into()));
        }
        if !(self.annulus_width >= 0.0) {
            return Err(Error::Config("annulus_width must be non-negative".into()));
        }
        Ok(())
    }

    pub fn count(&self, adjacent_anchors: usize) -> usize {
        self.from_prediction + self.from_previous + self.per_anchor * adjacent_anchors
    }
}

/// Seeds in a fixed order: prediction draws, previous-belief draws, then
/// annulus draws per anchor in inbox order. Every seed carries the
/// covariance parameters of the previous final belief.
pub fn seed_recipe<R: Rng + ?Sized>(
    input: &LocalInput,
    recipe: &SeedRecipe,
    rng: &mut R,
) -> Result<Vec<GaussianBelief>> {
    let prev = *input.previous_final;
    prev.validate()?;
    if prev.kind() != input.prediction.kind() {
        return Err(Error::MotionMismatch("previous belief does not match the prediction"));
    }
    let anchors: Vec<_> = input.inbox.iter().filter(|p| p.is_anchor()).collect();
    let mut seeds = Vec::with_capacity(recipe.count(anchors.len()));

    match input.prediction {
        PredictionMoments::Position { eta, sigma, .. } => {
            let l = cholesky_factor(sigma)?;
            for _ in 0..recipe.from_prediction {
                seeds.push(prev.with_mu_p(eta + l * gauss::<_, 2>(rng)));
            }
        }
        PredictionMoments::Kinematic { eta, sigma, .. } => {
            let l = cholesky_factor(sigma)?;
            for _ in 0..recipe.from_prediction {
                let x = eta + l * gauss::<_, 4>(rng);
                seeds.push(with_mean(prev, Vector2::new(x[0], x[1]), Vector2::new(x[2], x[3])));
            }
        }
    }

    match prev {
        GaussianBelief::Position { mu_p, c_p } => {
            for _ in 0..recipe.from_previous {
                seeds.push(prev.with_mu_p(mu_p + c_p.sqrt() * gauss::<_, 2>(rng)));
            }
        }
        GaussianBelief::Kinematic { mu_p, mu_v, c_p, c_v, c } => {
            let l = cholesky_factor(&Matrix2::new(c_p, c, c, c_v))?;
            for _ in 0..recipe.from_previous {
                // same 2×2 factor on each axis
                let zx = l * gauss::<_, 2>(rng);
                let zy = l * gauss::<_, 2>(rng);
                seeds.push(with_mean(prev, mu_p + Vector2::new(zx[0], zy[0]), mu_v + Vector2::new(zx[1], zy[1])));
            }
        }
    }

    let half = 0.5 * recipe.annulus_width * input.sigma_w;
    let eta_v = match input.prediction {
        PredictionMoments::Kinematic { eta, .. } => Some(Vector2::new(eta[2], eta[3])),
        PredictionMoments::Position { .. } => None,
    };
    for a in anchors {
        let d = input
            .measurements
            .iter()
            .find(|m| m.target == a.sender)
            .ok_or_else(|| Error::InvalidArgument(format!("agent {} has no range to {}", input.agent, a.sender)))?
            .value;
        let (r_in, r_out) = ((d - half).max(0.0), (d + half).max(0.0));
        for _ in 0..recipe.per_anchor {
            let u: f64 = rng.random();
            let r = (r_in * r_in + u * (r_out * r_out - r_in * r_in)).sqrt();
            let phi = std::f64::consts::TAU * rng.random::<f64>();
            let p = a.mu_p + r * Vector2::new(phi.cos(), phi.sin());
            seeds.push(match eta_v {
                Some(v) => with_mean(prev, p, v),
                None => prev.with_mu_p(p),
            });
        }
    }
    Ok(seeds)
}

fn with_mean(prev: GaussianBelief, mu_p: Vector2<f64>, mu_v: Vector2<f64>) -> GaussianBelief {
    match prev {
        GaussianBelief::Kinematic { c_p, c_v, c, .. } => GaussianBelief::Kinematic { mu_p, mu_v, c_p, c_v, c },
        GaussianBelief::Position { c_p, .. } => GaussianBelief::Position { mu_p, c_p },
    }
}

fn gauss<R: Rng + ?Sized, const D: usize>(rng: &mut R) -> SVector<f64, D> {
    SVector::from_fn(|_, _| StandardNormal.sample(rng))
}

fn cholesky_factor<const D: usize>(sigma: &SMatrix<f64, D, D>) -> Result<SMatrix<f64, D, D>> {
    Ok(sigma.cholesky().ok_or(Error::SingularCovariance)?.l())
}
