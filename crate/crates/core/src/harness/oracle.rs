//! Reference computations that do not share code with the estimator.

use nalgebra::Vector2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::projection::NeighborSummary;

/// Axis-aligned search rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridBounds {
    pub min: Vector2<f64>,
    pub max: Vector2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPosterior {
    pub mean: Vector2<f64>,
    /// Marginal variances of `x` and `y`.
    pub variance: Vector2<f64>,
}

/// Posterior of a static agent on a regular grid:
/// `∝ N(p; μ₀, v₀ I) · Π_l N(d_l; ‖p − a_l‖, σ_w²)`, normalized over the cells.
pub fn grid_posterior_oracle(
    anchors: &[Vector2<f64>],
    ranges: &[f64],
    sigma_w: f64,
    prior_mean: Vector2<f64>,
    prior_variance: f64,
    bounds: GridBounds,
    step: f64,
) -> Result<GridPosterior> {
    if anchors.len() != ranges.len() {
        return Err(Error::InvalidArgument("one range per anchor required".into()));
    }
    if !(sigma_w > 0.0 && prior_variance > 0.0 && step > 0.0) {
        return Err(Error::InvalidArgument("sigma_w, prior variance and step must be positive".into()));
    }
    if step > sigma_w / 10.0 {
        return Err(Error::GridTooCoarse { step, sigma_w });
    }
    let span = bounds.max - bounds.min;
    if !(span.x > 0.0 && span.y > 0.0) {
        return Err(Error::InvalidArgument("empty grid bounds".into()));
    }
    let nx = (span.x / step).round() as usize + 1;
    let ny = (span.y / step).round() as usize + 1;
    let point = |i: usize, j: usize| bounds.min + Vector2::new(i as f64 * step, j as f64 * step);
    let log_density = |p: Vector2<f64>| {
        let prior = -(p - prior_mean).norm_squared() / (2.0 * prior_variance);
        let lik: f64 = anchors
            .iter()
            .zip(ranges)
            .map(|(a, d)| {
                let r = d - (p - a).norm();
                -r * r / (2.0 * sigma_w * sigma_w)
            })
            .sum();
        prior + lik
    };
    let mut peak = f64::NEG_INFINITY;
    for i in 0..nx {
        for j in 0..ny {
            peak = peak.max(log_density(point(i, j)));
        }
    }
    let (mut w_sum, mut m1, mut m2) = (0.0, Vector2::zeros(), Vector2::zeros());
    for i in 0..nx {
        for j in 0..ny {
            let p = point(i, j);
            let w = (log_density(p) - peak).exp();
            w_sum += w;
            m1 += w * p;
            m2 += w * p.component_mul(&p);
        }
    }
    let mean = m1 / w_sum;
    Ok(GridPosterior { mean, variance: m2 / w_sum - mean.component_mul(&mean) })
}

/// Monte Carlo estimate of `E[−(d − ‖z‖)²/(2σ_w²)] + (d² + 2c_pl)/(2σ_w²)` with
/// `z ~ N(μ_p − μ_pl, (c_p + c_pl) I₂)`; the offset makes it comparable to the
/// closed-form range term. Returns the estimate and its standard error.
pub fn mc_g_oracle<R: Rng + ?Sized>(
    mu_p: Vector2<f64>,
    c_p: f64,
    nb: &NeighborSummary,
    sigma_w: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if n_samples < 1_000_000 {
        return Err(Error::InvalidArgument(format!("need at least 1e6 samples, got {n_samples}")));
    }
    if !(c_p > 0.0 && sigma_w > 0.0) {
        return Err(Error::InvalidArgument("c_p and sigma_w must be positive".into()));
    }
    let s2 = sigma_w * sigma_w;
    let sd = (c_p + nb.c_p).sqrt();
    let center = mu_p - nb.mu_p;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n_samples {
        let zx: f64 = StandardNormal.sample(rng);
        let zy: f64 = StandardNormal.sample(rng);
        let r = (center + sd * Vector2::new(zx, zy)).norm();
        let v = -(nb.range - r).powi(2) / (2.0 * s2);
        sum += v;
        sum_sq += v * v;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok((mean + (nb.range * nb.range + 2.0 * nb.c_p) / (2.0 * s2), (var / n).sqrt()))
}
