use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix4, SVector, Vector2, Vector4};

use super::newton_cg::Objective;
use super::{GaussianBelief, NeighborSummary, PredictionMoments, ProjectionProblem};
use crate::error::{Error, Result};
use crate::specfun;

/// Partial derivatives of one range term with respect to `(μ_p, c_p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GTermGradient {
    pub d_mu_p: Vector2<f64>,
    pub d_c_p: f64,
}

#[derive(Debug, Clone, Copy)]
struct GEval {
    value: f64,
    d_mu: Vector2<f64>,
    d_cp: f64,
}

/// `G = −(d_μ² + 2c_p)/(2σ²) + (d/σ²) √(πC/2) M(−½; 1; −d_μ²/(2C))` with
/// `d_μ = ‖μ_p − μ_p,l‖`, `C = c_p + c_p,l`, and its gradient through
/// `dM(−½;1;x)/dx = −M(½;2;x)/2`.
fn g_eval(mu_p: &Vector2<f64>, c_p: f64, nb: &NeighborSummary, sigma2: f64) -> GEval {
    let diff = mu_p - nb.mu_p;
    let dmu2 = diff.norm_squared();
    let cc = c_p + nb.c_p;
    let x = -dmu2 / (2.0 * cc);
    let m1 = specfun::m_neg_half_unchecked(x);
    let m2 = specfun::m_half_two_unchecked(x);
    let d = nb.range;
    let root = (PI * cc / 2.0).sqrt();
    let inv_root = (PI / (2.0 * cc)).sqrt();
    GEval {
        value: -(dmu2 + 2.0 * c_p) / (2.0 * sigma2) + d / sigma2 * root * m1,
        d_mu: diff * ((-1.0 + d * inv_root * m2 / 2.0) / sigma2),
        d_cp: (-1.0 + d * inv_root * (m1 + x * m2) / 2.0) / sigma2,
    }
}

fn g_sum(mu_p: &Vector2<f64>, c_p: f64, neighbors: &[NeighborSummary], sigma_w: f64) -> GEval {
    let sigma2 = sigma_w * sigma_w;
    let mut acc = GEval { value: 0.0, d_mu: Vector2::zeros(), d_cp: 0.0 };
    for nb in neighbors {
        let g = g_eval(mu_p, c_p, nb, sigma2);
        acc.value += g.value;
        acc.d_mu += g.d_mu;
        acc.d_cp += g.d_cp;
    }
    acc
}

fn check_term_args(c_p: f64, sigma_w: f64) -> Result<()> {
    if !(c_p > 0.0) {
        return Err(Error::Infeasible("c_p must be positive"));
    }
    if !(sigma_w > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma_w must be positive, got {sigma_w}")));
    }
    Ok(())
}

/// Expected range log-likelihood term for one neighbor, additive constant dropped.
pub fn g_term(mu_p: Vector2<f64>, c_p: f64, nb: &NeighborSummary, sigma_w: f64) -> Result<f64> {
    check_term_args(c_p, sigma_w)?;
    Ok(g_eval(&mu_p, c_p, nb, sigma_w * sigma_w).value)
}

pub fn g_term_gradient(mu_p: Vector2<f64>, c_p: f64, nb: &NeighborSummary, sigma_w: f64) -> Result<GTermGradient> {
    check_term_args(c_p, sigma_w)?;
    let g = g_eval(&mu_p, c_p, nb, sigma_w * sigma_w);
    Ok(GTermGradient { d_mu_p: g.d_mu, d_c_p: g.d_cp })
}

/// `½ [tr(Σ⁻¹C) − ln det C + (μ − η)ᵀ Σ⁻¹ (μ − η)]`.
pub fn kl_to_prediction(belief: &GaussianBelief, moments: &PredictionMoments) -> Result<f64> {
    belief.validate()?;
    let problem = ProjectionProblem { moments: *moments, neighbors: Vec::new(), sigma_w: 1.0 };
    objective(belief, &problem)
}

/// `F(θ)`: divergence to the prediction minus the neighbor terms.
pub fn objective(belief: &GaussianBelief, problem: &ProjectionProblem) -> Result<f64> {
    with_objective(belief, problem, |theta, obj| obj.eval(theta, false).map(|(v, _)| v))
}

/// `∇F(θ)` in [`GaussianBelief::params`] order.
pub fn objective_gradient(belief: &GaussianBelief, problem: &ProjectionProblem) -> Result<Vec<f64>> {
    with_objective(belief, problem, |theta, obj| obj.eval(theta, true).map(|(_, g)| g))
}

trait Eval {
    fn eval(&self, theta: &[f64], grad: bool) -> Option<(f64, Vec<f64>)>;
}

impl Eval for PositionObjective<'_> {
    fn eval(&self, theta: &[f64], grad: bool) -> Option<(f64, Vec<f64>)> {
        let t = SVector::<f64, 3>::from_column_slice(theta);
        if grad {
            self.value_and_gradient(&t).map(|(v, g)| (v, g.as_slice().to_vec()))
        } else {
            self.value(&t).map(|v| (v, Vec::new()))
        }
    }
}

impl Eval for KinematicObjective<'_> {
    fn eval(&self, theta: &[f64], grad: bool) -> Option<(f64, Vec<f64>)> {
        let t = SVector::<f64, 7>::from_column_slice(theta);
        if grad {
            self.value_and_gradient(&t).map(|(v, g)| (v, g.as_slice().to_vec()))
        } else {
            self.value(&t).map(|v| (v, Vec::new()))
        }
    }
}

fn with_objective<T>(
    belief: &GaussianBelief,
    problem: &ProjectionProblem,
    f: impl FnOnce(&[f64], &dyn Eval) -> Option<T>,
) -> Result<T> {
    if belief.kind() != problem.moments.kind() {
        return Err(Error::MotionMismatch("belief and prediction use different motion models"));
    }
    belief.validate()?;
    let theta = belief.params();
    let out = match &problem.moments {
        PredictionMoments::Position { eta, precision, .. } => {
            f(&theta, &PositionObjective::new(eta, precision, &problem.neighbors, problem.sigma_w))
        }
        PredictionMoments::Kinematic { eta, precision, .. } => {
            f(&theta, &KinematicObjective::new(eta, precision, &problem.neighbors, problem.sigma_w))
        }
    };
    out.ok_or(Error::Infeasible("objective undefined at this point"))
}

/// Stationarity conditions of `F` rearranged as `θ = χ(θ)`:
///
/// ```text
/// μ   = η + Σ Σ_l ∂G_l/∂μ
/// c_p = c²/c_v + (½(J₁₁+J₂₂) − Σ_l ∂G_l/∂c_p)⁻¹
/// c_v = c²/c_p + 2/(J₃₃+J₄₄)
/// c   = (1 − √(1 + s² c_p c_v)) / s,   s = J₁₃+J₂₄
/// ```
///
/// The `c` update uses the root with the sign of `−s`, the only one
/// compatible with `c² < c_p c_v`; it is evaluated as
/// `−s c_p c_v / (1 + √(1 + s² c_p c_v))`, which is `0` at `s = 0`.
/// The random-walk variant keeps only the `μ_p` and `c_p` equations with `c = 0`.
pub fn fixed_point_map(belief: &GaussianBelief, problem: &ProjectionProblem) -> Result<GaussianBelief> {
    if belief.kind() != problem.moments.kind() {
        return Err(Error::MotionMismatch("belief and prediction use different motion models"));
    }
    belief.validate()?;
    let g = g_sum(&belief.mu_p(), belief.c_p(), &problem.neighbors, problem.sigma_w);
    match (&problem.moments, *belief) {
        (PredictionMoments::Position { eta, sigma, precision: j }, GaussianBelief::Position { .. }) => {
            let mu_p = eta + sigma * g.d_mu;
            let a = 0.5 * (j[(0, 0)] + j[(1, 1)]) - g.d_cp;
            if !(a > 0.0) {
                return Err(Error::Infeasible("non-positive precision in c_p update"));
            }
            Ok(GaussianBelief::Position { mu_p, c_p: 1.0 / a })
        }
        (PredictionMoments::Kinematic { eta, sigma, precision: j }, GaussianBelief::Kinematic { c_p, c_v, c, .. }) => {
            let mu = eta + sigma * Vector4::new(g.d_mu.x, g.d_mu.y, 0.0, 0.0);
            let a = 0.5 * (j[(0, 0)] + j[(1, 1)]) - g.d_cp;
            if !(a > 0.0) {
                return Err(Error::Infeasible("non-positive precision in c_p update"));
            }
            let s = j[(0, 2)] + j[(1, 3)];
            let pv = c_p * c_v;
            Ok(GaussianBelief::Kinematic {
                mu_p: Vector2::new(mu[0], mu[1]),
                mu_v: Vector2::new(mu[2], mu[3]),
                c_p: c * c / c_v + 1.0 / a,
                c_v: c * c / c_p + 2.0 / (j[(2, 2)] + j[(3, 3)]),
                c: -s * pv / (1.0 + (1.0 + s * s * pv).sqrt()),
            })
        }
        _ => unreachable!("kinds checked above"),
    }
}

/// `F` on `θ = [μ_p, c_p]`.
pub(crate) struct PositionObjective<'a> {
    eta: Vector2<f64>,
    precision: Matrix2<f64>,
    neighbors: &'a [NeighborSummary],
    sigma_w: f64,
}

impl<'a> PositionObjective<'a> {
    pub(crate) fn new(
        eta: &Vector2<f64>,
        precision: &Matrix2<f64>,
        neighbors: &'a [NeighborSummary],
        sigma_w: f64,
    ) -> Self {
        Self { eta: *eta, precision: *precision, neighbors, sigma_w }
    }

    fn evaluate(&self, theta: &SVector<f64, 3>) -> Option<(f64, SVector<f64, 3>)> {
        let c_p = theta[2];
        if !(c_p > 0.0) || !theta.iter().all(|v| v.is_finite()) {
            return None;
        }
        let mu = Vector2::new(theta[0], theta[1]);
        let j = &self.precision;
        let r = mu - self.eta;
        let jr = j * r;
        let half_trace = 0.5 * (j[(0, 0)] + j[(1, 1)]);
        let kl = half_trace * c_p - c_p.ln() + 0.5 * r.dot(&jr);
        let g = g_sum(&mu, c_p, self.neighbors, self.sigma_w);
        let d_mu = jr - g.d_mu;
        let grad = SVector::<f64, 3>::new(d_mu.x, d_mu.y, half_trace - 1.0 / c_p - g.d_cp);
        Some((kl - g.value, grad))
    }
}

impl Objective<3> for PositionObjective<'_> {
    fn value(&self, theta: &SVector<f64, 3>) -> Option<f64> {
        self.evaluate(theta).map(|(v, _)| v)
    }

    fn value_and_gradient(&self, theta: &SVector<f64, 3>) -> Option<(f64, SVector<f64, 3>)> {
        self.evaluate(theta)
    }
}

/// `F` on `θ = [μ_p, μ_v, c_p, c_v, c]`.
pub(crate) struct KinematicObjective<'a> {
    eta: Vector4<f64>,
    precision: Matrix4<f64>,
    neighbors: &'a [NeighborSummary],
    sigma_w: f64,
}

impl<'a> KinematicObjective<'a> {
    pub(crate) fn new(
        eta: &Vector4<f64>,
        precision: &Matrix4<f64>,
        neighbors: &'a [NeighborSummary],
        sigma_w: f64,
    ) -> Self {
        Self { eta: *eta, precision: *precision, neighbors, sigma_w }
    }

    fn evaluate(&self, theta: &SVector<f64, 7>) -> Option<(f64, SVector<f64, 7>)> {
        let (c_p, c_v, c) = (theta[4], theta[5], theta[6]);
        let det = c_p * c_v - c * c;
        if !(c_p > 0.0 && c_v > 0.0 && det > 0.0) || !theta.iter().all(|v| v.is_finite()) {
            return None;
        }
        let j = &self.precision;
        let mu = Vector4::new(theta[0], theta[1], theta[2], theta[3]);
        let r = mu - self.eta;
        let jr = j * r;
        let tp = 0.5 * (j[(0, 0)] + j[(1, 1)]);
        let tv = 0.5 * (j[(2, 2)] + j[(3, 3)]);
        let s = j[(0, 2)] + j[(1, 3)];
        // ½ tr(JC) − ½ ln det C with det C = det²
        let kl = tp * c_p + tv * c_v + s * c - det.ln() + 0.5 * r.dot(&jr);
        let mu_p = Vector2::new(theta[0], theta[1]);
        let g = g_sum(&mu_p, c_p, self.neighbors, self.sigma_w);
        let grad = SVector::<f64, 7>::from([
            jr[0] - g.d_mu.x,
            jr[1] - g.d_mu.y,
            jr[2],
            jr[3],
            tp - c_v / det - g.d_cp,
            tv - c_p / det,
            s + 2.0 * c / det,
        ]);
        Some((kl - g.value, grad))
    }
}

impl Objective<7> for KinematicObjective<'_> {
    fn value(&self, theta: &SVector<f64, 7>) -> Option<f64> {
        self.evaluate(theta).map(|(v, _)| v)
    }

    fn value_and_gradient(&self, theta: &SVector<f64, 7>) -> Option<(f64, SVector<f64, 7>)> {
        self.evaluate(theta)
    }
}
