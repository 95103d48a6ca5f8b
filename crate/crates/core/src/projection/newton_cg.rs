//! Truncated Newton minimization with Hessian-free conjugate-gradient steps.
//!
//! Hessian-vector products are forward differences of the analytic gradient,
//! so an objective only has to supply values and gradients. Points outside
//! the objective's domain are signalled by `None` and handled by
//! backtracking.

use nalgebra::SVector;
use serde::{Deserialize, Serialize};

/// Smooth function on a subset of `ℝᴺ`. `None` marks a point outside the domain.
pub trait Objective<const N: usize> {
    fn value(&self, theta: &SVector<f64, N>) -> Option<f64>;
    fn value_and_gradient(&self, theta: &SVector<f64, N>) -> Option<(f64, SVector<f64, N>)>;

    fn gradient(&self, theta: &SVector<f64, N>) -> Option<SVector<f64, N>> {
        self.value_and_gradient(theta).map(|(_, g)| g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonCgConfig {
    /// Outer Newton steps `j_max`.
    pub max_steps: usize,
    /// Stop once `max_i |g_i| · max(1, |θ_i|)` falls below this.
    pub gradient_tolerance: f64,
    /// Inner CG stops at `‖r‖ ≤ min(cg_relative_residual, ‖g‖) · ‖g‖`.
    pub cg_relative_residual: f64,
    /// Backtracking halvings per line search.
    pub max_halvings: usize,
    /// Relative size of the finite-difference step for Hessian-vector products.
    pub hvp_step: f64,
}

impl Default for NewtonCgConfig {
    fn default() -> Self {
        Self { max_steps: 30, gradient_tolerance: 1e-10, cg_relative_residual: 1e-2, max_halvings: 30, hvp_step: 1e-7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxSteps,
    /// No acceptable point along the search direction within the halving budget.
    LineSearchFailed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome<const N: usize> {
    pub theta: SVector<f64, N>,
    pub value: f64,
    pub gradient: SVector<f64, N>,
    pub scaled_gradient_norm: f64,
    pub iterations: usize,
    pub stop: StopReason,
}

impl<const N: usize> Outcome<N> {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }
}

pub fn scaled_gradient_norm<const N: usize>(theta: &SVector<f64, N>, grad: &SVector<f64, N>) -> f64 {
    theta.iter().zip(grad.iter()).map(|(t, g)| g.abs() * t.abs().max(1.0)).fold(0.0, f64::max)
}

/// Minimizes `obj` from `theta0`. Returns `None` if `theta0` is outside the domain.
pub fn minimize<O, const N: usize>(obj: &O, theta0: SVector<f64, N>, cfg: &NewtonCgConfig) -> Option<Outcome<N>>
where
    O: Objective<N> + ?Sized,
{
    let (mut f, mut g) = obj.value_and_gradient(&theta0)?;
    if !f.is_finite() {
        return None;
    }
    let mut theta = theta0;
    let mut gnorm = scaled_gradient_norm(&theta, &g);
    let mut iterations = 0;
    let stop = loop {
        if gnorm <= cfg.gradient_tolerance {
            break StopReason::Converged;
        }
        if iterations >= cfg.max_steps {
            break StopReason::MaxSteps;
        }
        iterations += 1;
        let mut p = newton_direction(obj, &theta, &g, cfg);
        if !(p.dot(&g) < 0.0) {
            p = -g;
        }
        match line_search(obj, &theta, f, &g, gnorm, &p, cfg) {
            Some((t, fv, gv)) => {
                theta = t;
                f = fv;
                g = gv;
                gnorm = scaled_gradient_norm(&theta, &g);
            }
            None => break StopReason::LineSearchFailed,
        }
    };
    Some(Outcome { theta, value: f, gradient: g, scaled_gradient_norm: gnorm, iterations, stop })
}

/// Approximate solution of `H p = −g` by conjugate gradients.
fn newton_direction<O, const N: usize>(
    obj: &O,
    theta: &SVector<f64, N>,
    g: &SVector<f64, N>,
    cfg: &NewtonCgConfig,
) -> SVector<f64, N>
where
    O: Objective<N> + ?Sized,
{
    let mut p = SVector::<f64, N>::zeros();
    let mut r = -g;
    let mut d = r;
    let mut rr = r.norm_squared();
    let gn = g.norm();
    let target = cfg.cg_relative_residual.min(gn) * gn;
    for i in 0..N {
        let Some(hd) = hessian_vector(obj, theta, g, &d, cfg.hvp_step) else {
            break;
        };
        let curvature = d.dot(&hd);
        if !(curvature > 0.0) {
            if i == 0 {
                return -g;
            }
            break;
        }
        let alpha = rr / curvature;
        p += alpha * d;
        r -= alpha * hd;
        let rr_next = r.norm_squared();
        if rr_next.sqrt() <= target {
            break;
        }
        d = r + (rr_next / rr) * d;
        rr = rr_next;
    }
    if p.iter().all(|v| v.is_finite()) && p != SVector::<f64, N>::zeros() {
        p
    } else {
        -g
    }
}

/// `H v ≈ (∇F(θ + εv) − ∇F(θ)) / ε` with `‖εv‖ = h (1 + ‖θ‖)`; the step is
/// halved while `θ + εv` leaves the domain.
fn hessian_vector<O, const N: usize>(
    obj: &O,
    theta: &SVector<f64, N>,
    g: &SVector<f64, N>,
    v: &SVector<f64, N>,
    h: f64,
) -> Option<SVector<f64, N>>
where
    O: Objective<N> + ?Sized,
{
    let vnorm = v.norm();
    if !(vnorm > 0.0) || !vnorm.is_finite() {
        return None;
    }
    let mut eps = h * (1.0 + theta.norm()) / vnorm;
    for _ in 0..30 {
        if let Some(gp) = obj.gradient(&(theta + eps * v)) {
            return Some((gp - g) / eps);
        }
        eps *= 0.5;
    }
    None
}

const ARMIJO: f64 = 1e-4;

/// Backtracking from the full step. A point is accepted on sufficient
/// decrease, or when the value does not increase beyond rounding and the
/// scaled gradient shrinks (the Armijo test is meaningless once decreases
/// reach the rounding level of `F`).
fn line_search<O, const N: usize>(
    obj: &O,
    theta: &SVector<f64, N>,
    f: f64,
    g: &SVector<f64, N>,
    gnorm: f64,
    p: &SVector<f64, N>,
    cfg: &NewtonCgConfig,
) -> Option<(SVector<f64, N>, f64, SVector<f64, N>)>
where
    O: Objective<N> + ?Sized,
{
    let slope = g.dot(p);
    let noise = 8.0 * f64::EPSILON * f.abs().max(1.0);
    let mut alpha = 1.0;
    for _ in 0..=cfg.max_halvings {
        let trial = theta + alpha * p;
        if let Some(ft) = obj.value(&trial).filter(|v| v.is_finite()) {
            if ft <= f + ARMIJO * alpha * slope {
                let (fv, gv) = obj.value_and_gradient(&trial)?;
                return Some((trial, fv, gv));
            }
            if ft <= f + noise {
                if let Some((fv, gv)) = obj.value_and_gradient(&trial) {
                    if scaled_gradient_norm(&trial, &gv) < gnorm {
                        return Some((trial, fv, gv));
                    }
                }
            }
        }
        alpha *= 0.5;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{SMatrix, Vector2, Vector3};

    struct Quadratic {
        a: SMatrix<f64, 3, 3>,
        b: Vector3<f64>,
    }

    impl Objective<3> for Quadratic {
        fn value(&self, x: &Vector3<f64>) -> Option<f64> {
            Some(0.5 * x.dot(&(self.a * x)) - self.b.dot(x))
        }
        fn value_and_gradient(&self, x: &Vector3<f64>) -> Option<(f64, Vector3<f64>)> {
            Some((self.value(x)?, self.a * x - self.b))
        }
    }

    struct Rosenbrock;

    impl Objective<2> for Rosenbrock {
        fn value(&self, x: &Vector2<f64>) -> Option<f64> {
            Some((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2))
        }
        fn value_and_gradient(&self, x: &Vector2<f64>) -> Option<(f64, Vector2<f64>)> {
            let g =
                Vector2::new(-2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]), 200.0 * (x[1] - x[0] * x[0]));
            Some((self.value(x)?, g))
        }
    }

    /// `x − ln x` on `x > 0`, minimum at 1.
    struct Barrier;

    impl Objective<1> for Barrier {
        fn value(&self, x: &SVector<f64, 1>) -> Option<f64> {
            (x[0] > 0.0).then(|| x[0] - x[0].ln())
        }
        fn value_and_gradient(&self, x: &SVector<f64, 1>) -> Option<(f64, SVector<f64, 1>)> {
            Some((self.value(x)?, SVector::<f64, 1>::new(1.0 - 1.0 / x[0])))
        }
    }

    #[test]
    fn solves_spd_quadratic() {
        let a = SMatrix::<f64, 3, 3>::new(4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0);
        let b = Vector3::new(1.0, -2.0, 0.5);
        let out = minimize(&Quadratic { a, b }, Vector3::new(10.0, 10.0, -10.0), &NewtonCgConfig::default()).unwrap();
        assert!(out.converged());
        let exact = a.lu().solve(&b).unwrap();
        assert!((out.theta - exact).amax() < 1e-8);
    }

    #[test]
    fn rosenbrock_from_standard_start() {
        let cfg = NewtonCgConfig { max_steps: 200, ..Default::default() };
        let out = minimize(&Rosenbrock, Vector2::new(-1.2, 1.0), &cfg).unwrap();
        assert!(out.converged(), "{out:?}");
        assert!((out.theta - Vector2::new(1.0, 1.0)).amax() < 1e-6);
    }

    #[test]
    fn stays_in_domain() {
        let out = minimize(&Barrier, SVector::<f64, 1>::new(1e-3), &NewtonCgConfig::default()).unwrap();
        assert!(out.converged());
        assert!((out.theta[0] - 1.0).abs() < 1e-7);
        assert!(minimize(&Barrier, SVector::<f64, 1>::new(-1.0), &NewtonCgConfig::default()).is_none());
    }

    #[test]
    fn never_increases_value() {
        let cfg = NewtonCgConfig { max_steps: 3, ..Default::default() };
        let x0 = Vector2::new(-1.2, 1.0);
        let out = minimize(&Rosenbrock, x0, &cfg).unwrap();
        assert!(out.value <= Rosenbrock.value(&x0).unwrap());
        assert!(out.iterations <= 3);
    }
}
