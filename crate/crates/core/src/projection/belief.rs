use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};

use crate::error::{Error, Result};
use crate::netmodel::MotionKind;

/// Member of the constrained Gaussian class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GaussianBelief {
    /// `N(μ_p, c_p I₂)` (random walk).
    Position { mu_p: Vector2<f64>, c_p: f64 },
    /// `N([μ_p; μ_v], [[c_p, c], [c, c_v]] ⊗ I₂)` (constant velocity).
    Kinematic { mu_p: Vector2<f64>, mu_v: Vector2<f64>, c_p: f64, c_v: f64, c: f64 },
}

impl GaussianBelief {
    pub fn kind(&self) -> MotionKind {
        match self {
            GaussianBelief::Position { .. } => MotionKind::RandomWalk,
            GaussianBelief::Kinematic { .. } => MotionKind::ConstantVelocity,
        }
    }

    pub fn mu_p(&self) -> Vector2<f64> {
        match *self {
            GaussianBelief::Position { mu_p, .. } | GaussianBelief::Kinematic { mu_p, .. } => mu_p,
        }
    }

    pub fn c_p(&self) -> f64 {
        match *self {
            GaussianBelief::Position { c_p, .. } | GaussianBelief::Kinematic { c_p, .. } => c_p,
        }
    }

    /// Same belief with a different position mean.
    pub fn with_mu_p(mut self, new: Vector2<f64>) -> Self {
        match &mut self {
            GaussianBelief::Position { mu_p, .. } | GaussianBelief::Kinematic { mu_p, .. } => *mu_p = new,
        }
        self
    }

    /// Positive definiteness of the covariance (and finite parameters).
    pub fn is_feasible(&self) -> bool {
        let finite = self.params().iter().all(|v| v.is_finite());
        finite
            && match *self {
                GaussianBelief::Position { c_p, .. } => c_p > 0.0,
                GaussianBelief::Kinematic { c_p, c_v, c, .. } => c_p > 0.0 && c_v > 0.0 && c_p * c_v - c * c > 0.0,
            }
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_feasible() {
            Ok(())
        } else {
            Err(Error::Infeasible("covariance of belief is not positive definite"))
        }
    }

    /// Number of free parameters: 3 (random walk) or 7 (constant velocity).
    pub fn dim(kind: MotionKind) -> usize {
        match kind {
            MotionKind::RandomWalk => 3,
            MotionKind::ConstantVelocity => 7,
        }
    }

    /// `θ = [μ_p, c_p]` or `θ = [μ_p, μ_v, c_p, c_v, c]`.
    pub fn params(&self) -> Vec<f64> {
        match *self {
            GaussianBelief::Position { mu_p, c_p } => vec![mu_p.x, mu_p.y, c_p],
            GaussianBelief::Kinematic { mu_p, mu_v, c_p, c_v, c } => {
                vec![mu_p.x, mu_p.y, mu_v.x, mu_v.y, c_p, c_v, c]
            }
        }
    }

    pub fn from_params(kind: MotionKind, theta: &[f64]) -> Result<Self> {
        match (kind, theta) {
            (MotionKind::RandomWalk, &[x, y, c_p]) => Ok(GaussianBelief::Position { mu_p: Vector2::new(x, y), c_p }),
            (MotionKind::ConstantVelocity, &[x, y, vx, vy, c_p, c_v, c]) => {
                Ok(GaussianBelief::Kinematic { mu_p: Vector2::new(x, y), mu_v: Vector2::new(vx, vy), c_p, c_v, c })
            }
            _ => Err(Error::InvalidArgument(format!(
                "expected {} parameters for {kind:?}, got {}",
                Self::dim(kind),
                theta.len()
            ))),
        }
    }
}

/// Mean and covariance of the motion-predicted message `N(η, Σ)`, with the
/// precision `J = Σ⁻¹` cached.
#[derive(Debug, Clone, Copy, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum PredictionMoments {
    Position { eta: Vector2<f64>, sigma: Matrix2<f64>, precision: Matrix2<f64> },
    Kinematic { eta: Vector4<f64>, sigma: Matrix4<f64>, precision: Matrix4<f64> },
}

/// Covariances whose eigenvalue spread exceeds this are treated as singular.
const MAX_CONDITION: f64 = 1e14;
/// Smallest admissible eigenvalue; beyond this, quadratic forms in the precision overflow.
const MIN_EIGENVALUE: f64 = 1e-150;

impl PredictionMoments {
    pub fn position(eta: Vector2<f64>, sigma: Matrix2<f64>) -> Result<Self> {
        check_spd(&sigma)?;
        let precision = sigma.cholesky().ok_or(Error::SingularCovariance)?.inverse();
        Ok(PredictionMoments::Position { eta, sigma, precision })
    }

    pub fn kinematic(eta: Vector4<f64>, sigma: Matrix4<f64>) -> Result<Self> {
        check_spd(&sigma)?;
        let precision = sigma.cholesky().ok_or(Error::SingularCovariance)?.inverse();
        Ok(PredictionMoments::Kinematic { eta, sigma, precision })
    }

    /// Moments of an in-class belief, e.g. a prior.
    pub fn from_belief(belief: &GaussianBelief) -> Result<Self> {
        belief.validate()?;
        match *belief {
            GaussianBelief::Position { mu_p, c_p } => Self::position(mu_p, Matrix2::identity() * c_p),
            GaussianBelief::Kinematic { mu_p, mu_v, c_p, c_v, c } => {
                Self::kinematic(Vector4::new(mu_p.x, mu_p.y, mu_v.x, mu_v.y), kron_i2(&Matrix2::new(c_p, c, c, c_v)))
            }
        }
    }

    pub fn kind(&self) -> MotionKind {
        match self {
            PredictionMoments::Position { .. } => MotionKind::RandomWalk,
            PredictionMoments::Kinematic { .. } => MotionKind::ConstantVelocity,
        }
    }

    pub fn eta_p(&self) -> Vector2<f64> {
        match self {
            PredictionMoments::Position { eta, .. } => *eta,
            PredictionMoments::Kinematic { eta, .. } => Vector2::new(eta[0], eta[1]),
        }
    }

    /// Minimizer of `D[g ‖ N(η, Σ)]` over the class. With
    /// `K = ½ [[J₁₁+J₂₂, J₁₃+J₂₄], [J₁₃+J₂₄, J₃₃+J₄₄]]` the divergence reduces to
    /// `tr(K S) − ln det S + const`, so `S = K⁻¹` and `μ = η`. When `Σ` is
    /// itself of the form `S ⊗ I₂` this recovers `S` exactly.
    pub fn class_belief(&self) -> GaussianBelief {
        match self {
            PredictionMoments::Position { eta, precision: j, .. } => {
                GaussianBelief::Position { mu_p: *eta, c_p: 2.0 / (j[(0, 0)] + j[(1, 1)]) }
            }
            PredictionMoments::Kinematic { eta, precision: j, .. } => {
                let k_pp = 0.5 * (j[(0, 0)] + j[(1, 1)]);
                let k_vv = 0.5 * (j[(2, 2)] + j[(3, 3)]);
                let k_pv = 0.5 * (j[(0, 2)] + j[(1, 3)]);
                let det = k_pp * k_vv - k_pv * k_pv;
                GaussianBelief::Kinematic {
                    mu_p: Vector2::new(eta[0], eta[1]),
                    mu_v: Vector2::new(eta[2], eta[3]),
                    c_p: k_vv / det,
                    c_v: k_pp / det,
                    c: -k_pv / det,
                }
            }
        }
    }

    /// Per-axis block `S` when `Σ = S ⊗ I₂` holds to `tol` (relative), else `None`.
    pub fn kron_block(&self, tol: f64) -> Option<Matrix2<f64>> {
        match self {
            PredictionMoments::Position { sigma, .. } => {
                let scale = sigma.amax();
                let ok = (sigma[(0, 0)] - sigma[(1, 1)]).abs() <= tol * scale && sigma[(0, 1)].abs() <= tol * scale;
                ok.then(|| Matrix2::new(sigma[(0, 0)], 0.0, 0.0, sigma[(0, 0)]))
            }
            PredictionMoments::Kinematic { sigma, .. } => {
                let s = Matrix2::new(sigma[(0, 0)], sigma[(0, 2)], sigma[(2, 0)], sigma[(2, 2)]);
                let diff = (sigma - kron_i2(&s)).amax();
                (diff <= tol * sigma.amax()).then_some(s)
            }
        }
    }
}

/// `S ⊗ I₂` in `[p_x, p_y, v_x, v_y]` ordering.
pub(crate) fn kron_i2(s: &Matrix2<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    for a in 0..2 {
        for b in 0..2 {
            m[(2 * a, 2 * b)] = s[(a, b)];
            m[(2 * a + 1, 2 * b + 1)] = s[(a, b)];
        }
    }
    m
}

fn check_spd<const D: usize>(sigma: &nalgebra::SMatrix<f64, D, D>) -> Result<()> {
    if !sigma.iter().all(|v| v.is_finite()) || (sigma - sigma.transpose()).amax() > 1e-12 * sigma.amax() {
        return Err(Error::SingularCovariance);
    }
    let eig = nalgebra::DMatrix::from_column_slice(D, D, sigma.as_slice()).symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > MIN_EIGENVALUE) || hi > MAX_CONDITION * lo {
        return Err(Error::SingularCovariance);
    }
    Ok(())
}
