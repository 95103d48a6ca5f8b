use std::path::PathBuf;

use crate::netmodel::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("argument {x} outside the supported domain x <= 0")]
    KummerDomain { x: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("state does not match motion model: {0}")]
    MotionMismatch(&'static str),

    #[error("covariance matrix is singular or not positive definite")]
    SingularCovariance,

    #[error("belief parameters are infeasible: {0}")]
    Infeasible(&'static str),

    #[error("no seed produced a feasible solution (best objective {best_objective:?})")]
    AllSeedsFailed { best_objective: Option<f64> },

    #[error("cannot place {n_anchors} anchors on a near-square grid")]
    AnchorLayout { n_anchors: usize },

    #[error("agent {0} has neither a previous belief nor a prior")]
    MissingPrior(NodeId),

    #[error("no data for time index {0}")]
    EmptyData(usize),

    #[error("grid step {step} too coarse for sigma_w = {sigma_w} (need step <= sigma_w / 10)")]
    GridTooCoarse { step: f64, sigma_w: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed record in {path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}
