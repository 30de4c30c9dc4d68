//! Statistical primitives used by discovery and edge resolution.

pub mod correlation;
pub mod coupling;
pub mod entropy;
pub mod normal;

use thiserror::Error;

pub use correlation::{
    correlation_matrix, fisher_z, fisher_z_test, partial_correlation, partial_from_corr, CiTestResult, FisherZ,
};
pub use coupling::{greedy_coupling, latent_entropy_from_joint, min_entropy_latent, CouplingAtom, LatentCoupling};
pub use entropy::{conditional_entropy, entropy, entropy_bits, entropy_of, joint_counts, EntropyEstimate};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("conditioning set is collinear; covariance submatrix is singular")]
    SingularCovariance,
    #[error("{n} samples cannot support a conditioning set of size {cond}")]
    InsufficientSamples { n: usize, cond: usize },
    #[error("variable `{0}` is not discrete; discretize it first")]
    NonDiscreteVariable(String),
    #[error("alpha must lie in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("empty variable list")]
    EmptyVariableList,
    #[error(transparent)]
    Data(#[from] crate::dataset::DataError),
}
