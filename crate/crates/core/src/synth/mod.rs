//! Synthetic systems with known causal structure, fault curation and the
//! evaluation harness used by the benchmarks.

mod bench;
mod scm;
mod truth;

use thiserror::Error;

pub use bench::{
    build_instance, derive_seed, evaluate_instance, run_benchmark, shifted_pair, tier_experiment, tiered_scm,
    transfer_series, variance_by_rank, BenchConfig, BenchInstance, BenchReport, FaultResult, RmsePoint, TierConfig,
    TierReport, TransferConfig,
};
pub use scm::{generate_scm, HiddenConfounder, Mechanism, Scm, ScmConfig, HIDDEN_LOADING, MISSION_FAILURE_RATE};
pub use truth::{
    curate_ground_truth, evaluate, evaluate_prediction, fault_rows, oracle_effects, EvalReport, Fault, GroundTruth,
    Prediction, FAULT_PERCENTILE, ORACLE_SAMPLES,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("unknown variable `{0}`")]
    UnknownVertex(String),
    #[error("objective `{0}` has no faulty rows")]
    NoFaultyRows(String),
    #[error("prediction for `{predicted}` scored against fault of `{truth}`")]
    ObjectiveMismatch { predicted: String, truth: String },
    #[error("{0}")]
    BadConfig(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Data(#[from] crate::dataset::DataError),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Effects(#[from] crate::effects::EffectsError),
    #[error(transparent)]
    Cbi(#[from] crate::cbi::CbiError),
}
