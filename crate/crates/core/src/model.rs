//! End-to-end learning of a causal model from observational data, and its
//! incremental update with new samples.

use log::info;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{discretize_default, DataError, Dataset};
use crate::discovery::{build_constraints, fci_with, ConstraintConflict, DiscoveryError, FciConfig};
use crate::graph::{Admg, Pag};
use crate::resolve::{resolve_with_report, EdgeDecision, ResolveError, DEFAULT_THETA_RATIO};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Discovery(#[from] DiscoveryError),
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub alpha: f64,
    pub theta_ratio: f64,
    /// Equal-frequency bins for continuous variables during edge resolution.
    pub bins: usize,
    pub max_cond_size: Option<usize>,
    pub possible_dsep: bool,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig { alpha: 0.05, theta_ratio: DEFAULT_THETA_RATIO, bins: 5, max_cond_size: Some(3), possible_dsep: true }
    }
}

impl LearnConfig {
    fn fci(&self) -> FciConfig {
        FciConfig { alpha: self.alpha, max_cond_size: self.max_cond_size, possible_dsep: self.possible_dsep }
    }
}

/// A learned model: the PAG from discovery and the ADMG it resolves to.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CausalModel {
    pub pag: Pag,
    pub admg: Admg,
    pub decisions: Vec<EdgeDecision>,
    pub conflicts: Vec<ConstraintConflict>,
}

/// Structure learning on raw data, edge resolution on its discretization.
pub fn learn(ds: &Dataset, cfg: &LearnConfig) -> Result<CausalModel, ModelError> {
    learn_from(ds, cfg, None)
}

fn learn_from(ds: &Dataset, cfg: &LearnConfig, warm: Option<&Pag>) -> Result<CausalModel, ModelError> {
    ds.check_roles_complete()?;
    let sc = build_constraints(ds.variables());
    let out = fci_with(ds, &sc, &cfg.fci(), warm)?;
    let binned = discretize_default(ds, cfg.bins)?;
    let res = resolve_with_report(&out.pag, &binned, cfg.theta_ratio, &sc)?;
    info!(
        "learned {} directed and {} bidirected edges",
        res.admg.directed().len(),
        res.admg.bidirected().len()
    );
    Ok(CausalModel { pag: out.pag, admg: res.admg, decisions: res.decisions, conflicts: out.conflicts })
}

/// Relearns on `old` plus `new_samples`, resuming each previously separated
/// pair's search at its old separating-set size. An empty batch returns the
/// model unchanged.
pub fn update_model(
    model: &CausalModel,
    old: &Dataset,
    new_samples: &Dataset,
    cfg: &LearnConfig,
) -> Result<CausalModel, ModelError> {
    let same_schema = old.n_vars() == new_samples.n_vars()
        && old
            .variables()
            .iter()
            .zip(new_samples.variables())
            .all(|(a, b)| a.name == b.name && a.role == b.role && a.kind == b.kind);
    if !same_schema {
        return Err(ModelError::SchemaMismatch("new samples do not match the model's variables".into()));
    }
    if new_samples.sample_count() == 0 {
        return Ok(model.clone());
    }
    let combined = old.concat(new_samples)?;
    learn_from(&combined, cfg, Some(&model.pag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Kind, Role, VariableMeta};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn chain(seed: u64, n: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut cols = vec![Vec::new(), Vec::new(), Vec::new()];
        for i in 0..n {
            let o = (i % 3) as f64;
            let m = o + noise.sample(&mut rng);
            let y = m + noise.sample(&mut rng);
            cols[0].push(o);
            cols[1].push(m);
            cols[2].push(y);
        }
        let vars = vec![
            VariableMeta::new("o", Role::ManipulableOption, Kind::Discrete),
            VariableMeta::new("m", Role::NonManipulableMetric, Kind::Continuous),
            VariableMeta::new("y", Role::PerformanceObjective, Kind::Continuous),
        ];
        Dataset::new(vars, cols).unwrap()
    }

    #[test]
    fn chain_learns_two_edges() {
        let ds = chain(1, 3000);
        let model = learn(&ds, &LearnConfig::default()).unwrap();
        assert_eq!(model.admg.edge_count(), 2);
        assert!(model.admg.is_acyclic());
    }

    #[test]
    fn empty_update_is_identity() {
        let ds = chain(2, 1000);
        let cfg = LearnConfig::default();
        let model = learn(&ds, &cfg).unwrap();
        let empty = ds.select_rows(&[]);
        let updated = update_model(&model, &ds, &empty, &cfg).unwrap();
        assert_eq!(updated.admg, model.admg);
    }

    #[test]
    fn schema_mismatch_is_reported() {
        let ds = chain(3, 300);
        let cfg = LearnConfig::default();
        let model = learn(&ds, &cfg).unwrap();
        let vars = vec![VariableMeta::new("z", Role::ManipulableOption, Kind::Discrete)];
        let other = Dataset::new(vars, vec![vec![0.0]]).unwrap();
        assert!(matches!(update_model(&model, &ds, &other, &cfg), Err(ModelError::SchemaMismatch(_))));
    }
}
