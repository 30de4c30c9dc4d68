//! Plug-in Shannon entropy of discrete columns.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::dataset::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub variables: Vec<usize>,
    /// Base-2 entropy of the empirical joint distribution.
    pub value_bits: f64,
    /// Number of distinct observed value tuples.
    pub support_size: usize,
}

/// Entropy in bits of a probability vector; zero entries are skipped.
pub fn entropy_bits(probs: impl IntoIterator<Item = f64>) -> f64 {
    let h: f64 = probs.into_iter().filter(|&p| p > 0.0).map(|p| -p * p.log2()).sum();
    h.max(0.0)
}

fn check_discrete(ds: &Dataset, vars: &[usize]) -> Result<(), StatsError> {
    for &v in vars {
        let meta = ds.meta(v);
        if !meta.kind.is_discrete() || ds.column(v).iter().any(|x| x.fract() != 0.0) {
            return Err(StatsError::NonDiscreteVariable(meta.name.clone()));
        }
    }
    Ok(())
}

/// Counts of each observed value tuple over `vars`.
pub fn joint_counts(ds: &Dataset, vars: &[usize]) -> Result<HashMap<Vec<i64>, usize>, StatsError> {
    check_discrete(ds, vars)?;
    let mut counts: HashMap<Vec<i64>, usize> = HashMap::new();
    for r in 0..ds.sample_count() {
        let key: Vec<i64> = vars.iter().map(|&v| ds.column(v)[r] as i64).collect();
        *counts.entry(key).or_default() += 1;
    }
    Ok(counts)
}

/// Joint entropy of the listed (already discrete) columns.
pub fn entropy(ds: &Dataset, vars: &[usize]) -> Result<EntropyEstimate, StatsError> {
    if vars.is_empty() {
        return Err(StatsError::EmptyVariableList);
    }
    let counts = joint_counts(ds, vars)?;
    let n = ds.sample_count() as f64;
    let mut cells: Vec<usize> = counts.values().copied().collect();
    // fixed summation order keeps results bit-identical across runs
    cells.sort_unstable();
    let value_bits = entropy_bits(cells.iter().map(|&c| c as f64 / n));
    Ok(EntropyEstimate { variables: vars.to_vec(), value_bits, support_size: counts.len().max(1) })
}

/// Entropy of named columns.
pub fn entropy_of(ds: &Dataset, names: &[&str]) -> Result<EntropyEstimate, StatsError> {
    let idx = names.iter().map(|n| ds.require(n)).collect::<Result<Vec<_>, _>>()?;
    entropy(ds, &idx)
}

/// `H(target | given) = H(target, given) - H(given)`.
pub fn conditional_entropy(ds: &Dataset, target: usize, given: usize) -> Result<f64, StatsError> {
    let joint = entropy(ds, &[target, given])?.value_bits;
    let marginal = entropy(ds, &[given])?.value_bits;
    Ok((joint - marginal).max(0.0))
}
