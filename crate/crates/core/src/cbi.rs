//! Cooperative Bug Isolation as a baseline: predicates over option and
//! metric values, scored by how much their truth raises the failure rate.
//!
//! For a predicate `P` over `n` runs with `NumF` failures:
//!
//! * `Failure(P) = F(P) / (S(P) + F(P))`, the failure rate among runs where
//!   `P` holds;
//! * `Context(P) = NumF / n`, the failure rate among runs that observe `P`
//!   (every run observes every predicate here);
//! * `Increase(P) = Failure(P) - Context(P)`;
//! * `Importance(P) = 2 / (1 / Increase(P) + 1 / (ln F(P) / ln NumF))`.
//!
//! Predicates whose `Increase` lower confidence bound is not positive, or that
//! hold in fewer than five runs, score zero.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{BinStrategy, DataError, Dataset, Discretization, Kind, Role};
use crate::stats::normal;

/// Predicates holding in fewer runs than this score zero.
pub const MIN_OBSERVATIONS: usize = 5;

#[derive(Debug, Error)]
pub enum CbiError {
    #[error("{labels} fault labels for {rows} rows")]
    LabelLength { labels: usize, rows: usize },
    #[error("confidence level must lie in (0, 1), got {0}")]
    BadLevel(f64),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    GreaterThan,
    LessThan,
    Equals,
    InBin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub variable: String,
    pub relation: Relation,
    pub threshold: f64,
    pub observed_count: usize,
    pub observed_true_count: usize,
    pub failing_true_count: usize,
    pub failing_observed_count: usize,
}

impl std::fmt::Display for Predicate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let op = match self.relation {
            Relation::GreaterThan => ">",
            Relation::LessThan => "<",
            Relation::Equals => "==",
            Relation::InBin => "in bin",
        };
        write!(f, "{} {op} {}", self.variable, self.threshold)
    }
}

impl Predicate {
    fn holds(&self, x: f64) -> bool {
        match self.relation {
            Relation::GreaterThan => x > self.threshold,
            Relation::LessThan => x < self.threshold,
            Relation::Equals | Relation::InBin => x == self.threshold,
        }
    }

    pub fn failure(&self) -> f64 {
        ratio(self.failing_true_count, self.observed_true_count)
    }

    pub fn context(&self) -> f64 {
        ratio(self.failing_observed_count, self.observed_count)
    }

    pub fn increase(&self) -> f64 {
        self.failure() - self.context()
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Equality predicates for each level of discrete options and metrics,
/// greater-than predicates at the interior bin edges of continuous ones.
pub fn mine_predicates(ds: &Dataset, fault_labels: &[bool], bins: usize) -> Result<Vec<Predicate>, CbiError> {
    let n = ds.sample_count();
    if fault_labels.len() != n {
        return Err(CbiError::LabelLength { labels: fault_labels.len(), rows: n });
    }
    let failing = fault_labels.iter().filter(|&&f| f).count();
    let mut out = Vec::new();
    for (i, meta) in ds.variables().iter().enumerate() {
        if meta.role == Role::PerformanceObjective {
            continue;
        }
        let col = ds.column(i);
        let (relation, thresholds): (Relation, Vec<f64>) = if meta.kind == Kind::Continuous {
            let d = Discretization::fit(&meta.name, col, BinStrategy::EqualFrequency, bins)?;
            (Relation::GreaterThan, d.interior_edges().to_vec())
        } else {
            let mut levels: Vec<f64> = match meta.kind {
                Kind::Boolean => vec![0.0, 1.0],
                Kind::Categorical => (0..meta.levels().map_or(0, <[String]>::len)).map(|l| l as f64).collect(),
                _ => Vec::new(),
            };
            levels.extend_from_slice(col);
            levels.sort_by(f64::total_cmp);
            levels.dedup();
            (Relation::Equals, levels)
        };
        for threshold in thresholds {
            let mut p = Predicate {
                variable: meta.name.clone(),
                relation,
                threshold,
                observed_count: n,
                observed_true_count: 0,
                failing_true_count: 0,
                failing_observed_count: failing,
            };
            for (&x, &f) in col.iter().zip(fault_labels) {
                if p.holds(x) {
                    p.observed_true_count += 1;
                    if f {
                        p.failing_true_count += 1;
                    }
                }
            }
            out.push(p);
        }
    }
    Ok(out)
}

/// Harmonic mean of `Increase` and normalized log failure coverage, or 0 when
/// the predicate is filtered out.
pub fn importance(p: &Predicate, ci_level: f64) -> f64 {
    if p.observed_count < MIN_OBSERVATIONS || p.observed_true_count < MIN_OBSERVATIONS {
        return 0.0;
    }
    let (f, c) = (p.failure(), p.context());
    let increase = f - c;
    let z = normal::quantile(1.0 - (1.0 - ci_level) / 2.0);
    let se = (f * (1.0 - f) / p.observed_true_count as f64 + c * (1.0 - c) / p.observed_count as f64).sqrt();
    if increase - z * se <= 0.0 {
        return 0.0;
    }
    let num_f = p.failing_observed_count;
    let coverage = match (p.failing_true_count, num_f) {
        (0, _) => 0.0,
        (_, 1) => 1.0,
        (ft, nf) => (ft as f64).ln() / (nf as f64).ln(),
    };
    if coverage <= 0.0 {
        return 0.0;
    }
    2.0 / (1.0 / increase + 1.0 / coverage)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbiScore {
    pub option: String,
    pub score: f64,
    pub best_predicate: Option<Predicate>,
}

/// Options ranked by their best predicate's importance, ties broken by name.
pub fn cbi_rank(ds: &Dataset, fault_labels: &[bool], ci_level: f64, bins: usize) -> Result<Vec<CbiScore>, CbiError> {
    if !(ci_level > 0.0 && ci_level < 1.0) {
        return Err(CbiError::BadLevel(ci_level));
    }
    let predicates = mine_predicates(ds, fault_labels, bins)?;
    let mut best: BTreeMap<String, CbiScore> = ds
        .with_role(Role::ManipulableOption)
        .into_iter()
        .map(|i| {
            let name = ds.meta(i).name.clone();
            (name.clone(), CbiScore { option: name, score: 0.0, best_predicate: None })
        })
        .collect();
    for p in predicates {
        if let Some(entry) = best.get_mut(&p.variable) {
            let s = importance(&p, ci_level);
            if s > entry.score {
                entry.score = s;
                entry.best_predicate = Some(p);
            }
        }
    }
    let mut ranked: Vec<CbiScore> = best.into_values().collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.option.cmp(&b.option)));
    Ok(ranked)
}

/// The first `top_k` options with positive importance.
pub fn cbi_root_causes(ranked: &[CbiScore], top_k: usize) -> Vec<String> {
    ranked.iter().filter(|s| s.score > 0.0).take(top_k).map(|s| s.option.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::VariableMeta;
    use proptest::prelude::*;

    fn pred(observed: usize, obs_true: usize, fail_true: usize, fail_obs: usize) -> Predicate {
        Predicate {
            variable: "x".into(),
            relation: Relation::Equals,
            threshold: 1.0,
            observed_count: observed,
            observed_true_count: obs_true,
            failing_true_count: fail_true,
            failing_observed_count: fail_obs,
        }
    }

    #[test]
    fn always_true_predicate_is_uninformative() {
        let p = pred(100, 100, 50, 50);
        assert_eq!(p.increase(), 0.0);
        assert_eq!(importance(&p, 0.95), 0.0);
    }

    #[test]
    fn failing_only_predicate() {
        // 100 runs, 10 fail, P true in exactly the failing runs
        let p = pred(100, 10, 10, 10);
        assert_eq!(p.failure(), 1.0);
        assert!((p.context() - 0.1).abs() < 1e-15);
        assert!((p.increase() - 0.9).abs() < 1e-15);
        let expect = 2.0 / (1.0 / 0.9 + 1.0);
        assert!((importance(&p, 0.95) - expect).abs() < 1e-12);
    }

    #[test]
    fn rare_predicates_are_filtered() {
        assert_eq!(importance(&pred(100, 4, 4, 10), 0.95), 0.0);
        assert_eq!(importance(&pred(4, 4, 4, 4), 0.95), 0.0);
    }

    fn ds() -> Dataset {
        let vars = vec![
            VariableMeta::new("flag", Role::ManipulableOption, Kind::Boolean),
            VariableMeta::new("speed", Role::ManipulableOption, Kind::Continuous),
            VariableMeta::new("y", Role::PerformanceObjective, Kind::Continuous),
        ];
        let flag: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
        let speed: Vec<f64> = (0..100).map(|i| i as f64).collect();
        Dataset::new(vars, vec![flag, speed, vec![0.0; 100]]).unwrap()
    }

    #[test]
    fn predicate_construction() {
        let labels = vec![false; 100];
        let preds = mine_predicates(&ds(), &labels, 5).unwrap();
        let flag: Vec<_> = preds.iter().filter(|p| p.variable == "flag").collect();
        assert_eq!(flag.len(), 2);
        assert!(flag.iter().all(|p| p.relation == Relation::Equals));
        let speed: Vec<_> = preds.iter().filter(|p| p.variable == "speed").collect();
        assert_eq!(speed.len(), 4);
        assert!(speed.iter().all(|p| p.relation == Relation::GreaterThan));
        assert!(preds.iter().all(|p| p.failing_true_count == 0 && p.failing_observed_count == 0));
    }

    #[test]
    fn causal_option_ranks_first() {
        let labels: Vec<bool> = (0..100).map(|i| i % 2 == 1 && i % 3 == 0).collect();
        let ranked = cbi_rank(&ds(), &labels, 0.95, 5).unwrap();
        assert_eq!(ranked[0].option, "flag");
        assert!(ranked[0].score > 0.0);
    }

    #[test]
    fn all_zero_scores_tie_lexicographically() {
        let ranked = cbi_rank(&ds(), &vec![false; 100], 0.95, 5).unwrap();
        let names: Vec<_> = ranked.iter().map(|s| s.option.as_str()).collect();
        assert_eq!(names, vec!["flag", "speed"]);
        assert!(cbi_root_causes(&ranked, 4).is_empty());
    }

    proptest! {
        #[test]
        fn rates_stay_in_range(obs in 1usize..500, t in 0usize..500, ft in 0usize..500, fo in 0usize..500) {
            let obs_true = t.min(obs);
            let fail_obs = fo.min(obs);
            let fail_true = ft.min(obs_true).min(fail_obs);
            let p = pred(obs, obs_true, fail_true, fail_obs);
            prop_assert!((0.0..=1.0).contains(&p.failure()));
            prop_assert!((0.0..=1.0).contains(&p.context()));
            prop_assert!((-1.0..=1.0).contains(&p.increase()));
            let s = importance(&p, 0.95);
            prop_assert!((0.0..=1.0).contains(&s));
        }

        #[test]
        fn importance_monotone_in_increase(fail_true in 5usize..50, extra in 1usize..50) {
            // fewer runs where P holds, same failing coverage: larger Increase
            let fail_obs = 60;
            let wide = pred(1000, fail_true + extra + 20, fail_true, fail_obs);
            let narrow = pred(1000, fail_true + 20, fail_true, fail_obs);
            prop_assert!(narrow.increase() > wide.increase());
            prop_assert!(importance(&narrow, 0.95) >= importance(&wide, 0.95));
        }
    }
}
