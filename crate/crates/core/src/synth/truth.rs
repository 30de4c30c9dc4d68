use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::scm::Scm;
use super::SynthError;
use crate::dataset::{Dataset, Kind, Role};
use crate::effects::Diagnosis;

/// Upper percentile beyond which a continuous objective counts as faulty.
pub const FAULT_PERCENTILE: f64 = 0.99;
/// Rows per level when estimating oracle effects.
pub const ORACLE_SAMPLES: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fault {
    pub objective: String,
    pub fault_rows: Vec<usize>,
    pub true_root_causes: BTreeSet<String>,
    /// Oracle effect of every option on the objective (0 for non-ancestors).
    pub true_effects: BTreeMap<String, f64>,
}

impl Fault {
    /// One flag per row of the dataset the fault was curated from.
    pub fn labels(&self, rows: usize) -> Vec<bool> {
        let mut out = vec![false; rows];
        for &r in &self.fault_rows {
            out[r] = true;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub faults: Vec<Fault>,
}

/// Rows where `objective` is faulty: beyond the 99th percentile for a
/// continuous objective, false for a pass/fail one.
pub fn fault_rows(ds: &Dataset, objective: &str) -> Result<Vec<usize>, SynthError> {
    let i = ds.index_of(objective).ok_or_else(|| SynthError::UnknownVertex(objective.into()))?;
    let col = ds.column(i);
    let rows: Vec<usize> = if ds.meta(i).kind == Kind::Boolean {
        (0..col.len()).filter(|&r| col[r] == 0.0).collect()
    } else {
        let mut sorted = col.to_vec();
        sorted.sort_by(f64::total_cmp);
        let cut = sorted[((FAULT_PERCENTILE * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1];
        (0..col.len()).filter(|&r| col[r] > cut).collect()
    };
    if rows.is_empty() {
        return Err(SynthError::NoFaultyRows(objective.into()));
    }
    Ok(rows)
}

/// Oracle effects of every option on `objective`, exactly 0 for options that
/// are not root causes.
pub fn oracle_effects(scm: &Scm, objective: &str, roots: &BTreeSet<String>, seed: u64) -> Result<BTreeMap<String, f64>, SynthError> {
    scm.names_with_role(Role::ManipulableOption)
        .into_iter()
        .map(|o| {
            let v = if roots.contains(&o) { scm.oracle_ace(&o, objective, ORACLE_SAMPLES, seed)? } else { 0.0 };
            Ok((o, v))
        })
        .collect()
}

/// Faults for the first `n_faults` objectives of `scm`, with the rows of `ds`
/// that exhibit them.
pub fn curate_ground_truth(scm: &Scm, ds: &Dataset, n_faults: usize) -> Result<GroundTruth, SynthError> {
    let faults = scm
        .names_with_role(Role::PerformanceObjective)
        .into_iter()
        .take(n_faults)
        .map(|objective| {
            let fault_rows = fault_rows(ds, &objective)?;
            let true_root_causes = scm.true_root_causes(&objective)?;
            let true_effects = oracle_effects(scm, &objective, &true_root_causes, scm.seed ^ 0x0ac1e)?;
            Ok(Fault { objective, fault_rows, true_root_causes, true_effects })
        })
        .collect::<Result<_, SynthError>>()?;
    Ok(GroundTruth { faults })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub rmse: f64,
}

impl EvalReport {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize, rmse: f64) -> Self {
        let total = tp + fp + tn + fn_;
        let accuracy = if total == 0 { 1.0 } else { (tp + tn) as f64 / total as f64 };
        let precision = match tp + fp {
            0 => (fn_ == 0) as u8 as f64,
            d => tp as f64 / d as f64,
        };
        let recall = match tp + fn_ {
            0 => (fp == 0) as u8 as f64,
            d => tp as f64 / d as f64,
        };
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        EvalReport { tp, fp, tn, fn_, accuracy, precision, recall, f1, rmse }
    }

    /// Pooled counts; RMSE is the root mean of the per-report squared RMSEs.
    pub fn aggregate(reports: &[EvalReport]) -> EvalReport {
        let sum = |f: fn(&EvalReport) -> usize| reports.iter().map(f).sum();
        let rmse = if reports.is_empty() {
            0.0
        } else {
            (reports.iter().map(|r| r.rmse * r.rmse).sum::<f64>() / reports.len() as f64).sqrt()
        };
        EvalReport::from_counts(sum(|r| r.tp), sum(|r| r.fp), sum(|r| r.tn), sum(|r| r.fn_), rmse)
    }
}

/// A predicted root-cause set with the effect estimated for each member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub objective: String,
    pub root_causes: Vec<String>,
    pub effects: BTreeMap<String, f64>,
}

impl From<&Diagnosis> for Prediction {
    fn from(d: &Diagnosis) -> Self {
        Prediction { objective: d.objective.clone(), root_causes: d.root_causes.clone(), effects: d.root_cause_effects.clone() }
    }
}

/// Confusion counts over `universe`, plus RMSE between predicted and oracle
/// effects over the union of predicted and true causes (a cause that is not
/// predicted counts with effect 0).
pub fn evaluate_prediction(pred: &Prediction, truth: &Fault, universe: &[String]) -> Result<EvalReport, SynthError> {
    if pred.objective != truth.objective {
        return Err(SynthError::ObjectiveMismatch { predicted: pred.objective.clone(), truth: truth.objective.clone() });
    }
    let predicted: BTreeSet<&String> = pred.root_causes.iter().collect();
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for o in universe {
        match (predicted.contains(o), truth.true_root_causes.contains(o)) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let union: BTreeSet<&String> = predicted.iter().copied().chain(truth.true_root_causes.iter()).collect();
    let rmse = if union.is_empty() {
        0.0
    } else {
        let sq: f64 = union
            .iter()
            .map(|c| {
                let est = if predicted.contains(c) { pred.effects.get(*c).copied().unwrap_or(0.0) } else { 0.0 };
                let truth = truth.true_effects.get(*c).copied().unwrap_or(0.0);
                (est - truth).powi(2)
            })
            .sum();
        (sq / union.len() as f64).sqrt()
    };
    Ok(EvalReport::from_counts(tp, fp, tn, fn_, rmse))
}

pub fn evaluate(pred: &Diagnosis, truth: &Fault, universe: &[String]) -> Result<EvalReport, SynthError> {
    evaluate_prediction(&Prediction::from(pred), truth, universe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::VariableMeta;

    fn fault(roots: &[&str]) -> Fault {
        Fault {
            objective: "y".into(),
            fault_rows: vec![],
            true_root_causes: roots.iter().map(|s| s.to_string()).collect(),
            true_effects: roots.iter().map(|s| (s.to_string(), 1.0)).collect(),
        }
    }

    fn universe(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("o{i}")).collect()
    }

    #[test]
    fn perfect_prediction() {
        let truth = fault(&["o1", "o2"]);
        let pred = Prediction {
            objective: "y".into(),
            root_causes: vec!["o2".into(), "o1".into()],
            effects: BTreeMap::from([("o1".into(), 1.0), ("o2".into(), 1.0)]),
        };
        let r = evaluate_prediction(&pred, &truth, &universe(5)).unwrap();
        assert_eq!((r.accuracy, r.precision, r.recall, r.f1, r.rmse), (1.0, 1.0, 1.0, 1.0, 0.0));
    }

    #[test]
    fn formula_arithmetic() {
        let r = EvalReport::from_counts(3, 1, 5, 1, 0.0);
        assert!((r.accuracy - 0.8).abs() < 1e-12);
        assert!((r.precision - 0.75).abs() < 1e-12);
        assert!((r.recall - 0.75).abs() < 1e-12);
        assert!((r.f1 - 0.75).abs() < 1e-12);
    }

    #[test]
    fn counts_cover_universe_and_rmse_uses_union() {
        let truth = fault(&["o0", "o1"]);
        let pred = Prediction {
            objective: "y".into(),
            root_causes: vec!["o1".into(), "o3".into()],
            effects: BTreeMap::from([("o1".into(), 1.5), ("o3".into(), 0.5)]),
        };
        let r = evaluate_prediction(&pred, &truth, &universe(6)).unwrap();
        assert_eq!(r.tp + r.fp + r.tn + r.fn_, 6);
        assert_eq!((r.tp, r.fp, r.fn_, r.tn), (1, 1, 1, 3));
        // union {o0, o1, o3}: errors 1, 0.5, 0.5
        let expect = ((1.0 + 0.25 + 0.25) / 3.0f64).sqrt();
        assert!((r.rmse - expect).abs() < 1e-12);
    }

    #[test]
    fn mismatched_objective() {
        let pred = Prediction { objective: "z".into(), root_causes: vec![], effects: BTreeMap::new() };
        assert!(matches!(
            evaluate_prediction(&pred, &fault(&["o0"]), &universe(2)),
            Err(SynthError::ObjectiveMismatch { .. })
        ));
    }

    #[test]
    fn percentile_and_boolean_faults() {
        let vars = vec![
            VariableMeta::new("e", Role::PerformanceObjective, Kind::Continuous),
            VariableMeta::new("ok", Role::PerformanceObjective, Kind::Boolean),
        ];
        let e: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let ok: Vec<f64> = (0..1000).map(|i| if i % 10 == 0 { 0.0 } else { 1.0 }).collect();
        let ds = Dataset::new(vars, vec![e, ok]).unwrap();
        assert_eq!(fault_rows(&ds, "e").unwrap().len(), 10);
        assert_eq!(fault_rows(&ds, "ok").unwrap(), (0..100).map(|i| i * 10).collect::<Vec<_>>());
    }
}
