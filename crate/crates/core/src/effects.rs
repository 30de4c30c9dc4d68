//! Causal paths from options to objectives, average causal effects by
//! backdoor adjustment, path ranking and root-cause diagnosis.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Mutex;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{BinStrategy, DataError, Dataset, Discretization, Kind, Role};
use crate::graph::{Admg, GraphError};

pub use crate::model::update_model;

/// Bins used for continuous treatments and adjustment variables.
pub const DEFAULT_ACE_BINS: usize = 5;

#[derive(Debug, Error)]
pub enum EffectsError {
    #[error("no causal path from an option reaches `{0}`")]
    NoPathsFound(String),
    #[error("effect of `{treatment}` on `{outcome}` is not identifiable by backdoor adjustment")]
    UnidentifiableEffect { treatment: String, outcome: String },
    #[error("`{0}` is not a performance objective")]
    NotAnObjective(String),
    #[error("top_k must be positive")]
    ZeroTopK,
    #[error("model vertices do not match the dataset's variables")]
    VertexMismatch,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalPath {
    pub vertices: Vec<String>,
    #[serde(skip)]
    pub objective: String,
    pub path_ace: f64,
    pub edge_aces: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AceEstimate {
    pub treatment: String,
    pub outcome: String,
    pub value: f64,
    pub adjustment_set: Vec<String>,
    pub n_treatment_levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub objective: String,
    #[serde(rename = "paths")]
    pub ranked_paths: Vec<CausalPath>,
    pub root_causes: Vec<String>,
    /// Estimated total effect of each root cause on the objective.
    pub root_cause_effects: BTreeMap<String, f64>,
}

/// Level codes for every column: discrete columns keep their values,
/// continuous ones are binned by equal frequency.
pub struct AceEstimator<'a> {
    ds: &'a Dataset,
    codes: Vec<Vec<i64>>,
}

impl<'a> AceEstimator<'a> {
    pub fn new(ds: &'a Dataset, bins: usize) -> Result<Self, EffectsError> {
        let codes = (0..ds.n_vars())
            .map(|i| {
                let col = ds.column(i);
                if ds.meta(i).kind == Kind::Continuous {
                    let d = Discretization::fit(&ds.meta(i).name, col, BinStrategy::EqualFrequency, bins.max(2))?;
                    Ok(d.apply(col).into_iter().map(|x| x as i64).collect())
                } else {
                    Ok(col.iter().map(|&x| x.round() as i64).collect())
                }
            })
            .collect::<Result<_, DataError>>()?;
        Ok(AceEstimator { ds, codes })
    }

    pub fn dataset(&self) -> &Dataset {
        self.ds
    }

    /// `E[outcome | do(treatment = level)]` for every observed treatment
    /// level, by standardization over the cells of `adjust`. Cells lacking a
    /// level are left out of that level's average and the remaining cell
    /// weights renormalized.
    pub fn interventional_means(&self, treatment: usize, outcome: usize, adjust: &[usize]) -> BTreeMap<i64, f64> {
        let t = &self.codes[treatment];
        let y = self.ds.column(outcome);
        let n = y.len();
        // cell -> (rows in cell, level -> (sum, count))
        let mut cells: BTreeMap<Vec<i64>, (usize, BTreeMap<i64, (f64, usize)>)> = BTreeMap::new();
        for r in 0..n {
            let key: Vec<i64> = adjust.iter().map(|&z| self.codes[z][r]).collect();
            let cell = cells.entry(key).or_default();
            cell.0 += 1;
            let acc = cell.1.entry(t[r]).or_default();
            acc.0 += y[r];
            acc.1 += 1;
        }
        let levels: BTreeSet<i64> = t.iter().copied().collect();
        levels
            .into_iter()
            .map(|level| {
                let (mut num, mut den) = (0.0, 0.0);
                for (count, by_level) in cells.values() {
                    if let Some(&(sum, k)) = by_level.get(&level) {
                        let w = *count as f64 / n as f64;
                        num += w * sum / k as f64;
                        den += w;
                    }
                }
                (level, num / den)
            })
            .collect()
    }

    /// Mean absolute difference of interventional means over unordered
    /// pairs of treatment levels.
    pub fn ace_with_adjustment(&self, treatment: usize, outcome: usize, adjust: &[usize]) -> (f64, usize) {
        let means: Vec<f64> = self.interventional_means(treatment, outcome, adjust).into_values().collect();
        (mean_pairwise_gap(&means), means.len())
    }

    /// Backdoor-adjusted ACE with the treatment's parents as adjustment set.
    pub fn ace_edge(&self, admg: &Admg, treatment: usize, outcome: usize) -> Result<AceEstimate, EffectsError> {
        let name = |i: usize| admg.name(i).to_string();
        let parents = admg.parents(treatment);
        let mut estimate = AceEstimate {
            treatment: name(treatment),
            outcome: name(outcome),
            value: 0.0,
            adjustment_set: parents.iter().map(|&p| name(p)).collect(),
            n_treatment_levels: self.codes[treatment].iter().collect::<BTreeSet<_>>().len(),
        };
        if treatment == outcome || !admg.reaches(treatment, outcome) {
            return Ok(estimate);
        }
        if !backdoor_admissible(admg, treatment, outcome, &parents) {
            return Err(EffectsError::UnidentifiableEffect { treatment: name(treatment), outcome: name(outcome) });
        }
        let (value, levels) = self.ace_with_adjustment(treatment, outcome, &parents);
        estimate.value = value;
        estimate.n_treatment_levels = levels;
        Ok(estimate)
    }
}

fn mean_pairwise_gap(means: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..means.len() {
        for j in (i + 1)..means.len() {
            total += (means[j] - means[i]).abs();
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}

/// Whether `adjust` blocks every backdoor path from `treatment` to `outcome`:
/// m-separation once the treatment's outgoing edges are removed.
pub fn backdoor_admissible(admg: &Admg, treatment: usize, outcome: usize, adjust: &[usize]) -> bool {
    let descendants = admg.descendants(treatment);
    if adjust.iter().any(|z| descendants.contains(z)) {
        return false;
    }
    let mut cut = admg.clone();
    for c in admg.children(treatment) {
        cut.remove_directed(treatment, c);
    }
    cut.m_separated(&[treatment], &[outcome], adjust)
}

/// Backdoor ACE of `treatment` on `outcome` with default binning.
pub fn ace_edge(ds: &Dataset, admg: &Admg, treatment: &str, outcome: &str) -> Result<AceEstimate, EffectsError> {
    check_vertices(ds, admg)?;
    let est = AceEstimator::new(ds, DEFAULT_ACE_BINS)?;
    est.ace_edge(admg, admg.require(treatment)?, admg.require(outcome)?)
}

/// Mean edge-ACE magnitude along a path.
pub fn path_ace(edge_aces: &[f64]) -> f64 {
    if edge_aces.is_empty() {
        0.0
    } else {
        edge_aces.iter().map(|a| a.abs()).sum::<f64>() / edge_aces.len() as f64
    }
}

fn check_vertices(ds: &Dataset, admg: &Admg) -> Result<(), EffectsError> {
    let same = ds.n_vars() == admg.n() && ds.variables().iter().zip(admg.vertices()).all(|(a, b)| a.name == b.name);
    if same {
        Ok(())
    } else {
        Err(EffectsError::VertexMismatch)
    }
}

/// Maximal simple paths ending at `objective`, found by walking back over
/// parents and bidirected neighbours. Walks stop at options or at vertices
/// with nothing left to visit; only walks that stop at an option are kept.
/// Interior vertices are metrics.
pub fn extract_paths(admg: &Admg, objective: &str) -> Result<Vec<CausalPath>, EffectsError> {
    let obj = admg.require(objective)?;
    if admg.role(obj) != Role::PerformanceObjective {
        return Err(EffectsError::NotAnObjective(objective.into()));
    }
    let mut out = Vec::new();
    let mut discarded = 0usize;
    let mut stack = vec![obj];
    let mut on_path = vec![false; admg.n()];
    on_path[obj] = true;
    walk_back(admg, &mut stack, &mut on_path, &mut out, &mut discarded);
    if discarded > 0 {
        info!("{objective}: discarded {discarded} paths not starting at an option");
    }
    out.sort();
    if out.is_empty() {
        return Err(EffectsError::NoPathsFound(objective.into()));
    }
    Ok(out
        .into_iter()
        .map(|idx: Vec<usize>| CausalPath {
            vertices: idx.iter().map(|&i| admg.name(i).to_string()).collect(),
            objective: objective.into(),
            path_ace: 0.0,
            edge_aces: Vec::new(),
        })
        .collect())
}

fn walk_back(
    admg: &Admg,
    stack: &mut Vec<usize>,
    on_path: &mut [bool],
    out: &mut Vec<Vec<usize>>,
    discarded: &mut usize,
) {
    let cur = *stack.last().unwrap();
    let origin_here = |stack: &Vec<usize>| stack.iter().rev().copied().collect::<Vec<_>>();
    if stack.len() > 1 && admg.role(cur) == Role::ManipulableOption {
        out.push(origin_here(stack));
        return;
    }
    let preds: BTreeSet<usize> = admg
        .parents(cur)
        .into_iter()
        .chain(admg.spouses(cur))
        .filter(|&p| !on_path[p] && admg.role(p) != Role::PerformanceObjective)
        .collect();
    if preds.is_empty() {
        if stack.len() > 1 {
            *discarded += 1;
        }
        return;
    }
    for p in preds {
        stack.push(p);
        on_path[p] = true;
        walk_back(admg, stack, on_path, out, discarded);
        on_path[p] = false;
        stack.pop();
    }
}

/// Ranks the paths into each objective and keeps the top `top_k`.
pub fn cpwe(
    ds: &Dataset,
    admg: &Admg,
    objectives: &[&str],
    top_k: usize,
) -> Result<BTreeMap<String, Result<Diagnosis, EffectsError>>, EffectsError> {
    check_vertices(ds, admg)?;
    if top_k == 0 {
        return Err(EffectsError::ZeroTopK);
    }
    let est = AceEstimator::new(ds, DEFAULT_ACE_BINS)?;
    let cache = EdgeCache::default();
    let results: Vec<(String, Result<Diagnosis, EffectsError>)> = objectives
        .par_iter()
        .map(|&o| (o.to_string(), rank_objective(&est, admg, o, top_k, &cache)))
        .collect();
    Ok(results.into_iter().collect())
}

/// Ranked diagnosis of a single faulty objective.
pub fn diagnose(ds: &Dataset, admg: &Admg, fault: &str, top_k: usize) -> Result<Diagnosis, EffectsError> {
    check_vertices(ds, admg)?;
    if top_k == 0 {
        return Err(EffectsError::ZeroTopK);
    }
    let est = AceEstimator::new(ds, DEFAULT_ACE_BINS)?;
    rank_objective(&est, admg, fault, top_k, &EdgeCache::default())
}

#[derive(Default)]
struct EdgeCache(Mutex<HashMap<(usize, usize), f64>>);

impl EdgeCache {
    fn edge_ace(&self, est: &AceEstimator, admg: &Admg, from: usize, to: usize) -> f64 {
        if let Some(&v) = self.0.lock().unwrap().get(&(from, to)) {
            return v;
        }
        let value = if admg.has_directed(from, to) {
            match est.ace_edge(admg, from, to) {
                Ok(a) => a.value,
                Err(e) => {
                    warn!("{e}; counting the edge as 0");
                    0.0
                }
            }
        } else {
            warn!("{} <-> {} carries no identified effect; counting it as 0", admg.name(from), admg.name(to));
            0.0
        };
        self.0.lock().unwrap().insert((from, to), value);
        value
    }
}

fn rank_objective(
    est: &AceEstimator,
    admg: &Admg,
    objective: &str,
    top_k: usize,
    cache: &EdgeCache,
) -> Result<Diagnosis, EffectsError> {
    let mut paths = extract_paths(admg, objective)?;
    for p in &mut paths {
        let idx: Vec<usize> = p.vertices.iter().map(|v| admg.index_of(v).unwrap()).collect();
        p.edge_aces = idx.windows(2).map(|w| cache.edge_ace(est, admg, w[0], w[1])).collect();
        p.path_ace = path_ace(&p.edge_aces);
    }
    paths.sort_by(|a, b| b.path_ace.total_cmp(&a.path_ace).then_with(|| a.vertices.cmp(&b.vertices)));
    paths.truncate(top_k);
    let mut root_causes: Vec<String> = Vec::new();
    for p in &paths {
        if !root_causes.contains(&p.vertices[0]) {
            root_causes.push(p.vertices[0].clone());
        }
    }
    let obj = admg.require(objective)?;
    let root_cause_effects = root_causes
        .iter()
        .map(|c| {
            let t = admg.index_of(c).unwrap();
            let value = match est.ace_edge(admg, t, obj) {
                Ok(a) => a.value,
                Err(e) => {
                    warn!("{e}; reporting 0");
                    0.0
                }
            };
            (c.clone(), value)
        })
        .collect();
    Ok(Diagnosis { objective: objective.into(), ranked_paths: paths, root_causes, root_cause_effects })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::VariableMeta;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn admg(spec: &[(&str, Role)], directed: &[(usize, usize)], bidirected: &[(usize, usize)]) -> Admg {
        let vars = spec.iter().map(|(n, r)| VariableMeta::new(*n, *r, Kind::Continuous)).collect();
        let mut g = Admg::new(vars);
        for &(a, b) in directed {
            g.add_directed(a, b);
        }
        for &(a, b) in bidirected {
            g.add_bidirected(a, b);
        }
        g
    }

    use Role::{ManipulableOption as O, NonManipulableMetric as M, PerformanceObjective as Y};

    #[test]
    fn chain_has_one_path() {
        let g = admg(&[("o", O), ("m", M), ("y", Y)], &[(0, 1), (1, 2)], &[]);
        let paths = extract_paths(&g, "y").unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].vertices, vec!["o", "m", "y"]);
    }

    #[test]
    fn diamond_has_two_paths() {
        let g = admg(&[("o", O), ("m1", M), ("m2", M), ("y", Y)], &[(0, 1), (0, 2), (1, 3), (2, 3)], &[]);
        let paths = extract_paths(&g, "y").unwrap();
        assert_eq!(paths.len(), 2);
        assert!(paths.iter().all(|p| p.vertices[0] == "o" && p.vertices.len() == 3));
    }

    #[test]
    fn paths_cross_bidirected_edges_and_drop_metric_origins() {
        // o -> m1 <-> m2 -> y, and a parentless metric m3 -> y
        let g = admg(&[("o", O), ("m1", M), ("m2", M), ("m3", M), ("y", Y)], &[(0, 1), (2, 4), (3, 4)], &[(1, 2)]);
        let paths = extract_paths(&g, "y").unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].vertices, vec!["o", "m1", "m2", "y"]);
    }

    #[test]
    fn disconnected_objective_has_no_paths() {
        let g = admg(&[("o", O), ("y", Y)], &[], &[]);
        assert!(matches!(extract_paths(&g, "y"), Err(EffectsError::NoPathsFound(_))));
        assert!(matches!(extract_paths(&g, "o"), Err(EffectsError::NotAnObjective(_))));
    }

    #[test]
    fn path_ace_is_mean_magnitude() {
        assert_eq!(path_ace(&[0.0, 0.0]), 0.0);
        assert_eq!(path_ace(&[2.0, 1.0]), 1.5);
        assert_eq!(path_ace(&[-2.0, 1.0]), 1.5);
    }

    fn discrete_ds(names: &[(&str, Role, Kind)], cols: Vec<Vec<f64>>) -> Dataset {
        let vars = names.iter().map(|(n, r, k)| VariableMeta::new(*n, *r, *k)).collect();
        Dataset::new(vars, cols).unwrap()
    }

    #[test]
    fn constant_outcome_has_zero_effect() {
        let ds = discrete_ds(
            &[("o", O, Kind::Discrete), ("y", Y, Kind::Continuous)],
            vec![vec![0.0, 1.0, 2.0, 0.0, 1.0, 2.0], vec![3.0; 6]],
        );
        let g = admg(&[("o", O), ("y", Y)], &[(0, 1)], &[]);
        assert_eq!(ace_edge(&ds, &g, "o", "y").unwrap().value, 0.0);
    }

    #[test]
    fn linear_binary_effect() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let o: Vec<f64> = (0..10_000).map(|i| (i % 2) as f64).collect();
        let y: Vec<f64> = o.iter().map(|o| 2.0 * o + noise.sample(&mut rng)).collect();
        let ds = discrete_ds(&[("o", O, Kind::Discrete), ("y", Y, Kind::Continuous)], vec![o, y]);
        let g = admg(&[("o", O), ("y", Y)], &[(0, 1)], &[]);
        let a = ace_edge(&ds, &g, "o", "y").unwrap();
        assert!((a.value - 2.0).abs() < 0.1, "{}", a.value);
        assert_eq!(a.n_treatment_levels, 2);
    }

    #[test]
    fn adjustment_removes_confounding() {
        // z -> o, z -> y, o -> y
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let n = 10_000;
        let mut cols = vec![Vec::new(), Vec::new(), Vec::new()];
        for i in 0..n {
            let z = (i % 2) as f64;
            let o = if rand::Rng::random::<f64>(&mut rng) < 0.2 + 0.6 * z { 1.0 } else { 0.0 };
            let y = o + 2.0 * z + noise.sample(&mut rng);
            cols[0].push(z);
            cols[1].push(o);
            cols[2].push(y);
        }
        let ds = discrete_ds(&[("z", M, Kind::Discrete), ("o", M, Kind::Discrete), ("y", Y, Kind::Continuous)], cols);
        let g = admg(&[("z", M), ("o", M), ("y", Y)], &[(0, 1), (0, 2), (1, 2)], &[]);
        let est = AceEstimator::new(&ds, 5).unwrap();
        let (naive, _) = est.ace_with_adjustment(1, 2, &[]);
        let adjusted = ace_edge(&ds, &g, "o", "y").unwrap();
        assert!((naive - 1.0).abs() > 0.3);
        assert!((adjusted.value - 1.0).abs() < 0.1, "{}", adjusted.value);
        assert_eq!(adjusted.adjustment_set, vec!["z"]);
    }

    #[test]
    fn bidirected_treatment_is_unidentifiable() {
        let ds = discrete_ds(
            &[("m", M, Kind::Discrete), ("y", Y, Kind::Continuous)],
            vec![vec![0.0, 1.0, 0.0, 1.0], vec![0.0, 1.0, 0.5, 1.5]],
        );
        let g = admg(&[("m", M), ("y", Y)], &[(0, 1)], &[(0, 1)]);
        assert!(matches!(ace_edge(&ds, &g, "m", "y"), Err(EffectsError::UnidentifiableEffect { .. })));
    }

    #[test]
    fn top_k_keeps_strongest_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let n = 4000;
        let a: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let b: Vec<f64> = (0..n).map(|i| ((i / 2) % 2) as f64).collect();
        let y: Vec<f64> = (0..n).map(|i| 3.0 * a[i] + 1.0 * b[i] + noise.sample(&mut rng)).collect();
        let ds = discrete_ds(&[("a", O, Kind::Discrete), ("b", O, Kind::Discrete), ("y", Y, Kind::Continuous)], vec![a, b, y]);
        let g = admg(&[("a", O), ("b", O), ("y", Y)], &[(0, 2), (1, 2)], &[]);
        let d = diagnose(&ds, &g, "y", 1).unwrap();
        assert_eq!(d.ranked_paths.len(), 1);
        assert_eq!(d.root_causes, vec!["a"]);
        let all = cpwe(&ds, &g, &["y"], 4).unwrap();
        let d = all["y"].as_ref().unwrap();
        assert_eq!(d.root_causes, vec!["a", "b"]);
        assert!(d.ranked_paths[0].path_ace > d.ranked_paths[1].path_ace);
    }
}
