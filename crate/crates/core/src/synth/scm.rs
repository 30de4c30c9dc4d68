use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::dataset::{Dataset, Domain, Kind, Role, VariableMeta};
use crate::graph::Admg;
use crate::stats::normal;

/// Structural equation of one vertex. Every vertex draws one standard-normal
/// noise term per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Mechanism {
    /// Root option with uniformly distributed levels `0..levels`: the level
    /// counts the standard-normal quantile cuts below a latent score built
    /// from hidden loadings plus noise.
    Categorical { levels: usize },
    /// `intercept + sum(weight * parent) + noise_sd * noise`.
    Linear { intercept: f64, weights: BTreeMap<String, f64>, noise_sd: f64 },
    /// 1 when the linear score stays at or below `cut`, else 0.
    Threshold { intercept: f64, weights: BTreeMap<String, f64>, noise_sd: f64, cut: f64 },
}

impl Mechanism {
    pub fn weights(&self) -> Option<&BTreeMap<String, f64>> {
        match self {
            Mechanism::Categorical { .. } => None,
            Mechanism::Linear { weights, .. } | Mechanism::Threshold { weights, .. } => Some(weights),
        }
    }

    fn weights_mut(&mut self) -> Option<&mut BTreeMap<String, f64>> {
        match self {
            Mechanism::Categorical { .. } => None,
            Mechanism::Linear { weights, .. } | Mechanism::Threshold { weights, .. } => Some(weights),
        }
    }
}

/// Unobserved standard-normal cause shared by its loaded vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenConfounder {
    pub name: String,
    pub loadings: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scm {
    pub variables: Vec<VariableMeta>,
    /// Directed edges of the mechanisms, plus a bidirected edge for every
    /// pair sharing a hidden confounder.
    pub graph: Admg,
    pub mechanisms: Vec<Mechanism>,
    pub hidden: Vec<HiddenConfounder>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmConfig {
    pub n_options: usize,
    pub n_metrics: usize,
    pub n_objectives: usize,
    pub density: f64,
    pub noise_scale: f64,
    pub seed: u64,
    /// Levels of categorical options; `None` makes options standard normal.
    pub option_levels: Option<usize>,
    /// Odd-numbered objectives become pass/fail thresholds.
    pub boolean_objectives: bool,
    /// Disjoint option pairs tied by a hidden confounder.
    pub hidden_confounders: usize,
}

impl ScmConfig {
    pub fn new(n_options: usize, n_metrics: usize, n_objectives: usize, density: f64, noise_scale: f64, seed: u64) -> Self {
        ScmConfig {
            n_options,
            n_metrics,
            n_objectives,
            density,
            noise_scale,
            seed,
            option_levels: Some(3),
            boolean_objectives: false,
            hidden_confounders: 0,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.n_options == 0 || self.n_metrics == 0 || self.n_objectives == 0 {
            return Err(SynthError::BadConfig("every layer needs at least one variable".into()));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(SynthError::BadConfig(format!("density must lie in (0, 1], got {}", self.density)));
        }
        if self.noise_scale < 0.0 {
            return Err(SynthError::BadConfig("noise scale must be non-negative".into()));
        }
        if self.option_levels.is_some_and(|l| l < 2) {
            return Err(SynthError::BadConfig("options need at least two levels".into()));
        }
        Ok(())
    }
}

/// Loading used for each member of a confounded option pair.
pub const HIDDEN_LOADING: f64 = 0.7;
/// Fraction of runs failing a pass/fail objective.
pub const MISSION_FAILURE_RATE: f64 = 0.1;

fn weight(rng: &mut ChaCha8Rng) -> f64 {
    let magnitude = rng.random_range(0.5..1.5);
    if rng.random_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

/// Random three-layer model: options feed metrics, metrics feed later metrics
/// and objectives. Deterministic in `cfg.seed`.
pub fn generate_scm(cfg: &ScmConfig) -> Result<Scm, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut variables = Vec::new();
    let mut mechanisms = Vec::new();
    for i in 0..cfg.n_options {
        let name = format!("o{i}");
        match cfg.option_levels {
            Some(levels) => {
                let mut v = VariableMeta::new(name, Role::ManipulableOption, Kind::Discrete);
                v.domain = Some(Domain::Range { min: 0.0, max: (levels - 1) as f64, unit: None });
                variables.push(v);
                mechanisms.push(Mechanism::Categorical { levels });
            }
            None => {
                variables.push(VariableMeta::new(name, Role::ManipulableOption, Kind::Continuous));
                mechanisms.push(Mechanism::Linear { intercept: 0.0, weights: BTreeMap::new(), noise_sd: 1.0 });
            }
        }
    }
    for j in 0..cfg.n_metrics {
        let mut weights = BTreeMap::new();
        for i in 0..cfg.n_options {
            if rng.random_bool(cfg.density) {
                weights.insert(format!("o{i}"), weight(&mut rng));
            }
        }
        for k in 0..j {
            if rng.random_bool(cfg.density / 2.0) {
                weights.insert(format!("m{k}"), weight(&mut rng));
            }
        }
        variables.push(VariableMeta::new(format!("m{j}"), Role::NonManipulableMetric, Kind::Continuous));
        mechanisms.push(Mechanism::Linear { intercept: 0.0, weights, noise_sd: cfg.noise_scale });
    }
    let mut pass_fail = Vec::new();
    for y in 0..cfg.n_objectives {
        let mut weights = BTreeMap::new();
        for k in 0..cfg.n_metrics {
            if rng.random_bool(cfg.density) {
                weights.insert(format!("m{k}"), weight(&mut rng));
            }
        }
        if weights.is_empty() {
            let k = rng.random_range(0..cfg.n_metrics);
            weights.insert(format!("m{k}"), weight(&mut rng));
        }
        let boolean = cfg.boolean_objectives && y % 2 == 1;
        let kind = if boolean { Kind::Boolean } else { Kind::Continuous };
        variables.push(VariableMeta::new(format!("y{y}"), Role::PerformanceObjective, kind));
        if boolean {
            pass_fail.push(variables.len() - 1);
            mechanisms.push(Mechanism::Threshold { intercept: 0.0, weights, noise_sd: cfg.noise_scale, cut: f64::INFINITY });
        } else {
            mechanisms.push(Mechanism::Linear { intercept: 0.0, weights, noise_sd: cfg.noise_scale });
        }
    }
    let mut options: Vec<usize> = (0..cfg.n_options).collect();
    options.shuffle(&mut rng);
    let hidden = options
        .chunks_exact(2)
        .take(cfg.hidden_confounders)
        .enumerate()
        .map(|(h, pair)| HiddenConfounder {
            name: format!("h{h}"),
            loadings: pair.iter().map(|&o| (format!("o{o}"), HIDDEN_LOADING)).collect(),
        })
        .collect();
    let mut scm = Scm::from_parts(variables, mechanisms, hidden, cfg.seed)?;
    if !pass_fail.is_empty() {
        scm.calibrate_thresholds(&pass_fail, cfg.seed ^ 0x5eed_cafe);
    }
    Ok(scm)
}

/// Compiled index form used by the sampler.
struct Plan {
    order: Vec<usize>,
    parents: Vec<Vec<(usize, f64)>>,
    loadings: Vec<Vec<(usize, f64)>>,
}

impl Scm {
    /// Builds the graph from the mechanisms and hidden loadings, checking
    /// that every referenced name exists and the result is acyclic.
    pub fn from_parts(
        variables: Vec<VariableMeta>,
        mechanisms: Vec<Mechanism>,
        hidden: Vec<HiddenConfounder>,
        seed: u64,
    ) -> Result<Scm, SynthError> {
        if variables.len() != mechanisms.len() {
            return Err(SynthError::BadConfig("one mechanism per variable required".into()));
        }
        let mut graph = Admg::new(variables.clone());
        for (v, m) in mechanisms.iter().enumerate() {
            for parent in m.weights().into_iter().flat_map(BTreeMap::keys) {
                let p = graph.index_of(parent).ok_or_else(|| SynthError::UnknownVertex(parent.clone()))?;
                graph.add_directed(p, v);
            }
        }
        for h in &hidden {
            let members: Vec<usize> = h
                .loadings
                .keys()
                .map(|n| graph.index_of(n).ok_or_else(|| SynthError::UnknownVertex(n.clone())))
                .collect::<Result<_, _>>()?;
            for (i, &a) in members.iter().enumerate() {
                for &b in &members[i + 1..] {
                    graph.add_bidirected(a, b);
                }
            }
        }
        if !graph.is_acyclic() {
            return Err(SynthError::BadConfig("mechanisms form a cycle".into()));
        }
        Ok(Scm { variables, graph, mechanisms, hidden, seed })
    }

    /// Validates an imported SCM by rebuilding its graph.
    pub fn from_json(text: &str) -> Result<Scm, SynthError> {
        let raw: Scm = serde_json::from_str(text)?;
        let rebuilt = Scm::from_parts(raw.variables.clone(), raw.mechanisms.clone(), raw.hidden.clone(), raw.seed)?;
        if rebuilt.graph != raw.graph {
            return Err(SynthError::BadConfig("graph disagrees with the mechanisms".into()));
        }
        Ok(rebuilt)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn require(&self, name: &str) -> Result<usize, SynthError> {
        self.index_of(name).ok_or_else(|| SynthError::UnknownVertex(name.into()))
    }

    pub fn names_with_role(&self, role: Role) -> Vec<String> {
        self.variables.iter().filter(|v| v.role == role).map(|v| v.name.clone()).collect()
    }

    fn plan(&self) -> Plan {
        let index = |n: &String| self.index_of(n).expect("validated parent");
        let parents = self
            .mechanisms
            .iter()
            .map(|m| m.weights().into_iter().flatten().map(|(p, &w)| (index(p), w)).collect())
            .collect();
        let mut loadings = vec![Vec::new(); self.variables.len()];
        for (h, hc) in self.hidden.iter().enumerate() {
            for (name, &l) in &hc.loadings {
                loadings[index(name)].push((h, l));
            }
        }
        Plan { order: self.graph.topological_order().expect("acyclic"), parents, loadings }
    }

    /// Draws `n` rows with the given vertices held fixed. Noise is drawn for
    /// every vertex in the same order whatever the assignments, so runs with
    /// one seed share their exogenous terms. With `raw_scores`, pass/fail
    /// vertices report their score instead of the outcome.
    fn simulate(&self, n: usize, seed: u64, fixed: &[Option<f64>], raw_scores: bool) -> Vec<Vec<f64>> {
        let plan = self.plan();
        let nv = self.variables.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cols = vec![Vec::with_capacity(n); nv];
        let mut row = vec![0.0; nv];
        let mut h = vec![0.0; self.hidden.len()];
        let cuts: Vec<Vec<f64>> = self
            .mechanisms
            .iter()
            .map(|m| match m {
                Mechanism::Categorical { levels } => (1..*levels).map(|k| normal::quantile(k as f64 / *levels as f64)).collect(),
                _ => Vec::new(),
            })
            .collect();
        for _ in 0..n {
            for x in h.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
            for &v in &plan.order {
                let eps: f64 = rng.sample(StandardNormal);
                if let Some(value) = fixed[v] {
                    row[v] = value;
                    continue;
                }
                let hidden: f64 = plan.loadings[v].iter().map(|&(k, l)| l * h[k]).sum();
                let linear = |intercept: f64| intercept + plan.parents[v].iter().map(|&(p, w)| w * row[p]).sum::<f64>() + hidden;
                row[v] = match &self.mechanisms[v] {
                    Mechanism::Categorical { .. } => {
                        let spent: f64 = plan.loadings[v].iter().map(|&(_, l)| l * l).sum();
                        let score = hidden + (1.0 - spent).max(0.0).sqrt() * eps;
                        cuts[v].iter().filter(|&&c| c < score).count() as f64
                    }
                    Mechanism::Linear { intercept, noise_sd, .. } => linear(*intercept) + noise_sd * eps,
                    Mechanism::Threshold { intercept, noise_sd, cut, .. } => {
                        let score = linear(*intercept) + noise_sd * eps;
                        if raw_scores {
                            score
                        } else if score <= *cut {
                            1.0
                        } else {
                            0.0
                        }
                    }
                };
            }
            for (c, &x) in cols.iter_mut().zip(&row) {
                c.push(x);
            }
        }
        cols
    }

    fn calibrate_thresholds(&mut self, targets: &[usize], seed: u64) {
        let pilot = self.simulate(4000, seed, &vec![None; self.variables.len()], true);
        for &t in targets {
            let mut scores = pilot[t].clone();
            scores.sort_by(f64::total_cmp);
            let q = scores[((1.0 - MISSION_FAILURE_RATE) * scores.len() as f64) as usize - 1];
            if let Mechanism::Threshold { cut, .. } = &mut self.mechanisms[t] {
                *cut = q;
            }
        }
    }

    fn dataset(&self, cols: Vec<Vec<f64>>) -> Dataset {
        Dataset::new(self.variables.clone(), cols).expect("simulated columns match the schema")
    }

    /// `n` observational rows using the model's own seed.
    pub fn sample(&self, n: usize) -> Dataset {
        self.sample_with_seed(n, self.seed)
    }

    pub fn sample_with_seed(&self, n: usize, seed: u64) -> Dataset {
        self.dataset(self.simulate(n, seed, &vec![None; self.variables.len()], false))
    }

    /// Rows from the model with the assigned vertices replaced by constants.
    pub fn intervene(&self, assignments: &BTreeMap<String, f64>, n: usize) -> Result<Dataset, SynthError> {
        self.intervene_with_seed(assignments, n, self.seed)
    }

    pub fn intervene_with_seed(
        &self,
        assignments: &BTreeMap<String, f64>,
        n: usize,
        seed: u64,
    ) -> Result<Dataset, SynthError> {
        let mut fixed = vec![None; self.variables.len()];
        for (name, &value) in assignments {
            fixed[self.require(name)?] = Some(value);
        }
        Ok(self.dataset(self.simulate(n, seed, &fixed, false)))
    }

    /// Levels an oracle effect ranges over: the categories of a categorical
    /// vertex, `{0, 1}` otherwise.
    pub fn treatment_levels(&self, v: usize) -> Vec<f64> {
        match self.mechanisms[v] {
            Mechanism::Categorical { levels } => (0..levels).map(|l| l as f64).collect(),
            _ => vec![0.0, 1.0],
        }
    }

    /// Interventional means `E[outcome | do(treatment = level)]`, all levels
    /// sharing one seed.
    pub fn interventional_means(
        &self,
        treatment: &str,
        outcome: &str,
        levels: &[f64],
        n: usize,
        seed: u64,
    ) -> Result<Vec<f64>, SynthError> {
        let t = self.require(treatment)?;
        let o = self.require(outcome)?;
        levels
            .iter()
            .map(|&level| {
                let mut fixed = vec![None; self.variables.len()];
                fixed[t] = Some(level);
                let cols = self.simulate(n, seed, &fixed, false);
                Ok(cols[o].iter().sum::<f64>() / n as f64)
            })
            .collect()
    }

    /// Oracle average causal effect: mean absolute gap of interventional
    /// means over unordered level pairs.
    pub fn oracle_ace(&self, treatment: &str, outcome: &str, n: usize, seed: u64) -> Result<f64, SynthError> {
        let levels = self.treatment_levels(self.require(treatment)?);
        let means = self.interventional_means(treatment, outcome, &levels, n, seed)?;
        let mut total = 0.0;
        let mut pairs = 0;
        for i in 0..means.len() {
            for j in (i + 1)..means.len() {
                total += (means[j] - means[i]).abs();
                pairs += 1;
            }
        }
        Ok(if pairs == 0 { 0.0 } else { total / pairs as f64 })
    }

    /// Sum over directed paths of the product of edge weights, into the
    /// linear score of `outcome`.
    pub fn total_effect(&self, treatment: &str, outcome: &str) -> Result<f64, SynthError> {
        let t = self.require(treatment)?;
        let o = self.require(outcome)?;
        let plan = self.plan();
        let mut te = vec![0.0; self.variables.len()];
        te[t] = 1.0;
        for &v in &plan.order {
            if v != t {
                te[v] = plan.parents[v].iter().map(|&(p, w)| w * te[p]).sum();
            }
        }
        Ok(te[o])
    }

    /// Replaces the weight of `parent -> child`.
    pub fn set_weight(&mut self, parent: &str, child: &str, value: f64) -> Result<(), SynthError> {
        let c = self.require(child)?;
        self.require(parent)?;
        match self.mechanisms[c].weights_mut().and_then(|w| w.get_mut(parent)) {
            Some(w) => {
                *w = value;
                Ok(())
            }
            None => Err(SynthError::UnknownVertex(format!("{parent} -> {child}"))),
        }
    }

    /// Option ancestors of `objective` whose total effect is nonzero.
    pub fn true_root_causes(&self, objective: &str) -> Result<BTreeSet<String>, SynthError> {
        let o = self.require(objective)?;
        let ancestors = self.graph.ancestors(&[o]);
        let mut out = BTreeSet::new();
        for a in ancestors {
            if self.variables[a].role == Role::ManipulableOption {
                let name = &self.variables[a].name;
                if self.total_effect(name, objective)?.abs() > 1e-6 {
                    out.insert(name.clone());
                }
            }
        }
        Ok(out)
    }
}
