use std::collections::{BTreeMap, BTreeSet};

use log::info;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scm::{generate_scm, HiddenConfounder, Mechanism, Scm, ScmConfig, HIDDEN_LOADING};
use super::truth::{curate_ground_truth, evaluate_prediction, EvalReport, GroundTruth, Prediction};
use super::SynthError;
use crate::cbi::{cbi_rank, cbi_root_causes};
use crate::dataset::{Dataset, Domain, Kind, Role, VariableMeta};
use crate::effects::{diagnose, AceEstimator, EffectsError, DEFAULT_ACE_BINS};
use crate::model::{learn, update_model, LearnConfig};

/// Stream-splitting for derived seeds.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ index.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub seed: u64,
    /// Each instance contributes one continuous and one pass/fail fault.
    pub instances: usize,
    pub samples: usize,
    pub n_options: usize,
    pub n_metrics: usize,
    pub density: f64,
    pub noise_scale: f64,
    pub option_levels: usize,
    /// Root-cause options paired with a non-cause through a hidden confounder.
    pub hidden_pairs: usize,
    pub min_roots: usize,
    pub max_roots: usize,
    pub top_k: usize,
    pub ci_level: f64,
    pub learn: LearnConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            seed: 0,
            instances: 10,
            samples: 2000,
            n_options: 10,
            n_metrics: 8,
            density: 0.2,
            noise_scale: 1.0,
            option_levels: 3,
            hidden_pairs: 4,
            min_roots: 2,
            max_roots: 4,
            top_k: 4,
            ci_level: 0.95,
            learn: LearnConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchInstance {
    pub scm: Scm,
    pub truth: GroundTruth,
    #[serde(skip)]
    pub data: Option<Dataset>,
}

const MAX_ATTEMPTS: u64 = 10_000;

/// One benchmark system: a random model whose two objectives each have an
/// admissible number of root causes, with hidden confounders tying some root
/// causes to options that do not matter.
pub fn build_instance(cfg: &BenchConfig, index: usize) -> Result<BenchInstance, SynthError> {
    for attempt in 0..MAX_ATTEMPTS {
        let seed = derive_seed(cfg.seed, index as u64, attempt);
        let mut sc = ScmConfig::new(cfg.n_options, cfg.n_metrics, 2, cfg.density, cfg.noise_scale, seed);
        sc.boolean_objectives = true;
        sc.option_levels = Some(cfg.option_levels);
        let scm = generate_scm(&sc)?;
        let roots: Vec<BTreeSet<String>> =
            ["y0", "y1"].iter().map(|y| scm.true_root_causes(y)).collect::<Result<_, _>>()?;
        if roots.iter().any(|r| r.len() < cfg.min_roots || r.len() > cfg.max_roots) {
            continue;
        }
        let scm = confound_pairs(scm, &roots, cfg.hidden_pairs, seed)?;
        let data = scm.sample_with_seed(cfg.samples, derive_seed(seed, 1, 0));
        let truth = curate_ground_truth(&scm, &data, 2)?;
        return Ok(BenchInstance { scm, truth, data: Some(data) });
    }
    Err(SynthError::BadConfig("no model with the requested root-cause counts".into()))
}

fn confound_pairs(scm: Scm, roots: &[BTreeSet<String>], pairs: usize, seed: u64) -> Result<Scm, SynthError> {
    let any_root: BTreeSet<&String> = roots.iter().flatten().collect();
    let options = scm.names_with_role(Role::ManipulableOption);
    let mut causes: Vec<&String> = options.iter().filter(|o| any_root.contains(o)).collect();
    let mut bystanders: Vec<&String> = options.iter().filter(|o| !any_root.contains(o)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2, 0));
    causes.shuffle(&mut rng);
    bystanders.shuffle(&mut rng);
    let hidden: Vec<HiddenConfounder> = causes
        .iter()
        .zip(&bystanders)
        .take(pairs)
        .enumerate()
        .map(|(h, (c, b))| HiddenConfounder {
            name: format!("h{h}"),
            loadings: BTreeMap::from([((*c).clone(), HIDDEN_LOADING), ((*b).clone(), HIDDEN_LOADING)]),
        })
        .collect();
    Scm::from_parts(scm.variables, scm.mechanisms, hidden, scm.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultResult {
    pub instance: usize,
    pub objective: String,
    pub true_root_causes: Vec<String>,
    pub care_root_causes: Vec<String>,
    pub cbi_root_causes: Vec<String>,
    pub care: EvalReport,
    pub cbi: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub seed: u64,
    pub faults: Vec<FaultResult>,
    pub care: EvalReport,
    pub cbi: EvalReport,
}

/// Runs the causal diagnosis and the CBI baseline on every fault of one
/// instance.
pub fn evaluate_instance(inst: &BenchInstance, index: usize, cfg: &BenchConfig) -> Result<Vec<FaultResult>, SynthError> {
    let data = inst.data.as_ref().ok_or_else(|| SynthError::BadConfig("instance carries no data".into()))?;
    let model = learn(data, &cfg.learn)?;
    let est = AceEstimator::new(data, DEFAULT_ACE_BINS)?;
    let universe = inst.scm.names_with_role(Role::ManipulableOption);
    inst.truth
        .faults
        .iter()
        .map(|fault| {
            let care = match diagnose(data, &model.admg, &fault.objective, cfg.top_k) {
                Ok(d) => Prediction::from(&d),
                Err(EffectsError::NoPathsFound(_)) => {
                    Prediction { objective: fault.objective.clone(), root_causes: Vec::new(), effects: BTreeMap::new() }
                }
                Err(e) => return Err(e.into()),
            };
            let labels = fault.labels(data.sample_count());
            let ranked = cbi_rank(data, &labels, cfg.ci_level, cfg.learn.bins)?;
            let cbi_causes = cbi_root_causes(&ranked, cfg.top_k);
            let y = data.index_of(&fault.objective).expect("objective column");
            let effects = cbi_causes
                .iter()
                .map(|c| (c.clone(), est.ace_with_adjustment(data.index_of(c).expect("option column"), y, &[]).0))
                .collect();
            let cbi = Prediction { objective: fault.objective.clone(), root_causes: cbi_causes, effects };
            Ok(FaultResult {
                instance: index,
                objective: fault.objective.clone(),
                true_root_causes: fault.true_root_causes.iter().cloned().collect(),
                care: evaluate_prediction(&care, fault, &universe)?,
                cbi: evaluate_prediction(&cbi, fault, &universe)?,
                care_root_causes: care.root_causes,
                cbi_root_causes: cbi.root_causes,
            })
        })
        .collect()
}

/// Builds `cfg.instances` systems and scores both methods on all faults.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport, SynthError> {
    let per_instance: Vec<Vec<FaultResult>> = (0..cfg.instances)
        .into_par_iter()
        .map(|i| {
            let inst = build_instance(cfg, i)?;
            evaluate_instance(&inst, i, cfg)
        })
        .collect::<Result<_, SynthError>>()?;
    let faults: Vec<FaultResult> = per_instance.into_iter().flatten().collect();
    let care = EvalReport::aggregate(&faults.iter().map(|f| f.care.clone()).collect::<Vec<_>>());
    let cbi = EvalReport::aggregate(&faults.iter().map(|f| f.cbi.clone()).collect::<Vec<_>>());
    info!("benchmark seed {}: causal f1 {:.3}, cbi f1 {:.3}", cfg.seed, care.f1, cbi.f1);
    Ok(BenchReport { seed: cfg.seed, faults, care, cbi })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierConfig {
    pub seed: u64,
    pub tiers: usize,
    pub per_tier: usize,
    /// Effect strength of each tier, strongest first.
    pub strengths: Vec<f64>,
    pub samples: usize,
    pub perturb_samples: usize,
    pub learn: LearnConfig,
}

impl Default for TierConfig {
    fn default() -> Self {
        TierConfig {
            seed: 0,
            tiers: 3,
            per_tier: 3,
            strengths: vec![2.0, 1.0, 0.3],
            samples: 2000,
            perturb_samples: 5000,
            learn: LearnConfig::default(),
        }
    }
}

/// Options `o*` each driving their own metric `m*`, which feeds the single
/// objective `y` with a tier-dependent weight. Tier membership is shuffled.
pub fn tiered_scm(cfg: &TierConfig) -> Result<Scm, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.tiers * cfg.per_tier;
    let mut tier_of: Vec<usize> = (0..n).map(|i| i / cfg.per_tier).collect();
    tier_of.shuffle(&mut rng);
    let mut variables = Vec::new();
    let mut mechanisms = Vec::new();
    for i in 0..n {
        let mut v = VariableMeta::new(format!("o{i}"), Role::ManipulableOption, Kind::Discrete);
        v.domain = Some(Domain::Range { min: 0.0, max: 2.0, unit: None });
        variables.push(v);
        mechanisms.push(Mechanism::Categorical { levels: 3 });
    }
    let mut y_weights = BTreeMap::new();
    for i in 0..n {
        let w = rng.random_range(0.8..1.2);
        variables.push(VariableMeta::new(format!("m{i}"), Role::NonManipulableMetric, Kind::Continuous));
        mechanisms.push(Mechanism::Linear { intercept: 0.0, weights: BTreeMap::from([(format!("o{i}"), w)]), noise_sd: 1.0 });
        let s = cfg.strengths[tier_of[i]] * rng.random_range(0.9..1.1);
        y_weights.insert(format!("m{i}"), if rng.random_bool(0.5) { s } else { -s });
    }
    variables.push(VariableMeta::new("y", Role::PerformanceObjective, Kind::Continuous));
    mechanisms.push(Mechanism::Linear { intercept: 0.0, weights: y_weights, noise_sd: 1.0 });
    Scm::from_parts(variables, mechanisms, Vec::new(), cfg.seed)
}

/// Variance of `objective` when only the options of one rank tier vary and
/// all other options sit at `baseline`. `ranking` is split into `tiers`
/// consecutive groups.
pub fn variance_by_rank(
    scm: &Scm,
    objective: &str,
    ranking: &[String],
    tiers: usize,
    baseline: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>, SynthError> {
    let y = scm.require(objective)?;
    let size = ranking.len().div_ceil(tiers.max(1));
    ranking
        .chunks(size.max(1))
        .map(|tier| {
            let assignments: BTreeMap<String, f64> = ranking
                .iter()
                .filter(|o| !tier.contains(o))
                .map(|o| (o.clone(), baseline))
                .collect();
            let ds = scm.intervene_with_seed(&assignments, n, seed)?;
            let col = ds.column(y);
            let mean = col.iter().sum::<f64>() / n as f64;
            Ok(col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierReport {
    pub ranking: Vec<String>,
    pub variances: Vec<f64>,
}

/// Learns the tiered system, ranks its options by diagnosis and measures the
/// objective variance each rank tier induces.
pub fn tier_experiment(cfg: &TierConfig) -> Result<TierReport, SynthError> {
    let scm = tiered_scm(cfg)?;
    let data = scm.sample_with_seed(cfg.samples, derive_seed(cfg.seed, 3, 0));
    let model = learn(&data, &cfg.learn)?;
    let mut ranking = match diagnose(&data, &model.admg, "y", usize::MAX) {
        Ok(d) => d.root_causes,
        Err(EffectsError::NoPathsFound(_)) => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    for o in scm.names_with_role(Role::ManipulableOption) {
        if !ranking.contains(&o) {
            ranking.push(o);
        }
    }
    let variances = variance_by_rank(&scm, "y", &ranking, cfg.tiers, 1.0, cfg.perturb_samples, derive_seed(cfg.seed, 4, 0))?;
    Ok(TierReport { ranking, variances })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    pub seed: u64,
    pub n_options: usize,
    pub n_metrics: usize,
    pub density: f64,
    pub source_samples: usize,
    pub batch_samples: usize,
    pub batches: usize,
    /// Factor applied to one weight into the objective.
    pub scale: f64,
    pub learn: LearnConfig,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            seed: 0,
            n_options: 4,
            n_metrics: 3,
            density: 0.3,
            source_samples: 2000,
            batch_samples: 500,
            batches: 5,
            scale: 0.3,
            learn: LearnConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsePoint {
    pub target_samples: usize,
    pub rmse: f64,
}

/// A source model and a copy with one metric-to-objective weight rescaled.
pub fn shifted_pair(cfg: &TransferConfig) -> Result<(Scm, Scm), SynthError> {
    for attempt in 0..MAX_ATTEMPTS {
        let seed = derive_seed(cfg.seed, 5, attempt);
        let source = generate_scm(&ScmConfig::new(cfg.n_options, cfg.n_metrics, 1, cfg.density, 1.0, seed))?;
        let y = source.require("y0")?;
        // shift an edge that carries option influence into the objective
        let carrier = source.graph.parents(y).into_iter().find(|&m| {
            source
                .graph
                .ancestors(&[m])
                .iter()
                .any(|&a| source.variables[a].role == Role::ManipulableOption)
        });
        let Some(m) = carrier else { continue };
        let mut target = source.clone();
        let name = source.variables[m].name.clone();
        let w = source.mechanisms[y].weights().and_then(|w| w.get(&name)).copied().unwrap_or(0.0);
        target.set_weight(&name, "y0", w * cfg.scale)?;
        if target.true_root_causes("y0")?.is_empty() {
            continue;
        }
        return Ok((source, target));
    }
    Err(SynthError::BadConfig("no shiftable model found".into()))
}

/// Effect RMSE against the shifted model's oracle, before and after each
/// incremental update with a batch of shifted samples.
pub fn transfer_series(cfg: &TransferConfig) -> Result<Vec<RmsePoint>, SynthError> {
    let (source, target) = shifted_pair(cfg)?;
    let roots = target.true_root_causes("y0")?;
    let oracle: BTreeMap<String, f64> = roots
        .iter()
        .map(|c| Ok((c.clone(), target.oracle_ace(c, "y0", super::truth::ORACLE_SAMPLES, derive_seed(cfg.seed, 6, 0))?)))
        .collect::<Result<_, SynthError>>()?;
    let mut data = source.sample_with_seed(cfg.source_samples, derive_seed(cfg.seed, 7, 0));
    let mut model = learn(&data, &cfg.learn)?;
    let rmse = |data: &Dataset, admg: &crate::graph::Admg| -> Result<f64, SynthError> {
        let est = AceEstimator::new(data, DEFAULT_ACE_BINS)?;
        let y = admg.require("y0")?;
        let sq: f64 = oracle
            .iter()
            .map(|(c, truth)| {
                let t = admg.index_of(c).expect("option vertex");
                let got = est.ace_edge(admg, t, y).map(|a| a.value).unwrap_or(0.0);
                (got - truth).powi(2)
            })
            .sum();
        Ok((sq / oracle.len() as f64).sqrt())
    };
    let mut series = vec![RmsePoint { target_samples: 0, rmse: rmse(&data, &model.admg)? }];
    for b in 1..=cfg.batches {
        let batch = target.sample_with_seed(cfg.batch_samples, derive_seed(cfg.seed, 8, b as u64));
        model = update_model(&model, &data, &batch, &cfg.learn)?;
        data = data.concat(&batch)?;
        series.push(RmsePoint { target_samples: b * cfg.batch_samples, rmse: rmse(&data, &model.admg)? });
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_have_bounded_root_counts() {
        let cfg = BenchConfig { seed: 3, ..BenchConfig::default() };
        let inst = build_instance(&cfg, 0).unwrap();
        assert_eq!(inst.truth.faults.len(), 2);
        for f in &inst.truth.faults {
            assert!((2..=4).contains(&f.true_root_causes.len()));
            assert!(!f.fault_rows.is_empty());
        }
        assert_eq!(inst.scm.graph.bidirected().len(), cfg.hidden_pairs);
    }

    #[test]
    fn derived_seeds_differ() {
        let a: BTreeSet<u64> = (0..100).map(|i| derive_seed(1, 0, i)).collect();
        assert_eq!(a.len(), 100);
        assert_eq!(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
    }

    #[test]
    fn tiered_model_has_three_strength_groups() {
        let scm = tiered_scm(&TierConfig::default()).unwrap();
        let w = scm.mechanisms.last().unwrap().weights().unwrap();
        let mut mags: Vec<f64> = w.values().map(|x| x.abs()).collect();
        mags.sort_by(f64::total_cmp);
        assert!(mags[2] < 0.5 && mags[3] > 0.8 && mags[5] < 1.2 && mags[6] > 1.7);
    }
}
