mod error;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::{ContextKind, ContextValue, ErrorKind};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::{Deserialize, Serialize};

use confcause::cbi::{cbi_rank, cbi_root_causes, CbiScore};
use confcause::dataset::{load_dataset, Dataset, Role};
use confcause::effects::{diagnose, AceEstimator, Diagnosis, DEFAULT_ACE_BINS};
use confcause::graph::Admg;
use confcause::model::{learn, LearnConfig};
use confcause::synth::{
    curate_ground_truth, evaluate_prediction, fault_rows, generate_scm, run_benchmark, transfer_series, BenchConfig,
    BenchReport, EvalReport, GroundTruth, Prediction, RmsePoint, ScmConfig, TransferConfig,
};

use error::CliError;

/// Confidence level of the CBI importance lower bound.
const CBI_CONFIDENCE: f64 = 0.95;

#[derive(Parser)]
#[command(name = "confcause", version, about = "Causal root-cause analysis of configuration performance faults")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a causal model and write pag.json, model.json and model.dot.
    Learn(LearnArgs),
    /// Rank causal paths into a faulty objective and name its root causes.
    Diagnose(DiagnoseArgs),
    /// Order every option by its influence on an objective.
    Rank(RankArgs),
    /// Run the synthetic benchmark for both methods.
    Bench(BenchArgs),
    /// Generate a synthetic system, its samples and its fault ground truth.
    Synth(SynthArgs),
    /// Score a diagnosis against ground truth.
    Eval(EvalArgs),
}

#[derive(Args)]
struct Inputs {
    /// Observation table (CSV with a header row).
    #[arg(long)]
    data: PathBuf,
    /// Roles file mapping each column to its role and kind.
    #[arg(long)]
    roles: PathBuf,
}

#[derive(Args)]
struct Learning {
    /// Significance level of the independence tests.
    #[arg(long, default_value_t = 0.05, value_parser = open_unit)]
    alpha: f64,
    /// Fraction of the smaller marginal entropy below which an edge is confounded.
    #[arg(long, default_value_t = 0.8, value_parser = half_open_unit)]
    theta_ratio: f64,
    /// Equal-frequency bins for continuous variables.
    #[arg(long, default_value_t = 5, value_parser = bin_count)]
    bins: usize,
    /// Largest conditioning set tried by the independence search.
    #[arg(long, default_value_t = 3)]
    max_cond_size: usize,
}

impl Learning {
    fn config(&self) -> LearnConfig {
        LearnConfig {
            alpha: self.alpha,
            theta_ratio: self.theta_ratio,
            bins: self.bins,
            max_cond_size: Some(self.max_cond_size),
            ..LearnConfig::default()
        }
    }
}

#[derive(Args)]
struct LearnArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[command(flatten)]
    learning: Learning,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Care,
    Cbi,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Learned model; defaults to `<out>/model.json`.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    objective: String,
    #[arg(long, value_enum, default_value_t = Method::Care)]
    method: Method,
    #[arg(long, default_value_t = 4, value_parser = positive)]
    top_k: usize,
    /// Bins for continuous predicates of the CBI baseline.
    #[arg(long, default_value_t = 5, value_parser = bin_count)]
    bins: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RankArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    objective: String,
    #[arg(long, value_enum, default_value_t = Method::Care)]
    method: Method,
    #[arg(long, default_value_t = 5, value_parser = bin_count)]
    bins: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Systems generated; each contributes one continuous and one pass/fail fault.
    #[arg(long, default_value_t = 10, value_parser = positive)]
    instances: usize,
    #[arg(long, default_value_t = 2000, value_parser = positive)]
    samples: usize,
    #[arg(long, default_value_t = 4, value_parser = positive)]
    top_k: usize,
    #[command(flatten)]
    learning: Learning,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2000, value_parser = positive)]
    samples: usize,
    #[arg(long, default_value_t = 10, value_parser = positive)]
    options: usize,
    #[arg(long, default_value_t = 8, value_parser = positive)]
    metrics: usize,
    #[arg(long, default_value_t = 2, value_parser = positive)]
    objectives: usize,
    #[arg(long, default_value_t = 0.2, value_parser = half_open_unit)]
    density: f64,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Levels of each option.
    #[arg(long, default_value_t = 3, value_parser = bin_count)]
    levels: usize,
    /// Option pairs sharing a hidden confounder.
    #[arg(long, default_value_t = 0)]
    hidden: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// A diagnosis.json written by `diagnose`.
    #[arg(long)]
    diagnosis: PathBuf,
    /// A truth.json written by `synth`.
    #[arg(long)]
    truth: PathBuf,
    /// Roles file naming the option universe.
    #[arg(long)]
    roles: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|e| format!("`{s}` is not a number: {e}"))
}

fn open_unit(s: &str) -> Result<f64, String> {
    let x = parse_f64(s)?;
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err(format!("{x} is outside (0, 1)"))
    }
}

fn half_open_unit(s: &str) -> Result<f64, String> {
    let x = parse_f64(s)?;
    if x > 0.0 && x <= 1.0 {
        Ok(x)
    } else {
        Err(format!("{x} is outside (0, 1]"))
    }
}

fn parse_usize(s: &str, min: usize) -> Result<usize, String> {
    let n = s.parse::<usize>().map_err(|e| format!("`{s}` is not a count: {e}"))?;
    if n >= min {
        Ok(n)
    } else {
        Err(format!("{n} is below the minimum of {min}"))
    }
}

fn positive(s: &str) -> Result<usize, String> {
    parse_usize(s, 1)
}

fn bin_count(s: &str) -> Result<usize, String> {
    parse_usize(s, 2)
}

fn open(path: &Path, key: &str) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display()), Some(key.into())))
}

fn load(inputs: &Inputs) -> Result<Dataset, CliError> {
    let ds = load_dataset(open(&inputs.data, "data")?, open(&inputs.roles, "roles")?)?;
    info!("loaded {} rows of {} variables", ds.sample_count(), ds.n_vars());
    Ok(ds)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, key: &str) -> Result<T, CliError> {
    serde_json::from_reader(open(path, key)?)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display()), Some(key.into())))
}

/// Writes through a temporary sibling and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::internal(format!("cannot write {}: {e}", path.display()));
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(fail)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(fail)?;
    fs::rename(&tmp, path).map_err(fail)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::internal(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn load_model(path: &Path, ds: &Dataset) -> Result<Admg, CliError> {
    let admg: Admg = read_json(path, "model")?;
    let same = admg.n() == ds.n_vars() && admg.vertices().iter().zip(ds.variables()).all(|(a, b)| a.name == b.name);
    if !same {
        return Err(CliError::input("model variables differ from the data columns", Some("model".into())));
    }
    Ok(admg)
}

fn cmd_learn(args: &LearnArgs) -> Result<serde_json::Value, CliError> {
    let ds = load(&args.inputs)?;
    let model = learn(&ds, &args.learning.config())?;
    write_json(&args.out.join("pag.json"), &model.pag)?;
    write_json(&args.out.join("model.json"), &model.admg)?;
    write_atomic(&args.out.join("model.dot"), model.admg.to_dot().as_bytes())?;
    Ok(serde_json::json!({
        "command": "learn",
        "variables": ds.n_vars(),
        "pag_edges": model.pag.edge_count(),
        "directed": model.admg.directed().len(),
        "bidirected": model.admg.bidirected().len(),
        "constraint_conflicts": model.conflicts.len(),
    }))
}

#[derive(Serialize)]
struct CareReport<'a> {
    method: Method,
    #[serde(flatten)]
    diagnosis: &'a Diagnosis,
}

#[derive(Serialize)]
struct CbiReport {
    method: Method,
    objective: String,
    scores: Vec<CbiScore>,
    root_causes: Vec<String>,
    /// Difference-in-means effect of each reported option.
    root_cause_effects: BTreeMap<String, f64>,
}

fn require_objective(ds: &Dataset, objective: &str) -> Result<usize, CliError> {
    let i = ds
        .index_of(objective)
        .ok_or_else(|| CliError::input(format!("unknown variable `{objective}`"), Some(objective.into())))?;
    if ds.meta(i).role != Role::PerformanceObjective {
        return Err(CliError::input(format!("`{objective}` is not a performance objective"), Some(objective.into())));
    }
    Ok(i)
}

fn cbi_report(ds: &Dataset, objective: &str, bins: usize, top_k: usize) -> Result<CbiReport, CliError> {
    let y = require_objective(ds, objective)?;
    let rows = fault_rows(ds, objective)?;
    let mut labels = vec![false; ds.sample_count()];
    for r in rows {
        labels[r] = true;
    }
    let mut scores = cbi_rank(ds, &labels, CBI_CONFIDENCE, bins)?;
    let root_causes = cbi_root_causes(&scores, top_k);
    scores.truncate(top_k);
    let est = AceEstimator::new(ds, DEFAULT_ACE_BINS)?;
    let root_cause_effects = root_causes
        .iter()
        .map(|c| (c.clone(), est.ace_with_adjustment(ds.index_of(c).expect("option column"), y, &[]).0))
        .collect();
    Ok(CbiReport { method: Method::Cbi, objective: objective.into(), scores, root_causes, root_cause_effects })
}

fn model_path(model: &Option<PathBuf>, out: &Path) -> PathBuf {
    model.clone().unwrap_or_else(|| out.join("model.json"))
}

fn cmd_diagnose(args: &DiagnoseArgs) -> Result<serde_json::Value, CliError> {
    let ds = load(&args.inputs)?;
    let (json, table, causes) = match args.method {
        Method::Care => {
            let admg = load_model(&model_path(&args.model, &args.out), &ds)?;
            require_objective(&ds, &args.objective)?;
            let d = diagnose(&ds, &admg, &args.objective, args.top_k)?;
            let mut table = String::from("rank\tpath_ace\tpath\n");
            for (i, p) in d.ranked_paths.iter().enumerate() {
                let _ = writeln!(table, "{}\t{:.6}\t{}", i + 1, p.path_ace, p.vertices.join(" -> "));
            }
            let json = serde_json::to_value(CareReport { method: Method::Care, diagnosis: &d }).expect("serializable");
            (json, table, d.root_causes)
        }
        Method::Cbi => {
            let report = cbi_report(&ds, &args.objective, args.bins, args.top_k)?;
            if report.root_causes.is_empty() {
                return Err(CliError::empty(
                    format!("no predicate over an option predicts faults of `{}`", args.objective),
                    Some(args.objective.clone()),
                ));
            }
            let mut table = String::from("rank\timportance\tpredicate\n");
            for (i, s) in report.scores.iter().enumerate() {
                let pred = s.best_predicate.as_ref().map_or_else(|| s.option.clone(), |p| p.to_string());
                let _ = writeln!(table, "{}\t{:.6}\t{}", i + 1, s.score, pred);
            }
            let causes = report.root_causes.clone();
            (serde_json::to_value(report).expect("serializable"), table, causes)
        }
    };
    write_json(&args.out.join("diagnosis.json"), &json)?;
    write_atomic(&args.out.join("diagnosis.txt"), table.as_bytes())?;
    Ok(serde_json::json!({ "command": "diagnose", "objective": args.objective, "method": args.method, "root_causes": causes }))
}

#[derive(Serialize)]
struct RankEntry {
    rank: usize,
    option: String,
    /// Best path ACE for the causal method, predicate importance for CBI.
    score: f64,
}

fn cmd_rank(args: &RankArgs) -> Result<serde_json::Value, CliError> {
    let ds = load(&args.inputs)?;
    require_objective(&ds, &args.objective)?;
    let mut scored: Vec<(String, f64)> = match args.method {
        Method::Care => {
            let admg = load_model(&model_path(&args.model, &args.out), &ds)?;
            let d = diagnose(&ds, &admg, &args.objective, usize::MAX)?;
            let mut best: Vec<(String, f64)> = Vec::new();
            for p in &d.ranked_paths {
                if !best.iter().any(|(o, _)| *o == p.vertices[0]) {
                    best.push((p.vertices[0].clone(), p.path_ace));
                }
            }
            best
        }
        Method::Cbi => {
            let n = ds.with_role(Role::ManipulableOption).len();
            cbi_report(&ds, &args.objective, args.bins, n)?.scores.into_iter().map(|s| (s.option, s.score)).collect()
        }
    };
    // options without a path share the last place in name order
    let mut rest: Vec<String> = ds
        .with_role(Role::ManipulableOption)
        .into_iter()
        .map(|i| ds.meta(i).name.clone())
        .filter(|o| !scored.iter().any(|(s, _)| s == o))
        .collect();
    rest.sort();
    scored.extend(rest.into_iter().map(|o| (o, 0.0)));
    let ranking: Vec<RankEntry> =
        scored.into_iter().enumerate().map(|(i, (option, score))| RankEntry { rank: i + 1, option, score }).collect();
    let mut table = String::from("rank\tscore\toption\n");
    for r in &ranking {
        let _ = writeln!(table, "{}\t{:.6}\t{}", r.rank, r.score, r.option);
    }
    write_json(
        &args.out.join("ranking.json"),
        &serde_json::json!({ "objective": args.objective, "method": args.method, "ranking": ranking }),
    )?;
    write_atomic(&args.out.join("ranking.txt"), table.as_bytes())?;
    Ok(serde_json::json!({
        "command": "rank",
        "objective": args.objective,
        "method": args.method,
        "order": ranking.iter().map(|r| r.option.as_str()).collect::<Vec<_>>(),
    }))
}

#[derive(Serialize)]
struct BenchOutput {
    config: BenchConfig,
    #[serde(flatten)]
    report: BenchReport,
    /// Effect RMSE after each batch of samples from a shifted system.
    rmse_series: Vec<RmsePoint>,
}

fn cmd_bench(args: &BenchArgs) -> Result<serde_json::Value, CliError> {
    let learn = args.learning.config();
    let config = BenchConfig {
        seed: args.seed,
        instances: args.instances,
        samples: args.samples,
        top_k: args.top_k,
        learn,
        ..BenchConfig::default()
    };
    let report = run_benchmark(&config)?;
    let rmse_series = transfer_series(&TransferConfig { seed: args.seed, learn, ..TransferConfig::default() })?;
    let mut table = String::from("instance\tobjective\tmethod\ttp\tfp\tfn\tf1\trmse\n");
    for f in &report.faults {
        for (method, r) in [("care", &f.care), ("cbi", &f.cbi)] {
            let _ = writeln!(
                table,
                "{}\t{}\t{method}\t{}\t{}\t{}\t{:.4}\t{:.4}",
                f.instance, f.objective, r.tp, r.fp, r.fn_, r.f1, r.rmse
            );
        }
    }
    let summary = serde_json::json!({
        "command": "bench",
        "faults": report.faults.len(),
        "care": &report.care,
        "cbi": &report.cbi,
    });
    write_json(&args.out.join("bench.json"), &BenchOutput { config, report, rmse_series })?;
    write_atomic(&args.out.join("bench.txt"), table.as_bytes())?;
    Ok(summary)
}

fn cmd_synth(args: &SynthArgs) -> Result<serde_json::Value, CliError> {
    if args.noise < 0.0 {
        return Err(CliError::input("noise must be non-negative", Some("noise".into())));
    }
    let mut cfg = ScmConfig::new(args.options, args.metrics, args.objectives, args.density, args.noise, args.seed);
    cfg.option_levels = Some(args.levels);
    cfg.boolean_objectives = true;
    cfg.hidden_confounders = args.hidden;
    let scm = generate_scm(&cfg)?;
    let ds = scm.sample_with_seed(args.samples, args.seed);
    let truth = curate_ground_truth(&scm, &ds, args.objectives)?;
    let mut table = Vec::new();
    ds.write_table(&mut table)?;
    write_atomic(&args.out.join("data.csv"), &table)?;
    write_json(&args.out.join("roles.json"), &ds.roles_json())?;
    write_json(&args.out.join("scm.json"), &scm)?;
    write_json(&args.out.join("truth.json"), &truth)?;
    Ok(serde_json::json!({
        "command": "synth",
        "rows": ds.sample_count(),
        "variables": ds.n_vars(),
        "faults": truth.faults.iter().map(|f| serde_json::json!({
            "objective": f.objective,
            "faulty_rows": f.fault_rows.len(),
            "root_causes": f.true_root_causes,
        })).collect::<Vec<_>>(),
    }))
}

#[derive(Deserialize)]
struct PredictionFile {
    objective: String,
    root_causes: Vec<String>,
    #[serde(default)]
    root_cause_effects: BTreeMap<String, f64>,
}

fn cmd_eval(args: &EvalArgs) -> Result<serde_json::Value, CliError> {
    let pred: PredictionFile = read_json(&args.diagnosis, "diagnosis")?;
    let truth: GroundTruth = read_json(&args.truth, "truth")?;
    let roles = confcause::dataset::parse_roles(open(&args.roles, "roles")?)?;
    let mut universe: Vec<String> =
        roles.into_iter().filter(|(_, (role, _))| *role == Role::ManipulableOption).map(|(n, _)| n).collect();
    universe.sort();
    let fault = truth.faults.iter().find(|f| f.objective == pred.objective).ok_or_else(|| {
        CliError::input(format!("truth has no fault for `{}`", pred.objective), Some(pred.objective.clone()))
    })?;
    let prediction =
        Prediction { objective: pred.objective.clone(), root_causes: pred.root_causes, effects: pred.root_cause_effects };
    let report: EvalReport = evaluate_prediction(&prediction, fault, &universe)?;
    write_json(&args.out.join("eval.json"), &report)?;
    Ok(serde_json::json!({ "command": "eval", "objective": pred.objective, "report": report }))
}

fn run(cli: Cli) -> Result<serde_json::Value, CliError> {
    match &cli.command {
        Command::Learn(a) => cmd_learn(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Rank(a) => cmd_rank(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Eval(a) => cmd_eval(a),
    }
}

fn usage_error(e: &clap::Error) -> CliError {
    let key = match e.get(ContextKind::InvalidArg) {
        Some(ContextValue::String(s)) => Some(s.clone()),
        Some(ContextValue::Strings(v)) => v.first().cloned(),
        _ => None,
    };
    let message = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
    CliError::input(message, key)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = usage_error(&e);
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.error.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.error.exit_code() as u8)
        }
    }
}
