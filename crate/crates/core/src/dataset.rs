//! Observational performance traces and the three-layer variable taxonomy.
//!
//! A [`Dataset`] is column-oriented: every variable owns one `Vec<f64>` of
//! observations. Categorical and boolean values are stored as dense integer
//! codes; the original labels live in the variable's [`Domain`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("roles file references column `{0}` that is absent from the table")]
    UnknownVariable(String),
    #[error("column `{0}` has no role assignment")]
    MissingRole(String),
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("dataset has no complete rows")]
    EmptyDataset,
    #[error("non-numeric cell `{value}` in column `{column}` (row {row})")]
    NonNumericCell { column: String, row: usize, value: String },
    #[error("roles file is malformed at key `{key}`: {reason}")]
    MalformedRoles { key: String, reason: String },
    #[error("no variable with role {0:?}")]
    MissingRoleClass(Role),
    #[error("variable `{0}` not found")]
    NoSuchVariable(String),
    #[error("bin count {count} is invalid for `{variable}` (need at least 2)")]
    BadBinCount { variable: String, count: usize },
    #[error("strategy {strategy:?} cannot be applied to `{variable}` of kind {kind:?}")]
    BadStrategy { variable: String, strategy: BinStrategy, kind: Kind },
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow { row: usize, found: usize, expected: usize },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Position of a variable in the three-layer causal model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    /// A configuration option that can be intervened upon.
    #[serde(rename = "option")]
    ManipulableOption,
    /// An observed performance metric that cannot be set directly.
    #[serde(rename = "metric")]
    NonManipulableMetric,
    /// An end-to-end performance objective (energy, mission success, ...).
    #[serde(rename = "objective")]
    PerformanceObjective,
}

impl Role {
    pub fn parse(s: &str) -> Option<Role> {
        match s {
            "option" => Some(Role::ManipulableOption),
            "metric" => Some(Role::NonManipulableMetric),
            "objective" => Some(Role::PerformanceObjective),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::ManipulableOption => "option",
            Role::NonManipulableMetric => "metric",
            Role::PerformanceObjective => "objective",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Continuous,
    Discrete,
    Boolean,
    Categorical,
}

impl Kind {
    pub fn parse(s: &str) -> Option<Kind> {
        match s {
            "continuous" => Some(Kind::Continuous),
            "discrete" => Some(Kind::Discrete),
            "boolean" => Some(Kind::Boolean),
            "categorical" => Some(Kind::Categorical),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Continuous => "continuous",
            Kind::Discrete => "discrete",
            Kind::Boolean => "boolean",
            Kind::Categorical => "categorical",
        }
    }

    /// Whether the column already holds finitely many coded values.
    pub fn is_discrete(self) -> bool {
        !matches!(self, Kind::Continuous)
    }
}

/// Admissible values of a variable. Units are opaque strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// Enumerated labels; the code of a label is its position.
    Levels(Vec<String>),
    Range {
        min: f64,
        max: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        unit: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableMeta {
    pub name: String,
    pub role: Role,
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
}

impl VariableMeta {
    pub fn new(name: impl Into<String>, role: Role, kind: Kind) -> Self {
        let domain = match kind {
            Kind::Boolean => Some(Domain::Levels(vec!["false".into(), "true".into()])),
            _ => None,
        };
        VariableMeta { name: name.into(), role, kind, domain }
    }

    pub fn levels(&self) -> Option<&[String]> {
        match &self.domain {
            Some(Domain::Levels(l)) => Some(l),
            _ => None,
        }
    }
}

/// Immutable column-oriented sample table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    variables: Vec<VariableMeta>,
    columns: Vec<Vec<f64>>,
}

impl Dataset {
    /// Builds a dataset from already-coded columns, checking the structural invariants.
    pub fn new(variables: Vec<VariableMeta>, columns: Vec<Vec<f64>>) -> Result<Self, DataError> {
        let mut seen = HashSet::new();
        for v in &variables {
            if !seen.insert(v.name.as_str()) {
                return Err(DataError::DuplicateName(v.name.clone()));
            }
        }
        if variables.len() != columns.len() {
            return Err(DataError::SchemaMismatch(format!(
                "{} variables but {} columns",
                variables.len(),
                columns.len()
            )));
        }
        if let Some(first) = columns.first() {
            let n = first.len();
            if let Some((i, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != n) {
                return Err(DataError::SchemaMismatch(format!(
                    "column `{}` has {} rows, expected {n}",
                    variables[i].name,
                    c.len()
                )));
            }
        }
        Ok(Dataset { variables, columns })
    }

    pub fn variables(&self) -> &[VariableMeta] {
        &self.variables
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn sample_count(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn require(&self, name: &str) -> Result<usize, DataError> {
        self.index_of(name).ok_or_else(|| DataError::NoSuchVariable(name.to_string()))
    }

    pub fn column(&self, idx: usize) -> &[f64] {
        &self.columns[idx]
    }

    pub fn column_by_name(&self, name: &str) -> Option<&[f64]> {
        self.index_of(name).map(|i| self.columns[i].as_slice())
    }

    pub fn meta(&self, idx: usize) -> &VariableMeta {
        &self.variables[idx]
    }

    pub fn names(&self) -> Vec<&str> {
        self.variables.iter().map(|v| v.name.as_str()).collect()
    }

    /// Indices of variables carrying `role`, in column order.
    pub fn with_role(&self, role: Role) -> Vec<usize> {
        (0..self.n_vars()).filter(|&i| self.variables[i].role == role).collect()
    }

    /// Fails unless every role class is represented.
    pub fn check_roles_complete(&self) -> Result<(), DataError> {
        for role in [Role::ManipulableOption, Role::NonManipulableMetric, Role::PerformanceObjective] {
            if self.with_role(role).is_empty() {
                return Err(DataError::MissingRoleClass(role));
            }
        }
        Ok(())
    }

    /// Same schema, a subset of rows.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|c| rows.iter().map(|&r| c[r]).collect())
            .collect();
        Dataset { variables: self.variables.clone(), columns }
    }

    /// Appends the rows of `other`. Categorical codes of `other` are remapped
    /// through their labels so the result stays consistent.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset, DataError> {
        if self.n_vars() != other.n_vars() {
            return Err(DataError::SchemaMismatch(format!(
                "{} vs {} variables",
                self.n_vars(),
                other.n_vars()
            )));
        }
        let mut variables = self.variables.clone();
        let mut columns = self.columns.clone();
        for (i, (a, b)) in self.variables.iter().zip(&other.variables).enumerate() {
            if a.name != b.name || a.role != b.role || a.kind != b.kind {
                return Err(DataError::SchemaMismatch(format!(
                    "variable {i}: `{}` ({:?}, {:?}) vs `{}` ({:?}, {:?})",
                    a.name, a.role, a.kind, b.name, b.role, b.kind
                )));
            }
            match (a.kind, a.levels(), b.levels()) {
                (Kind::Categorical, Some(la), Some(lb)) => {
                    let mut levels = la.to_vec();
                    let remap: Vec<f64> = lb
                        .iter()
                        .map(|label| match levels.iter().position(|l| l == label) {
                            Some(p) => p as f64,
                            None => {
                                levels.push(label.clone());
                                (levels.len() - 1) as f64
                            }
                        })
                        .collect();
                    columns[i].extend(other.columns[i].iter().map(|&c| remap[c as usize]));
                    variables[i].domain = Some(Domain::Levels(levels));
                }
                _ => columns[i].extend_from_slice(&other.columns[i]),
            }
        }
        Ok(Dataset { variables, columns })
    }

    /// Writes the table as comma-separated text with a header row.
    /// Categorical and boolean cells are written as their labels.
    pub fn write_table<W: Write>(&self, out: W) -> Result<(), DataError> {
        let mut w = csv::WriterBuilder::new().from_writer(out);
        w.write_record(self.variables.iter().map(|v| v.name.as_str()))?;
        for r in 0..self.sample_count() {
            let row: Vec<String> = self
                .variables
                .iter()
                .zip(&self.columns)
                .map(|(meta, col)| format_cell(meta, col[r]))
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// The roles-file JSON object describing this dataset's variables.
    pub fn roles_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for v in &self.variables {
            map.insert(
                v.name.clone(),
                serde_json::json!({ "role": v.role.as_str(), "kind": v.kind.as_str() }),
            );
        }
        serde_json::Value::Object(map)
    }
}

fn format_cell(meta: &VariableMeta, x: f64) -> String {
    match (meta.kind, meta.levels()) {
        (Kind::Categorical | Kind::Boolean, Some(levels)) => levels
            .get(x as usize)
            .cloned()
            .unwrap_or_else(|| format!("{x}")),
        _ => format!("{x}"),
    }
}

#[derive(Debug, Deserialize)]
struct RoleEntry {
    role: String,
    kind: String,
}

/// Parses the roles file: `{ "<name>": {"role": "...", "kind": "..."} }`.
/// Object key order is not significant; the table header fixes column order.
pub fn parse_roles<R: Read>(roles_source: R) -> Result<HashMap<String, (Role, Kind)>, DataError> {
    let value: serde_json::Value = serde_json::from_reader(roles_source)?;
    let obj = value.as_object().ok_or_else(|| DataError::MalformedRoles {
        key: "$".into(),
        reason: "expected a JSON object".into(),
    })?;
    let mut out = HashMap::new();
    for (name, entry) in obj {
        let entry: RoleEntry =
            serde_json::from_value(entry.clone()).map_err(|e| DataError::MalformedRoles {
                key: name.clone(),
                reason: e.to_string(),
            })?;
        let role = Role::parse(&entry.role).ok_or_else(|| DataError::MalformedRoles {
            key: name.clone(),
            reason: format!("unknown role `{}`", entry.role),
        })?;
        let kind = Kind::parse(&entry.kind).ok_or_else(|| DataError::MalformedRoles {
            key: name.clone(),
            reason: format!("unknown kind `{}`", entry.kind),
        })?;
        out.insert(name.clone(), (role, kind));
    }
    Ok(out)
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

/// Reads a delimited table plus its roles file into a validated [`Dataset`].
///
/// Rows with an empty cell are dropped and the count is logged.
pub fn load_dataset<T: Read, R: Read>(table_source: T, roles_source: R) -> Result<Dataset, DataError> {
    let roles = parse_roles(roles_source)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(table_source);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();

    let mut seen = HashSet::new();
    for h in &header {
        if !seen.insert(h.as_str()) {
            return Err(DataError::DuplicateName(h.clone()));
        }
    }
    let mut role_names: Vec<&String> = roles.keys().collect();
    role_names.sort();
    for name in role_names {
        if !seen.contains(name.as_str()) {
            return Err(DataError::UnknownVariable(name.clone()));
        }
    }
    let mut variables = Vec::with_capacity(header.len());
    for h in &header {
        let (role, kind) = roles.get(h).ok_or_else(|| DataError::MissingRole(h.clone()))?;
        variables.push(VariableMeta::new(h.clone(), *role, *kind));
    }

    let width = header.len();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); width];
    let mut levels: Vec<Vec<String>> = vec![Vec::new(); width];
    let mut dropped = 0usize;
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != width {
            return Err(DataError::RaggedRow { row: row_idx + 1, found: record.len(), expected: width });
        }
        if record.iter().any(str::is_empty) {
            dropped += 1;
            continue;
        }
        for (c, cell) in record.iter().enumerate() {
            let meta = &variables[c];
            let value = match meta.kind {
                Kind::Continuous | Kind::Discrete => cell.parse::<f64>().ok().filter(|x| x.is_finite()),
                Kind::Boolean => parse_bool(cell).map(|b| if b { 1.0 } else { 0.0 }),
                Kind::Categorical => {
                    let pos = match levels[c].iter().position(|l| l == cell) {
                        Some(p) => p,
                        None => {
                            levels[c].push(cell.to_string());
                            levels[c].len() - 1
                        }
                    };
                    Some(pos as f64)
                }
            };
            let value = value.ok_or_else(|| DataError::NonNumericCell {
                column: meta.name.clone(),
                row: row_idx + 1,
                value: cell.to_string(),
            })?;
            columns[c].push(value);
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} rows with missing cells");
    }
    if columns.first().is_none_or(Vec::is_empty) {
        return Err(DataError::EmptyDataset);
    }
    for (meta, lv) in variables.iter_mut().zip(levels) {
        if meta.kind == Kind::Categorical {
            meta.domain = Some(Domain::Levels(lv));
        }
    }
    Dataset::new(variables, columns)
}

/// How a column is mapped onto bin indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinStrategy {
    EqualWidth,
    EqualFrequency,
    PassThrough,
}

/// A fitted binning of one variable. Bins are right-closed: a value `x` falls
/// into bin `k` where `k` is the number of interior edges strictly below `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub variable: String,
    pub strategy: BinStrategy,
    pub bin_count: usize,
    /// Ascending; `bin_count + 1` entries. A constant column yields the single
    /// degenerate bin `[c, c]`. Empty for pass-through.
    pub bin_edges: Vec<f64>,
}

/// What to do with one variable; edges are fitted from data.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizationSpec {
    pub variable: String,
    pub strategy: BinStrategy,
    pub bin_count: usize,
}

impl DiscretizationSpec {
    pub fn new(variable: impl Into<String>, strategy: BinStrategy, bin_count: usize) -> Self {
        DiscretizationSpec { variable: variable.into(), strategy, bin_count }
    }
}

impl Discretization {
    /// Fits bin edges on `column`.
    pub fn fit(variable: &str, column: &[f64], strategy: BinStrategy, bin_count: usize) -> Result<Self, DataError> {
        if strategy == BinStrategy::PassThrough {
            let mut distinct: Vec<f64> = column.to_vec();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            return Ok(Discretization {
                variable: variable.into(),
                strategy,
                bin_count: distinct.len().max(1),
                bin_edges: Vec::new(),
            });
        }
        if bin_count < 2 {
            return Err(DataError::BadBinCount { variable: variable.into(), count: bin_count });
        }
        let (lo, hi) = column
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        if column.is_empty() || lo == hi {
            let c = if column.is_empty() { 0.0 } else { lo };
            return Ok(Discretization { variable: variable.into(), strategy, bin_count: 1, bin_edges: vec![c, c] });
        }
        let interior: Vec<f64> = match strategy {
            BinStrategy::EqualWidth => {
                let width = (hi - lo) / bin_count as f64;
                (1..bin_count).map(|i| lo + width * i as f64).collect()
            }
            BinStrategy::EqualFrequency => {
                let mut sorted = column.to_vec();
                sorted.sort_by(f64::total_cmp);
                let n = sorted.len();
                (1..bin_count)
                    .map(|i| sorted[(i * n / bin_count).saturating_sub(1)])
                    .collect()
            }
            BinStrategy::PassThrough => unreachable!(),
        };
        let mut edges = vec![lo];
        for e in interior {
            // interior edges at the maximum would leave an empty top bin
            if e > *edges.last().unwrap() && e < hi {
                edges.push(e);
            }
        }
        edges.push(hi);
        Ok(Discretization { variable: variable.into(), strategy, bin_count: edges.len() - 1, bin_edges: edges })
    }

    /// Interior edges (the cut points between bins).
    pub fn interior_edges(&self) -> &[f64] {
        if self.bin_edges.len() <= 2 {
            &[]
        } else {
            &self.bin_edges[1..self.bin_edges.len() - 1]
        }
    }

    pub fn bin_of(&self, x: f64) -> usize {
        self.interior_edges().iter().filter(|&&e| e < x).count()
    }

    pub fn apply(&self, column: &[f64]) -> Vec<f64> {
        match self.strategy {
            BinStrategy::PassThrough => column.to_vec(),
            _ => column.iter().map(|&x| self.bin_of(x) as f64).collect(),
        }
    }
}

/// Maps the targeted columns to bin indices. The input is left untouched;
/// binned variables become [`Kind::Discrete`] in the returned dataset.
pub fn discretize(ds: &Dataset, specs: &[DiscretizationSpec]) -> Result<Dataset, DataError> {
    discretize_with_edges(ds, specs).map(|(d, _)| d)
}

/// Like [`discretize`], also returning the fitted binnings.
pub fn discretize_with_edges(
    ds: &Dataset,
    specs: &[DiscretizationSpec],
) -> Result<(Dataset, Vec<Discretization>), DataError> {
    let mut variables = ds.variables.clone();
    let mut columns = ds.columns.clone();
    let mut fitted = Vec::with_capacity(specs.len());
    for spec in specs {
        let idx = ds.require(&spec.variable)?;
        let kind = ds.variables[idx].kind;
        if spec.strategy == BinStrategy::PassThrough && kind == Kind::Continuous {
            return Err(DataError::BadStrategy { variable: spec.variable.clone(), strategy: spec.strategy, kind });
        }
        if spec.strategy != BinStrategy::PassThrough && kind != Kind::Continuous {
            return Err(DataError::BadStrategy { variable: spec.variable.clone(), strategy: spec.strategy, kind });
        }
        let d = Discretization::fit(&spec.variable, &ds.columns[idx], spec.strategy, spec.bin_count)?;
        if spec.strategy != BinStrategy::PassThrough {
            columns[idx] = d.apply(&ds.columns[idx]);
            let meta = &mut variables[idx];
            meta.kind = Kind::Discrete;
            meta.domain = Some(Domain::Range { min: 0.0, max: (d.bin_count - 1) as f64, unit: None });
        }
        fitted.push(d);
    }
    Ok((Dataset { variables, columns }, fitted))
}

/// Equal-frequency binning with `bins` bins for continuous columns,
/// pass-through for everything else.
pub fn default_specs(ds: &Dataset, bins: usize) -> Vec<DiscretizationSpec> {
    ds.variables
        .iter()
        .map(|v| {
            let strategy = if v.kind == Kind::Continuous { BinStrategy::EqualFrequency } else { BinStrategy::PassThrough };
            DiscretizationSpec::new(v.name.clone(), strategy, bins)
        })
        .collect()
}

/// Discretizes every continuous column with the default strategy.
pub fn discretize_default(ds: &Dataset, bins: usize) -> Result<Dataset, DataError> {
    discretize(ds, &default_specs(ds, bins))
}

/// Role of every variable, keyed by name.
pub fn role_map(vars: &[VariableMeta]) -> BTreeMap<String, Role> {
    vars.iter().map(|v| (v.name.clone(), v.role)).collect()
}
