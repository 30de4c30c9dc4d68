use std::fmt;

use confcause::cbi::CbiError;
use confcause::dataset::DataError;
use confcause::effects::EffectsError;
use confcause::graph::GraphError;
use confcause::model::ModelError;
use confcause::synth::SynthError;
use serde::Serialize;

/// Failure classes, each with its own exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    Input,
    EmptyResult,
    Internal,
}

impl Class {
    pub fn exit_code(self) -> i32 {
        match self {
            Class::Input => 2,
            Class::EmptyResult => 3,
            Class::Internal => 4,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CliError {
    pub error: Class,
    pub message: String,
    /// Offending key, flag or variable when one is known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
}

impl CliError {
    pub fn input(message: impl Into<String>, key: Option<String>) -> Self {
        CliError { error: Class::Input, message: message.into(), key }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError { error: Class::Internal, message: message.into(), key: None }
    }

    pub fn empty(message: impl Into<String>, key: Option<String>) -> Self {
        CliError { error: Class::EmptyResult, message: message.into(), key }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error report serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        let key = match &e {
            DataError::MalformedRoles { key, .. } => Some(key.clone()),
            DataError::UnknownVariable(k)
            | DataError::MissingRole(k)
            | DataError::DuplicateName(k)
            | DataError::NoSuchVariable(k) => Some(k.clone()),
            DataError::NonNumericCell { column, .. } => Some(column.clone()),
            DataError::BadBinCount { variable, .. } | DataError::BadStrategy { variable, .. } => Some(variable.clone()),
            _ => None,
        };
        CliError::input(e.to_string(), key)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Data(d) => d.into(),
            ModelError::SchemaMismatch(m) => CliError::input(format!("schema mismatch: {m}"), None),
            other => CliError::internal(other.to_string()),
        }
    }
}

impl From<EffectsError> for CliError {
    fn from(e: EffectsError) -> Self {
        match e {
            EffectsError::NoPathsFound(o) => CliError::empty(format!("no causal paths reach `{o}`"), Some(o)),
            EffectsError::NotAnObjective(o) => CliError::input(format!("`{o}` is not a performance objective"), Some(o)),
            EffectsError::VertexMismatch => CliError::input(e.to_string(), Some("model".into())),
            EffectsError::ZeroTopK => CliError::input(e.to_string(), Some("top-k".into())),
            EffectsError::Data(d) => d.into(),
            EffectsError::Graph(GraphError::UnknownVertex(v)) => CliError::input(format!("unknown variable `{v}`"), Some(v)),
            other => CliError::internal(other.to_string()),
        }
    }
}

impl From<CbiError> for CliError {
    fn from(e: CbiError) -> Self {
        match e {
            CbiError::Data(d) => d.into(),
            other => CliError::internal(other.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::UnknownVertex(v) => CliError::input(format!("unknown variable `{v}`"), Some(v)),
            SynthError::NoFaultyRows(o) => CliError::empty(format!("objective `{o}` has no faulty rows"), Some(o)),
            SynthError::ObjectiveMismatch { predicted, truth } => {
                CliError::input(format!("diagnosis of `{predicted}` has no matching fault (truth has `{truth}`)"), Some(predicted))
            }
            SynthError::BadConfig(m) => CliError::input(m, None),
            SynthError::Data(d) => d.into(),
            SynthError::Model(m) => m.into(),
            SynthError::Effects(e) => e.into(),
            other => CliError::internal(other.to_string()),
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::input(e.to_string(), Some("model".into()))
    }
}
