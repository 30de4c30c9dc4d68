use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataset::{Role, VariableMeta};

/// Role-derived prohibitions on edges, indexed like the variable list they
/// were built from.
///
/// Options are treated as exogenous inputs and objectives as sinks:
///
/// * no adjacency between two options;
/// * no edge directed into an option (from a metric or an objective);
/// * no edge directed out of an objective (into a metric, option or other
///   objective).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralConstraints {
    names: Vec<String>,
    /// Unordered pairs stored both ways: `(u, v)` and `(v, u)`.
    pub forbidden_edges: BTreeSet<(usize, usize)>,
    /// `(u, v)` forbids `u -> v`.
    pub forbidden_directions: BTreeSet<(usize, usize)>,
}

pub fn build_constraints(vars: &[VariableMeta]) -> StructuralConstraints {
    use Role::*;
    let mut forbidden_edges = BTreeSet::new();
    let mut forbidden_directions = BTreeSet::new();
    for (u, a) in vars.iter().enumerate() {
        for (v, b) in vars.iter().enumerate() {
            if u == v {
                continue;
            }
            match (a.role, b.role) {
                (ManipulableOption, ManipulableOption) => {
                    forbidden_edges.insert((u, v));
                }
                (PerformanceObjective, _) | (NonManipulableMetric, ManipulableOption) => {
                    forbidden_directions.insert((u, v));
                }
                _ => {}
            }
        }
    }
    StructuralConstraints {
        names: vars.iter().map(|v| v.name.clone()).collect(),
        forbidden_edges,
        forbidden_directions,
    }
}

impl StructuralConstraints {
    /// Constraints that forbid nothing.
    pub fn none(vars: &[VariableMeta]) -> Self {
        StructuralConstraints {
            names: vars.iter().map(|v| v.name.clone()).collect(),
            forbidden_edges: BTreeSet::new(),
            forbidden_directions: BTreeSet::new(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn adjacency_forbidden(&self, u: usize, v: usize) -> bool {
        self.forbidden_edges.contains(&(u, v))
    }

    pub fn direction_forbidden(&self, u: usize, v: usize) -> bool {
        self.forbidden_edges.contains(&(u, v)) || self.forbidden_directions.contains(&(u, v))
    }

    /// Whether `u -> v` may appear in a model.
    pub fn admits_directed(&self, u: usize, v: usize) -> bool {
        !self.direction_forbidden(u, v)
    }

    /// Constraint set matching these variable names, for checking a graph
    /// learned over the same variables.
    pub fn matches(&self, vars: &[VariableMeta]) -> bool {
        self.names.len() == vars.len() && self.names.iter().zip(vars).all(|(n, v)| *n == v.name)
    }
}
