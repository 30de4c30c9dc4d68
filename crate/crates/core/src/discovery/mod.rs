//! Constraint-based structure learning: adjacency search with Fisher-z tests,
//! collider orientation, possible-d-sep pruning and the FCI orientation rules
//! under role-derived structural constraints.

mod constraints;
mod orient;
mod skeleton;

use std::collections::BTreeMap;

use log::info;
use thiserror::Error;

pub use constraints::{build_constraints, StructuralConstraints};
pub use orient::ConstraintConflict;
pub use skeleton::possible_dsep;

use crate::dataset::Dataset;
use crate::graph::{EdgeMark, Pag};
use crate::stats::{FisherZ, StatsError};
use orient::Orienter;

#[derive(Debug, Error)]
pub enum DiscoveryError {
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("constraints were built for different variables than the dataset")]
    ConstraintMismatch,
    #[error("previous graph does not match the dataset's variables")]
    WarmStartMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FciConfig {
    pub alpha: f64,
    /// Largest conditioning set tried; `None` means unbounded.
    pub max_cond_size: Option<usize>,
    pub possible_dsep: bool,
}

impl Default for FciConfig {
    fn default() -> Self {
        FciConfig { alpha: 0.05, max_cond_size: Some(3), possible_dsep: true }
    }
}

#[derive(Debug, Clone)]
pub struct FciOutput {
    pub pag: Pag,
    pub conflicts: Vec<ConstraintConflict>,
}

/// Learns a PAG with default settings apart from `alpha` and the
/// conditioning-set bound.
pub fn fci(
    ds: &Dataset,
    sc: &StructuralConstraints,
    alpha: f64,
    max_cond_size: Option<usize>,
) -> Result<Pag, DiscoveryError> {
    let cfg = FciConfig { alpha, max_cond_size, ..FciConfig::default() };
    Ok(fci_with(ds, sc, &cfg, None)?.pag)
}

/// Full FCI run. With `warm`, pairs the previous graph separated resume their
/// search at the size of their previous separating set.
pub fn fci_with(
    ds: &Dataset,
    sc: &StructuralConstraints,
    cfg: &FciConfig,
    warm: Option<&Pag>,
) -> Result<FciOutput, DiscoveryError> {
    if !sc.matches(ds.variables()) {
        return Err(DiscoveryError::ConstraintMismatch);
    }
    let warm_sizes: BTreeMap<(usize, usize), usize> = match warm {
        Some(prev) => {
            let same = prev.n() == ds.n_vars() && prev.vertices().iter().zip(ds.variables()).all(|(a, b)| a.name == b.name);
            if !same {
                return Err(DiscoveryError::WarmStartMismatch);
            }
            prev.sepsets().iter().map(|(&pair, set)| (pair, set.len())).collect()
        }
        None => BTreeMap::new(),
    };
    let tester = FisherZ::new(ds, cfg.alpha)?;
    let n = ds.n_vars();
    let (adj, sepsets) = skeleton::skeleton(&tester, sc, n, cfg.max_cond_size, &warm_sizes)?;

    let mut pag = Pag::empty(ds.variables().to_vec());
    for a in 0..n {
        for b in (a + 1)..n {
            if adj[a][b] {
                pag.add_edge(a, b, EdgeMark::Circle, EdgeMark::Circle);
            }
        }
    }
    for ((a, b), set) in sepsets {
        pag.set_sepset(a, b, set);
    }

    let mut orienter = Orienter::new(&mut pag);
    orienter.orient_colliders();
    orienter.apply_constraints(sc);
    if cfg.possible_dsep {
        let removed = skeleton::prune_possible_dsep(orienter.pag, &tester, cfg.max_cond_size)?;
        if removed {
            orienter.reset_circles();
            orienter.orient_colliders();
            orienter.apply_constraints(sc);
        }
    }
    orienter.apply_rules();
    let conflicts = std::mem::take(&mut orienter.conflicts);
    info!("fci: {} edges, {} constraint conflicts", pag.edge_count(), conflicts.len());
    Ok(FciOutput { pag, conflicts })
}

/// Whether a PAG honours the constraints: no forbidden adjacency and no
/// forbidden `u -> v` realised as a tail at `u` with an arrowhead at `v`.
pub fn satisfies_constraints(pag: &Pag, sc: &StructuralConstraints) -> bool {
    pag.edges().into_iter().all(|(a, b, ma, mb)| {
        if sc.adjacency_forbidden(a, b) {
            return false;
        }
        let a_to_b = ma == EdgeMark::Tail && mb == EdgeMark::Arrow;
        let b_to_a = mb == EdgeMark::Tail && ma == EdgeMark::Arrow;
        !(a_to_b && sc.direction_forbidden(a, b)) && !(b_to_a && sc.direction_forbidden(b, a))
    })
}
