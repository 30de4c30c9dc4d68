//! Turns a PAG into an ADMG. Edges whose endpoints are both decided are
//! copied; every edge with a circle mark is resolved by comparing the entropy
//! of the smallest latent that explains the pair against a threshold, then by
//! comparing exogenous-noise entropies of the two causal directions.

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::discovery::StructuralConstraints;
use crate::graph::{Admg, EdgeMark, Pag};
use crate::stats::{conditional_entropy, entropy, min_entropy_latent, StatsError};

pub const DEFAULT_THETA_RATIO: f64 = 0.8;

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("graph vertices do not match the dataset's variables")]
    VertexMismatch,
    #[error("theta ratio must lie in (0, 1], got {0}")]
    BadThetaRatio(f64),
}

/// `theta_ratio * min(h_i, h_j)`.
pub fn entropy_threshold(h_i: f64, h_j: f64, theta_ratio: f64) -> f64 {
    theta_ratio * h_i.min(h_j)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Emitted {
    Directed { from: String, to: String },
    Bidirected,
}

/// Record of how one PAG edge was turned into an ADMG edge. `u` and `v` are
/// in name order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDecision {
    pub u: String,
    pub v: String,
    /// Entropy terms, present only for edges that carried a circle.
    pub entropies: Option<EntropyTerms>,
    pub emitted: Emitted,
    /// Set when constraints or cycle avoidance overrode the entropy rule.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyTerms {
    pub h_u: f64,
    pub h_v: f64,
    pub h_latent: f64,
    pub theta: f64,
    /// `H(v | u)`, the noise needed for `u -> v`.
    pub h_noise_forward: f64,
    /// `H(u | v)`, the noise needed for `v -> u`.
    pub h_noise_backward: f64,
}

#[derive(Debug, Clone)]
pub struct Resolution {
    pub admg: Admg,
    pub decisions: Vec<EdgeDecision>,
}

/// Resolves every PAG edge; `ds` must be discretized.
pub fn resolve_edges(
    pag: &Pag,
    ds: &Dataset,
    theta_ratio: f64,
    sc: &StructuralConstraints,
) -> Result<Admg, ResolveError> {
    Ok(resolve_with_report(pag, ds, theta_ratio, sc)?.admg)
}

/// Whether `from -> to` is admissible: allowed by the constraints and not
/// ruled out by an arrowhead at `from` in the PAG.
fn admissible(pag: &Pag, sc: &StructuralConstraints, from: usize, to: usize) -> bool {
    sc.admits_directed(from, to) && pag.mark_at(to, from) != Some(EdgeMark::Arrow)
}

pub fn resolve_with_report(
    pag: &Pag,
    ds: &Dataset,
    theta_ratio: f64,
    sc: &StructuralConstraints,
) -> Result<Resolution, ResolveError> {
    if !(theta_ratio > 0.0 && theta_ratio <= 1.0) {
        return Err(ResolveError::BadThetaRatio(theta_ratio));
    }
    let same = pag.n() == ds.n_vars() && pag.vertices().iter().zip(ds.variables()).all(|(a, b)| a.name == b.name);
    if !same {
        return Err(ResolveError::VertexMismatch);
    }
    let mut edges: Vec<(usize, usize, EdgeMark, EdgeMark)> = pag
        .edges()
        .into_iter()
        .map(|(a, b, ma, mb)| if pag.name(a) <= pag.name(b) { (a, b, ma, mb) } else { (b, a, mb, ma) })
        .collect();
    edges.sort_by(|x, y| (pag.name(x.0), pag.name(x.1)).cmp(&(pag.name(y.0), pag.name(y.1))));

    let mut admg = Admg::new(pag.vertices().to_vec());
    let mut decisions = Vec::with_capacity(edges.len());

    // decided edges first so that resolved ones cannot preempt them
    let (decided, partial): (Vec<_>, Vec<_>) = edges.into_iter().partition(|&(_, _, ma, mb)| {
        matches!((ma, mb), (EdgeMark::Tail, EdgeMark::Arrow) | (EdgeMark::Arrow, EdgeMark::Tail) | (EdgeMark::Arrow, EdgeMark::Arrow))
    });
    for (u, v, mu, mv) in decided {
        let (emitted, note) = match (mu, mv) {
            (EdgeMark::Arrow, EdgeMark::Arrow) => {
                admg.add_bidirected(u, v);
                (Emitted::Bidirected, None)
            }
            (EdgeMark::Tail, _) => place_directed(&mut admg, pag, sc, u, v),
            _ => place_directed(&mut admg, pag, sc, v, u),
        };
        decisions.push(EdgeDecision { u: pag.name(u).into(), v: pag.name(v).into(), entropies: None, emitted, note });
    }

    for (u, v, _, _) in partial {
        let h_u = entropy(ds, &[u])?.value_bits;
        let h_v = entropy(ds, &[v])?.value_bits;
        let h_latent = min_entropy_latent(ds, u, v)?.latent_entropy_bits;
        let theta = entropy_threshold(h_u, h_v, theta_ratio);
        let h_noise_forward = conditional_entropy(ds, v, u)?;
        let h_noise_backward = conditional_entropy(ds, u, v)?;
        let terms = EntropyTerms { h_u, h_v, h_latent, theta, h_noise_forward, h_noise_backward };
        let (emitted, note) = if h_latent < theta {
            admg.add_bidirected(u, v);
            (Emitted::Bidirected, None)
        } else {
            let (from, to) = if h_noise_forward < h_noise_backward { (u, v) } else { (v, u) };
            place_directed(&mut admg, pag, sc, from, to)
        };
        debug!("{} - {}: {:?} {:?}", pag.name(u), pag.name(v), emitted, terms);
        decisions.push(EdgeDecision {
            u: pag.name(u).into(),
            v: pag.name(v).into(),
            entropies: Some(terms),
            emitted,
            note,
        });
    }
    debug_assert!(admg.is_acyclic());
    Ok(Resolution { admg, decisions })
}

/// Adds `from -> to`, flipping or falling back to a bidirected edge when the
/// direction is inadmissible or would close a cycle.
fn place_directed(
    admg: &mut Admg,
    pag: &Pag,
    sc: &StructuralConstraints,
    from: usize,
    to: usize,
) -> (Emitted, Option<String>) {
    let name = |i: usize| pag.name(i).to_string();
    let ok = |g: &Admg, a: usize, b: usize| admissible(pag, sc, a, b) && !g.would_create_cycle(a, b);
    let mut note = None;
    let (a, b) = if ok(admg, from, to) {
        (from, to)
    } else if ok(admg, to, from) {
        let why = if admissible(pag, sc, from, to) { "cycle" } else { "constraint" };
        let msg = format!("{} -> {} rejected ({why}); reversed", name(from), name(to));
        warn!("{msg}");
        note = Some(msg);
        (to, from)
    } else {
        let msg = format!("neither direction between {} and {} is admissible; bidirected", name(from), name(to));
        warn!("{msg}");
        admg.add_bidirected(from, to);
        return (Emitted::Bidirected, Some(msg));
    };
    admg.add_directed(a, b);
    (Emitted::Directed { from: name(a), to: name(b) }, note)
}
