use std::collections::{BTreeMap, BTreeSet, VecDeque};

use log::debug;
use rayon::prelude::*;

use super::constraints::StructuralConstraints;
use crate::graph::{EdgeMark, Pag};
use crate::stats::{FisherZ, StatsError};

pub(crate) type Sepsets = BTreeMap<(usize, usize), Vec<usize>>;

/// All `k`-subsets of `items` in lexicographic order of positions.
pub(crate) fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let n = items.len();
    if k > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[i] += 1;
        for j in (i + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Runs one CI test; a singular conditioning set counts as "no verdict".
fn independent(tester: &FisherZ, a: usize, b: usize, cond: &[usize]) -> Result<bool, StatsError> {
    match tester.test(a, b, cond) {
        Ok(r) => Ok(r.independent),
        Err(StatsError::SingularCovariance) => {
            debug!("skipping singular conditioning set {cond:?} for ({a}, {b})");
            Ok(false)
        }
        Err(e) => Err(e),
    }
}

/// First separating set of size `size` drawn from `pool_a` then `pool_b`.
fn find_sepset(
    tester: &FisherZ,
    a: usize,
    b: usize,
    pools: [&[usize]; 2],
    size: usize,
) -> Result<Option<Vec<usize>>, StatsError> {
    let mut tried = BTreeSet::new();
    for pool in pools {
        for cond in combinations(pool, size) {
            if !tried.insert(cond.clone()) {
                continue;
            }
            if independent(tester, a, b, &cond)? {
                return Ok(Some(cond));
            }
        }
    }
    Ok(None)
}

/// Adjacency search. Starts from the complete graph minus forbidden pairs;
/// each conditioning-set size is one round whose removals commit together, so
/// pairs within a round can be tested in parallel.
///
/// `warm` gives, for previously separated pairs, the size at which their
/// search resumes.
pub(crate) fn skeleton(
    tester: &FisherZ,
    sc: &StructuralConstraints,
    n: usize,
    max_cond: Option<usize>,
    warm: &BTreeMap<(usize, usize), usize>,
) -> Result<(Vec<Vec<bool>>, Sepsets), StatsError> {
    let mut adj = vec![vec![false; n]; n];
    let mut sepsets = Sepsets::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if sc.adjacency_forbidden(a, b) {
                // options are mutually independent by design
                sepsets.insert((a, b), Vec::new());
            } else {
                adj[a][b] = true;
                adj[b][a] = true;
            }
        }
    }
    let mut size = 0;
    loop {
        if max_cond.is_some_and(|m| size > m) {
            break;
        }
        let neighbors: Vec<Vec<usize>> = (0..n).map(|a| (0..n).filter(|&b| adj[a][b]).collect()).collect();
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
            .filter(|&(a, b)| adj[a][b])
            .filter(|p| warm.get(p).is_none_or(|&k| size >= k))
            .filter(|&(a, b)| neighbors[a].len() > size || neighbors[b].len() > size)
            .collect();
        if pairs.is_empty() {
            let any_larger = (0..n).any(|a| neighbors[a].len() > size + 1);
            if !any_larger && warm.values().all(|&k| k <= size) {
                break;
            }
            size += 1;
            continue;
        }
        let found: Vec<Option<Vec<usize>>> = pairs
            .par_iter()
            .map(|&(a, b)| {
                let pa: Vec<usize> = neighbors[a].iter().copied().filter(|&x| x != b).collect();
                let pb: Vec<usize> = neighbors[b].iter().copied().filter(|&x| x != a).collect();
                find_sepset(tester, a, b, [&pa, &pb], size)
            })
            .collect::<Result<_, _>>()?;
        for (&(a, b), sep) in pairs.iter().zip(found) {
            if let Some(sep) = sep {
                debug!("removing {a} - {b} given {sep:?}");
                adj[a][b] = false;
                adj[b][a] = false;
                sepsets.insert((a, b), sep);
            }
        }
        size += 1;
    }
    Ok((adj, sepsets))
}

/// Vertices reachable from `a` along paths whose every interior vertex is a
/// collider or sits in a triangle with its path neighbours.
pub fn possible_dsep(pag: &Pag, a: usize) -> Vec<usize> {
    let n = pag.n();
    let mut seen_state = vec![vec![false; n]; n];
    let mut members = BTreeSet::new();
    let mut queue = VecDeque::new();
    for x in pag.neighbors(a) {
        members.insert(x);
        seen_state[a][x] = true;
        queue.push_back((a, x));
    }
    while let Some((p, c)) = queue.pop_front() {
        for x in pag.neighbors(c) {
            if x == p || x == a || seen_state[c][x] {
                continue;
            }
            let collider = pag.mark_at(p, c) == Some(EdgeMark::Arrow) && pag.mark_at(x, c) == Some(EdgeMark::Arrow);
            if collider || pag.adjacent(p, x) {
                seen_state[c][x] = true;
                members.insert(x);
                queue.push_back((c, x));
            }
        }
    }
    members.remove(&a);
    members.into_iter().collect()
}

/// Second adjacency pass conditioning on possible-d-sep sets. Returns whether
/// any edge was removed.
pub(crate) fn prune_possible_dsep(
    pag: &mut Pag,
    tester: &FisherZ,
    max_cond: Option<usize>,
) -> Result<bool, StatsError> {
    let mut removed = false;
    let pds: Vec<Vec<usize>> = (0..pag.n()).map(|a| possible_dsep(pag, a)).collect();
    for (a, b, _, _) in pag.edges() {
        let pa: Vec<usize> = pds[a].iter().copied().filter(|&x| x != b).collect();
        let pb: Vec<usize> = pds[b].iter().copied().filter(|&x| x != a).collect();
        let top = pa.len().max(pb.len()).min(max_cond.unwrap_or(usize::MAX));
        for size in 0..=top {
            if let Some(sep) = find_sepset(tester, a, b, [&pa, &pb], size)? {
                debug!("possible-d-sep removes {a} - {b} given {sep:?}");
                pag.remove_edge(a, b);
                pag.set_sepset(a, b, sep);
                removed = true;
                break;
            }
        }
    }
    Ok(removed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_are_lexicographic() {
        assert_eq!(combinations(&[4, 5, 6], 2), vec![vec![4, 5], vec![4, 6], vec![5, 6]]);
        assert_eq!(combinations(&[1, 2], 0), vec![Vec::<usize>::new()]);
        assert!(combinations(&[1], 2).is_empty());
    }

    #[test]
    fn combination_count_matches_binomial() {
        let items: Vec<usize> = (0..9).collect();
        for k in 0..=9 {
            let binom = (0..k).fold(1usize, |acc, i| acc * (9 - i) / (i + 1));
            assert_eq!(combinations(&items, k).len(), binom);
        }
    }
}
