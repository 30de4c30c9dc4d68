//! Minimum-entropy latent construction for a pair of discrete variables.
//!
//! Given the empirical joint `p(x, y)`, a latent `Z` independent of `x` with
//! `y = f(x, Z)` is a coupling of the conditional rows `p(y | x = a)`. The
//! entropy of the coupling is `H(Z)`. Finding the minimum is NP-hard; the
//! greedy rule below repeatedly pairs the largest remaining mass of every
//! row, which is exact on two-point rows and within one bit in general.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::entropy::entropy_bits;
use super::StatsError;
use crate::dataset::Dataset;

const MASS_EPS: f64 = 1e-15;

/// One atom of the coupling: `Z = z` carries `mass` and selects, for every
/// row `a`, the column `choice[a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingAtom {
    pub mass: f64,
    pub choice: Vec<usize>,
}

/// Greedy coupling of the probability vectors in `rows`.
pub fn greedy_coupling(rows: &[Vec<f64>]) -> Vec<CouplingAtom> {
    let mut rest: Vec<Vec<f64>> = rows.to_vec();
    let mut atoms = Vec::new();
    loop {
        let argmax: Vec<usize> = rest
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                    .0
            })
            .collect();
        let mass = rest
            .iter()
            .zip(&argmax)
            .map(|(r, &i)| r[i])
            .fold(f64::INFINITY, f64::min);
        if !(mass > MASS_EPS) {
            break;
        }
        for (r, &i) in rest.iter_mut().zip(&argmax) {
            r[i] -= mass;
            if r[i] < MASS_EPS {
                r[i] = 0.0;
            }
        }
        atoms.push(CouplingAtom { mass, choice: argmax });
    }
    atoms
}

/// Result of [`min_entropy_latent`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentCoupling {
    pub latent_entropy_bits: f64,
    /// Observed levels of `x` (row order of the coupling).
    pub x_levels: Vec<i64>,
    /// Observed levels of `y`.
    pub y_levels: Vec<i64>,
    /// Marginal `p(x)` aligned with `x_levels`.
    pub x_marginal: Vec<f64>,
    pub atoms: Vec<CouplingAtom>,
}

impl LatentCoupling {
    /// `q(x = x_levels[a], y = y_levels[b], Z = z)`.
    pub fn q(&self, a: usize, b: usize, z: usize) -> f64 {
        let atom = &self.atoms[z];
        if atom.choice.get(a) == Some(&b) {
            self.x_marginal[a] * atom.mass
        } else {
            0.0
        }
    }
}

/// Conditional rows `p(y | x = a)` from a joint probability table `joint[a][b]`.
pub fn conditional_rows(joint: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let marginal: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let rows = joint
        .iter()
        .zip(&marginal)
        .map(|(r, &m)| r.iter().map(|p| if m > 0.0 { p / m } else { 0.0 }).collect())
        .collect();
    (marginal, rows)
}

/// Greedy latent entropy straight from a joint table (rows = x, columns = y).
pub fn latent_entropy_from_joint(joint: &[Vec<f64>]) -> f64 {
    let (_, rows) = conditional_rows(joint);
    let x_support = joint.iter().filter(|r| r.iter().sum::<f64>() > 0.0).count();
    let y_support = (0..joint.first().map_or(0, Vec::len))
        .filter(|&b| joint.iter().any(|r| r[b] > 0.0))
        .count();
    if x_support < 2 || y_support < 2 {
        return 0.0;
    }
    let rows: Vec<Vec<f64>> = rows.into_iter().filter(|r| r.iter().sum::<f64>() > 0.0).collect();
    entropy_bits(greedy_coupling(&rows).iter().map(|a| a.mass))
}

/// Builds the latent `Z` for discrete columns `x` and `y` and returns `H(Z)`
/// together with the joint `q(x, y, Z)`.
pub fn min_entropy_latent(ds: &Dataset, x: usize, y: usize) -> Result<LatentCoupling, StatsError> {
    let counts = super::entropy::joint_counts(ds, &[x, y])?;
    let mut by_x: BTreeMap<i64, BTreeMap<i64, usize>> = BTreeMap::new();
    let mut y_set = std::collections::BTreeSet::new();
    for (key, c) in counts {
        by_x.entry(key[0]).or_default().insert(key[1], c);
        y_set.insert(key[1]);
    }
    let x_levels: Vec<i64> = by_x.keys().copied().collect();
    let y_levels: Vec<i64> = y_set.into_iter().collect();
    let n = ds.sample_count() as f64;
    let x_marginal: Vec<f64> = by_x.values().map(|m| m.values().sum::<usize>() as f64 / n).collect();
    let rows: Vec<Vec<f64>> = by_x
        .values()
        .map(|m| {
            let tot: usize = m.values().sum();
            y_levels
                .iter()
                .map(|yv| *m.get(yv).unwrap_or(&0) as f64 / tot as f64)
                .collect()
        })
        .collect();
    let atoms = greedy_coupling(&rows);
    // a constant variable needs no confounding mass; the atoms still carry the
    // joint so q stays marginally consistent
    let latent_entropy_bits = if x_levels.len() < 2 || y_levels.len() < 2 {
        0.0
    } else {
        entropy_bits(atoms.iter().map(|a| a.mass))
    };
    Ok(LatentCoupling { latent_entropy_bits, x_levels, y_levels, x_marginal, atoms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Kind, Role, VariableMeta};

    fn from_counts(table: &[Vec<usize>]) -> Dataset {
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for (a, row) in table.iter().enumerate() {
            for (b, &c) in row.iter().enumerate() {
                for _ in 0..c {
                    xs.push(a as f64);
                    ys.push(b as f64);
                }
            }
        }
        let vars = vec![
            VariableMeta::new("x", Role::NonManipulableMetric, Kind::Discrete),
            VariableMeta::new("y", Role::NonManipulableMetric, Kind::Discrete),
        ];
        Dataset::new(vars, vec![xs, ys]).unwrap()
    }

    /// Exhaustive search over the one-parameter family of couplings of two
    /// binary rows (p, 1-p) and (q, 1-q): mass t on (0, 0).
    fn brute_force_two_binary(p: f64, q: f64) -> f64 {
        let lo = (p + q - 1.0).max(0.0);
        let hi = p.min(q);
        let steps = 20_000;
        (0..=steps)
            .map(|i| {
                let t = lo + (hi - lo) * i as f64 / steps as f64;
                entropy_bits([t, p - t, q - t, 1.0 - p - q + t])
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn permutation_joint_needs_no_latent() {
        let ds = from_counts(&[vec![0, 50, 0], vec![30, 0, 0], vec![0, 0, 20]]);
        let c = min_entropy_latent(&ds, 0, 1).unwrap();
        assert_eq!(c.latent_entropy_bits, 0.0);
    }

    #[test]
    fn independent_uniform_bits_match_brute_force() {
        let ds = from_counts(&[vec![250, 250], vec![250, 250]]);
        let c = min_entropy_latent(&ds, 0, 1).unwrap();
        assert!((c.latent_entropy_bits - brute_force_two_binary(0.5, 0.5)).abs() < 1e-9);
        assert!((c.latent_entropy_bits - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_binary_rows_optimal() {
        for &(p, q) in &[(0.6, 0.3), (0.9, 0.6), (0.2, 0.75), (0.55, 0.45), (0.1, 0.1)] {
            let h = entropy_bits(greedy_coupling(&[vec![p, 1.0 - p], vec![q, 1.0 - q]]).iter().map(|a| a.mass));
            assert!((h - brute_force_two_binary(p, q)).abs() < 1e-6, "p={p} q={q} h={h}");
        }
    }

    #[test]
    fn xor_noise_bounded_by_joint_entropy() {
        // x uniform, y = x xor n with P(n = 1) = 0.1
        let ds = from_counts(&[vec![450, 50], vec![50, 450]]);
        let c = min_entropy_latent(&ds, 0, 1).unwrap();
        let hxy = super::super::entropy::entropy(&ds, &[0, 1]).unwrap().value_bits;
        assert!(c.latent_entropy_bits <= hxy + 1e-12);
    }

    #[test]
    fn constant_variable_is_degenerate() {
        let ds = from_counts(&[vec![10, 20, 30]]);
        assert_eq!(min_entropy_latent(&ds, 0, 1).unwrap().latent_entropy_bits, 0.0);
    }

    proptest::proptest! {
        #[test]
        fn marginals_reproduced(table in proptest::collection::vec(proptest::collection::vec(0usize..40, 3), 2..5)) {
            let ds = from_counts(&table);
            let c = min_entropy_latent(&ds, 0, 1).unwrap();
            let n = ds.sample_count() as f64;
            let counts = super::super::entropy::joint_counts(&ds, &[0, 1]).unwrap();
            for (a, &xv) in c.x_levels.iter().enumerate() {
                for (b, &yv) in c.y_levels.iter().enumerate() {
                    let q: f64 = (0..c.atoms.len()).map(|z| c.q(a, b, z)).sum();
                    let p = *counts.get(&vec![xv, yv]).unwrap_or(&0) as f64 / n;
                    proptest::prop_assert!((q - p).abs() < 1e-12, "q={} p={}", q, p);
                }
            }
        }
    }
}
