//! Pearson, partial correlation and the Fisher-z conditional-independence test.

use serde::{Deserialize, Serialize};

use super::{normal, StatsError};
use crate::dataset::Dataset;

/// Pearson correlation matrix of all dataset columns. Zero-variance columns
/// are reported as uncorrelated with everything else.
pub fn correlation_matrix(ds: &Dataset) -> Vec<Vec<f64>> {
    let cols = ds.columns();
    let p = cols.len();
    let n = ds.sample_count() as f64;
    let centered: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / n;
            c.iter().map(|x| x - mean).collect()
        })
        .collect();
    let sd: Vec<f64> = centered.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut r = vec![vec![0.0; p]; p];
    for i in 0..p {
        r[i][i] = 1.0;
        for j in (i + 1)..p {
            let v = if sd[i] > 0.0 && sd[j] > 0.0 {
                let dot: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
                (dot / (sd[i] * sd[j])).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            r[i][j] = v;
            r[j][i] = v;
        }
    }
    r
}

/// Partial correlation of `x` and `y` given `cond`, read off the inverse of
/// the correlation submatrix over `[x, y, cond..]`.
pub fn partial_from_corr(corr: &[Vec<f64>], x: usize, y: usize, cond: &[usize]) -> Result<f64, StatsError> {
    if x == y {
        return Ok(1.0);
    }
    if cond.is_empty() {
        return Ok(corr[x][y]);
    }
    if cond.len() == 1 {
        let z = cond[0];
        let (rxy, rxz, ryz) = (corr[x][y], corr[x][z], corr[y][z]);
        let denom = ((1.0 - rxz * rxz) * (1.0 - ryz * ryz)).sqrt();
        if denom < 1e-12 {
            return Err(StatsError::SingularCovariance);
        }
        return Ok(((rxy - rxz * ryz) / denom).clamp(-1.0, 1.0));
    }
    let idx: Vec<usize> = [x, y].iter().chain(cond).copied().collect();
    let m: Vec<Vec<f64>> = idx.iter().map(|&a| idx.iter().map(|&b| corr[a][b]).collect()).collect();
    let inv = invert_spd(&m).ok_or(StatsError::SingularCovariance)?;
    let denom = (inv[0][0] * inv[1][1]).sqrt();
    if !denom.is_finite() || denom <= 0.0 {
        return Err(StatsError::SingularCovariance);
    }
    Ok((-inv[0][1] / denom).clamp(-1.0, 1.0))
}

/// Inverse of a symmetric positive-definite matrix via Cholesky; `None` when
/// a pivot collapses.
fn invert_spd(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= 1e-12 {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    // invert the lower-triangular factor, then form L^-T L^-1
    let mut linv = vec![vec![0.0; n]; n];
    for i in 0..n {
        linv[i][i] = 1.0 / l[i][i];
        for j in 0..i {
            let s: f64 = (j..i).map(|k| l[i][k] * linv[k][j]).sum();
            linv[i][j] = -s / l[i][i];
        }
    }
    let mut inv = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (i..n).map(|k| linv[k][i] * linv[k][j]).sum();
            inv[i][j] = s;
            inv[j][i] = s;
        }
    }
    Some(inv)
}

/// Partial correlation of two named columns given a conditioning set.
pub fn partial_correlation(ds: &Dataset, x: &str, y: &str, cond: &[&str]) -> Result<f64, StatsError> {
    let xi = ds.require(x)?;
    let yi = ds.require(y)?;
    let ci = cond.iter().map(|c| ds.require(c)).collect::<Result<Vec<_>, _>>()?;
    if ci.len() + 4 > ds.sample_count() {
        return Err(StatsError::InsufficientSamples { n: ds.sample_count(), cond: ci.len() });
    }
    partial_from_corr(&correlation_matrix(ds), xi, yi, &ci)
}

/// Outcome of one conditional-independence test. `x < y` and the
/// conditioning set is sorted, so the result is symmetric in its arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiTestResult {
    pub x: usize,
    pub y: usize,
    pub conditioning_set: Vec<usize>,
    pub statistic: f64,
    pub p_value: f64,
    pub independent: bool,
}

/// Fisher-z statistic and two-sided p-value for a sample (partial)
/// correlation `rho` estimated from `n` rows with `k` conditioning variables.
pub fn fisher_z(rho: f64, n: usize, k: usize) -> Result<(f64, f64), StatsError> {
    if n < k + 4 {
        return Err(StatsError::InsufficientSamples { n, cond: k });
    }
    if rho.abs() >= 1.0 - 1e-15 {
        return Ok((f64::INFINITY.copysign(rho), 0.0));
    }
    let z = ((n - k - 3) as f64).sqrt() * 0.5 * ((1.0 + rho) / (1.0 - rho)).ln();
    Ok((z, normal::two_sided_p(z)))
}

/// Fisher-z tester over a cached correlation matrix.
#[derive(Debug, Clone)]
pub struct FisherZ {
    corr: Vec<Vec<f64>>,
    n: usize,
    alpha: f64,
}

impl FisherZ {
    pub fn new(ds: &Dataset, alpha: f64) -> Result<Self, StatsError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(StatsError::BadAlpha(alpha));
        }
        Ok(FisherZ { corr: correlation_matrix(ds), n: ds.sample_count(), alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sample_count(&self) -> usize {
        self.n
    }

    pub fn test(&self, x: usize, y: usize, cond: &[usize]) -> Result<CiTestResult, StatsError> {
        let (x, y) = (x.min(y), x.max(y));
        let mut conditioning_set = cond.to_vec();
        conditioning_set.sort_unstable();
        if self.n < conditioning_set.len() + 4 {
            return Err(StatsError::InsufficientSamples { n: self.n, cond: conditioning_set.len() });
        }
        let rho = partial_from_corr(&self.corr, x, y, &conditioning_set)?;
        let (statistic, p_value) = fisher_z(rho, self.n, conditioning_set.len())?;
        Ok(CiTestResult { x, y, conditioning_set, statistic, p_value, independent: p_value > self.alpha })
    }
}

/// One-shot Fisher-z test on named columns.
pub fn fisher_z_test(ds: &Dataset, x: &str, y: &str, cond: &[&str], alpha: f64) -> Result<CiTestResult, StatsError> {
    let xi = ds.require(x)?;
    let yi = ds.require(y)?;
    let ci = cond.iter().map(|c| ds.require(c)).collect::<Result<Vec<_>, _>>()?;
    FisherZ::new(ds, alpha)?.test(xi, yi, &ci)
}
