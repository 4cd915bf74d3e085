//! Mann-Whitney U and Wilcoxon signed-rank tests.
//!
//! Small tie-free samples get exact p-values from the full permutation
//! distribution (built by counting recursions rather than listing
//! permutations); otherwise a tie-corrected normal approximation is used.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::AnalysisError;

/// Largest combined size for which exact p-values are computed.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U of the first sample: pairs `(a, b)` with `a > b`, ties counting 1/2.
    pub u_a: f64,
    pub u_b: f64,
    pub p_two_sided: f64,
    pub method: PMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wilcoxon {
    /// Sum of the ranks of positive differences.
    pub w_plus: f64,
    /// Number of non-zero differences.
    pub n: usize,
    pub p_two_sided: f64,
    pub method: PMethod,
    /// All differences were zero.
    pub degenerate: bool,
}

/// Midranks (1-based) of `values` plus the tie-group sizes.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        if end - start > 1 {
            ties.push(end - start);
        }
        start = end;
    }
    (ranks, ties)
}

fn normal_two_sided(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

fn tie_term(ties: &[usize]) -> f64 {
    ties.iter().map(|&t| (t * t * t - t) as f64).sum()
}

/// Two-sided p from a discrete null given as counts indexed by statistic
/// value: `2 * min(P(S <= s), P(S >= s))`, capped at 1.
fn exact_two_sided(counts: &[f64], s: usize) -> f64 {
    let total: f64 = counts.iter().sum();
    let lower: f64 = counts[..=s].iter().sum::<f64>() / total;
    let upper: f64 = counts[s..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}

/// Null distribution of U for sample sizes `(m, n)`: `counts[u]` is the
/// number of rank assignments giving U = u.
fn mann_whitney_counts(m: usize, n: usize) -> Vec<f64> {
    // table[i][j][u] via f(i, j, u) = f(i-1, j, u-j) + f(i, j-1, u)
    let mut table = vec![vec![Vec::<f64>::new(); n + 1]; m + 1];
    for i in 0..=m {
        for j in 0..=n {
            let mut counts = vec![0.0; i * j + 1];
            if i == 0 || j == 0 {
                counts[0] = 1.0;
            } else {
                for (u, c) in table[i - 1][j].iter().enumerate() {
                    counts[u + j] += c;
                }
                for (u, c) in table[i][j - 1].iter().enumerate() {
                    counts[u] += c;
                }
            }
            table[i][j] = counts;
        }
    }
    std::mem::take(&mut table[m][n])
}

/// Null distribution of W+ for `n` untied non-zero differences.
fn signed_rank_counts(n: usize) -> Vec<f64> {
    let max = n * (n + 1) / 2;
    let mut counts = vec![0.0; max + 1];
    counts[0] = 1.0;
    for rank in 1..=n {
        for s in (rank..=max).rev() {
            counts[s] += counts[s - rank];
        }
    }
    counts
}

pub fn mann_whitney_u(sample_a: &[f64], sample_b: &[f64]) -> Result<MannWhitney, AnalysisError> {
    mann_whitney(sample_a, sample_b, false)
}

/// Same statistic, always with the normal approximation. Useful for
/// checking how far the approximation drifts on small samples.
pub fn mann_whitney_u_normal(sample_a: &[f64], sample_b: &[f64]) -> Result<MannWhitney, AnalysisError> {
    mann_whitney(sample_a, sample_b, true)
}

fn mann_whitney(sample_a: &[f64], sample_b: &[f64], force_normal: bool) -> Result<MannWhitney, AnalysisError> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(AnalysisError::Domain("Mann-Whitney U needs two non-empty samples".into()));
    }
    if sample_a.iter().chain(sample_b).any(|v| !v.is_finite()) {
        return Err(AnalysisError::Domain("samples must be finite".into()));
    }
    let (na, nb) = (sample_a.len(), sample_b.len());
    let pooled: Vec<f64> = sample_a.iter().chain(sample_b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..na].iter().sum();
    let u_a = rank_sum_a - (na * (na + 1)) as f64 / 2.0;
    let u_b = (na * nb) as f64 - u_a;

    if !force_normal && na + nb <= EXACT_MAX_N && ties.is_empty() {
        let counts = mann_whitney_counts(na, nb);
        return Ok(MannWhitney {
            u_a,
            u_b,
            p_two_sided: exact_two_sided(&counts, u_a.round() as usize),
            method: PMethod::Exact,
        });
    }

    let n = (na + nb) as f64;
    let mean = (na * nb) as f64 / 2.0;
    let var = (na * nb) as f64 / 12.0 * ((n + 1.0) - tie_term(&ties) / (n * (n - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u_a - mean).abs() - 0.5).max(0.0) / var.sqrt();
        normal_two_sided(z)
    };
    Ok(MannWhitney {
        u_a,
        u_b,
        p_two_sided: p,
        method: PMethod::Normal,
    })
}

pub fn wilcoxon_signed_rank(paired_diffs: &[f64]) -> Result<Wilcoxon, AnalysisError> {
    if paired_diffs.iter().any(|v| !v.is_finite()) {
        return Err(AnalysisError::Domain("differences must be finite".into()));
    }
    let nonzero: Vec<f64> = paired_diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return Ok(Wilcoxon {
            w_plus: 0.0,
            n: 0,
            p_two_sided: 1.0,
            method: PMethod::Exact,
            degenerate: true,
        });
    }
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = midranks(&abs);
    let w_plus: f64 = nonzero
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();

    if n <= EXACT_MAX_N && ties.is_empty() {
        let counts = signed_rank_counts(n);
        return Ok(Wilcoxon {
            w_plus,
            n,
            p_two_sided: exact_two_sided(&counts, w_plus.round() as usize),
            method: PMethod::Exact,
            degenerate: false,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term(&ties) / 48.0;
    let p = if var <= 0.0 {
        1.0
    } else {
        normal_two_sided((w_plus - mean) / var.sqrt())
    };
    Ok(Wilcoxon {
        w_plus,
        n,
        p_two_sided: p,
        method: PMethod::Normal,
        degenerate: false,
    })
}
