#![allow(dead_code)]

/// All k-subsets of 0..n as bitmasks.
pub fn subsets(n: usize, k: usize) -> Vec<u32> {
    (0u32..1 << n).filter(|m| m.count_ones() as usize == k).collect()
}

/// Two-sided p by listing every equally likely outcome of the statistic.
pub fn two_sided_from_list(observed: f64, all: &[f64]) -> f64 {
    let total = all.len() as f64;
    let lower = all.iter().filter(|&&s| s <= observed + 1e-9).count() as f64 / total;
    let upper = all.iter().filter(|&&s| s >= observed - 1e-9).count() as f64 / total;
    (2.0 * lower.min(upper)).min(1.0)
}

/// U of the subset `mask` of ranks 1..=n taken as sample a.
pub fn u_of_mask(mask: u32, n: usize) -> f64 {
    let k = mask.count_ones() as usize;
    let rank_sum: usize = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).sum();
    (rank_sum - k * (k + 1) / 2) as f64
}

/// Brute-force Mann-Whitney p for ranks split by `mask`.
pub fn brute_mwu_p(mask: u32, n: usize) -> f64 {
    let k = mask.count_ones() as usize;
    let all: Vec<f64> = subsets(n, k).into_iter().map(|m| u_of_mask(m, n)).collect();
    two_sided_from_list(u_of_mask(mask, n), &all)
}

/// Brute-force signed-rank p; bit i of `signs` set means rank i+1 positive.
pub fn brute_wilcoxon_p(signs: u32, n: usize) -> f64 {
    let w = |s: u32| (0..n).filter(|i| s >> i & 1 == 1).map(|i| (i + 1) as f64).sum::<f64>();
    let all: Vec<f64> = (0u32..1 << n).map(w).collect();
    two_sided_from_list(w(signs), &all)
}
