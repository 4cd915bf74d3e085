//! OLS with participant-clustered (CR1) standard errors.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::dataset::Frame;
use crate::error::AnalysisError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub response: String,
    /// `"constant"` first, then covariates in the order given.
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// CR1: `G/(G-1) * (N-1)/(N-k)` times the sandwich.
    pub std_errors: Vec<f64>,
    /// Unscaled sandwich.
    pub std_errors_cr0: Vec<f64>,
    /// Two-sided, t with `G - 1` degrees of freedom.
    pub p_values: Vec<f64>,
    pub n_obs: usize,
    pub n_clusters: usize,
    pub r_squared: f64,
    pub adj_r_squared: f64,
}

impl RegressionResult {
    pub fn coefficient(&self, name: &str) -> Option<(f64, f64)> {
        let i = self.names.iter().position(|n| n == name)?;
        Some((self.coefficients[i], self.std_errors[i]))
    }
}

/// Regresses `response` on a constant plus `covariates`, dropping rows with
/// any missing value, clustering on [`Frame::cluster_ids`].
pub fn ols_clustered<F: Frame + ?Sized>(
    frame: &F,
    response: &str,
    covariates: &[&str],
) -> Result<RegressionResult, AnalysisError> {
    let y_col = frame.column(response)?;
    let x_cols: Vec<Vec<Option<f64>>> = covariates.iter().map(|c| frame.column(c)).collect::<Result<_, _>>()?;
    let clusters = frame.cluster_ids();
    let keep: Vec<usize> = (0..frame.n_rows())
        .filter(|&i| y_col[i].is_some() && x_cols.iter().all(|c| c[i].is_some()))
        .collect();
    let y: Vec<f64> = keep.iter().map(|&i| y_col[i].unwrap_or_default()).collect();
    let mut columns = vec![vec![1.0; keep.len()]];
    for c in &x_cols {
        columns.push(keep.iter().map(|&i| c[i].unwrap_or_default()).collect());
    }
    let mut names = vec!["constant".to_string()];
    names.extend(covariates.iter().map(|c| c.to_string()));
    let groups: Vec<&str> = keep.iter().map(|&i| clusters[i].as_str()).collect();
    ols_clustered_matrix(response, &y, &columns, &names, &groups)
}

/// Core estimator on explicit columns (`columns[j][i]` is regressor `j` of
/// observation `i`).
pub fn ols_clustered_matrix(
    response: &str,
    y: &[f64],
    columns: &[Vec<f64>],
    names: &[String],
    clusters: &[&str],
) -> Result<RegressionResult, AnalysisError> {
    let n = y.len();
    let k = columns.len();
    if n == 0 {
        return Err(AnalysisError::Empty("no complete observations".into()));
    }
    if k == 0 || columns.len() != names.len() {
        return Err(AnalysisError::Domain(format!("{k} columns for {} names; need at least one", names.len())));
    }
    if n <= k {
        return Err(AnalysisError::Domain(format!("{n} observations for {k} coefficients")));
    }
    if let Some(bad) = collinear_columns(columns, names) {
        return Err(AnalysisError::RankDeficient(bad));
    }
    let x = DMatrix::from_fn(n, k, |i, j| columns[j][i]);
    let yv = DVector::from_column_slice(y);

    let qr = x.clone().qr();
    let r = qr.r();
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| AnalysisError::RankDeficient(names.to_vec()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| AnalysisError::RankDeficient(names.to_vec()))?;
    let bread = &r_inv * r_inv.transpose();

    let resid = &yv - &x * &beta;
    let mut scores: BTreeMap<&str, DVector<f64>> = BTreeMap::new();
    for i in 0..n {
        let entry = scores.entry(clusters[i]).or_insert_with(|| DVector::zeros(k));
        *entry += x.row(i).transpose() * resid[i];
    }
    let g = scores.len();
    let mut meat = DMatrix::zeros(k, k);
    for s in scores.values() {
        meat += s * s.transpose();
    }
    let cov0 = &bread * meat * &bread;
    let scale = if g > 1 {
        (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / (n as f64 - k as f64))
    } else {
        f64::NAN
    };
    let se0: Vec<f64> = (0..k).map(|j| cov0[(j, j)].max(0.0).sqrt()).collect();
    let se: Vec<f64> = se0.iter().map(|s| s * scale.sqrt()).collect();

    let dist = StudentsT::new(0.0, 1.0, (g.max(2) - 1) as f64).expect("positive degrees of freedom");
    let p_values = beta
        .iter()
        .zip(&se)
        .map(|(b, s)| {
            if *s > 0.0 {
                2.0 * dist.sf((b / s).abs())
            } else if *b == 0.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect();

    let mean_y = y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean_y).powi(2)).sum();
    let ss_res: f64 = resid.iter().map(|e| e * e).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / (n as f64 - k as f64);

    Ok(RegressionResult {
        response: response.to_string(),
        names: names.to_vec(),
        coefficients: beta.iter().copied().collect(),
        std_errors: se,
        std_errors_cr0: se0,
        p_values,
        n_obs: n,
        n_clusters: g,
        r_squared,
        adj_r_squared,
    })
}

/// Names of columns that are (numerically) linear combinations of earlier
/// ones, via modified Gram-Schmidt; `None` when the design has full rank.
fn collinear_columns(columns: &[Vec<f64>], names: &[String]) -> Option<Vec<String>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut bad = Vec::new();
    for (j, col) in columns.iter().enumerate() {
        let norm0 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut v = col.clone();
        for q in &basis {
            let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm0 == 0.0 || norm <= 1e-10 * norm0 {
            bad.push(names[j].clone());
        } else {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    (!bad.is_empty()).then_some(bad)
}
