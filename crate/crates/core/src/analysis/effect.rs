use crate::error::AnalysisError;

/// Cohen's d of `a` relative to `b` with the pooled standard deviation.
pub fn cohens_d(group_a: &[f64], group_b: &[f64]) -> Result<f64, AnalysisError> {
    let (na, nb) = (group_a.len(), group_b.len());
    if na < 2 || nb < 2 {
        return Err(AnalysisError::Domain(format!(
            "Cohen's d needs at least two observations per group, got {na} and {nb}"
        )));
    }
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let ss = |x: &[f64], m: f64| x.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    let (ma, mb) = (mean(group_a), mean(group_b));
    let pooled_var = (ss(group_a, ma) + ss(group_b, mb)) / (na + nb - 2) as f64;
    if !(pooled_var > 0.0) {
        return Err(AnalysisError::UndefinedEffect);
    }
    Ok((ma - mb) / pooled_var.sqrt())
}
