use super::descriptive::quantile_linear;
use crate::error::AnalysisError;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Silverman's rule of thumb: `0.9 * min(sd, IQR/1.34) * n^(-1/5)`.
///
/// Falls back to the standard deviation when the IQR is zero.
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64, AnalysisError> {
    let n = values.len();
    if n < 2 {
        return Err(AnalysisError::Domain("kernel density needs at least two points".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_linear(&sorted, 0.75) - quantile_linear(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    if !(spread > 0.0) {
        return Err(AnalysisError::ZeroSpread);
    }
    Ok(0.9 * spread * (n as f64).powf(-0.2))
}

/// Gaussian kernel density of `values` evaluated at each point of `grid`.
pub fn kernel_density(
    values: &[f64],
    grid: &[f64],
    bandwidth: Option<f64>,
) -> Result<Vec<(f64, f64)>, AnalysisError> {
    if values.len() < 2 {
        return Err(AnalysisError::Domain("kernel density needs at least two points".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(AnalysisError::Domain("values must be finite".into()));
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(AnalysisError::Domain(format!("bandwidth must be positive, got {h}"))),
        None => silverman_bandwidth(values)?,
    };
    let norm = INV_SQRT_2PI / (h * values.len() as f64);
    Ok(grid
        .iter()
        .map(|&x| {
            let density: f64 = values
                .iter()
                .map(|v| {
                    let z = (x - v) / h;
                    (-0.5 * z * z).exp()
                })
                .sum();
            (x, density * norm)
        })
        .collect())
}

/// `points` evenly spaced values covering the data plus `pad` on both sides.
pub fn padded_grid(values: &[f64], pad: f64, points: usize) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min) - pad;
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + pad;
    let step = (hi - lo) / (points.max(2) - 1) as f64;
    (0..points.max(2)).map(|i| lo + step * i as f64).collect()
}
