//! Scaling exponents by least squares on log-log points.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// A fitted power law `metric ≈ e^intercept · n^slope`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square residual in log space.
    pub residual: f64,
    /// 95% confidence interval of the slope.
    pub ci95: (f64, f64),
    /// Distinct sizes used.
    pub points: usize,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FitError {
    #[error("need at least 3 distinct n, got {0}")]
    TooFewSizes(usize),
    #[error("metric must be positive, got {0} at n = {1}")]
    NonPositive(f64, usize),
}

/// Fits `log metric = slope · log n + intercept` over `(n, metric)` rows. Rows with equal `n`
/// (different seeds) are averaged first.
pub fn fit_exponent(rows: &[(usize, f64)]) -> Result<Fit, FitError> {
    let mut by_n: std::collections::BTreeMap<usize, (f64, usize)> = Default::default();
    for &(n, y) in rows {
        if y <= 0.0 || y.is_nan() {
            return Err(FitError::NonPositive(y, n));
        }
        let e = by_n.entry(n).or_insert((0.0, 0));
        e.0 += y;
        e.1 += 1;
    }
    if by_n.len() < 3 {
        return Err(FitError::TooFewSizes(by_n.len()));
    }
    let pts: Vec<(f64, f64)> = by_n.iter().map(|(&n, &(s, c))| ((n as f64).ln(), (s / c as f64).ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let dof = k - 2.0;
    let se = (sse / dof / sxx).sqrt();
    let q = StudentsT::new(0.0, 1.0, dof).expect("at least one degree of freedom").inverse_cdf(0.975);
    let ci95 = (slope - q * se, slope + q * se);
    Ok(Fit { slope, intercept, residual: (sse / k).sqrt(), ci95, points: pts.len() })
}
