use serde::Serialize;

use crate::error::{LabError, Result};

use super::config::Metric;
use super::sweep::ConvergenceRecord;

/// Rows with `n` below this are pre-asymptotic and left out of rate fits.
pub const MIN_FIT_N: usize = 4;
pub const MIN_FIT_POINTS: usize = 4;

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// Least-squares line through `(log x, log y)`. Points with nonpositive or
/// non-finite `y` are dropped.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < MIN_FIT_POINTS {
        return Err(LabError::InsufficientData(format!(
            "{} usable points, need {MIN_FIT_POINTS}",
            logs.len()
        )));
    }
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(LabError::InsufficientData("all points share one abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(SlopeFit {
        slope,
        intercept,
        r2,
        points: logs.len(),
    })
}

/// Log-log fit of `metric` against `n` over rows with `n ≥ MIN_FIT_N`.
pub fn fit_slope(records: &[ConvergenceRecord], metric: Metric) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.n >= MIN_FIT_N)
        .filter_map(|r| r.metric(metric).map(|v| (r.n as f64, v)))
        .collect();
    fit_power_law(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(n: usize, trace: f64) -> ConvergenceRecord {
        ConvergenceRecord {
            n,
            trace: Some(trace),
            hs: None,
            relent: Some(0.0),
            j: None,
            lambda: None,
            tail: 0.0,
            ms: 0.0,
        }
    }

    #[test]
    fn exact_inverse_sqrt() {
        let rs: Vec<_> = [1, 2, 4, 8, 16, 32].iter().map(|&n| rec(n, 0.3 / (n as f64).sqrt())).collect();
        let f = fit_slope(&rs, Metric::Trace).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert_eq!(f.points, 4);
    }

    #[test]
    fn too_few_positive_values() {
        let rs: Vec<_> = [4, 8, 16, 32].iter().map(|&n| rec(n, 1.0 / n as f64)).collect();
        assert!(matches!(fit_slope(&rs, Metric::Relent), Err(LabError::InsufficientData(_))));
        assert!(matches!(fit_slope(&rs, Metric::Hs), Err(LabError::InsufficientData(_))));
        assert!(fit_slope(&rs, Metric::Trace).is_ok());
    }
}
