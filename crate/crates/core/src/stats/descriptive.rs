use serde::Serialize;

use super::{check_finite, SampleGroup, StatsError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Descriptive {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub std: f64,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean and sample standard deviation.
pub fn describe(values: &[f64]) -> Result<Descriptive, StatsError> {
    if values.len() < 2 {
        return Err(StatsError::TooFew { need: 2, got: values.len() });
    }
    check_finite(values)?;
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Ok(Descriptive { n: values.len(), mean: m, std: (ss / (values.len() - 1) as f64).sqrt() })
}

/// Linear-interpolation quantile of a sample (the common "type 7" rule).
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupShape {
    pub label: String,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Informal checks of the ANOVA assumptions. Nothing here changes the test
/// itself; violations are only flagged.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub groups: Vec<GroupShape>,
    /// Largest over smallest group variance.
    pub variance_ratio: f64,
    pub normality_questionable: bool,
    pub unequal_variances: bool,
}

pub const SKEW_LIMIT: f64 = 1.0;
pub const KURTOSIS_LIMIT: f64 = 2.0;
pub const VARIANCE_RATIO_LIMIT: f64 = 4.0;

pub fn assumption_checks(groups: &[SampleGroup]) -> AssumptionReport {
    let mut shapes = Vec::new();
    let mut vars = Vec::new();
    for g in groups {
        let n = g.values.len() as f64;
        let m = mean(&g.values);
        let m2 = g.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        let m3 = g.values.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
        let m4 = g.values.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
        let (skew, kurt) = if m2 > 0.0 { (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0) } else { (0.0, 0.0) };
        shapes.push(GroupShape { label: g.label.clone(), skewness: skew, excess_kurtosis: kurt });
        vars.push(m2 * n / (n - 1.0).max(1.0));
    }
    let max = vars.iter().copied().fold(0.0, f64::max);
    let min = vars.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = if min > 0.0 { max / min } else if max > 0.0 { f64::INFINITY } else { 1.0 };
    AssumptionReport {
        normality_questionable: shapes
            .iter()
            .any(|s| s.skewness.abs() > SKEW_LIMIT || s.excess_kurtosis.abs() > KURTOSIS_LIMIT),
        unequal_variances: ratio > VARIANCE_RATIO_LIMIT,
        groups: shapes,
        variance_ratio: ratio,
    }
}
