use serde::Serialize;

use super::descriptive::mean;
use super::special::f_sf;
use super::{check_finite, SampleGroup, StatsError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaResult {
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p: f64,
    pub ss_between: f64,
    pub ss_within: f64,
    pub ms_between: f64,
    pub ms_within: f64,
    /// Set when every group has zero spread, making F undefined or infinite.
    pub degenerate: bool,
}

pub fn anova_oneway(groups: &[SampleGroup]) -> Result<AnovaResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups);
    }
    for g in groups {
        if g.values.len() < 2 {
            return Err(StatsError::TooFew { need: 2, got: g.values.len() });
        }
        check_finite(&g.values)?;
    }
    let n: usize = groups.iter().map(|g| g.values.len()).sum();
    let grand = groups.iter().flat_map(|g| g.values.iter()).sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let m = mean(&g.values);
        ss_between += g.values.len() as f64 * (m - grand).powi(2);
        ss_within += g.values.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let df_between = groups.len() - 1;
    let df_within = n - groups.len();
    let ms_between = ss_between / df_between as f64;
    let ms_within = ss_within / df_within as f64;
    // Relative to the data scale, so that rounding noise in constant groups
    // does not produce a huge F.
    let scale = groups.iter().flat_map(|g| g.values.iter()).map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    let tiny = 1e-24 * scale;
    let (f, p, degenerate) = if ss_within <= tiny {
        if ss_between <= tiny {
            (0.0, 1.0, true)
        } else {
            (f64::INFINITY, 0.0, true)
        }
    } else if ss_between <= tiny {
        (0.0, 1.0, false)
    } else {
        let f = ms_between / ms_within;
        (f, f_sf(f, df_between as f64, df_within as f64), false)
    };
    Ok(AnovaResult { f, df_between, df_within, p, ss_between, ss_within, ms_between, ms_within, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn groups(data: &[&[f64]]) -> Vec<SampleGroup> {
        data.iter().enumerate().map(|(i, v)| SampleGroup::new(format!("g{i}"), v.to_vec())).collect()
    }

    #[test]
    fn hand_computed_fixture() {
        let r = anova_oneway(&groups(&[&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0], &[3.0, 4.0, 5.0]])).unwrap();
        // Means 2, 3, 4 around 3: SSB = 3 (1 + 0 + 1) = 6; SSW = 3 × 2 = 6.
        assert_eq!((r.ss_between, r.ss_within), (6.0, 6.0));
        assert_eq!((r.df_between, r.df_within), (2, 6));
        assert!((r.f - 3.0).abs() < 1e-12);
        // d1 = 2 closed form: (1 + 2 F / d2)^(-d2/2) = 2^-3.
        assert!((r.p - 0.125).abs() < 1e-12);
    }

    #[test]
    fn identical_groups() {
        let r = anova_oneway(&groups(&[&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]])).unwrap();
        assert_eq!((r.f, r.p), (0.0, 1.0));
        assert!(!r.degenerate);
    }

    #[test]
    fn separated_groups() {
        let a: Vec<f64> = (0..10).map(|i| 0.1 * ((i % 3) as f64 - 1.0)).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 100.0).collect();
        let r = anova_oneway(&groups(&[&a, &b])).unwrap();
        assert!(r.p < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        let r = anova_oneway(&groups(&[&[1.0, 1.0], &[2.0, 2.0]])).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p, 0.0);
        let r = anova_oneway(&groups(&[&[1.0, 1.0], &[1.0, 1.0]])).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p, 1.0);
        assert_eq!(anova_oneway(&groups(&[&[1.0, 2.0]])), Err(StatsError::TooFewGroups));
        assert_eq!(anova_oneway(&groups(&[&[1.0], &[1.0, 2.0]])), Err(StatsError::TooFew { need: 2, got: 1 }));
    }
}
