//! Tukey's honestly significant difference with the Tukey-Kramer
//! correction for unequal group sizes.

use std::sync::OnceLock;

use serde::Serialize;

use super::anova::anova_oneway;
use super::descriptive::mean;
use super::special::{gauss_legendre, ln_gamma, normal_cdf, normal_pdf};
use super::{SampleGroup, StatsError};

const NODES: usize = 16;
const INNER_PANELS: usize = 8;
const OUTER_PANELS: usize = 16;
const MAX_GROUPS: usize = 100;
/// Beyond this many degrees of freedom the chi factor is treated as 1.
const DF_INFINITE: f64 = 1e5;

fn nodes() -> &'static (Vec<f64>, Vec<f64>) {
    static GL: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    GL.get_or_init(|| gauss_legendre(NODES))
}

/// Integrates `f` over [a, b] split into `panels` Gauss-Legendre panels.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let (x, w) = nodes();
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        let half = 0.5 * h;
        total += x.iter().zip(w).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half;
    }
    total
}

/// P(range of k standard normals ≤ w).
fn range_cdf(w: f64, k: usize) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let k_f = k as f64;
    let v = integrate(
        |z| normal_pdf(z) * (normal_cdf(z) - normal_cdf(z - w)).max(0.0).powi(k as i32 - 1),
        -8.0,
        8.0 + w.min(8.0),
        INNER_PANELS,
    );
    (k_f * v).clamp(0.0, 1.0)
}

fn check_range(k: usize, df: f64) -> Result<(), StatsError> {
    if !(2..=MAX_GROUPS).contains(&k) || !(df >= 1.0) {
        return Err(StatsError::UnsupportedRange { k, df });
    }
    Ok(())
}

/// CDF of the studentized range distribution with `k` groups and `df`
/// degrees of freedom.
pub fn ptukey(q: f64, k: usize, df: f64) -> Result<f64, StatsError> {
    check_range(k, df)?;
    if q <= 0.0 {
        return Ok(0.0);
    }
    if df >= DF_INFINITE {
        return Ok(range_cdf(q, k));
    }
    // s = sqrt(χ²_df / df) has density
    // 2 (df/2)^(df/2) / Γ(df/2) s^(df-1) exp(-df s² / 2).
    let half = df / 2.0;
    let ln_c = std::f64::consts::LN_2 + half * half.ln() - ln_gamma(half);
    let density = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        (ln_c + (df - 1.0) * s.ln() - half * s * s).exp()
    };
    let spread = (2.0 * df).sqrt();
    let lo = (1.0 - 12.0 / spread).max(0.0);
    let hi = ((df + 20.0 * spread + 60.0) / df).sqrt();
    let p = integrate(|s| density(s) * range_cdf(q * s, k), lo, hi, OUTER_PANELS);
    Ok(p.clamp(0.0, 1.0))
}

/// Quantile of the studentized range distribution, by bisection on
/// [`ptukey`].
pub fn qtukey(p: f64, k: usize, df: f64) -> Result<f64, StatsError> {
    check_range(k, df)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(StatsError::UnsupportedRange { k, df });
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while ptukey(hi, k, df)? < p {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            return Err(StatsError::UnsupportedRange { k, df });
        }
    }
    while hi - lo > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        if ptukey(mid, k, df)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TukeyRow {
    pub group_a: String,
    pub group_b: String,
    /// mean(b) − mean(a)
    pub diff: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_adj: f64,
    pub significant: bool,
}

/// All pairwise comparisons in input order (a before b).
pub fn tukey_hsd(groups: &[SampleGroup], alpha: f64) -> Result<Vec<TukeyRow>, StatsError> {
    let anova = anova_oneway(groups)?;
    let k = groups.len();
    let df = anova.df_within as f64;
    let q = qtukey(1.0 - alpha, k, df)?;
    let means: Vec<f64> = groups.iter().map(|g| mean(&g.values)).collect();
    let mut rows = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let (ni, nj) = (groups[i].values.len() as f64, groups[j].values.len() as f64);
            let se = (anova.ms_within / 2.0 * (1.0 / ni + 1.0 / nj)).sqrt();
            let diff = means[j] - means[i];
            let half = q * se;
            let p_adj = if se > 0.0 {
                1.0 - ptukey(diff.abs() / se, k, df)?
            } else if diff == 0.0 {
                1.0
            } else {
                0.0
            };
            let (ci_low, ci_high) = (diff - half, diff + half);
            rows.push(TukeyRow {
                group_a: groups[i].label.clone(),
                group_b: groups[j].label.clone(),
                diff,
                ci_low,
                ci_high,
                p_adj,
                significant: ci_low > 0.0 || ci_high < 0.0,
            });
        }
    }
    Ok(rows)
}
