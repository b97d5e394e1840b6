//! Descriptive statistics, one-way ANOVA, Tukey HSD and kernel density
//! estimates. Everything here is a pure function of its inputs.

mod anova;
mod descriptive;
mod kde;
pub mod special;
mod tukey;

pub use anova::{anova_oneway, AnovaResult};
pub use descriptive::{assumption_checks, describe, quantile, AssumptionReport, Descriptive, GroupShape};
pub use kde::{kde, kde_grid, silverman_bandwidth};
pub use tukey::{ptukey, qtukey, tukey_hsd, TukeyRow};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least {need} values, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("need at least two groups")]
    TooFewGroups,
    #[error("non-finite value in sample")]
    NonFinite,
    #[error("sample has zero variance")]
    ZeroVariance,
    #[error("studentized range unsupported for k = {k}, df = {df}")]
    UnsupportedRange { k: usize, df: f64 },
}

/// A labelled sample, e.g. per-rollout mean travel times of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGroup {
    pub label: String,
    pub values: Vec<f64>,
}

impl SampleGroup {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        Self { label: label.into(), values }
    }
}

fn check_finite(values: &[f64]) -> Result<(), StatsError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}
