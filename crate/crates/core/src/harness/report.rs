use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use super::eval::{evaluate_policies, sweep_static, EvalConfig, EvalResult, MethodSummary, Policy, SweepResult};
use super::{checkpoint_paths, create_dir, io_err, slug, write_file, HarnessError};
use crate::agent::Checkpoint;
use crate::control::ControllerSpec;
use crate::scenario::Scenario;
use crate::sim::write_trips;
use crate::stats::{
    anova_oneway, assumption_checks, kde, kde_grid, tukey_hsd, AnovaResult, AssumptionReport, SampleGroup, TukeyRow,
};

pub const ALPHA: f64 = 0.05;
const KDE_POINTS: usize = 256;
pub const METRICS: [&str; 3] = ["travel_time", "waiting_time", "speed"];

#[derive(Debug, Clone, Serialize)]
pub struct MetricStats {
    pub metric: String,
    pub anova: AnovaResult,
    pub assumptions: AssumptionReport,
    pub tukey: Vec<TukeyRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KdeTable {
    pub metric: String,
    pub methods: Vec<String>,
    pub grid: Vec<f64>,
    /// One density column per method.
    pub density: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct StatsReport {
    pub metrics: Vec<MetricStats>,
    pub kde: Vec<KdeTable>,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub scenario: String,
    pub config: EvalConfig,
    pub results: Vec<EvalResult>,
    pub sweep: Option<SweepResult>,
    pub stats: Option<StatsReport>,
    pub notices: Vec<String>,
}

impl CompareReport {
    pub fn summaries(&self) -> Vec<&MethodSummary> {
        self.results.iter().map(|r| &r.summary).collect()
    }

    pub fn result(&self, method: &str) -> Option<&EvalResult> {
        self.results.iter().find(|r| r.method == method)
    }
}

fn metric_samples(result: &EvalResult, metric: &str) -> Vec<f64> {
    result
        .samples()
        .iter()
        .map(|m| match metric {
            "travel_time" => m.travel,
            "waiting_time" => m.waiting,
            _ => m.speed,
        })
        .collect()
}

fn dqn_policies(path: &Path, scenario: &Scenario) -> Result<Vec<Policy>, HarnessError> {
    checkpoint_paths(path)?
        .iter()
        .map(|p| {
            let run = p
                .parent()
                .filter(|d| p.file_name().is_some_and(|f| f == "checkpoint.json") && d.file_name().is_some())
                .and_then(|d| d.file_name())
                .or_else(|| p.file_stem())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "checkpoint".into());
            Policy::from_checkpoint(&Checkpoint::load(p)?, scenario, format!("dqn:{run}"))
        })
        .collect()
}

/// Evaluates every method on the shared seeds and runs the statistical
/// comparison over per-rollout means.
pub fn compare(
    scenario: Arc<Scenario>,
    specs: &[ControllerSpec],
    config: &EvalConfig,
) -> Result<CompareReport, HarnessError> {
    if specs.is_empty() {
        return Err(HarnessError::Config("no methods to compare".into()));
    }
    let mut notices = Vec::new();
    let mut sweep = None;
    let mut results = Vec::new();
    for spec in specs {
        let (method, detail, policies) = match spec {
            ControllerSpec::StaticBest => {
                if sweep.is_none() {
                    sweep = Some(sweep_static(scenario.clone(), config)?);
                }
                let best = sweep.as_ref().unwrap().best;
                ("static:best".to_string(), format!("static:{best}"), vec![Policy::Static(best)])
            }
            ControllerSpec::Static(k) => (spec.to_string(), spec.to_string(), vec![Policy::Static(*k)]),
            ControllerSpec::Webster => (spec.to_string(), spec.to_string(), vec![Policy::Webster]),
            ControllerSpec::MaxPressure => (spec.to_string(), spec.to_string(), vec![Policy::MaxPressure]),
            ControllerSpec::Actuated => (spec.to_string(), spec.to_string(), vec![Policy::Actuated]),
            ControllerSpec::Dqn(path) => {
                let policies = dqn_policies(path, &scenario)?;
                let detail = format!("{} checkpoint(s)", policies.len());
                ("dqn".to_string(), detail, policies)
            }
        };
        if results.iter().any(|r: &EvalResult| r.method == method) {
            return Err(HarnessError::Config(format!("method `{method}` listed twice")));
        }
        results.push(evaluate_policies(scenario.clone(), &method, &detail, &policies, config));
    }
    let stats = if results.len() < 2 {
        notices.push("statistical tests need at least two methods; skipped".into());
        None
    } else if results.iter().any(|r| r.rollouts.len() < 2) {
        notices.push("statistical tests need at least two rollouts per method; skipped".into());
        None
    } else {
        Some(run_stats(&results, &mut notices)?)
    };
    Ok(CompareReport { scenario: scenario.name.clone(), config: config.clone(), results, sweep, stats, notices })
}

fn run_stats(results: &[EvalResult], notices: &mut Vec<String>) -> Result<StatsReport, HarnessError> {
    let mut report = StatsReport::default();
    for metric in METRICS {
        let groups: Vec<SampleGroup> =
            results.iter().map(|r| SampleGroup::new(r.method.clone(), metric_samples(r, metric))).collect();
        let anova = anova_oneway(&groups)?;
        let assumptions = assumption_checks(&groups);
        if assumptions.normality_questionable || assumptions.unequal_variances {
            notices.push(format!(
                "{metric}: ANOVA assumptions look violated (normality questionable: {}, variance ratio {:.2}); non-parametric tests are not run",
                assumptions.normality_questionable, assumptions.variance_ratio
            ));
        }
        let tukey = tukey_hsd(&groups, ALPHA)?;
        report.metrics.push(MetricStats { metric: metric.into(), anova, assumptions, tukey });

        let columns: Vec<&[f64]> = groups.iter().map(|g| g.values.as_slice()).collect();
        match kde_grid(&columns, KDE_POINTS) {
            Ok(grid) => {
                let density = columns.iter().map(|c| kde(c, &grid)).collect::<Result<Vec<_>, _>>()?;
                report.kde.push(KdeTable {
                    metric: metric.into(),
                    methods: groups.iter().map(|g| g.label.clone()).collect(),
                    grid,
                    density,
                });
            }
            Err(e) => notices.push(format!("{metric}: density estimate skipped ({e})")),
        }
    }
    Ok(report)
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub const SUMMARY_HEADER: [&str; 12] = [
    "method",
    "detail",
    "speed_mean",
    "speed_std",
    "waiting_mean",
    "waiting_std",
    "travel_mean",
    "travel_std",
    "rollouts",
    "trips",
    "teleported",
    "in_network",
];

pub fn summary_csv(summaries: &[&MethodSummary]) -> Vec<u8> {
    csv_bytes(
        &SUMMARY_HEADER,
        summaries.iter().map(|s| {
            vec![
                s.method.clone(),
                s.detail.clone(),
                s.speed_mean.to_string(),
                s.speed_std.to_string(),
                s.waiting_mean.to_string(),
                s.waiting_std.to_string(),
                s.travel_mean.to_string(),
                s.travel_std.to_string(),
                s.rollouts.to_string(),
                s.trips.to_string(),
                s.teleported.to_string(),
                s.in_network.to_string(),
            ]
        }),
    )
}

/// Writes the report under `root/report/<scenario>/` and returns that
/// directory.
pub fn write_compare_report(root: &Path, report: &CompareReport) -> Result<PathBuf, HarnessError> {
    let dir = root.join("report").join(slug(&report.scenario));
    write_report_files(&dir, report)?;
    Ok(dir)
}

/// Writes the report files directly into `dir`.
pub fn write_report_files(dir: &Path, report: &CompareReport) -> Result<(), HarnessError> {
    create_dir(dir)?;
    write_file(&dir.join("summary.csv"), summary_csv(&report.summaries()))?;

    let samples = report.results.iter().flat_map(|r| {
        r.rollouts.iter().map(move |ro| {
            let m = ro.means();
            vec![
                r.method.clone(),
                ro.policy.clone(),
                ro.seed.to_string(),
                m.trips.to_string(),
                m.travel.to_string(),
                m.waiting.to_string(),
                m.speed.to_string(),
                ro.teleported().to_string(),
                ro.in_network.to_string(),
            ]
        })
    });
    write_file(
        &dir.join("samples.csv"),
        csv_bytes(
            &["method", "policy", "seed", "trips", "travel_mean", "waiting_mean", "speed_mean", "teleported", "in_network"],
            samples,
        ),
    )?;

    for r in &report.results {
        let tdir = dir.join("trips").join(slug(&r.method));
        create_dir(&tdir)?;
        let multi = r.rollouts.iter().any(|ro| ro.policy != r.rollouts[0].policy);
        for ro in &r.rollouts {
            let name = if multi {
                let run = ro.policy.split_once(':').map_or(ro.policy.as_str(), |(_, b)| b);
                format!("{}_seed_{}.csv", slug(run), ro.seed)
            } else {
                format!("seed_{}.csv", ro.seed)
            };
            let path = tdir.join(name);
            let mut buf = Vec::new();
            write_trips(&mut buf, &ro.trips).map_err(io_err(&path))?;
            write_file(&path, buf)?;
        }
    }

    if let Some(sweep) = &report.sweep {
        let rows = sweep.rows.iter().enumerate().map(|(k, r)| {
            let s = &r.summary;
            vec![
                k.to_string(),
                s.travel_mean.to_string(),
                s.travel_std.to_string(),
                s.waiting_mean.to_string(),
                s.speed_mean.to_string(),
                (k == sweep.best).to_string(),
                sweep.tied_with_best.contains(&k).to_string(),
            ]
        });
        write_file(
            &dir.join("sweep_static.csv"),
            csv_bytes(&["plan", "travel_mean", "travel_std", "waiting_mean", "speed_mean", "best", "tied_with_best"], rows),
        )?;
    }

    if let Some(stats) = &report.stats {
        let anova: serde_json::Map<String, serde_json::Value> = stats
            .metrics
            .iter()
            .map(|m| {
                let v = serde_json::json!({ "anova": m.anova, "assumptions": m.assumptions });
                (m.metric.clone(), v)
            })
            .collect();
        let doc = serde_json::json!({ "alpha": ALPHA, "samples": "per-rollout means", "metrics": anova });
        write_file(&dir.join("anova.json"), serde_json::to_string_pretty(&doc).unwrap() + "\n")?;

        let rows = stats.metrics.iter().flat_map(|m| {
            m.tukey.iter().map(move |t| {
                vec![
                    m.metric.clone(),
                    format!("{} vs {}", t.group_a, t.group_b),
                    t.group_a.clone(),
                    t.group_b.clone(),
                    t.diff.to_string(),
                    t.ci_low.to_string(),
                    t.ci_high.to_string(),
                    t.p_adj.to_string(),
                    t.significant.to_string(),
                ]
            })
        });
        write_file(
            &dir.join("tukey.csv"),
            csv_bytes(
                &["metric", "pair", "group_a", "group_b", "diff", "ci_low", "ci_high", "p_adj", "significant"],
                rows,
            ),
        )?;

        for table in &stats.kde {
            let mut header = vec!["x"];
            header.extend(table.methods.iter().map(String::as_str));
            let rows = table.grid.iter().enumerate().map(|(i, x)| {
                let mut row = vec![x.to_string()];
                row.extend(table.density.iter().map(|d| d[i].to_string()));
                row
            });
            write_file(&dir.join(format!("kde_{}.csv", table.metric)), csv_bytes(&header, rows))?;
        }
    }

    let meta = serde_json::json!({
        "scenario": report.scenario,
        "eval_seeds": report.config.seeds,
        "warmup_cycles": report.config.warmup_cycles,
        "horizon_cycles": report.config.horizon_cycles,
        "methods": report.results.iter().map(|r| serde_json::json!({
            "method": r.method,
            "detail": r.detail,
            "policies": r.rollouts.iter().map(|ro| ro.policy.clone()).collect::<std::collections::BTreeSet<_>>(),
        })).collect::<Vec<_>>(),
        "notices": report.notices,
    });
    write_file(&dir.join("report.json"), serde_json::to_string_pretty(&meta).unwrap() + "\n")
}
