//! `atsc`: command-line front end for the signal-control laboratory.
//!
//! Exit codes: 0 ok, 2 usage, 3 validation, 4 runtime.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use atsc::control::ControllerSpec;
use atsc::harness::{
    self, calibrate_demand, check_disjoint, compare, eval_seeds, run_seed, slug, sweep_static, train_many,
    write_compare_report, write_report_files, write_train_run, CalibrateConfig, CompareReport, EvalConfig,
    HarnessError, MethodSummary, TrainOutcome, TrainRunConfig,
};
use atsc::scenario::{Scenario, BUNDLED};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "atsc", version, about = "Adaptive traffic-signal control laboratory")]
struct Cli {
    /// Base seed for training runs.
    #[arg(long, global = true, default_value_t = 1000)]
    seed: u64,
    /// Output root directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct EvalArgs {
    /// Number of evaluation seeds (1..=M).
    #[arg(long, default_value_t = 10)]
    eval_seeds: usize,
    #[arg(long, default_value_t = 50)]
    warmup_cycles: u64,
    #[arg(long, default_value_t = 500)]
    horizon_cycles: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a scenario and print its route table.
    Validate {
        /// Scenario file or bundled scenario name.
        scenario: String,
        /// Dump every weighted route.
        #[arg(long)]
        routes: bool,
    },
    /// Train DQN agents in independent seeded runs.
    Train {
        scenario: String,
        /// Number of independent runs.
        #[arg(long, visible_alias = "seeds", default_value_t = 10)]
        runs: usize,
        /// Shorthand for the full 30-run protocol.
        #[arg(long, conflicts_with = "runs")]
        full: bool,
        #[arg(long, default_value_t = 1000)]
        cycles: u64,
        #[arg(long, default_value_t = harness::DEFAULT_MAX_TELEPORT_RATE)]
        max_teleport_rate: f64,
        /// Evaluation seeds that training seeds must avoid.
        #[arg(long, default_value_t = 30)]
        reserve_eval_seeds: usize,
    },
    /// Evaluate one controller over the evaluation seeds.
    Evaluate {
        scenario: String,
        /// static:<k>, static:best, webster, maxpressure, actuated, dqn or dqn:<path>.
        #[arg(long)]
        method: String,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Evaluate several controllers on shared seeds and compare them statistically.
    Compare {
        scenario: String,
        /// Comma-separated controller list.
        #[arg(long, value_delimiter = ',', default_value = "static:best,webster,maxpressure,actuated,dqn")]
        methods: Vec<String>,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Evaluate all seven static plans.
    SweepStatic {
        scenario: String,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Find the demand scale at which the 50/50 plan starts to congest.
    Calibrate {
        scenario: String,
        /// Queue fraction of capacity treated as congestion.
        #[arg(long, default_value_t = 0.5)]
        target_fraction: f64,
        #[arg(long, default_value_t = 60)]
        cycles: u64,
        /// Calibration seeds (1..=K).
        #[arg(long, default_value_t = 3)]
        seeds: usize,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Validation(_) => 3,
            Self::Runtime(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Validation(m) | Self::Runtime(m) => m,
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Scenario(_) | HarnessError::Checkpoint(_) => Self::Validation(e.to_string()),
            HarnessError::Config(_) => Self::Usage(e.to_string()),
            _ => Self::Runtime(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

/// A path that exists is loaded as a file; anything else must name a bundled
/// scenario.
fn resolve_scenario(arg: &str) -> Result<Arc<Scenario>, CliError> {
    let path = Path::new(arg);
    let s = if path.exists() {
        Scenario::load(path)
    } else if BUNDLED.contains(&arg) {
        Scenario::bundled(arg)
    } else {
        return Err(CliError::Validation(format!(
            "`{arg}` is neither a file nor a bundled scenario ({})",
            BUNDLED.join(", ")
        )));
    };
    s.map(Arc::new).map_err(|e| CliError::Validation(e.to_string()))
}

fn parse_method(cli: &Cli, scenario: &Scenario, s: &str) -> Result<ControllerSpec, CliError> {
    if s == "dqn" {
        return Ok(ControllerSpec::Dqn(train_dir(cli, scenario)));
    }
    s.parse().map_err(CliError::Usage)
}

fn train_dir(cli: &Cli, scenario: &Scenario) -> PathBuf {
    cli.out.join("train").join(slug(&scenario.name))
}

fn eval_config(args: &EvalArgs) -> Result<EvalConfig, CliError> {
    if args.eval_seeds == 0 || args.horizon_cycles == 0 {
        return Err(CliError::Usage("--eval-seeds and --horizon-cycles must be positive".into()));
    }
    Ok(EvalConfig {
        seeds: eval_seeds(args.eval_seeds),
        warmup_cycles: args.warmup_cycles,
        horizon_cycles: args.horizon_cycles,
    })
}

struct Printer {
    json: bool,
}

impl Printer {
    /// Resolved configuration comes first so every invocation can be replayed.
    fn config(&self, command: &str, config: &Value) {
        if !self.json {
            println!("{command} config: {config}");
        }
    }

    fn finish(&self, command: &str, config: Value, result: Value, human: impl FnOnce()) {
        if self.json {
            let doc = json!({ "command": command, "config": config, "result": result });
            println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
        } else {
            human();
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let p = Printer { json: cli.json };
    match &cli.command {
        Command::Validate { scenario, routes } => {
            let s = resolve_scenario(scenario)?;
            let config = json!({ "scenario": s.name, "routes": routes });
            p.config("validate", &config);
            let table: Vec<Value> = s
                .routes
                .iter()
                .map(|r| {
                    json!({
                        "entry": s.network.edges[r.entry()].id,
                        "turns": r.turns,
                        "weight": r.weight,
                        "edges": r.edges.iter().map(|&e| s.network.edges[e].id.clone()).collect::<Vec<_>>(),
                    })
                })
                .collect();
            let mut result = json!({
                "valid": true,
                "nodes": s.network.nodes.len(),
                "edges": s.network.edges.len(),
                "intersections": s.network.intersections.len(),
                "route_count": s.routes.len(),
            });
            if *routes {
                result["routes"] = Value::Array(table);
            }
            p.finish("validate", config, result, || {
                println!("ok: {s}");
                if *routes {
                    print!("{}", s.route_table());
                }
            });
        }
        Command::Train { scenario, runs, full, cycles, max_teleport_rate, reserve_eval_seeds } => {
            let runs = if *full { 30 } else { *runs };
            if runs == 0 {
                return Err(CliError::Usage("--runs must be at least 1".into()));
            }
            let s = resolve_scenario(scenario)?;
            let template = TrainRunConfig {
                max_teleport_rate: *max_teleport_rate,
                ..TrainRunConfig::new(&s.name, 0, *cycles)
            };
            let seeds: Vec<u64> = (0..runs).map(|i| run_seed(cli.seed, i)).collect();
            check_disjoint(&seeds, &eval_seeds(*reserve_eval_seeds))?;
            let dir = train_dir(cli, &s);
            let config = json!({
                "scenario": s.name,
                "runs": runs,
                "base_seed": cli.seed,
                "run_seeds": seeds,
                "cycles": cycles,
                "agent": template.agent,
                "max_teleport_rate": max_teleport_rate,
                "out": dir.display().to_string(),
            });
            p.config("train", &config);
            let outcomes = train_many(s.clone(), &template, cli.seed, runs);
            let mut rows = Vec::new();
            let mut failures = Vec::new();
            for (i, outcome) in outcomes.into_iter().enumerate() {
                let run_id = format!("run_{i:03}");
                match outcome {
                    Ok(o) => {
                        write_train_run(&dir.join(&run_id), &o)?;
                        rows.push(train_row(&o));
                    }
                    Err(e) => failures.push(json!({ "run_id": run_id, "error": e.to_string() })),
                }
            }
            let result = json!({ "runs": rows, "failed": failures });
            p.finish("train", config, result, || {
                println!("run\tseed\tmean_action_last50\treward_first100\treward_last100");
                for r in &rows {
                    println!(
                        "{}\t{}\t{:.3}\t{:.4}\t{:.4}",
                        r["run_id"].as_str().unwrap(),
                        r["seed"],
                        r["mean_action_last50"].as_f64().unwrap_or(f64::NAN),
                        r["reward_first100"].as_f64().unwrap_or(f64::NAN),
                        r["reward_last100"].as_f64().unwrap_or(f64::NAN),
                    );
                }
                for f in &failures {
                    println!("{} failed: {}", f["run_id"].as_str().unwrap(), f["error"].as_str().unwrap());
                }
                println!("artifacts: {}", dir.display());
            });
            if !failures.is_empty() {
                return Err(CliError::Runtime(format!("{} of {runs} training runs failed", failures.len())));
            }
        }
        Command::Evaluate { scenario, method, eval } => {
            let s = resolve_scenario(scenario)?;
            let spec = parse_method(cli, &s, method)?;
            let cfg = eval_config(eval)?;
            let dir = cli.out.join("eval").join(slug(&s.name)).join(slug(method));
            let config = json!({ "scenario": s.name, "method": spec.to_string(), "eval": cfg, "out": dir.display().to_string() });
            p.config("evaluate", &config);
            let report = compare(s, &[spec], &cfg)?;
            write_report_files(&dir, &report)?;
            finish_report(&p, "evaluate", config, &report);
        }
        Command::Compare { scenario, methods, eval } => {
            let s = resolve_scenario(scenario)?;
            let specs = methods.iter().map(|m| parse_method(cli, &s, m)).collect::<Result<Vec<_>, _>>()?;
            let cfg = eval_config(eval)?;
            let config = json!({
                "scenario": s.name,
                "methods": specs.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
                "eval": cfg,
                "out": cli.out.join("report").join(slug(&s.name)).display().to_string(),
            });
            p.config("compare", &config);
            let report = compare(s, &specs, &cfg)?;
            write_compare_report(&cli.out, &report)?;
            finish_report(&p, "compare", config, &report);
        }
        Command::SweepStatic { scenario, eval } => {
            let s = resolve_scenario(scenario)?;
            let cfg = eval_config(eval)?;
            let dir = cli.out.join("sweep").join(slug(&s.name));
            let config = json!({ "scenario": s.name, "eval": cfg, "out": dir.display().to_string() });
            p.config("sweep-static", &config);
            let sweep = sweep_static(s, &cfg)?;
            let summaries: Vec<&MethodSummary> = sweep.rows.iter().map(|r| &r.summary).collect();
            std::fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
            let path = dir.join("summary.csv");
            std::fs::write(&path, harness::summary_csv(&summaries))
                .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            let result = json!({ "plans": summaries, "best": sweep.best, "tied_with_best": sweep.tied_with_best });
            p.finish("sweep-static", config, result, || {
                print_summaries(&summaries);
                println!("best plan: {} (tied: {:?})", sweep.best, sweep.tied_with_best);
            });
        }
        Command::Calibrate { scenario, target_fraction, cycles, seeds } => {
            let s = resolve_scenario(scenario)?;
            if *seeds == 0 || *cycles == 0 {
                return Err(CliError::Usage("--seeds and --cycles must be positive".into()));
            }
            let cfg = CalibrateConfig {
                target_queue_fraction: *target_fraction,
                seeds: eval_seeds(*seeds),
                cycles: *cycles,
                ..CalibrateConfig::default()
            };
            let config = json!({ "scenario": s.name, "calibrate": cfg });
            p.config("calibrate", &config);
            let scale = calibrate_demand(&s, &cfg)?;
            let rate = s.demand.rate_per_lane_vps * scale;
            let result = json!({ "scale": scale, "rate_per_lane_vps": rate });
            p.finish("calibrate", config, result, || {
                println!("demand scale {scale:.4} (rate_per_lane_vps {rate:.5})");
            });
        }
    }
    Ok(())
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn train_row(o: &TrainOutcome) -> Value {
    let m = &o.monitor;
    let cycles = o.config.cycles;
    let last50 = mean(m.iter().filter(|r| r.cycle + 50 >= cycles).map(|r| r.action as f64));
    let first100 = mean(m.iter().filter(|r| r.cycle < 100).map(|r| r.reward));
    let last100 = mean(m.iter().filter(|r| r.cycle + 100 >= cycles).map(|r| r.reward));
    json!({
        "run_id": o.config.run_id,
        "seed": o.config.seed,
        "mean_action_last50": last50,
        "reward_first100": first100,
        "reward_last100": last100,
        "teleport_events": o.counters.teleport_events,
    })
}

fn print_summaries(rows: &[&MethodSummary]) {
    println!(
        "{:<16} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>8} {:>6}",
        "method", "speed", "sd", "waiting", "sd", "travel", "sd", "trips", "tele"
    );
    for r in rows {
        println!(
            "{:<16} {:>10.3} {:>10.3} {:>10.2} {:>10.2} {:>10.2} {:>10.2} {:>8} {:>6}",
            r.method, r.speed_mean, r.speed_std, r.waiting_mean, r.waiting_std, r.travel_mean, r.travel_std, r.trips, r.teleported
        );
    }
}

fn finish_report(p: &Printer, command: &str, config: Value, report: &CompareReport) {
    let summaries = report.summaries();
    let stats = report.stats.as_ref().map(|st| {
        st.metrics
            .iter()
            .map(|m| json!({ "metric": m.metric, "anova": m.anova, "tukey": m.tukey }))
            .collect::<Vec<_>>()
    });
    let result = json!({
        "summary": summaries,
        "best_static": report.sweep.as_ref().map(|s| s.best),
        "stats": stats,
        "notices": report.notices,
    });
    p.finish(command, config, result, || {
        print_summaries(&summaries);
        if let Some(st) = &report.stats {
            for m in &st.metrics {
                println!("{}: F({}, {}) = {:.3}, p = {:.4}", m.metric, m.anova.df_between, m.anova.df_within, m.anova.f, m.anova.p);
                for t in &m.tukey {
                    println!(
                        "  {} vs {}: diff {:.3} [{:.3}, {:.3}] p_adj {:.4}{}",
                        t.group_a,
                        t.group_b,
                        t.diff,
                        t.ci_low,
                        t.ci_high,
                        t.p_adj,
                        if t.significant { " *" } else { "" }
                    );
                }
            }
        }
        for n in &report.notices {
            println!("note: {n}");
        }
    });
}
