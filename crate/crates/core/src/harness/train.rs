use std::collections::VecDeque;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{create_dir, io_err, write_file, HarnessError};
use crate::agent::{observe, reward, Checkpoint, CheckpointMeta, DqnAgent, DqnConfig, DqnMode, DqnPolicy};
use crate::control::{CyclicController, SignalController};
use crate::scenario::Scenario;
use crate::sim::{write_events, write_trips, Counters, SimEvent, Simulation, TripRecord};
use crate::splitmix64;

/// Teleports per inserted vehicle over the trailing window that aborts a run.
pub const DEFAULT_MAX_TELEPORT_RATE: f64 = 0.25;
const TELEPORT_WINDOW_CYCLES: usize = 10;

pub fn run_seed(base: u64, index: usize) -> u64 {
    splitmix64(base.wrapping_add(index as u64))
}

pub fn agent_seed(run_seed: u64, intersection: usize) -> u64 {
    splitmix64(run_seed.wrapping_add(intersection as u64 + 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRunConfig {
    pub scenario: String,
    pub run_id: String,
    /// Run seed; also the simulation seed.
    pub seed: u64,
    pub cycles: u64,
    pub agent: DqnConfig,
    pub max_teleport_rate: f64,
}

impl TrainRunConfig {
    pub fn new(scenario: &str, seed: u64, cycles: u64) -> Self {
        Self {
            scenario: scenario.into(),
            run_id: "run_000".into(),
            seed,
            cycles,
            agent: DqnConfig::default(),
            max_teleport_rate: DEFAULT_MAX_TELEPORT_RATE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorRow {
    pub cycle: u64,
    pub intersection: String,
    pub action: usize,
    pub reward: f64,
    pub active_vehicles: usize,
    pub mean_speed: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub config: TrainRunConfig,
    pub monitor: Vec<MonitorRow>,
    pub checkpoint: Checkpoint,
    pub trips: Vec<TripRecord>,
    pub events: Vec<SimEvent>,
    pub counters: Counters,
}

impl TrainOutcome {
    /// Monitor rows of one intersection, in cycle order.
    pub fn series(&self, intersection: &str) -> impl Iterator<Item = &MonitorRow> {
        let id = intersection.to_string();
        self.monitor.iter().filter(move |r| r.intersection == id)
    }
}

/// Trains one independent agent per intersection for `config.cycles` cycles.
pub fn train_run(scenario: Arc<Scenario>, config: &TrainRunConfig) -> Result<TrainOutcome, HarnessError> {
    if config.cycles == 0 || (config.cycles as usize) < config.agent.warmup {
        return Err(HarnessError::Config(format!(
            "{} training cycles is below the replay warm-up of {}",
            config.cycles, config.agent.warmup
        )));
    }
    let net = &scenario.network;
    let ids: Vec<String> = net.intersections.iter().map(|i| net.nodes[i.node].id.clone()).collect();
    let mut sim = Simulation::new(scenario.clone(), config.seed);
    let agents =
        (0..ids.len()).map(|j| DqnAgent::new(config.agent.clone(), agent_seed(config.seed, j))).collect();
    let policy = DqnPolicy::new(agents, DqnMode::Train { total_cycles: config.cycles });
    let mut ctrl = CyclicController::new(policy, &sim);
    let cycle_s = scenario.timing.cycle_s;
    let mut monitor = Vec::with_capacity(config.cycles as usize * ids.len());
    let mut window: VecDeque<Counters> = VecDeque::new();
    window.push_back(sim.counters());
    for cycle in 0..config.cycles {
        for _ in 0..cycle_s {
            let view = ctrl.signals(&sim);
            sim.step(&view);
            ctrl.after_tick(&sim);
        }
        let plans = ctrl.current_plans();
        for (i, id) in ids.iter().enumerate() {
            let obs = observe(&sim, i).expect("cycle just completed");
            monitor.push(MonitorRow {
                cycle,
                intersection: id.clone(),
                action: plans[i].index.expect("learned plans come from the action space"),
                reward: reward(&obs),
                active_vehicles: sim.active_count(),
                mean_speed: sim.mean_speed(),
            });
        }
        let now = sim.counters();
        let then = if window.len() > TELEPORT_WINDOW_CYCLES { window.pop_front().unwrap() } else { window[0] };
        let injected = now.injected - then.injected;
        let teleports = now.teleport_events - then.teleport_events;
        let rate = teleports as f64 / injected.max(1) as f64;
        if rate > config.max_teleport_rate && teleports > 0 {
            return Err(HarnessError::Gridlock { cycle, rate, limit: config.max_teleport_rate });
        }
        window.push_back(now);
    }
    let agents = ctrl.into_policy().into_agents();
    let nets: Vec<(String, &crate::agent::Mlp)> = ids.iter().cloned().zip(agents.iter().map(|a| &a.online)).collect();
    let checkpoint = Checkpoint::new(
        &nets,
        CheckpointMeta {
            scenario: scenario.name.clone(),
            seed: config.seed,
            cycles_trained: config.cycles,
            config: config.agent.clone(),
        },
    );
    Ok(TrainOutcome {
        config: config.clone(),
        monitor,
        checkpoint,
        trips: sim.finalize_trips(),
        events: sim.events().to_vec(),
        counters: sim.counters(),
    })
}

/// `runs` training runs with seeds derived from `base_seed`, executed in
/// parallel and returned in run order.
pub fn train_many(
    scenario: Arc<Scenario>,
    template: &TrainRunConfig,
    base_seed: u64,
    runs: usize,
) -> Vec<Result<TrainOutcome, HarnessError>> {
    (0..runs)
        .into_par_iter()
        .map(|i| {
            let config = TrainRunConfig { run_id: format!("run_{i:03}"), seed: run_seed(base_seed, i), ..template.clone() };
            train_run(scenario.clone(), &config)
        })
        .collect()
}

pub fn write_monitor<W: std::io::Write>(out: W, rows: &[MonitorRow]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cycle", "intersection", "action", "reward", "active_vehicles", "mean_speed"])?;
    for r in rows {
        w.write_record([
            r.cycle.to_string(),
            r.intersection.clone(),
            r.action.to_string(),
            r.reward.to_string(),
            r.active_vehicles.to_string(),
            r.mean_speed.to_string(),
        ])?;
    }
    w.flush()
}

/// Writes `config.json`, `monitor.csv`, `checkpoint.json`, `trips.csv` and
/// `events.jsonl` under `dir`.
pub fn write_train_run(dir: &Path, outcome: &TrainOutcome) -> Result<(), HarnessError> {
    create_dir(dir)?;
    let config = serde_json::to_string_pretty(&outcome.config).expect("config serializes");
    write_file(&dir.join("config.json"), config + "\n")?;
    let path = dir.join("monitor.csv");
    let mut buf = Vec::new();
    write_monitor(&mut buf, &outcome.monitor).map_err(io_err(&path))?;
    write_file(&path, buf)?;
    outcome.checkpoint.save(&dir.join("checkpoint.json"))?;
    let path = dir.join("trips.csv");
    let mut buf = Vec::new();
    write_trips(&mut buf, &outcome.trips).map_err(io_err(&path))?;
    write_file(&path, buf)?;
    let path = dir.join("events.jsonl");
    let mut buf = Vec::new();
    write_events(&mut buf, &outcome.events).map_err(io_err(&path))?;
    write_file(&path, buf)
}

pub fn read_monitor(path: &Path) -> Result<Vec<MonitorRow>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<Result<Vec<MonitorRow>, _>>()
        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}
