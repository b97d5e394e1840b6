use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::HarnessError;
use crate::agent::{Checkpoint, DqnAgent, DqnMode, DqnPolicy, Mlp};
use crate::control::{
    ActuatedController, CyclicController, MaxPressureController, SignalController, StaticPolicy, WebsterPolicy,
};
use crate::scenario::Scenario;
use crate::signal::NUM_PLANS;
use crate::sim::{Counters, SimEvent, Simulation, TripRecord};
use crate::stats::{describe, tukey_hsd, SampleGroup};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalConfig {
    pub seeds: Vec<u64>,
    pub warmup_cycles: u64,
    pub horizon_cycles: u64,
}

impl EvalConfig {
    pub fn new(seeds: Vec<u64>) -> Self {
        Self { seeds, warmup_cycles: 50, horizon_cycles: 500 }
    }
}

/// A constructible controller.
#[derive(Debug, Clone)]
pub enum Policy {
    Static(usize),
    Webster,
    MaxPressure,
    Actuated,
    /// Greedy networks, one per intersection.
    Dqn { label: String, networks: Arc<Vec<Mlp>> },
}

impl Policy {
    pub fn label(&self) -> String {
        match self {
            Policy::Static(k) => format!("static:{k}"),
            Policy::Webster => "webster".into(),
            Policy::MaxPressure => "maxpressure".into(),
            Policy::Actuated => "actuated".into(),
            Policy::Dqn { label, .. } => label.clone(),
        }
    }

    /// Greedy policy from a checkpoint, checked against the scenario's
    /// intersections.
    pub fn from_checkpoint(checkpoint: &Checkpoint, scenario: &Scenario, label: String) -> Result<Self, HarnessError> {
        let net = &scenario.network;
        let ids: Vec<&str> = net.intersections.iter().map(|i| net.nodes[i.node].id.as_str()).collect();
        let ck: Vec<&str> = checkpoint.agents.iter().map(|a| a.intersection.as_str()).collect();
        if ids != ck {
            return Err(HarnessError::Config(format!(
                "checkpoint covers intersections {ck:?} but scenario `{}` has {ids:?}",
                scenario.name
            )));
        }
        Ok(Policy::Dqn { label, networks: Arc::new(checkpoint.networks()?) })
    }

    pub fn build(&self, sim: &Simulation) -> Box<dyn SignalController> {
        match self {
            Policy::Static(k) => Box::new(CyclicController::new(StaticPolicy::new(*k).expect("valid plan"), sim)),
            Policy::Webster => Box::new(CyclicController::new(WebsterPolicy::new(sim), sim)),
            Policy::MaxPressure => Box::new(MaxPressureController::new(sim)),
            Policy::Actuated => Box::new(ActuatedController::new(sim)),
            Policy::Dqn { networks, .. } => {
                let agents = networks
                    .iter()
                    .map(|n| DqnAgent::from_parts(Default::default(), n.clone(), 0))
                    .collect();
                Box::new(CyclicController::new(DqnPolicy::new(agents, DqnMode::Greedy), sim))
            }
        }
    }
}

/// One seeded simulation of a fixed policy.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub policy: String,
    pub seed: u64,
    /// Trips that entered after the warm-up and finished within the horizon,
    /// teleported ones included and flagged.
    pub trips: Vec<TripRecord>,
    /// Vehicles still in the network at the end.
    pub in_network: usize,
    pub counters: Counters,
    pub events: Vec<SimEvent>,
}

/// Per-rollout means over completed (non-teleported) trips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RolloutMeans {
    pub trips: usize,
    pub travel: f64,
    pub waiting: f64,
    pub speed: f64,
}

impl Rollout {
    pub fn completed(&self) -> impl Iterator<Item = &TripRecord> {
        self.trips.iter().filter(|t| !t.teleported)
    }

    pub fn teleported(&self) -> usize {
        self.trips.iter().filter(|t| t.teleported).count()
    }

    pub fn means(&self) -> RolloutMeans {
        let n = self.completed().count();
        if n == 0 {
            return RolloutMeans { trips: 0, travel: 0.0, waiting: 0.0, speed: 0.0 };
        }
        let sum = |f: fn(&TripRecord) -> f64| self.completed().map(f).sum::<f64>() / n as f64;
        RolloutMeans { trips: n, travel: sum(|t| t.travel_s), waiting: sum(|t| t.waiting_s), speed: sum(|t| t.speed_mps) }
    }
}

pub fn rollout(scenario: Arc<Scenario>, policy: &Policy, seed: u64, config: &EvalConfig) -> Rollout {
    let mut sim = Simulation::new(scenario.clone(), seed);
    let mut ctrl = policy.build(&sim);
    let cycle_s = scenario.timing.cycle_s as u64;
    let warmup_s = config.warmup_cycles * cycle_s;
    for _ in 0..(config.warmup_cycles + config.horizon_cycles) * cycle_s {
        let view = ctrl.signals(&sim);
        sim.step(&view);
        ctrl.after_tick(&sim);
    }
    let trips = sim.finalize_trips().into_iter().filter(|t| t.entry_s >= warmup_s).collect();
    Rollout {
        policy: policy.label(),
        seed,
        trips,
        in_network: sim.active_count(),
        counters: sim.counters(),
        events: sim.events().to_vec(),
    }
}

/// Pooled per-trip aggregates over a method's rollouts, as (mean, std)
/// pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub detail: String,
    pub rollouts: usize,
    pub trips: usize,
    pub teleported: usize,
    pub in_network: usize,
    pub speed_mean: f64,
    pub speed_std: f64,
    pub waiting_mean: f64,
    pub waiting_std: f64,
    pub travel_mean: f64,
    pub travel_std: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    match values.len() {
        0 => (0.0, 0.0),
        1 => (values[0], 0.0),
        _ => {
            let d = describe(values).expect("finite trip metrics");
            (d.mean, d.std)
        }
    }
}

pub fn summarize(method: &str, detail: &str, rollouts: &[Rollout]) -> MethodSummary {
    let trips: Vec<&TripRecord> = rollouts.iter().flat_map(|r| r.completed()).collect();
    let col = |f: fn(&TripRecord) -> f64| trips.iter().map(|t| f(t)).collect::<Vec<f64>>();
    let (speed_mean, speed_std) = mean_std(&col(|t| t.speed_mps));
    let (waiting_mean, waiting_std) = mean_std(&col(|t| t.waiting_s));
    let (travel_mean, travel_std) = mean_std(&col(|t| t.travel_s));
    MethodSummary {
        method: method.into(),
        detail: detail.into(),
        rollouts: rollouts.len(),
        trips: trips.len(),
        teleported: rollouts.iter().map(|r| r.teleported()).sum(),
        in_network: rollouts.iter().map(|r| r.in_network).sum(),
        speed_mean,
        speed_std,
        waiting_mean,
        waiting_std,
        travel_mean,
        travel_std,
    }
}

#[derive(Debug, Clone)]
pub struct EvalResult {
    pub method: String,
    pub detail: String,
    /// Rollouts ordered by policy, then seed.
    pub rollouts: Vec<Rollout>,
    pub summary: MethodSummary,
}

impl EvalResult {
    pub fn samples(&self) -> Vec<RolloutMeans> {
        self.rollouts.iter().map(|r| r.means()).collect()
    }
}

/// Rolls out every policy on every seed (in parallel) and pools the results
/// under one method label.
pub fn evaluate_policies(
    scenario: Arc<Scenario>,
    method: &str,
    detail: &str,
    policies: &[Policy],
    config: &EvalConfig,
) -> EvalResult {
    let jobs: Vec<(&Policy, u64)> = policies.iter().flat_map(|p| config.seeds.iter().map(move |&s| (p, s))).collect();
    let rollouts: Vec<Rollout> =
        jobs.into_par_iter().map(|(p, s)| rollout(scenario.clone(), p, s, config)).collect();
    let summary = summarize(method, detail, &rollouts);
    EvalResult { method: method.into(), detail: detail.into(), rollouts, summary }
}

pub fn evaluate(scenario: Arc<Scenario>, policy: &Policy, config: &EvalConfig) -> EvalResult {
    let label = policy.label();
    evaluate_policies(scenario, &label, &label, std::slice::from_ref(policy), config)
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// One entry per plan index.
    pub rows: Vec<EvalResult>,
    pub best: usize,
    /// Plans whose Tukey interval against the best plan contains zero.
    pub tied_with_best: Vec<usize>,
}

/// Evaluates every fixed plan on the shared seeds and picks the one with the
/// lowest mean travel time (lowest index on exact ties).
pub fn sweep_static(scenario: Arc<Scenario>, config: &EvalConfig) -> Result<SweepResult, HarnessError> {
    let rows: Vec<EvalResult> = (0..NUM_PLANS).map(|k| evaluate(scenario.clone(), &Policy::Static(k), config)).collect();
    let best = (0..NUM_PLANS)
        .min_by(|&a, &b| rows[a].summary.travel_mean.total_cmp(&rows[b].summary.travel_mean).then(a.cmp(&b)))
        .unwrap();
    let mut tied_with_best = vec![best];
    if config.seeds.len() >= 2 {
        let groups: Vec<SampleGroup> = rows
            .iter()
            .map(|r| SampleGroup::new(r.method.clone(), r.samples().iter().map(|m| m.travel).collect()))
            .collect();
        for row in tukey_hsd(&groups, 0.05)? {
            let a: usize = row.group_a["static:".len()..].parse().unwrap();
            let b: usize = row.group_b["static:".len()..].parse().unwrap();
            if !row.significant && (a == best || b == best) {
                tied_with_best.push(if a == best { b } else { a });
            }
        }
    }
    tied_with_best.sort_unstable();
    Ok(SweepResult { rows, best, tied_with_best })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(seeds: Vec<u64>) -> EvalConfig {
        EvalConfig { seeds, warmup_cycles: 5, horizon_cycles: 30 }
    }

    #[test]
    fn zero_demand_has_no_waiting() {
        let s = Arc::new(Scenario::bundled("single_intersection").unwrap().with_demand_scale(0.0));
        let r = evaluate(s, &Policy::Static(3), &short(vec![1, 2]));
        assert_eq!(r.summary.trips, 0);
        assert_eq!(r.summary.waiting_mean, 0.0);
        assert_eq!(r.summary.in_network, 0);
    }

    #[test]
    fn summary_matches_independent_recomputation() {
        let s = Arc::new(Scenario::bundled("single_intersection").unwrap());
        let r = evaluate(s, &Policy::Webster, &short(vec![1, 2, 3]));
        let mut travel = Vec::new();
        for ro in &r.rollouts {
            let mut buf = Vec::new();
            crate::sim::write_trips(&mut buf, &ro.trips).unwrap();
            for t in crate::sim::read_trips(buf.as_slice()).unwrap() {
                if !t.teleported {
                    travel.push(t.travel_s);
                }
            }
        }
        let n = travel.len() as f64;
        let mean = travel.iter().sum::<f64>() / n;
        let std = (travel.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((r.summary.travel_mean - mean).abs() < 1e-9);
        assert!((r.summary.travel_std - std).abs() < 1e-9);
        assert_eq!(r.summary.trips, travel.len());
    }

    #[test]
    fn rollouts_are_deterministic_and_ordered() {
        let s = Arc::new(Scenario::bundled("single_intersection").unwrap());
        let cfg = short(vec![4, 1, 9]);
        let a = evaluate(s.clone(), &Policy::MaxPressure, &cfg);
        let b = evaluate(s, &Policy::MaxPressure, &cfg);
        assert_eq!(a.rollouts.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![4, 1, 9]);
        assert_eq!(a.summary, b.summary);
        assert_eq!(a.rollouts[2].trips, b.rollouts[2].trips);
    }
}
