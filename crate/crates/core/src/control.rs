//! Signal controllers.
//!
//! Cyclic controllers (static, Webster, and the learned policies) pick one
//! [`SignalPlan`] per intersection at the start of every 60 s cycle, so all
//! intersections share cycle boundaries. Acyclic controllers (max-pressure
//! and actuated) hold or switch the green phase tick by tick.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::agent::observe;
use crate::signal::{CycleClock, PhaseColor, PlanRecord, SignalPlan, NUM_PHASES, NUM_PLANS};
use crate::sim::{SignalView, Simulation, SATURATION_HEADWAY_S};

pub const WEBSTER_HORIZON_S: u32 = 300;
pub const WEBSTER_UPDATE_CYCLES: u64 = 5;
pub const WEBSTER_MIN_SPLIT: f64 = 0.30;
pub const WEBSTER_MAX_SPLIT: f64 = 0.70;

pub const MAX_PRESSURE_SLOT_S: u32 = 10;
pub const SWITCH_YELLOW_S: u32 = 3;

/// Drives the signals of every intersection in one simulation run.
pub trait SignalController: Send {
    fn label(&self) -> String;
    /// Colors for the tick about to be simulated.
    fn signals(&mut self, sim: &Simulation) -> SignalView;
    /// Called once the tick has been simulated.
    fn after_tick(&mut self, _sim: &Simulation) {}
}

/// Plan selection for cyclic controllers.
pub trait PlanPolicy: Send {
    fn label(&self) -> String;
    /// Plan for intersection `i` in cycle `cycle`. `obs` is the lane-normalized
    /// stop count of the previous cycle, absent in the first cycle.
    fn choose(&mut self, i: usize, cycle: u64, obs: Option<[f64; NUM_PHASES]>, sim: &Simulation) -> SignalPlan;
}

pub struct CyclicController<P> {
    policy: P,
    clocks: Vec<CycleClock>,
    trace: Vec<Vec<PlanRecord>>,
}

impl<P: PlanPolicy> CyclicController<P> {
    pub fn new(policy: P, sim: &Simulation) -> Self {
        let scenario = sim.scenario();
        let n = scenario.network.intersections.len();
        let start = SignalPlan::from_index(NUM_PLANS / 2).unwrap();
        Self {
            policy,
            clocks: vec![CycleClock::new(scenario.timing, start); n],
            trace: vec![Vec::new(); n],
        }
    }

    pub fn policy(&self) -> &P {
        &self.policy
    }

    pub fn policy_mut(&mut self) -> &mut P {
        &mut self.policy
    }

    pub fn into_policy(self) -> P {
        self.policy
    }

    /// Plans in force for each intersection.
    pub fn current_plans(&self) -> Vec<SignalPlan> {
        self.clocks.iter().map(|c| c.plan).collect()
    }

    /// Committed plans per intersection, one record per cycle.
    pub fn plan_trace(&self, intersection: usize) -> &[PlanRecord] {
        &self.trace[intersection]
    }
}

impl<P: PlanPolicy> SignalController for CyclicController<P> {
    fn label(&self) -> String {
        self.policy.label()
    }

    fn signals(&mut self, sim: &Simulation) -> SignalView {
        for i in 0..self.clocks.len() {
            let clock = &self.clocks[i];
            if clock.at_cycle_start() {
                let cycle = clock.cycle;
                let obs = if cycle == 0 { None } else { observe(sim, i) };
                let plan = self.policy.choose(i, cycle, obs, sim);
                self.clocks[i].commit_plan(plan).expect("commit at tick 0");
                self.trace[i].push(PlanRecord { cycle, plan });
            }
        }
        SignalView { colors: self.clocks.iter().map(|c| c.colors()).collect() }
    }

    fn after_tick(&mut self, _sim: &Simulation) {
        for c in &mut self.clocks {
            c.advance();
        }
    }
}

/// Same plan every cycle.
#[derive(Debug, Clone, Copy)]
pub struct StaticPolicy {
    plan: SignalPlan,
}

impl StaticPolicy {
    pub fn new(index: usize) -> Result<Self, crate::signal::SignalError> {
        Ok(Self { plan: SignalPlan::from_index(index)? })
    }
}

impl PlanPolicy for StaticPolicy {
    fn label(&self) -> String {
        format!("static:{}", self.plan.index.unwrap())
    }

    fn choose(&mut self, _: usize, _: u64, _: Option<[f64; NUM_PHASES]>, _: &Simulation) -> SignalPlan {
        self.plan
    }
}

/// Lane arrival counts over a horizon, grouped by phase.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowEstimate {
    pub lane_counts: [Vec<u64>; NUM_PHASES],
    pub horizon_s: u32,
    /// veh/s/lane
    pub saturation_flow: f64,
}

impl FlowEstimate {
    /// y_p: the largest lane flow of phase p divided by the saturation flow.
    pub fn flow_ratios(&self) -> [f64; NUM_PHASES] {
        std::array::from_fn(|p| {
            let max = self.lane_counts[p].iter().copied().max().unwrap_or(0);
            max as f64 / self.horizon_s as f64 / self.saturation_flow
        })
    }
}

/// Webster's equisaturation split rule with clamping to the plan range.
pub fn webster_splits(y: [f64; NUM_PHASES]) -> [f64; NUM_PHASES] {
    let total: f64 = y.iter().sum();
    if !(total > 0.0) {
        return [1.0 / NUM_PHASES as f64; NUM_PHASES];
    }
    let clamped = y.map(|v| (v / total).clamp(WEBSTER_MIN_SPLIT, WEBSTER_MAX_SPLIT));
    let sum: f64 = clamped.iter().sum();
    clamped.map(|v| v / sum)
}

pub struct WebsterPolicy {
    /// Cumulative arrivals per intersection, phase and lane at the last update.
    snapshots: Vec<[Vec<u64>; NUM_PHASES]>,
    plans: Vec<SignalPlan>,
}

impl WebsterPolicy {
    pub fn new(sim: &Simulation) -> Self {
        let n = sim.scenario().network.intersections.len();
        let mut out = Self {
            snapshots: Vec::with_capacity(n),
            plans: vec![SignalPlan::custom(0.5).unwrap(); n],
        };
        for i in 0..n {
            out.snapshots.push(Self::counts(sim, i));
        }
        out
    }

    fn counts(sim: &Simulation, i: usize) -> [Vec<u64>; NUM_PHASES] {
        let net = &sim.scenario().network;
        std::array::from_fn(|p| {
            net.intersections[i]
                .inbound_edges(p)
                .into_iter()
                .flat_map(|e| (0..net.edges[e].lanes as usize).map(move |l| sim.lane_arrivals(e, l)))
                .collect()
        })
    }
}

impl PlanPolicy for WebsterPolicy {
    fn label(&self) -> String {
        "webster".into()
    }

    fn choose(&mut self, i: usize, cycle: u64, _: Option<[f64; NUM_PHASES]>, sim: &Simulation) -> SignalPlan {
        if cycle > 0 && cycle % WEBSTER_UPDATE_CYCLES == 0 {
            let now = Self::counts(sim, i);
            let lane_counts = std::array::from_fn(|p| {
                now[p].iter().zip(&self.snapshots[i][p]).map(|(a, b)| a - b).collect()
            });
            let horizon_s = (WEBSTER_UPDATE_CYCLES * sim.scenario().timing.cycle_s as u64) as u32;
            let est = FlowEstimate { lane_counts, horizon_s, saturation_flow: 1.0 / SATURATION_HEADWAY_S };
            let splits = webster_splits(est.flow_ratios());
            self.plans[i] = SignalPlan::custom(splits[0]).expect("clamped split");
            self.snapshots[i] = now;
        }
        self.plans[i]
    }
}

/// Sum over a phase's movements of upstream minus downstream queue.
pub fn phase_pressure(movements: &[(u32, u32)]) -> i64 {
    movements.iter().map(|&(up, down)| up as i64 - down as i64).sum()
}

/// Phase of maximum pressure. Ties keep the current phase when it is among
/// the maximizers, otherwise go to the lowest index.
pub fn max_pressure_select(pressures: &[i64], current: usize) -> usize {
    let best = *pressures.iter().max().expect("at least one phase");
    if pressures.get(current) == Some(&best) {
        return current;
    }
    pressures.iter().position(|&p| p == best).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Green { phase: usize, start: u64 },
    Yellow { from: usize, to: usize, until: u64 },
}

impl Stage {
    fn colors(self) -> [PhaseColor; NUM_PHASES] {
        let mut c = [PhaseColor::Red; NUM_PHASES];
        match self {
            Stage::Green { phase, .. } => c[phase] = PhaseColor::Green,
            Stage::Yellow { from, .. } => c[from] = PhaseColor::Yellow,
        }
        c
    }

    /// Moves out of a finished yellow.
    fn settle(&mut self, now: u64) {
        if let Stage::Yellow { to, until, .. } = *self {
            if now >= until {
                *self = Stage::Green { phase: to, start: now };
            }
        }
    }
}

/// Per-movement (upstream queue, downstream queue) for every phase of an
/// intersection.
pub fn movement_queues(sim: &Simulation, i: usize) -> Vec<Vec<(u32, u32)>> {
    sim.scenario().network.intersections[i]
        .phases
        .iter()
        .map(|ms| {
            ms.iter()
                .map(|m| (sim.queued_toward(m.from_edge, m.to_edge) as u32, sim.queued_on(m.to_edge) as u32))
                .collect()
        })
        .collect()
}

pub struct MaxPressureController {
    stages: Vec<Stage>,
}

impl MaxPressureController {
    pub fn new(sim: &Simulation) -> Self {
        let n = sim.scenario().network.intersections.len();
        Self { stages: vec![Stage::Green { phase: 0, start: sim.clock() }; n] }
    }
}

impl SignalController for MaxPressureController {
    fn label(&self) -> String {
        "maxpressure".into()
    }

    fn signals(&mut self, sim: &Simulation) -> SignalView {
        let now = sim.clock();
        for (i, stage) in self.stages.iter_mut().enumerate() {
            stage.settle(now);
            if let Stage::Green { phase, start } = *stage {
                let elapsed = (now - start) as u32;
                if elapsed >= MAX_PRESSURE_SLOT_S && elapsed % MAX_PRESSURE_SLOT_S == 0 {
                    let pressures: Vec<i64> = movement_queues(sim, i).iter().map(|m| phase_pressure(m)).collect();
                    let next = max_pressure_select(&pressures, phase);
                    if next != phase {
                        *stage = Stage::Yellow { from: phase, to: next, until: now + SWITCH_YELLOW_S as u64 };
                    }
                }
            }
        }
        SignalView { colors: self.stages.iter().map(|s| s.colors()).collect() }
    }
}

/// Gap-based green extension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatedParams {
    pub min_green: u32,
    pub gap: u32,
    pub extension: u32,
    pub max_green: u32,
}

impl Default for ActuatedParams {
    fn default() -> Self {
        Self { min_green: 10, gap: 3, extension: 2, max_green: 42 }
    }
}

impl ActuatedParams {
    /// Green end (seconds into the phase) after detecting an arrival at
    /// `arrival` seconds into the phase.
    pub fn extend(&self, green_end: u32, arrival: u32) -> u32 {
        green_end.max((arrival + self.extension).min(self.max_green))
    }

    /// Green duration for a given set of stop-line arrival times, with the
    /// detector looking `gap` seconds ahead each tick.
    pub fn green_duration(&self, arrivals: &[u32]) -> u32 {
        let mut end = self.min_green;
        let mut e = 0;
        while e < end {
            for &a in arrivals.iter().filter(|&&a| a >= e && a <= e + self.gap) {
                end = self.extend(end, a);
            }
            e += 1;
        }
        end
    }
}

pub struct ActuatedController {
    params: ActuatedParams,
    stages: Vec<Stage>,
    green_end: Vec<u32>,
}

impl ActuatedController {
    pub fn new(sim: &Simulation) -> Self {
        Self::with_params(sim, ActuatedParams::default())
    }

    pub fn with_params(sim: &Simulation, params: ActuatedParams) -> Self {
        let n = sim.scenario().network.intersections.len();
        Self {
            params,
            stages: vec![Stage::Green { phase: 0, start: sim.clock() }; n],
            green_end: vec![params.min_green; n],
        }
    }
}

impl SignalController for ActuatedController {
    fn label(&self) -> String {
        "actuated".into()
    }

    fn signals(&mut self, sim: &Simulation) -> SignalView {
        let now = sim.clock();
        let net = &sim.scenario().network;
        for i in 0..self.stages.len() {
            let before = self.stages[i];
            self.stages[i].settle(now);
            if self.stages[i] != before {
                self.green_end[i] = self.params.min_green;
            }
            if let Stage::Green { phase, start } = self.stages[i] {
                let elapsed = (now - start) as u32;
                for e in net.intersections[i].inbound_edges(phase) {
                    if sim.queued_on(e) > 0 {
                        self.green_end[i] = self.params.extend(self.green_end[i], elapsed);
                    }
                    // A vehicle with timer `t` reaches the stop line during tick t - 1.
                    if let Some(t) = sim.projected_arrival(e, self.params.gap as u64 + 1) {
                        let arrival = (t - 1).saturating_sub(start) as u32;
                        self.green_end[i] = self.params.extend(self.green_end[i], arrival.max(elapsed));
                    }
                }
                if elapsed >= self.green_end[i] {
                    let to = (phase + 1) % NUM_PHASES;
                    self.stages[i] = Stage::Yellow { from: phase, to, until: now + SWITCH_YELLOW_S as u64 };
                }
            }
        }
        SignalView { colors: self.stages.iter().map(|s| s.colors()).collect() }
    }
}

/// Controller selector as written on the command line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ControllerSpec {
    Static(usize),
    StaticBest,
    Webster,
    MaxPressure,
    Actuated,
    Dqn(PathBuf),
}

impl FromStr for ControllerSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "static:best" => Ok(Self::StaticBest),
            "webster" => Ok(Self::Webster),
            "maxpressure" => Ok(Self::MaxPressure),
            "actuated" => Ok(Self::Actuated),
            _ => {
                if let Some(k) = s.strip_prefix("static:") {
                    let k: usize = k.parse().map_err(|_| format!("bad plan index in `{s}`"))?;
                    if k >= NUM_PLANS {
                        return Err(format!("plan index {k} out of range 0..{}", NUM_PLANS - 1));
                    }
                    Ok(Self::Static(k))
                } else if let Some(p) = s.strip_prefix("dqn:") {
                    if p.is_empty() {
                        return Err("`dqn:` needs a checkpoint path".into());
                    }
                    Ok(Self::Dqn(PathBuf::from(p)))
                } else {
                    Err(format!(
                        "unknown controller `{s}` (expected static:<k>, static:best, webster, maxpressure, actuated or dqn:<path>)"
                    ))
                }
            }
        }
    }
}

impl fmt::Display for ControllerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Static(k) => write!(f, "static:{k}"),
            Self::StaticBest => f.write_str("static:best"),
            Self::Webster => f.write_str("webster"),
            Self::MaxPressure => f.write_str("maxpressure"),
            Self::Actuated => f.write_str("actuated"),
            Self::Dqn(p) => write!(f, "dqn:{}", p.display()),
        }
    }
}
