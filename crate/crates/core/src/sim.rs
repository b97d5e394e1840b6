//! Discrete-time (1 s) point-queue traffic simulator.
//!
//! Vehicles traverse each edge at free-flow speed and then join a FIFO queue
//! at the stop line of one of the edge's lanes. Lanes with a green movement
//! discharge one vehicle per saturation headway into the next edge of the
//! route, provided the next edge has room. A vehicle's normalized speed is
//! 1 while moving and 0 while queued, so "stopped" and "queued" coincide.
//!
//! One call to [`Simulation::step`] covers the interval `(t, t + 1]`:
//!
//! 1. Bernoulli insertions on every entry edge.
//! 2. Vehicles whose free-flow timer expires reach the end of their edge and
//!    either leave the network or join the shortest lane queue.
//! 3. Green lanes accumulate discharge credit and release head vehicles.
//! 4. Queued vehicles are counted as stopped for the tick.
//! 5. Vehicles queued for [`TELEPORT_THRESHOLD_S`] are teleported.
//! 6. The clock advances.

use std::collections::VecDeque;
use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::Scenario;
use crate::signal::{PhaseColor, NUM_PHASES};

/// Jam spacing used to derive queue capacity from lane length.
pub const VEHICLE_FOOTPRINT_M: f64 = 7.5;
/// Seconds per discharged vehicle per lane (1800 veh/h).
pub const SATURATION_HEADWAY_S: f64 = 2.0;
/// Continuous queueing time after which a vehicle is teleported.
pub const TELEPORT_THRESHOLD_S: u64 = 300;
/// Normalized speed below which a vehicle counts as stopped.
pub const STOPPED_SPEED_THRESHOLD: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("stop window holds {found} of {expected} ticks")]
    IncompleteWindow { found: usize, expected: usize },
    #[error("phase {0} out of range")]
    Phase(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    FreeFlow { arrive_at: u64 },
    Queued { lane: usize, since: u64 },
    Finished,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: usize,
    pub route: usize,
    /// Index into the route's edge list.
    pub pos: usize,
    pub entry_s: u64,
    pub exit_s: Option<u64>,
    /// Stopped seconds from finished queue spells.
    stopped_s: u64,
    pub mode: Mode,
    pub teleported: bool,
}

impl Vehicle {
    /// Normalized speed in the point-queue model.
    pub fn normalized_speed(&self) -> f64 {
        match self.mode {
            Mode::Queued { .. } => 0.0,
            _ => 1.0,
        }
    }
}

/// Per-vehicle trip summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub vehicle_id: usize,
    pub entry_s: u64,
    pub exit_s: u64,
    pub travel_s: f64,
    pub waiting_s: f64,
    pub speed_mps: f64,
    pub teleported: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub t: u64,
    pub kind: String,
    pub vehicle: usize,
    pub from_edge: String,
    pub to_edge: Option<String>,
    pub queued_s: u64,
}

/// Per-tick stopped-vehicle counts over one cycle for one intersection.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StopWindow {
    pub start: u64,
    pub counts: Vec<[u32; NUM_PHASES]>,
}

/// Time-averaged number of stopped vehicles on the inbound lanes of `phase`
/// over a complete window of `cycle_len` ticks.
pub fn cumulative_stopped(window: &StopWindow, phase: usize, cycle_len: usize) -> Result<f64, SimError> {
    if phase >= NUM_PHASES {
        return Err(SimError::Phase(phase));
    }
    if window.counts.len() != cycle_len {
        return Err(SimError::IncompleteWindow { found: window.counts.len(), expected: cycle_len });
    }
    let total: u64 = window.counts.iter().map(|c| c[phase] as u64).sum();
    Ok(total as f64 / cycle_len as f64)
}

/// Signal colors for every intersection, indexed like
/// `scenario.network.intersections`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalView {
    pub colors: Vec<[PhaseColor; NUM_PHASES]>,
}

impl SignalView {
    pub fn all_red(n: usize) -> Self {
        Self { colors: vec![[PhaseColor::Red; NUM_PHASES]; n] }
    }
}

/// Lane-level departure kinds, recorded when lane tracing is enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneEventKind {
    Join,
    Depart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaneEvent {
    pub edge: usize,
    pub lane: usize,
    pub vehicle: usize,
    pub kind: LaneEventKind,
}

#[derive(Debug, Clone, Default)]
struct Lane {
    queue: VecDeque<usize>,
    credit: f64,
    arrivals: u64,
}

#[derive(Debug, Clone)]
struct EdgeState {
    moving: VecDeque<usize>,
    lanes: Vec<Lane>,
    occupancy: usize,
    queued: usize,
    capacity: usize,
    travel_ticks: u64,
    /// `(next_edge, bitmask of serving phases)` at a signalized node; `None`
    /// when the edge ends at an unsignalized node or an exit.
    movements: Option<(usize, Vec<(usize, u8)>)>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub injected: u64,
    pub refused: u64,
    pub completed: u64,
    /// Vehicles that left the network after at least one teleport.
    pub teleported: u64,
    pub teleport_events: u64,
}

#[derive(Clone)]
pub struct Simulation {
    scenario: Arc<Scenario>,
    routes: Vec<Vec<usize>>,
    route_choice: Vec<Vec<(usize, f64)>>,
    insertion_prob: Vec<f64>,
    entries: Vec<usize>,
    edges: Vec<EdgeState>,
    vehicles: Vec<Vehicle>,
    active: usize,
    clock: u64,
    rng: ChaCha8Rng,
    counters: Counters,
    finished: Vec<usize>,
    events: Vec<SimEvent>,
    phase_edges: Vec<[Vec<usize>; NUM_PHASES]>,
    current_window: Vec<StopWindow>,
    last_window: Vec<Option<StopWindow>>,
    cycle_len: u64,
    teleport_threshold: u64,
    lane_trace: Option<Vec<LaneEvent>>,
}

impl Simulation {
    pub fn new(scenario: Arc<Scenario>, seed: u64) -> Self {
        let net = &scenario.network;
        let routes: Vec<Vec<usize>> = scenario.routes.iter().map(|r| r.edges.clone()).collect();
        let mut route_choice = vec![Vec::new(); net.edges.len()];
        for (e, choices) in route_choice.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (i, w) in scenario.routes_from(e) {
                acc += w;
                choices.push((i, acc));
            }
        }
        let edges = (0..net.edges.len())
            .map(|e| {
                let edge = &net.edges[e];
                let movements = net.intersection_at(edge.to).map(|i| {
                    let int = &net.intersections[i];
                    let ms = net
                        .successors(e)
                        .iter()
                        .map(|&next| {
                            let m = crate::scenario::Movement { from_edge: e, to_edge: next };
                            let mask = int.phases_of(m).fold(0u8, |acc, p| acc | (1 << p));
                            (next, mask)
                        })
                        .collect();
                    (i, ms)
                });
                EdgeState {
                    moving: VecDeque::new(),
                    lanes: vec![Lane::default(); edge.lanes as usize],
                    occupancy: 0,
                    queued: 0,
                    capacity: net.edge_capacity(e),
                    travel_ticks: edge.travel_ticks(),
                    movements,
                }
            })
            .collect();
        let phase_edges = net
            .intersections
            .iter()
            .map(|int| std::array::from_fn(|p| int.inbound_edges(p)))
            .collect();
        let n_int = net.intersections.len();
        Self {
            routes,
            route_choice,
            insertion_prob: scenario.demand.insertion_prob.clone(),
            entries: net.entry_edges(),
            edges,
            vehicles: Vec::new(),
            active: 0,
            clock: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            counters: Counters::default(),
            finished: Vec::new(),
            events: Vec::new(),
            phase_edges,
            current_window: vec![StopWindow::default(); n_int],
            last_window: vec![None; n_int],
            cycle_len: scenario.timing.cycle_s as u64,
            teleport_threshold: TELEPORT_THRESHOLD_S,
            lane_trace: None,
            scenario,
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn active_count(&self) -> usize {
        self.active
    }

    pub fn vehicle(&self, id: usize) -> &Vehicle {
        &self.vehicles[id]
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn events(&self) -> &[SimEvent] {
        &self.events
    }

    pub fn set_teleport_threshold(&mut self, seconds: u64) {
        self.teleport_threshold = seconds;
    }

    /// Overrides the insertion probability of every entry edge.
    pub fn set_insertion_prob(&mut self, edge: usize, p: f64) {
        self.insertion_prob[edge] = p.clamp(0.0, 1.0);
    }

    pub fn enable_lane_trace(&mut self) {
        self.lane_trace = Some(Vec::new());
    }

    pub fn lane_trace(&self) -> Option<&[LaneEvent]> {
        self.lane_trace.as_deref()
    }

    /// `injected == active + completed + teleported`.
    pub fn conserved(&self) -> bool {
        let c = self.counters;
        c.injected == self.active as u64 + c.completed + c.teleported
    }

    pub fn stopped_seconds(&self, id: usize) -> u64 {
        let v = &self.vehicles[id];
        match v.mode {
            // The current spell includes every stop scan since joining.
            Mode::Queued { since, .. } => v.stopped_s + self.clock - since,
            _ => v.stopped_s,
        }
    }

    /// 1 if the vehicle's normalized speed is below the stopped threshold.
    pub fn stopped(&self, id: usize) -> u8 {
        let v = &self.vehicles[id];
        (v.mode != Mode::Finished && v.normalized_speed() < STOPPED_SPEED_THRESHOLD) as u8
    }

    pub fn queue_len(&self, edge: usize, lane: usize) -> usize {
        self.edges[edge].lanes[lane].queue.len()
    }

    pub fn lane_queue(&self, edge: usize, lane: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges[edge].lanes[lane].queue.iter().copied()
    }

    /// Queued vehicles over all lanes of `edge`.
    pub fn queued_on(&self, edge: usize) -> usize {
        self.edges[edge].queued
    }

    pub fn occupancy(&self, edge: usize) -> usize {
        self.edges[edge].occupancy
    }

    /// Queued vehicles on `edge` whose next edge is `next`.
    pub fn queued_toward(&self, edge: usize, next: usize) -> usize {
        self.edges[edge]
            .lanes
            .iter()
            .flat_map(|l| l.queue.iter())
            .filter(|&&v| {
                let veh = &self.vehicles[v];
                self.routes[veh.route].get(veh.pos + 1) == Some(&next)
            })
            .count()
    }

    /// Latest stop-line arrival time among vehicles on `edge` that will reach
    /// the stop line within `horizon` seconds.
    pub fn projected_arrival(&self, edge: usize, horizon: u64) -> Option<u64> {
        let limit = self.clock + horizon;
        self.edges[edge]
            .moving
            .iter()
            .map(|&v| match self.vehicles[v].mode {
                Mode::FreeFlow { arrive_at } => arrive_at,
                _ => unreachable!("moving list holds free-flow vehicles"),
            })
            .take_while(|&t| t <= limit)
            .last()
    }

    /// Cumulative count of vehicles that have joined `lane` of `edge`.
    pub fn lane_arrivals(&self, edge: usize, lane: usize) -> u64 {
        self.edges[edge].lanes[lane].arrivals
    }

    /// Mean speed (m/s) over active vehicles; 0 when the network is empty.
    pub fn mean_speed(&self) -> f64 {
        if self.active == 0 {
            return 0.0;
        }
        let net = &self.scenario.network;
        let moving: f64 = self
            .edges
            .iter()
            .enumerate()
            .map(|(e, s)| s.moving.len() as f64 * net.edges[e].speed)
            .sum();
        moving / self.active as f64
    }

    /// Stop counts of the cycle in progress.
    pub fn current_window(&self, intersection: usize) -> &StopWindow {
        &self.current_window[intersection]
    }

    /// Stop counts of the most recently completed cycle.
    pub fn last_window(&self, intersection: usize) -> Option<&StopWindow> {
        self.last_window[intersection].as_ref()
    }

    /// Advances the simulation by one second.
    pub fn step(&mut self, view: &SignalView) {
        assert_eq!(
            view.colors.len(),
            self.scenario.network.intersections.len(),
            "signal view must cover every intersection"
        );
        let now = self.clock;
        self.inject(now);
        self.arrive(now);
        self.discharge(now, view);
        self.scan_stopped(now);
        self.resolve_gridlock(now);
        self.clock += 1;
        if self.clock % self.cycle_len == 0 {
            for i in 0..self.current_window.len() {
                let done = std::mem::replace(
                    &mut self.current_window[i],
                    StopWindow { start: self.clock, counts: Vec::new() },
                );
                self.last_window[i] = Some(done);
            }
        }
    }

    fn inject(&mut self, now: u64) {
        for k in 0..self.entries.len() {
            let e = self.entries[k];
            // Both draws happen every tick so that streams stay aligned
            // across controllers.
            let u: f64 = self.rng.gen();
            let ur: f64 = self.rng.gen();
            if u >= self.insertion_prob[e] {
                continue;
            }
            let choices = &self.route_choice[e];
            if choices.is_empty() {
                continue;
            }
            if self.edges[e].occupancy >= self.edges[e].capacity {
                self.counters.refused += 1;
                continue;
            }
            let route = choices.iter().find(|&&(_, c)| ur < c).unwrap_or(choices.last().unwrap()).0;
            let id = self.vehicles.len();
            let arrive_at = now + self.edges[e].travel_ticks;
            self.vehicles.push(Vehicle {
                id,
                route,
                pos: 0,
                entry_s: now,
                exit_s: None,
                stopped_s: 0,
                mode: Mode::FreeFlow { arrive_at },
                teleported: false,
            });
            self.edges[e].moving.push_back(id);
            self.edges[e].occupancy += 1;
            self.active += 1;
            self.counters.injected += 1;
        }
    }

    fn arrive(&mut self, now: u64) {
        for e in 0..self.edges.len() {
            while let Some(&v) = self.edges[e].moving.front() {
                let Mode::FreeFlow { arrive_at } = self.vehicles[v].mode else { unreachable!() };
                if arrive_at > now + 1 {
                    break;
                }
                self.edges[e].moving.pop_front();
                let veh = &self.vehicles[v];
                if veh.pos + 1 == self.routes[veh.route].len() {
                    self.edges[e].occupancy -= 1;
                    self.finish(v, arrive_at);
                    continue;
                }
                let es = &mut self.edges[e];
                // Shortest queue, lowest index on ties.
                let lane = (0..es.lanes.len()).min_by_key(|&l| (es.lanes[l].queue.len(), l)).unwrap();
                es.lanes[lane].queue.push_back(v);
                es.lanes[lane].arrivals += 1;
                es.queued += 1;
                self.vehicles[v].mode = Mode::Queued { lane, since: now };
                if let Some(trace) = &mut self.lane_trace {
                    trace.push(LaneEvent { edge: e, lane, vehicle: v, kind: LaneEventKind::Join });
                }
            }
        }
    }

    fn movement_green(&self, edge: usize, next: usize, view: &SignalView) -> bool {
        match &self.edges[edge].movements {
            None => true,
            Some((i, ms)) => {
                let mask = ms.iter().find(|(n, _)| *n == next).map_or(0, |(_, m)| *m);
                view.colors[*i].iter().enumerate().any(|(p, c)| c.is_green() && mask & (1 << p) != 0)
            }
        }
    }

    fn any_green(&self, edge: usize, view: &SignalView) -> bool {
        match &self.edges[edge].movements {
            None => true,
            Some((i, ms)) => {
                let mask = ms.iter().fold(0u8, |acc, (_, m)| acc | m);
                view.colors[*i].iter().enumerate().any(|(p, c)| c.is_green() && mask & (1 << p) != 0)
            }
        }
    }

    fn next_edge(&self, v: usize) -> usize {
        let veh = &self.vehicles[v];
        self.routes[veh.route][veh.pos + 1]
    }

    fn discharge(&mut self, now: u64, view: &SignalView) {
        let rate = 1.0 / SATURATION_HEADWAY_S;
        for e in 0..self.edges.len() {
            for l in 0..self.edges[e].lanes.len() {
                let head = self.edges[e].lanes[l].queue.front().copied();
                let green = match head {
                    Some(v) => self.movement_green(e, self.next_edge(v), view),
                    None => self.any_green(e, view),
                };
                let lane = &mut self.edges[e].lanes[l];
                if !green {
                    lane.credit = 0.0;
                    continue;
                }
                lane.credit = (lane.credit + rate).min(1.0);
                while self.edges[e].lanes[l].credit >= 1.0 - 1e-12 {
                    let Some(&v) = self.edges[e].lanes[l].queue.front() else { break };
                    let next = self.next_edge(v);
                    if !self.movement_green(e, next, view) || self.edges[next].occupancy >= self.edges[next].capacity {
                        break;
                    }
                    self.edges[e].lanes[l].queue.pop_front();
                    self.edges[e].lanes[l].credit -= 1.0;
                    self.edges[e].queued -= 1;
                    self.edges[e].occupancy -= 1;
                    self.leave_queue(v, now + 1);
                    self.enter_edge(v, next, self.vehicles[v].pos + 1, now + 1);
                    if let Some(trace) = &mut self.lane_trace {
                        trace.push(LaneEvent { edge: e, lane: l, vehicle: v, kind: LaneEventKind::Depart });
                    }
                }
            }
        }
    }

    fn leave_queue(&mut self, v: usize, at: u64) {
        let veh = &mut self.vehicles[v];
        if let Mode::Queued { since, .. } = veh.mode {
            veh.stopped_s += at - 1 - since;
        }
    }

    /// Places `v` at the start of `edge` (route position `pos`) at time `at`.
    fn enter_edge(&mut self, v: usize, edge: usize, pos: usize, at: u64) {
        let es = &mut self.edges[edge];
        es.moving.push_back(v);
        es.occupancy += 1;
        let veh = &mut self.vehicles[v];
        veh.pos = pos;
        veh.mode = Mode::FreeFlow { arrive_at: at + es.travel_ticks };
    }

    fn finish(&mut self, v: usize, at: u64) {
        let veh = &mut self.vehicles[v];
        veh.mode = Mode::Finished;
        veh.exit_s = Some(at);
        self.active -= 1;
        if veh.teleported {
            self.counters.teleported += 1;
        } else {
            self.counters.completed += 1;
        }
        self.finished.push(v);
    }

    fn scan_stopped(&mut self, now: u64) {
        let _ = now;
        for i in 0..self.phase_edges.len() {
            let counts: [u32; NUM_PHASES] =
                std::array::from_fn(|p| self.phase_edges[i][p].iter().map(|&e| self.edges[e].queued as u32).sum());
            self.current_window[i].counts.push(counts);
        }
    }

    /// Teleports every vehicle that has been queued continuously for the
    /// threshold. The vehicle moves to the first later edge of its route with
    /// room, or leaves the network when there is none.
    pub fn resolve_gridlock(&mut self, now: u64) {
        for e in 0..self.edges.len() {
            for l in 0..self.edges[e].lanes.len() {
                while let Some(&v) = self.edges[e].lanes[l].queue.front() {
                    let Mode::Queued { since, .. } = self.vehicles[v].mode else { unreachable!() };
                    let queued_s = now + 1 - since;
                    if queued_s < self.teleport_threshold {
                        break;
                    }
                    self.edges[e].lanes[l].queue.pop_front();
                    self.edges[e].queued -= 1;
                    self.edges[e].occupancy -= 1;
                    self.leave_queue(v, now + 1);
                    self.vehicles[v].teleported = true;
                    self.counters.teleport_events += 1;
                    if let Some(trace) = &mut self.lane_trace {
                        trace.push(LaneEvent { edge: e, lane: l, vehicle: v, kind: LaneEventKind::Depart });
                    }
                    let route = &self.routes[self.vehicles[v].route];
                    let target = (self.vehicles[v].pos + 1..route.len())
                        .find(|&k| self.edges[route[k]].occupancy < self.edges[route[k]].capacity);
                    let net = &self.scenario.network;
                    let to_edge = target.map(|k| net.edges[route[k]].id.clone());
                    self.events.push(SimEvent {
                        t: now + 1,
                        kind: "teleport".into(),
                        vehicle: v,
                        from_edge: net.edges[e].id.clone(),
                        to_edge,
                        queued_s,
                    });
                    match target {
                        Some(k) => {
                            let edge = route[k];
                            self.enter_edge(v, edge, k, now + 1);
                        }
                        None => self.finish(v, now + 1),
                    }
                }
            }
        }
    }

    /// Trip records for every vehicle that has left the network, in exit
    /// order.
    pub fn finalize_trips(&self) -> Vec<TripRecord> {
        let net = &self.scenario.network;
        self.finished
            .iter()
            .map(|&v| {
                let veh = &self.vehicles[v];
                let exit = veh.exit_s.expect("finished vehicle has an exit time");
                let travel = (exit - veh.entry_s) as f64;
                let length = net.route_length_m(&self.routes[veh.route]);
                TripRecord {
                    vehicle_id: v,
                    entry_s: veh.entry_s,
                    exit_s: exit,
                    travel_s: travel,
                    waiting_s: veh.stopped_s as f64,
                    speed_mps: if travel > 0.0 { length / travel } else { 0.0 },
                    teleported: veh.teleported,
                }
            })
            .collect()
    }

    // -- fixtures -----------------------------------------------------------

    /// Registers an extra route (edge list) and returns its index.
    pub fn add_route(&mut self, edges: Vec<usize>) -> usize {
        self.routes.push(edges);
        self.routes.len() - 1
    }

    /// Places a vehicle directly in the queue of `lane` on the edge at route
    /// position `pos`, as if it had joined at the current clock.
    pub fn place_queued(&mut self, route: usize, pos: usize, lane: usize) -> usize {
        let edge = self.routes[route][pos];
        let id = self.vehicles.len();
        self.vehicles.push(Vehicle {
            id,
            route,
            pos,
            entry_s: self.clock,
            exit_s: None,
            stopped_s: 0,
            mode: Mode::Queued { lane, since: self.clock },
            teleported: false,
        });
        let es = &mut self.edges[edge];
        es.lanes[lane].queue.push_back(id);
        es.lanes[lane].arrivals += 1;
        es.queued += 1;
        es.occupancy += 1;
        self.active += 1;
        self.counters.injected += 1;
        id
    }

    /// Places a moving vehicle at the start of the edge at route position `pos`.
    pub fn place_moving(&mut self, route: usize, pos: usize) -> usize {
        let edge = self.routes[route][pos];
        let id = self.vehicles.len();
        self.vehicles.push(Vehicle {
            id,
            route,
            pos,
            entry_s: self.clock,
            exit_s: None,
            stopped_s: 0,
            mode: Mode::Finished,
            teleported: false,
        });
        self.active += 1;
        self.counters.injected += 1;
        self.enter_edge(id, edge, pos, self.clock);
        id
    }
}

pub const TRIP_HEADER: [&str; 7] =
    ["vehicle_id", "entry_s", "exit_s", "travel_s", "waiting_s", "speed_mps", "teleported"];

pub fn write_trips<W: Write>(out: W, trips: &[TripRecord]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRIP_HEADER)?;
    for t in trips {
        w.write_record([
            t.vehicle_id.to_string(),
            t.entry_s.to_string(),
            t.exit_s.to_string(),
            format!("{}", t.travel_s),
            format!("{}", t.waiting_s),
            format!("{}", t.speed_mps),
            t.teleported.to_string(),
        ])?;
    }
    w.flush()
}

pub fn read_trips<R: std::io::Read>(input: R) -> Result<Vec<TripRecord>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

pub fn write_events<W: Write>(mut out: W, events: &[SimEvent]) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
