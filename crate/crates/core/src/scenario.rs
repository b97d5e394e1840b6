//! Road networks, demand profiles and weighted route sets.
//!
//! Scenarios are declared in a single JSON document (`"schema": 1`) and
//! validated on load. Routes are either given explicitly or enumerated from
//! the network and weighted inversely to their number of turns.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::SignalTiming;

/// Heading change (degrees) above which a pair of consecutive edges counts
/// as a turn.
pub const TURN_THRESHOLD_DEG: f64 = 30.0;

/// Default route length bound used when a scenario carries no explicit routes.
pub const DEFAULT_MAX_ROUTE_EDGES: usize = 12;

const SCHEMA_VERSION: u32 = 1;
const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported scenario schema version {0} (expected {SCHEMA_VERSION})")]
    Schema(u32),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("edge `{edge}` references missing node `{node}`")]
    DanglingNode { edge: String, node: String },
    #[error("edge `{edge}`: {reason}")]
    InvalidEdge { edge: String, reason: String },
    #[error("{context} references missing edge `{edge}`")]
    UnknownEdge { context: String, edge: String },
    #[error("intersection references missing node `{0}`")]
    UnknownIntersectionNode(String),
    #[error("intersection `{intersection}`: movement {in_edge} -> {out_edge} does not pass through the intersection node")]
    MovementMismatch {
        intersection: String,
        in_edge: String,
        out_edge: String,
    },
    #[error("intersection `{intersection}`: phase {phase} has no movements")]
    EmptyPhase { intersection: String, phase: usize },
    #[error("intersection `{intersection}` has {found} phases; exactly 2 are supported")]
    PhaseCount { intersection: String, found: usize },
    #[error("intersection `{intersection}`: inbound edge `{edge}` is not served by any phase")]
    UnservedApproach { intersection: String, edge: String },
    #[error("route {index}: {reason}")]
    InvalidRoute { index: usize, reason: String },
    #[error("entry edge `{0}` has no route")]
    NoRouteFromEntry(String),
    #[error("demand: {0}")]
    InvalidDemand(String),
    #[error("timing: {0}")]
    InvalidTiming(String),
    #[error("unknown bundled scenario `{0}`")]
    UnknownBundled(String),
}

impl ScenarioError {
    /// The id of the element that failed validation, when there is one.
    pub fn element_id(&self) -> Option<&str> {
        match self {
            Self::DuplicateId(id) | Self::UnknownIntersectionNode(id) | Self::NoRouteFromEntry(id) => {
                Some(id)
            }
            Self::DanglingNode { node, .. } => Some(node),
            Self::InvalidEdge { edge, .. } | Self::UnknownEdge { edge, .. } => Some(edge),
            Self::MovementMismatch { intersection, .. }
            | Self::EmptyPhase { intersection, .. }
            | Self::PhaseCount { intersection, .. } => Some(intersection),
            Self::UnservedApproach { edge, .. } => Some(edge),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// File schema

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<EdgeSpec>,
    pub intersections: Vec<IntersectionSpec>,
    pub demand: DemandSpec,
    pub timing: TimingSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub routes: Option<Vec<RouteSpec>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    pub lanes: u32,
    /// Metres.
    pub length: f64,
    /// Free-flow speed, m/s.
    pub speed: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntersectionSpec {
    pub node: String,
    /// Each phase is a list of `[in_edge, out_edge]` movements.
    pub phases: Vec<Vec<[String; 2]>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSpec {
    pub rate_per_lane_vps: f64,
    /// Optional per-entry-edge multiplier on the lane-proportional rate.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub entry_scale: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingSpec {
    pub cycle_s: u32,
    pub yellow_total_s: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteSpec {
    pub edges: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

// ---------------------------------------------------------------------------
// Validated model

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub lanes: u32,
    pub length: f64,
    pub speed: f64,
}

impl Edge {
    /// Free-flow traversal time, rounded up to whole seconds (at least 1).
    pub fn travel_ticks(&self) -> u64 {
        ((self.length / self.speed) - 1e-9).ceil().max(1.0) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Movement {
    pub from_edge: usize,
    pub to_edge: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Intersection {
    pub node: usize,
    pub phases: Vec<Vec<Movement>>,
}

impl Intersection {
    pub fn phase_count(&self) -> usize {
        self.phases.len()
    }

    /// Phases containing the movement.
    pub fn phases_of(&self, movement: Movement) -> impl Iterator<Item = usize> + '_ {
        self.phases
            .iter()
            .enumerate()
            .filter(move |(_, ms)| ms.contains(&movement))
            .map(|(p, _)| p)
    }

    /// Distinct inbound edges feeding phase `p`, in ascending index order.
    pub fn inbound_edges(&self, p: usize) -> Vec<usize> {
        let mut edges: Vec<usize> = self.phases[p].iter().map(|m| m.from_edge).collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }
}

#[derive(Debug, Clone)]
pub struct RoadNetwork {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub intersections: Vec<Intersection>,
    node_index: HashMap<String, usize>,
    edge_index: HashMap<String, usize>,
    successors: Vec<Vec<usize>>,
    predecessors: Vec<Vec<usize>>,
    intersection_at: Vec<Option<usize>>,
}

impl RoadNetwork {
    pub fn node_by_id(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn edge_by_id(&self, id: &str) -> Option<usize> {
        self.edge_index.get(id).copied()
    }

    /// Edges a vehicle may continue onto after `edge`.
    pub fn successors(&self, edge: usize) -> &[usize] {
        &self.successors[edge]
    }

    pub fn predecessors(&self, edge: usize) -> &[usize] {
        &self.predecessors[edge]
    }

    /// Index of the signalized intersection at `node`, if any.
    pub fn intersection_at(&self, node: usize) -> Option<usize> {
        self.intersection_at[node]
    }

    /// Edges with no inbound connection, ordered by id.
    pub fn entry_edges(&self) -> Vec<usize> {
        self.sorted_edges(|e| self.predecessors[e].is_empty())
    }

    /// Edges with no outbound connection, ordered by id.
    pub fn exit_edges(&self) -> Vec<usize> {
        self.sorted_edges(|e| self.successors[e].is_empty())
    }

    fn sorted_edges(&self, keep: impl Fn(usize) -> bool) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.edges.len()).filter(|&e| keep(e)).collect();
        out.sort_by(|&a, &b| self.edges[a].id.cmp(&self.edges[b].id));
        out
    }

    /// Compass heading of an edge in degrees, counter-clockwise from +x.
    pub fn heading_deg(&self, edge: usize) -> f64 {
        let e = &self.edges[edge];
        let (a, b) = (&self.nodes[e.from], &self.nodes[e.to]);
        (b.y - a.y).atan2(b.x - a.x).to_degrees()
    }

    /// Queue capacity of one lane of `edge` (vehicles).
    pub fn lane_capacity(&self, edge: usize) -> usize {
        ((self.edges[edge].length / crate::sim::VEHICLE_FOOTPRINT_M) + 1e-9).floor().max(1.0) as usize
    }

    /// Vehicle capacity of the whole edge.
    pub fn edge_capacity(&self, edge: usize) -> usize {
        self.lane_capacity(edge) * self.edges[edge].lanes as usize
    }

    pub fn route_length_m(&self, edges: &[usize]) -> f64 {
        edges.iter().map(|&e| self.edges[e].length).sum()
    }

    /// Total inbound lanes over the edges feeding phase `p` of intersection `i`.
    pub fn phase_lane_count(&self, i: usize, p: usize) -> u32 {
        self.intersections[i]
            .inbound_edges(p)
            .iter()
            .map(|&e| self.edges[e].lanes)
            .sum()
    }

    /// Builds a validated network from its file description.
    pub fn from_specs(
        nodes: &[NodeSpec],
        edges: &[EdgeSpec],
        intersections: &[IntersectionSpec],
    ) -> Result<Self, ScenarioError> {
        let mut node_index = HashMap::new();
        let mut out_nodes = Vec::with_capacity(nodes.len());
        for n in nodes {
            if node_index.insert(n.id.clone(), out_nodes.len()).is_some() {
                return Err(ScenarioError::DuplicateId(n.id.clone()));
            }
            out_nodes.push(Node { id: n.id.clone(), x: n.x, y: n.y });
        }

        let mut edge_index = HashMap::new();
        let mut out_edges = Vec::with_capacity(edges.len());
        for e in edges {
            let lookup = |node: &str| {
                node_index.get(node).copied().ok_or_else(|| ScenarioError::DanglingNode {
                    edge: e.id.clone(),
                    node: node.to_string(),
                })
            };
            let from = lookup(&e.from)?;
            let to = lookup(&e.to)?;
            let invalid = |reason: &str| ScenarioError::InvalidEdge {
                edge: e.id.clone(),
                reason: reason.to_string(),
            };
            if e.lanes < 1 {
                return Err(invalid("lane count must be at least 1"));
            }
            if !(e.length > 0.0 && e.length.is_finite()) {
                return Err(invalid("length must be positive"));
            }
            if !(e.speed > 0.0 && e.speed.is_finite()) {
                return Err(invalid("free speed must be positive"));
            }
            if from == to {
                return Err(invalid("self-loop"));
            }
            if edge_index.insert(e.id.clone(), out_edges.len()).is_some() || node_index.contains_key(&e.id) {
                return Err(ScenarioError::DuplicateId(e.id.clone()));
            }
            out_edges.push(Edge {
                id: e.id.clone(),
                from,
                to,
                lanes: e.lanes,
                length: e.length,
                speed: e.speed,
            });
        }

        let mut intersection_at = vec![None; out_nodes.len()];
        let mut out_ints = Vec::with_capacity(intersections.len());
        for spec in intersections {
            let node = *node_index
                .get(&spec.node)
                .ok_or_else(|| ScenarioError::UnknownIntersectionNode(spec.node.clone()))?;
            if intersection_at[node].is_some() {
                return Err(ScenarioError::DuplicateId(spec.node.clone()));
            }
            if spec.phases.len() != 2 {
                return Err(ScenarioError::PhaseCount {
                    intersection: spec.node.clone(),
                    found: spec.phases.len(),
                });
            }
            let mut phases = Vec::with_capacity(spec.phases.len());
            for (p, movements) in spec.phases.iter().enumerate() {
                if movements.is_empty() {
                    return Err(ScenarioError::EmptyPhase { intersection: spec.node.clone(), phase: p });
                }
                let mut phase = Vec::with_capacity(movements.len());
                for [a, b] in movements {
                    let edge = |id: &String| {
                        edge_index.get(id).copied().ok_or_else(|| ScenarioError::UnknownEdge {
                            context: format!("intersection `{}`", spec.node),
                            edge: id.clone(),
                        })
                    };
                    let (from_edge, to_edge) = (edge(a)?, edge(b)?);
                    if out_edges[from_edge].to != node || out_edges[to_edge].from != node {
                        return Err(ScenarioError::MovementMismatch {
                            intersection: spec.node.clone(),
                            in_edge: a.clone(),
                            out_edge: b.clone(),
                        });
                    }
                    let m = Movement { from_edge, to_edge };
                    if !phase.contains(&m) {
                        phase.push(m);
                    }
                }
                phases.push(phase);
            }
            intersection_at[node] = Some(out_ints.len());
            out_ints.push(Intersection { node, phases });
        }

        // Connections: phase movements at signalized nodes, every non-U-turn
        // pair elsewhere.
        let mut successors = vec![Vec::new(); out_edges.len()];
        for (e, edge) in out_edges.iter().enumerate() {
            let node = edge.to;
            let mut next: Vec<usize> = match intersection_at[node] {
                Some(i) => out_ints[i]
                    .phases
                    .iter()
                    .flatten()
                    .filter(|m| m.from_edge == e)
                    .map(|m| m.to_edge)
                    .collect(),
                None => (0..out_edges.len())
                    .filter(|&o| out_edges[o].from == node && out_edges[o].to != edge.from)
                    .collect(),
            };
            next.sort_by(|&a, &b| out_edges[a].id.cmp(&out_edges[b].id));
            next.dedup();
            successors[e] = next;
        }
        for int in &out_ints {
            for (e, edge) in out_edges.iter().enumerate() {
                if edge.to == int.node && successors[e].is_empty() {
                    return Err(ScenarioError::UnservedApproach {
                        intersection: out_nodes[int.node].id.clone(),
                        edge: edge.id.clone(),
                    });
                }
            }
        }
        let mut predecessors = vec![Vec::new(); out_edges.len()];
        for (e, next) in successors.iter().enumerate() {
            for &n in next {
                predecessors[n].push(e);
            }
        }

        Ok(Self {
            nodes: out_nodes,
            edges: out_edges,
            intersections: out_ints,
            node_index,
            edge_index,
            successors,
            predecessors,
            intersection_at,
        })
    }
}

// ---------------------------------------------------------------------------
// Routes

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub edges: Vec<usize>,
    pub turns: u32,
    pub weight: f64,
}

impl Route {
    pub fn entry(&self) -> usize {
        self.edges[0]
    }
}

/// Number of consecutive edge pairs whose heading differs by more than
/// [`TURN_THRESHOLD_DEG`].
pub fn turn_count(edges: &[usize], net: &RoadNetwork) -> u32 {
    edges
        .windows(2)
        .filter(|w| heading_change_deg(net.heading_deg(w[0]), net.heading_deg(w[1])) > TURN_THRESHOLD_DEG)
        .count() as u32
}

fn heading_change_deg(a: f64, b: f64) -> f64 {
    let d = (b - a).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// All node-simple paths from entry edges to exit edges with at most
/// `max_len` edges, sorted lexicographically by edge ids. Weights are left at
/// zero; see [`weight_routes`].
pub fn enumerate_routes(net: &RoadNetwork, max_len: usize) -> Vec<Route> {
    let mut found: Vec<Vec<usize>> = Vec::new();
    let mut path = Vec::new();
    let mut visited = HashSet::new();
    for entry in net.entry_edges() {
        visited.clear();
        visited.insert(net.edges[entry].from);
        walk(net, entry, max_len, &mut path, &mut visited, &mut found);
    }
    let key = |r: &Vec<usize>| r.iter().map(|&e| net.edges[e].id.as_str()).collect::<Vec<_>>();
    found.sort_by(|a, b| key(a).cmp(&key(b)));
    found
        .into_iter()
        .map(|edges| Route { turns: turn_count(&edges, net), edges, weight: 0.0 })
        .collect()
}

fn walk(
    net: &RoadNetwork,
    edge: usize,
    max_len: usize,
    path: &mut Vec<usize>,
    visited: &mut HashSet<usize>,
    found: &mut Vec<Vec<usize>>,
) {
    let head = net.edges[edge].to;
    if path.len() >= max_len || !visited.insert(head) {
        return;
    }
    path.push(edge);
    let next = net.successors(edge);
    if next.is_empty() {
        if path.len() >= 2 {
            found.push(path.clone());
        }
    } else {
        for &n in next {
            walk(net, n, max_len, path, visited, found);
        }
    }
    path.pop();
    visited.remove(&head);
}

/// Sets `weight = (1 + turns)^-1` normalized within each entry-edge group.
/// Every entry edge of `net` must start at least one route.
pub fn weight_routes(net: &RoadNetwork, routes: &[Route]) -> Result<Vec<Route>, ScenarioError> {
    let mut totals: HashMap<usize, f64> = HashMap::new();
    for r in routes {
        *totals.entry(r.entry()).or_default() += 1.0 / (1.0 + r.turns as f64);
    }
    for entry in net.entry_edges() {
        if !totals.contains_key(&entry) {
            return Err(ScenarioError::NoRouteFromEntry(net.edges[entry].id.clone()));
        }
    }
    Ok(routes
        .iter()
        .map(|r| Route {
            weight: (1.0 / (1.0 + r.turns as f64)) / totals[&r.entry()],
            ..r.clone()
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Demand

#[derive(Debug, Clone, PartialEq)]
pub struct DemandProfile {
    pub rate_per_lane_vps: f64,
    /// Bernoulli insertion probability per second, per entry edge (indexed by
    /// edge; zero for non-entry edges).
    pub insertion_prob: Vec<f64>,
    pub entry_scale: Vec<f64>,
}

impl DemandProfile {
    pub fn new(net: &RoadNetwork, rate_per_lane_vps: f64, entry_scale: Vec<f64>) -> Self {
        let mut insertion_prob = vec![0.0; net.edges.len()];
        for e in net.entry_edges() {
            insertion_prob[e] =
                (rate_per_lane_vps * net.edges[e].lanes as f64 * entry_scale[e]).clamp(0.0, 1.0);
        }
        Self { rate_per_lane_vps, insertion_prob, entry_scale }
    }

    /// Same profile with the base rate multiplied by `factor`.
    pub fn scaled(&self, net: &RoadNetwork, factor: f64) -> Self {
        Self::new(net, self.rate_per_lane_vps * factor, self.entry_scale.clone())
    }
}

// ---------------------------------------------------------------------------
// Scenario

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub network: RoadNetwork,
    pub routes: Vec<Route>,
    pub demand: DemandProfile,
    pub timing: SignalTiming,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} nodes, {} edges, {} intersections, {} routes",
            self.name,
            self.network.nodes.len(),
            self.network.edges.len(),
            self.network.intersections.len(),
            self.routes.len()
        )
    }
}

impl Scenario {
    pub fn from_json_str(text: &str, default_name: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        Self::from_file(file, default_name)
    }

    pub fn from_file(file: ScenarioFile, default_name: &str) -> Result<Self, ScenarioError> {
        if file.schema != SCHEMA_VERSION {
            return Err(ScenarioError::Schema(file.schema));
        }
        let network = RoadNetwork::from_specs(&file.nodes, &file.edges, &file.intersections)?;

        let timing = SignalTiming::new(file.timing.cycle_s, file.timing.yellow_total_s)
            .map_err(|e| ScenarioError::InvalidTiming(e.to_string()))?;

        let rate = file.demand.rate_per_lane_vps;
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(ScenarioError::InvalidDemand("rate_per_lane_vps must be non-negative".into()));
        }
        let mut entry_scale = vec![1.0; network.edges.len()];
        let entries = network.entry_edges();
        for (id, &scale) in &file.demand.entry_scale {
            let e = network.edge_by_id(id).ok_or_else(|| ScenarioError::UnknownEdge {
                context: "demand.entry_scale".into(),
                edge: id.clone(),
            })?;
            if !entries.contains(&e) {
                return Err(ScenarioError::InvalidDemand(format!("`{id}` is not an entry edge")));
            }
            if !(scale >= 0.0 && scale.is_finite()) {
                return Err(ScenarioError::InvalidDemand(format!("scale for `{id}` must be non-negative")));
            }
            entry_scale[e] = scale;
        }
        let demand = DemandProfile::new(&network, rate, entry_scale);

        let routes = match &file.routes {
            Some(specs) => explicit_routes(&network, specs)?,
            None => {
                let routes = enumerate_routes(&network, DEFAULT_MAX_ROUTE_EDGES);
                weight_routes(&network, &routes)?
            }
        };

        Ok(Self {
            name: file.name.unwrap_or_else(|| default_name.to_string()),
            network,
            routes,
            demand,
            timing,
        })
    }

    /// Loads and validates a scenario file. The file stem names the scenario
    /// unless the document carries a `name`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
        Self::from_json_str(&text, stem)
    }

    /// One of the scenarios shipped with the crate.
    pub fn bundled(name: &str) -> Result<Self, ScenarioError> {
        let text = bundled_source(name).ok_or_else(|| ScenarioError::UnknownBundled(name.to_string()))?;
        Self::from_json_str(text, name)
    }

    /// Routes starting at `entry`, as (route index, weight).
    pub fn routes_from(&self, entry: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.routes
            .iter()
            .enumerate()
            .filter(move |(_, r)| r.entry() == entry)
            .map(|(i, r)| (i, r.weight))
    }

    /// Copy of the scenario with every insertion rate multiplied by `factor`.
    pub fn with_demand_scale(&self, factor: f64) -> Self {
        Self { demand: self.demand.scaled(&self.network, factor), ..self.clone() }
    }

    /// Human-readable route table.
    pub fn route_table(&self) -> String {
        let mut out = String::from("entry\tturns\tweight\troute\n");
        for r in &self.routes {
            let ids: Vec<&str> = r.edges.iter().map(|&e| self.network.edges[e].id.as_str()).collect();
            out.push_str(&format!(
                "{}\t{}\t{:.6}\t{}\n",
                self.network.edges[r.entry()].id,
                r.turns,
                r.weight,
                ids.join(" > ")
            ));
        }
        out
    }
}

fn explicit_routes(net: &RoadNetwork, specs: &[RouteSpec]) -> Result<Vec<Route>, ScenarioError> {
    let mut routes = Vec::with_capacity(specs.len());
    for (index, spec) in specs.iter().enumerate() {
        let invalid = |reason: String| ScenarioError::InvalidRoute { index, reason };
        if spec.edges.is_empty() {
            return Err(invalid("empty route".into()));
        }
        let edges = spec
            .edges
            .iter()
            .map(|id| {
                net.edge_by_id(id).ok_or_else(|| ScenarioError::UnknownEdge {
                    context: format!("route {index}"),
                    edge: id.clone(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        for w in edges.windows(2) {
            if !net.successors(w[0]).contains(&w[1]) {
                return Err(invalid(format!(
                    "`{}` does not connect to `{}`",
                    net.edges[w[0]].id, net.edges[w[1]].id
                )));
            }
        }
        if !net.successors(*edges.last().unwrap()).is_empty() {
            return Err(invalid("route must end on an exit edge".into()));
        }
        if !net.predecessors(edges[0]).is_empty() {
            return Err(invalid("route must start on an entry edge".into()));
        }
        if let Some(w) = spec.weight {
            if !(w > 0.0 && w.is_finite()) {
                return Err(invalid("weight must be positive".into()));
            }
        }
        routes.push(Route { turns: turn_count(&edges, net), edges, weight: spec.weight.unwrap_or(0.0) });
    }

    if specs.iter().all(|s| s.weight.is_none()) {
        return weight_routes(net, &routes);
    }
    if specs.iter().any(|s| s.weight.is_none()) {
        return Err(ScenarioError::InvalidRoute {
            index: specs.iter().position(|s| s.weight.is_none()).unwrap(),
            reason: "either all explicit routes carry a weight or none do".into(),
        });
    }
    let mut totals: HashMap<usize, f64> = HashMap::new();
    for r in &routes {
        *totals.entry(r.entry()).or_default() += r.weight;
    }
    for entry in net.entry_edges() {
        if !totals.contains_key(&entry) {
            return Err(ScenarioError::NoRouteFromEntry(net.edges[entry].id.clone()));
        }
    }
    for r in &mut routes {
        r.weight /= totals[&r.entry()];
    }
    Ok(routes)
}

/// Per-entry sums of route weights; each should be 1.
pub fn weight_sums(routes: &[Route]) -> BTreeMap<usize, f64> {
    let mut sums = BTreeMap::new();
    for r in routes {
        *sums.entry(r.entry()).or_insert(0.0) += r.weight;
    }
    sums
}

pub fn weights_normalized(routes: &[Route]) -> bool {
    weight_sums(routes).values().all(|s| (s - 1.0).abs() <= WEIGHT_TOLERANCE)
}

pub const BUNDLED: [&str; 3] = ["single_intersection", "single_intersection_symmetric", "arterial_3"];

pub fn bundled_source(name: &str) -> Option<&'static str> {
    match name {
        "single_intersection" => Some(include_str!("../scenarios/single_intersection.json")),
        "single_intersection_symmetric" => {
            Some(include_str!("../scenarios/single_intersection_symmetric.json"))
        }
        "arterial_3" => Some(include_str!("../scenarios/arterial_3.json")),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_edge(id: &str, from: &str, to: &str) -> EdgeSpec {
        EdgeSpec { id: id.into(), from: from.into(), to: to.into(), lanes: 1, length: 100.0, speed: 10.0 }
    }

    fn node(id: &str, x: f64, y: f64) -> NodeSpec {
        NodeSpec { id: id.into(), x, y }
    }

    fn corridor() -> RoadNetwork {
        RoadNetwork::from_specs(
            &[node("A", 0.0, 0.0), node("B", 100.0, 0.0), node("C", 200.0, 0.0)],
            &[spec_edge("ab", "A", "B"), spec_edge("bc", "B", "C")],
            &[],
        )
        .unwrap()
    }

    #[test]
    fn corridor_has_one_route() {
        let net = corridor();
        let routes = enumerate_routes(&net, 5);
        assert_eq!(routes.len(), 1);
        assert_eq!(routes[0].turns, 0);
        let weighted = weight_routes(&net, &routes).unwrap();
        assert_eq!(weighted[0].weight, 1.0);
    }

    #[test]
    fn single_intersection_routes() {
        let s = Scenario::bundled("single_intersection").unwrap();
        assert_eq!(enumerate_routes(&s.network, 2).len(), 12);
        assert!(enumerate_routes(&s.network, 1).is_empty());
        assert!(weights_normalized(&s.routes));
    }

    #[test]
    fn turn_counts_on_the_cross() {
        let s = Scenario::bundled("single_intersection").unwrap();
        let net = &s.network;
        let e = |id: &str| net.edge_by_id(id).unwrap();
        assert_eq!(turn_count(&[e("E_in"), e("W_out")], net), 0);
        assert_eq!(turn_count(&[e("E_in"), e("S_out")], net), 1);
    }

    #[test]
    fn two_turn_route() {
        // A staircase: east, north, east.
        let net = RoadNetwork::from_specs(
            &[node("a", 0.0, 0.0), node("b", 10.0, 0.0), node("c", 10.0, 10.0), node("d", 20.0, 10.0)],
            &[spec_edge("1", "a", "b"), spec_edge("2", "b", "c"), spec_edge("3", "c", "d")],
            &[],
        )
        .unwrap();
        assert_eq!(turn_count(&[0, 1, 2], &net), 2);
    }

    #[test]
    fn weights_follow_inverse_turns() {
        let net = corridor();
        let mk = |turns| Route { edges: vec![0, 1], turns, weight: 0.0 };
        let w: Vec<f64> = weight_routes(&net, &[mk(0), mk(1), mk(1)]).unwrap().iter().map(|r| r.weight).collect();
        assert_eq!(w, vec![0.5, 0.25, 0.25]);
        let w: Vec<f64> = weight_routes(&net, &[mk(0), mk(0)]).unwrap().iter().map(|r| r.weight).collect();
        assert_eq!(w, vec![0.5, 0.5]);
        let w = weight_routes(&net, &[mk(3)]).unwrap();
        assert_eq!(w[0].weight, 1.0);
    }

    #[test]
    fn missing_entry_group_is_an_error() {
        let net = corridor();
        assert!(matches!(weight_routes(&net, &[]), Err(ScenarioError::NoRouteFromEntry(id)) if id == "ab"));
    }

    #[test]
    fn dangling_node_is_named() {
        let err = RoadNetwork::from_specs(&[node("A", 0.0, 0.0)], &[spec_edge("e", "A", "X")], &[]).unwrap_err();
        assert_eq!(err.element_id(), Some("X"));
        assert!(err.to_string().contains("`X`"));
    }

    #[test]
    fn phase_rules_are_enforced() {
        let nodes = [node("A", 0.0, 0.0), node("C", 100.0, 0.0), node("B", 200.0, 0.0)];
        let edges = [spec_edge("in", "A", "C"), spec_edge("out", "C", "B")];
        let mv = || vec![["in".to_string(), "out".to_string()]];
        let one_phase = IntersectionSpec { node: "C".into(), phases: vec![mv()] };
        assert!(matches!(
            RoadNetwork::from_specs(&nodes, &edges, &[one_phase]),
            Err(ScenarioError::PhaseCount { found: 1, .. })
        ));
        let empty = IntersectionSpec { node: "C".into(), phases: vec![mv(), vec![]] };
        assert!(matches!(
            RoadNetwork::from_specs(&nodes, &edges, &[empty]),
            Err(ScenarioError::EmptyPhase { phase: 1, .. })
        ));
        let wrong = IntersectionSpec { node: "C".into(), phases: vec![mv(), vec![["out".into(), "in".into()]]] };
        assert!(matches!(
            RoadNetwork::from_specs(&nodes, &edges, &[wrong]),
            Err(ScenarioError::MovementMismatch { .. })
        ));
    }

    #[test]
    fn demand_is_lane_proportional_and_clamped() {
        let s = Scenario::bundled("single_intersection_symmetric").unwrap();
        let e = s.network.edge_by_id("N_in").unwrap();
        assert!((s.demand.insertion_prob[e] - s.demand.rate_per_lane_vps * 3.0).abs() < 1e-12);
        let big = s.with_demand_scale(1e6);
        assert_eq!(big.demand.insertion_prob[e], 1.0);
    }

    #[test]
    fn bundled_scenarios_load() {
        for name in BUNDLED {
            let s = Scenario::bundled(name).unwrap();
            assert!(weights_normalized(&s.routes), "{name}");
        }
        assert_eq!(Scenario::bundled("arterial_3").unwrap().network.intersections.len(), 3);
    }
}
