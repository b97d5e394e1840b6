use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::eval::Policy;
use super::HarnessError;
use crate::scenario::Scenario;
use crate::sim::Simulation;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrateConfig {
    /// Largest allowed time-averaged queue, as a fraction of edge capacity.
    pub target_queue_fraction: f64,
    pub seeds: Vec<u64>,
    pub cycles: u64,
    /// Bisection stops once hi / lo falls below this ratio.
    pub tolerance: f64,
    pub max_scale: f64,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        Self { target_queue_fraction: 0.5, seeds: vec![1, 2, 3], cycles: 60, tolerance: 1.02, max_scale: 256.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QueueStats {
    pub teleports: u64,
    /// Largest per-edge time-averaged queue over capacity.
    pub max_queue_fraction: f64,
}

/// Queue statistics of the 50/50 fixed plan at demand `scale`.
pub fn queue_stats(scenario: &Scenario, scale: f64, seed: u64, cycles: u64) -> QueueStats {
    let scenario = Arc::new(scenario.with_demand_scale(scale));
    let mut sim = Simulation::new(scenario.clone(), seed);
    let mut ctrl = Policy::Static(3).build(&sim);
    let n = scenario.network.edges.len();
    let mut totals = vec![0u64; n];
    let ticks = cycles * scenario.timing.cycle_s as u64;
    for _ in 0..ticks {
        let view = ctrl.signals(&sim);
        sim.step(&view);
        ctrl.after_tick(&sim);
        for (e, t) in totals.iter_mut().enumerate() {
            *t += sim.queued_on(e) as u64;
        }
    }
    let max_queue_fraction = (0..n)
        .map(|e| totals[e] as f64 / ticks as f64 / scenario.network.edge_capacity(e).max(1) as f64)
        .fold(0.0, f64::max);
    QueueStats { teleports: sim.counters().teleport_events, max_queue_fraction }
}

fn violates(scenario: &Scenario, scale: f64, config: &CalibrateConfig) -> bool {
    config.seeds.par_iter().any(|&seed| {
        let q = queue_stats(scenario, scale, seed, config.cycles);
        q.teleports > 0 || q.max_queue_fraction >= config.target_queue_fraction
    })
}

/// Largest demand scale (to within the tolerance ratio) at which the 50/50
/// plan runs without teleports and keeps every queue below the target
/// fraction of capacity on all seeds.
pub fn calibrate_demand(scenario: &Scenario, config: &CalibrateConfig) -> Result<f64, HarnessError> {
    if config.seeds.is_empty() || !(config.tolerance > 1.0) {
        return Err(HarnessError::Config("calibration needs seeds and a tolerance above 1".into()));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while !violates(scenario, hi, config) {
        lo = hi;
        hi *= 2.0;
        if hi > config.max_scale {
            return Err(HarnessError::Config(format!(
                "queues stay below {} of capacity up to scale {}",
                config.target_queue_fraction, config.max_scale
            )));
        }
    }
    while lo == 0.0 || hi / lo >= config.tolerance {
        let mid = 0.5 * (lo + hi);
        if violates(scenario, mid, config) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi < 1e-9 {
            return Err(HarnessError::Config("no positive demand keeps queues below target".into()));
        }
    }
    Ok(lo)
}
