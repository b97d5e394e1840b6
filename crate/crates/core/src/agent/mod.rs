//! Reinforcement-learning stack: MDP plumbing, a tabular Q-learning oracle
//! and the DQN learner.

mod checkpoint;
mod dqn;
mod mlp;
mod replay;
mod tabular;

pub use checkpoint::{Checkpoint, CheckpointAgent, CheckpointError, CheckpointMeta, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use dqn::{argmax, dqn_loss_and_gradient, select_action, DqnAgent, DqnConfig, DqnMode, DqnPolicy, EpsilonSchedule};
pub use mlp::{Adam, Gradients, Layer, Mlp};
pub use replay::ReplayBuffer;
pub use tabular::{QTable, ToyQueueMdp, DeterministicMdp};

use thiserror::Error;

use crate::signal::NUM_PHASES;
use crate::sim::{cumulative_stopped, Simulation};

pub type State = [f64; NUM_PHASES];

#[derive(Debug, Error, PartialEq)]
pub enum AgentError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("empty batch")]
    EmptyBatch,
}

/// One (s, a, r, s') transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdpStep {
    pub state: State,
    pub action: usize,
    pub reward: f64,
    pub next_state: State,
}

/// Lane-normalized time-averaged stop counts of the last completed cycle at
/// intersection `i`, or `None` before the first cycle completes.
pub fn observe(sim: &Simulation, i: usize) -> Option<State> {
    let window = sim.last_window(i)?;
    let net = &sim.scenario().network;
    let cycle = sim.scenario().timing.cycle_s as usize;
    let mut s = [0.0; NUM_PHASES];
    for (p, w) in s.iter_mut().enumerate() {
        let lanes = net.phase_lane_count(i, p).max(1) as f64;
        *w = cumulative_stopped(window, p, cycle).ok()? / lanes;
    }
    Some(s)
}

/// Action-independent reward: minus the total stop measure.
pub fn reward(state: &State) -> f64 {
    -state.iter().sum::<f64>()
}

/// Σ γ^t r_t.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;
    use crate::signal::PhaseColor::*;
    use crate::sim::SignalView;
    use std::sync::Arc;

    #[test]
    fn reward_examples() {
        assert_eq!(reward(&[0.0, 0.0]), 0.0);
        assert_eq!(reward(&[3.0, 2.0]), -5.0);
        assert_eq!(reward(&[2.0, 3.0]), reward(&[3.0, 2.0]));
    }

    #[test]
    fn discounted_return_examples() {
        assert_eq!(discounted_return(&[1.0, 1.0, 1.0], 0.5), 1.75);
        assert_eq!(discounted_return(&[4.0, 9.0, 9.0], 0.0), 4.0);
        assert_eq!(discounted_return(&[], 0.9), 0.0);
    }

    fn silent() -> Simulation {
        let s = Arc::new(Scenario::bundled("single_intersection").unwrap());
        let mut sim = Simulation::new(s.clone(), 0);
        for e in s.network.entry_edges() {
            sim.set_insertion_prob(e, 0.0);
        }
        sim
    }

    #[test]
    fn observe_empty_cycle() {
        let mut sim = silent();
        assert_eq!(observe(&sim, 0), None);
        for _ in 0..60 {
            sim.step(&SignalView { colors: vec![[Green, Red]] });
        }
        assert_eq!(observe(&sim, 0), Some([0.0, 0.0]));
    }

    #[test]
    fn observe_normalizes_by_lane_count() {
        let mut sim = silent();
        let net = sim.scenario().network.clone();
        let n_in = net.edge_by_id("N_in").unwrap();
        let s_in = net.edge_by_id("S_in").unwrap();
        let e_out = net.edge_by_id("E_out").unwrap();
        let w_out = net.edge_by_id("W_out").unwrap();
        let rn = sim.add_route(vec![n_in, e_out]);
        let rs = sim.add_route(vec![s_in, w_out]);
        for lane in 0..3 {
            sim.place_queued(rn, 0, lane);
            sim.place_queued(rs, 0, lane);
        }
        for _ in 0..60 {
            sim.step(&SignalView { colors: vec![[Red, Green]] });
        }
        assert_eq!(net.phase_lane_count(0, 0), 6);
        assert_eq!(observe(&sim, 0), Some([1.0, 0.0]));
    }
}
