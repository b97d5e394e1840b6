//! Deep Q-network learner with experience replay and a target network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Adam, Gradients, Mlp};
use super::replay::ReplayBuffer;
use super::{reward, AgentError, MdpStep, State};
use crate::control::PlanPolicy;
use crate::signal::{SignalPlan, NUM_PHASES, NUM_PLANS};
use crate::sim::Simulation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub gamma: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub warmup: usize,
    /// Decisions between target-network copies.
    pub target_sync: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the training cycles over which ε decays linearly.
    pub epsilon_decay_fraction: f64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            learning_rate: 1e-3,
            gamma: 0.95,
            replay_capacity: 10_000,
            batch_size: 32,
            warmup: 100,
            target_sync: 200,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.6,
        }
    }
}

impl DqnConfig {
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![NUM_PHASES];
        s.extend(&self.hidden);
        s.push(NUM_PLANS);
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_cycles: u64,
}

impl EpsilonSchedule {
    pub fn new(config: &DqnConfig, total_cycles: u64) -> Self {
        let decay_cycles = (config.epsilon_decay_fraction * total_cycles as f64).round() as u64;
        Self { start: config.epsilon_start, end: config.epsilon_end, decay_cycles }
    }

    pub fn value(&self, cycle: u64) -> f64 {
        if cycle >= self.decay_cycles {
            return self.end;
        }
        self.start + (self.end - self.start) * cycle as f64 / self.decay_cycles as f64
    }
}

/// Mean squared TD error over the batch and its gradient with respect to the
/// online network. The bootstrap target uses `target` and is treated as a
/// constant.
pub fn dqn_loss_and_gradient(
    batch: &[MdpStep],
    online: &Mlp,
    target: &Mlp,
    gamma: f64,
) -> Result<(f64, Gradients), AgentError> {
    if batch.is_empty() {
        return Err(AgentError::EmptyBatch);
    }
    if !online.same_shape(target) {
        return Err(AgentError::Dimension(format!("online {:?} vs target {:?}", online.sizes(), target.sizes())));
    }
    if online.inputs() != NUM_PHASES {
        return Err(AgentError::Dimension(format!("network takes {} inputs, states have {NUM_PHASES}", online.inputs())));
    }
    let n_out = online.outputs();
    let mut grads = Mlp::zeros_like(online);
    let mut loss = 0.0;
    let scale = 1.0 / batch.len() as f64;
    let mut d_out = vec![0.0; n_out];
    for step in batch {
        if step.action >= n_out {
            return Err(AgentError::Dimension(format!("action {} with {n_out} outputs", step.action)));
        }
        let next = target.forward(&step.next_state);
        let y = step.reward + gamma * next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let trace = online.trace(&step.state);
        let q = trace.output()[step.action];
        let err = y - q;
        loss += err * err * scale;
        d_out.fill(0.0);
        d_out[step.action] = -2.0 * err * scale;
        online.backward(&trace, &d_out, &mut grads);
    }
    Ok((loss, grads))
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy selection. No random draws are made when ε is 0.
pub fn select_action<R: Rng>(net: &Mlp, state: &State, epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return rng.gen_range(0..net.outputs());
    }
    argmax(&net.forward(state))
}

#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub config: DqnConfig,
    pub online: Mlp,
    pub target: Mlp,
    adam: Adam,
    replay: ReplayBuffer,
    decisions: u64,
    rng: ChaCha8Rng,
}

impl DqnAgent {
    pub fn new(config: DqnConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let online = Mlp::new(&config.layer_sizes(), &mut rng);
        Self::from_network(config, online, rng)
    }

    /// Agent around existing parameters; the target starts as a copy.
    pub fn from_parts(config: DqnConfig, online: Mlp, seed: u64) -> Self {
        Self::from_network(config, online, ChaCha8Rng::seed_from_u64(seed))
    }

    fn from_network(config: DqnConfig, online: Mlp, rng: ChaCha8Rng) -> Self {
        Self {
            target: online.clone(),
            adam: Adam::new(&online, config.learning_rate),
            replay: ReplayBuffer::new(config.replay_capacity),
            decisions: 0,
            online,
            config,
            rng,
        }
    }

    pub fn decisions(&self) -> u64 {
        self.decisions
    }

    pub fn gradient_steps(&self) -> u64 {
        self.adam.steps()
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    pub fn q_values(&self, state: &State) -> Vec<f64> {
        self.online.forward(state)
    }

    pub fn greedy(&self, state: &State) -> usize {
        argmax(&self.q_values(state))
    }

    pub fn act(&mut self, state: &State, epsilon: f64) -> usize {
        select_action(&self.online, state, epsilon, &mut self.rng)
    }

    /// Stores the transition, takes one gradient step once the buffer holds
    /// `warmup` transitions, and refreshes the target every `target_sync`
    /// decisions. Returns the batch loss when a step was taken.
    pub fn train_step(&mut self, step: MdpStep) -> Option<f64> {
        self.replay.push(step);
        self.decisions += 1;
        let mut loss = None;
        if self.replay.len() >= self.config.warmup {
            let batch = self.replay.sample(self.config.batch_size, &mut self.rng);
            let (l, g) = dqn_loss_and_gradient(&batch, &self.online, &self.target, self.config.gamma)
                .expect("agent networks share one shape");
            self.adam.step(&mut self.online, &g);
            loss = Some(l);
        }
        if self.decisions % self.config.target_sync == 0 {
            self.target = self.online.clone();
        }
        loss
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DqnMode {
    /// ε-greedy with learning, annealed over this many cycles.
    Train { total_cycles: u64 },
    /// ε = 0, parameters frozen.
    Greedy,
}

/// One independent agent per intersection, deciding at every cycle start.
pub struct DqnPolicy {
    pub agents: Vec<DqnAgent>,
    mode: DqnMode,
    schedule: EpsilonSchedule,
    prev: Vec<Option<(State, usize)>>,
    losses: Vec<Vec<f64>>,
}

impl DqnPolicy {
    pub fn new(agents: Vec<DqnAgent>, mode: DqnMode) -> Self {
        let n = agents.len();
        let total = match mode {
            DqnMode::Train { total_cycles } => total_cycles,
            DqnMode::Greedy => 0,
        };
        let schedule = match agents.first() {
            Some(a) => EpsilonSchedule::new(&a.config, total),
            None => EpsilonSchedule { start: 0.0, end: 0.0, decay_cycles: 0 },
        };
        Self { agents, mode, schedule, prev: vec![None; n], losses: vec![Vec::new(); n] }
    }

    pub fn mode(&self) -> DqnMode {
        self.mode
    }

    pub fn epsilon(&self, cycle: u64) -> f64 {
        match self.mode {
            DqnMode::Train { .. } => self.schedule.value(cycle),
            DqnMode::Greedy => 0.0,
        }
    }

    /// Mean training loss per intersection.
    pub fn mean_losses(&self) -> Vec<Option<f64>> {
        self.losses
            .iter()
            .map(|l| if l.is_empty() { None } else { Some(l.iter().sum::<f64>() / l.len() as f64) })
            .collect()
    }

    pub fn into_agents(self) -> Vec<DqnAgent> {
        self.agents
    }
}

impl PlanPolicy for DqnPolicy {
    fn label(&self) -> String {
        "dqn".into()
    }

    fn choose(&mut self, i: usize, cycle: u64, obs: Option<State>, _sim: &Simulation) -> SignalPlan {
        let state = obs.unwrap_or([0.0; NUM_PHASES]);
        if let (DqnMode::Train { .. }, Some((s, a))) = (self.mode, self.prev[i]) {
            let step = MdpStep { state: s, action: a, reward: reward(&state), next_state: state };
            if let Some(l) = self.agents[i].train_step(step) {
                self.losses[i].push(l);
            }
        }
        let eps = self.epsilon(cycle);
        let a = self.agents[i].act(&state, eps);
        self.prev[i] = Some((state, a));
        SignalPlan::from_index(a).expect("network outputs match the action space")
    }
}
