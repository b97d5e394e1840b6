//! Tabular Q-learning and value iteration on small deterministic MDPs. Used
//! to check the DQN learner against exact answers.

use crate::signal::{NUM_PLANS, PLAN_SPLITS};

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub n_states: usize,
    pub n_actions: usize,
    pub q: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, q: vec![0.0; n_states * n_actions] }
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.q[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.q[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn max(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Q(s,a) += α (r + γ max Q(s',·) − Q(s,a)).
    pub fn q_update(&mut self, s: usize, a: usize, r: f64, s2: usize, alpha: f64, gamma: f64) {
        let target = r + gamma * self.max(s2);
        let k = s * self.n_actions + a;
        self.q[k] += alpha * (target - self.q[k]);
    }

    /// Actions within `tol` of the row maximum.
    pub fn greedy_set(&self, s: usize, tol: f64) -> Vec<usize> {
        let m = self.max(s);
        (0..self.n_actions).filter(|&a| self.get(s, a) >= m - tol).collect()
    }

    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        self.q.iter().zip(&other.q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Finite MDP with deterministic transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// Indexed `s * n_actions + a`.
    pub next: Vec<usize>,
    pub reward: Vec<f64>,
}

impl DeterministicMdp {
    pub fn step(&self, s: usize, a: usize) -> (f64, usize) {
        let k = s * self.n_actions + a;
        (self.reward[k], self.next[k])
    }

    /// Bellman optimality iteration until the update is below `tol`.
    pub fn value_iteration(&self, gamma: f64, tol: f64) -> QTable {
        let mut q = QTable::zeros(self.n_states, self.n_actions);
        loop {
            let v: Vec<f64> = (0..self.n_states).map(|s| q.max(s)).collect();
            let mut delta: f64 = 0.0;
            for s in 0..self.n_states {
                for a in 0..self.n_actions {
                    let (r, s2) = self.step(s, a);
                    let k = s * self.n_actions + a;
                    let new = r + gamma * v[s2];
                    delta = delta.max((new - q.q[k]).abs());
                    q.q[k] = new;
                }
            }
            if delta < tol {
                return q;
            }
        }
    }

    /// Q-learning with a constant step size, sweeping every (s, a) pair in
    /// order `sweeps` times.
    pub fn q_learning(&self, alpha: f64, gamma: f64, sweeps: usize) -> QTable {
        let mut q = QTable::zeros(self.n_states, self.n_actions);
        for _ in 0..sweeps {
            for s in 0..self.n_states {
                for a in 0..self.n_actions {
                    let (r, s2) = self.step(s, a);
                    q.q_update(s, a, r, s2, alpha, gamma);
                }
            }
        }
        q
    }
}

/// Two-phase queue abstraction of one intersection, observed once per cycle.
///
/// The state is the queue on each phase (0..=max_queue vehicles per lane
/// group). Each cycle `arrivals[p]` vehicles join phase p, and the plan's
/// green split serves `round(service * split_p)` of them.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyQueueMdp {
    pub max_queue: usize,
    pub arrivals: [usize; 2],
    pub service: f64,
}

impl Default for ToyQueueMdp {
    fn default() -> Self {
        Self { max_queue: 6, arrivals: [2, 3], service: 8.0 }
    }
}

impl ToyQueueMdp {
    pub fn n_states(&self) -> usize {
        (self.max_queue + 1) * (self.max_queue + 1)
    }

    pub fn state_index(&self, q: [usize; 2]) -> usize {
        q[0] * (self.max_queue + 1) + q[1]
    }

    pub fn queues(&self, s: usize) -> [usize; 2] {
        [s / (self.max_queue + 1), s % (self.max_queue + 1)]
    }

    /// Network input for a state: queues scaled to [0, 1].
    pub fn features(&self, s: usize) -> [f64; 2] {
        self.queues(s).map(|q| q as f64 / self.max_queue as f64)
    }

    pub fn build(&self) -> DeterministicMdp {
        let n = self.n_states();
        let mut next = Vec::with_capacity(n * NUM_PLANS);
        let mut reward = Vec::with_capacity(n * NUM_PLANS);
        for s in 0..n {
            let q = self.queues(s);
            for split in PLAN_SPLITS {
                let served = [(self.service * split).round() as usize, (self.service * (1.0 - split)).round() as usize];
                let q2: [usize; 2] = std::array::from_fn(|p| (q[p] + self.arrivals[p]).saturating_sub(served[p]).min(self.max_queue));
                next.push(self.state_index(q2));
                reward.push(-((q2[0] + q2[1]) as f64) / (2 * self.max_queue) as f64);
            }
        }
        DeterministicMdp { n_states: n, n_actions: NUM_PLANS, next, reward }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn update_examples() {
        let mut q = QTable::zeros(2, 2);
        q.q_update(0, 1, 1.0, 1, 0.5, 0.95);
        assert_eq!(q.get(0, 1), 0.5);
        let before = q.clone();
        q.q_update(1, 0, 7.0, 0, 0.0, 0.95);
        assert_eq!(q, before);
    }

    /// Two states, two actions: action 1 in state 0 moves to state 1 (reward
    /// 0); everything else returns to state 0, with reward 1 from state 1.
    fn two_state() -> DeterministicMdp {
        DeterministicMdp { n_states: 2, n_actions: 2, next: vec![0, 1, 0, 0], reward: vec![0.0, 0.0, 1.0, 1.0] }
    }

    #[test]
    fn two_state_fixed_point() {
        let mdp = two_state();
        let g: f64 = 0.95;
        // V0 = g V1, V1 = 1 + g V0  =>  V0 = g / (1 - g^2)
        let v0 = g / (1.0 - g * g);
        let v1 = 1.0 + g * v0;
        let vi = mdp.value_iteration(g, 1e-13);
        assert!((vi.get(0, 1) - v0).abs() < 1e-9);
        assert!((vi.get(1, 0) - v1).abs() < 1e-9);
        let ql = mdp.q_learning(0.5, g, 10_000);
        assert!(ql.max_abs_diff(&vi) < 1e-6);
    }

    #[test]
    fn toy_mdp_shape() {
        let toy = ToyQueueMdp::default();
        let mdp = toy.build();
        assert_eq!(mdp.n_states, 49);
        assert!(mdp.reward.iter().all(|&r| (-1.0..=0.0).contains(&r)));
        for s in 0..mdp.n_states {
            assert_eq!(toy.state_index(toy.queues(s)), s);
        }
        // From empty queues, a 50/50 split serves 4 + 4: both arrivals clear.
        let (r, s2) = mdp.step(0, 3);
        assert_eq!((r, s2), (0.0, 0));
    }
}
