use rand::Rng;

use super::MdpStep;

/// Fixed-capacity ring buffer with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<MdpStep>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: Vec::with_capacity(capacity.min(1 << 16)), next: 0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Appends, overwriting the oldest entry once full.
    pub fn push(&mut self, step: MdpStep) {
        if self.items.len() < self.capacity {
            self.items.push(step);
        } else {
            self.items[self.next] = step;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// `n` draws with replacement.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<MdpStep> {
        assert!(!self.items.is_empty(), "sampling an empty buffer");
        (0..n).map(|_| self.items[rng.gen_range(0..self.items.len())]).collect()
    }
}
