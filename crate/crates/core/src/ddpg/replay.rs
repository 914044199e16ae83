//! Bounded FIFO experience memory.

use std::collections::VecDeque;

use crate::seeding::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

#[derive(Clone, Debug)]
pub struct ReplayMemory {
    capacity: usize,
    buf: VecDeque<Transition>,
    inserted: u64,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            buf: VecDeque::with_capacity(capacity.min(1 << 16)),
            inserted: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    /// Total pushes so far, evicted ones included.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, t: Transition) {
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(t);
        self.inserted += 1;
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.buf.iter()
    }

    /// `size` distinct transitions drawn uniformly, or `None` while the
    /// memory holds fewer than `size`.
    pub fn sample(&self, size: usize, rng: &mut Rng) -> Option<Vec<&Transition>> {
        if size == 0 || self.buf.len() < size {
            return None;
        }
        let picks = rand::seq::index::sample(rng, self.buf.len(), size);
        Some(picks.iter().map(|k| &self.buf[k]).collect())
    }
}
