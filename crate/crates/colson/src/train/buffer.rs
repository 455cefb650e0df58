//! Transition storage: a fixed-capacity ring sampled uniformly.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::geom::Vec2;
use crate::sim::Observation;

/// One environment step as the learner sees it. Actions are stored in the
/// normalized unit box, not as physical velocities.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub observation: Observation,
    pub action: Vec2,
    pub reward: f64,
    pub next_observation: Observation,
    pub done: bool,
}

/// Ring buffer over transitions. Once full, the oldest entry is overwritten;
/// sampling is uniform over whatever is currently held.
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    cursor: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer needs room for at least one transition");
        ReplayBuffer { items: Vec::new(), capacity, cursor: 0, inserted: 0 }
    }

    pub fn push(&mut self, t: Transition) {
        // The environment can only produce these rewards; anything else means
        // a wiring bug upstream, caught here before it poisons training.
        let r = t.reward;
        assert!(
            r == 1.0 || r == 0.0 || r == -0.25 || (-0.1..0.0).contains(&r),
            "reward {r} outside the environment's range"
        );
        assert!(
            t.action.x.abs() <= 1.0 + 1e-12 && t.action.y.abs() <= 1.0 + 1e-12,
            "stored action {:?} outside the unit box",
            t.action
        );
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        self.inserted += 1;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Lifetime insertion count, unaffected by overwrites.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn get(&self, idx: usize) -> &Transition {
        &self.items[idx]
    }

    /// `n` independent uniform draws over the current contents.
    pub fn sample_indices(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        assert!(!self.items.is_empty(), "cannot sample an empty buffer");
        (0..n).map(|_| rng.gen_range(0..self.items.len())).collect()
    }
}
