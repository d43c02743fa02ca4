//! FIFO experience replay.

use std::collections::VecDeque;

use ndarray::{Array1, Array2};
use rand::Rng;

use super::observation::{Observation, OBS_DIM};
use super::policy::{ActionSpec, ACTION_DIM};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Observation,
    /// Weights in action order.
    pub action: [f64; ACTION_DIM],
    pub reward: f64,
    pub next_obs: Observation,
    pub done: bool,
}

/// Training batch; actions are mapped to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_obs: Array2<f64>,
    pub dones: Array1<bool>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn from_transitions<'a>(items: impl IntoIterator<Item = &'a Transition>, spec: &ActionSpec) -> Self {
        let items: Vec<&Transition> = items.into_iter().collect();
        let n = items.len();
        let mut b = Batch {
            obs: Array2::zeros((n, OBS_DIM)),
            actions: Array2::zeros((n, ACTION_DIM)),
            rewards: Array1::zeros(n),
            next_obs: Array2::zeros((n, OBS_DIM)),
            dones: Array1::from_elem(n, false),
        };
        for (i, t) in items.iter().enumerate() {
            for j in 0..OBS_DIM {
                b.obs[[i, j]] = t.obs.0[j];
                b.next_obs[[i, j]] = t.next_obs.0[j];
            }
            for (j, u) in spec.to_unit(&t.action).into_iter().enumerate() {
                b.actions[[i, j]] = u;
            }
            b.rewards[i] = t.reward;
            b.dones[i] = t.done;
        }
        b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Appends, evicting the oldest transition when full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform sample with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, spec: &ActionSpec, rng: &mut R) -> Batch {
        if self.items.is_empty() {
            return Batch::from_transitions(std::iter::empty(), spec);
        }
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..self.items.len())).collect();
        Batch::from_transitions(idx.iter().map(|&i| &self.items[i]), spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(r: f64) -> Transition {
        Transition {
            obs: Observation([r; OBS_DIM]),
            action: ActionSpec::TABLE.midpoint(),
            reward: r,
            next_obs: Observation([r; OBS_DIM]),
            done: false,
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(tr(i as f64));
            assert!(b.len() <= 3);
        }
        let r: Vec<f64> = b.iter().map(|t| t.reward).collect();
        assert_eq!(r, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn sample_shapes_and_unit_actions() {
        let mut b = ReplayBuffer::new(10);
        for i in 0..4 {
            b.push(tr(i as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batch = b.sample(7, &ActionSpec::TABLE, &mut rng);
        assert_eq!(batch.len(), 7);
        assert_eq!(batch.obs.dim(), (7, OBS_DIM));
        assert!(batch.actions.iter().all(|&a| a.abs() < 1e-12));
        assert!(ReplayBuffer::new(2).sample(4, &ActionSpec::TABLE, &mut rng).is_empty());
    }
}
