use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::Transition;

/// Fixed-capacity FIFO replay memory.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    // Slot that the next push overwrites once full.
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::usage("replay capacity must be positive"));
        }
        Ok(Self {
            capacity,
            storage: Vec::with_capacity(capacity.min(1 << 16)),
            head: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    /// Stores `t`, evicting the oldest transition when full.
    pub fn push(&mut self, t: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.storage.split_at(self.head);
        older.iter().chain(newer)
    }

    /// Uniform sample with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<Transition>> {
        if self.storage.is_empty() {
            return Err(Error::usage("cannot sample from an empty replay buffer"));
        }
        Ok((0..batch_size)
            .map(|_| self.storage[rng.random_range(0..self.storage.len())])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(i: usize) -> Transition {
        Transition { state: i, action: 0, reward: i as f64, next_state: i + 1, is_terminal: false }
    }

    #[test]
    fn capacity_one_holds_latest() {
        let mut buf = ReplayBuffer::new(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for i in 0..5 {
            buf.push(tr(i));
            assert_eq!(buf.sample(1, &mut rng).unwrap(), vec![tr(i)]);
        }
    }

    #[test]
    fn empty_buffer_cannot_sample() {
        let buf = ReplayBuffer::new(3).unwrap();
        assert!(buf.sample(1, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
        assert!(ReplayBuffer::new(0).is_err());
    }

    proptest! {
        #[test]
        fn fifo_eviction_keeps_most_recent(capacity in 1usize..20, pushes in 0usize..80) {
            let mut buf = ReplayBuffer::new(capacity).unwrap();
            for i in 0..pushes {
                buf.push(tr(i));
                prop_assert!(buf.len() <= capacity);
            }
            let kept: Vec<usize> = buf.iter().map(|t| t.state).collect();
            let expected: Vec<usize> = (pushes.saturating_sub(capacity)..pushes).collect();
            prop_assert_eq!(kept, expected);
        }
    }
}
