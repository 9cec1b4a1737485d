use alloc::format;
use alloc::vec::Vec;
use rand::Rng;

use crate::{Error, Result};

/// Fixed-capacity ring of transitions with uniform with-replacement sampling.
///
/// Storage is flat and column-wise per field, so sampling a batch is a
/// sequence of row copies into preallocated [`Batch`] buffers.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    observations: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_observations: Vec<f64>,
    terminals: Vec<f64>,
    len: usize,
    write_head: usize,
}

/// One sampled minibatch, row-major per field. `terminals` holds 0.0 or 1.0
/// so it can mask bootstrap targets without branching.
#[derive(Debug, Clone)]
pub struct Batch {
    pub size: usize,
    pub observations: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_observations: Vec<f64>,
    pub terminals: Vec<f64>,
}

impl Batch {
    pub fn new(size: usize, obs_dim: usize, act_dim: usize) -> Self {
        Batch {
            size,
            observations: alloc::vec![0.0; size * obs_dim],
            actions: alloc::vec![0.0; size * act_dim],
            rewards: alloc::vec![0.0; size],
            next_observations: alloc::vec![0.0; size * obs_dim],
            terminals: alloc::vec![0.0; size],
        }
    }
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Result<Self> {
        if capacity == 0 || obs_dim == 0 || act_dim == 0 {
            return Err(Error::config(format!(
                "replay buffer needs positive capacity and dimensions, \
                 got capacity {capacity}, obs {obs_dim}, act {act_dim}"
            )));
        }
        Ok(ReplayBuffer {
            capacity,
            obs_dim,
            act_dim,
            observations: alloc::vec![0.0; capacity * obs_dim],
            actions: alloc::vec![0.0; capacity * act_dim],
            rewards: alloc::vec![0.0; capacity],
            next_observations: alloc::vec![0.0; capacity * obs_dim],
            terminals: alloc::vec![0.0; capacity],
            len: 0,
            write_head: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Appends a transition, overwriting the oldest when full.
    pub fn push(
        &mut self,
        observation: &[f64],
        action: &[f64],
        reward: f64,
        next_observation: &[f64],
        terminal: bool,
    ) {
        assert_eq!(observation.len(), self.obs_dim, "observation size mismatch");
        assert_eq!(next_observation.len(), self.obs_dim, "next observation size mismatch");
        assert_eq!(action.len(), self.act_dim, "action size mismatch");
        let slot = self.write_head;
        self.observations[slot * self.obs_dim..(slot + 1) * self.obs_dim]
            .copy_from_slice(observation);
        self.next_observations[slot * self.obs_dim..(slot + 1) * self.obs_dim]
            .copy_from_slice(next_observation);
        self.actions[slot * self.act_dim..(slot + 1) * self.act_dim].copy_from_slice(action);
        self.rewards[slot] = reward;
        self.terminals[slot] = if terminal { 1.0 } else { 0.0 };
        self.write_head = (self.write_head + 1) % self.capacity;
        self.len = (self.len + 1).min(self.capacity);
    }

    /// Fills `batch` with rows drawn uniformly with replacement.
    pub fn sample_into<R: Rng>(&self, rng: &mut R, batch: &mut Batch) -> Result<()> {
        if batch.size > self.len {
            return Err(Error::BufferUnderfilled { len: self.len, requested: batch.size });
        }
        assert_eq!(batch.observations.len(), batch.size * self.obs_dim, "batch shape mismatch");
        assert_eq!(batch.actions.len(), batch.size * self.act_dim, "batch shape mismatch");
        for b in 0..batch.size {
            let i = rng.gen_range(0..self.len);
            batch.observations[b * self.obs_dim..(b + 1) * self.obs_dim]
                .copy_from_slice(&self.observations[i * self.obs_dim..(i + 1) * self.obs_dim]);
            batch.next_observations[b * self.obs_dim..(b + 1) * self.obs_dim].copy_from_slice(
                &self.next_observations[i * self.obs_dim..(i + 1) * self.obs_dim],
            );
            batch.actions[b * self.act_dim..(b + 1) * self.act_dim]
                .copy_from_slice(&self.actions[i * self.act_dim..(i + 1) * self.act_dim]);
            batch.rewards[b] = self.rewards[i];
            batch.terminals[b] = self.terminals[i];
        }
        Ok(())
    }
}
