use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoneKind {
    #[default]
    None,
    Terminal,
    Truncated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_observation: Vec<f64>,
    pub done: DoneKind,
}

/// Row-major minibatch. `terminal[i]` is 1 for true terminations and 0 otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub size: usize,
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: Vec<f64>,
    pub next_obs: Vec<f64>,
    pub terminal: Vec<f64>,
}

/// FIFO ring of transitions with uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    obs: Vec<f64>,
    action: Vec<f64>,
    reward: Vec<f64>,
    next_obs: Vec<f64>,
    terminal: Vec<f64>,
    cursor: usize,
    len: usize,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BufferError {
    #[error("cannot sample {requested} transitions from a buffer holding {available}")]
    Underfilled { requested: usize, available: usize },
    #[error("transition widths ({obs}, {act}) do not match the buffer")]
    Width { obs: usize, act: usize },
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Self {
        let capacity = capacity.max(1);
        Self {
            capacity,
            obs_dim,
            act_dim,
            obs: vec![0.0; capacity * obs_dim],
            action: vec![0.0; capacity * act_dim],
            reward: vec![0.0; capacity],
            next_obs: vec![0.0; capacity * obs_dim],
            terminal: vec![0.0; capacity],
            cursor: 0,
            len: 0,
        }
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

    pub fn push(&mut self, t: &Transition) -> Result<(), BufferError> {
        if t.observation.len() != self.obs_dim
            || t.next_observation.len() != self.obs_dim
            || t.action.len() != self.act_dim
        {
            return Err(BufferError::Width { obs: t.observation.len(), act: t.action.len() });
        }
        let i = self.cursor;
        let (o, a) = (self.obs_dim, self.act_dim);
        self.obs[i * o..(i + 1) * o].copy_from_slice(&t.observation);
        self.next_obs[i * o..(i + 1) * o].copy_from_slice(&t.next_observation);
        self.action[i * a..(i + 1) * a].copy_from_slice(&t.action);
        self.reward[i] = t.reward;
        self.terminal[i] = if t.done == DoneKind::Terminal { 1.0 } else { 0.0 };
        self.cursor = (self.cursor + 1) % self.capacity;
        self.len = (self.len + 1).min(self.capacity);
        Ok(())
    }

    /// Stored slot index of the `k`-th oldest transition.
    fn slot(&self, k: usize) -> usize {
        if self.len < self.capacity {
            k
        } else {
            (self.cursor + k) % self.capacity
        }
    }

    /// Transition by age, oldest first.
    pub fn get(&self, k: usize) -> Option<Transition> {
        if k >= self.len {
            return None;
        }
        let i = self.slot(k);
        let (o, a) = (self.obs_dim, self.act_dim);
        Some(Transition {
            observation: self.obs[i * o..(i + 1) * o].to_vec(),
            action: self.action[i * a..(i + 1) * a].to_vec(),
            reward: self.reward[i],
            next_observation: self.next_obs[i * o..(i + 1) * o].to_vec(),
            done: if self.terminal[i] > 0.0 { DoneKind::Terminal } else { DoneKind::None },
        })
    }

    /// `n` indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>, BufferError> {
        if self.len == 0 || n > self.len {
            return Err(BufferError::Underfilled { requested: n, available: self.len });
        }
        Ok((0..n).map(|_| rng.random_range(0..self.len)).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Batch, BufferError> {
        let idx = self.sample_indices(n, rng)?;
        Ok(self.gather(&idx))
    }

    /// Like [`sample`](Self::sample) but allows `n` larger than the number stored.
    pub fn sample_with_replacement<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Batch, BufferError> {
        if self.len == 0 {
            return Err(BufferError::Underfilled { requested: n, available: 0 });
        }
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..self.len)).collect();
        Ok(self.gather(&idx))
    }

    fn gather(&self, idx: &[usize]) -> Batch {
        let (o, a) = (self.obs_dim, self.act_dim);
        let mut b = Batch {
            size: idx.len(),
            obs: Vec::with_capacity(idx.len() * o),
            action: Vec::with_capacity(idx.len() * a),
            reward: Vec::with_capacity(idx.len()),
            next_obs: Vec::with_capacity(idx.len() * o),
            terminal: Vec::with_capacity(idx.len()),
        };
        for &k in idx {
            let i = self.slot(k);
            b.obs.extend_from_slice(&self.obs[i * o..(i + 1) * o]);
            b.action.extend_from_slice(&self.action[i * a..(i + 1) * a]);
            b.reward.push(self.reward[i]);
            b.next_obs.extend_from_slice(&self.next_obs[i * o..(i + 1) * o]);
            b.terminal.push(self.terminal[i]);
        }
        b
    }
}
