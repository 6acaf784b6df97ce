//! Proportional prioritized experience replay over a fixed-capacity ring.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::num::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition<S: Scalar> {
    pub s: DVector<S>,
    pub a: DVector<S>,
    pub r: S,
    pub s_next: DVector<S>,
    pub done: bool,
    /// Last absolute TD error; sampling adds the buffer's `ε`.
    pub priority: S,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerConfig<S: Scalar> {
    pub alpha: S,
    pub beta: S,
    pub eps: S,
}

impl<S: Scalar> Default for PerConfig<S> {
    fn default() -> Self {
        PerConfig {
            alpha: S::lit(0.6),
            beta: S::lit(0.4),
            eps: S::lit(1e-3),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayBuffer<S: Scalar> {
    capacity: usize,
    items: Vec<Transition<S>>,
    /// Slot the next insertion overwrites once the ring is full.
    head: usize,
    max_priority: S,
    pub per: PerConfig<S>,
}

/// A sampled minibatch with the buffer slots it came from.
#[derive(Clone, Debug)]
pub struct Sample<S: Scalar> {
    pub indices: Vec<usize>,
    pub weights: Vec<S>,
    pub batch: Vec<Transition<S>>,
}

impl<S: Scalar> ReplayBuffer<S> {
    pub fn new(capacity: usize, per: PerConfig<S>) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidParameter("replay capacity must be > 0".into()));
        }
        Ok(ReplayBuffer {
            capacity,
            items: Vec::with_capacity(capacity),
            head: 0,
            max_priority: S::one(),
            per,
        })
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

    pub fn max_priority(&self) -> S {
        self.max_priority
    }

    pub fn get(&self, slot: usize) -> Option<&Transition<S>> {
        self.items.get(slot)
    }

    /// Stored transitions from oldest to newest.
    pub fn chronological(&self) -> impl Iterator<Item = &Transition<S>> {
        let split = if self.items.len() < self.capacity { 0 } else { self.head };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    /// Inserts with the largest priority seen so far, evicting the oldest
    /// entry when full. Returns the slot written.
    pub fn push(&mut self, mut t: Transition<S>) -> usize {
        t.priority = self.max_priority;
        if self.items.len() < self.capacity {
            self.items.push(t);
            self.items.len() - 1
        } else {
            let slot = self.head;
            self.items[slot] = t;
            self.head = (self.head + 1) % self.capacity;
            slot
        }
    }

    pub fn update_priorities(&mut self, slots: &[usize], priorities: &[S]) -> Result<()> {
        if slots.len() != priorities.len() {
            return Err(Error::dims("priority update length mismatch".to_string()));
        }
        for (&slot, &p) in slots.iter().zip(priorities) {
            if !(p >= S::zero() && p.is_finite_value()) {
                return Err(Error::InvalidParameter(format!("priority {p} must be finite and >= 0")));
            }
            let item = self
                .items
                .get_mut(slot)
                .ok_or_else(|| Error::InvalidParameter(format!("replay slot {slot} is empty")))?;
            item.priority = p;
            self.max_priority = self.max_priority.max(p);
        }
        Ok(())
    }

    /// Sampling probability of every stored slot.
    pub fn probabilities(&self) -> Vec<S> {
        let raw: Vec<S> = self
            .items
            .iter()
            .map(|t| (t.priority + self.per.eps).powf(self.per.alpha))
            .collect();
        let total = raw.iter().fold(S::zero(), |acc, x| acc + *x);
        raw.into_iter().map(|x| x / total).collect()
    }

    pub(crate) fn restore(
        capacity: usize,
        items: Vec<Transition<S>>,
        head: usize,
        max_priority: S,
        per: PerConfig<S>,
    ) -> Result<Self> {
        if capacity == 0 || items.len() > capacity || head >= capacity.max(1) {
            return Err(Error::Checkpoint("inconsistent replay buffer state".into()));
        }
        Ok(ReplayBuffer {
            capacity,
            items,
            head,
            max_priority,
            per,
        })
    }

    pub(crate) fn head(&self) -> usize {
        self.head
    }
}

/// Draws `batch_size` slots with replacement, proportionally to
/// `(priority + ε)^α`, with importance weights `(N·p)^−β` scaled so the
/// largest is 1.
pub fn per_sample<S: Scalar, R: Rng>(buffer: &ReplayBuffer<S>, batch_size: usize, rng: &mut R) -> Result<Sample<S>> {
    if buffer.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    if batch_size > buffer.len() {
        return Err(Error::InsufficientData(format!(
            "minibatch of {batch_size} from a buffer holding {}",
            buffer.len()
        )));
    }
    let probs: Vec<f64> = buffer.probabilities().iter().map(|p| p.as_f64()).collect();
    let mut cumulative = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p;
        cumulative.push(acc);
    }
    let n = buffer.len() as f64;
    let beta = buffer.per.beta.as_f64();
    let mut indices = Vec::with_capacity(batch_size);
    let mut weights = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let u: f64 = rng.random::<f64>() * acc;
        let slot = cumulative.partition_point(|&c| c <= u).min(probs.len() - 1);
        indices.push(slot);
        weights.push((n * probs[slot]).powf(-beta));
    }
    let wmax = weights.iter().copied().fold(0.0, f64::max);
    let weights = weights.into_iter().map(|w| S::lit(w / wmax)).collect();
    let batch = indices.iter().map(|&i| buffer.items[i].clone()).collect();
    Ok(Sample { indices, weights, batch })
}
