//! Fixed communication delay on a sampled signal.

use std::collections::VecDeque;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::num::Scalar;

/// FIFO that returns the sample pushed `ceil(delay/Δt)` steps earlier.
///
/// Until that many samples have been seen, the oldest available one is
/// returned.
#[derive(Clone, Debug)]
pub struct DelayLine<S: Scalar> {
    delay: S,
    dt: S,
    steps: usize,
    queue: VecDeque<DVector<S>>,
}

impl<S: Scalar> DelayLine<S> {
    pub fn new(delay: S, dt: S) -> Result<Self> {
        if !(delay >= S::zero()) || !delay.is_finite_value() {
            return Err(Error::InvalidDelay(delay.as_f64()));
        }
        if !(dt > S::zero()) {
            return Err(Error::InvalidParameter("delay line step must be > 0".into()));
        }
        // The small slack keeps exact multiples such as 0.35/0.01 from
        // rounding up an extra step.
        let steps = (delay.as_f64() / dt.as_f64() - 1e-9).ceil().max(0.0) as usize;
        Ok(DelayLine {
            delay,
            dt,
            steps,
            queue: VecDeque::with_capacity(steps + 1),
        })
    }

    pub fn delay(&self) -> S {
        self.delay
    }

    pub fn dt(&self) -> S {
        self.dt
    }

    /// Delay in samples.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn reset(&mut self) {
        self.queue.clear();
    }

    /// Pushes a fresh sample and returns the delayed one.
    pub fn push(&mut self, fresh: DVector<S>) -> DVector<S> {
        self.queue.push_back(fresh);
        while self.queue.len() > self.steps + 1 {
            self.queue.pop_front();
        }
        self.queue.front().expect("queue holds the sample just pushed").clone()
    }
}

pub fn delayed_observation<S: Scalar>(line: &mut DelayLine<S>, fresh: DVector<S>) -> DVector<S> {
    line.push(fresh)
}
