//! Gradient-descent optimizers over flat parameter vectors.

use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp};
use crate::error::{Error, Result};
use crate::num::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Plain SGD or Adam with bias-corrected moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimizer<S: Scalar> {
    pub kind: OptimizerKind,
    pub lr: S,
    /// Number of steps taken.
    pub t: u64,
    pub m: Vec<S>,
    pub v: Vec<S>,
}

impl<S: Scalar> Optimizer<S> {
    pub fn new(kind: OptimizerKind, lr: S, num_params: usize) -> Self {
        let moments = match kind {
            OptimizerKind::Sgd => 0,
            OptimizerKind::Adam => num_params,
        };
        Optimizer {
            kind,
            lr,
            t: 0,
            m: vec![S::zero(); moments],
            v: vec![S::zero(); moments],
        }
    }

    /// One descent step `θ ← θ − lr·(update direction)`.
    pub fn step(&mut self, net: &mut Mlp<S>, grads: &Gradients<S>) -> Result<()> {
        let g = grads.flatten();
        let mut p = net.params();
        if g.len() != p.len() {
            return Err(Error::dims(format!("{} gradients for {} parameters", g.len(), p.len())));
        }
        self.t += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (pi, gi) in p.iter_mut().zip(&g) {
                    *pi -= self.lr * *gi;
                }
            }
            OptimizerKind::Adam => {
                if self.m.len() != p.len() {
                    return Err(Error::dims("optimizer moments do not match the network".to_string()));
                }
                let (b1, b2) = (S::lit(ADAM_BETA1), S::lit(ADAM_BETA2));
                let t = self.t.min(i32::MAX as u64) as i32;
                let c1 = S::one() - b1.powi(t);
                let c2 = S::one() - b2.powi(t);
                let eps = S::lit(ADAM_EPS);
                for i in 0..p.len() {
                    self.m[i] = b1 * self.m[i] + (S::one() - b1) * g[i];
                    self.v[i] = b2 * self.v[i] + (S::one() - b2) * g[i] * g[i];
                    let mhat = self.m[i] / c1;
                    let vhat = self.v[i] / c2;
                    p[i] -= self.lr * mhat / (vhat.sqrt() + eps);
                }
            }
        }
        net.set_params(&p)
    }
}
