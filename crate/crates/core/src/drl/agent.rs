//! Deep deterministic policy gradient updates.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::mlp::{Activation, Gradients, Mlp};
use super::optim::{Optimizer, OptimizerKind};
use super::replay::Transition;
use crate::error::{Error, Result};
use crate::num::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DdpgConfig {
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub optimizer: OptimizerKind,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        DdpgConfig {
            gamma: 0.95,
            tau: 0.005,
            actor_lr: 1e-4,
            critic_lr: 1e-4,
            optimizer: OptimizerKind::Sgd,
            actor_hidden: vec![64],
            critic_hidden: vec![64],
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidParameter(format!("gamma {} outside (0, 1)", self.gamma)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidParameter(format!("tau {} outside (0, 1]", self.tau)));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(Error::InvalidParameter("learning rates must be > 0".into()));
        }
        if self.actor_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            return Err(Error::InvalidParameter("hidden width 0".into()));
        }
        Ok(())
    }
}

/// Actor, critic, their targets and optimizers.
#[derive(Clone, Debug, PartialEq)]
pub struct Ddpg<S: Scalar> {
    pub actor: Mlp<S>,
    pub critic: Mlp<S>,
    pub target_actor: Mlp<S>,
    pub target_critic: Mlp<S>,
    pub actor_opt: Optimizer<S>,
    pub critic_opt: Optimizer<S>,
    pub gamma: S,
    pub tau: S,
}

fn layer_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut sizes = vec![input];
    sizes.extend_from_slice(hidden);
    sizes.push(output);
    sizes
}

fn activations(hidden: usize, out: Activation) -> Vec<Activation> {
    let mut acts = vec![Activation::Relu; hidden];
    acts.push(out);
    acts
}

impl<S: Scalar> Ddpg<S> {
    pub fn new<R: Rng>(obs_dim: usize, act_dim: usize, cfg: &DdpgConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let actor = Mlp::init(
            &layer_sizes(obs_dim, &cfg.actor_hidden, act_dim),
            &activations(cfg.actor_hidden.len(), Activation::Tanh),
            rng,
        )?;
        let critic = Mlp::init(
            &layer_sizes(obs_dim + act_dim, &cfg.critic_hidden, 1),
            &activations(cfg.critic_hidden.len(), Activation::Linear),
            rng,
        )?;
        Self::from_networks(actor, critic, cfg)
    }

    /// Wraps given networks; targets start as exact copies.
    pub fn from_networks(actor: Mlp<S>, critic: Mlp<S>, cfg: &DdpgConfig) -> Result<Self> {
        cfg.validate()?;
        if critic.input_dim() != actor.input_dim() + actor.output_dim() || critic.output_dim() != 1 {
            return Err(Error::dims(format!(
                "critic {}→{} does not fit actor {}→{}",
                critic.input_dim(),
                critic.output_dim(),
                actor.input_dim(),
                actor.output_dim()
            )));
        }
        Ok(Ddpg {
            actor_opt: Optimizer::new(cfg.optimizer, S::lit(cfg.actor_lr), actor.num_params()),
            critic_opt: Optimizer::new(cfg.optimizer, S::lit(cfg.critic_lr), critic.num_params()),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            gamma: S::lit(cfg.gamma),
            tau: S::lit(cfg.tau),
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.actor.output_dim()
    }

    /// Deterministic policy output.
    pub fn act(&self, s: &DVector<S>) -> Result<DVector<S>> {
        self.actor.forward(s)
    }

    /// Moves both targets toward the learned networks by `τ`.
    pub fn soft_update_targets(&mut self) -> Result<()> {
        soft_update(&self.actor, &mut self.target_actor, self.tau)?;
        soft_update(&self.critic, &mut self.target_critic, self.tau)
    }
}

/// Stacks `(s, a)` columns into a critic input batch.
fn critic_input<S: Scalar>(s: &DMatrix<S>, a: &DMatrix<S>) -> DMatrix<S> {
    let mut x = DMatrix::zeros(s.nrows() + a.nrows(), s.ncols());
    x.rows_mut(0, s.nrows()).copy_from(s);
    x.rows_mut(s.nrows(), a.nrows()).copy_from(a);
    x
}

/// Importance-weighted critic loss `(1/B) Σ w_i (y_i − Q(s_i, a_i))²` and its
/// parameter gradient. Returns `(loss, gradients, y − Q)`.
pub fn critic_loss_grad<S: Scalar>(
    critic: &Mlp<S>,
    s: &DMatrix<S>,
    a: &DMatrix<S>,
    y: &[S],
    weights: &[S],
) -> Result<(S, Gradients<S>, Vec<S>)> {
    let batch = s.ncols();
    if a.ncols() != batch || y.len() != batch || weights.len() != batch {
        return Err(Error::dims("critic batch components differ in length".to_string()));
    }
    let trace = critic.forward_trace(&critic_input(s, a))?;
    let bsz = S::from_usize_lossy(batch);
    let mut loss = S::zero();
    let mut td = Vec::with_capacity(batch);
    let mut grad_q = DMatrix::zeros(1, batch);
    for i in 0..batch {
        let err = y[i] - trace.output[(0, i)];
        loss += weights[i] * err * err;
        grad_q[(0, i)] = -S::lit(2.0) * weights[i] * err / bsz;
        td.push(err);
    }
    let (grads, _) = critic.backward(&trace, &grad_q);
    Ok((loss / bsz, grads, td))
}

/// Policy objective `(1/B) Σ Q(s_i, μ(s_i))` and the gradient of its negation
/// with respect to the actor parameters (the descent direction).
pub fn actor_objective_grad<S: Scalar>(actor: &Mlp<S>, critic: &Mlp<S>, s: &DMatrix<S>) -> Result<(S, Gradients<S>)> {
    let batch = s.ncols();
    let actor_trace = actor.forward_trace(s)?;
    let critic_trace = critic.forward_trace(&critic_input(s, &actor_trace.output))?;
    let bsz = S::from_usize_lossy(batch);
    let objective = critic_trace.output.sum() / bsz;
    let grad_q = DMatrix::from_element(1, batch, -S::one() / bsz);
    let (_, grad_in) = critic.backward(&critic_trace, &grad_q);
    let grad_a = grad_in.rows(s.nrows(), actor.output_dim()).into_owned();
    let (grads, _) = actor.backward(&actor_trace, &grad_a);
    Ok((objective, grads))
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpdateStats<S: Scalar> {
    pub critic_loss: S,
    pub actor_objective: S,
    /// `|y − Q(s, a)|` per transition, before the critic step.
    pub priorities: Vec<S>,
}

fn stack<S: Scalar>(cols: impl Iterator<Item = DVector<S>>, rows: usize) -> Result<DMatrix<S>> {
    let cols: Vec<DVector<S>> = cols.collect();
    if cols.iter().any(|c| c.len() != rows) {
        return Err(Error::dims("minibatch vectors of inconsistent length".to_string()));
    }
    Ok(DMatrix::from_columns(&cols))
}

/// One critic step toward `y = r + (1 − done)·γ·Q′(s′, μ′(s′))` and one
/// actor step along the deterministic policy gradient.
pub fn ddpg_update<S: Scalar>(agent: &mut Ddpg<S>, batch: &[Transition<S>], weights: &[S]) -> Result<UpdateStats<S>> {
    if batch.is_empty() {
        return Err(Error::InsufficientData("empty minibatch".into()));
    }
    let (od, ad) = (agent.obs_dim(), agent.act_dim());
    let s = stack(batch.iter().map(|t| t.s.clone()), od)?;
    let a = stack(batch.iter().map(|t| t.a.clone()), ad)?;
    let s_next = stack(batch.iter().map(|t| t.s_next.clone()), od)?;

    let next_a = agent.target_actor.forward_batch(&s_next)?;
    let next_q = agent.target_critic.forward_batch(&critic_input(&s_next, &next_a))?;
    let y: Vec<S> = batch
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if t.done {
                t.r
            } else {
                t.r + agent.gamma * next_q[(0, i)]
            }
        })
        .collect();

    let (loss, cgrads, td) = critic_loss_grad(&agent.critic, &s, &a, &y, weights)?;
    if !loss.is_finite_value() || !cgrads.is_finite() {
        return Err(Error::TrainingDivergence(format!("critic loss {loss}")));
    }
    agent.critic_opt.step(&mut agent.critic, &cgrads)?;

    let (objective, agrads) = actor_objective_grad(&agent.actor, &agent.critic, &s)?;
    if !objective.is_finite_value() || !agrads.is_finite() {
        return Err(Error::TrainingDivergence(format!("actor objective {objective}")));
    }
    agent.actor_opt.step(&mut agent.actor, &agrads)?;
    if !agent.actor.is_finite() || !agent.critic.is_finite() {
        return Err(Error::TrainingDivergence("non-finite network parameters".into()));
    }
    Ok(UpdateStats {
        critic_loss: loss,
        actor_objective: objective,
        priorities: td.iter().map(|e| e.abs()).collect(),
    })
}

/// `Θ′ ← τ Θ + (1 − τ) Θ′` elementwise.
pub fn soft_update<S: Scalar>(source: &Mlp<S>, target: &mut Mlp<S>, tau: S) -> Result<()> {
    if !source.same_shape(target) {
        return Err(Error::dims("soft update between networks of different shape".to_string()));
    }
    let keep = S::one() - tau;
    for (src, dst) in source.layers.iter().zip(target.layers.iter_mut()) {
        dst.w.zip_apply(&src.w, |d, s| *d = tau * s + keep * *d);
        dst.b.zip_apply(&src.b, |d, s| *d = tau * s + keep * *d);
    }
    Ok(())
}

/// Adds i.i.d. Gaussian noise and clips every component to `[−1, 1]`.
pub fn explore<S: Scalar, R: Rng>(a: &DVector<S>, std: S, rng: &mut R) -> DVector<S> {
    if std == S::zero() {
        return a.clone();
    }
    a.map(|x| {
        let z: f64 = StandardNormal.sample(rng);
        (x + S::lit(z) * std).max(-S::one()).min(S::one())
    })
}
