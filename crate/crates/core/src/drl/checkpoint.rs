//! Self-describing checkpoint container: named numeric arrays, scalars and
//! string metadata, stored as JSON.
//!
//! Floats are written in shortest round-trip form and parsed exactly, so a
//! save/load cycle reproduces every `f64` bit for bit.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::agent::Ddpg;
use super::mlp::{Activation, Layer, Mlp};
use super::optim::{Optimizer, OptimizerKind};
use super::replay::{PerConfig, ReplayBuffer, Transition};
use crate::error::{Error, Result};
use crate::num::Scalar;

pub const FORMAT: &str = "oscdamp-checkpoint-v1";

/// Row-major array with an explicit shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub arrays: BTreeMap<String, NamedArray>,
    pub scalars: BTreeMap<String, f64>,
    pub meta: BTreeMap<String, String>,
}

impl Default for Checkpoint {
    fn default() -> Self {
        Checkpoint {
            format: FORMAT.to_string(),
            arrays: BTreeMap::new(),
            scalars: BTreeMap::new(),
            meta: BTreeMap::new(),
        }
    }
}

fn missing(what: &str, name: &str) -> Error {
    Error::Checkpoint(format!("missing {what} `{name}`"))
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint values are finite")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ck.format != FORMAT {
            return Err(Error::Checkpoint(format!("unsupported format `{}`", ck.format)));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if self.arrays.values().flat_map(|a| a.data.iter()).chain(self.scalars.values()).any(|x| !x.is_finite()) {
            return Err(Error::Checkpoint("refusing to save non-finite values".into()));
        }
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn put_matrix<S: Scalar>(&mut self, name: &str, m: &DMatrix<S>) {
        let mut data = Vec::with_capacity(m.len());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                data.push(m[(r, c)].as_f64());
            }
        }
        self.arrays.insert(
            name.to_string(),
            NamedArray {
                shape: vec![m.nrows(), m.ncols()],
                data,
            },
        );
    }

    pub fn put_vector<S: Scalar>(&mut self, name: &str, v: &[S]) {
        self.arrays.insert(
            name.to_string(),
            NamedArray {
                shape: vec![v.len()],
                data: v.iter().map(|x| x.as_f64()).collect(),
            },
        );
    }

    pub fn put_scalar(&mut self, name: &str, value: f64) {
        self.scalars.insert(name.to_string(), value);
    }

    pub fn put_meta(&mut self, name: &str, value: impl Into<String>) {
        self.meta.insert(name.to_string(), value.into());
    }

    pub fn matrix<S: Scalar>(&self, name: &str) -> Result<DMatrix<S>> {
        let a = self.arrays.get(name).ok_or_else(|| missing("array", name))?;
        if a.shape.len() != 2 || a.shape[0] * a.shape[1] != a.data.len() {
            return Err(Error::Checkpoint(format!("array `{name}` is not a matrix")));
        }
        Ok(DMatrix::from_row_iterator(a.shape[0], a.shape[1], a.data.iter().map(|x| S::lit(*x))))
    }

    pub fn vector<S: Scalar>(&self, name: &str) -> Result<Vec<S>> {
        let a = self.arrays.get(name).ok_or_else(|| missing("array", name))?;
        if a.shape.len() != 1 || a.shape[0] != a.data.len() {
            return Err(Error::Checkpoint(format!("array `{name}` is not a vector")));
        }
        Ok(a.data.iter().map(|x| S::lit(*x)).collect())
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        self.scalars.get(name).copied().ok_or_else(|| missing("scalar", name))
    }

    pub fn count(&self, name: &str) -> Result<usize> {
        let v = self.scalar(name)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::Checkpoint(format!("scalar `{name}` = {v} is not a count")));
        }
        Ok(v as usize)
    }

    pub fn meta_value(&self, name: &str) -> Result<&str> {
        self.meta.get(name).map(String::as_str).ok_or_else(|| missing("metadata", name))
    }

    pub fn put_mlp<S: Scalar>(&mut self, prefix: &str, net: &Mlp<S>) {
        self.put_scalar(&format!("{prefix}.layers"), net.layers.len() as f64);
        for (i, l) in net.layers.iter().enumerate() {
            self.put_matrix(&format!("{prefix}.{i}.w"), &l.w);
            self.put_vector(&format!("{prefix}.{i}.b"), l.b.as_slice());
            self.put_meta(&format!("{prefix}.{i}.activation"), l.activation.name());
        }
    }

    pub fn mlp<S: Scalar>(&self, prefix: &str) -> Result<Mlp<S>> {
        let n = self.count(&format!("{prefix}.layers"))?;
        let mut layers = Vec::with_capacity(n);
        for i in 0..n {
            let act_name = self.meta_value(&format!("{prefix}.{i}.activation"))?;
            let activation = Activation::from_name(act_name)
                .ok_or_else(|| Error::Checkpoint(format!("unknown activation `{act_name}`")))?;
            layers.push(Layer {
                w: self.matrix(&format!("{prefix}.{i}.w"))?,
                b: DVector::from_vec(self.vector(&format!("{prefix}.{i}.b"))?),
                activation,
            });
        }
        Mlp::new(layers).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn put_optimizer<S: Scalar>(&mut self, prefix: &str, opt: &Optimizer<S>) {
        let kind = match opt.kind {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        };
        self.put_meta(&format!("{prefix}.kind"), kind);
        self.put_scalar(&format!("{prefix}.lr"), opt.lr.as_f64());
        self.put_scalar(&format!("{prefix}.t"), opt.t as f64);
        self.put_vector(&format!("{prefix}.m"), &opt.m);
        self.put_vector(&format!("{prefix}.v"), &opt.v);
    }

    pub fn optimizer<S: Scalar>(&self, prefix: &str) -> Result<Optimizer<S>> {
        let kind = match self.meta_value(&format!("{prefix}.kind"))? {
            "sgd" => OptimizerKind::Sgd,
            "adam" => OptimizerKind::Adam,
            other => return Err(Error::Checkpoint(format!("unknown optimizer `{other}`"))),
        };
        Ok(Optimizer {
            kind,
            lr: S::lit(self.scalar(&format!("{prefix}.lr"))?),
            t: self.count(&format!("{prefix}.t"))? as u64,
            m: self.vector(&format!("{prefix}.m"))?,
            v: self.vector(&format!("{prefix}.v"))?,
        })
    }

    pub fn put_agent<S: Scalar>(&mut self, agent: &Ddpg<S>) {
        self.put_mlp("actor", &agent.actor);
        self.put_mlp("critic", &agent.critic);
        self.put_mlp("target_actor", &agent.target_actor);
        self.put_mlp("target_critic", &agent.target_critic);
        self.put_optimizer("actor_opt", &agent.actor_opt);
        self.put_optimizer("critic_opt", &agent.critic_opt);
        self.put_scalar("gamma", agent.gamma.as_f64());
        self.put_scalar("tau", agent.tau.as_f64());
    }

    pub fn agent<S: Scalar>(&self) -> Result<Ddpg<S>> {
        let agent = Ddpg {
            actor: self.mlp("actor")?,
            critic: self.mlp("critic")?,
            target_actor: self.mlp("target_actor")?,
            target_critic: self.mlp("target_critic")?,
            actor_opt: self.optimizer("actor_opt")?,
            critic_opt: self.optimizer("critic_opt")?,
            gamma: S::lit(self.scalar("gamma")?),
            tau: S::lit(self.scalar("tau")?),
        };
        if !agent.actor.same_shape(&agent.target_actor) || !agent.critic.same_shape(&agent.target_critic) {
            return Err(Error::Checkpoint("target networks do not mirror learned networks".into()));
        }
        Ok(agent)
    }

    /// Actor only, for evaluation of a frozen policy.
    pub fn actor<S: Scalar>(&self) -> Result<Mlp<S>> {
        self.mlp("actor")
    }

    pub fn put_replay<S: Scalar>(&mut self, buffer: &ReplayBuffer<S>) {
        let n = buffer.len();
        let items: Vec<&Transition<S>> = (0..n).filter_map(|i| buffer.get(i)).collect();
        let rows = |f: &dyn Fn(&Transition<S>) -> &DVector<S>| -> DMatrix<S> {
            let dim = items.first().map_or(0, |t| f(t).len());
            DMatrix::from_fn(n, dim, |r, c| f(items[r])[c])
        };
        self.put_matrix("replay.s", &rows(&|t| &t.s));
        self.put_matrix("replay.a", &rows(&|t| &t.a));
        self.put_matrix("replay.s_next", &rows(&|t| &t.s_next));
        self.put_vector("replay.r", &items.iter().map(|t| t.r).collect::<Vec<_>>());
        self.put_vector(
            "replay.done",
            &items.iter().map(|t| if t.done { 1.0 } else { 0.0 }).collect::<Vec<f64>>(),
        );
        self.put_vector("replay.priority", &items.iter().map(|t| t.priority).collect::<Vec<_>>());
        self.put_scalar("replay.capacity", buffer.capacity() as f64);
        self.put_scalar("replay.head", buffer.head() as f64);
        self.put_scalar("replay.max_priority", buffer.max_priority().as_f64());
        self.put_scalar("replay.alpha", buffer.per.alpha.as_f64());
        self.put_scalar("replay.beta", buffer.per.beta.as_f64());
        self.put_scalar("replay.eps", buffer.per.eps.as_f64());
    }

    pub fn replay<S: Scalar>(&self) -> Result<ReplayBuffer<S>> {
        let s: DMatrix<S> = self.matrix("replay.s")?;
        let a: DMatrix<S> = self.matrix("replay.a")?;
        let s_next: DMatrix<S> = self.matrix("replay.s_next")?;
        let r: Vec<S> = self.vector("replay.r")?;
        let done: Vec<f64> = self.vector("replay.done")?;
        let priority: Vec<S> = self.vector("replay.priority")?;
        let n = r.len();
        if [s.nrows(), a.nrows(), s_next.nrows(), done.len(), priority.len()].iter().any(|&k| k != n) {
            return Err(Error::Checkpoint("replay arrays differ in length".into()));
        }
        let items = (0..n)
            .map(|i| Transition {
                s: s.row(i).transpose(),
                a: a.row(i).transpose(),
                r: r[i],
                s_next: s_next.row(i).transpose(),
                done: done[i] != 0.0,
                priority: priority[i],
            })
            .collect();
        ReplayBuffer::restore(
            self.count("replay.capacity")?,
            items,
            self.count("replay.head")?,
            S::lit(self.scalar("replay.max_priority")?),
            PerConfig {
                alpha: S::lit(self.scalar("replay.alpha")?),
                beta: S::lit(self.scalar("replay.beta")?),
                eps: S::lit(self.scalar("replay.eps")?),
            },
        )
    }
}
