//! Seeded DDPG training loop with resumable checkpoints.
//!
//! Episode `e` draws its reset seed, exploration noise and minibatch indices
//! from streams keyed by `(master_seed, e)`. Together with the agent,
//! optimizer and replay state stored in a checkpoint, this makes a resumed
//! run continue exactly as the uninterrupted one would have.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::csvio::{fmt_float, CsvTable};
use crate::drl::{ddpg_update, explore, per_sample, Checkpoint, Ddpg, DdpgConfig, PerConfig, ReplayBuffer, Transition};
use crate::env::DampingEnv;
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::seed::{derive, stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub max_episodes: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub per_alpha: f64,
    pub per_beta_start: f64,
    pub per_beta_end: f64,
    pub per_eps: f64,
    /// Exploration noise std, decayed linearly over the episodes.
    pub noise_start: f64,
    pub noise_end: f64,
    pub checkpoint_every: usize,
    pub agent: DdpgConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_episodes: 5000,
            batch_size: 32,
            buffer_capacity: 1000,
            per_alpha: 0.6,
            per_beta_start: 0.4,
            per_beta_end: 1.0,
            per_eps: 1e-3,
            noise_start: 0.2,
            noise_end: 0.02,
            checkpoint_every: 100,
            agent: DdpgConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad("need 0 < batch_size <= buffer_capacity");
        }
        if !(self.per_alpha >= 0.0 && self.per_eps > 0.0) {
            return bad("PER alpha must be >= 0 and eps > 0");
        }
        if !(0.0..=1.0).contains(&self.per_beta_start) || !(0.0..=1.0).contains(&self.per_beta_end) {
            return bad("PER beta must lie in [0, 1]");
        }
        if !(self.noise_start >= 0.0 && self.noise_end >= 0.0) {
            return bad("exploration noise must be >= 0");
        }
        if self.checkpoint_every == 0 {
            return bad("checkpoint_every must be > 0");
        }
        Ok(())
    }

    /// Linear schedule value at episode `e`: `start` at the first episode,
    /// `end` at the last.
    fn schedule(&self, start: f64, end: f64, e: usize) -> f64 {
        if self.max_episodes <= 1 {
            return start;
        }
        let frac = (e as f64 / (self.max_episodes - 1) as f64).min(1.0);
        start + (end - start) * frac
    }

    pub fn exploration_std(&self, e: usize) -> f64 {
        self.schedule(self.noise_start, self.noise_end, e)
    }

    pub fn per_beta(&self, e: usize) -> f64 {
        self.schedule(self.per_beta_start, self.per_beta_end, e)
    }
}

/// One row of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeLog {
    /// 1-based episode number.
    pub episode: usize,
    pub steps: usize,
    pub episode_return: f64,
    pub mean_reward: f64,
    pub terminated_unstable: bool,
}

pub const LOG_HEADER: [&str; 5] = ["episode", "steps", "return", "mean_reward", "terminated_unstable"];

pub fn log_table(log: &[EpisodeLog]) -> CsvTable {
    let mut t = CsvTable::new(LOG_HEADER);
    for e in log {
        t.push(vec![
            e.episode.to_string(),
            e.steps.to_string(),
            fmt_float(e.episode_return),
            fmt_float(e.mean_reward),
            u8::from(e.terminated_unstable).to_string(),
        ])
        .expect("row matches the log header");
    }
    t
}

pub struct Trainer<S: Scalar> {
    pub env: DampingEnv<S>,
    agent: Ddpg<S>,
    buffer: ReplayBuffer<S>,
    config: TrainConfig,
    master_seed: u64,
    total_steps: usize,
    log: Vec<EpisodeLog>,
}

impl<S: Scalar> Trainer<S> {
    pub fn new(env: DampingEnv<S>, config: TrainConfig, master_seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive(master_seed, stream::AGENT_INIT, 0));
        let agent = Ddpg::new(env.observation_dim(), env.action_dim(), &config.agent, &mut rng)?;
        let per = PerConfig {
            alpha: S::lit(config.per_alpha),
            beta: S::lit(config.per_beta_start),
            eps: S::lit(config.per_eps),
        };
        let buffer = ReplayBuffer::new(config.buffer_capacity, per)?;
        Ok(Trainer {
            env,
            agent,
            buffer,
            config,
            master_seed,
            total_steps: 0,
            log: Vec::new(),
        })
    }

    /// Restores agent, replay buffer, counters and log from a checkpoint
    /// written by [`Trainer::checkpoint`].
    pub fn resume(env: DampingEnv<S>, config: TrainConfig, checkpoint: &Checkpoint) -> Result<Self> {
        config.validate()?;
        let master_seed: u64 = checkpoint
            .meta_value("train.master_seed")?
            .parse()
            .map_err(|e| Error::Checkpoint(format!("master seed: {e}")))?;
        let agent: Ddpg<S> = checkpoint.agent()?;
        if agent.obs_dim() != env.observation_dim() || agent.act_dim() != env.action_dim() {
            return Err(Error::Checkpoint("agent dimensions differ from the environment".into()));
        }
        let buffer = checkpoint.replay()?;
        let total_steps = checkpoint.count("train.total_steps")?;
        let episodes = checkpoint.count("train.episode")?;
        let steps: Vec<f64> = checkpoint.vector("log.steps")?;
        let returns: Vec<f64> = checkpoint.vector("log.return")?;
        let unstable: Vec<f64> = checkpoint.vector("log.terminated_unstable")?;
        if steps.len() != episodes || returns.len() != episodes || unstable.len() != episodes {
            return Err(Error::Checkpoint("training log length differs from the episode counter".into()));
        }
        let log = (0..episodes)
            .map(|i| EpisodeLog {
                episode: i + 1,
                steps: steps[i] as usize,
                episode_return: returns[i],
                mean_reward: if steps[i] > 0.0 { returns[i] / steps[i] } else { 0.0 },
                terminated_unstable: unstable[i] != 0.0,
            })
            .collect();
        Ok(Trainer {
            env,
            agent,
            buffer,
            config,
            master_seed,
            total_steps,
            log,
        })
    }

    pub fn agent(&self) -> &Ddpg<S> {
        &self.agent
    }

    pub fn buffer(&self) -> &ReplayBuffer<S> {
        &self.buffer
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn log(&self) -> &[EpisodeLog] {
        &self.log
    }

    pub fn episodes_done(&self) -> usize {
        self.log.len()
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.put_agent(&self.agent);
        ck.put_replay(&self.buffer);
        ck.put_scalar("train.episode", self.log.len() as f64);
        ck.put_scalar("train.total_steps", self.total_steps as f64);
        ck.put_meta("train.master_seed", self.master_seed.to_string());
        ck.put_vector("log.steps", &self.log.iter().map(|e| e.steps as f64).collect::<Vec<_>>());
        ck.put_vector("log.return", &self.log.iter().map(|e| e.episode_return).collect::<Vec<_>>());
        ck.put_vector(
            "log.terminated_unstable",
            &self.log.iter().map(|e| f64::from(u8::from(e.terminated_unstable))).collect::<Vec<_>>(),
        );
        ck
    }

    /// Runs the next episode: act with exploration noise, store, and update
    /// after every step once the buffer holds a minibatch.
    pub fn run_episode(&mut self) -> Result<EpisodeLog> {
        let e = self.log.len();
        let idx = e as u64;
        let mut explore_rng = ChaCha8Rng::seed_from_u64(derive(self.master_seed, stream::EXPLORATION, idx));
        let mut sample_rng = ChaCha8Rng::seed_from_u64(derive(self.master_seed, stream::REPLAY_SAMPLING, idx));
        let std = S::lit(self.config.exploration_std(e));
        self.buffer.per.beta = S::lit(self.config.per_beta(e));

        let mut obs = self.env.reset(derive(self.master_seed, stream::ENV_RESET, idx))?;
        let mut ret = 0.0;
        let mut steps = 0;
        let mut unstable = false;
        while !self.env.is_done() {
            let action = explore(&self.agent.act(&obs)?, std, &mut explore_rng);
            let action_slice: Vec<S> = action.iter().copied().collect();
            let out = self.env.step(&action_slice)?;
            ret += out.reward.as_f64();
            steps += 1;
            unstable |= out.terminated;
            self.buffer.push(Transition {
                s: obs,
                a: action,
                r: out.reward,
                s_next: out.observation.clone(),
                done: out.terminated,
                priority: S::zero(),
            });
            self.total_steps += 1;
            if self.buffer.len() >= self.config.batch_size {
                let sample = per_sample(&self.buffer, self.config.batch_size, &mut sample_rng)?;
                let stats = ddpg_update(&mut self.agent, &sample.batch, &sample.weights)?;
                self.buffer.update_priorities(&sample.indices, &stats.priorities)?;
                self.agent.soft_update_targets()?;
            }
            obs = out.observation;
        }
        let entry = EpisodeLog {
            episode: e + 1,
            steps,
            episode_return: ret,
            mean_reward: if steps > 0 { ret / steps as f64 } else { 0.0 },
            terminated_unstable: unstable,
        };
        self.log.push(entry.clone());
        Ok(entry)
    }

    /// Trains until `max_episodes`, calling `on_checkpoint` after every
    /// `checkpoint_every` episodes. An error leaves the last delivered
    /// checkpoint as the latest good state.
    pub fn train<F>(&mut self, mut on_checkpoint: F) -> Result<()>
    where
        F: FnMut(&Self) -> Result<()>,
    {
        while self.log.len() < self.config.max_episodes {
            self.run_episode()?;
            if self.log.len().is_multiple_of(self.config.checkpoint_every) {
                on_checkpoint(self)?;
            }
        }
        Ok(())
    }
}

/// Deterministic actor action on an observation, as a plain vector.
pub fn greedy_action<S: Scalar>(agent: &Ddpg<S>, obs: &DVector<S>) -> Result<Vec<S>> {
    Ok(agent.act(obs)?.iter().copied().collect())
}
