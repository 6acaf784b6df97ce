//! DDPG learner: MLP actor and critic with hand-written backpropagation,
//! target networks, Gaussian exploration and proportional prioritized replay.

pub mod agent;
pub mod checkpoint;
pub mod mlp;
pub mod optim;
pub mod replay;

pub use agent::{
    actor_objective_grad, critic_loss_grad, ddpg_update, explore, soft_update, Ddpg, DdpgConfig,
    UpdateStats,
};
pub use checkpoint::{Checkpoint, NamedArray};
pub use mlp::{actor_forward, critic_forward, Activation, Gradients, Layer, Mlp};
pub use optim::{Optimizer, OptimizerKind};
pub use replay::{per_sample, PerConfig, ReplayBuffer, Sample, Transition};
