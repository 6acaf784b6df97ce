//! Oscillation-damping toolkit for multi-machine power grids.
//!
//! The crate covers the full loop from a network-reduced swing model to a
//! trained wide-area controller:
//!
//! - [`grid`]: model data, equilibrium, linearization, linear (ZOH) and
//!   nonlinear (RK4) simulation, exact closed-loop spectra.
//! - [`modal`]: mode metrics, participation factors, dynamic mode
//!   decomposition and spectrum pairing.
//! - [`control`]: power system stabilizer, wide-area feedback, the
//!   energy-like measure and switching rule, communication delay.
//! - [`drl`]: MLP actor/critic with manual backpropagation, DDPG updates,
//!   prioritized replay and checkpoints.
//! - [`env`]: the episodic damping-control environment and policy evaluation.
//! - [`training`]: the seeded DDPG training loop.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`, which is what the tolerances in the
//! test suites assume.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod csvio;
pub mod drl;
pub mod env;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod modal;
pub mod num;
pub mod seed;
pub mod training;

pub use error::{Error, Result};
pub use num::Scalar;

pub use nalgebra::{Complex, DMatrix, DVector};

pub type GridModel64 = grid::GridModel<f64>;
pub type GridModel32 = grid::GridModel<f32>;
pub type SystemState64 = grid::SystemState<f64>;
pub type MachineData64 = grid::MachineData<f64>;
pub type FaultScenario64 = grid::FaultScenario<f64>;
pub type Mode64 = modal::Mode<f64>;
pub type PssParams64 = control::PssParams<f64>;
pub type ScsConfig64 = control::ScsConfig<f64>;
pub type Mlp64 = drl::Mlp<f64>;
pub type Mlp32 = drl::Mlp<f32>;
pub type Ddpg64 = drl::Ddpg<f64>;
pub type ReplayBuffer64 = drl::ReplayBuffer<f64>;
pub type Transition64 = drl::Transition<f64>;
pub type DampingEnv64 = env::DampingEnv<f64>;
