//! Local and wide-area damping controllers and the switching rule that
//! combines them.

pub mod delay;
pub mod pss;
pub mod scs;
pub mod wide_area;

pub use delay::{delayed_observation, DelayLine};
pub use pss::{pss_step, DiscretePss, PssBank, PssParams, PssState};
pub use scs::{energy, scs_combine, ScsConfig};
pub use wide_area::{wide_area_output, GainAction};

#[cfg(test)]
mod tests;
