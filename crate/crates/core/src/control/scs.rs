//! Energy-like measure of the oscillation and the switching rule that
//! enables wide-area control only while it exceeds a threshold.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SystemState;
use crate::num::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScsConfig<S: Scalar> {
    /// Switching threshold `r̂`.
    pub threshold: S,
    /// Weights of the relative-speed, speed and angle terms.
    pub kappa: [S; 3],
    /// Index of the reference generator.
    pub reference: usize,
}

impl<S: Scalar> ScsConfig<S> {
    pub fn new(threshold: S, kappa: [S; 3], reference: usize) -> Result<Self> {
        let cfg = ScsConfig {
            threshold,
            kappa,
            reference,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > S::zero()) {
            return Err(Error::InvalidParameter("switching threshold must be > 0".into()));
        }
        if self.kappa.iter().any(|k| !(*k >= S::zero())) {
            return Err(Error::InvalidParameter("energy weights must be >= 0".into()));
        }
        if self.kappa.iter().all(|k| *k == S::zero()) {
            return Err(Error::InvalidParameter("energy weights are all zero".into()));
        }
        Ok(())
    }
}

/// `P = κ1 Σ_{i,j} (ω_i − ω_j)² + κ2 Σ_{i≠ref} ω_i² + κ3 Σ_{i≠ref} (θ_i − θ_ref)²`.
///
/// The pair sum runs over ordered pairs, so every unordered pair counts twice.
pub fn energy<S: Scalar>(state: &SystemState<S>, cfg: &ScsConfig<S>) -> S {
    let w = &state.omega;
    let th = &state.theta;
    let r = cfg.reference;
    let mut pairs = S::zero();
    for i in 0..w.len() {
        for j in 0..w.len() {
            let d = w[i] - w[j];
            pairs += d * d;
        }
    }
    let mut kinetic = S::zero();
    let mut potential = S::zero();
    for i in (0..w.len()).filter(|&i| i != r) {
        kinetic += w[i] * w[i];
        let d = th[i] - th[r];
        potential += d * d;
    }
    cfg.kappa[0] * pairs + cfg.kappa[1] * kinetic + cfg.kappa[2] * potential
}

/// Returns `u_loc + u_wac` with the flag set when `P > r̂`, else `u_loc`
/// unchanged with the flag cleared.
pub fn scs_combine<S: Scalar>(u_loc: &DVector<S>, u_wac: &DVector<S>, p: S, threshold: S) -> (DVector<S>, bool) {
    if p > threshold {
        (u_loc + u_wac, true)
    } else {
        (u_loc.clone(), false)
    }
}
