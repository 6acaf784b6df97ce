//! Eigenvalue-shaping reward.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::modal::{pair_spectra, SpectrumPairing};
use crate::num::Scalar;

/// How matched real parts enter the reward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardForm {
    /// `Re(λ)² − Re(λ̂)²`, which favours real parts close to zero.
    #[default]
    Printed,
    /// `(Re(λ) − Re(λ̂))²`.
    Deviation,
}

/// `−α Σ_pairs [Re(λ)² − Re(λ̂)²] − β Σ_pairs Im(λ)²` over matched
/// oscillatory pairs (one representative per conjugate pair).
///
/// Closed-loop oscillatory modes without an open-loop partner contribute
/// `−α Re(λ)² − β Im(λ)²`; unmatched open-loop modes contribute nothing.
pub fn eigen_reward<S: Scalar>(
    closed: &[Complex<S>],
    open: &[Complex<S>],
    alpha: S,
    beta: S,
    form: RewardForm,
) -> (S, SpectrumPairing) {
    let pairing = pair_spectra(closed, open);
    let mut cost = S::zero();
    for &(c, o) in &pairing.pairs {
        let (l, lh) = (closed[c], open[o]);
        let real = match form {
            RewardForm::Printed => l.re * l.re - lh.re * lh.re,
            RewardForm::Deviation => (l.re - lh.re) * (l.re - lh.re),
        };
        cost += alpha * real + beta * l.im * l.im;
    }
    for &c in &pairing.unmatched_closed {
        let l = closed[c];
        cost += alpha * l.re * l.re + beta * l.im * l.im;
    }
    (-cost, pairing)
}
