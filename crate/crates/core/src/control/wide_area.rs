//! Wide-area linear state feedback `u_wac = −K·y` on the observation
//! `y = (θ − θ_ref·1, ω)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::num::Scalar;

/// A feedback gain `K ∈ R^{p×m}` with entries bounded by `k_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct GainAction<S: Scalar> {
    pub k: DMatrix<S>,
    pub k_max: S,
}

impl<S: Scalar> GainAction<S> {
    pub fn zeros(p: usize, m: usize, k_max: S) -> Self {
        GainAction {
            k: DMatrix::zeros(p, m),
            k_max,
        }
    }

    /// Unflattens a normalized action (row-major, entries in `[−1, 1]`) and
    /// scales it by `k_max`.
    pub fn from_normalized(action: &[S], p: usize, m: usize, k_max: S) -> Result<Self> {
        if action.len() != p * m {
            return Err(Error::dims(format!("action of length {} for a {p}x{m} gain", action.len())));
        }
        if let Some(a) = action.iter().find(|a| !(a.abs() <= S::one())) {
            return Err(Error::InvalidParameter(format!("normalized action entry {a} outside [-1, 1]")));
        }
        Ok(GainAction {
            k: DMatrix::from_row_slice(p, m, action).map(|a| a * k_max),
            k_max,
        })
    }

    /// Inverse of [`GainAction::from_normalized`].
    pub fn to_normalized(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.k.len());
        for r in 0..self.k.nrows() {
            for c in 0..self.k.ncols() {
                out.push(self.k[(r, c)] / self.k_max);
            }
        }
        out
    }
}

pub fn wide_area_output<S: Scalar>(k: &DMatrix<S>, observation: &DVector<S>) -> Result<DVector<S>> {
    if k.ncols() != observation.len() {
        return Err(Error::dims(format!(
            "gain with {} columns applied to an observation of length {}",
            k.ncols(),
            observation.len()
        )));
    }
    Ok(-(k * observation))
}
