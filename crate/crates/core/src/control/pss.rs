//! Power system stabilizer: gain, washout and two lead-lag stages,
//!
//! ```text
//! k · T_w s/(1 + T_w s) · (1 + T_n1 s)/(1 + T_d1 s) · (1 + T_n2 s)/(1 + T_d2 s)
//! ```
//!
//! discretized stage by stage with the bilinear transform. Each stage is a
//! first-order section in transposed direct form II, so the filter carries
//! exactly three states.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PssParams<S: Scalar> {
    pub k: S,
    pub tw: S,
    pub tn1: S,
    pub td1: S,
    pub tn2: S,
    pub td2: S,
}

impl<S: Scalar> Default for PssParams<S> {
    fn default() -> Self {
        PssParams {
            k: S::lit(20.0),
            tw: S::lit(10.0),
            tn1: S::lit(0.05),
            td1: S::lit(0.02),
            tn2: S::lit(3.0),
            td2: S::lit(5.4),
        }
    }
}

impl<S: Scalar> PssParams<S> {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("tw", self.tw),
            ("tn1", self.tn1),
            ("td1", self.td1),
            ("tn2", self.tn2),
            ("td2", self.td2),
        ];
        for (name, t) in named {
            if !(t > S::zero() && t.is_finite_value()) {
                return Err(Error::InvalidParameter(format!("PSS time constant {name} must be > 0")));
            }
        }
        if !self.k.is_finite_value() {
            return Err(Error::InvalidParameter("PSS gain must be finite".into()));
        }
        Ok(())
    }
}

/// Bilinear discretization of `(b1 s + b0)/(a1 s + a0)`:
/// `y = n0 x + s`, `s⁺ = n1 x − d1 y`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Section<S: Scalar> {
    n0: S,
    n1: S,
    d1: S,
}

impl<S: Scalar> Section<S> {
    fn bilinear(b1: S, b0: S, a1: S, a0: S, dt: S) -> Self {
        let c = S::lit(2.0) / dt;
        let norm = a1 * c + a0;
        Section {
            n0: (b1 * c + b0) / norm,
            n1: (b0 - b1 * c) / norm,
            d1: (a0 - a1 * c) / norm,
        }
    }
}

/// Filter states of one stabilizer; zero is the zero-input steady state.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PssState<S: Scalar>(pub [S; 3]);

impl<S: Scalar> PssState<S> {
    pub fn zero() -> Self {
        PssState([S::zero(); 3])
    }
}

/// Discrete coefficients of one stabilizer at a fixed step.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePss<S: Scalar> {
    sections: [Section<S>; 3],
}

impl<S: Scalar> DiscretePss<S> {
    pub fn new(params: &PssParams<S>, dt: S) -> Result<Self> {
        params.validate()?;
        if !(dt > S::zero()) {
            return Err(Error::InvalidParameter("PSS step must be > 0".into()));
        }
        let one = S::one();
        Ok(DiscretePss {
            sections: [
                Section::bilinear(params.k * params.tw, S::zero(), params.tw, one, dt),
                Section::bilinear(params.tn1, one, params.td1, one, dt),
                Section::bilinear(params.tn2, one, params.td2, one, dt),
            ],
        })
    }
}

/// Advances the stabilizer by one sample of its input (the machine speed
/// deviation) and returns the output sample with the new filter state.
pub fn pss_step<S: Scalar>(pss: &DiscretePss<S>, input: S, state: &PssState<S>) -> (S, PssState<S>) {
    let mut x = input;
    let mut next = *state;
    for (i, sec) in pss.sections.iter().enumerate() {
        let y = sec.n0 * x + state.0[i];
        next.0[i] = sec.n1 * x - sec.d1 * y;
        x = y;
    }
    (x, next)
}

/// One stabilizer per controlled generator with its running state.
#[derive(Clone, Debug)]
pub struct PssBank<S: Scalar> {
    filters: Vec<DiscretePss<S>>,
    states: Vec<PssState<S>>,
}

impl<S: Scalar> PssBank<S> {
    pub fn new(params: &[PssParams<S>], dt: S) -> Result<Self> {
        let filters = params
            .iter()
            .map(|p| DiscretePss::new(p, dt))
            .collect::<Result<Vec<_>>>()?;
        let states = vec![PssState::zero(); filters.len()];
        Ok(PssBank { filters, states })
    }

    pub fn uniform(params: &PssParams<S>, count: usize, dt: S) -> Result<Self> {
        Self::new(&vec![*params; count], dt)
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn reset(&mut self) {
        self.states.iter_mut().for_each(|s| *s = PssState::zero());
    }

    pub fn states(&self) -> &[PssState<S>] {
        &self.states
    }

    /// Filters one speed sample per stabilizer and returns the raw outputs.
    pub fn step(&mut self, speeds: &DVector<S>) -> Result<DVector<S>> {
        if speeds.len() != self.filters.len() {
            return Err(Error::dims(format!(
                "{} speed samples for {} stabilizers",
                speeds.len(),
                self.filters.len()
            )));
        }
        let mut out = DVector::zeros(speeds.len());
        for i in 0..speeds.len() {
            let (y, s) = pss_step(&self.filters[i], speeds[i], &self.states[i]);
            out[i] = y;
            self.states[i] = s;
        }
        Ok(out)
    }
}
