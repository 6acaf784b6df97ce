//! Model data files.
//!
//! A model file is TOML: a `dt`, one `[[machine]]` table per generator, the
//! reduced `[network]` matrices as row-major nested arrays, an optional
//! `[fault]` scenario and an optional `[state_space]` block that overrides
//! the linearization with explicit matrices (for extended or synthetic models).

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{build_linear_model, solve_equilibrium, FaultScenario, GridModel, MachineData, Network};
use crate::error::{Error, Result};
use crate::num::Scalar;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MachineRecord {
    pub inertia: f64,
    pub damping: f64,
    pub voltage: f64,
    pub mech_power: f64,
    #[serde(default)]
    pub controlled: bool,
    #[serde(default)]
    pub reference: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NetworkRecord {
    pub g: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FaultRecord {
    pub line: [usize; 2],
    pub start: f64,
    pub near_clear: f64,
    pub remote_clear: f64,
    pub fault: NetworkRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partial: Option<NetworkRecord>,
    pub post: NetworkRecord,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StateSpaceRecord {
    pub a: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b1: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b2: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub dt: f64,
    #[serde(rename = "machine")]
    pub machines: Vec<MachineRecord>,
    pub network: NetworkRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<FaultRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_space: Option<StateSpaceRecord>,
}

pub(crate) fn matrix_from_rows<S: Scalar>(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<S>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidModel(format!("{what}: ragged rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| S::lit(rows[i][j])))
}

pub(crate) fn matrix_to_rows<S: Scalar>(m: &DMatrix<S>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].as_f64()).collect())
        .collect()
}

impl NetworkRecord {
    pub fn to_network<S: Scalar>(&self) -> Result<Network<S>> {
        Network::new(matrix_from_rows(&self.g, "G")?, matrix_from_rows(&self.b, "B")?)
    }

    pub fn from_network<S: Scalar>(net: &Network<S>) -> Self {
        NetworkRecord {
            g: matrix_to_rows(&net.g),
            b: matrix_to_rows(&net.b),
        }
    }
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::from_toml(text, &e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model file serializes")
    }

    pub fn machines<S: Scalar>(&self) -> Vec<MachineData<S>> {
        self.machines
            .iter()
            .map(|m| MachineData {
                inertia: S::lit(m.inertia),
                damping: S::lit(m.damping),
                voltage: S::lit(m.voltage),
                mech_power: S::lit(m.mech_power),
                controlled: m.controlled,
                reference: m.reference,
            })
            .collect()
    }

    /// Linear model: explicit `[state_space]` matrices when present,
    /// otherwise the linearized swing model.
    pub fn build_model<S: Scalar>(&self) -> Result<GridModel<S>> {
        let machines = self.machines::<S>();
        let dt = S::lit(self.dt);
        let Some(ss) = &self.state_space else {
            let net = &self.network;
            return build_linear_model(
                machines,
                matrix_from_rows(&net.g, "G")?,
                matrix_from_rows(&net.b, "B")?,
                dt,
            );
        };
        let network = self.network.to_network::<S>()?;
        let theta_eq = solve_equilibrium(&machines, &network)?;
        let a: DMatrix<S> = matrix_from_rows(&ss.a, "A")?;
        let n = a.nrows();
        let ng = machines.len();
        let b1 = match &ss.b1 {
            Some(rows) => matrix_from_rows(rows, "B1")?,
            None => {
                let ctrl = super::controlled_indices(&machines);
                let mut b1 = DMatrix::zeros(n, ctrl.len());
                for (col, &g) in ctrl.iter().enumerate() {
                    if ng + g < n {
                        b1[(ng + g, col)] = S::one() / machines[g].inertia;
                    }
                }
                b1
            }
        };
        let b2 = match &ss.b2 {
            Some(rows) => matrix_from_rows(rows, "B2")?,
            None => {
                let mut b2 = DMatrix::zeros(n, ng);
                for i in 0..ng {
                    if ng + i < n {
                        b2[(ng + i, i)] = S::one() / machines[i].inertia;
                    }
                }
                b2
            }
        };
        GridModel::from_parts(machines, network, theta_eq, a, b1, b2, dt)
    }

    /// Fault scenario declared in the file, if any.
    pub fn fault_scenario<S: Scalar>(&self) -> Result<Option<FaultScenario<S>>> {
        let Some(f) = &self.fault else {
            return Ok(None);
        };
        let scenario = FaultScenario::new(
            (f.line[0], f.line[1]),
            S::lit(f.start),
            S::lit(f.near_clear),
            S::lit(f.remote_clear),
            self.network.to_network()?,
            f.fault.to_network()?,
            f.post.to_network()?,
        )?;
        match &f.partial {
            Some(p) => Ok(Some(scenario.with_partial(p.to_network()?)?)),
            None => Ok(Some(scenario)),
        }
    }

    /// Scenario from the file, or a steady run on the pre-event network.
    pub fn scenario_or_steady<S: Scalar>(&self) -> Result<FaultScenario<S>> {
        Ok(match self.fault_scenario()? {
            Some(s) => s,
            None => FaultScenario::steady(self.network.to_network()?),
        })
    }
}

/// The bundled three-machine, two-area test system.
pub const THREE_MACHINE: &str = include_str!("../../data/three_machine.toml");

pub fn three_machine() -> ModelFile {
    ModelFile::parse(THREE_MACHINE).expect("bundled model parses")
}
