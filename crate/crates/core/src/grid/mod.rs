//! Network-reduced multi-machine swing model and its linearization.
//!
//! Each generator is a constant voltage `E_i` behind reactance with inertia
//! `M_i` and damping `D_i`. Loads are folded into the reduced admittance
//! matrix `G + jB`, so the electrical power of machine `i` is
//!
//! ```text
//! P_e,i(θ) = Σ_j E_i E_j (G_ij cos θ_ij + B_ij sin θ_ij),   θ_ij = θ_i − θ_j
//! ```
//!
//! and the state is `x = (θ − θ*, ω, x_rem)` with `x_rem` empty for the
//! classical model.

pub mod data;
pub mod sim;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::num::Scalar;

/// Per-generator parameters of the classical machine model.
#[derive(Clone, Debug, PartialEq)]
pub struct MachineData<S: Scalar> {
    pub inertia: S,
    pub damping: S,
    pub voltage: S,
    pub mech_power: S,
    /// Receives a wide-area control input.
    pub controlled: bool,
    /// Angle reference; exactly one per system.
    pub reference: bool,
}

impl<S: Scalar> MachineData<S> {
    pub fn new(inertia: S, damping: S, voltage: S, mech_power: S) -> Self {
        MachineData {
            inertia,
            damping,
            voltage,
            mech_power,
            controlled: false,
            reference: false,
        }
    }

    pub fn controlled(mut self, yes: bool) -> Self {
        self.controlled = yes;
        self
    }

    pub fn reference(mut self, yes: bool) -> Self {
        self.reference = yes;
        self
    }
}

pub fn validate_machines<S: Scalar>(machines: &[MachineData<S>]) -> Result<()> {
    if machines.is_empty() {
        return Err(Error::InvalidModel("no machines".into()));
    }
    for (i, m) in machines.iter().enumerate() {
        if !(m.inertia > S::zero()) {
            return Err(Error::InvalidModel(format!("machine {} inertia must be > 0", i + 1)));
        }
        if !(m.voltage > S::zero()) {
            return Err(Error::InvalidModel(format!("machine {} voltage must be > 0", i + 1)));
        }
        if !(m.damping.is_finite_value() && m.mech_power.is_finite_value()) {
            return Err(Error::InvalidModel(format!("machine {} has non-finite data", i + 1)));
        }
    }
    let refs = machines.iter().filter(|m| m.reference).count();
    if refs != 1 {
        return Err(Error::InvalidModel(format!(
            "exactly one reference generator required, found {refs}"
        )));
    }
    if !machines.iter().any(|m| m.controlled) {
        return Err(Error::InvalidModel("no controlled generator".into()));
    }
    Ok(())
}

pub fn reference_index<S: Scalar>(machines: &[MachineData<S>]) -> usize {
    machines.iter().position(|m| m.reference).unwrap_or(0)
}

pub fn controlled_indices<S: Scalar>(machines: &[MachineData<S>]) -> Vec<usize> {
    machines
        .iter()
        .enumerate()
        .filter(|(_, m)| m.controlled)
        .map(|(i, _)| i)
        .collect()
}

/// Reduced network admittance `G + jB` between generator internal buses.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<S: Scalar> {
    pub g: DMatrix<S>,
    pub b: DMatrix<S>,
}

impl<S: Scalar> Network<S> {
    pub fn new(g: DMatrix<S>, b: DMatrix<S>) -> Result<Self> {
        if !g.is_square() || g.shape() != b.shape() {
            return Err(Error::dims(format!(
                "network matrices G {:?} and B {:?} must be square and equal in size",
                g.shape(),
                b.shape()
            )));
        }
        linalg::ensure_finite(&g, "G")?;
        linalg::ensure_finite(&b, "B")?;
        for (name, m) in [("G", &g), ("B", &b)] {
            let scale = m.amax().max(S::one());
            if (m - m.transpose()).amax() > S::lit(1e-12) * scale {
                return Err(Error::InvalidModel(format!("{name} is not symmetric")));
            }
        }
        Ok(Network { g, b })
    }

    pub fn size(&self) -> usize {
        self.g.nrows()
    }

    /// Fails with the index of the first generator not reachable from `root`
    /// through nonzero transfer admittances.
    pub fn check_connected(&self, root: usize) -> Result<()> {
        let n = self.size();
        let mut seen = vec![false; n];
        let mut stack = vec![root];
        seen[root] = true;
        while let Some(i) = stack.pop() {
            for (j, s) in seen.iter_mut().enumerate() {
                if !*s && i != j && (self.g[(i, j)] != S::zero() || self.b[(i, j)] != S::zero()) {
                    *s = true;
                    stack.push(j);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(i) => Err(Error::DisconnectedNetwork(i + 1)),
            None => Ok(()),
        }
    }
}

/// Electrical power output of every machine at absolute angles `theta`.
pub fn electrical_power<S: Scalar>(
    machines: &[MachineData<S>],
    net: &Network<S>,
    theta: &DVector<S>,
) -> DVector<S> {
    let n = machines.len();
    DVector::from_fn(n, |i, _| {
        let mut p = S::zero();
        for j in 0..n {
            let d = theta[i] - theta[j];
            let ee = machines[i].voltage * machines[j].voltage;
            p += ee * (net.g[(i, j)] * d.cos() + net.b[(i, j)] * d.sin());
        }
        p
    })
}

/// Analytic Jacobian `∂P_e/∂θ`.
pub fn power_jacobian<S: Scalar>(
    machines: &[MachineData<S>],
    net: &Network<S>,
    theta: &DVector<S>,
) -> DMatrix<S> {
    let n = machines.len();
    let mut jac = DMatrix::<S>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = theta[i] - theta[j];
            let ee = machines[i].voltage * machines[j].voltage;
            let off = ee * (net.g[(i, j)] * d.sin() - net.b[(i, j)] * d.cos());
            jac[(i, j)] = off;
            jac[(i, i)] -= off;
        }
    }
    jac
}

pub const EQUILIBRIUM_TOL: f64 = 1e-10;
pub const EQUILIBRIUM_MAX_ITER: usize = 50;
/// Largest power mismatch tolerated at the reference machine after the
/// non-reference balance has been solved.
pub const REFERENCE_BALANCE_TOL: f64 = 1e-6;

/// Stationary angles with `P_m,i = P_e,i(θ*)` and the reference angle at zero.
///
/// Newton's method from a flat start on the non-reference balance equations;
/// the reference balance is checked afterwards.
pub fn solve_equilibrium<S: Scalar>(
    machines: &[MachineData<S>],
    net: &Network<S>,
) -> Result<DVector<S>> {
    validate_machines(machines)?;
    let n = machines.len();
    if net.size() != n {
        return Err(Error::dims(format!("network of size {} for {} machines", net.size(), n)));
    }
    let r = reference_index(machines);
    net.check_connected(r)?;
    let free: Vec<usize> = (0..n).filter(|&i| i != r).collect();
    let pm = DVector::from_fn(n, |i, _| machines[i].mech_power);
    let mut theta = DVector::<S>::zeros(n);
    // The fixed tolerance is below single-precision rounding of the power
    // sums, so it is widened to a few ulps of the largest flow for `f32`.
    let flow_scale = (0..n)
        .map(|i| {
            (0..n).fold(S::zero(), |acc, j| {
                acc + machines[i].voltage * machines[j].voltage * (net.g[(i, j)].abs() + net.b[(i, j)].abs())
            })
        })
        .fold(S::one(), S::max);
    let ulp_tol = S::default_epsilon() * S::lit(64.0) * flow_scale;
    let tol = S::lit(EQUILIBRIUM_TOL).max(ulp_tol);
    let mut converged = free.is_empty();
    for _ in 0..=EQUILIBRIUM_MAX_ITER {
        let mismatch = electrical_power(machines, net, &theta) - &pm;
        let f = DVector::from_fn(free.len(), |k, _| mismatch[free[k]]);
        if f.amax() < tol {
            converged = true;
            break;
        }
        let full = power_jacobian(machines, net, &theta);
        let jac = DMatrix::from_fn(free.len(), free.len(), |a, b| full[(free[a], free[b])]);
        let step = jac
            .lu()
            .solve(&f)
            .ok_or_else(|| Error::NoStationaryPoint("singular power-flow Jacobian".into()))?;
        for (k, &i) in free.iter().enumerate() {
            theta[i] -= step[k];
        }
        if !theta.iter().all(|x| x.is_finite_value()) {
            break;
        }
    }
    if !converged {
        return Err(Error::NoStationaryPoint(format!(
            "Newton iteration did not converge in {EQUILIBRIUM_MAX_ITER} iterations"
        )));
    }
    let residual = electrical_power(machines, net, &theta)[r] - pm[r];
    if residual.abs() > S::lit(REFERENCE_BALANCE_TOL).max(ulp_tol) {
        return Err(Error::NoStationaryPoint(format!(
            "power imbalance {residual} at reference generator {}",
            r + 1
        )));
    }
    Ok(theta)
}

/// Linear state-space model `ẋ = A x + B1 u + B2 η` about a stationary point.
#[derive(Clone, Debug)]
pub struct GridModel<S: Scalar> {
    pub a: DMatrix<S>,
    pub b1: DMatrix<S>,
    pub b2: DMatrix<S>,
    pub machines: Vec<MachineData<S>>,
    /// Equilibrium angles, reference at zero.
    pub theta_eq: DVector<S>,
    pub network: Network<S>,
    pub dt: S,
    controlled: Vec<usize>,
    reference: usize,
}

impl<S: Scalar> GridModel<S> {
    /// Assembles a model from explicit matrices; the state must start with
    /// `(θ, ω)` for the listed machines.
    pub fn from_parts(
        machines: Vec<MachineData<S>>,
        network: Network<S>,
        theta_eq: DVector<S>,
        a: DMatrix<S>,
        b1: DMatrix<S>,
        b2: DMatrix<S>,
        dt: S,
    ) -> Result<Self> {
        validate_machines(&machines)?;
        let ng = machines.len();
        let controlled = controlled_indices(&machines);
        let n = a.nrows();
        if !a.is_square() || n < 2 * ng {
            return Err(Error::dims(format!(
                "A is {:?}, need square with at least {} states",
                a.shape(),
                2 * ng
            )));
        }
        if b1.nrows() != n || b1.ncols() != controlled.len() {
            return Err(Error::dims(format!(
                "B1 is {:?}, expected {}x{}",
                b1.shape(),
                n,
                controlled.len()
            )));
        }
        if b2.nrows() != n {
            return Err(Error::dims(format!("B2 has {} rows, expected {}", b2.nrows(), n)));
        }
        if network.size() != ng || theta_eq.len() != ng {
            return Err(Error::dims("network or equilibrium size differs from machine count"));
        }
        for (col, &gen) in controlled.iter().enumerate() {
            for row in 0..n {
                if row != ng + gen && b1[(row, col)] != S::zero() {
                    return Err(Error::InvalidModel(format!(
                        "B1 column {} touches state {} outside generator {}'s frequency row",
                        col + 1,
                        row + 1,
                        gen + 1
                    )));
                }
            }
        }
        if !(dt > S::zero()) {
            return Err(Error::InvalidModel("dt must be > 0".into()));
        }
        linalg::ensure_finite(&a, "A")?;
        linalg::ensure_finite(&b1, "B1")?;
        linalg::ensure_finite(&b2, "B2")?;
        let reference = reference_index(&machines);
        Ok(GridModel {
            a,
            b1,
            b2,
            machines,
            theta_eq,
            network,
            dt,
            controlled,
            reference,
        })
    }

    /// Total state dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_g(&self) -> usize {
        self.machines.len()
    }

    /// Number of control inputs (controlled generators).
    pub fn p(&self) -> usize {
        self.controlled.len()
    }

    pub fn q(&self) -> usize {
        self.b2.ncols()
    }

    pub fn n_rem(&self) -> usize {
        self.n() - 2 * self.n_g()
    }

    /// Observation dimension `m = 2·n_g`.
    pub fn m(&self) -> usize {
        2 * self.n_g()
    }

    pub fn controlled(&self) -> &[usize] {
        &self.controlled
    }

    pub fn reference(&self) -> usize {
        self.reference
    }

    /// Linear map from the state to the observation `(θ − θ_ref·1, ω)`.
    pub fn observation_matrix(&self) -> DMatrix<S> {
        let ng = self.n_g();
        let mut c = DMatrix::<S>::zeros(2 * ng, self.n());
        for i in 0..ng {
            c[(i, i)] += S::one();
            c[(i, self.reference)] -= S::one();
            c[(ng + i, ng + i)] = S::one();
        }
        c
    }

    /// Expresses an observation-space gain `K (p×m)` as a state feedback `(p×n)`.
    pub fn lift_gain(&self, k: &DMatrix<S>) -> Result<DMatrix<S>> {
        if k.nrows() != self.p() || k.ncols() != self.m() {
            return Err(Error::GainShapeMismatch {
                expected_rows: self.p(),
                expected_cols: self.m(),
                rows: k.nrows(),
                cols: k.ncols(),
            });
        }
        Ok(k * self.observation_matrix())
    }

    pub fn closed_loop_matrix(&self, k: &DMatrix<S>) -> Result<DMatrix<S>> {
        Ok(&self.a - &self.b1 * self.lift_gain(k)?)
    }
}

/// Linearizes the swing model about its stationary point.
pub fn build_linear_model<S: Scalar>(
    machines: Vec<MachineData<S>>,
    g: DMatrix<S>,
    b: DMatrix<S>,
    dt: S,
) -> Result<GridModel<S>> {
    validate_machines(&machines)?;
    let network = Network::new(g, b)?;
    let theta_eq = solve_equilibrium(&machines, &network)?;
    let ng = machines.len();
    let jac = power_jacobian(&machines, &network, &theta_eq);
    let n = 2 * ng;
    let mut a = DMatrix::<S>::zeros(n, n);
    for i in 0..ng {
        let m = machines[i].inertia;
        a[(i, ng + i)] = S::one();
        for j in 0..ng {
            a[(ng + i, j)] = -jac[(i, j)] / m;
        }
        a[(ng + i, ng + i)] = -machines[i].damping / m;
    }
    let controlled = controlled_indices(&machines);
    let mut b1 = DMatrix::<S>::zeros(n, controlled.len());
    for (col, &gen) in controlled.iter().enumerate() {
        b1[(ng + gen, col)] = S::one() / machines[gen].inertia;
    }
    let mut b2 = DMatrix::<S>::zeros(n, ng);
    for i in 0..ng {
        b2[(ng + i, i)] = S::one() / machines[i].inertia;
    }
    GridModel::from_parts(machines, network, theta_eq, a, b1, b2, dt)
}

/// Spectrum of `A − B1·K` in canonical order.
pub fn exact_eigenvalues<S: Scalar>(model: &GridModel<S>, k: &DMatrix<S>) -> Result<Vec<Complex<S>>> {
    linalg::eigenvalues(&model.closed_loop_matrix(k)?)
}

/// Deviation state `(θ, ω, x_rem)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemState<S: Scalar> {
    pub theta: DVector<S>,
    pub omega: DVector<S>,
    pub rem: DVector<S>,
}

impl<S: Scalar> SystemState<S> {
    pub fn zeros(n_g: usize, n_rem: usize) -> Self {
        SystemState {
            theta: DVector::zeros(n_g),
            omega: DVector::zeros(n_g),
            rem: DVector::zeros(n_rem),
        }
    }

    pub fn for_model(model: &GridModel<S>) -> Self {
        Self::zeros(model.n_g(), model.n_rem())
    }

    /// Splits a flat state vector; `n_g` sets the `(θ, ω)` block sizes.
    pub fn from_vector(x: &DVector<S>, n_g: usize) -> Result<Self> {
        if x.len() < 2 * n_g {
            return Err(Error::dims(format!("state of length {} for {} machines", x.len(), n_g)));
        }
        Ok(SystemState {
            theta: x.rows(0, n_g).into_owned(),
            omega: x.rows(n_g, n_g).into_owned(),
            rem: x.rows(2 * n_g, x.len() - 2 * n_g).into_owned(),
        })
    }

    pub fn to_vector(&self) -> DVector<S> {
        let ng = self.theta.len();
        let mut x = DVector::zeros(2 * ng + self.rem.len());
        x.rows_mut(0, ng).copy_from(&self.theta);
        x.rows_mut(ng, ng).copy_from(&self.omega);
        x.rows_mut(2 * ng, self.rem.len()).copy_from(&self.rem);
        x
    }

    pub fn n_g(&self) -> usize {
        self.theta.len()
    }

    pub fn is_finite(&self) -> bool {
        self.theta
            .iter()
            .chain(self.omega.iter())
            .chain(self.rem.iter())
            .all(|x| x.is_finite_value())
    }

    /// Observation `(θ − θ_ref·1, ω)` of length `2·n_g`.
    pub fn observation(&self, reference: usize) -> DVector<S> {
        let ng = self.n_g();
        let th_ref = self.theta[reference];
        DVector::from_fn(2 * ng, |i, _| {
            if i < ng {
                self.theta[i] - th_ref
            } else {
                self.omega[i - ng]
            }
        })
    }

    pub fn max_abs_omega(&self) -> S {
        self.omega.iter().fold(S::zero(), |acc, w| acc.max(w.abs()))
    }
}

/// Network sequence for a timed fault with staged clearing.
///
/// The fault-on network applies from `start`; if a partially cleared network
/// is supplied it takes over at `near_clear`, otherwise the fault-on network
/// persists until `remote_clear`, after which the post-fault network applies.
#[derive(Clone, Debug)]
pub struct FaultScenario<S: Scalar> {
    /// Faulted line endpoints (1-based bus labels, informational).
    pub line: (usize, usize),
    pub start: S,
    pub near_clear: S,
    pub remote_clear: S,
    pub pre: Network<S>,
    pub fault: Network<S>,
    pub partial: Option<Network<S>>,
    pub post: Network<S>,
}

impl<S: Scalar> FaultScenario<S> {
    pub fn new(
        line: (usize, usize),
        start: S,
        near_clear: S,
        remote_clear: S,
        pre: Network<S>,
        fault: Network<S>,
        post: Network<S>,
    ) -> Result<Self> {
        if !(start < near_clear && near_clear < remote_clear) {
            return Err(Error::InvalidModel(
                "fault times must satisfy start < near-end clearing < remote-end clearing".into(),
            ));
        }
        if !(start >= S::zero()) {
            return Err(Error::InvalidModel("fault start must be >= 0".into()));
        }
        let n = pre.size();
        if fault.size() != n || post.size() != n {
            return Err(Error::dims("fault scenario networks differ in size"));
        }
        Ok(FaultScenario {
            line,
            start,
            near_clear,
            remote_clear,
            pre,
            fault,
            partial: None,
            post,
        })
    }

    pub fn with_partial(mut self, partial: Network<S>) -> Result<Self> {
        if partial.size() != self.pre.size() {
            return Err(Error::dims("partially cleared network differs in size"));
        }
        self.partial = Some(partial);
        Ok(self)
    }

    /// A scenario without any event.
    pub fn steady(net: Network<S>) -> Self {
        let inf = S::lit(f64::INFINITY);
        FaultScenario {
            line: (0, 0),
            start: inf,
            near_clear: inf,
            remote_clear: inf,
            pre: net.clone(),
            fault: net.clone(),
            partial: None,
            post: net,
        }
    }

    /// Event step indices: the first step boundary at or after each event time.
    pub fn event_steps(&self, dt: S) -> [usize; 3] {
        let idx = |t: S| -> usize {
            let x = t.as_f64() / dt.as_f64();
            if !x.is_finite() {
                usize::MAX
            } else {
                (x - 1e-9).ceil().max(0.0) as usize
            }
        };
        [idx(self.start), idx(self.near_clear), idx(self.remote_clear)]
    }

    /// Network in effect during the step that starts at step index `k`.
    pub fn network_at_step(&self, k: usize, events: &[usize; 3]) -> &Network<S> {
        if k < events[0] {
            &self.pre
        } else if k < events[1] {
            &self.fault
        } else if k < events[2] {
            self.partial.as_ref().unwrap_or(&self.fault)
        } else {
            &self.post
        }
    }
}

#[cfg(test)]
mod tests;
