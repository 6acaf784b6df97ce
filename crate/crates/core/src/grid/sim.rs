//! Time-domain simulation of the linear and nonlinear swing models.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{
    controlled_indices, electrical_power, solve_equilibrium, FaultScenario, GridModel,
    MachineData, Network, SystemState,
};
use crate::error::{Error, Result};
use crate::linalg::zoh_discretize;
use crate::num::Scalar;

/// Zero-order-hold discretization of `(A, B1, B2)` at the model step.
#[derive(Clone, Debug)]
pub struct LinearStepper<S: Scalar> {
    pub ad: DMatrix<S>,
    pub b1d: DMatrix<S>,
    pub b2d: DMatrix<S>,
    n_g: usize,
}

impl<S: Scalar> LinearStepper<S> {
    pub fn new(model: &GridModel<S>) -> Self {
        Self::with_step(model, model.dt)
    }

    pub fn with_step(model: &GridModel<S>, dt: S) -> Self {
        let (p, q) = (model.p(), model.q());
        let mut b = DMatrix::<S>::zeros(model.n(), p + q);
        b.columns_mut(0, p).copy_from(&model.b1);
        b.columns_mut(p, q).copy_from(&model.b2);
        let (ad, bd) = zoh_discretize(&model.a, &b, dt);
        LinearStepper {
            ad,
            b1d: bd.columns(0, p).into_owned(),
            b2d: bd.columns(p, q).into_owned(),
            n_g: model.n_g(),
        }
    }

    /// `x⁺ = Ad x + B1d u + B2d η` with `u`, `η` held over the step.
    pub fn step_vector(&self, x: &DVector<S>, u: &DVector<S>, eta: Option<&DVector<S>>) -> DVector<S> {
        let mut next = &self.ad * x + &self.b1d * u;
        if let Some(eta) = eta {
            next += &self.b2d * eta;
        }
        next
    }

    pub fn step(&self, x: &SystemState<S>, u: &DVector<S>, eta: Option<&DVector<S>>) -> SystemState<S> {
        let next = self.step_vector(&x.to_vector(), u, eta);
        SystemState::from_vector(&next, self.n_g).expect("stepper preserves state size")
    }
}

/// Draws `len` i.i.d. zero-mean Gaussian samples with deviation `std`.
pub fn gaussian_vector<S: Scalar, R: rand::Rng>(rng: &mut R, len: usize, std: S) -> DVector<S> {
    DVector::from_fn(len, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        S::lit(z) * std
    })
}

/// Simulates `ẋ = A x + B1 u + B2 η` for `steps` steps of the model's `Δt`.
///
/// `control` maps `(step, state)` to `u ∈ R^p`; `η` is redrawn every step
/// from a generator seeded with `seed`. Returns `steps + 1` states.
pub fn simulate_linear<S, F>(
    model: &GridModel<S>,
    x0: &SystemState<S>,
    mut control: F,
    noise_std: S,
    steps: usize,
    seed: u64,
) -> Result<Vec<SystemState<S>>>
where
    S: Scalar,
    F: FnMut(usize, &SystemState<S>) -> DVector<S>,
{
    if x0.to_vector().len() != model.n() || x0.n_g() != model.n_g() {
        return Err(Error::dims(format!("initial state does not match model dimension {}", model.n())));
    }
    if !(noise_std >= S::zero()) {
        return Err(Error::InvalidParameter("noise_std must be >= 0".into()));
    }
    let stepper = LinearStepper::new(model);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x0.clone());
    let mut x = x0.to_vector();
    for k in 0..steps {
        let state = out.last().expect("trajectory is non-empty");
        let u = control(k, state);
        if u.len() != model.p() {
            return Err(Error::dims(format!("control of length {}, expected {}", u.len(), model.p())));
        }
        let eta = (noise_std > S::zero()).then(|| gaussian_vector(&mut rng, model.q(), noise_std));
        x = stepper.step_vector(&x, &u, eta.as_ref());
        if !x.iter().all(|v| v.is_finite_value()) {
            return Err(Error::NumericalDivergence { step: k + 1 });
        }
        out.push(SystemState::from_vector(&x, model.n_g())?);
    }
    Ok(out)
}

/// Right-hand side of the swing equations in absolute angles.
///
/// `power` is the additive injection on every machine's `ω̇` row.
pub fn swing_rhs<S: Scalar>(
    machines: &[MachineData<S>],
    net: &Network<S>,
    theta: &DVector<S>,
    omega: &DVector<S>,
    power: &DVector<S>,
) -> (DVector<S>, DVector<S>) {
    let pe = electrical_power(machines, net, theta);
    let domega = DVector::from_fn(machines.len(), |i, _| {
        let m = &machines[i];
        (m.mech_power - pe[i] - m.damping * omega[i] + power[i]) / m.inertia
    });
    (omega.clone(), domega)
}

/// Fixed-step RK4 integrator of the reduced nonlinear swing model with
/// scheduled network switching.
#[derive(Clone, Debug)]
pub struct SwingPlant<S: Scalar> {
    machines: Vec<MachineData<S>>,
    controlled: Vec<usize>,
    scenario: FaultScenario<S>,
    events: [usize; 3],
    /// Pre-event stationary angles; states are deviations from these.
    pub theta_eq: DVector<S>,
    pub dt: S,
    step_index: usize,
}

impl<S: Scalar> SwingPlant<S> {
    pub fn new(machines: Vec<MachineData<S>>, scenario: FaultScenario<S>, dt: S) -> Result<Self> {
        if !(dt > S::zero()) {
            return Err(Error::InvalidParameter("dt must be > 0".into()));
        }
        if scenario.pre.size() != machines.len() {
            return Err(Error::dims("scenario network size differs from machine count"));
        }
        let theta_eq = solve_equilibrium(&machines, &scenario.pre)?;
        let events = scenario.event_steps(dt);
        Ok(SwingPlant {
            controlled: controlled_indices(&machines),
            machines,
            scenario,
            events,
            theta_eq,
            dt,
            step_index: 0,
        })
    }

    pub fn reset(&mut self) {
        self.step_index = 0;
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn machines(&self) -> &[MachineData<S>] {
        &self.machines
    }

    pub fn scenario(&self) -> &FaultScenario<S> {
        &self.scenario
    }

    /// Advances one step with `u ∈ R^p` held; `state` holds deviations.
    pub fn step(&mut self, state: &SystemState<S>, u: &DVector<S>) -> Result<SystemState<S>> {
        if u.len() != self.controlled.len() {
            return Err(Error::dims(format!(
                "control of length {}, expected {}",
                u.len(),
                self.controlled.len()
            )));
        }
        if !state.rem.is_empty() {
            return Err(Error::dims("nonlinear swing model has no remaining states"));
        }
        let ng = self.machines.len();
        let mut power = DVector::<S>::zeros(ng);
        for (col, &gen) in self.controlled.iter().enumerate() {
            power[gen] = u[col];
        }
        let net = self.scenario.network_at_step(self.step_index, &self.events);
        let h = self.dt;
        let half = S::lit(0.5) * h;
        let th0 = &state.theta + &self.theta_eq;
        let w0 = &state.omega;
        let f = |th: &DVector<S>, w: &DVector<S>| swing_rhs(&self.machines, net, th, w, &power);
        let (k1t, k1w) = f(&th0, w0);
        let (k2t, k2w) = f(&(&th0 + &k1t * half), &(w0 + &k1w * half));
        let (k3t, k3w) = f(&(&th0 + &k2t * half), &(w0 + &k2w * half));
        let (k4t, k4w) = f(&(&th0 + &k3t * h), &(w0 + &k3w * h));
        let sixth = h / S::lit(6.0);
        let two = S::lit(2.0);
        let th1 = th0 + (k1t + &k2t * two + &k3t * two + k4t) * sixth;
        let w1 = w0 + (k1w + &k2w * two + &k3w * two + k4w) * sixth;
        self.step_index += 1;
        let next = SystemState {
            theta: th1 - &self.theta_eq,
            omega: w1,
            rem: DVector::zeros(0),
        };
        if !next.is_finite() {
            return Err(Error::NumericalDivergence { step: self.step_index });
        }
        Ok(next)
    }
}

/// Integrates the reduced nonlinear model through `scenario` for `steps`
/// steps of `dt`, starting from the deviation `x0` about the pre-event
/// equilibrium. Returns `steps + 1` states.
pub fn simulate_nonlinear<S, F>(
    machines: &[MachineData<S>],
    scenario: &FaultScenario<S>,
    x0: &SystemState<S>,
    mut control: F,
    dt: S,
    steps: usize,
) -> Result<Vec<SystemState<S>>>
where
    S: Scalar,
    F: FnMut(usize, &SystemState<S>) -> DVector<S>,
{
    let mut plant = SwingPlant::new(machines.to_vec(), scenario.clone(), dt)?;
    if x0.n_g() != machines.len() {
        return Err(Error::dims("initial state does not match machine count"));
    }
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x0.clone());
    for k in 0..steps {
        let state = out.last().expect("trajectory is non-empty");
        let u = control(k, state);
        let next = plant.step(state, &u)?;
        out.push(next);
    }
    Ok(out)
}
