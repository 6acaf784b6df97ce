//! Episodic damping-control environment around the grid simulators.
//!
//! One agent step holds a feedback gain `K` for `W` simulation steps. Each
//! simulation step runs the local stabilizers, evaluates the energy measure
//! and the switching rule, and advances the plant. The reward scores the
//! closed-loop spectrum, either exactly from `A − B1 K` or estimated from the
//! `W + 1` observations of the window.

pub mod eval;
pub mod reward;

pub use eval::{evaluate_policy, run_episode, run_episode_from, settling_time, EpisodeSummary, EvalReport, Policy, Trajectory};
pub use reward::{eigen_reward, RewardForm};

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{energy, scs_combine, wide_area_output, DelayLine, GainAction, PssBank, PssParams, ScsConfig};
use crate::error::{Error, Result};
use crate::grid::sim::{gaussian_vector, LinearStepper, SwingPlant};
use crate::grid::{exact_eigenvalues, FaultScenario, GridModel, SystemState};
use crate::linalg;
use crate::modal::{self, dmd_estimate_resolvable, SnapshotWindow};
use crate::num::Scalar;

/// Where closed-loop eigenvalues come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenSource {
    #[default]
    Dmd,
    Exact,
}

/// Real part above which an exact closed-loop spectrum counts as unstable.
pub const HURWITZ_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    /// Agent steps per episode.
    pub episode_length: usize,
    /// Simulation steps per agent step; also the estimation window length.
    pub action_repeat: usize,
    pub alpha: f64,
    pub beta: f64,
    pub penalty: f64,
    /// Standard deviation of the process noise on every `ω̇` row (linear plant only).
    pub noise_std: f64,
    pub eigen_source: EigenSource,
    pub reward_form: RewardForm,
    /// Size of the initial deviation: its norm when mode-aligned, the
    /// per-component standard deviation otherwise.
    pub init_scale: f64,
    /// Start along the target mode's eigenvector (with a seeded phase)
    /// instead of a Gaussian draw.
    pub mode_aligned: bool,
    /// Entries of `K` are `k_max` times the normalized action.
    pub k_max: f64,
    /// Any `|ω_i|` above this (rad/s) ends the episode as unstable.
    pub divergence_omega: f64,
    /// Index of the target mode in the canonical open-loop spectrum; the
    /// lowest-frequency oscillatory mode when absent.
    pub target_mode: Option<usize>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            episode_length: 500,
            action_repeat: 40,
            alpha: 1.0,
            beta: 1.0,
            penalty: -300.0,
            noise_std: 0.01,
            eigen_source: EigenSource::Dmd,
            reward_form: RewardForm::Printed,
            init_scale: 0.1,
            mode_aligned: true,
            k_max: 10.0,
            divergence_omega: 10.0,
            target_mode: None,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.action_repeat < 2 {
            return bad("action_repeat must be >= 2");
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return bad("reward weights must be >= 0");
        }
        if !(self.penalty < 0.0) {
            return bad("penalty must be < 0");
        }
        if !(self.noise_std >= 0.0) {
            return bad("noise_std must be >= 0");
        }
        if !(self.init_scale >= 0.0) {
            return bad("init_scale must be >= 0");
        }
        if !(self.k_max > 0.0) {
            return bad("k_max must be > 0");
        }
        if !(self.divergence_omega > 0.0) {
            return bad("divergence_omega must be > 0");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepDiagnostics<S: Scalar> {
    /// Closed-loop spectrum used for the reward (empty after divergence).
    pub spectrum: Vec<Complex<S>>,
    /// Energy measure at the end of the window.
    pub energy: S,
    /// Sum of the energy measure over the window's simulation steps.
    pub energy_sum: S,
    /// Switching flag at the last simulation step of the window.
    pub scs_on: bool,
    /// Largest real part in `spectrum`.
    pub max_re: S,
    pub unstable: bool,
    /// A speed deviation left the divergence bound or became non-finite.
    pub diverged: bool,
    /// Simulation time at the end of the window.
    pub t: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult<S: Scalar> {
    pub observation: DVector<S>,
    pub reward: S,
    /// No further steps are accepted until the next reset.
    pub done: bool,
    /// The episode ended on the stability penalty; no bootstrapping past it.
    pub terminated: bool,
    pub diagnostics: StepDiagnostics<S>,
}

#[derive(Clone, Debug)]
enum Plant<S: Scalar> {
    Linear(LinearStepper<S>),
    Nonlinear(Box<SwingPlant<S>>),
}

/// Per-simulation-step record kept for metrics and optional export.
#[derive(Clone, Debug, PartialEq)]
pub struct SimSample<S: Scalar> {
    pub t: S,
    pub theta: DVector<S>,
    pub omega: DVector<S>,
    pub energy: S,
    pub scs_on: bool,
}

#[derive(Clone, Debug)]
pub struct DampingEnv<S: Scalar> {
    model: GridModel<S>,
    config: EnvConfig,
    scs: ScsConfig<S>,
    plant: Plant<S>,
    open_loop: Vec<Complex<S>>,
    target: usize,
    target_vector: DVector<Complex<S>>,
    pss: PssBank<S>,
    wide_area_enabled: bool,
    stop_on_penalty: bool,
    delay: DelayLine<S>,
    rng: ChaCha8Rng,
    state: SystemState<S>,
    seen: DVector<S>,
    agent_steps: usize,
    sim_steps: usize,
    done: bool,
    history: Vec<SimSample<S>>,
}

impl<S: Scalar> DampingEnv<S> {
    /// Builds a linear-plant environment; every controlled generator gets
    /// its own stabilizer with the corresponding entry of `pss`.
    pub fn new(model: GridModel<S>, config: EnvConfig, pss: &[PssParams<S>], scs: ScsConfig<S>) -> Result<Self> {
        config.validate()?;
        scs.validate()?;
        if scs.reference != model.reference() {
            return Err(Error::InvalidParameter(format!(
                "switching reference {} differs from the model reference {}",
                scs.reference + 1,
                model.reference() + 1
            )));
        }
        if pss.len() != model.p() {
            return Err(Error::dims(format!("{} stabilizer parameter sets for {} controlled generators", pss.len(), model.p())));
        }
        let modes = modal::participation_factors(&model.a)?;
        let open_loop: Vec<Complex<S>> = modes.iter().map(|m| m.lambda).collect();
        let target = match config.target_mode {
            Some(k) if k < modes.len() => k,
            Some(k) => return Err(Error::InvalidParameter(format!("target mode {k} out of range"))),
            None => modal::inter_area_mode(&modes)
                .ok_or_else(|| Error::InvalidModel("open-loop spectrum has no oscillatory mode".into()))?,
        };
        let target_vector = modes[target].right.clone();
        let pss_bank = PssBank::new(pss, model.dt)?;
        let delay = DelayLine::new(S::zero(), model.dt)?;
        let plant = Plant::Linear(LinearStepper::new(&model));
        let state = SystemState::for_model(&model);
        let seen = state.observation(model.reference());
        Ok(DampingEnv {
            config,
            scs,
            plant,
            open_loop,
            target,
            target_vector,
            pss: pss_bank,
            wide_area_enabled: true,
            stop_on_penalty: true,
            delay,
            rng: ChaCha8Rng::seed_from_u64(0),
            state,
            seen,
            agent_steps: 0,
            sim_steps: 0,
            done: true,
            history: Vec::new(),
            model,
        })
    }

    pub fn model(&self) -> &GridModel<S> {
        &self.model
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn scs(&self) -> &ScsConfig<S> {
        &self.scs
    }

    pub fn set_threshold(&mut self, threshold: S) -> Result<()> {
        let mut scs = self.scs.clone();
        scs.threshold = threshold;
        scs.validate()?;
        self.scs = scs;
        Ok(())
    }

    pub fn set_episode_length(&mut self, steps: usize) {
        self.config.episode_length = steps;
    }

    pub fn set_noise_std(&mut self, std: S) -> Result<()> {
        if !(std >= S::zero()) {
            return Err(Error::InvalidParameter("noise_std must be >= 0".into()));
        }
        self.config.noise_std = std.as_f64();
        Ok(())
    }

    /// Delay applied to the wide-area observation path (local stabilizers
    /// stay undelayed).
    pub fn set_delay(&mut self, delay: S) -> Result<()> {
        self.delay = DelayLine::new(delay, self.model.dt)?;
        Ok(())
    }

    /// Drives the nonlinear swing model through `scenario` instead of the
    /// linear model.
    pub fn use_nonlinear(&mut self, scenario: FaultScenario<S>) -> Result<()> {
        if self.model.n_rem() != 0 {
            return Err(Error::InvalidModel("nonlinear plant requires the classical model".into()));
        }
        let plant = SwingPlant::new(self.model.machines.clone(), scenario, self.model.dt)?;
        self.plant = Plant::Nonlinear(Box::new(plant));
        Ok(())
    }

    pub fn use_linear(&mut self) {
        self.plant = Plant::Linear(LinearStepper::new(&self.model));
    }

    pub fn is_nonlinear(&self) -> bool {
        matches!(self.plant, Plant::Nonlinear(_))
    }

    /// Disables the wide-area path entirely (stabilizers only).
    pub fn set_wide_area_enabled(&mut self, enabled: bool) {
        self.wide_area_enabled = enabled;
    }

    /// When cleared, an unstable exact spectrum still earns the penalty but
    /// no longer ends the episode; only divergence does. Evaluation runs
    /// use this to observe the full horizon.
    pub fn set_stop_on_penalty(&mut self, stop: bool) {
        self.stop_on_penalty = stop;
    }

    /// Open-loop spectrum `λ̂` in canonical order.
    pub fn open_loop(&self) -> &[Complex<S>] {
        &self.open_loop
    }

    pub fn target_mode(&self) -> usize {
        self.target
    }

    pub fn observation_dim(&self) -> usize {
        self.model.m()
    }

    pub fn action_dim(&self) -> usize {
        self.model.p() * self.model.m()
    }

    pub fn state(&self) -> &SystemState<S> {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Simulation samples since the last reset, starting with the initial state.
    pub fn history(&self) -> &[SimSample<S>] {
        &self.history
    }

    /// Initial deviation for `seed`.
    pub fn initial_state(&self, seed: u64) -> SystemState<S> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.draw_initial(&mut rng)
    }

    fn draw_initial(&self, rng: &mut ChaCha8Rng) -> SystemState<S> {
        let n = self.model.n();
        if self.config.mode_aligned {
            let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            return self.mode_state(phase);
        }
        let x = gaussian_vector(rng, n, S::lit(self.config.init_scale));
        SystemState::from_vector(&x, self.model.n_g()).expect("state vector has model dimension")
    }

    /// Starts an episode; the same seed reproduces the same episode.
    pub fn reset(&mut self, seed: u64) -> Result<DVector<S>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0 = self.draw_initial(&mut rng);
        self.start(rng, x0)
    }

    /// Starts an episode from `x0`; `seed` drives the process noise.
    pub fn reset_to(&mut self, seed: u64, x0: SystemState<S>) -> Result<DVector<S>> {
        if x0.to_vector().len() != self.model.n() || x0.n_g() != self.model.n_g() {
            return Err(Error::dims("initial state does not match the model"));
        }
        self.start(ChaCha8Rng::seed_from_u64(seed), x0)
    }

    /// `init_scale · Re(e^{jφ} v) / ‖Re(e^{jφ} v)‖` for the target eigenvector `v`.
    pub fn mode_state(&self, phase: f64) -> SystemState<S> {
        let rot = Complex::new(S::lit(phase.cos()), S::lit(phase.sin()));
        let v = self.target_vector.map(|z| (z * rot).re);
        let norm = v.norm();
        let x = if norm > S::zero() {
            v * (S::lit(self.config.init_scale) / norm)
        } else {
            DVector::zeros(self.model.n())
        };
        SystemState::from_vector(&x, self.model.n_g()).expect("state vector has model dimension")
    }

    fn start(&mut self, rng: ChaCha8Rng, x0: SystemState<S>) -> Result<DVector<S>> {
        self.rng = rng;
        self.state = x0;
        if let Plant::Nonlinear(p) = &mut self.plant {
            p.reset();
        }
        self.pss.reset();
        self.delay.reset();
        self.agent_steps = 0;
        self.sim_steps = 0;
        self.done = false;
        self.seen = self.delay.push(self.state.observation(self.model.reference()));
        self.history.clear();
        let e0 = energy(&self.state, &self.scs);
        self.history.push(SimSample {
            t: S::zero(),
            theta: self.state.theta.clone(),
            omega: self.state.omega.clone(),
            energy: e0,
            scs_on: false,
        });
        Ok(self.seen.clone())
    }

    /// Energy measure as seen through the (possibly delayed) observation.
    fn seen_energy(&self) -> S {
        let ng = self.model.n_g();
        let view = SystemState {
            theta: self.seen.rows(0, ng).into_owned(),
            omega: self.seen.rows(ng, ng).into_owned(),
            rem: DVector::zeros(0),
        };
        energy(&view, &self.scs)
    }

    /// One simulation step under gain `k`; returns the switching flag.
    fn sim_step(&mut self, k: &DMatrix<S>) -> Result<bool> {
        let controlled = self.model.controlled();
        let speeds = DVector::from_fn(controlled.len(), |i, _| self.state.omega[controlled[i]]);
        // The stabilizer output opposes speed deviations when injected as power.
        let u_loc = -self.pss.step(&speeds)?;
        let (u, on) = if self.wide_area_enabled {
            let u_wac = wide_area_output(k, &self.seen)?;
            scs_combine(&u_loc, &u_wac, self.seen_energy(), self.scs.threshold)
        } else {
            (u_loc, false)
        };
        let next = match &mut self.plant {
            Plant::Linear(stepper) => {
                let std = S::lit(self.config.noise_std);
                let eta = (std > S::zero()).then(|| gaussian_vector(&mut self.rng, self.model.q(), std));
                let next = stepper.step(&self.state, &u, eta.as_ref());
                if !next.is_finite() {
                    return Err(Error::NumericalDivergence { step: self.sim_steps + 1 });
                }
                next
            }
            Plant::Nonlinear(plant) => plant.step(&self.state, &u)?,
        };
        self.state = next;
        self.sim_steps += 1;
        self.seen = self.delay.push(self.state.observation(self.model.reference()));
        self.history.push(SimSample {
            t: S::from_usize_lossy(self.sim_steps) * self.model.dt,
            theta: self.state.theta.clone(),
            omega: self.state.omega.clone(),
            energy: energy(&self.state, &self.scs),
            scs_on: on,
        });
        Ok(on)
    }

    /// Holds the gain encoded by `action` for one window and scores the
    /// resulting closed-loop spectrum.
    pub fn step(&mut self, action: &[S]) -> Result<StepResult<S>> {
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        let gain = GainAction::from_normalized(action, self.model.p(), self.model.m(), S::lit(self.config.k_max))?;
        let w = self.config.action_repeat;
        let dmd = self.config.eigen_source == EigenSource::Dmd;
        let reference = self.model.reference();
        let mut window = Vec::with_capacity(if dmd { w + 1 } else { 0 });
        if dmd {
            window.push(self.state.observation(reference));
        }
        let limit = S::lit(self.config.divergence_omega);
        let mut energy_sum = S::zero();
        let mut on = false;
        let mut diverged = false;
        for _ in 0..w {
            match self.sim_step(&gain.k) {
                Ok(flag) => on = flag,
                Err(Error::NumericalDivergence { .. }) => {
                    diverged = true;
                    break;
                }
                Err(e) => return Err(e),
            }
            let sample = self.history.last().expect("history holds the step just taken");
            energy_sum += sample.energy;
            if dmd {
                window.push(self.state.observation(reference));
            }
            if !(self.state.max_abs_omega() <= limit) {
                diverged = true;
                break;
            }
        }
        self.agent_steps += 1;
        let t = S::from_usize_lossy(self.sim_steps) * self.model.dt;
        let end_energy = self.history.last().map_or(S::zero(), |s| s.energy);

        let (spectrum, unstable) = if diverged {
            (Vec::new(), true)
        } else {
            let spectrum = if dmd {
                dmd_estimate_resolvable(&SnapshotWindow::from_columns(&window, self.model.dt)?)?
            } else {
                exact_eigenvalues(&self.model, &gain.k)?
            };
            let max_re = spectrum.iter().map(|l| l.re).fold(S::lit(f64::NEG_INFINITY), S::max);
            let unstable = !dmd && max_re > S::lit(HURWITZ_TOL);
            (spectrum, unstable)
        };
        let max_re = spectrum.iter().map(|l| l.re).fold(S::lit(f64::NEG_INFINITY), S::max);
        let reward = if unstable {
            S::lit(self.config.penalty)
        } else {
            eigen_reward(
                &spectrum,
                &self.open_loop,
                S::lit(self.config.alpha),
                S::lit(self.config.beta),
                self.config.reward_form,
            )
            .0
        };
        let done = diverged || (unstable && self.stop_on_penalty) || self.agent_steps >= self.config.episode_length;
        self.done = done;
        Ok(StepResult {
            observation: self.seen.clone(),
            reward,
            done,
            terminated: unstable && (diverged || self.stop_on_penalty),
            diagnostics: StepDiagnostics {
                spectrum,
                energy: end_energy,
                energy_sum,
                scs_on: on,
                max_re,
                unstable,
                diverged,
                t,
            },
        })
    }

    /// Damping ratio of the closed-loop mode nearest the open-loop target
    /// under gain `k` (eigenvalues at the origin are skipped).
    pub fn target_damping(&self, k: &DMatrix<S>) -> Result<S> {
        let closed = exact_eigenvalues(&self.model, k)?;
        let target = self.open_loop[self.target];
        let tiny = S::lit(1e-6);
        let nearest = closed
            .iter()
            .filter(|l| crate::num::cabs(**l) > tiny && l.im >= S::zero())
            .min_by(|a, b| {
                crate::num::cabs(**a - target)
                    .partial_cmp(&crate::num::cabs(**b - target))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .ok_or_else(|| Error::InvalidModel("closed-loop spectrum has no nonzero eigenvalue".into()))?;
        Ok(modal::mode_metrics(*nearest).1)
    }

    /// Open-loop damping ratio of the target mode.
    pub fn open_loop_target_damping(&self) -> S {
        modal::mode_metrics(self.open_loop[self.target]).1
    }
}

/// Helper kept next to the environment: canonical spectrum of a matrix.
pub fn spectrum<S: Scalar>(a: &DMatrix<S>) -> Result<Vec<Complex<S>>> {
    linalg::eigenvalues(a)
}

#[cfg(test)]
mod tests;
