//! Episode roll-outs and evaluation metrics.

use nalgebra::DVector;

use super::{DampingEnv, SimSample};
use crate::drl::{actor_forward, Mlp};
use crate::error::{Error, Result};
use crate::grid::SystemState;
use crate::num::Scalar;

/// Decision rule for a roll-out.
#[derive(Clone, Copy, Debug)]
pub enum Policy<'a, S: Scalar> {
    /// Local stabilizers only; the wide-area path is disabled.
    PssOnly,
    /// Deterministic actor output on the (delayed) observation.
    Actor(&'a Mlp<S>),
    /// The same normalized action at every step.
    Fixed(&'a [S]),
}

impl<S: Scalar> Policy<'_, S> {
    fn action(&self, obs: &DVector<S>, dim: usize) -> Result<Vec<S>> {
        match self {
            Policy::PssOnly => Ok(vec![S::zero(); dim]),
            Policy::Actor(actor) => Ok(actor_forward(actor, obs)?.iter().copied().collect()),
            Policy::Fixed(a) => Ok(a.to_vec()),
        }
    }
}

/// Simulation samples of one episode.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<S: Scalar> {
    pub samples: Vec<SimSample<S>>,
}

/// Metrics of one evaluation episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub steps: usize,
    pub episode_return: f64,
    /// `Σ P` over every simulated state of the episode.
    pub energy_sum: f64,
    /// Time after which `max_i |ω_i|` stays below `1e-3` of its peak.
    pub settling_time: Option<f64>,
    pub peak_omega: f64,
    /// Agent steps whose closed-loop spectrum earned the stability penalty.
    pub penalty_steps: usize,
    pub diverged: bool,
    /// Simulation steps with the wide-area signal switched on.
    pub scs_on_steps: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub episodes: Vec<EpisodeSummary>,
}

impl EvalReport {
    /// Mean of `energy_sum` over episodes; `0` for an empty report.
    pub fn mean_energy(&self) -> f64 {
        mean(self.episodes.iter().map(|e| e.energy_sum))
    }

    pub fn mean_return(&self) -> f64 {
        mean(self.episodes.iter().map(|e| e.episode_return))
    }

    /// Mean settling time over episodes that settled, with the number that did not.
    pub fn mean_settling_time(&self) -> (Option<f64>, usize) {
        let settled: Vec<f64> = self.episodes.iter().filter_map(|e| e.settling_time).collect();
        let missing = self.episodes.len() - settled.len();
        if settled.is_empty() {
            (None, missing)
        } else {
            (Some(mean(settled.into_iter())), missing)
        }
    }

    /// No episode diverged.
    pub fn all_stable(&self) -> bool {
        self.episodes.iter().all(|e| !e.diverged)
    }

    /// Every episode diverged nowhere and settled within its horizon.
    pub fn all_settled(&self) -> bool {
        self.episodes.iter().all(|e| !e.diverged && e.settling_time.is_some())
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// First time after which `max_i |ω_i|` stays below `fraction` of its peak.
///
/// `None` when the last sample is still above the band.
pub fn settling_time<S: Scalar>(samples: &[SimSample<S>], fraction: f64) -> Option<f64> {
    let amp: Vec<f64> = samples.iter().map(|s| s.omega.amax().as_f64()).collect();
    let peak = amp.iter().copied().fold(0.0, f64::max);
    if peak == 0.0 {
        return samples.first().map(|s| s.t.as_f64());
    }
    let band = fraction * peak;
    match amp.iter().rposition(|&a| a >= band) {
        Some(last) if last + 1 < samples.len() => Some(samples[last + 1].t.as_f64()),
        Some(_) => None,
        None => samples.first().map(|s| s.t.as_f64()),
    }
}

/// Fraction of the peak speed deviation that defines settling.
pub const SETTLING_FRACTION: f64 = 1e-3;

/// Runs one episode from `reset(seed)` over the full horizon (an unstable
/// spectrum is penalized but only divergence stops early); the trajectory
/// is returned when `record` is set.
pub fn run_episode<S: Scalar>(
    env: &mut DampingEnv<S>,
    policy: Policy<'_, S>,
    seed: u64,
    record: bool,
) -> Result<(EpisodeSummary, Option<Trajectory<S>>)> {
    run_episode_from(env, policy, seed, None, record)
}

/// As [`run_episode`], starting from `x0` when given (the seed then only
/// drives the process noise).
pub fn run_episode_from<S: Scalar>(
    env: &mut DampingEnv<S>,
    policy: Policy<'_, S>,
    seed: u64,
    x0: Option<SystemState<S>>,
    record: bool,
) -> Result<(EpisodeSummary, Option<Trajectory<S>>)> {
    env.set_wide_area_enabled(!matches!(policy, Policy::PssOnly));
    env.set_stop_on_penalty(false);
    let result = roll_out(env, policy, seed, x0, record);
    env.set_wide_area_enabled(true);
    env.set_stop_on_penalty(true);
    result
}

fn roll_out<S: Scalar>(
    env: &mut DampingEnv<S>,
    policy: Policy<'_, S>,
    seed: u64,
    x0: Option<SystemState<S>>,
    record: bool,
) -> Result<(EpisodeSummary, Option<Trajectory<S>>)> {
    let dim = env.action_dim();
    let mut obs = match x0 {
        Some(x0) => env.reset_to(seed, x0)?,
        None => env.reset(seed)?,
    };
    let mut ret = 0.0;
    let mut steps = 0;
    let mut penalty_steps = 0;
    let mut diverged = false;
    while !env.is_done() {
        let action = policy.action(&obs, dim)?;
        let out = env.step(&action)?;
        ret += out.reward.as_f64();
        steps += 1;
        penalty_steps += usize::from(out.diagnostics.unstable);
        diverged |= out.diagnostics.diverged;
        obs = out.observation;
    }
    if !ret.is_finite() {
        return Err(Error::NumericalDivergence { step: steps });
    }
    let samples = env.history();
    let summary = EpisodeSummary {
        seed,
        steps,
        episode_return: ret,
        energy_sum: samples.iter().map(|s| s.energy.as_f64()).sum(),
        settling_time: settling_time(samples, SETTLING_FRACTION),
        peak_omega: samples.iter().map(|s| s.omega.amax().as_f64()).fold(0.0, f64::max),
        penalty_steps,
        diverged,
        scs_on_steps: samples.iter().filter(|s| s.scs_on).count(),
    };
    let trajectory = record.then(|| Trajectory { samples: samples.to_vec() });
    Ok((summary, trajectory))
}

/// Runs one episode per seed, in order.
pub fn evaluate_policy<S: Scalar>(env: &mut DampingEnv<S>, policy: Policy<'_, S>, seeds: &[u64]) -> Result<EvalReport> {
    let mut episodes = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        episodes.push(run_episode(env, policy, seed, false)?.0);
    }
    Ok(EvalReport { episodes })
}

impl<S: Scalar> Trajectory<S> {
    /// `t, theta_1.., omega_1.., energy, scs_on` with one row per simulated state.
    pub fn to_table(&self) -> crate::csvio::CsvTable {
        use crate::csvio::{fmt_float, CsvTable};
        let ng = self.samples.first().map_or(0, |s| s.theta.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=ng).map(|i| format!("theta_{i}")));
        header.extend((1..=ng).map(|i| format!("omega_{i}")));
        header.push("energy".into());
        header.push("scs_on".into());
        let mut table = CsvTable::new(header);
        for s in &self.samples {
            let mut row = vec![fmt_float(s.t.as_f64())];
            row.extend(s.theta.iter().map(|v| fmt_float(v.as_f64())));
            row.extend(s.omega.iter().map(|v| fmt_float(v.as_f64())));
            row.push(fmt_float(s.energy.as_f64()));
            row.push(u8::from(s.scs_on).to_string());
            table.push(row).expect("row width follows the header");
        }
        table
    }
}
