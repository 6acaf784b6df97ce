//! Subcommand implementations. Each writes its artifacts under `out` and
//! returns a small report for printing.

use std::path::{Path, PathBuf};

use oscdamp::control::GainAction;
use oscdamp::csvio::{fmt_float, fmt_opt, CsvTable};
use oscdamp::drl::{Checkpoint, Mlp};
use oscdamp::env::{run_episode, run_episode_from, DampingEnv, EpisodeSummary, Policy};
use oscdamp::grid::data::ModelFile;
use oscdamp::grid::GridModel;
use oscdamp::modal::{inter_area_mode, participation_factors, select_controlled_generators, Mode};
use oscdamp::seed::{derive, stream};
use oscdamp::training::{log_table, Trainer};
use oscdamp::{Error, Result};
use rayon::prelude::*;

use crate::config::ExperimentConfig;

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const MODES_FILE: &str = "modes.csv";
pub const CALIBRATION_FILE: &str = "calibration.csv";
pub const SUMMARY_FILE: &str = "evaluation_summary.csv";
pub const EPISODES_FILE: &str = "evaluation_episodes.csv";
pub const SIMULATE_FILE: &str = "simulate.csv";

/// Model and environment built from a config.
pub struct Setup {
    pub file: ModelFile,
    pub model: GridModel<f64>,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let file = cfg.model_file()?;
        let model = file.build_model()?;
        Ok(Setup { file, model })
    }

    /// Linear-plant environment with the config's switching threshold.
    pub fn env(&self, cfg: &ExperimentConfig) -> Result<DampingEnv<f64>> {
        let scs = cfg.scs_config(self.model.reference())?;
        let pss = cfg.pss_table(self.model.p())?;
        DampingEnv::new(self.model.clone(), cfg.env.clone(), &pss, scs)
    }

    /// Environment for evaluation runs: evaluation noise and horizon.
    pub fn eval_env(&self, cfg: &ExperimentConfig, threshold: f64) -> Result<DampingEnv<f64>> {
        let mut env = self.env(cfg)?;
        env.set_threshold(threshold)?;
        env.set_noise_std(cfg.evaluation.noise_std)?;
        env.set_episode_length(cfg.evaluation.episode_length);
        Ok(env)
    }
}

fn ensure_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct AnalyzeReport {
    pub modes: Vec<Mode<f64>>,
    pub target: Option<usize>,
    pub selected: Vec<usize>,
}

impl AnalyzeReport {
    pub fn oscillatory_pairs(&self) -> usize {
        self.modes.iter().filter(|m| m.lambda.im > 1e-9).count()
    }
}

/// Modal analysis of the open-loop linear model; writes `modes.csv`.
pub fn analyze(cfg: &ExperimentConfig, out: &Path) -> Result<AnalyzeReport> {
    let setup = Setup::new(cfg)?;
    let model = &setup.model;
    let modes = participation_factors(&model.a)?;
    let ng = model.n_g();
    let mut header: Vec<String> = ["mode", "re", "im", "natural_frequency", "damping_ratio", "oscillation_hz"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=ng).map(|i| format!("participation_g{i}")));
    let mut table = CsvTable::new(header);
    for (k, m) in modes.iter().enumerate() {
        let mut row = vec![
            (k + 1).to_string(),
            fmt_float(m.lambda.re),
            fmt_float(m.lambda.im),
            fmt_float(m.frequency),
            fmt_float(m.damping_ratio),
            fmt_float(m.oscillation_hz()),
        ];
        row.extend(m.generator_participation(ng).into_iter().map(fmt_float));
        table.push(row)?;
    }
    ensure_dir(out)?;
    table.write(&out.join(MODES_FILE))?;
    let target = inter_area_mode(&modes);
    let selected = match target {
        Some(t) => select_controlled_generators(&modes, t, model.p().max(1), ng)?,
        None => Vec::new(),
    };
    Ok(AnalyzeReport { modes, target, selected })
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub episodes: usize,
    pub checkpoint: PathBuf,
}

/// DDPG training; writes the log, periodic and final checkpoints.
///
/// With `resume`, training continues from that checkpoint and the log keeps
/// the episodes recorded in it. On failure the last periodic checkpoint is
/// left in place.
pub fn train(cfg: &ExperimentConfig, out: &Path, resume: Option<&Path>) -> Result<TrainReport> {
    let setup = Setup::new(cfg)?;
    let env = setup.env(cfg)?;
    let mut trainer = match resume {
        Some(path) => Trainer::resume(env, cfg.train.clone(), &Checkpoint::load(path)?)?,
        None => Trainer::new(env, cfg.train.clone(), cfg.seed)?,
    };
    ensure_dir(out)?;
    let write = |t: &Trainer<f64>, name: &str| -> Result<()> {
        t.checkpoint().save(&out.join(name))?;
        log_table(t.log()).write(&out.join(TRAIN_LOG_FILE))
    };
    trainer.train(|t| write(t, &format!("checkpoint_{:05}.json", t.episodes_done())))?;
    write(&trainer, CHECKPOINT_FILE)?;
    Ok(TrainReport {
        episodes: trainer.episodes_done(),
        checkpoint: out.join(CHECKPOINT_FILE),
    })
}

fn load_actor(path: &Path, env: &DampingEnv<f64>) -> Result<Mlp<f64>> {
    let actor: Mlp<f64> = Checkpoint::load(path)?.actor()?;
    if actor.input_dim() != env.observation_dim() || actor.output_dim() != env.action_dim() {
        return Err(Error::Checkpoint(format!(
            "actor maps {} -> {}, environment needs {} -> {}",
            actor.input_dim(),
            actor.output_dim(),
            env.observation_dim(),
            env.action_dim()
        )));
    }
    Ok(actor)
}

#[derive(Clone, Debug)]
pub struct CalibrationReport {
    pub thresholds: Vec<f64>,
    /// Raw `P̄` per threshold and trial.
    pub raw: Vec<Vec<f64>>,
    /// Normalized mean per threshold.
    pub normalized_mean: Vec<f64>,
    pub best: f64,
}

/// Min-max normalization against the smallest and largest mean over the
/// sweep; every value maps to 0 when the means are all equal.
pub fn normalize_sweep(raw: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let means: Vec<f64> = raw.iter().map(|r| r.iter().sum::<f64>() / r.len().max(1) as f64).collect();
    let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let norm = |v: f64| if span > 0.0 { (v - lo) / span } else { 0.0 };
    let trials = raw.iter().map(|r| r.iter().map(|&v| norm(v)).collect()).collect();
    (trials, means.into_iter().map(norm).collect())
}

/// Index of the smallest value; ties go to the earlier index.
pub fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Sweeps the switching threshold; writes `calibration.csv`.
///
/// Every grid point replays the same trials: mode-aligned starts with the
/// phase rotated by `2π k / trials`, noise seeded per trial.
pub fn calibrate(cfg: &ExperimentConfig, out: &Path, checkpoint: &Path) -> Result<CalibrationReport> {
    let setup = Setup::new(cfg)?;
    let probe = setup.env(cfg)?;
    let actor = load_actor(checkpoint, &probe)?;
    let mut order: Vec<usize> = (0..cfg.calibration.thresholds.len()).collect();
    order.sort_by(|&a, &b| cfg.calibration.thresholds[a].total_cmp(&cfg.calibration.thresholds[b]));
    let thresholds: Vec<f64> = order.iter().map(|&i| cfg.calibration.thresholds[i]).collect();
    let trials = cfg.calibration.trials;
    let raw: Vec<Vec<f64>> = thresholds
        .par_iter()
        .map(|&th| -> Result<Vec<f64>> {
            let mut env = setup.eval_env(cfg, th)?;
            (0..trials)
                .map(|k| {
                    let phase = std::f64::consts::TAU * k as f64 / trials as f64;
                    let x0 = env.mode_state(phase);
                    let seed = derive(cfg.seed, stream::CALIBRATION, k as u64);
                    Ok(run_episode_from(&mut env, Policy::Actor(&actor), seed, Some(x0), false)?.0.energy_sum)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let (norm_trials, normalized_mean) = normalize_sweep(&raw);
    let best = thresholds[argmin_first(&normalized_mean)];

    let mut header = vec!["threshold".to_string()];
    header.extend((1..=trials).map(|k| format!("trial_{k}_norm_global")));
    header.push("mean_norm_global".into());
    let mut table = CsvTable::new(header);
    for (i, th) in thresholds.iter().enumerate() {
        let mut row = vec![fmt_float(*th)];
        row.extend(norm_trials[i].iter().map(|&v| fmt_float(v)));
        row.push(fmt_float(normalized_mean[i]));
        table.push(row)?;
    }
    ensure_dir(out)?;
    table.write(&out.join(CALIBRATION_FILE))?;
    Ok(CalibrationReport {
        thresholds,
        raw,
        normalized_mean,
        best,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Controller {
    PssOnly,
    DrlScs,
}

impl Controller {
    pub fn name(self) -> &'static str {
        match self {
            Controller::PssOnly => "pss_only",
            Controller::DrlScs => "drl_scs",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Plant {
    Linear,
    Nonlinear,
}

impl Plant {
    pub fn name(self) -> &'static str {
        match self {
            Plant::Linear => "linear",
            Plant::Nonlinear => "nonlinear",
        }
    }
}

/// One evaluation cell with its per-episode results.
#[derive(Clone, Debug)]
pub struct Cell {
    pub controller: Controller,
    pub plant: Plant,
    pub delay: f64,
    pub episodes: Vec<EpisodeSummary>,
}

impl Cell {
    pub fn mean_energy(&self) -> f64 {
        mean(self.episodes.iter().map(|e| e.energy_sum))
    }

    pub fn mean_settling(&self) -> Option<f64> {
        let s: Vec<f64> = self.episodes.iter().filter_map(|e| e.settling_time).collect();
        (!s.is_empty()).then(|| mean(s.into_iter()))
    }

    pub fn file_stem(&self) -> String {
        format!("trajectory_{}_{}_delay{:.3}", self.controller.name(), self.plant.name(), self.delay)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Seed of evaluation episode `i`; shared by every cell so runs pair up.
pub fn evaluation_seed(master: u64, i: usize) -> u64 {
    derive(master, stream::EVALUATION, i as u64)
}

/// Runs the controller × plant × delay matrix; writes one trajectory CSV
/// per cell (first episode), the summary and the per-episode table.
pub fn evaluate(cfg: &ExperimentConfig, out: &Path, checkpoint: &Path) -> Result<Vec<Cell>> {
    let setup = Setup::new(cfg)?;
    let probe = setup.env(cfg)?;
    let actor = load_actor(checkpoint, &probe)?;
    let scenario = setup.file.scenario_or_steady::<f64>()?;
    let mut keys = Vec::new();
    let plants: &[Plant] = if cfg.evaluation.nonlinear {
        &[Plant::Linear, Plant::Nonlinear]
    } else {
        &[Plant::Linear]
    };
    for &controller in &[Controller::PssOnly, Controller::DrlScs] {
        for &plant in plants {
            for &delay in &cfg.evaluation.delays {
                keys.push((controller, plant, delay));
            }
        }
    }
    let seeds: Vec<u64> = (0..cfg.evaluation.episodes).map(|i| evaluation_seed(cfg.seed, i)).collect();
    let results: Vec<(Cell, Option<CsvTable>)> = keys
        .par_iter()
        .map(|&(controller, plant, delay)| -> Result<(Cell, Option<CsvTable>)> {
            let mut env = setup.eval_env(cfg, cfg.scs.threshold)?;
            env.set_delay(delay)?;
            if plant == Plant::Nonlinear {
                env.use_nonlinear(scenario.clone())?;
            }
            let policy = match controller {
                Controller::PssOnly => Policy::PssOnly,
                Controller::DrlScs => Policy::Actor(&actor),
            };
            let mut episodes = Vec::with_capacity(seeds.len());
            let mut table = None;
            for (i, &seed) in seeds.iter().enumerate() {
                let (summary, traj) = run_episode(&mut env, policy, seed, i == 0)?;
                if let Some(t) = traj {
                    table = Some(t.to_table());
                }
                episodes.push(summary);
            }
            Ok((Cell { controller, plant, delay, episodes }, table))
        })
        .collect::<Result<_>>()?;

    let mut results = results;
    results.sort_by(|a, b| {
        (a.0.controller, a.0.plant)
            .cmp(&(b.0.controller, b.0.plant))
            .then(a.0.delay.total_cmp(&b.0.delay))
    });
    ensure_dir(out)?;
    let mut summary = CsvTable::new([
        "controller",
        "environment",
        "delay",
        "mean_energy",
        "mean_settling_time",
        "settled_episodes",
        "mean_peak_omega",
        "diverged_episodes",
        "episodes",
    ]);
    let mut per_episode = CsvTable::new([
        "controller",
        "environment",
        "delay",
        "episode",
        "seed",
        "energy",
        "settling_time",
        "peak_omega",
        "diverged",
        "scs_on_steps",
    ]);
    for (cell, table) in &results {
        let settled = cell.episodes.iter().filter(|e| e.settling_time.is_some()).count();
        let diverged = cell.episodes.iter().filter(|e| e.diverged).count();
        summary.push(vec![
            cell.controller.name().into(),
            cell.plant.name().into(),
            fmt_float(cell.delay),
            fmt_float(cell.mean_energy()),
            fmt_opt(cell.mean_settling()),
            settled.to_string(),
            fmt_float(mean(cell.episodes.iter().map(|e| e.peak_omega))),
            diverged.to_string(),
            cell.episodes.len().to_string(),
        ])?;
        for (i, e) in cell.episodes.iter().enumerate() {
            per_episode.push(vec![
                cell.controller.name().into(),
                cell.plant.name().into(),
                fmt_float(cell.delay),
                (i + 1).to_string(),
                e.seed.to_string(),
                fmt_float(e.energy_sum),
                fmt_opt(e.settling_time),
                fmt_float(e.peak_omega),
                u8::from(e.diverged).to_string(),
                e.scs_on_steps.to_string(),
            ])?;
        }
        if let Some(t) = table {
            t.write(&out.join(format!("{}.csv", cell.file_stem())))?;
        }
    }
    summary.write(&out.join(SUMMARY_FILE))?;
    per_episode.write(&out.join(EPISODES_FILE))?;
    Ok(results.into_iter().map(|(c, _)| c).collect())
}

/// Raw trajectory under a fixed gain; writes `simulate.csv`.
pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<EpisodeSummary> {
    let setup = Setup::new(cfg)?;
    let sim = &cfg.simulate;
    let mut env = setup.env(cfg)?;
    env.set_noise_std(sim.noise_std)?;
    env.set_episode_length(sim.steps);
    env.set_delay(sim.delay)?;
    if sim.nonlinear {
        env.use_nonlinear(setup.file.scenario_or_steady()?)?;
    }
    let action = if sim.action.is_empty() {
        vec![0.0; env.action_dim()]
    } else {
        sim.action.clone()
    };
    // Validates shape and range before running.
    GainAction::from_normalized(&action, setup.model.p(), setup.model.m(), cfg.env.k_max)?;
    let policy = if sim.pss_only { Policy::PssOnly } else { Policy::Fixed(&action) };
    let (summary, traj) = run_episode(&mut env, policy, derive(cfg.seed, stream::EVALUATION, u64::MAX), true)?;
    ensure_dir(out)?;
    traj.expect("recording requested").to_table().write(&out.join(SIMULATE_FILE))?;
    Ok(summary)
}
