use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use oscdamp::{Error, Result};
use oscdamp_cli::commands;
use oscdamp_cli::config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "oscdamp", version, about = "Wide-area oscillation damping: analysis, training and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Checkpoint to evaluate, calibrate with, or resume training from.
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,

    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for calibration and evaluation (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Open-loop modes, participation and generator selection.
    Analyze,
    /// Train the agent.
    Train,
    /// Sweep the switching threshold with a trained checkpoint.
    Calibrate,
    /// Run the controller/plant/delay evaluation matrix.
    Evaluate,
    /// Simulate one episode under the fixed gain in `[simulate]`.
    Simulate,
}

fn run(cli: &Cli) -> Result<()> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = match &cli.out {
        Some(o) => o.clone(),
        None => cfg.resolve(&cfg.out),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let checkpoint = || {
        cli.checkpoint
            .as_deref()
            .ok_or_else(|| Error::InvalidParameter("--checkpoint is required".into()))
    };
    match cli.command {
        Command::Analyze => {
            let r = commands::analyze(&cfg, &out)?;
            println!("{} modes, {} oscillatory pairs", r.modes.len(), r.oscillatory_pairs());
            match r.target {
                Some(t) => {
                    let m = &r.modes[t];
                    println!(
                        "target mode {}: {:.6} {:+.6}j ({:.4} Hz, damping ratio {:.4})",
                        t + 1,
                        m.lambda.re,
                        m.lambda.im,
                        m.oscillation_hz(),
                        m.damping_ratio
                    );
                    let gens: Vec<String> = r.selected.iter().map(|g| (g + 1).to_string()).collect();
                    println!("selected generators: {{{}}}", gens.join(","));
                }
                None => println!("no oscillatory mode"),
            }
        }
        Command::Train => {
            let r = commands::train(&cfg, &out, cli.checkpoint.as_deref())?;
            println!("trained {} episodes, checkpoint {}", r.episodes, r.checkpoint.display());
        }
        Command::Calibrate => {
            let r = commands::calibrate(&cfg, &out, checkpoint()?)?;
            println!("calibrated threshold {}", r.best);
        }
        Command::Evaluate => {
            let cells = commands::evaluate(&cfg, &out, checkpoint()?)?;
            for c in &cells {
                println!(
                    "{:<8} {:<9} delay {:.3}: mean energy {:.6e}",
                    c.controller.name(),
                    c.plant.name(),
                    c.delay,
                    c.mean_energy()
                );
            }
        }
        Command::Simulate => {
            let s = commands::simulate(&cfg, &out)?;
            println!("simulated {} steps, energy sum {:.6e}", s.steps, s.energy_sum);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(oscdamp_cli::exit_code(&e) as u8)
        }
    }
}
