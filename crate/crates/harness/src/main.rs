use std::path::PathBuf;
use std::process::ExitCode;

use advgrasp::artifacts::{write_checkpoint, write_json, TrainSummary};
use advgrasp::config::{Arm, ExperimentConfig};
use advgrasp::exec::RayonExecutor;
use advgrasp::experiment::{arm_dir, arm_game, replay_samples, required_arms, Experiment};
use advgrasp::report::write_report;
use advgrasp::{HarnessError, Result};
use advgrasp_core::neural::NetworkParams;
use advgrasp_core::rng;
use advgrasp_core::sim::{AdversaryKind, N_ANGLE_BINS};
use advgrasp_core::trainer::train_network;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "advgrasp", about = "Adversarial grasp learning at desk scale")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Collect the random-grasp dataset and train the initial protagonist.
    Collect(Common),
    /// Retrain a protagonist from scratch on an arm's logged episodes.
    TrainProtagonist(Common),
    /// Retrain an adversary from scratch on an arm's logged attempts.
    TrainAdversary(Common),
    /// Run (or resume) the game iterations of the selected arms.
    JointTrain(Common),
    /// Evaluate every checkpoint column on held-out objects, then probe.
    Evaluate(Common),
    /// Every arm, seed, evaluation and the report.
    RunExperiment(Common),
    /// Rebuild tables and plots from a finished run.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults to the one stored in --out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Restrict to one seed (run-experiment: replace the seed list).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "runs/default")]
    out: PathBuf,
    /// baseline, shake or shake+snatch.
    #[arg(long)]
    arm: Option<String>,
    /// Continue a run already present in --out.
    #[arg(long)]
    resume: bool,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let stored = self.out.join("config.toml");
        match &self.config {
            Some(p) => ExperimentConfig::load(p),
            None if stored.exists() => ExperimentConfig::load(&stored),
            None => Ok(ExperimentConfig::default()),
        }
    }

    fn arms(&self, cfg: &ExperimentConfig) -> Result<Vec<Arm>> {
        match &self.arm {
            None => Ok(required_arms(&cfg.arms)),
            Some(name) => {
                let arm = Arm::parse(name).ok_or_else(|| {
                    HarnessError::config("--arm", format!("unknown arm `{name}`"))
                })?;
                Ok(vec![arm])
            }
        }
    }

    fn one_arm(&self) -> Result<Arm> {
        let name = self
            .arm
            .as_deref()
            .ok_or_else(|| HarnessError::config("--arm", "required by this command"))?;
        Arm::parse(name)
            .ok_or_else(|| HarnessError::config("--arm", format!("unknown arm `{name}`")))
    }

    fn seeds(&self, cfg: &ExperimentConfig) -> Result<Vec<u64>> {
        match self.seed {
            None => Ok(cfg.seeds.clone()),
            Some(s) if cfg.seeds.contains(&s) => Ok(vec![s]),
            Some(s) => Err(HarnessError::config(
                "--seed",
                format!("{s} is not among the configured seeds {:?}", cfg.seeds),
            )),
        }
    }

    /// Experiment over --out that may already hold part of this run.
    fn experiment(&self) -> Result<Experiment> {
        let exp = Experiment::new(self.config()?, &self.out);
        exp.prepare(true)?;
        Ok(exp)
    }
}

fn retrain(c: &Common, adversary: bool) -> Result<()> {
    let exp = c.experiment()?;
    let cfg = &exp.cfg;
    let arm = c.one_arm()?;
    let game = arm_game(cfg, arm);
    for seed in c.seeds(cfg)? {
        let last = game.iterations - 1;
        let (protagonist, adversaries) = replay_samples(cfg, &c.out, seed, arm, last)?;
        let (samples, outputs, name) = if adversary {
            let kind = match arm {
                Arm::Baseline => {
                    return Err(HarnessError::config(
                        "--arm",
                        "the baseline has no adversary",
                    ))
                }
                Arm::Shake => AdversaryKind::Shake,
                Arm::ShakeSnatch => AdversaryKind::Snatch,
            };
            (adversaries, kind.n_actions(), "retrained-adversary")
        } else {
            (protagonist, N_ANGLE_BINS, "retrained-protagonist")
        };
        let init = NetworkParams::init(outputs, rng::derive(seed, 0x4E7))?;
        let (net, report) = train_network(
            &init,
            &samples,
            game.optimizer,
            &game.train,
            rng::derive(seed, 0x4E8),
            &RayonExecutor,
        )?;
        let dir = arm_dir(&c.out, seed, arm);
        write_checkpoint(&net, &dir.join(format!("{name}.ckpt")))?;
        write_json(
            &TrainSummary::from(report),
            &dir.join(format!("{name}.json")),
        )?;
        println!(
            "seed {seed} {arm}: {name} on {} samples, {} epochs, balanced accuracy {:.3}",
            report.samples, report.epochs, report.balanced_accuracy
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Collect(c) => {
            let mut exp = c.experiment()?;
            for seed in c.seeds(&exp.cfg.clone())? {
                exp.initial_state(seed)?;
            }
        }
        Command::TrainProtagonist(c) => retrain(&c, false)?,
        Command::TrainAdversary(c) => retrain(&c, true)?,
        Command::JointTrain(c) => {
            let mut exp = c.experiment()?;
            let cfg = exp.cfg.clone();
            for seed in c.seeds(&cfg)? {
                for arm in c.arms(&cfg)? {
                    exp.run_arm(seed, arm)?;
                }
            }
        }
        Command::Evaluate(c) => {
            let mut exp = c.experiment()?;
            let cfg = exp.cfg.clone();
            for seed in c.seeds(&cfg)? {
                for &regime in &cfg.regimes {
                    exp.evaluate_seed(seed, regime)?;
                }
                if cfg.arms.iter().any(|a| *a != Arm::Baseline) {
                    exp.probe_seed(seed)?;
                }
            }
        }
        Command::RunExperiment(c) => {
            let mut cfg = c.config()?;
            if let Some(s) = c.seed {
                cfg.seeds = vec![s];
            }
            if c.arm.is_some() {
                cfg.arms = vec![c.one_arm()?];
            }
            cfg.validate()?;
            Experiment::new(cfg, &c.out).run(c.resume)?;
            print!(
                "{}",
                std::fs::read_to_string(c.out.join("summary.txt")).unwrap_or_default()
            );
        }
        Command::Report(c) => {
            write_report(&c.out)?;
            print!(
                "{}",
                std::fs::read_to_string(c.out.join("summary.txt")).unwrap_or_default()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
