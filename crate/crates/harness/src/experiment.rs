//! Resumable multi-seed, multi-arm experiment runner.
//!
//! Layout under the output directory:
//!
//! ```text
//! config.toml
//! seed-<s>/init/                 shared random-grasp phase
//! seed-<s>/<arm>/iter-<i>/       one directory per completed iteration
//! seed-<s>/eval-<regime>.json    held-out evaluation of every column
//! seed-<s>/probes.json           adversary probe rates
//! ```

use std::path::{Path, PathBuf};

use advgrasp_core::eval::{dislodge_rates, evaluate, probe_grasps, DislodgeRates};
use advgrasp_core::neural::{NetworkParams, TrainingSample};
use advgrasp_core::policy::SelectionMode;
use advgrasp_core::rng;
use advgrasp_core::sim::AdversaryKind;
use advgrasp_core::trainer::{
    make_adversary_targets, make_protagonist_targets_with, EpisodeRecord, GameConfig, GameState,
    StepOutput,
};
use serde::{Deserialize, Serialize};

use crate::artifacts::*;
use crate::config::{Arm, ExperimentConfig, RegimeName};
use crate::dataset::{read_dataset, write_dataset};
use crate::error::{HarnessError, Result};
use crate::exec::RayonExecutor;

const EVAL_STREAM: u64 = 0xE7A1;
const FIXED_PROBE_STREAM: u64 = 0xF1ED;
const FRESH_PROBE_STREAM: u64 = 0xF8E5;

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

pub fn arm_dir(out: &Path, seed: u64, arm: Arm) -> PathBuf {
    seed_dir(out, seed).join(arm.dir())
}

pub fn iter_dir(arm_dir: &Path, i: usize) -> PathBuf {
    arm_dir.join(format!("iter-{i}"))
}

pub fn init_dir(out: &Path, seed: u64) -> PathBuf {
    seed_dir(out, seed).join("init")
}

pub fn eval_path(out: &Path, seed: u64, regime: RegimeName) -> PathBuf {
    seed_dir(out, seed).join(format!("eval-{}.json", regime.name()))
}

pub fn probes_path(out: &Path, seed: u64) -> PathBuf {
    seed_dir(out, seed).join("probes.json")
}

/// Arms that must run for `arms`: the snatch phase continues the shake arm.
pub fn required_arms(arms: &[Arm]) -> Vec<Arm> {
    let mut need: Vec<Arm> = arms.to_vec();
    if need.contains(&Arm::ShakeSnatch) {
        need.push(Arm::Shake);
    }
    need.sort();
    need.dedup();
    need
}

/// One evaluated table column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalColumn {
    pub label: String,
    pub arm: String,
    pub iteration: usize,
    pub successes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalObject {
    pub seed: u64,
    pub difficulty: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTable {
    pub regime: String,
    pub tries: usize,
    pub objects: Vec<EvalObject>,
    pub columns: Vec<EvalColumn>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRates {
    pub grasps: usize,
    pub trained: f64,
    pub random: f64,
    pub best_response: f64,
}

impl From<DislodgeRates> for ProbeRates {
    fn from(r: DislodgeRates) -> Self {
        ProbeRates {
            grasps: r.grasps,
            trained: r.trained,
            random: r.random,
            best_response: r.best_response,
        }
    }
}

/// Shake adversary strength on a fixed set of random successful grasps
/// (`adversary[i]` uses the adversary after iteration `i`), and the
/// vulnerability of each shake-arm protagonist on its own fresh greedy
/// grasps (`protagonist[i]`, judged by the final shake adversary).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probes {
    pub adversary: Vec<ProbeRates>,
    pub protagonist: Vec<ProbeRates>,
}

pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
    exec: RayonExecutor,
    quiet: bool,
    /// Aborts after this many newly computed training steps (tests use it
    /// to simulate an interrupted run).
    step_budget: Option<usize>,
    steps_done: usize,
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig, out: impl Into<PathBuf>) -> Self {
        Experiment {
            cfg,
            out: out.into(),
            exec: RayonExecutor,
            quiet: false,
            step_budget: None,
            steps_done: 0,
        }
    }

    pub fn quiet(mut self) -> Self {
        self.quiet = true;
        self
    }

    pub fn interrupt_after(mut self, steps: usize) -> Self {
        self.step_budget = Some(steps);
        self
    }

    fn log(&self, msg: &str) {
        if !self.quiet {
            eprintln!("[{}] {msg}", self.cfg.name);
        }
    }

    fn tick(&mut self) -> Result<()> {
        self.steps_done += 1;
        match self.step_budget {
            Some(b) if self.steps_done > b => Err(HarnessError::Interrupted {
                steps: self.steps_done - 1,
            }),
            _ => Ok(()),
        }
    }

    /// Claims the output directory. A fresh run refuses a directory that
    /// already holds one; a resumed run requires the same configuration.
    pub fn prepare(&self, resume: bool) -> Result<()> {
        create_dir(&self.out)?;
        let path = self.out.join("config.toml");
        if path.exists() {
            if !resume {
                return Err(HarnessError::config(
                    "--out",
                    format!("{} already holds a run; pass --resume", self.out.display()),
                ));
            }
            let stored = ExperimentConfig::load(&path)?;
            if stored != self.cfg {
                return Err(HarnessError::config(
                    "--config",
                    "differs from the configuration of the run being resumed",
                ));
            }
            return Ok(());
        }
        std::fs::write(&path, self.cfg.to_toml()).map_err(|e| HarnessError::io(&path, e))
    }

    /// Runs every seed and arm, then evaluation, probes and the report.
    pub fn run(&mut self, resume: bool) -> Result<()> {
        self.prepare(resume)?;
        let seeds = self.cfg.seeds.clone();
        for &seed in &seeds {
            for arm in required_arms(&self.cfg.arms) {
                self.run_arm(seed, arm)?;
            }
        }
        for &seed in &seeds {
            for regime in self.cfg.regimes.clone() {
                self.evaluate_seed(seed, regime)?;
            }
            if self.cfg.arms.contains(&Arm::Shake) || self.cfg.arms.contains(&Arm::ShakeSnatch) {
                self.probe_seed(seed)?;
            }
        }
        crate::report::write_report(&self.out)?;
        self.log("done");
        Ok(())
    }

    /// The shared initial phase of `seed`, computed or loaded.
    pub fn initial_state(&mut self, seed: u64) -> Result<GameState> {
        let dir = init_dir(&self.out, seed);
        if dir.exists() {
            return load_init(&dir, seed);
        }
        self.tick()?;
        self.log(&format!("seed {seed}: initial random grasps"));
        let game = self.cfg.game_config();
        let (state, step) = GameState::initialize(&self.cfg.env(), &game, None, seed, &self.exec)?;
        create_dir(&seed_dir(&self.out, seed))?;
        write_atomic_dir(&dir, |d| save_step(d, &state, &step, &state.records))?;
        Ok(state)
    }

    /// Completes `arm` for `seed` (resuming from existing iterations) and
    /// returns its final state.
    pub fn run_arm(&mut self, seed: u64, arm: Arm) -> Result<GameState> {
        let (mut state, game) = match arm {
            Arm::Baseline => (self.initial_state(seed)?, self.cfg.baseline_game_config()),
            Arm::Shake => {
                let mut s = self.initial_state(seed)?;
                s.kind = Some(AdversaryKind::Shake);
                s.first_kind = Some(AdversaryKind::Shake);
                (s, self.cfg.game_config())
            }
            Arm::ShakeSnatch => {
                let mut s = self.run_arm(seed, Arm::Shake)?;
                s.start_phase(AdversaryKind::Snatch);
                (s, self.cfg.snatch_game_config())
            }
        };
        let dir = arm_dir(&self.out, seed, arm);
        create_dir(&dir)?;
        for i in 0..game.iterations {
            let it = iter_dir(&dir, i);
            if it.exists() {
                load_step(&it, &mut state)?;
                continue;
            }
            self.tick()?;
            self.log(&format!("seed {seed}: {arm} iteration {i}"));
            let before = state.records.len();
            let step = state.run_iteration(&self.cfg.env(), &game, &self.exec)?;
            write_atomic_dir(&it, |d| {
                save_step(d, &state, &step, &state.records[before..])
            })?;
        }
        Ok(state)
    }

    /// Protagonist checkpoints that make up the table columns of `seed`.
    pub fn columns(&self, seed: u64) -> Vec<(String, Arm, usize, PathBuf)> {
        let mut cols = Vec::new();
        for arm in [Arm::Baseline, Arm::Shake, Arm::ShakeSnatch] {
            if !self.cfg.arms.contains(&arm) {
                continue;
            }
            let dir = arm_dir(&self.out, seed, arm);
            match arm {
                Arm::Baseline => {
                    let last = self.cfg.baseline_game_config().iterations - 1;
                    cols.push((
                        "baseline".to_string(),
                        arm,
                        last,
                        iter_dir(&dir, last).join(PROTAGONIST),
                    ));
                }
                Arm::Shake | Arm::ShakeSnatch => {
                    let (n, tag) = if arm == Arm::Shake {
                        (self.cfg.game.iterations, "shake")
                    } else {
                        (self.cfg.snatch.iterations, "snatch")
                    };
                    for i in 0..n {
                        cols.push((
                            format!("{tag}-{i}"),
                            arm,
                            i,
                            iter_dir(&dir, i).join(PROTAGONIST),
                        ));
                    }
                }
            }
        }
        cols
    }

    pub fn evaluate_seed(&mut self, seed: u64, regime: RegimeName) -> Result<EvalTable> {
        let path = eval_path(&self.out, seed, regime);
        if path.exists() {
            return read_json(&path);
        }
        self.tick()?;
        self.log(&format!("seed {seed}: {} regime evaluation", regime.name()));
        let objects = self.cfg.objects.held_out();
        let reg = self.cfg.regime(regime);
        let eval_seed = rng::derive(seed, EVAL_STREAM);
        let mut columns = Vec::new();
        for (label, arm, iteration, ckpt) in self.columns(seed) {
            let net = read_checkpoint(&ckpt)?;
            let results = evaluate(&net, &objects, &reg, self.cfg.tries, eval_seed, &self.exec)?;
            columns.push(EvalColumn {
                label,
                arm: arm.name().to_string(),
                iteration,
                successes: results.iter().map(|r| r.successes).collect(),
            });
        }
        let table = EvalTable {
            regime: regime.name().to_string(),
            tries: self.cfg.tries,
            objects: objects
                .iter()
                .map(|o| EvalObject {
                    seed: o.seed,
                    difficulty: o.difficulty.name().to_string(),
                })
                .collect(),
            columns,
        };
        write_json(&table, &path)?;
        Ok(table)
    }

    pub fn probe_seed(&mut self, seed: u64) -> Result<Probes> {
        let path = probes_path(&self.out, seed);
        if path.exists() {
            return read_json(&path);
        }
        self.tick()?;
        self.log(&format!("seed {seed}: adversary probes"));
        let env = self.cfg.env();
        let n = self.cfg.eval.probe_grasps;
        let kind = AdversaryKind::Shake;
        let dir = arm_dir(&self.out, seed, Arm::Shake);
        let iters = self.cfg.game.iterations;
        let adversaries: Vec<NetworkParams> = (0..iters)
            .map(|i| read_checkpoint(&iter_dir(&dir, i).join(ADVERSARY)))
            .collect::<Result<_>>()?;
        let fixed = probe_grasps(
            &env,
            None,
            SelectionMode::UniformRandom,
            n,
            n * 500,
            rng::derive(seed, FIXED_PROBE_STREAM),
        )?;
        let adversary = adversaries
            .iter()
            .map(|a| dislodge_rates(&fixed, Some(a), kind, &env.sim).map(ProbeRates::from))
            .collect::<advgrasp_core::Result<Vec<_>>>()?;
        let judge = adversaries.last();
        let mut protagonist = Vec::new();
        for i in 0..iters {
            let net = read_checkpoint(&iter_dir(&dir, i).join(PROTAGONIST))?;
            let fresh = probe_grasps(
                &env,
                Some(&net),
                SelectionMode::Greedy,
                n,
                n * 50,
                rng::derive(seed, FRESH_PROBE_STREAM),
            )?;
            protagonist.push(dislodge_rates(&fresh, judge, kind, &env.sim)?.into());
        }
        let probes = Probes {
            adversary,
            protagonist,
        };
        write_json(&probes, &path)?;
        Ok(probes)
    }
}

fn save_step(
    dir: &Path,
    state: &GameState,
    step: &StepOutput,
    new: &[EpisodeRecord],
) -> Result<()> {
    write_dataset(new, &dir.join(RECORDS))?;
    write_checkpoint(&state.protagonist, &dir.join(PROTAGONIST))?;
    if let Some(a) = &state.adversary {
        write_checkpoint(a, &dir.join(ADVERSARY))?;
    }
    write_json(
        &MetricsRecord::from_metrics(&step.metrics),
        &dir.join(METRICS),
    )?;
    write_json(
        &StepTargets {
            protagonist: step.protagonist_targets.clone(),
            adversary: step.adversary_targets.clone(),
        },
        &dir.join(TARGETS),
    )
}

fn load_init(dir: &Path, seed: u64) -> Result<GameState> {
    let records = read_dataset(&dir.join(RECORDS))?;
    let protagonist = read_checkpoint(&dir.join(PROTAGONIST))?;
    let metrics_path = dir.join(METRICS);
    let metrics = read_json::<MetricsRecord>(&metrics_path)?.to_metrics(&metrics_path)?;
    Ok(GameState {
        seed,
        kind: None,
        phase_iteration: 0,
        protagonist,
        adversary: None,
        retired: Vec::new(),
        first_kind: None,
        records,
        metrics: vec![metrics],
    })
}

/// Replays a stored iteration onto `state`, as if it had just run.
fn load_step(dir: &Path, state: &mut GameState) -> Result<()> {
    let records = read_dataset(&dir.join(RECORDS))?;
    state.records.extend(records);
    state.protagonist = read_checkpoint(&dir.join(PROTAGONIST))?;
    let adversary = dir.join(ADVERSARY);
    if adversary.exists() {
        state.adversary = Some(read_checkpoint(&adversary)?);
    }
    let metrics_path = dir.join(METRICS);
    let metrics = read_json::<MetricsRecord>(&metrics_path)?.to_metrics(&metrics_path)?;
    if metrics.grasp_dataset_size != state.records.len() {
        return Err(HarnessError::artifact(
            dir,
            "dataset size disagrees with the recorded metrics",
        ));
    }
    state.metrics.push(metrics);
    state.phase_iteration += 1;
    Ok(())
}

/// Every record an arm trained on, in training order.
pub fn arm_records(out: &Path, seed: u64, arm: Arm, upto: usize) -> Result<Vec<EpisodeRecord>> {
    let mut records = read_dataset(&init_dir(out, seed).join(RECORDS))?;
    if arm == Arm::ShakeSnatch {
        let shake = arm_dir(out, seed, Arm::Shake);
        let mut i = 0;
        while iter_dir(&shake, i).exists() {
            records.extend(read_dataset(&iter_dir(&shake, i).join(RECORDS))?);
            i += 1;
        }
    }
    let dir = arm_dir(out, seed, arm);
    for i in 0..=upto {
        records.extend(read_dataset(&iter_dir(&dir, i).join(RECORDS))?);
    }
    Ok(records)
}

/// Game configuration an arm ran with.
pub fn arm_game(cfg: &ExperimentConfig, arm: Arm) -> GameConfig {
    match arm {
        Arm::Baseline => cfg.baseline_game_config(),
        Arm::Shake => cfg.game_config(),
        Arm::ShakeSnatch => cfg.snatch_game_config(),
    }
}

/// Training samples of step `i` of `arm` rebuilt from the logged episodes
/// and the stored adversary checkpoints.
pub fn replay_samples(
    cfg: &ExperimentConfig,
    out: &Path,
    seed: u64,
    arm: Arm,
    i: usize,
) -> Result<(Vec<TrainingSample>, Vec<TrainingSample>)> {
    let records = arm_records(out, seed, arm, i)?;
    let dir = iter_dir(&arm_dir(out, seed, arm), i);
    let adversary_path = dir.join(ADVERSARY);
    let adversary = if adversary_path.exists() {
        Some(read_checkpoint(&adversary_path)?)
    } else {
        None
    };
    let mut retired = Vec::new();
    let (kind, first_kind) = match arm {
        Arm::Baseline => (None, None),
        Arm::Shake => (Some(AdversaryKind::Shake), Some(AdversaryKind::Shake)),
        Arm::ShakeSnatch => {
            let last = cfg.game.iterations - 1;
            let shake = iter_dir(&arm_dir(out, seed, Arm::Shake), last).join(ADVERSARY);
            retired.push((AdversaryKind::Shake, read_checkpoint(&shake)?));
            (Some(AdversaryKind::Snatch), Some(AdversaryKind::Shake))
        }
    };
    let labeller = GameState {
        seed,
        kind,
        phase_iteration: i,
        protagonist: read_checkpoint(&dir.join(PROTAGONIST))?,
        adversary,
        retired,
        first_kind,
        records: Vec::new(),
        metrics: Vec::new(),
    };
    let game = arm_game(cfg, arm);
    let protagonist = make_protagonist_targets_with(
        &records,
        |r| labeller.labelling_adversary(r),
        game.alpha,
        game.label_mode,
        &RayonExecutor,
    )?;
    let adversary = match kind {
        Some(k) => make_adversary_targets(&records, k),
        None => Vec::new(),
    };
    Ok((protagonist, adversary))
}

/// Targets of step `i` recomputed by [`replay_samples`], next to the ones
/// the trainer emitted.
pub fn replay_step(
    cfg: &ExperimentConfig,
    out: &Path,
    seed: u64,
    arm: Arm,
    i: usize,
) -> Result<(StepTargets, StepTargets)> {
    let (p, a) = replay_samples(cfg, out, seed, arm, i)?;
    let dir = iter_dir(&arm_dir(out, seed, arm), i);
    let stored: StepTargets = read_json(&dir.join(TARGETS))?;
    let values = |v: &[TrainingSample]| v.iter().map(|s| s.target_value).collect();
    Ok((
        StepTargets {
            protagonist: values(&p),
            adversary: values(&a),
        },
        stored,
    ))
}
