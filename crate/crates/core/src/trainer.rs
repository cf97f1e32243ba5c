//! The adversarial game: episodes, label construction, network training and
//! the iterated collect → train-adversary → train-protagonist loop.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::math::sigmoid;
use crate::neural::{rmsprop_step, Gradients, NetworkParams, OptHyper, OptState, TrainingSample};
use crate::policy::{
    probability_matrix, sample_candidates, select_adversary, select_grasp, select_index,
    SelectionMode,
};
use crate::rng;
use crate::scene::{
    extract_rotated_patch, generate_object, render_scene, Difficulty, Image, ObjectShape, Patch,
    Scene,
};
use crate::sim::{
    apply_adversary, grasp_margin, lift_holds, AdversaryAction, AdversaryKind, GraspAction,
    SimConfig, N_ANGLE_BINS,
};

/// A reproducible object: generated from its seed and difficulty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ObjectSpec {
    pub seed: u64,
    pub difficulty: Difficulty,
}

impl ObjectSpec {
    pub fn build(&self) -> ObjectShape {
        generate_object(self.seed, self.difficulty)
    }

    pub fn scene(&self, scene_seed: u64) -> Scene {
        Scene::random(self.build(), scene_seed)
    }
}

/// What episodes are played on.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub sim: SimConfig,
    pub objects: Vec<ObjectSpec>,
    /// Candidate centres scored per grasp decision.
    pub n_candidates: usize,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        if self.objects.is_empty() {
            return Err(Error::invalid("objects", "training object set is empty"));
        }
        if self.n_candidates == 0 {
            return Err(Error::invalid("n_candidates", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdversaryAttempt {
    pub action: AdversaryAction,
    pub success: bool,
}

/// One grasp attempt and, if the grasp held, one adversary attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub object: ObjectSpec,
    pub scene_seed: u64,
    pub grasp: GraspAction,
    /// Unrotated patch at the grasp centre.
    pub grasp_patch: Patch,
    /// Grasp-aligned patch, the adversary's view; present iff the grasp held.
    pub rotated_patch: Option<Patch>,
    pub grasp_success: bool,
    pub margin: f64,
    pub adversary: Option<AdversaryAttempt>,
    pub iteration: u32,
    pub config_id: u64,
}

impl EpisodeRecord {
    pub fn validate(&self) -> Result<()> {
        if self.rotated_patch.is_some() != self.grasp_success {
            return Err(Error::Contract(
                "rotated patch must be present exactly for successful grasps",
            ));
        }
        if self.adversary.is_some() && !self.grasp_success {
            return Err(Error::Contract("adversary attempt on a failed grasp"));
        }
        Ok(())
    }
}

/// Bookkeeping copied into every record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeTag {
    pub object: ObjectSpec,
    pub iteration: u32,
    pub config_id: u64,
}

/// How the adversary picks its action once a grasp has succeeded.
#[derive(Debug, Clone, Copy)]
pub enum AdversaryPolicy<'a> {
    Fixed(AdversaryAction),
    Random(AdversaryKind),
    Network {
        net: &'a NetworkParams,
        kind: AdversaryKind,
        mode: SelectionMode,
    },
}

impl AdversaryPolicy<'_> {
    pub fn kind(&self) -> AdversaryKind {
        match *self {
            AdversaryPolicy::Fixed(a) => a.kind,
            AdversaryPolicy::Random(kind) | AdversaryPolicy::Network { kind, .. } => kind,
        }
    }

    fn choose(&self, rotated: &Patch, seed: u64) -> Result<AdversaryAction> {
        match *self {
            AdversaryPolicy::Fixed(a) => Ok(a),
            AdversaryPolicy::Random(kind) => {
                let flat = vec![0.5; kind.n_actions()];
                AdversaryAction::new(
                    kind,
                    select_index(&flat, SelectionMode::UniformRandom, seed)?,
                )
            }
            AdversaryPolicy::Network { net, kind, mode } => {
                select_adversary(net, rotated, kind, mode, seed)
            }
        }
    }
}

/// Executes a grasp on a scene, then the adversary if the grasp held.
///
/// A grasp succeeds when the jaws close stably and the hold carries the
/// object's weight during the lift.
pub fn run_episode(
    scene: &Scene,
    grasp: GraspAction,
    adversary: Option<&AdversaryPolicy>,
    config: &SimConfig,
    seed: u64,
    tag: EpisodeTag,
) -> Result<EpisodeRecord> {
    let image = render_scene(scene);
    run_episode_on(scene, &image, grasp, adversary, config, seed, tag)
}

/// [`run_episode`] with the scene already rendered.
pub fn run_episode_on(
    scene: &Scene,
    image: &Image,
    grasp: GraspAction,
    adversary: Option<&AdversaryPolicy>,
    config: &SimConfig,
    seed: u64,
    tag: EpisodeTag,
) -> Result<EpisodeRecord> {
    let grasp_patch = extract_rotated_patch(image, grasp.center(), 0.0);
    let outcome = scene
        .object
        .as_ref()
        .map(|object| (object, grasp_margin(object, &scene.pose, &grasp, config)));
    let mut record = EpisodeRecord {
        object: tag.object,
        scene_seed: scene.seed,
        grasp,
        grasp_patch,
        rotated_patch: None,
        grasp_success: false,
        margin: 0.0,
        adversary: None,
        iteration: tag.iteration,
        config_id: tag.config_id,
    };
    let Some((object, outcome)) = outcome.filter(|(object, o)| lift_holds(o, object, config))
    else {
        return Ok(record);
    };
    let rotated = extract_rotated_patch(image, grasp.center(), grasp.angle());
    record.grasp_success = true;
    record.margin = outcome.margin;
    if let Some(policy) = adversary {
        let action = policy.choose(&rotated, seed)?;
        let success = apply_adversary(&outcome, &grasp, object, &scene.pose, config, action)?;
        record.adversary = Some(AdversaryAttempt { action, success });
    }
    record.rotated_patch = Some(rotated);
    Ok(record)
}

/// Who grasps, how, and who perturbs during a collection phase.
#[derive(Debug, Clone, Copy)]
pub struct CollectPlan<'a> {
    /// `None` picks uniformly among candidates and angles.
    pub protagonist: Option<&'a NetworkParams>,
    pub grasp_mode: SelectionMode,
    pub adversary: Option<AdversaryPolicy<'a>>,
    pub iteration: u32,
    pub config_id: u64,
}

/// Per-episode seeds, all derived from the phase seed and episode index.
struct EpisodeSeeds {
    object: u64,
    scene: u64,
    candidates: u64,
    grasp: u64,
    adversary: u64,
}

impl EpisodeSeeds {
    fn new(phase_seed: u64, episode: usize) -> Self {
        let s = rng::derive(phase_seed, episode as u64);
        EpisodeSeeds {
            object: rng::derive(s, 1),
            scene: rng::derive(s, 2),
            candidates: rng::derive(s, 3),
            grasp: rng::derive(s, 4),
            adversary: rng::derive(s, 5),
        }
    }
}

pub fn collect<E: Executor>(
    env: &EnvConfig,
    plan: &CollectPlan,
    n: usize,
    seed: u64,
    exec: &E,
) -> Result<Vec<EpisodeRecord>> {
    env.validate()?;
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    exec.map_range(n, |e| {
        let seeds = EpisodeSeeds::new(seed, e);
        let object = env.objects[rng::seeded(seeds.object).gen_range(0..env.objects.len())];
        let scene = object.scene(seeds.scene);
        let image = render_scene(&scene);
        let grasp = match plan.protagonist {
            None => {
                let c = sample_candidates(&image, 1, seeds.candidates)?[0];
                let bin = rng::seeded(seeds.grasp).gen_range(0..N_ANGLE_BINS);
                GraspAction::new(c.x, c.y, bin as u8)?
            }
            Some(net) => {
                let candidates = sample_candidates(&image, env.n_candidates, seeds.candidates)?;
                let matrix = probability_matrix(net, &image, &candidates, &Sequential)?;
                select_grasp(&matrix, plan.grasp_mode, seeds.grasp)?
            }
        };
        let tag = EpisodeTag {
            object,
            iteration: plan.iteration,
            config_id: plan.config_id,
        };
        run_episode_on(
            &scene,
            &image,
            grasp,
            plan.adversary.as_ref(),
            &env.sim,
            seeds.adversary,
            tag,
        )
    })
    .into_iter()
    .collect()
}

/// Uniformly random grasps with no adversary in play.
pub fn collect_random_grasps<E: Executor>(
    env: &EnvConfig,
    n: usize,
    seed: u64,
    exec: &E,
) -> Result<Vec<EpisodeRecord>> {
    let plan = CollectPlan {
        protagonist: None,
        grasp_mode: SelectionMode::UniformRandom,
        adversary: None,
        iteration: 0,
        config_id: 0,
    };
    collect(env, &plan, n, seed, exec)
}

/// Grasps chosen by the protagonist; successful grasps are handed to the
/// adversary if there is one.
#[allow(clippy::too_many_arguments)]
pub fn collect_with_adversary<E: Executor>(
    env: &EnvConfig,
    protagonist: &NetworkParams,
    adversary: Option<AdversaryPolicy>,
    grasp_mode: SelectionMode,
    n: usize,
    iteration: u32,
    seed: u64,
    exec: &E,
) -> Result<Vec<EpisodeRecord>> {
    let plan = CollectPlan {
        protagonist: Some(protagonist),
        grasp_mode,
        adversary,
        iteration,
        config_id: 0,
    };
    collect(env, &plan, n, seed, exec)
}

/// How a successful grasp's protagonist label is discounted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelMode {
    /// `1 − α·max(adversary outputs)`: the adversary's belief.
    #[default]
    Belief,
    /// `1 − α` if the realised adversary attempt dislodged the object, else 1.
    Outcome,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::invalid("alpha", "must lie in [0, 1]"))
    }
}

/// Protagonist label for one record. `adversary` is the network whose belief
/// discounts successful grasps; without one a success counts fully.
pub fn protagonist_target(
    record: &EpisodeRecord,
    adversary: Option<&NetworkParams>,
    alpha: f64,
    mode: LabelMode,
) -> Result<f64> {
    check_alpha(alpha)?;
    if !record.grasp_success {
        return Ok(0.0);
    }
    if mode == LabelMode::Outcome {
        if let Some(a) = record.adversary {
            return Ok(if a.success { 1.0 - alpha } else { 1.0 });
        }
    }
    let Some(net) = adversary else {
        return Ok(1.0);
    };
    let rotated = record
        .rotated_patch
        .as_ref()
        .ok_or(Error::Contract("successful record without rotated patch"))?;
    let belief = net
        .logits(&rotated.pixels)
        .into_iter()
        .map(sigmoid)
        .fold(0.0f64, f64::max);
    Ok(1.0 - alpha * belief)
}

/// Protagonist samples for every record, all discounted by one adversary.
pub fn make_protagonist_targets(
    records: &[EpisodeRecord],
    adversary: Option<&NetworkParams>,
    alpha: f64,
) -> Result<Vec<TrainingSample>> {
    make_protagonist_targets_with(
        records,
        |_| adversary,
        alpha,
        LabelMode::Belief,
        &Sequential,
    )
}

/// Protagonist samples where each record picks its discounting adversary.
pub fn make_protagonist_targets_with<'n, F, E>(
    records: &[EpisodeRecord],
    adversary_for: F,
    alpha: f64,
    mode: LabelMode,
    exec: &E,
) -> Result<Vec<TrainingSample>>
where
    F: Fn(&EpisodeRecord) -> Option<&'n NetworkParams> + Sync + Send,
    E: Executor,
{
    check_alpha(alpha)?;
    exec.map_range(records.len(), |i| {
        let r = &records[i];
        Ok(TrainingSample {
            patch: r.grasp_patch.clone(),
            target_index: r.grasp.theta_bin as usize,
            target_value: protagonist_target(r, adversary_for(r), alpha, mode)?,
        })
    })
    .into_iter()
    .collect()
}

/// Adversary samples from every record that carries an attempt of `kind`.
pub fn make_adversary_targets(
    records: &[EpisodeRecord],
    kind: AdversaryKind,
) -> Vec<TrainingSample> {
    records
        .iter()
        .filter_map(|r| {
            let a = r.adversary.filter(|a| a.action.kind == kind)?;
            Some(TrainingSample {
                patch: r.rotated_patch.clone()?,
                target_index: a.action.index as usize,
                target_value: if a.success { 1.0 } else { 0.0 },
            })
        })
        .collect()
}

/// Training stop rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStop {
    pub max_epochs: usize,
    pub min_epochs: usize,
    /// Balanced train accuracy at which training stops.
    pub accuracy_threshold: f64,
}

impl Default for TrainStop {
    fn default() -> Self {
        TrainStop {
            max_epochs: 50,
            min_epochs: 1,
            accuracy_threshold: 0.75,
        }
    }
}

impl TrainStop {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.min_epochs > self.max_epochs {
            return Err(Error::invalid(
                "max_epochs",
                "need 1 ≤ min_epochs ≤ max_epochs",
            ));
        }
        if !(0.0..=1.0).contains(&self.accuracy_threshold) {
            return Err(Error::invalid("accuracy_threshold", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainReport {
    pub samples: usize,
    pub epochs: usize,
    pub loss: f64,
    /// Fraction of samples whose prediction falls on the same side of 0.5
    /// as the target.
    pub accuracy: f64,
    /// Mean of the per-class accuracies of the binarised targets.
    pub balanced_accuracy: f64,
}

/// Binarised hit counts: `[positives, positive hits, negatives, negative hits]`.
#[derive(Debug, Clone, Copy, Default)]
struct Tally([usize; 4]);

impl Tally {
    fn add(&mut self, prob: f64, target: f64) {
        let truth = target >= 0.5;
        let hit = (prob >= 0.5) == truth;
        let base = if truth { 0 } else { 2 };
        self.0[base] += 1;
        self.0[base + 1] += hit as usize;
    }

    fn accuracy(&self) -> f64 {
        let [p, ph, n, nh] = self.0;
        (ph + nh) as f64 / (p + n).max(1) as f64
    }

    fn balanced(&self) -> f64 {
        let [p, ph, n, nh] = self.0;
        match (p, n) {
            (0, 0) => 0.0,
            (0, _) => nh as f64 / n as f64,
            (_, 0) => ph as f64 / p as f64,
            _ => 0.5 * (ph as f64 / p as f64 + nh as f64 / n as f64),
        }
    }
}

/// Samples per gradient chunk; chunks are summed in order so the result does
/// not depend on the executor.
const GRAD_CHUNK: usize = 16;

/// Epochs of shuffled mini-batch RMSProp on the masked loss until the
/// epoch's balanced accuracy reaches the threshold (after `min_epochs`) or
/// `max_epochs` run out. Accuracy is tallied on the fly from the forward
/// passes made during the epoch.
pub fn train_network<E: Executor>(
    net: &NetworkParams,
    samples: &[TrainingSample],
    hyper: OptHyper,
    stop: &TrainStop,
    seed: u64,
    exec: &E,
) -> Result<(NetworkParams, TrainReport)> {
    stop.validate()?;
    if samples.is_empty() {
        return Err(Error::invalid("samples", "must not be empty"));
    }
    if hyper.batch_size == 0 {
        return Err(Error::invalid("batch_size", "must be at least 1"));
    }
    if let Some(s) = samples.iter().find(|s| s.target_index >= net.n_outputs) {
        return Err(Error::invalid(
            "target_index",
            format!(
                "{} out of range for {} outputs",
                s.target_index, net.n_outputs
            ),
        ));
    }
    let mut params = net.clone();
    let mut opt = OptState::new(&params, hyper);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut report = TrainReport {
        samples: samples.len(),
        ..TrainReport::default()
    };
    for epoch in 0..stop.max_epochs {
        order.shuffle(&mut rng::seeded(rng::derive(seed, epoch as u64)));
        let mut tally = Tally::default();
        let mut loss_sum = 0.0;
        for batch in order.chunks(hyper.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            let chunks: Vec<&[usize]> = batch.chunks(GRAD_CHUNK).collect();
            let frozen = &params;
            let parts = exec.map_range(chunks.len(), |c| {
                let mut g = Gradients::zeros_like(frozen);
                let logits: Vec<f64> = chunks[c]
                    .iter()
                    .map(|&i| frozen.accumulate_gradient(&samples[i], scale, &mut g))
                    .collect();
                (g, logits)
            });
            let mut grads = Gradients::zeros_like(&params);
            for ((g, logits), chunk) in parts.iter().zip(&chunks) {
                grads.add_assign(g);
                for (&logit, &i) in logits.iter().zip(chunk.iter()) {
                    let target = samples[i].target_value;
                    tally.add(sigmoid(logit), target);
                    loss_sum += crate::neural::bce_with_logit(logit, target);
                }
            }
            rmsprop_step(&mut params, &grads, &mut opt)?;
        }
        report.epochs = epoch + 1;
        report.loss = loss_sum / samples.len() as f64;
        report.accuracy = tally.accuracy();
        report.balanced_accuracy = tally.balanced();
        if report.epochs >= stop.min_epochs && report.balanced_accuracy >= stop.accuracy_threshold {
            break;
        }
    }
    params.validate()?;
    Ok((params, report))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameConfig {
    /// Weight of the adversary's belief in protagonist labels.
    pub alpha: f64,
    pub iterations: usize,
    pub grasps_per_iteration: usize,
    pub init_random_grasps: usize,
    pub train: TrainStop,
    pub optimizer: OptHyper,
    /// Temperature of importance sampling over the grasp matrix.
    pub grasp_temperature: f64,
    pub label_mode: LabelMode,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            alpha: 0.5,
            iterations: 3,
            grasps_per_iteration: 600,
            init_random_grasps: 2000,
            train: TrainStop::default(),
            optimizer: OptHyper::default(),
            grasp_temperature: 1.0,
            label_mode: LabelMode::Belief,
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        self.train.validate()?;
        if self.iterations == 0 {
            return Err(Error::invalid("iterations", "must be at least 1"));
        }
        if self.grasps_per_iteration == 0 {
            return Err(Error::invalid("grasps_per_iteration", "must be at least 1"));
        }
        if self.init_random_grasps == 0 {
            return Err(Error::invalid("init_random_grasps", "must be at least 1"));
        }
        SelectionMode::Importance {
            temperature: self.grasp_temperature,
        }
        .validate()
    }

    pub fn grasp_mode(&self) -> SelectionMode {
        SelectionMode::Importance {
            temperature: self.grasp_temperature,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IterationMetrics {
    /// Adversary kind of the phase (`None` for protagonist-only phases).
    pub kind: Option<AdversaryKind>,
    /// Index within the phase; the initial random-grasp phase has no index.
    pub iteration: Option<u32>,
    pub attempts: usize,
    pub successes: usize,
    pub adversary_attempts: usize,
    pub dislodged: usize,
    pub grasp_dataset_size: usize,
    pub adversary_dataset_size: usize,
    pub protagonist: TrainReport,
    pub adversary: Option<TrainReport>,
}

impl IterationMetrics {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.attempts.max(1) as f64
    }

    pub fn dislodge_rate(&self) -> f64 {
        self.dislodged as f64 / self.adversary_attempts.max(1) as f64
    }
}

/// Everything produced by one phase step, including the exact targets the
/// networks were trained on (aligned with `GameState::records` and with the
/// adversary-attempt subset of it).
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub metrics: IterationMetrics,
    pub new_records: usize,
    pub protagonist_targets: Vec<f64>,
    pub adversary_targets: Vec<f64>,
}

/// Resumable state of one arm of the game.
#[derive(Debug, Clone, PartialEq)]
pub struct GameState {
    pub seed: u64,
    /// Adversary kind currently in play; `None` for the no-adversary arm.
    pub kind: Option<AdversaryKind>,
    /// Completed iterations of the current phase.
    pub phase_iteration: usize,
    pub protagonist: NetworkParams,
    pub adversary: Option<NetworkParams>,
    /// Final adversaries of earlier phases, still used to label their data.
    pub retired: Vec<(AdversaryKind, NetworkParams)>,
    /// Kind whose adversary labels successes without an attempt.
    pub first_kind: Option<AdversaryKind>,
    pub records: Vec<EpisodeRecord>,
    pub metrics: Vec<IterationMetrics>,
}

fn kind_tag(kind: Option<AdversaryKind>) -> u64 {
    match kind {
        None => 0xBA5E,
        Some(AdversaryKind::Shake) => 0x5A4E,
        Some(AdversaryKind::Snatch) => 0x5A7C,
    }
}

fn count_metrics(records: &[EpisodeRecord]) -> (usize, usize, usize) {
    let successes = records.iter().filter(|r| r.grasp_success).count();
    let attempts = records.iter().filter(|r| r.adversary.is_some()).count();
    let dislodged = records
        .iter()
        .filter(|r| r.adversary.is_some_and(|a| a.success))
        .count();
    (successes, attempts, dislodged)
}

impl GameState {
    /// Collects the random-grasp dataset and trains the first protagonist
    /// on plain success labels.
    pub fn initialize<E: Executor>(
        env: &EnvConfig,
        config: &GameConfig,
        kind: Option<AdversaryKind>,
        seed: u64,
        exec: &E,
    ) -> Result<(GameState, StepOutput)> {
        config.validate()?;
        let records = collect_random_grasps(
            env,
            config.init_random_grasps,
            rng::derive(seed, 0x1417),
            exec,
        )?;
        let (successes, _, _) = count_metrics(&records);
        if successes == 0 {
            return Err(Error::NoSuccessfulGrasps { iteration: 0 });
        }
        let samples = make_protagonist_targets(&records, None, config.alpha)?;
        let init = NetworkParams::init(N_ANGLE_BINS, rng::derive(seed, 0x9207))?;
        let (protagonist, report) = train_network(
            &init,
            &samples,
            config.optimizer,
            &config.train,
            rng::derive(seed, 0x7A1),
            exec,
        )?;
        let metrics = IterationMetrics {
            kind: None,
            iteration: None,
            attempts: records.len(),
            successes,
            grasp_dataset_size: records.len(),
            protagonist: report,
            ..IterationMetrics::default()
        };
        let output = StepOutput {
            metrics,
            new_records: records.len(),
            protagonist_targets: samples.iter().map(|s| s.target_value).collect(),
            adversary_targets: Vec::new(),
        };
        let state = GameState {
            seed,
            kind,
            phase_iteration: 0,
            protagonist,
            adversary: None,
            retired: Vec::new(),
            first_kind: kind,
            records,
            metrics: vec![metrics],
        };
        Ok((state, output))
    }

    /// Switches to a new adversary kind, keeping the protagonist and all data.
    pub fn start_phase(&mut self, kind: AdversaryKind) {
        if let (Some(old), Some(net)) = (self.kind, self.adversary.take()) {
            self.retired.push((old, net));
        }
        if self.first_kind.is_none() {
            self.first_kind = Some(kind);
        }
        self.kind = Some(kind);
        self.phase_iteration = 0;
    }

    /// Total grasp attempts made so far.
    pub fn attempts(&self) -> usize {
        self.records.len()
    }

    /// Network whose belief labels `record`, if any.
    pub fn labelling_adversary(&self, record: &EpisodeRecord) -> Option<&NetworkParams> {
        let kind = record
            .adversary
            .map(|a| a.action.kind)
            .or(self.first_kind)?;
        if self.kind == Some(kind) {
            if let Some(net) = &self.adversary {
                return Some(net);
            }
        }
        self.retired
            .iter()
            .rev()
            .find(|(k, _)| *k == kind)
            .map(|(_, n)| n)
    }

    /// One collect → train adversary → train protagonist cycle over the
    /// aggregated data.
    pub fn run_iteration<E: Executor>(
        &mut self,
        env: &EnvConfig,
        config: &GameConfig,
        exec: &E,
    ) -> Result<StepOutput> {
        config.validate()?;
        let phase = self.phase_iteration as u32;
        let step_seed = rng::derive_path(self.seed, &[kind_tag(self.kind), phase as u64]);
        let n = config.grasps_per_iteration;
        let policy = match (self.kind, &self.adversary) {
            (None, _) => None,
            (Some(kind), None) => Some(AdversaryPolicy::Random(kind)),
            (Some(kind), Some(net)) => Some(AdversaryPolicy::Network {
                net,
                kind,
                mode: SelectionMode::Greedy,
            }),
        };
        let plan = CollectPlan {
            protagonist: Some(&self.protagonist),
            grasp_mode: config.grasp_mode(),
            adversary: policy,
            iteration: phase,
            config_id: kind_tag(self.kind),
        };
        let fresh = collect(env, &plan, n, rng::derive(step_seed, 1), exec)?;
        let (successes, adversary_attempts, dislodged) = count_metrics(&fresh);
        if successes == 0 {
            return Err(Error::NoSuccessfulGrasps {
                iteration: phase as usize,
            });
        }
        self.records.extend(fresh);

        let mut adversary_report = None;
        let mut adversary_targets = Vec::new();
        let mut adversary_dataset_size = 0;
        if let Some(kind) = self.kind {
            let samples = make_adversary_targets(&self.records, kind);
            adversary_dataset_size = samples.len();
            if !samples.is_empty() {
                let start = match &self.adversary {
                    Some(net) => net.clone(),
                    None => NetworkParams::init(kind.n_actions(), rng::derive(step_seed, 2))?,
                };
                let (net, report) = train_network(
                    &start,
                    &samples,
                    config.optimizer,
                    &config.train,
                    rng::derive(step_seed, 3),
                    exec,
                )?;
                self.adversary = Some(net);
                adversary_report = Some(report);
                adversary_targets = samples.iter().map(|s| s.target_value).collect();
            }
        }

        let samples = make_protagonist_targets_with(
            &self.records,
            |r| self.labelling_adversary(r),
            config.alpha,
            config.label_mode,
            exec,
        )?;
        let (protagonist, report) = train_network(
            &self.protagonist,
            &samples,
            config.optimizer,
            &config.train,
            rng::derive(step_seed, 4),
            exec,
        )?;
        self.protagonist = protagonist;
        self.phase_iteration += 1;

        let metrics = IterationMetrics {
            kind: self.kind,
            iteration: Some(phase),
            attempts: n,
            successes,
            adversary_attempts,
            dislodged,
            grasp_dataset_size: self.records.len(),
            adversary_dataset_size,
            protagonist: report,
            adversary: adversary_report,
        };
        self.metrics.push(metrics);
        Ok(StepOutput {
            metrics,
            new_records: n,
            protagonist_targets: samples.iter().map(|s| s.target_value).collect(),
            adversary_targets,
        })
    }
}

/// Protagonist checkpoints of a full arm: index 0 is the initial
/// protagonist, index `i + 1` the one after iteration `i`.
#[derive(Debug, Clone)]
pub struct JointRun {
    pub protagonists: Vec<NetworkParams>,
    pub adversaries: Vec<NetworkParams>,
    pub state: GameState,
}

/// Runs initialization and `config.iterations` iterations in one go.
pub fn joint_train<E: Executor>(
    env: &EnvConfig,
    config: &GameConfig,
    kind: Option<AdversaryKind>,
    seed: u64,
    exec: &E,
) -> Result<JointRun> {
    let (mut state, _) = GameState::initialize(env, config, kind, seed, exec)?;
    let mut protagonists = vec![state.protagonist.clone()];
    let mut adversaries = Vec::new();
    for _ in 0..config.iterations {
        state.run_iteration(env, config, exec)?;
        protagonists.push(state.protagonist.clone());
        if let Some(a) = &state.adversary {
            adversaries.push(a.clone());
        }
    }
    Ok(JointRun {
        protagonists,
        adversaries,
        state,
    })
}

/// Continues a trained arm against a new adversary kind for
/// `config.iterations` iterations.
pub fn continue_joint_train<E: Executor>(
    mut state: GameState,
    env: &EnvConfig,
    config: &GameConfig,
    kind: AdversaryKind,
    exec: &E,
) -> Result<JointRun> {
    config.validate()?;
    state.start_phase(kind);
    let mut protagonists = vec![state.protagonist.clone()];
    let mut adversaries = Vec::new();
    for _ in 0..config.iterations {
        state.run_iteration(env, config, exec)?;
        protagonists.push(state.protagonist.clone());
        if let Some(a) = &state.adversary {
            adversaries.push(a.clone());
        }
    }
    Ok(JointRun {
        protagonists,
        adversaries,
        state,
    })
}
