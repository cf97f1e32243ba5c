//! Experiment configuration, read from TOML.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use advgrasp_core::eval::{eval_objects, EvalRegime};
use advgrasp_core::neural::OptHyper;
use advgrasp_core::scene::Difficulty;
use advgrasp_core::sim::SimConfig;
use advgrasp_core::trainer::{EnvConfig, GameConfig, LabelMode, ObjectSpec, TrainStop};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Arm {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "shake")]
    Shake,
    #[serde(rename = "shake+snatch")]
    ShakeSnatch,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::Baseline, Arm::Shake, Arm::ShakeSnatch];

    pub fn name(self) -> &'static str {
        match self {
            Arm::Baseline => "baseline",
            Arm::Shake => "shake",
            Arm::ShakeSnatch => "shake+snatch",
        }
    }

    /// Directory name under a seed directory.
    pub fn dir(self) -> &'static str {
        match self {
            Arm::Baseline => "baseline",
            Arm::Shake => "shake",
            Arm::ShakeSnatch => "shake_snatch",
        }
    }

    pub fn parse(s: &str) -> Option<Arm> {
        Arm::ALL.into_iter().find(|a| a.name() == s || a.dir() == s)
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimeName {
    Low,
    High,
}

impl RegimeName {
    pub fn name(self) -> &'static str {
        match self {
            RegimeName::Low => "low",
            RegimeName::High => "high",
        }
    }

    pub fn parse(s: &str) -> Option<RegimeName> {
        match s {
            "low" => Some(RegimeName::Low),
            "high" => Some(RegimeName::High),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LabelModeName {
    #[default]
    Belief,
    Outcome,
}

/// Training and held-out object sets. Training objects take consecutive
/// seeds from `train_seed`, held-out objects from `eval_seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectsConfig {
    pub train_seed: u64,
    pub easy: usize,
    pub medium: usize,
    pub hard: usize,
    pub eval_seed: u64,
}

impl Default for ObjectsConfig {
    fn default() -> Self {
        ObjectsConfig {
            train_seed: 1,
            easy: 12,
            medium: 12,
            hard: 6,
            eval_seed: 1_000_000,
        }
    }
}

impl ObjectsConfig {
    pub fn training(&self) -> Vec<ObjectSpec> {
        let mut out = Vec::new();
        for (difficulty, count) in [
            (Difficulty::Easy, self.easy),
            (Difficulty::Medium, self.medium),
            (Difficulty::Hard, self.hard),
        ] {
            for _ in 0..count {
                out.push(ObjectSpec {
                    seed: self.train_seed + out.len() as u64,
                    difficulty,
                });
            }
        }
        out
    }

    pub fn held_out(&self) -> Vec<ObjectSpec> {
        eval_objects(self.eval_seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GameSection {
    pub alpha: f64,
    pub iterations: usize,
    pub grasps_per_iteration: usize,
    pub init_random_grasps: usize,
    pub max_epochs: usize,
    pub min_epochs: usize,
    pub accuracy_threshold: f64,
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub grasp_temperature: f64,
    pub label_mode: LabelModeName,
}

impl Default for GameSection {
    fn default() -> Self {
        let g = GameConfig::default();
        GameSection {
            alpha: g.alpha,
            iterations: g.iterations,
            grasps_per_iteration: 1200,
            init_random_grasps: 4000,
            max_epochs: g.train.max_epochs,
            min_epochs: g.train.min_epochs,
            accuracy_threshold: g.train.accuracy_threshold,
            learning_rate: g.optimizer.learning_rate,
            decay: g.optimizer.decay,
            epsilon: g.optimizer.epsilon,
            batch_size: g.optimizer.batch_size,
            grasp_temperature: g.grasp_temperature,
            label_mode: LabelModeName::Belief,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SnatchSection {
    pub iterations: usize,
    pub grasps_per_iteration: usize,
}

impl Default for SnatchSection {
    fn default() -> Self {
        SnatchSection {
            iterations: 2,
            grasps_per_iteration: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub grip_force: f64,
    pub max_payload: f64,
    pub w_max: f64,
    pub shake_freq: f64,
    pub shake_amp: f64,
    pub lever_gain: f64,
    pub pull_force: f64,
    pub clearance: f64,
    pub friction_scale: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection::from(SimConfig::default())
    }
}

impl From<SimConfig> for SimSection {
    fn from(s: SimConfig) -> Self {
        SimSection {
            grip_force: s.grip_force,
            max_payload: s.max_payload,
            w_max: s.w_max,
            shake_freq: s.shake_freq,
            shake_amp: s.shake_amp,
            lever_gain: s.lever_gain,
            pull_force: s.pull_force,
            clearance: s.clearance,
            friction_scale: s.friction_scale,
        }
    }
}

impl SimSection {
    pub fn to_sim(&self) -> SimConfig {
        SimConfig {
            grip_force: self.grip_force,
            max_payload: self.max_payload,
            w_max: self.w_max,
            shake_freq: self.shake_freq,
            shake_amp: self.shake_amp,
            lever_gain: self.lever_gain,
            pull_force: self.pull_force,
            clearance: self.clearance,
            friction_scale: self.friction_scale,
        }
    }
}

/// Settings of the two evaluation regimes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub low_grip_force: f64,
    pub low_candidates: usize,
    pub high_grip_force: f64,
    pub high_friction_scale: f64,
    pub high_candidates: usize,
    /// Successful grasps in each adversary probe set.
    pub probe_grasps: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        let (low, high) = (EvalRegime::low(), EvalRegime::high());
        EvalSection {
            low_grip_force: low.sim.grip_force,
            low_candidates: low.n_candidates,
            high_grip_force: high.sim.grip_force,
            high_friction_scale: high.sim.friction_scale,
            high_candidates: high.n_candidates,
            probe_grasps: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub name: String,
    pub seeds: Vec<u64>,
    pub arms: Vec<Arm>,
    pub regimes: Vec<RegimeName>,
    /// Greedy grasps per held-out object and column.
    pub tries: usize,
    /// Baseline grasp budget relative to the shake arm.
    pub baseline_budget_multiplier: f64,
    /// Candidate centres scored per grasp during training collection.
    pub n_candidates: usize,
    pub objects: ObjectsConfig,
    pub game: GameSection,
    pub snatch: SnatchSection,
    pub sim: SimSection,
    pub eval: EvalSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "desk-scale".into(),
            seeds: vec![1, 2, 3],
            arms: Arm::ALL.to_vec(),
            regimes: vec![RegimeName::Low, RegimeName::High],
            tries: 10,
            baseline_budget_multiplier: 1.3,
            n_candidates: 128,
            objects: ObjectsConfig::default(),
            game: GameSection::default(),
            snatch: SnatchSection::default(),
            sim: SimSection::default(),
            eval: EvalSection::default(),
        }
    }
}

/// Maps a core validation failure onto the config key that caused it.
fn core_key(section: &str, err: advgrasp_core::Error) -> HarnessError {
    match err {
        advgrasp_core::Error::InvalidArgument { name, reason } => {
            HarnessError::config(format!("{section}.{name}"), reason)
        }
        other => HarnessError::config(section, other.to_string()),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let key = e
                .span()
                .map(|s| key_at(text, s.start))
                .unwrap_or_else(|| "<root>".into());
            HarnessError::config(key, e.message().trim().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::config("--config", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn game_config(&self) -> GameConfig {
        let g = &self.game;
        GameConfig {
            alpha: g.alpha,
            iterations: g.iterations,
            grasps_per_iteration: g.grasps_per_iteration,
            init_random_grasps: g.init_random_grasps,
            train: TrainStop {
                max_epochs: g.max_epochs,
                min_epochs: g.min_epochs,
                accuracy_threshold: g.accuracy_threshold,
            },
            optimizer: OptHyper {
                learning_rate: g.learning_rate,
                decay: g.decay,
                epsilon: g.epsilon,
                batch_size: g.batch_size,
            },
            grasp_temperature: g.grasp_temperature,
            label_mode: match g.label_mode {
                LabelModeName::Belief => LabelMode::Belief,
                LabelModeName::Outcome => LabelMode::Outcome,
            },
        }
    }

    pub fn snatch_game_config(&self) -> GameConfig {
        GameConfig {
            iterations: self.snatch.iterations,
            grasps_per_iteration: self.snatch.grasps_per_iteration,
            ..self.game_config()
        }
    }

    /// Baseline grasps per iteration: the shared initial dataset plus these
    /// iterations total at least `multiplier` times the shake arm's budget.
    pub fn baseline_game_config(&self) -> GameConfig {
        let g = self.game_config();
        let shake_total = (g.init_random_grasps + g.iterations * g.grasps_per_iteration) as f64;
        let target = (self.baseline_budget_multiplier * shake_total).ceil() as usize;
        let extra = target.saturating_sub(g.init_random_grasps);
        GameConfig {
            grasps_per_iteration: extra.div_ceil(g.iterations).max(1),
            ..g
        }
    }

    pub fn env(&self) -> EnvConfig {
        EnvConfig {
            sim: self.sim.to_sim(),
            objects: self.objects.training(),
            n_candidates: self.n_candidates,
        }
    }

    pub fn regime(&self, name: RegimeName) -> EvalRegime {
        let base = self.sim.to_sim();
        match name {
            RegimeName::Low => EvalRegime {
                sim: SimConfig {
                    grip_force: self.eval.low_grip_force,
                    ..base
                },
                n_candidates: self.eval.low_candidates,
            },
            RegimeName::High => EvalRegime {
                sim: SimConfig {
                    grip_force: self.eval.high_grip_force,
                    friction_scale: base.friction_scale * self.eval.high_friction_scale,
                    ..base
                },
                n_candidates: self.eval.high_candidates,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(HarnessError::config("name", "must not be empty"));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::config("seeds", "need at least one seed"));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(HarnessError::config("seeds", "seeds must be distinct"));
        }
        if self.arms.is_empty() {
            return Err(HarnessError::config("arms", "need at least one arm"));
        }
        if self.regimes.is_empty() {
            return Err(HarnessError::config("regimes", "need at least one regime"));
        }
        if self.tries == 0 {
            return Err(HarnessError::config("tries", "must be at least 1"));
        }
        if !(self.baseline_budget_multiplier >= 1.0 && self.baseline_budget_multiplier.is_finite())
        {
            return Err(HarnessError::config(
                "baseline_budget_multiplier",
                "must be at least 1",
            ));
        }
        if self.n_candidates == 0 {
            return Err(HarnessError::config("n_candidates", "must be at least 1"));
        }
        if self.snatch.iterations == 0 {
            return Err(HarnessError::config(
                "snatch.iterations",
                "must be at least 1",
            ));
        }
        if self.snatch.grasps_per_iteration == 0 {
            return Err(HarnessError::config(
                "snatch.grasps_per_iteration",
                "must be at least 1",
            ));
        }
        if self.eval.low_candidates == 0 || self.eval.high_candidates == 0 {
            return Err(HarnessError::config(
                "eval.low_candidates",
                "must be at least 1",
            ));
        }
        if self.eval.probe_grasps == 0 {
            return Err(HarnessError::config(
                "eval.probe_grasps",
                "must be at least 1",
            ));
        }
        self.game_config()
            .validate()
            .map_err(|e| core_key("game", e))?;
        self.env().validate().map_err(|e| match e {
            advgrasp_core::Error::InvalidArgument {
                name: "objects",
                reason,
            } => HarnessError::config("objects", reason),
            e => core_key("sim", e),
        })?;
        for r in [RegimeName::Low, RegimeName::High] {
            self.regime(r)
                .sim
                .validate()
                .map_err(|e| core_key("eval", e))?;
        }
        let train: BTreeSet<u64> = self.objects.training().iter().map(|o| o.seed).collect();
        if self
            .objects
            .held_out()
            .iter()
            .any(|o| train.contains(&o.seed))
        {
            return Err(HarnessError::config(
                "objects.eval_seed",
                "held-out object seeds overlap the training objects",
            ));
        }
        Ok(())
    }
}

/// Dotted key path of the TOML entry enclosing byte offset `at`.
fn key_at(text: &str, at: usize) -> String {
    let mut table = String::new();
    let mut key = String::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if offset > at {
            break;
        }
        if let Some(t) = trimmed.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
            table = t.trim().to_string();
            key.clear();
        } else if let Some((k, _)) = trimmed.split_once('=') {
            key = k.trim().to_string();
        }
        offset += line.len();
    }
    match (table.is_empty(), key.is_empty()) {
        (true, true) => "<root>".into(),
        (true, false) => key,
        (false, true) => table,
        (false, false) => format!("{table}.{key}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(text: &str) -> String {
        match ExperimentConfig::from_toml(text) {
            Err(HarnessError::Config { key, .. }) => key,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn default_config_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn empty_file_means_defaults() {
        assert_eq!(
            ExperimentConfig::from_toml("").unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn diagnostics_name_the_key() {
        assert_eq!(key_of("[game]\nalpha = 1.5\n"), "game.alpha");
        assert_eq!(key_of("tries = 0\n"), "tries");
        assert_eq!(key_of("[game]\nalpha = \"high\"\n"), "game.alpha");
        assert_eq!(key_of("[sim]\ngrip_force = -7.0\n"), "sim.grip_force");
        assert_eq!(key_of("arms = [\"shove\"]\n"), "arms");
        assert!(key_of("[game]\nalpah = 0.5\n").starts_with("game"));
        assert_eq!(
            key_of("[objects]\ntrain_seed = 999995\n"),
            "objects.eval_seed"
        );
    }

    #[test]
    fn baseline_budget_covers_the_multiplier() {
        let cfg = ExperimentConfig::default();
        let g = cfg.game_config();
        let b = cfg.baseline_game_config();
        let shake = g.init_random_grasps + g.iterations * g.grasps_per_iteration;
        let base = b.init_random_grasps + b.iterations * b.grasps_per_iteration;
        assert!(base as f64 >= 1.3 * shake as f64);
        assert!(((base - 3) as f64) < 1.3 * shake as f64);
    }

    #[test]
    fn high_regime_is_stronger() {
        let cfg = ExperimentConfig::default();
        let (lo, hi) = (cfg.regime(RegimeName::Low), cfg.regime(RegimeName::High));
        assert_eq!(lo.sim.grip_force, 7.0);
        assert_eq!(hi.sim.grip_force, 35.0);
        assert_eq!(hi.sim.friction_scale, 1.25);
        assert_eq!((lo.n_candidates, hi.n_candidates), (128, 1280));
    }

    #[test]
    fn arm_names_parse() {
        for a in Arm::ALL {
            assert_eq!(Arm::parse(a.name()), Some(a));
            assert_eq!(Arm::parse(a.dir()), Some(a));
        }
        assert_eq!(Arm::parse("snatch"), None);
    }
}
