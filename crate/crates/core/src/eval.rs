//! Held-out evaluation of protagonists and probes of adversary strength.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::neural::NetworkParams;
use crate::policy::{
    probability_matrix, sample_candidates, select_adversary, select_grasp, SelectionMode,
};
use crate::rng;
use crate::scene::{render_scene, Difficulty, Image, Scene};
use crate::sim::{
    apply_adversary, dislodge_fraction, dislodgeable, grasp_margin, lift_holds, AdversaryKind,
    GraspAction, GraspOutcome, SimConfig,
};
use crate::trainer::{EnvConfig, ObjectSpec};

/// Grip setting and candidate budget of an evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRegime {
    pub sim: SimConfig,
    pub n_candidates: usize,
}

impl EvalRegime {
    /// Reduced grip and 128 candidates.
    pub fn low() -> Self {
        EvalRegime {
            sim: SimConfig::default(),
            n_candidates: 128,
        }
    }

    /// Full grip with rubber pads and ten times the candidates.
    pub fn high() -> Self {
        EvalRegime {
            sim: SimConfig::high_force(),
            n_candidates: 1280,
        }
    }
}

/// The standard held-out set: 4 easy, 4 medium and 2 hard objects.
pub fn eval_objects(base_seed: u64) -> Vec<ObjectSpec> {
    let mix = [
        (Difficulty::Easy, 4),
        (Difficulty::Medium, 4),
        (Difficulty::Hard, 2),
    ];
    let mut out = Vec::new();
    for (difficulty, count) in mix {
        for _ in 0..count {
            out.push(ObjectSpec {
                seed: base_seed + out.len() as u64,
                difficulty,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObjectResult {
    pub object: ObjectSpec,
    pub successes: usize,
    pub tries: usize,
}

/// Scene and candidate seeds of try `t` on object `o`. They depend only on
/// the evaluation seed, so every network and regime faces identical scenes.
fn try_seeds(seed: u64, object: usize, t: usize) -> (u64, u64) {
    let s = rng::derive_path(seed, &[object as u64, t as u64]);
    (rng::derive(s, 1), rng::derive(s, 2))
}

/// Greedy grasp of `net` on a rendered scene.
pub fn greedy_grasp(
    net: &NetworkParams,
    image: &Image,
    n_candidates: usize,
    seed: u64,
) -> Result<GraspAction> {
    let candidates = sample_candidates(image, n_candidates, seed)?;
    let matrix = probability_matrix(net, image, &candidates, &Sequential)?;
    select_grasp(&matrix, SelectionMode::Greedy, 0)
}

/// A grasp counts when it closes on the object and the hold carries the
/// object's weight during the lift.
pub fn lifted(outcome: &GraspOutcome, scene: &Scene, sim: &SimConfig) -> bool {
    scene
        .object
        .as_ref()
        .is_some_and(|object| outcome.success && lift_holds(outcome, object, sim))
}

/// Per-try success flags of `tries` greedy grasps on each object, poses
/// re-randomised between tries.
pub fn evaluate_tries<E: Executor>(
    net: &NetworkParams,
    objects: &[ObjectSpec],
    regime: &EvalRegime,
    tries: usize,
    seed: u64,
    exec: &E,
) -> Result<Vec<Vec<bool>>> {
    regime.sim.validate()?;
    if tries == 0 || objects.is_empty() {
        return Err(Error::invalid(
            "tries",
            "need at least one object and one try",
        ));
    }
    let flat: Result<Vec<bool>> = exec
        .map_range(objects.len() * tries, |k| {
            let (o, t) = (k / tries, k % tries);
            let (scene_seed, cand_seed) = try_seeds(seed, o, t);
            let scene = objects[o].scene(scene_seed);
            let image = render_scene(&scene);
            let grasp = greedy_grasp(net, &image, regime.n_candidates, cand_seed)?;
            let object = scene
                .object
                .as_ref()
                .ok_or(Error::Contract("evaluation scene without object"))?;
            let outcome = grasp_margin(object, &scene.pose, &grasp, &regime.sim);
            Ok(lifted(&outcome, &scene, &regime.sim))
        })
        .into_iter()
        .collect();
    Ok(flat?.chunks(tries).map(<[bool]>::to_vec).collect())
}

/// One results-table column: successes out of `tries` per object.
pub fn evaluate<E: Executor>(
    net: &NetworkParams,
    objects: &[ObjectSpec],
    regime: &EvalRegime,
    tries: usize,
    seed: u64,
    exec: &E,
) -> Result<Vec<ObjectResult>> {
    let flags = evaluate_tries(net, objects, regime, tries, seed, exec)?;
    Ok(objects
        .iter()
        .zip(flags)
        .map(|(&object, f)| ObjectResult {
            object,
            successes: f.iter().filter(|&&s| s).count(),
            tries,
        })
        .collect())
}

/// Overall success fraction of a column.
pub fn overall(column: &[ObjectResult]) -> f64 {
    let s: usize = column.iter().map(|r| r.successes).sum();
    let t: usize = column.iter().map(|r| r.tries).sum();
    s as f64 / t.max(1) as f64
}

/// A held grasp reused to compare adversaries on identical situations.
#[derive(Debug, Clone)]
pub struct ProbeGrasp {
    pub scene: Scene,
    pub grasp: GraspAction,
    pub outcome: GraspOutcome,
    pub rotated_patch: crate::scene::Patch,
}

/// Collects `n` successful grasps on the environment's objects. With a
/// protagonist the grasp is chosen by `mode` from its matrix; without one it
/// is uniformly random. Gives up after `max_attempts`.
pub fn probe_grasps(
    env: &EnvConfig,
    protagonist: Option<&NetworkParams>,
    mode: SelectionMode,
    n: usize,
    max_attempts: usize,
    seed: u64,
) -> Result<Vec<ProbeGrasp>> {
    use rand::Rng as _;
    env.validate()?;
    let mut out = Vec::with_capacity(n);
    for k in 0..max_attempts {
        if out.len() == n {
            break;
        }
        let s = rng::derive(seed, k as u64);
        let mut r = rng::seeded(s);
        let object = env.objects[r.gen_range(0..env.objects.len())];
        let scene = object.scene(rng::derive(s, 1));
        let image = render_scene(&scene);
        let grasp = match protagonist {
            Some(net) => {
                let candidates = sample_candidates(&image, env.n_candidates, rng::derive(s, 2))?;
                let matrix = probability_matrix(net, &image, &candidates, &Sequential)?;
                select_grasp(&matrix, mode, rng::derive(s, 3))?
            }
            None => {
                let c = sample_candidates(&image, 1, rng::derive(s, 2))?[0];
                GraspAction::new(c.x, c.y, r.gen_range(0..crate::sim::N_ANGLE_BINS) as u8)?
            }
        };
        let shape = scene
            .object
            .as_ref()
            .ok_or(Error::Contract("probe scene without object"))?;
        let outcome = grasp_margin(shape, &scene.pose, &grasp, &env.sim);
        if lifted(&outcome, &scene, &env.sim) {
            let rotated_patch =
                crate::scene::extract_rotated_patch(&image, grasp.center(), grasp.angle());
            out.push(ProbeGrasp {
                scene,
                grasp,
                outcome,
                rotated_patch,
            });
        }
    }
    Ok(out)
}

/// Dislodge rates of three adversaries on the same held grasps.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DislodgeRates {
    pub grasps: usize,
    /// Greedy action of the trained adversary network.
    pub trained: f64,
    /// Expected rate of a uniformly random action.
    pub random: f64,
    /// Any action dislodges.
    pub best_response: f64,
}

pub fn dislodge_rates(
    probes: &[ProbeGrasp],
    adversary: Option<&NetworkParams>,
    kind: AdversaryKind,
    sim: &SimConfig,
) -> Result<DislodgeRates> {
    if probes.is_empty() {
        return Err(Error::invalid("probes", "need at least one held grasp"));
    }
    let mut rates = DislodgeRates {
        grasps: probes.len(),
        ..DislodgeRates::default()
    };
    for p in probes {
        let object = p
            .scene
            .object
            .as_ref()
            .ok_or(Error::Contract("probe scene without object"))?;
        if let Some(net) = adversary {
            let action = select_adversary(net, &p.rotated_patch, kind, SelectionMode::Greedy, 0)?;
            if apply_adversary(&p.outcome, &p.grasp, object, &p.scene.pose, sim, action)? {
                rates.trained += 1.0;
            }
        }
        rates.random += dislodge_fraction(&p.outcome, &p.grasp, object, &p.scene.pose, sim, kind)?;
        if dislodgeable(&p.outcome, &p.grasp, object, &p.scene.pose, sim, kind)? {
            rates.best_response += 1.0;
        }
    }
    let n = probes.len() as f64;
    rates.trained /= n;
    rates.random /= n;
    rates.best_response /= n;
    Ok(rates)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_set_mix() {
        let objs = eval_objects(1000);
        assert_eq!(objs.len(), 10);
        assert_eq!(
            objs.iter()
                .filter(|o| o.difficulty == Difficulty::Hard)
                .count(),
            2
        );
        assert_eq!(objs[9].seed, 1009);
    }

    #[test]
    fn overall_is_exact_ratio() {
        let o = ObjectSpec {
            seed: 1,
            difficulty: Difficulty::Easy,
        };
        let col = [
            ObjectResult {
                object: o,
                successes: 3,
                tries: 10,
            },
            ObjectResult {
                object: o,
                successes: 10,
                tries: 10,
            },
        ];
        assert_eq!(overall(&col), 13.0 / 20.0);
    }
}
