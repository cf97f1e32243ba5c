#![allow(dead_code)]

use advgrasp::config::ExperimentConfig;
use advgrasp_core::exec::Sequential;
use advgrasp_core::neural::NetworkParams;
use advgrasp_core::policy::SelectionMode;
use advgrasp_core::scene::Difficulty;
use advgrasp_core::sim::{AdversaryKind, SimConfig};
use advgrasp_core::trainer::{
    collect_with_adversary, AdversaryPolicy, EnvConfig, EpisodeRecord, ObjectSpec,
};

/// Episodes with grasps, failures and both adversary kinds.
pub fn records(n: usize, seed: u64) -> Vec<EpisodeRecord> {
    let env = EnvConfig {
        sim: SimConfig::default(),
        objects: (0..4)
            .map(|s| ObjectSpec {
                seed: s,
                difficulty: if s % 2 == 0 {
                    Difficulty::Easy
                } else {
                    Difficulty::Medium
                },
            })
            .collect(),
        n_candidates: 16,
    };
    let net = NetworkParams::init(18, seed).unwrap();
    let mut out = Vec::new();
    for (i, kind) in [AdversaryKind::Shake, AdversaryKind::Snatch]
        .into_iter()
        .enumerate()
    {
        out.extend(
            collect_with_adversary(
                &env,
                &net,
                Some(AdversaryPolicy::Random(kind)),
                SelectionMode::UniformRandom,
                n / 2 + (n % 2) * i,
                i as u32,
                seed + i as u64,
                &Sequential,
            )
            .unwrap(),
        );
    }
    out
}

/// A run small enough for tests: one seed, all arms, a few hundred grasps.
pub fn tiny_config() -> ExperimentConfig {
    let mut c = ExperimentConfig {
        name: "tiny".into(),
        seeds: vec![1],
        tries: 2,
        n_candidates: 32,
        ..ExperimentConfig::default()
    };
    c.objects.easy = 4;
    c.objects.medium = 2;
    c.objects.hard = 0;
    c.game.iterations = 3;
    c.game.grasps_per_iteration = 80;
    c.game.init_random_grasps = 600;
    c.game.max_epochs = 5;
    c.sim.grip_force = 20.0;
    c.snatch.iterations = 2;
    c.snatch.grasps_per_iteration = 40;
    c.eval.low_candidates = 32;
    c.eval.high_candidates = 64;
    c.eval.probe_grasps = 20;
    c.validate().unwrap();
    c
}

/// Every results table of a finished run, in a fixed order.
pub fn tables(out: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut v = Vec::new();
    for name in [
        "results-low.txt",
        "results-low.csv",
        "results-high.txt",
        "results-high.csv",
        "summary.txt",
    ] {
        let p = out.join(name);
        if p.exists() {
            v.push((name.to_string(), std::fs::read(p).unwrap()));
        }
    }
    v
}
