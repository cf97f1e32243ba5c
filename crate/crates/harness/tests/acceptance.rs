//! End-to-end acceptance checks, one line of output per criterion.
//!
//! Criteria 6 to 8 need the full default experiment (three seeds, all arms).
//! It runs into a scratch directory unless `ADVGRASP_ACCEPTANCE_RUN` names a
//! directory holding (part of) such a run, which is then resumed.

mod common;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use advgrasp::artifacts::{read_checkpoint, read_json, write_checkpoint, METRICS};
use advgrasp::config::{Arm, ExperimentConfig, RegimeName};
use advgrasp::dataset::{read_dataset, write_dataset};
use advgrasp::experiment::{
    arm_game, eval_path, probes_path, replay_step, EvalTable, Experiment, Probes,
};
use advgrasp::report::overall;
use advgrasp::HarnessError;
use advgrasp_core::geometry::{Pose, Vec2};
use advgrasp_core::neural::{
    backward, compare_gradients, grad_check, NetworkParams, TrainingSample,
};
use advgrasp_core::policy::{select_grasp, ProbMatrix, SelectionMode};
use advgrasp_core::rng;
use advgrasp_core::scene::{generate_object, Difficulty, ObjectShape, Patch, Scene, PATCH_LEN};
use advgrasp_core::sim::*;
use advgrasp_core::trainer::{run_episode, AdversaryPolicy, EpisodeTag, ObjectSpec};
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn random_batch(len: usize, seed: u64) -> Vec<TrainingSample> {
    let mut r = rng::seeded(seed);
    (0..len)
        .map(|_| TrainingSample {
            patch: Patch::new(
                (0..PATCH_LEN).map(|_| r.gen()).collect(),
                Vec2::default(),
                0.0,
            )
            .unwrap(),
            target_index: r.gen_range(0..18),
            target_value: if r.gen_bool(0.5) {
                r.gen()
            } else {
                r.gen_range(0..2) as f64
            },
        })
        .collect()
}

fn gradient_correctness() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for net in 0..5u64 {
        for b in 0..5u64 {
            let mut p = NetworkParams::init(18, 1000 + net).unwrap();
            let batch = random_batch(8, 2000 + 10 * net + b);
            worst = worst.max(grad_check(&mut p, &batch, 3000 + net * 5 + b).unwrap());
        }
    }
    let mut p = NetworkParams::init(18, 7).unwrap();
    let batch = random_batch(8, 8);
    let (mut g, _) = backward(&p, &batch).unwrap();
    for v in &mut g.tensors[4] {
        *v *= 2.0;
    }
    let mutated = compare_gradients(&mut p, &batch, &g.flatten(), 9).unwrap();
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-3 && mutated >= 0.1 && secs < 60.0,
        format!("max rel error {worst:.2e} over 25 checks, mutation {mutated:.3}, {secs:.1}s"),
    )
}

fn selection_oracle() -> Verdict {
    let cands = |n: usize| -> Vec<Vec2> {
        (0..n)
            .map(|i| Vec2::new(0.01 + 0.002 * i as f64, 0.2))
            .collect()
    };
    let mut r = rng::seeded(77);
    let mut exact = 0;
    for _ in 0..1000 {
        let rows = r.gen_range(1..60);
        let levels = r.gen_range(2..40);
        let entries: Vec<f64> = (0..rows * 18)
            .map(|_| (r.gen_range(0..levels) as f64 + 0.5) / levels as f64)
            .collect();
        let mut best = 0;
        for (i, &v) in entries.iter().enumerate() {
            if v > entries[best] {
                best = i;
            }
        }
        let m = ProbMatrix::new(entries, 18, cands(rows)).unwrap();
        let g = select_grasp(&m, SelectionMode::Greedy, r.gen()).unwrap();
        if g.theta_bin as usize == best % 18 && g.center() == cands(rows)[best / 18] {
            exact += 1;
        }
    }
    let mut hits = 0;
    for _ in 0..1000 {
        let rows = r.gen_range(1..130);
        let mut entries: Vec<f64> = (0..rows * 18).map(|_| r.gen_range(0.01..0.6)).collect();
        let top = r.gen_range(0..entries.len());
        entries[top] = 0.95;
        let m = ProbMatrix::new(entries, 18, cands(rows)).unwrap();
        let g = select_grasp(
            &m,
            SelectionMode::Importance { temperature: 100.0 },
            r.gen(),
        )
        .unwrap();
        if g.theta_bin as usize == top % 18 && g.center() == cands(rows)[top / 18] {
            hits += 1;
        }
    }
    verdict(
        exact == 1000 && hits >= 990,
        format!("greedy exact {exact}/1000, beta=100 argmax {hits}/1000"),
    )
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn held_grasp(r: &mut rng::Rng) -> (ObjectShape, Scene, GraspAction) {
    let cfg = SimConfig::default();
    loop {
        let d = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard][r.gen_range(0..3)];
        let object = generate_object(r.gen(), d);
        if object.mass > cfg.max_payload {
            continue;
        }
        let scene = Scene::random(object.clone(), r.gen());
        let p = scene.pose.position();
        let x = (p.x + r.gen_range(-0.02..0.02)).clamp(0.0, 0.4);
        let y = (p.y + r.gen_range(-0.02..0.02)).clamp(0.0, 0.4);
        let g = GraspAction::new(x, y, r.gen_range(0..18)).unwrap();
        if grasp_margin(&object, &scene.pose, &g, &cfg).success {
            return (object, scene, g);
        }
    }
}

fn physics_oracles() -> Verdict {
    let cfg = SimConfig::default();
    let pose = Pose::new(0.2, 0.2, 0.0);
    let rect = |m: f64| ObjectShape::rectangle(0.08, 0.03, m, 0.6, 3).unwrap();
    let g = GraspAction::new(0.2, 0.2, 0).unwrap();
    let accel = 0.025 * (4.0 * std::f64::consts::PI).powi(2);
    let light = grasp_margin(&rect(0.2), &pose, &g, &cfg);
    let heavy = grasp_margin(&rect(2.0), &pose, &g, &cfg);
    let errors = [
        rel(light.margin, 1.0),
        rel(heavy.margin, 2.0 * 0.6 * 7.0 / (3.0 * 2.0 * 9.81)),
        rel(cfg.shake_peak_accel(), accel),
        rel(
            shake_demand(&light, &rect(0.2), &cfg, 0),
            0.2 * (9.81 + accel),
        ),
        rel(
            shake_demand(&heavy, &rect(2.0), &cfg, 0),
            2.0 * (9.81 + accel),
        ),
    ];
    let worst = errors.iter().cloned().fold(0.0, f64::max);
    let rounded =
        (heavy.margin - 0.1427).abs() < 5e-5 && (cfg.shake_peak_accel() - 3.948).abs() < 5e-4;

    let mut r = rng::seeded(101);
    let mut violations = 0;
    for _ in 0..10_000 {
        let (object, scene, g) = held_grasp(&mut r);
        let weak = SimConfig {
            grip_force: r.gen_range(1.0..40.0),
            ..cfg
        };
        let strong = SimConfig {
            grip_force: weak.grip_force * r.gen_range(1.0..3.0),
            ..weak
        };
        let kind = if r.gen_bool(0.5) {
            AdversaryKind::Shake
        } else {
            AdversaryKind::Snatch
        };
        let action = AdversaryAction::new(kind, r.gen_range(0..kind.n_actions())).unwrap();
        let w = grasp_margin(&object, &scene.pose, &g, &weak);
        let s = grasp_margin(&object, &scene.pose, &g, &strong);
        let fell_w = apply_adversary(&w, &g, &object, &scene.pose, &weak, action).unwrap();
        let fell_s = apply_adversary(&s, &g, &object, &scene.pose, &strong, action).unwrap();
        if s.margin < w.margin || (fell_s && !fell_w) {
            violations += 1;
        }
    }
    for _ in 0..10_000 {
        let (object, scene, g) = held_grasp(&mut r);
        let lo = r.gen_range(0.05..cfg.max_payload);
        let hi = r.gen_range(lo..=cfg.max_payload);
        let (mut light, mut heavy) = (object.clone(), object);
        light.mass = lo;
        heavy.mass = hi;
        let action = AdversaryAction::shake(r.gen_range(0..N_SHAKE_ACTIONS)).unwrap();
        let l = grasp_margin(&light, &scene.pose, &g, &cfg);
        let h = grasp_margin(&heavy, &scene.pose, &g, &cfg);
        let fell_l = apply_shake(&l, &light, &cfg, action).unwrap();
        let fell_h = apply_shake(&h, &heavy, &cfg, action).unwrap();
        if h.margin > l.margin || (fell_l && !fell_h) {
            violations += 1;
        }
    }
    verdict(
        worst <= 1e-6 && rounded && violations == 0,
        format!(
            "worst hand-example rel error {worst:.1e}, monotonicity violations {violations}/20000"
        ),
    )
}

fn label_replay(out: &Path, cfg: &ExperimentConfig, full: Option<&Path>) -> Verdict {
    let mut steps = 0;
    let mut mismatched = 0;
    let mut out_of_range = 0;
    let mut check = |dir: &Path, cfg: &ExperimentConfig, seed: u64, arm: Arm| {
        let game = arm_game(cfg, arm);
        for i in 0..game.iterations {
            let (replayed, stored) = replay_step(cfg, dir, seed, arm, i).unwrap();
            steps += 1;
            let same = |a: &[f64], b: &[f64]| {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            };
            if !same(&replayed.protagonist, &stored.protagonist)
                || !same(&replayed.adversary, &stored.adversary)
            {
                mismatched += 1;
            }
            if arm != Arm::Baseline {
                out_of_range += stored
                    .protagonist
                    .iter()
                    .filter(|&&t| !(t == 0.0 || (1.0 - game.alpha..=1.0).contains(&t)))
                    .count();
            }
        }
    };
    for arm in [Arm::Baseline, Arm::Shake, Arm::ShakeSnatch] {
        check(out, cfg, cfg.seeds[0], arm);
    }
    if let Some(full) = full {
        let full_cfg = ExperimentConfig::load(&full.join("config.toml")).unwrap();
        check(full, &full_cfg, full_cfg.seeds[0], Arm::Shake);
    }
    verdict(
        mismatched == 0 && out_of_range == 0,
        format!("{steps} steps replayed, {mismatched} mismatched, {out_of_range} discounted targets out of range"),
    )
}

fn run_cli(cfg_path: &Path, out: &Path) {
    let o = Command::new(env!("CARGO_BIN_EXE_advgrasp"))
        .args(["run-experiment", "--config"])
        .arg(cfg_path)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn determinism(a: &Path, b: &Path) -> Verdict {
    let (ta, tb) = (common::tables(a), common::tables(b));
    let tables_equal = !ta.is_empty() && ta == tb;
    let object = ObjectSpec {
        seed: 3,
        difficulty: Difficulty::Medium,
    };
    let policy = AdversaryPolicy::Random(AdversaryKind::Shake);
    let tag = EpisodeTag {
        object,
        iteration: 0,
        config_id: 0,
    };
    let mut same = 0;
    for k in 0..100u64 {
        let scene = object.scene(k);
        let p = scene.pose.position();
        let g = GraspAction::new(p.x, p.y, (k % 18) as u8).unwrap();
        let x = run_episode(&scene, g, Some(&policy), &SimConfig::default(), k, tag).unwrap();
        let y = run_episode(&scene, g, Some(&policy), &SimConfig::default(), k, tag).unwrap();
        if x == y && x.margin.to_bits() == y.margin.to_bits() {
            same += 1;
        }
    }
    verdict(
        tables_equal && same == 100,
        format!("{} table files identical across two runs: {tables_equal}; run_episode reproducible {same}/100", ta.len()),
    )
}

/// The full default experiment: reused from `ADVGRASP_ACCEPTANCE_RUN` or
/// run from scratch. Returns its directory and the wall time if it ran here.
fn full_run(scratch: &Path) -> (PathBuf, Option<f64>) {
    let (dir, fresh) = match std::env::var_os("ADVGRASP_ACCEPTANCE_RUN") {
        Some(d) => (PathBuf::from(d), false),
        None => (scratch.join("full"), true),
    };
    let start = Instant::now();
    let mut exp = Experiment::new(ExperimentConfig::default(), &dir);
    exp.run(!fresh).unwrap();
    (dir, fresh.then(|| start.elapsed().as_secs_f64()))
}

fn seeds_passing(
    cfg: &ExperimentConfig,
    per_seed: impl Fn(u64) -> (bool, String),
) -> (usize, String) {
    let mut passed = 0;
    let mut details = Vec::new();
    for &s in &cfg.seeds {
        let (ok, d) = per_seed(s);
        passed += ok as usize;
        details.push(format!("seed {s}: {d}"));
    }
    (passed, details.join("; "))
}

fn rate(table: &EvalTable, label: &str) -> f64 {
    let k = table.columns.iter().position(|c| c.label == label).unwrap();
    let (s, t) = overall(table)[k];
    s as f64 / t as f64
}

fn adversary_efficacy(dir: &Path, cfg: &ExperimentConfig) -> Verdict {
    let (n, d) = seeds_passing(cfg, |s| {
        let p: Probes = read_json(&probes_path(dir, s)).unwrap();
        let r = p.adversary[0];
        let gap = r.trained - r.random;
        (
            gap >= 0.05,
            format!(
                "trained {:.3} vs random {:.3} on {}",
                r.trained, r.random, r.grasps
            ),
        )
    });
    verdict(n >= 2, format!("{n}/3 seeds; {d}"))
}

fn robustness_growth(dir: &Path, cfg: &ExperimentConfig) -> Verdict {
    let (n, d) = seeds_passing(cfg, |s| {
        let p: Probes = read_json(&probes_path(dir, s)).unwrap();
        let v: Vec<f64> = p.protagonist.iter().map(|r| r.best_response).collect();
        let ok = v.windows(2).all(|w| w[1] <= w[0]);
        let shown: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
        (ok, shown.join(" -> "))
    });
    verdict(n >= 2, format!("{n}/3 seeds non-increasing; {d}"))
}

fn headline(dir: &Path, cfg: &ExperimentConfig, wall: Option<f64>) -> Verdict {
    let (n, d) = seeds_passing(cfg, |s| {
        let t: EvalTable = read_json(&eval_path(dir, s, RegimeName::Low)).unwrap();
        let (shake, base) = (rate(&t, "shake-2"), rate(&t, "baseline"));
        (
            shake - base >= 0.05,
            format!(
                "shake {:.0}% vs baseline {:.0}%",
                100.0 * shake,
                100.0 * base
            ),
        )
    });
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let time = match wall {
        Some(w) => format!("full run {:.1} min on {cores} core(s)", w / 60.0),
        None => "full run reused, not timed".to_string(),
    };
    verdict(n >= 2, format!("{n}/3 seeds >= 5pp; {d}; {time}"))
}

fn high_force_sanity(dir: &Path, cfg: &ExperimentConfig) -> Verdict {
    let mut checked = 0;
    let mut worse = Vec::new();
    for &s in &cfg.seeds {
        let low: EvalTable = read_json(&eval_path(dir, s, RegimeName::Low)).unwrap();
        let high: EvalTable = read_json(&eval_path(dir, s, RegimeName::High)).unwrap();
        for (k, c) in low.columns.iter().enumerate() {
            checked += 1;
            let (l, h) = (overall(&low)[k].0, overall(&high)[k].0);
            if h < l {
                worse.push(format!("seed {s} {}: {h} < {l}", c.label));
            }
        }
    }
    let detail = if worse.is_empty() {
        format!("{checked} columns, high regime never below low")
    } else {
        format!("{checked} columns, high below low in {}", worse.join(", "))
    };
    verdict(worse.is_empty(), detail)
}

fn persistence(out: &Path, scratch: &Path, cfg: &ExperimentConfig) -> Verdict {
    let records = common::records(1000, 11);
    let p = scratch.join("fixture.ndjson");
    write_dataset(&records, &p).unwrap();
    let records_ok = read_dataset(&p).unwrap() == records;
    let net = NetworkParams::init(18, 12).unwrap();
    let c = scratch.join("fixture.ckpt");
    write_checkpoint(&net, &c).unwrap();
    let back = read_checkpoint(&c).unwrap();
    let model_ok = net.tensors.iter().zip(&back.tensors).all(|(a, b)| {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
    });

    // Interrupt twice, resume to completion, compare with the clean run.
    let dir = scratch.join("interrupted");
    let mut interruptions = 0;
    for budget in [3, 4] {
        let r = Experiment::new(cfg.clone(), &dir)
            .quiet()
            .interrupt_after(budget)
            .run(interruptions > 0);
        if matches!(r, Err(HarnessError::Interrupted { .. })) {
            interruptions += 1;
        }
    }
    let partial_metrics = dir.join("seed-1/init").join(METRICS).exists();
    Experiment::new(cfg.clone(), &dir)
        .quiet()
        .run(true)
        .unwrap();
    let resumed_ok = common::tables(&dir) == common::tables(out);
    verdict(
        records_ok && model_ok && interruptions == 2 && partial_metrics && resumed_ok,
        format!(
            "1000 records exact: {records_ok}; model bit-exact: {model_ok}; \
             {interruptions} interruptions, resumed tables identical: {resumed_ok}"
        ),
    )
}

fn main() {
    let scratch = tempfile::tempdir().unwrap();
    let tiny = common::tiny_config();
    let cfg_path = scratch.path().join("tiny.toml");
    std::fs::write(&cfg_path, tiny.to_toml()).unwrap();
    let (a, b) = (scratch.path().join("a"), scratch.path().join("b"));
    run_cli(&cfg_path, &a);
    run_cli(&cfg_path, &b);
    let (full, wall) = full_run(scratch.path());
    let full_cfg = ExperimentConfig::load(&full.join("config.toml")).unwrap();

    let results = [
        (1, gradient_correctness()),
        (2, selection_oracle()),
        (3, physics_oracles()),
        (4, label_replay(&a, &tiny, Some(&full))),
        (5, determinism(&a, &b)),
        (6, adversary_efficacy(&full, &full_cfg)),
        (7, robustness_growth(&full, &full_cfg)),
        (8, headline(&full, &full_cfg, wall)),
        (9, high_force_sanity(&full, &full_cfg)),
        (10, persistence(&a, scratch.path(), &tiny)),
    ];
    for (n, v) in &results {
        println!(
            "criterion {n:>2}: {} | {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    // Criteria 6 to 8 are statistical outcomes of the desk-scale experiment
    // and are reported rather than enforced; the rest must hold.
    let hard: Vec<usize> = results
        .iter()
        .filter(|(n, v)| !v.pass && !(6..=8).contains(n))
        .map(|(n, _)| *n)
        .collect();
    if !hard.is_empty() {
        eprintln!("failed criteria {hard:?}");
        std::process::exit(1);
    }
}
