use advgrasp_core::neural::{
    backward, bce_loss, compare_gradients, decode_checkpoint, encode_checkpoint, grad_check,
    rmsprop_step, Differentiable, LinearProbe, NetworkParams, OptHyper, OptState, TrainingSample,
};
use advgrasp_core::rng;
use advgrasp_core::scene::{Patch, PATCH_LEN, PATCH_SIZE};
use proptest::prelude::*;
use rand::Rng;

fn random_patch(r: &mut rng::Rng) -> Patch {
    let pixels = (0..PATCH_LEN).map(|_| r.gen::<f32>()).collect();
    Patch::new(pixels, Default::default(), 0.0).unwrap()
}

fn random_batch(n_outputs: usize, len: usize, seed: u64) -> Vec<TrainingSample> {
    let mut r = rng::seeded(seed);
    (0..len)
        .map(|_| TrainingSample {
            patch: random_patch(&mut r),
            target_index: r.gen_range(0..n_outputs),
            target_value: if r.gen_bool(0.3) {
                r.gen()
            } else {
                r.gen_range(0..2) as f64
            },
        })
        .collect()
}

/// Left or right half bright, labelled by side.
fn sided_set(len: usize, seed: u64) -> Vec<TrainingSample> {
    let mut r = rng::seeded(seed);
    (0..len)
        .map(|i| {
            let left = i % 2 == 0;
            let pixels = (0..PATCH_LEN)
                .map(|p| {
                    let col = p % PATCH_SIZE;
                    let lit = (col < PATCH_SIZE / 2) == left;
                    let base = if lit { 0.7 } else { 0.1 };
                    base + 0.2 * r.gen::<f32>()
                })
                .collect();
            TrainingSample {
                patch: Patch::new(pixels, Default::default(), 0.0).unwrap(),
                target_index: 0,
                target_value: if left { 1.0 } else { 0.0 },
            }
        })
        .collect()
}

use advgrasp_core::math::sigmoid;

#[test]
fn init_is_seeded_with_zero_biases() {
    let a = NetworkParams::init(18, 5).unwrap();
    let b = NetworkParams::init(18, 5).unwrap();
    let c = NetworkParams::init(18, 6).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    for (spec, t) in a.specs().iter().zip(&a.tensors) {
        if spec.is_bias {
            assert!(t.iter().all(|&v| v == 0.0));
        } else {
            let limit = (6.0 / (spec.fan_in + spec.fan_out) as f64).sqrt() as f32;
            assert!(t.iter().all(|v| v.abs() <= limit));
        }
    }
}

#[test]
fn init_weights_are_centred() {
    let p = NetworkParams::init(36, 11).unwrap();
    let w = &p.tensors[4];
    assert!(w.len() >= 10_000);
    let n = w.len() as f64;
    let mean = w.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = w.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() < 3.0 * var.sqrt() / n.sqrt());
}

#[test]
fn zero_network_outputs_one_half() {
    let p = NetworkParams::zeros(15);
    let mut r = rng::seeded(1);
    let out = p.forward(&random_patch(&mut r).pixels);
    assert_eq!(out.len(), 15);
    assert!(out.iter().all(|&v| v == 0.5));
}

#[test]
fn final_bias_only_moves_its_own_output() {
    let mut p = NetworkParams::init(18, 3).unwrap();
    let mut r = rng::seeded(2);
    let patch = random_patch(&mut r);
    let before = p.logits(&patch.pixels);
    p.tensors[7][4] += 1.5;
    let after = p.forward(&patch.pixels);
    for k in 0..18 {
        if k == 4 {
            assert!((after[k] - sigmoid(before[k] + 1.5)).abs() < 1e-12);
        } else {
            assert_eq!(after[k], sigmoid(before[k]));
        }
    }
}

#[test]
fn bce_hand_values() {
    assert!((bce_loss(0.5, 1.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-6);
    let soft = bce_loss(0.6, 0.6).unwrap();
    assert!((soft - 0.673_012).abs() < 1e-6);
    assert!(bce_loss(0.5, 0.6).unwrap() > soft);
    assert!(bce_loss(1.0 - 1e-12, 1.0).unwrap() < 1e-11);
}

#[test]
fn single_sample_bias_gradient_is_residual() {
    let p = NetworkParams::init(18, 9).unwrap();
    let batch = random_batch(18, 1, 4);
    let pred = p.forward(&batch[0].patch.pixels)[batch[0].target_index];
    let (g, _) = backward(&p, &batch).unwrap();
    assert_eq!(
        g.tensors[7][batch[0].target_index],
        pred - batch[0].target_value
    );
}

#[test]
fn matching_targets_give_zero_bias_gradient() {
    let p = NetworkParams::init(15, 2).unwrap();
    let mut batch = random_batch(15, 6, 8);
    for s in &mut batch {
        s.target_value = p.forward(&s.patch.pixels)[s.target_index];
    }
    let (g, _) = backward(&p, &batch).unwrap();
    for s in &batch {
        assert!(g.tensors[7][s.target_index].abs() < 1e-15);
    }
}

#[test]
fn masked_loss_leaves_other_heads_untouched() {
    let p = NetworkParams::init(36, 4).unwrap();
    let batch = random_batch(36, 1, 12);
    let k = batch[0].target_index;
    let (g, _) = backward(&p, &batch).unwrap();
    for row in 0..36 {
        let touched = g.tensors[6][row * 128..(row + 1) * 128]
            .iter()
            .any(|&v| v != 0.0)
            || g.tensors[7][row] != 0.0;
        assert_eq!(touched, row == k, "row {row}");
    }
}

#[test]
fn network_gradient_matches_finite_differences() {
    for net in 0..2u64 {
        for b in 0..2u64 {
            let mut p = NetworkParams::init(18, 100 + net).unwrap();
            let batch = random_batch(18, 8, 200 + b);
            let err = grad_check(&mut p, &batch, 300 + net * 7 + b).unwrap();
            assert!(err <= 1e-3, "net {net} batch {b}: {err}");
        }
    }
}

#[test]
fn corrupted_dense_gradient_is_detected() {
    let mut p = NetworkParams::init(18, 21).unwrap();
    let batch = random_batch(18, 8, 22);
    let (mut g, _) = backward(&p, &batch).unwrap();
    for v in &mut g.tensors[4] {
        *v *= 2.0;
    }
    let err = compare_gradients(&mut p, &batch, &g.flatten(), 23).unwrap();
    assert!(err >= 0.1, "{err}");
}

#[test]
fn linear_probe_gradient_is_near_exact() {
    let mut probe = LinearProbe::random(18, 31);
    let batch = random_batch(18, 16, 32);
    let err = grad_check(&mut probe, &batch, 33).unwrap();
    assert!(err <= 1e-6, "{err}");
    assert!(probe.activation_pattern(&batch).is_empty());
}

#[test]
fn rmsprop_hand_step() {
    let mut p = NetworkParams::zeros(15);
    p.tensors[7][0] = 1.0;
    let mut opt = OptState::new(&p, OptHyper::default());
    let mut g = advgrasp_core::neural::Gradients::zeros_like(&p);
    g.tensors[7][0] = 2.0;
    rmsprop_step(&mut p, &g, &mut opt).unwrap();
    assert!((opt.cache[7][0] - 0.4).abs() < 1e-12);
    let expected = 1.0 - 0.001 * 2.0 / (0.4f64.sqrt() + 1e-8);
    assert!((p.tensors[7][0] as f64 - expected).abs() < 1e-7);
    assert!((expected - 0.996_838).abs() < 1e-6);
}

fn train_sided(seed: u64, steps: usize) -> (NetworkParams, f64) {
    let data = sided_set(256, seed);
    let mut p = NetworkParams::init(18, seed).unwrap();
    let mut opt = OptState::new(&p, OptHyper::default());
    for step in 0..steps {
        let start = (step * 64) % data.len();
        let (g, _) = backward(&p, &data[start..start + 64]).unwrap();
        rmsprop_step(&mut p, &g, &mut opt).unwrap();
    }
    let correct = data
        .iter()
        .filter(|s| (p.forward(&s.patch.pixels)[0] > 0.5) == (s.target_value > 0.5))
        .count();
    (p, correct as f64 / data.len() as f64)
}

#[test]
fn separable_set_is_learned_deterministically() {
    let (a, acc) = train_sided(41, 200);
    assert!(acc >= 0.95, "{acc}");
    let (b, _) = train_sided(41, 200);
    assert_eq!(a, b);
}

#[test]
fn checkpoint_round_trip_full_model() {
    for n in [15, 18, 36] {
        let mut p = NetworkParams::init(n, n as u64).unwrap();
        p.tensors[1][3] = -0.0;
        p.tensors[7][0] = f32::MIN_POSITIVE / 4.0;
        let back = decode_checkpoint(&encode_checkpoint(&p)).unwrap();
        for (x, y) in p
            .tensors
            .iter()
            .flatten()
            .zip(back.tensors.iter().flatten())
        {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(back.seed, p.seed);
        assert_eq!(back.n_outputs, n);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn outputs_stay_finite_and_open(seed in any::<u64>(), scale in 0.5f32..10.0) {
        let mut p = NetworkParams::init(18, seed).unwrap();
        let mut r = rng::seeded(seed ^ 1);
        for t in &mut p.tensors {
            for v in t.iter_mut() {
                *v = r.gen_range(-scale..=scale);
            }
        }
        let batch = random_batch(18, 2, seed);
        let out = p.forward(&batch[0].patch.pixels);
        prop_assert!(out.iter().all(|v| v.is_finite() && *v >= 0.0 && *v <= 1.0));
        let (g, loss) = backward(&p, &batch).unwrap();
        prop_assert!(loss.is_finite());
        prop_assert!(g.flatten().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn small_net_outputs_strictly_inside(seed in any::<u64>()) {
        let p = NetworkParams::init(15, seed).unwrap();
        let mut r = rng::seeded(seed);
        let out = p.forward(&random_patch(&mut r).pixels);
        prop_assert!(out.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn rmsprop_cache_stays_nonnegative(seed in any::<u64>()) {
        let mut p = NetworkParams::init(15, seed).unwrap();
        let mut opt = OptState::new(&p, OptHyper::default());
        let batch = random_batch(15, 3, seed);
        for _ in 0..2 {
            let (g, _) = backward(&p, &batch).unwrap();
            rmsprop_step(&mut p, &g, &mut opt).unwrap();
        }
        prop_assert!(opt.cache.iter().flatten().all(|&c| c >= 0.0));
    }
}
