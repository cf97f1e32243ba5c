mod common;

use std::fs;

use advgrasp::artifacts::{read_checkpoint, write_checkpoint};
use advgrasp::dataset::{read_dataset, record_to_json, write_dataset};
use advgrasp::HarnessError;
use advgrasp_core::neural::NetworkParams;

#[test]
fn thousand_records_round_trip_field_for_field() {
    let records = common::records(1000, 3);
    assert_eq!(records.len(), 1000);
    assert!(records
        .iter()
        .any(|r| r.adversary.is_some_and(|a| a.success)));
    assert!(records.iter().any(|r| !r.grasp_success));
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.ndjson");
    write_dataset(&records, &p).unwrap();
    let back = read_dataset(&p).unwrap();
    assert_eq!(back, records);
    for (a, b) in records.iter().zip(&back) {
        assert_eq!(a.margin.to_bits(), b.margin.to_bits());
        assert!(a
            .grasp_patch
            .pixels
            .iter()
            .zip(&b.grasp_patch.pixels)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn truncated_final_line_names_the_line() {
    let records = common::records(5, 4);
    let mut text: String = records.iter().map(|r| record_to_json(r) + "\n").collect();
    text.truncate(text.len() - 40);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.ndjson");
    fs::write(&p, text).unwrap();
    match read_dataset(&p) {
        Err(HarnessError::Dataset { line, .. }) => assert_eq!(line, 5),
        other => panic!("{other:?}"),
    }
}

#[test]
fn empty_file_is_an_empty_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.ndjson");
    fs::write(&p, "").unwrap();
    assert!(read_dataset(&p).unwrap().is_empty());
}

#[test]
fn full_models_round_trip_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    for (outputs, seed) in [(18, 1), (15, 2), (36, 3)] {
        let net = NetworkParams::init(outputs, seed).unwrap();
        let p = dir.path().join(format!("{seed}.ckpt"));
        write_checkpoint(&net, &p).unwrap();
        let back = read_checkpoint(&p).unwrap();
        assert_eq!(back.tensors.len(), net.tensors.len());
        for (a, b) in net.tensors.iter().zip(&back.tensors) {
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}

mod properties {
    use advgrasp::dataset::{record_from_json, record_to_json};
    use advgrasp::experiment::{EvalColumn, EvalObject, EvalTable};
    use advgrasp::report::overall;
    use advgrasp_core::scene::PATCH_LEN;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn any_record_line_round_trips(
            pick in 0usize..40,
            margin in 0.0f64..=1.0,
            scene_seed: u64,
            iteration: u32,
            config_id: u64,
            pixel in 0usize..PATCH_LEN,
            value: f32,
        ) {
            let mut r = super::common::records(40, 9)[pick].clone();
            r.scene_seed = scene_seed;
            r.iteration = iteration;
            r.config_id = config_id;
            if r.grasp_success {
                r.margin = margin;
            }
            r.grasp_patch.pixels[pixel] = value;
            let back = record_from_json(&record_to_json(&r)).unwrap();
            prop_assert_eq!(back.grasp_patch.pixels[pixel].to_bits(), value.to_bits());
            prop_assert_eq!(back.margin.to_bits(), r.margin.to_bits());
            prop_assert_eq!((back.scene_seed, back.iteration, back.config_id), (scene_seed, iteration, config_id));
        }

        #[test]
        fn overall_is_column_sum_over_all_tries(
            cols in prop::collection::vec(prop::collection::vec(0usize..=10, 10), 1..7),
        ) {
            let table = EvalTable {
                regime: "low".into(),
                tries: 10,
                objects: (0..10).map(|k| EvalObject { seed: k, difficulty: "easy".into() }).collect(),
                columns: cols
                    .iter()
                    .enumerate()
                    .map(|(i, s)| EvalColumn {
                        label: format!("shake-{i}"),
                        arm: "shake".into(),
                        iteration: i,
                        successes: s.clone(),
                    })
                    .collect(),
            };
            for (c, (succ, tries)) in cols.iter().zip(overall(&table)) {
                prop_assert_eq!(succ, c.iter().sum::<usize>());
                prop_assert_eq!(tries, 100);
            }
        }
    }
}
