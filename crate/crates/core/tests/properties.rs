//! Property tests for the crate-wide invariants.

use proptest::prelude::*;

use prospector_core::datamodel::{
    load_dataset, save_dataset, DatasetFormat, ExampleId, InstructionExample, PromptTemplate,
};
use prospector_core::embedder::{embed, HashingEmbedder};
use prospector_core::prospector::{golden_score, rank_and_select, ZeroShotVector};
use prospector_core::scorer::{BigramLm, ConditionalScoreRequest, ScorerBackend};
use prospector_core::{Direction, ScoreReport};

fn text() -> impl Strategy<Value = String> {
    // arbitrary text minus template braces
    "[^{}]{0,40}"
}

fn record() -> impl Strategy<Value = (String, Option<String>, String)> {
    (text(), proptest::option::of(text()), "[^{}]{1,40}")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dataset_round_trip_preserves_ids_and_texts(
        records in proptest::collection::vec(record(), 1..16),
        as_jsonl in any::<bool>(),
    ) {
        let examples: Vec<InstructionExample> = records
            .into_iter()
            .enumerate()
            .map(|(i, (instruction, input, output))| InstructionExample {
                id: ExampleId(i as u64),
                instruction,
                input: input.filter(|s| !s.is_empty()),
                output,
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let format = if as_jsonl { DatasetFormat::Jsonl } else { DatasetFormat::AlpacaJson };
        let path = dir.path().join("data");
        save_dataset(&path, format, &examples).unwrap();
        let (reloaded, report) = load_dataset(&path, format).unwrap();
        prop_assert_eq!(&reloaded, &examples);
        prop_assert_eq!(report.dropped_empty_output, 0);
        // and ids depend on order only: reloading is stable
        save_dataset(&path, format, &reloaded).unwrap();
        let (again, _) = load_dataset(&path, format).unwrap();
        prop_assert_eq!(&again, &examples);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rendering_is_a_pure_function(
        instruction in text(),
        input in proptest::option::of("[^{}]{1,20}"),
        output in "[^{}]{1,20}",
    ) {
        let example = InstructionExample {
            id: ExampleId(0),
            instruction,
            input,
            output,
        };
        let template = PromptTemplate::default();
        let a = template.demonstration(&example).unwrap();
        let b = template.demonstration(&example).unwrap();
        prop_assert_eq!(a.as_bytes(), b.as_bytes());
    }

    #[test]
    fn bigram_logprobs_are_nonpositive_and_prefix_consistent(
        corpus in proptest::collection::vec(any::<u8>(), 0..200),
        context in "[a-z ]{0,16}",
        continuation in "[a-z ]{1,24}",
        split in any::<prop::sample::Index>(),
    ) {
        let lm = BigramLm::train(&corpus);
        let whole = lm
            .score(&ConditionalScoreRequest {
                context: context.clone(),
                continuation: continuation.clone(),
            })
            .unwrap();
        prop_assert!(whole.token_logprobs.iter().all(|lp| *lp <= 0.0 && lp.is_finite()));
        prop_assert_eq!(whole.token_count as usize, continuation.len());

        // scoring "xy" equals scoring "x" then "y" with "x" appended
        let at = if continuation.len() == 1 {
            1
        } else {
            split.index(continuation.len() - 1) + 1
        };
        let (head, tail) = continuation.split_at(at);
        let mut stepped = lm
            .score(&ConditionalScoreRequest {
                context: context.clone(),
                continuation: head.to_string(),
            })
            .unwrap()
            .token_logprobs;
        if !tail.is_empty() {
            stepped.extend(
                lm.score(&ConditionalScoreRequest {
                    context: format!("{context}{head}"),
                    continuation: tail.to_string(),
                })
                .unwrap()
                .token_logprobs,
            );
        }
        prop_assert_eq!(whole.token_logprobs, stepped);
    }

    #[test]
    fn embeddings_are_unit_norm_and_order_preserving(
        texts in proptest::collection::vec("[^{}]{0,30}", 1..12),
    ) {
        let backend = HashingEmbedder::new(64);
        let matrix = embed(&backend, &texts).unwrap();
        prop_assert_eq!(matrix.len(), texts.len());
        for (i, (id, row)) in matrix.rows.iter().enumerate() {
            prop_assert_eq!(*id, ExampleId(i as u64));
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-9);
        }
        // identical inputs embed identically wherever they appear
        for (i, a) in texts.iter().enumerate() {
            for (j, b) in texts.iter().enumerate() {
                if a == b {
                    prop_assert_eq!(&matrix.rows[i].1, &matrix.rows[j].1);
                }
            }
        }
    }

    #[test]
    fn golden_score_respects_monotone_dominance(
        zero in proptest::collection::vec(-100.0f64..0.0, 1..40),
        bumps in proptest::collection::vec(0.0f64..5.0, 1..40),
    ) {
        let m = zero.len().min(bumps.len());
        let zero = &zero[..m];
        let bumps = &bumps[..m];
        let zero_vector = ZeroShotVector {
            scores: zero.to_vec(),
            task_set_fingerprint: "t".into(),
            backend_fingerprint: "b".into(),
        };
        let v: Vec<f64> = zero.iter().map(|z| z - 1.0).collect();
        let u: Vec<f64> = v.iter().zip(bumps).map(|(x, b)| x + b).collect();
        let gs_v = golden_score(ExampleId(0), v, &zero_vector).unwrap().golden_score;
        let gs_u = golden_score(ExampleId(1), u, &zero_vector).unwrap().golden_score;
        prop_assert!(gs_u >= gs_v);
    }

    #[test]
    fn selection_size_follows_the_floor_rule(
        n in 1..300usize,
        fraction_pct in 1..=100u32,
    ) {
        let reports: Vec<ScoreReport> = (0..n as u64)
            .map(|i| ScoreReport {
                example_id: ExampleId(i),
                golden_score: (i % 7) as f64 / 7.0,
                wins: (i % 7) as u32,
                m: 7,
                one_shot_scores: vec![0.0; 7],
            })
            .collect();
        let fraction = fraction_pct as f64 / 100.0;
        let selection = rank_and_select(&reports, fraction, Direction::Top).unwrap();
        let expected = ((fraction_pct as usize * n) / 100).max(1);
        prop_assert_eq!(selection.example_ids.len(), expected);
        // ids are unique
        let mut ids: Vec<_> = selection.example_ids.clone();
        ids.sort_unstable();
        ids.dedup();
        prop_assert_eq!(ids.len(), selection.example_ids.len());
    }
}
