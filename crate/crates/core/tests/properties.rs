//! Property tests for the cross-module invariants: ingestion idempotence,
//! count additivity, PMF/estimator dominance, ECE structure, and margin
//! profile identities.

use proptest::prelude::*;
use sem_ece_core::calibration::{binned_ece_pairs, BinningScheme};
use sem_ece_core::data_model::{count_summary, export_records, ingest_from_reader, QuestionRecord, SemanticSample};
use sem_ece_core::estimators::{
    c1_confidence, empirical_pmf, margin_profile, mode_select, parse_verbalized,
};
use std::io::BufReader;

fn arb_record() -> impl Strategy<Value = QuestionRecord> {
    // 1..=5 classes, 1..=40 samples, arbitrary grades/verbalized text.
    (1usize..=5).prop_flat_map(|k| {
        let class_correct = proptest::collection::vec(any::<bool>(), k);
        let samples = proptest::collection::vec(
            (
                0usize..k,
                proptest::option::of(any::<bool>()),
                proptest::option::of("[ -~]{0,30}"),
            ),
            1..=40,
        );
        (class_correct, samples, "[a-z0-9]{1,12}").prop_map(move |(correct, samples, qid)| {
            // Keep only classes that actually appear, re-indexed densely,
            // matching the ingestion invariant.
            let mut map = vec![usize::MAX; correct.len()];
            let mut labels = Vec::new();
            let mut cc = Vec::new();
            let samples: Vec<SemanticSample> = samples
                .into_iter()
                .map(|(c, graded, verbalized)| {
                    if map[c] == usize::MAX {
                        map[c] = labels.len();
                        labels.push(format!("class-{c}"));
                        cc.push(correct[c]);
                    }
                    SemanticSample {
                        class_id: map[c],
                        graded_correct: graded,
                        verbalized_raw: verbalized,
                    }
                })
                .collect();
            QuestionRecord {
                question_id: qid,
                samples,
                class_correct: cc,
                class_labels: labels,
                meta: Default::default(),
            }
        })
    })
}

proptest! {
    #[test]
    fn ingest_export_roundtrip_is_idempotent(records in proptest::collection::vec(arb_record(), 1..6)) {
        // Unique ids.
        let mut records = records;
        for (i, r) in records.iter_mut().enumerate() {
            r.question_id = format!("q{i}-{}", r.question_id);
        }
        let text = export_records(&records).unwrap();
        let once = ingest_from_reader(BufReader::new(text.as_bytes()), true).unwrap().records;
        let text2 = export_records(&once).unwrap();
        let twice = ingest_from_reader(BufReader::new(text2.as_bytes()), true).unwrap().records;
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn partition_counts_are_additive(record in arb_record(), split in any::<u64>()) {
        let pool = record.pool_size();
        let mask: Vec<bool> = (0..pool).map(|i| (split >> (i % 64)) & 1 == 1).collect();
        let left: Vec<usize> = (0..pool).filter(|&i| mask[i]).collect();
        let right: Vec<usize> = (0..pool).filter(|&i| !mask[i]).collect();
        if left.is_empty() || right.is_empty() {
            return Ok(());
        }
        let full = count_summary(&record, None).unwrap();
        let a = count_summary(&record, Some(&left)).unwrap();
        let b = count_summary(&record, Some(&right)).unwrap();
        for k in 0..record.k_classes() {
            prop_assert_eq!(full.counts[k], a.counts[k] + b.counts[k]);
        }
        prop_assert_eq!(full.n_total, a.n_total + b.n_total);
    }

    #[test]
    fn pmf_is_valid_and_c1_dominates(record in arb_record()) {
        let counts = count_summary(&record, None).unwrap();
        let pmf = empirical_pmf(&counts, record.k_classes());
        let sum: f64 = pmf.probs.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(pmf.probs.iter().all(|&p| (0.0..=1.0).contains(&p)));
        let mode = mode_select(&pmf);
        let c1 = c1_confidence(&record, None).unwrap();
        prop_assert_eq!(c1.deployed_class, mode);
        for &p in &pmf.probs {
            prop_assert!(c1.confidence >= p);
        }
        prop_assert!(c1.confidence >= 1.0 / record.k_classes() as f64);
    }

    #[test]
    fn ece_is_bounded_and_permutation_invariant(
        pairs in proptest::collection::vec((0.0f64..=1.0, any::<bool>()), 1..80),
        perm_seed in any::<u64>(),
    ) {
        let scheme = BinningScheme::default();
        let rep = binned_ece_pairs(&pairs, &scheme).unwrap();
        prop_assert!((0.0..=1.0).contains(&rep.ece));
        let mean_abs: f64 = pairs.iter().map(|&(c, a)| (a as u8 as f64 - c).abs()).sum::<f64>() / pairs.len() as f64;
        prop_assert!(rep.ece <= mean_abs + 1e-12);
        let counts: usize = rep.per_bin.iter().map(|b| b.count).sum();
        prop_assert_eq!(counts, pairs.len());
        let sum_abs: f64 = rep.per_bin.iter().map(|b| b.signed_gap_mass.abs()).sum();
        prop_assert!((rep.ece - sum_abs).abs() < 1e-12);

        let mut shuffled = pairs.clone();
        let mut state = perm_seed | 1;
        for i in (1..shuffled.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % (i + 1);
            shuffled.swap(i, j);
        }
        let rep2 = binned_ece_pairs(&shuffled, &scheme).unwrap();
        prop_assert!((rep.ece - rep2.ece).abs() < 1e-12);
    }

    #[test]
    fn margin_profile_identities(probs in proptest::collection::vec(0.01f64..1.0, 1..6), n_ref in 1usize..500) {
        let total: f64 = probs.iter().sum();
        let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
        let prof = margin_profile(&probs, n_ref);
        prop_assert!(prof.delta <= prof.p_top2 + 1e-12);
        prop_assert!((prof.m_std - prof.delta / (prof.p_top2 / n_ref as f64).sqrt()).abs() < 1e-12);
        prop_assert!((prof.lambda_std - prof.m_std / 2.0).abs() < 1e-12);
        prop_assert!(prof.delta >= 0.0);
    }

    #[test]
    fn verbalized_parse_stays_in_unit_interval(text in "[ -~]{0,60}") {
        if let Some(v) = parse_verbalized(&text) {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
