//! Property tests for the selection heuristics: alias behavior under row
//! duplication, score monotonicity, hard/soft coincidence, and determinism.

use passlab_core::env::{CodeId, Mode, SuiteId};
use passlab_core::select::{score, score_class_level, ExecutionMatrix, Heuristic, ScoreConfig};
use passlab_core::stream::substream;
use proptest::prelude::*;
use rand::Rng;

/// Random binary execution matrix: n codes, m suites, `cases` outputs each.
fn random_matrix(seed: u64, n: usize, m: usize, cases: usize) -> ExecutionMatrix {
    let mut rng = substream(seed, &[0x3e1ec7]);
    let outputs: Vec<Vec<Vec<u32>>> = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| (0..cases).map(|_| rng.random_range(0..2u32)).collect())
                .collect()
        })
        .collect();
    ExecutionMatrix::from_parts(
        Mode::Binary,
        (0..n as u64).map(CodeId).collect(),
        (0..m as u64).map(SuiteId).collect(),
        outputs,
    )
    .unwrap()
}

const AGREEMENT_HEURISTICS: [Heuristic; 4] = [
    Heuristic::MbrExecHard,
    Heuristic::MbrExecSoft,
    Heuristic::CodeTHard,
    Heuristic::CodeTSoft,
];

const BINARY_HEURISTICS: [Heuristic; 6] = [
    Heuristic::MbrExecHard,
    Heuristic::MbrExecSoft,
    Heuristic::MaxPassHard,
    Heuristic::MaxPassSoft,
    Heuristic::CodeTHard,
    Heuristic::CodeTSoft,
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn duplication_weakly_increases_the_duplicated_class(
        seed in 0u64..1_000_000,
        n in 2usize..8,
        m in 1usize..5,
        cases in 1usize..4,
        dup in 0usize..8,
    ) {
        let matrix = random_matrix(seed, n, m, cases);
        let dup = dup % n;
        let class_of = matrix.behavior_classes();
        let bigger = matrix.duplicate_row(dup).unwrap();
        let cfg = ScoreConfig::default();
        for h in AGREEMENT_HEURISTICS {
            let before = score(&matrix, h, &cfg).unwrap();
            let after = score(&bigger, h, &cfg).unwrap();
            for i in 0..n {
                if class_of[i] == class_of[dup] {
                    prop_assert!(
                        after.scores[i] >= before.scores[i] - 1e-12,
                        "{h}: row {i} dropped from {} to {}",
                        before.scores[i],
                        after.scores[i]
                    );
                }
            }
        }
    }

    #[test]
    fn duplicating_the_winner_keeps_its_class_on_top(
        seed in 0u64..1_000_000,
        n in 2usize..8,
        m in 1usize..5,
        cases in 1usize..4,
    ) {
        let matrix = random_matrix(seed, n, m, cases);
        let cfg = ScoreConfig::default();
        for h in BINARY_HEURISTICS {
            let before = score(&matrix, h, &cfg).unwrap();
            let winner = before.chosen[0];
            let bigger = matrix.duplicate_row(winner).unwrap();
            let after = score(&bigger, h, &cfg).unwrap();
            prop_assert!(
                bigger.full_agreement(after.chosen[0], winner),
                "{h}: top class changed after duplicating the winner"
            );
        }
    }

    #[test]
    fn maxpass_argmax_class_survives_any_duplication(
        seed in 0u64..1_000_000,
        n in 2usize..8,
        m in 1usize..5,
        cases in 1usize..4,
        dup in 0usize..8,
    ) {
        let matrix = random_matrix(seed, n, m, cases);
        let dup = dup % n;
        let bigger = matrix.duplicate_row(dup).unwrap();
        let cfg = ScoreConfig::default();
        for h in [Heuristic::MaxPassHard, Heuristic::MaxPassSoft] {
            let before = score(&matrix, h, &cfg).unwrap();
            let after = score(&bigger, h, &cfg).unwrap();
            prop_assert_eq!(before.chosen[0], after.chosen[0], "{}", h);
        }
    }

    #[test]
    fn class_level_scores_are_alias_invariant(
        seed in 0u64..1_000_000,
        n in 2usize..8,
        m in 1usize..5,
        cases in 1usize..4,
        dup in 0usize..8,
    ) {
        let matrix = random_matrix(seed, n, m, cases);
        let dup = dup % n;
        let bigger = matrix.duplicate_row(dup).unwrap();
        let cfg = ScoreConfig::default();
        for h in BINARY_HEURISTICS {
            let base = score_class_level(&matrix, h, &cfg).unwrap();
            let aliased = score_class_level(&bigger, h, &cfg).unwrap();
            prop_assert_eq!(&base.scores, &aliased.scores, "{}", h);
            prop_assert_eq!(&base.chosen, &aliased.chosen, "{}", h);
        }
    }

    #[test]
    fn maxpass_soft_is_monotone_in_pass_bits(
        seed in 0u64..1_000_000,
        n in 2usize..8,
        m in 1usize..5,
        cases in 2usize..5,
    ) {
        let matrix = random_matrix(seed, n, m, cases);
        let cfg = ScoreConfig::default();
        let before = score(&matrix, Heuristic::MaxPassSoft, &cfg).unwrap();

        // Flip the first failing bit of some row to a pass.
        let mut rng = substream(seed, &[0xf11b]);
        let i = rng.random_range(0..n);
        let mut found = None;
        'outer: for j in 0..m {
            for (k, &b) in matrix.outputs(i, j).iter().enumerate() {
                if b == 0 {
                    found = Some((j, k));
                    break 'outer;
                }
            }
        }
        if let Some((j, k)) = found {
            let mut outputs: Vec<Vec<Vec<u32>>> = (0..n)
                .map(|a| (0..m).map(|b| matrix.outputs(a, b).to_vec()).collect())
                .collect();
            outputs[i][j][k] = 1;
            let raised = ExecutionMatrix::from_parts(
                Mode::Binary,
                matrix.code_ids().to_vec(),
                matrix.suite_ids().to_vec(),
                outputs,
            )
            .unwrap();
            let after = score(&raised, Heuristic::MaxPassSoft, &cfg).unwrap();
            prop_assert!(after.scores[i] >= before.scores[i]);
        }
    }

    #[test]
    fn hard_and_soft_coincide_on_single_case_suites(
        seed in 0u64..1_000_000,
        n in 2usize..8,
        m in 2usize..5,
    ) {
        // Single-case suites: every pass fraction is 0 or 1, so the MaxPass
        // pair coincides for any m.
        let matrix = random_matrix(seed, n, m, 1);
        let cfg = ScoreConfig::default();
        let hard = score(&matrix, Heuristic::MaxPassHard, &cfg).unwrap();
        let soft = score(&matrix, Heuristic::MaxPassSoft, &cfg).unwrap();
        prop_assert_eq!(&hard.scores, &soft.scores);
        prop_assert_eq!(&hard.chosen, &soft.chosen);
    }

    #[test]
    fn hard_and_soft_mbr_coincide_at_single_suite(
        seed in 0u64..1_000_000,
        n in 2usize..8,
    ) {
        // One single-case suite: per-suite agreement is binary and equals
        // the all-suites indicator.
        let matrix = random_matrix(seed, n, 1, 1);
        let cfg = ScoreConfig::default();
        let hard = score(&matrix, Heuristic::MbrExecHard, &cfg).unwrap();
        let soft = score(&matrix, Heuristic::MbrExecSoft, &cfg).unwrap();
        prop_assert_eq!(&hard.scores, &soft.scores);
    }

    #[test]
    fn scoring_is_deterministic_including_random(
        seed in 0u64..1_000_000,
        n in 2usize..8,
        score_seed in 0u64..1000,
    ) {
        let matrix = random_matrix(seed, n, 3, 2);
        let cfg = ScoreConfig { seed: score_seed };
        for h in [Heuristic::Random, Heuristic::MaxPassSoft, Heuristic::CodeTSoft] {
            let a = score(&matrix, h, &cfg).unwrap();
            let b = score(&matrix, h, &cfg).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
