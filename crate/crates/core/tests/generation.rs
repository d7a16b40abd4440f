use proptest::prelude::*;
use spatial_gym_core::difficulty::{difficulty_level, difficulty_score, features, DifficultyFeatures, DifficultyModel};
use spatial_gym_core::generator::{batch_seed, generate_puzzle, AttemptOutcome, GenConfig, GenError};
use spatial_gym_core::{enumerate_solutions, verify, SearchBudget};

#[test]
fn emitted_puzzles_are_certified_and_reproducible() {
    for i in 0..25 {
        let config = GenConfig { seed: batch_seed(99, i), ..GenConfig::default() };
        let g = generate_puzzle(&config).unwrap();
        assert!(g.solutions.exhausted);
        assert!((1..=50).contains(&g.solutions.len()));
        assert!((1.0..=5.0).contains(&g.score));
        assert_eq!(g.level, difficulty_level(g.score));
        assert_eq!(g.puzzle.difficulty_score(), Some(g.score));
        assert_eq!(features(&g.puzzle), g.features);
        for s in &g.solutions.solutions {
            assert!(verify(&g.puzzle, s).satisfied);
        }
        let again = enumerate_solutions(&g.puzzle, SearchBudget::default());
        assert_eq!(again.solutions, g.solutions.solutions);
        let twin = generate_puzzle(&config).unwrap();
        assert_eq!(twin.puzzle, g.puzzle);
    }
}

#[test]
fn dense_six_by_six_decreases_density() {
    let mut decreased = 0;
    for seed in 0..5 {
        let config = GenConfig {
            cols_range: (6, 6),
            rows_range: (6, 6),
            initial_density: 1.0,
            seed,
            ..GenConfig::default()
        };
        let g = generate_puzzle(&config).unwrap();
        let trace = &g.trace;
        if trace.iter().any(|a| a.outcome == AttemptOutcome::NoSolution) {
            decreased += 1;
            let k = trace.iter().position(|a| a.outcome == AttemptOutcome::NoSolution).unwrap();
            if let Some(next) = trace.get(k + 1) {
                assert!(next.density < trace[k].density);
            }
        }
    }
    assert!(decreased >= 3, "decrease branch taken in {decreased}/5 runs");
}

#[test]
fn exhausted_attempts_report_error() {
    let config = GenConfig { max_attempts: 1, solution_cap: 1, cols_range: (6, 6), rows_range: (6, 6), initial_density: 0.05, ..GenConfig::default() };
    assert_eq!(generate_puzzle(&config).unwrap_err(), GenError::GenerationExhausted { attempts: 1 });
}

#[test]
fn all_levels_occur() {
    let mut levels = [0usize; 5];
    for i in 0..500 {
        let g = generate_puzzle(&GenConfig { seed: batch_seed(2024, i), ..GenConfig::default() }).unwrap();
        levels[usize::from(g.level) - 1] += 1;
    }
    assert!(levels.iter().all(|&n| n > 0), "{levels:?}");
}

fn features_strategy() -> impl Strategy<Value = DifficultyFeatures> {
    (0u32..8, 0u32..60, 0.0f64..2.0, 1u32..37, 0.0f64..80.0).prop_map(|(d, c, r, g, i)| DifficultyFeatures {
        distinct_rule_types: d,
        rule_cells: c,
        rule_density: r,
        grid_size: g,
        interaction_estimate: i,
    })
}

proptest! {
    #[test]
    fn score_is_bounded_and_monotone(f in features_strategy(), bump in 1u32..10, fbump in 0.01f64..5.0) {
        let m = DifficultyModel::default();
        let s = difficulty_score(&f, &m);
        prop_assert!((1.0..=5.0).contains(&s));
        let level = difficulty_level(s);
        prop_assert!((1..=5).contains(&level));
        prop_assert!(f64::from(level) >= s && f64::from(level) - s < 1.0 || (level == 1 && s == 1.0));
        let bumps = [
            DifficultyFeatures { distinct_rule_types: f.distinct_rule_types + bump, ..f },
            DifficultyFeatures { rule_cells: f.rule_cells + bump, ..f },
            DifficultyFeatures { rule_density: f.rule_density + fbump, ..f },
            DifficultyFeatures { grid_size: f.grid_size + bump, ..f },
            DifficultyFeatures { interaction_estimate: f.interaction_estimate + fbump, ..f },
        ];
        for g in bumps {
            prop_assert!(difficulty_score(&g, &m) >= s);
        }
    }
}
