mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use common::oracle::exact_completion_probability;
use spatial_gym_core::generator::batch_seed;
use spatial_gym_core::{random_walk_action, EnvConfig, EnvState, Mode, ProcessReward, Puzzle, Status};

fn completes(puzzle: &Arc<Puzzle>, seed: u64) -> bool {
    let config = EnvConfig { process_reward: ProcessReward::Disabled, ..EnvConfig::default() };
    let (mut env, _) = EnvState::reset(puzzle.clone(), Mode::NoBacktrack, config, None).unwrap();
    let mut step = 0;
    while !env.status().is_terminal() {
        let action = random_walk_action(env.legal(), seed, step).unwrap_or(spatial_gym_core::Action::Right);
        env.step(action).unwrap();
        step += 1;
    }
    matches!(env.status(), Status::Solved | Status::FailedRules)
}

fn check_against_markov(puzzle: Puzzle, episodes: u64) {
    let p = exact_completion_probability(&puzzle, 100);
    let puzzle = Arc::new(puzzle);
    let hits = (0..episodes).filter(|&e| completes(&puzzle, batch_seed(17, e))).count();
    let observed = hits as f64 / episodes as f64;
    let sigma = (p * (1.0 - p) / episodes as f64).sqrt();
    assert!((observed - p).abs() <= 3.0 * sigma, "observed {observed} exact {p} sigma {sigma}");
}

#[test]
fn ring_completion_matches_markov_chain() {
    let ring = Puzzle::from_tokens("ring", &[["S", "+", "+"], ["+", "N", "+"], ["+", "+", "E"]], BTreeMap::new(), None).unwrap();
    check_against_markov(ring, 10_000);
}

#[test]
fn open_board_completion_matches_markov_chain() {
    let board = Puzzle::from_tokens(
        "open",
        &[
            ["+", "+", "S", "+", "+"],
            ["+", "N", "+", "N", "+"],
            ["+", "+", "+", "+", "+"],
            ["+", "N", "+", "N", "+"],
            ["+", "+", "+", "E", "+"],
        ],
        BTreeMap::new(),
        None,
    )
    .unwrap();
    let p = exact_completion_probability(&board, 100);
    assert!(p > 0.2 && p < 0.9, "{p}");
    check_against_markov(board, 10_000);
}
