#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use spatial_gym::document::read_puzzle;
use spatial_gym_core::{Action, Puzzle};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fixture(name: &str) -> Arc<Puzzle> {
    Arc::new(read_puzzle(&fixtures().join(name)).unwrap())
}

pub fn golden(name: &str) -> String {
    let text = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap();
    text.strip_suffix('\n').unwrap_or(&text).to_string()
}

pub const WORKED_ACTIONS: [Action; 5] = [Action::Down, Action::Down, Action::Down, Action::Right, Action::Right];
