//! System prompts for text-mode agents.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::grid::Puzzle;
use crate::path::Mode;

const STANDARD: &str = include_str!("prompts/standard.txt");
const REVISITING_BACKTRACK: &str = include_str!("prompts/revisiting_backtrack.txt");
const PATH_CONSTRAINTS_BACKTRACK: &str = include_str!("prompts/path_constraints_backtrack.txt");

const REVISITING_STANDARD: &str = "Revisiting: You can not traceback your path. You can not visit a cell\n  twice.";
const PATH_CONSTRAINTS_STANDARD: &str = "1. Path Constraints:\n   \
Path connects adjacent nodes (horizontal/vertical moves only).\n   \
Nodes CAN NOT be revisited. You cannot visit a cell twice.\n   \
Path MUST pass through all Dot cells.\n   \
Path CANNOT pass through any Gap cells.";

/// The puzzle's shape catalog as injected into the prompt: one
/// `Shape {id}: [[..], ..]` line per shape, or `None` without shapes.
pub fn polyshape_catalog(puzzle: &Puzzle) -> String {
    if puzzle.shapes().is_empty() {
        return String::from("None");
    }
    let lines: Vec<String> = puzzle
        .shapes()
        .iter()
        .map(|(id, shape)| {
            let rows: Vec<String> = shape
                .to_rows()
                .iter()
                .map(|row| {
                    let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                    format!("[{}]", cells.join(", "))
                })
                .collect();
            format!("Shape {id}: [{}]", rows.join(", "))
        })
        .collect();
    lines.join("\n")
}

/// Template for `mode` before shape substitution.
pub fn system_prompt_template(mode: Mode) -> String {
    let text = STANDARD.trim_end();
    match mode {
        Mode::NoBacktrack => String::from(text),
        Mode::Backtrack => text
            .replacen(REVISITING_STANDARD, REVISITING_BACKTRACK.trim_end(), 1)
            .replacen(PATH_CONSTRAINTS_STANDARD, PATH_CONSTRAINTS_BACKTRACK.trim_end(), 1),
    }
}

pub fn system_prompt(puzzle: &Puzzle, mode: Mode) -> String {
    system_prompt_template(mode).replacen("{polyshapes}", &polyshape_catalog(puzzle), 1)
}
