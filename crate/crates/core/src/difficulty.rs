//! Difficulty features, score and level.

use crate::grid::{Puzzle, Symbol};
use crate::region::CellCoord;
use crate::verify::Rule;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DifficultyFeatures {
    pub distinct_rule_types: u32,
    /// Rule cells plus dots and gaps.
    pub rule_cells: u32,
    /// `rule_cells / (C * R)`.
    pub rule_density: f64,
    /// `C * R`.
    pub grid_size: u32,
    pub interaction_estimate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DifficultyWeights {
    pub distinct_rule_types: f64,
    pub rule_cells: f64,
    pub rule_density: f64,
    pub grid_size: f64,
    pub interaction_estimate: f64,
}

impl Default for DifficultyWeights {
    fn default() -> Self {
        Self {
            distinct_rule_types: 0.25,
            rule_cells: 0.20,
            rule_density: 0.15,
            grid_size: 0.15,
            interaction_estimate: 0.25,
        }
    }
}

/// Inclusive `(min, max)` per feature used for min-max normalisation. The
/// defaults are the 20th and 85th percentiles over default-config output.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureRanges {
    pub distinct_rule_types: (f64, f64),
    pub rule_cells: (f64, f64),
    pub rule_density: (f64, f64),
    pub grid_size: (f64, f64),
    pub interaction_estimate: (f64, f64),
}

impl Default for FeatureRanges {
    fn default() -> Self {
        Self {
            distinct_rule_types: (2.0, 5.0),
            rule_cells: (4.0, 14.0),
            rule_density: (0.5, 0.75),
            grid_size: (8.0, 20.0),
            interaction_estimate: (2.0, 14.0),
        }
    }
}

/// Frozen weights and ranges; recorded alongside generated puzzles.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DifficultyModel {
    pub weights: DifficultyWeights,
    pub ranges: FeatureRanges,
}

pub fn features(puzzle: &Puzzle) -> DifficultyFeatures {
    let mut seen = [false; 8];
    let mut rule_cells = 0u32;
    for (_, symbol) in puzzle.symbols() {
        if let Some(rule) = Rule::of_symbol(symbol) {
            seen[rule as usize] = true;
            rule_cells += 1;
        }
    }
    let grid_size = (puzzle.cell_cols() * puzzle.cell_rows()) as u32;
    DifficultyFeatures {
        distinct_rule_types: seen.iter().filter(|&&s| s).count() as u32,
        rule_cells,
        rule_density: f64::from(rule_cells) / f64::from(grid_size),
        grid_size,
        interaction_estimate: interaction_estimate(puzzle),
    }
}

/// Sum over unordered pairs of lattice rule cells of `1 / (1 + d)`, with `d`
/// the lattice Manhattan distance.
pub fn interaction_estimate(puzzle: &Puzzle) -> f64 {
    let cells: alloc::vec::Vec<CellCoord> = puzzle
        .symbols()
        .filter(|(_, s)| s.is_cell_symbol() && *s != Symbol::EmptyCell)
        .filter_map(|(p, _)| CellCoord::from_position(p))
        .collect();
    let mut total = 0.0;
    for (k, a) in cells.iter().enumerate() {
        for b in &cells[k + 1..] {
            let d = a.i.abs_diff(b.i) + a.j.abs_diff(b.j);
            total += 1.0 / (1.0 + d as f64);
        }
    }
    total
}

fn clamp01(v: f64) -> f64 {
    if v.is_nan() || v < 0.0 {
        0.0
    } else if v > 1.0 {
        1.0
    } else {
        v
    }
}

fn normalise(value: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi <= lo {
        return if value > lo { 1.0 } else { 0.0 };
    }
    clamp01((value - lo) / (hi - lo))
}

/// `1 + 4 * clamp01(sum of weight * normalised feature)`, in `[1, 5]`.
pub fn difficulty_score(f: &DifficultyFeatures, model: &DifficultyModel) -> f64 {
    let (w, r) = (&model.weights, &model.ranges);
    let sum = w.distinct_rule_types * normalise(f64::from(f.distinct_rule_types), r.distinct_rule_types)
        + w.rule_cells * normalise(f64::from(f.rule_cells), r.rule_cells)
        + w.rule_density * normalise(f.rule_density, r.rule_density)
        + w.grid_size * normalise(f64::from(f.grid_size), r.grid_size)
        + w.interaction_estimate * normalise(f.interaction_estimate, r.interaction_estimate);
    1.0 + 4.0 * clamp01(sum)
}

/// Ceiling of the score, clamped to `1..=5`.
pub fn difficulty_level(score: f64) -> u8 {
    if score.is_nan() || score <= 1.0 {
        return 1;
    }
    if score >= 5.0 {
        return 5;
    }
    let whole = score as u8;
    if f64::from(whole) < score {
        whole + 1
    } else {
        whole
    }
}
