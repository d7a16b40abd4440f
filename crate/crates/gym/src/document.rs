//! Canonical puzzle documents and the other JSON shapes emitted by the tools.

use std::collections::BTreeMap;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use spatial_gym_core::difficulty::{difficulty_level, DifficultyModel};
use spatial_gym_core::{Polyshape, Position, Puzzle, PuzzleError, ShapeId, SolutionSet, Verdict};

pub const SCHEMA_VERSION: u32 = 1;

/// On-disk puzzle: grid tokens plus the shape catalog. Shape arrays are
/// stored trimmed, `1` marking an occupied cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PuzzleDocument {
    pub version: u32,
    pub puzzle_id: String,
    pub cell_cols: usize,
    pub cell_rows: usize,
    pub grid: Vec<Vec<String>>,
    pub start: Position,
    pub end: Position,
    pub shapes: BTreeMap<ShapeId, Vec<Vec<u8>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty_score: Option<f64>,
    /// Weights and ranges the score was computed with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty_model: Option<DifficultyModel>,
}

#[derive(Debug, thiserror::Error)]
pub enum DocumentError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Puzzle(#[from] PuzzleError),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl DocumentError {
    /// Stable machine-readable kind.
    pub fn kind(&self) -> &'static str {
        match self {
            DocumentError::Schema(_) => "schema",
            DocumentError::Io { .. } => "io",
            DocumentError::Puzzle(e) => match e {
                PuzzleError::GridShape(_) => "grid_shape",
                PuzzleError::Token { .. } => "token",
                PuzzleError::SymbolPlacement { .. } => "symbol_placement",
                PuzzleError::MissingShape(_) => "missing_shape",
                PuzzleError::EmptyShape(_) => "empty_shape",
                PuzzleError::Endpoint(_) => "endpoint",
            },
        }
    }
}

impl PuzzleDocument {
    pub fn from_puzzle(puzzle: &Puzzle, model: Option<&DifficultyModel>) -> PuzzleDocument {
        PuzzleDocument {
            version: SCHEMA_VERSION,
            puzzle_id: puzzle.id().to_string(),
            cell_cols: puzzle.cell_cols(),
            cell_rows: puzzle.cell_rows(),
            grid: puzzle.token_rows(),
            start: puzzle.start(),
            end: puzzle.end(),
            shapes: puzzle.shapes().iter().map(|(id, s)| (*id, s.to_rows())).collect(),
            difficulty_score: puzzle.difficulty_score(),
            difficulty_model: model.copied(),
        }
    }

    pub fn to_puzzle(&self) -> Result<Puzzle, DocumentError> {
        if self.version != SCHEMA_VERSION {
            return Err(DocumentError::Schema(format!("unsupported version {}", self.version)));
        }
        let mut shapes = BTreeMap::new();
        for (id, rows) in &self.shapes {
            let shape = Polyshape::from_rows(rows).ok_or(PuzzleError::EmptyShape(*id))?;
            shapes.insert(*id, shape);
        }
        let puzzle = Puzzle::from_tokens(self.puzzle_id.clone(), &self.grid, shapes, self.difficulty_score)?;
        if (puzzle.cell_cols(), puzzle.cell_rows()) != (self.cell_cols, self.cell_rows) {
            return Err(PuzzleError::GridShape(format!(
                "declared {}x{} cells but grid holds {}x{}",
                self.cell_cols,
                self.cell_rows,
                puzzle.cell_cols(),
                puzzle.cell_rows()
            ))
            .into());
        }
        if puzzle.start() != self.start || puzzle.end() != self.end {
            return Err(PuzzleError::Endpoint(format!(
                "declared start {} / end {} disagree with grid S {} / E {}",
                self.start,
                self.end,
                puzzle.start(),
                puzzle.end()
            ))
            .into());
        }
        Ok(puzzle)
    }
}

pub fn parse_puzzle(text: &str) -> Result<Puzzle, DocumentError> {
    let doc: PuzzleDocument = serde_json::from_str(text).map_err(|e| DocumentError::Schema(e.to_string()))?;
    doc.to_puzzle()
}

pub fn serialize_puzzle(puzzle: &Puzzle, model: Option<&DifficultyModel>) -> String {
    let mut text = serde_json::to_string_pretty(&PuzzleDocument::from_puzzle(puzzle, model)).expect("serialisable");
    text.push('\n');
    text
}

pub fn read_puzzle(path: &FsPath) -> Result<Puzzle, DocumentError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| DocumentError::Io { path: path.display().to_string(), source })?;
    parse_puzzle(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub puzzle_id: String,
    pub n_solutions: usize,
    pub exhausted: bool,
    pub elapsed_ms: u64,
    pub cap: usize,
    pub nodes: u64,
    /// Canonical `(x,y)->(x,y)` serialisation, in enumeration order.
    pub solutions: Vec<String>,
}

impl SolverReport {
    pub fn new(puzzle: &Puzzle, set: &SolutionSet) -> SolverReport {
        SolverReport {
            puzzle_id: puzzle.id().to_string(),
            n_solutions: set.len(),
            exhausted: set.exhausted,
            elapsed_ms: set.elapsed.as_millis() as u64,
            cap: set.cap,
            nodes: set.nodes,
            solutions: set.solutions.iter().map(|p| p.to_canonical_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub puzzle_id: String,
    pub path: String,
    #[serde(flatten)]
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub puzzle_id: String,
    pub file: String,
    pub difficulty_score: Option<f64>,
    pub level: Option<u8>,
    pub n_solutions: usize,
    pub exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    /// Generator seed; absent for imported sets.
    pub seed: Option<u64>,
    pub puzzles: Vec<ManifestEntry>,
}

/// Listing row for catalog endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PuzzleInfo {
    pub puzzle_id: String,
    pub cell_cols: usize,
    pub cell_rows: usize,
    pub difficulty_score: Option<f64>,
    pub level: Option<u8>,
    pub rules: Vec<spatial_gym_core::Rule>,
}

impl PuzzleInfo {
    pub fn of(puzzle: &Puzzle) -> PuzzleInfo {
        let summary = spatial_gym_core::metrics::PuzzleSummary::of(puzzle);
        PuzzleInfo {
            puzzle_id: puzzle.id().to_string(),
            cell_cols: puzzle.cell_cols(),
            cell_rows: puzzle.cell_rows(),
            difficulty_score: puzzle.difficulty_score(),
            level: puzzle.difficulty_score().map(difficulty_level),
            rules: summary.rules,
        }
    }
}
