//! In-memory puzzle catalog loaded from a directory of documents.

use std::collections::BTreeMap;
use std::path::{Path as FsPath, PathBuf};
use std::sync::{Arc, OnceLock};

use spatial_gym_core::difficulty::difficulty_level;
use spatial_gym_core::metrics::PuzzleSummary;
use spatial_gym_core::{enumerate_solutions_with, Pruning, Puzzle, SearchBudget, SolutionSet};

use crate::clock::InstantClock;
use crate::document::{read_puzzle, DocumentError};

struct Entry {
    puzzle: Arc<Puzzle>,
    source: Option<PathBuf>,
    solutions: OnceLock<Arc<SolutionSet>>,
}

#[derive(Default)]
pub struct Catalog {
    entries: BTreeMap<String, Entry>,
}

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("{path}: {source}")]
    Document { path: String, source: DocumentError },
    #[error("duplicate puzzle id {id} ({first} and {second})")]
    Duplicate { id: String, first: String, second: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn is_puzzle_file(path: &FsPath) -> bool {
    let ext = path.extension().and_then(|e| e.to_str());
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    matches!(ext, Some("puz") | Some("json")) && name != "manifest.json"
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads one document, or every `*.puz` / `*.json` file (except
    /// `manifest.json`) in a directory, in file-name order.
    pub fn load(path: &FsPath) -> Result<Catalog, CatalogError> {
        let io = |source| CatalogError::Io { path: path.display().to_string(), source };
        let files: Vec<PathBuf> = if path.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(path)
                .map_err(io)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && is_puzzle_file(p))
                .collect();
            files.sort();
            files
        } else {
            vec![path.to_path_buf()]
        };
        let mut catalog = Catalog::new();
        for file in files {
            let puzzle = read_puzzle(&file)
                .map_err(|source| CatalogError::Document { path: file.display().to_string(), source })?;
            catalog.insert_from(puzzle, Some(file))?;
        }
        Ok(catalog)
    }

    pub fn insert(&mut self, puzzle: Puzzle) -> Result<(), CatalogError> {
        self.insert_from(puzzle, None)
    }

    fn insert_from(&mut self, puzzle: Puzzle, source: Option<PathBuf>) -> Result<(), CatalogError> {
        let id = puzzle.id().to_string();
        if let Some(existing) = self.entries.get(&id) {
            let show = |p: &Option<PathBuf>| p.as_ref().map_or("<memory>".to_string(), |p| p.display().to_string());
            return Err(CatalogError::Duplicate { id, first: show(&existing.source), second: show(&source) });
        }
        self.entries.insert(id, Entry { puzzle: Arc::new(puzzle), source, solutions: OnceLock::new() });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<Arc<Puzzle>> {
        self.entries.get(id).map(|e| e.puzzle.clone())
    }

    /// Puzzles in id order.
    pub fn puzzles(&self) -> impl Iterator<Item = &Arc<Puzzle>> {
        self.entries.values().map(|e| &e.puzzle)
    }

    pub fn at_level(&self, level: u8) -> Vec<Arc<Puzzle>> {
        self.puzzles()
            .filter(|p| p.difficulty_score().map(difficulty_level) == Some(level))
            .cloned()
            .collect()
    }

    /// Solution set for a puzzle, enumerated once and cached.
    pub fn solutions(&self, id: &str, budget: SearchBudget) -> Option<Arc<SolutionSet>> {
        let entry = self.entries.get(id)?;
        let set = entry.solutions.get_or_init(|| {
            Arc::new(enumerate_solutions_with(&entry.puzzle, budget, Pruning::ALL, &InstantClock::new()))
        });
        Some(set.clone())
    }

    /// Seeds the cache with a known solution set (e.g. from the generator).
    pub fn set_solutions(&self, id: &str, set: SolutionSet) {
        if let Some(entry) = self.entries.get(id) {
            let _ = entry.solutions.set(Arc::new(set));
        }
    }

    pub fn summaries(&self) -> BTreeMap<String, PuzzleSummary> {
        self.puzzles().map(|p| (p.id().to_string(), PuzzleSummary::of(p))).collect()
    }
}
