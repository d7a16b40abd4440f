//! Region decomposition of the rule-cell lattice and edge-touch counts.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{Position, Puzzle};
use crate::path::Path;

/// Lattice coordinate of a rule cell; maps to symbol position `(2i+1, 2j+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CellCoord {
    pub i: usize,
    pub j: usize,
}

impl CellCoord {
    pub const fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }

    pub fn position(self) -> Position {
        Position::new(2 * self.i + 1, 2 * self.j + 1)
    }

    /// Inverse of [`CellCoord::position`] for odd/odd positions.
    pub fn from_position(p: Position) -> Option<Self> {
        (p.x % 2 == 1 && p.y % 2 == 1).then(|| CellCoord::new(p.x / 2, p.y / 2))
    }

    /// The four edge positions around the cell: left, right, top, bottom.
    pub fn edges(self) -> [Position; 4] {
        let Position { x, y } = self.position();
        [
            Position::new(x - 1, y),
            Position::new(x + 1, y),
            Position::new(x, y - 1),
            Position::new(x, y + 1),
        ]
    }
}

/// Connected components of the cell lattice, where neighbouring cells are
/// joined unless the edge position between them is on the path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionPartition {
    cols: usize,
    labels: Vec<usize>,
    regions: Vec<Vec<CellCoord>>,
}

impl RegionPartition {
    pub fn region_of(&self, cell: CellCoord) -> usize {
        self.labels[cell.j * self.cols + cell.i]
    }

    /// Regions in label order; each region lists its cells row-major.
    pub fn regions(&self) -> &[Vec<CellCoord>] {
        &self.regions
    }

    pub fn region(&self, label: usize) -> &[CellCoord] {
        &self.regions[label]
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }
}

pub fn compute_regions(puzzle: &Puzzle, path: &Path) -> RegionPartition {
    let (cols, rows) = (puzzle.cell_cols(), puzzle.cell_rows());
    let mut on_path = vec![false; puzzle.width() * puzzle.height()];
    for p in path.positions() {
        on_path[p.y * puzzle.width() + p.x] = true;
    }
    let blocked = |p: Position| on_path[p.y * puzzle.width() + p.x];

    const UNSET: usize = usize::MAX;
    let mut labels = vec![UNSET; cols * rows];
    let mut regions = Vec::new();
    let mut stack = Vec::new();
    for seed in 0..cols * rows {
        if labels[seed] != UNSET {
            continue;
        }
        let label = regions.len();
        let mut members = Vec::new();
        labels[seed] = label;
        stack.push(seed);
        while let Some(idx) = stack.pop() {
            let cell = CellCoord::new(idx % cols, idx / cols);
            members.push(cell);
            let [left, right, top, bottom] = cell.edges();
            let mut visit = |n: usize, edge: Position| {
                if labels[n] == UNSET && !blocked(edge) {
                    labels[n] = label;
                    stack.push(n);
                }
            };
            if cell.i > 0 {
                visit(idx - 1, left);
            }
            if cell.i + 1 < cols {
                visit(idx + 1, right);
            }
            if cell.j > 0 {
                visit(idx - cols, top);
            }
            if cell.j + 1 < rows {
                visit(idx + cols, bottom);
            }
        }
        members.sort_by_key(|c| (c.j, c.i));
        regions.push(members);
    }
    RegionPartition { cols, labels, regions }
}

/// Number of the cell's four edge positions that lie on the path.
pub fn edge_touch_count(path: &Path, cell: CellCoord) -> usize {
    cell.edges().iter().filter(|&&e| path.contains(e)).count()
}
