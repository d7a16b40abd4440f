//! Exhaustive enumeration of rule-satisfying paths.
//!
//! Depth-first over simple paths from the start, children in action-digit
//! order. Partial paths are cut only by necessary conditions: every pruning
//! rule holds for all extensions of the partial path, so the set of emitted
//! solutions does not depend on which rules are enabled.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::time::Duration;

use crate::grid::{Position, Puzzle, Symbol};
use crate::path::{Action, Path};
use crate::region::CellCoord;
use crate::verify::{region_violations, verify};

/// Monotonic time source. `now` is measured from an arbitrary origin.
pub trait Clock {
    fn now(&self) -> Duration;
}

/// A clock that never advances; time budgets never trip.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now(&self) -> Duration {
        Duration::ZERO
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SearchBudget {
    /// Enumeration stops once this many solutions are found. 51 detects "more than 50".
    pub max_solutions: usize,
    pub max_nodes: u64,
    pub max_time: Duration,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            max_solutions: 51,
            max_nodes: 50_000_000,
            max_time: Duration::from_secs(60),
        }
    }
}

/// Which necessary conditions are used to cut partial paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pruning {
    pub end_reachable: bool,
    pub dots_reachable: bool,
    pub triangle_bounds: bool,
    pub sealed_regions: bool,
}

impl Pruning {
    pub const ALL: Pruning = Pruning {
        end_reachable: true,
        dots_reachable: true,
        triangle_bounds: true,
        sealed_regions: true,
    };
    pub const NONE: Pruning = Pruning {
        end_reachable: false,
        dots_reachable: false,
        triangle_bounds: false,
        sealed_regions: false,
    };

    fn any(self) -> bool {
        self.end_reachable || self.dots_reachable || self.triangle_bounds || self.sealed_regions
    }
}

impl Default for Pruning {
    fn default() -> Self {
        Pruning::ALL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSet {
    pub solutions: Vec<Path>,
    /// True iff the whole search tree was explored within budget.
    pub exhausted: bool,
    pub cap: usize,
    pub elapsed: Duration,
    pub nodes: u64,
}

impl SolutionSet {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    /// Whether `path` is a prefix of at least one solution.
    pub fn has_prefix(&self, path: &Path) -> bool {
        self.solutions.iter().any(|s| path.is_prefix_of(s))
    }
}

/// Enumerates solutions with every pruning rule and no time limit.
pub fn enumerate_solutions(puzzle: &Puzzle, budget: SearchBudget) -> SolutionSet {
    enumerate_solutions_with(puzzle, budget, Pruning::ALL, &NoClock)
}

pub fn enumerate_solutions_with(
    puzzle: &Puzzle,
    budget: SearchBudget,
    pruning: Pruning,
    clock: &dyn Clock,
) -> SolutionSet {
    let started = clock.now();
    let board = Board::new(puzzle);
    let mut search = Search {
        puzzle,
        board: &board,
        budget,
        pruning,
        clock,
        started,
        stack: vec![board.start],
        visited: PosSet::default(),
        solutions: Vec::new(),
        nodes: 0,
        region_cache: BTreeMap::new(),
        stopped: false,
    };
    search.visited.insert(board.start);
    if budget.max_solutions > 0 && board.start != board.end && !search.prune() {
        search.descend(board.start);
    }
    let exhausted = !search.stopped && budget.max_solutions > 0;
    SolutionSet {
        exhausted,
        cap: budget.max_solutions,
        elapsed: clock.now().saturating_sub(started),
        nodes: search.nodes,
        solutions: search.solutions,
    }
}

/// Position set over a grid of at most 13 x 13.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct PosSet([u64; 3]);

impl PosSet {
    #[inline]
    pub(crate) fn insert(&mut self, i: usize) {
        self.0[i >> 6] |= 1 << (i & 63);
    }

    #[inline]
    pub(crate) fn remove(&mut self, i: usize) {
        self.0[i >> 6] &= !(1 << (i & 63));
    }

    #[inline]
    pub(crate) fn contains(&self, i: usize) -> bool {
        self.0[i >> 6] & (1 << (i & 63)) != 0
    }
}

const NONE: usize = usize::MAX;

/// Index-based view of a puzzle for the hot search loop.
pub(crate) struct Board {
    width: usize,
    pub(crate) start: usize,
    pub(crate) end: usize,
    /// Passable neighbour per action digit, or `NONE`.
    pub(crate) neighbors: Vec<[usize; 4]>,
    dots: Vec<usize>,
    triangles: Vec<(usize, [usize; 4])>,
    cols: usize,
    cell_count: usize,
    /// Per cell: `(neighbour cell, separating edge position)` or `NONE`.
    cell_links: Vec<[(usize, usize); 4]>,
    /// Cells carrying region-scoped rules.
    region_rule_mask: u64,
}

impl Board {
    pub(crate) fn new(puzzle: &Puzzle) -> Board {
        let width = puzzle.width();
        let idx = |p: Position| p.y * width + p.x;
        let mut neighbors = Vec::with_capacity(width * puzzle.height());
        let mut dots = Vec::new();
        let mut triangles = Vec::new();
        let mut region_rule_mask = 0u64;
        let (cols, rows) = (puzzle.cell_cols(), puzzle.cell_rows());
        assert!(width * puzzle.height() <= 192, "grid too large for the solver");

        for (p, symbol) in puzzle.symbols() {
            let mut n = [NONE; 4];
            if puzzle.is_passable(p) {
                for a in Action::ALL {
                    if let Some(t) = a.apply(p).filter(|&t| puzzle.is_passable(t)) {
                        n[a.digit() as usize] = idx(t);
                    }
                }
            }
            neighbors.push(n);
            match symbol {
                Symbol::Dot => dots.push(idx(p)),
                Symbol::Triangle { count, .. } => {
                    let cell = CellCoord::from_position(p).expect("cell symbol");
                    triangles.push((usize::from(count), cell.edges().map(idx)));
                }
                Symbol::Square(_) | Symbol::Star(_) | Symbol::Poly { .. } | Symbol::Ylop { .. } => {
                    let cell = CellCoord::from_position(p).expect("cell symbol");
                    region_rule_mask |= 1 << (cell.j * cols + cell.i);
                }
                _ => {}
            }
        }

        let mut cell_links = Vec::with_capacity(cols * rows);
        for j in 0..rows {
            for i in 0..cols {
                let [left, right, top, bottom] = CellCoord::new(i, j).edges().map(idx);
                let c = j * cols + i;
                cell_links.push([
                    if i > 0 { (c - 1, left) } else { (NONE, NONE) },
                    if i + 1 < cols { (c + 1, right) } else { (NONE, NONE) },
                    if j > 0 { (c - cols, top) } else { (NONE, NONE) },
                    if j + 1 < rows { (c + cols, bottom) } else { (NONE, NONE) },
                ]);
            }
        }

        Board {
            width,
            start: idx(puzzle.start()),
            end: idx(puzzle.end()),
            neighbors,
            dots,
            triangles,
            cols,
            cell_count: cols * rows,
            cell_links,
            region_rule_mask,
        }
    }

    pub(crate) fn position(&self, i: usize) -> Position {
        Position::new(i % self.width, i / self.width)
    }
}

struct Search<'a> {
    puzzle: &'a Puzzle,
    board: &'a Board,
    budget: SearchBudget,
    pruning: Pruning,
    clock: &'a dyn Clock,
    started: Duration,
    stack: Vec<usize>,
    visited: PosSet,
    solutions: Vec<Path>,
    nodes: u64,
    region_cache: BTreeMap<u64, bool>,
    stopped: bool,
}

impl Search<'_> {
    fn descend(&mut self, head: usize) {
        for next in self.board.neighbors[head] {
            if next == NONE || self.visited.contains(next) {
                continue;
            }
            self.nodes += 1;
            if self.nodes > self.budget.max_nodes
                || (self.nodes & 0x3ff == 0
                    && self.clock.now().saturating_sub(self.started) >= self.budget.max_time)
            {
                self.stopped = true;
                return;
            }
            self.stack.push(next);
            self.visited.insert(next);
            if next == self.board.end {
                self.record_if_solution();
            } else if !self.prune() {
                self.descend(next);
            }
            if self.stopped {
                return;
            }
            self.visited.remove(next);
            self.stack.pop();
        }
    }

    fn record_if_solution(&mut self) {
        let path = Path::from_trusted(self.stack.iter().map(|&i| self.board.position(i)).collect());
        if verify(self.puzzle, &path).satisfied {
            self.solutions.push(path);
            if self.solutions.len() >= self.budget.max_solutions {
                self.stopped = true;
            }
        }
    }

    /// True when no extension of the current partial path can be a solution.
    fn prune(&mut self) -> bool {
        if !self.pruning.any() {
            return false;
        }
        let head = *self.stack.last().expect("non-empty");
        let reach = self.reachable(head);
        let b = self.board;

        if self.pruning.end_reachable && !reach.contains(b.end) {
            return true;
        }
        if self.pruning.dots_reachable
            && b.dots.iter().any(|&d| !self.visited.contains(d) && !reach.contains(d))
        {
            return true;
        }
        if self.pruning.triangle_bounds {
            for &(count, edges) in &b.triangles {
                let touched = edges.iter().filter(|&&e| self.visited.contains(e)).count();
                let open = edges.iter().filter(|&&e| reach.contains(e)).count();
                if touched > count || touched + open < count {
                    return true;
                }
            }
        }
        if self.pruning.sealed_regions && b.region_rule_mask != 0 {
            return self.sealed_region_fails(&reach);
        }
        false
    }

    /// Positions the path could still occupy: flood fill from the head over
    /// unvisited passable positions, not continuing past the end.
    fn reachable(&self, head: usize) -> PosSet {
        let mut seen = PosSet::default();
        let mut queue = [0usize; 192];
        let (mut lo, mut hi) = (0, 0);
        queue[hi] = head;
        hi += 1;
        while lo < hi {
            let at = queue[lo];
            lo += 1;
            if at == self.board.end {
                continue;
            }
            for n in self.board.neighbors[at] {
                if n != NONE && !self.visited.contains(n) && !seen.contains(n) {
                    seen.insert(n);
                    queue[hi] = n;
                    hi += 1;
                }
            }
        }
        seen
    }

    /// Checks region rules on every region the remaining path can no longer split.
    fn sealed_region_fails(&mut self, reach: &PosSet) -> bool {
        let b = self.board;
        let mut label = [u8::MAX; 64];
        let mut masks: Vec<u64> = Vec::new();
        let mut open: Vec<bool> = Vec::new();
        let mut stack = [0usize; 64];
        for seed in 0..b.cell_count {
            if label[seed] != u8::MAX {
                continue;
            }
            let id = masks.len() as u8;
            let mut mask = 0u64;
            let mut is_open = false;
            let mut top = 0;
            stack[top] = seed;
            top += 1;
            label[seed] = id;
            while top > 0 {
                top -= 1;
                let c = stack[top];
                mask |= 1 << c;
                for (n, edge) in b.cell_links[c] {
                    if n == NONE || self.visited.contains(edge) {
                        continue;
                    }
                    if reach.contains(edge) {
                        is_open = true;
                    }
                    if label[n] == u8::MAX {
                        label[n] = id;
                        stack[top] = n;
                        top += 1;
                    }
                }
            }
            masks.push(mask);
            open.push(is_open);
        }
        for (mask, is_open) in masks.into_iter().zip(open) {
            if is_open || mask & b.region_rule_mask == 0 {
                continue;
            }
            if !self.region_ok(mask) {
                return true;
            }
        }
        false
    }

    fn region_ok(&mut self, mask: u64) -> bool {
        if let Some(&ok) = self.region_cache.get(&mask) {
            return ok;
        }
        let cols = self.board.cols;
        let cells: Vec<CellCoord> = (0..self.board.cell_count)
            .filter(|c| mask & (1 << c) != 0)
            .map(|c| CellCoord::new(c % cols, c / cols))
            .collect();
        let mut out = Vec::new();
        region_violations(self.puzzle, &cells, true, &mut out);
        let ok = out.is_empty();
        self.region_cache.insert(mask, ok);
        ok
    }
}
