//! Random puzzle generation with a density-adjusting solve-and-retry loop.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::difficulty::{difficulty_level, difficulty_score, features, DifficultyFeatures, DifficultyModel};
use crate::grid::{Color, Polyshape, Position, Puzzle, ShapeId, Symbol};
use crate::path::{Action, Path};
use crate::region::{compute_regions, edge_touch_count, CellCoord};
use crate::search::{enumerate_solutions_with, Clock, NoClock, Pruning, SearchBudget, SolutionSet};

/// Relative sampling weights per rule type. Dot and gap weights split the
/// path-position budget; the others split the cell budget.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RuleWeights {
    pub dot: f64,
    pub gap: f64,
    pub square: f64,
    pub star: f64,
    pub triangle: f64,
    pub poly: f64,
    pub ylop: f64,
}

impl Default for RuleWeights {
    fn default() -> Self {
        Self { dot: 1.0, gap: 1.0, square: 1.0, star: 1.0, triangle: 1.0, poly: 1.0, ylop: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GenConfig {
    pub cols_range: (usize, usize),
    pub rows_range: (usize, usize),
    pub initial_density: f64,
    pub density_step: f64,
    /// Emitted puzzles have between 1 and `solution_cap` solutions.
    pub solution_cap: usize,
    pub max_attempts: u32,
    pub rule_weights: RuleWeights,
    pub color_palette: Vec<Color>,
    /// Dots and gaps placed per attempt: `floor(path_rule_fraction * density * C * R)`.
    pub path_rule_fraction: f64,
    /// Largest polyomino placed, in cells.
    pub max_shape_area: usize,
    /// Probability that a placed rule is chosen to hold on a hidden random
    /// route; the remainder are sampled without regard to any path.
    pub planted_fraction: f64,
    pub seed: u64,
    /// Node and time limits for the per-attempt solve; the solution cap is
    /// always `solution_cap + 1`.
    pub budget: SearchBudget,
    pub difficulty: DifficultyModel,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            cols_range: (2, 6),
            rows_range: (2, 6),
            initial_density: 0.5,
            density_step: 0.05,
            solution_cap: 50,
            max_attempts: 200,
            rule_weights: RuleWeights::default(),
            color_palette: Vec::from([Color::Red, Color::Blue, Color::Yellow, Color::Black]),
            path_rule_fraction: 0.3,
            max_shape_area: 4,
            planted_fraction: 0.9,
            seed: 0,
            budget: SearchBudget { max_nodes: 2_000_000, ..SearchBudget::default() },
            difficulty: DifficultyModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("no acceptable puzzle after {attempts} attempts")]
    GenerationExhausted { attempts: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AttemptOutcome {
    /// Exhaustive search found nothing; density decreases.
    NoSolution,
    /// More than the cap, or the search budget tripped; density increases.
    TooMany { found: usize, exhausted: bool },
    Accepted { solutions: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AttemptRecord {
    pub attempt: u32,
    pub cols: usize,
    pub rows: usize,
    pub density: f64,
    pub outcome: AttemptOutcome,
}

#[derive(Debug, Clone)]
pub struct GeneratedPuzzle {
    pub puzzle: Puzzle,
    pub solutions: SolutionSet,
    pub features: DifficultyFeatures,
    pub score: f64,
    pub level: u8,
    pub trace: Vec<AttemptRecord>,
}

/// Seed for the `index`-th puzzle of a batch.
pub fn batch_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn generate_puzzle(config: &GenConfig) -> Result<GeneratedPuzzle, GenError> {
    generate_puzzle_with(config, &NoClock)
}

pub fn generate_puzzle_with(config: &GenConfig, clock: &dyn Clock) -> Result<GeneratedPuzzle, GenError> {
    validate(config)?;
    let budget = SearchBudget { max_solutions: config.solution_cap + 1, ..config.budget };
    let mut density = config.initial_density;
    let mut trace = Vec::new();
    for attempt in 0..config.max_attempts {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(u64::from(attempt));
        let puzzle = sample_puzzle(config, density, &mut rng);
        let solutions = enumerate_solutions_with(&puzzle, budget, Pruning::ALL, clock);
        let n = solutions.len();
        let outcome = if n == 0 && solutions.exhausted {
            AttemptOutcome::NoSolution
        } else if n > config.solution_cap || !solutions.exhausted {
            AttemptOutcome::TooMany { found: n, exhausted: solutions.exhausted }
        } else {
            AttemptOutcome::Accepted { solutions: n }
        };
        trace.push(AttemptRecord {
            attempt,
            cols: puzzle.cell_cols(),
            rows: puzzle.cell_rows(),
            density,
            outcome,
        });
        match outcome {
            AttemptOutcome::NoSolution => density = (density - config.density_step).max(0.0),
            AttemptOutcome::TooMany { .. } => density = (density + config.density_step).min(1.0),
            AttemptOutcome::Accepted { .. } => {
                let features = features(&puzzle);
                let score = difficulty_score(&features, &config.difficulty);
                return Ok(GeneratedPuzzle {
                    puzzle: puzzle.with_difficulty_score(Some(score)),
                    solutions,
                    features,
                    score,
                    level: difficulty_level(score),
                    trace,
                });
            }
        }
    }
    Err(GenError::GenerationExhausted { attempts: config.max_attempts })
}

#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn validate(c: &GenConfig) -> Result<(), GenError> {
    let bad = |m: &str| Err(GenError::InvalidConfig(String::from(m)));
    for (lo, hi) in [c.cols_range, c.rows_range] {
        if lo < 1 || lo > hi || hi > crate::grid::MAX_CELLS_PER_SIDE {
            return bad("cell ranges must satisfy 1 <= min <= max <= 6");
        }
    }
    // Negated comparisons also reject NaN.
    if !(c.initial_density > 0.0 && c.initial_density <= 1.0) {
        return bad("initial density must lie in (0, 1]");
    }
    if !(c.density_step > 0.0) {
        return bad("density step must be positive");
    }
    if c.solution_cap < 1 {
        return bad("solution cap must be at least 1");
    }
    if c.color_palette.is_empty() {
        return bad("colour palette is empty");
    }
    if !(0.0..=1.0).contains(&c.planted_fraction) {
        return bad("planted fraction must lie in [0, 1]");
    }
    if c.max_shape_area < 1 {
        return bad("max shape area must be at least 1");
    }
    let w = &c.rule_weights;
    let all = [w.dot, w.gap, w.square, w.star, w.triangle, w.poly, w.ylop];
    if all.iter().any(|v| !(*v >= 0.0)) || all.iter().all(|v| *v == 0.0) {
        return bad("rule weights must be non-negative with at least one positive");
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum CellKind {
    Square,
    Star,
    Triangle,
    Poly,
    Ylop,
}

fn pick_weighted<T: Copy>(rng: &mut ChaCha8Rng, options: &[(T, f64)]) -> Option<T> {
    let total: f64 = options.iter().map(|(_, w)| w).sum();
    if total <= 0.0 {
        return None;
    }
    let mut x = rng.random::<f64>() * total;
    for &(item, w) in options {
        if x < w {
            return Some(item);
        }
        x -= w;
    }
    options.iter().rev().find(|(_, w)| *w > 0.0).map(|(t, _)| *t)
}

fn random_shape(rng: &mut ChaCha8Rng, max_area: usize) -> Polyshape {
    let area = rng.random_range(1..=max_area);
    let mut cells: Vec<(i32, i32)> = Vec::from([(0, 0)]);
    while cells.len() < area {
        let (x, y) = cells[rng.random_range(0..cells.len())];
        let (dx, dy) = [(1, 0), (-1, 0), (0, 1), (0, -1)][rng.random_range(0..4)];
        let next = (x + dx, y + dy);
        if !cells.contains(&next) {
            cells.push(next);
        }
    }
    let min_x = cells.iter().map(|c| c.0).min().unwrap_or(0);
    let min_y = cells.iter().map(|c| c.1).min().unwrap_or(0);
    let cells = cells
        .into_iter()
        .map(|(x, y)| ((x - min_x) as usize, (y - min_y) as usize))
        .collect();
    Polyshape::from_cells(cells).expect("non-empty connected shape")
}

/// Cell-rule placement state for one attempt.
struct Builder<'a> {
    config: &'a GenConfig,
    cols: usize,
    grid: Vec<Vec<Symbol>>,
    shapes: BTreeMap<ShapeId, Polyshape>,
    polys: Vec<(Color, ShapeId)>,
    taken: Vec<bool>,
    budget: usize,
}

impl Builder<'_> {
    fn color(&self, rng: &mut ChaCha8Rng) -> Color {
        let palette = &self.config.color_palette;
        palette[rng.random_range(0..palette.len())]
    }

    fn color_except(&self, avoid: Color, rng: &mut ChaCha8Rng) -> Color {
        let others: Vec<Color> = self.config.color_palette.iter().copied().filter(|&c| c != avoid).collect();
        if others.is_empty() {
            avoid
        } else {
            others[rng.random_range(0..others.len())]
        }
    }

    fn intern(&mut self, shape: Polyshape) -> ShapeId {
        if let Some((&id, _)) = self.shapes.iter().find(|(_, s)| **s == shape) {
            return id;
        }
        let id = self.shapes.len() as ShapeId;
        self.shapes.insert(id, shape);
        id
    }

    fn is_free(&self, c: CellCoord) -> bool {
        !self.taken[c.j * self.cols + c.i]
    }

    fn put(&mut self, c: CellCoord, symbol: Symbol) {
        self.grid[2 * c.j + 1][2 * c.i + 1] = symbol;
        self.taken[c.j * self.cols + c.i] = true;
        self.budget = self.budget.saturating_sub(1);
        if let Symbol::Poly { color, shape } = symbol {
            self.polys.push((color, shape));
        }
    }

    /// Free cells of `region` other than `except`, shuffled.
    fn free_cells(&self, region: &[CellCoord], except: CellCoord, rng: &mut ChaCha8Rng) -> Vec<CellCoord> {
        let mut free: Vec<CellCoord> = region.iter().copied().filter(|&c| c != except && self.is_free(c)).collect();
        free.shuffle(rng);
        free
    }

    fn place_random(&mut self, cell: CellCoord, kind: CellKind, rng: &mut ChaCha8Rng) {
        let max_area = self.config.max_shape_area;
        let symbol = match kind {
            CellKind::Square => Symbol::Square(self.color(rng)),
            CellKind::Star => Symbol::Star(self.color(rng)),
            CellKind::Triangle => Symbol::Triangle { count: rng.random_range(1..=4), color: self.color(rng) },
            CellKind::Poly => {
                let shape = self.intern(random_shape(rng, max_area));
                Symbol::Poly { color: self.color(rng), shape }
            }
            CellKind::Ylop => {
                if !self.polys.is_empty() && rng.random_bool(0.5) {
                    let (color, shape) = self.polys[rng.random_range(0..self.polys.len())];
                    Symbol::Ylop { color, shape }
                } else {
                    let shape = self.intern(random_shape(rng, max_area));
                    Symbol::Ylop { color: self.color(rng), shape }
                }
            }
        };
        self.put(cell, symbol);
    }
}

/// A random simple route from start to end: the tree path of a randomised
/// depth-first search that never expands past the end.
fn random_route(puzzle: &Puzzle, rng: &mut ChaCha8Rng) -> Path {
    let (w, h) = (puzzle.width(), puzzle.height());
    let idx = |p: Position| p.y * w + p.x;
    let mut parent: Vec<Option<Position>> = alloc::vec![None; w * h];
    let mut seen = alloc::vec![false; w * h];
    let mut stack = Vec::from([(puzzle.start(), puzzle.start())]);
    while let Some((at, from)) = stack.pop() {
        if seen[idx(at)] {
            continue;
        }
        seen[idx(at)] = true;
        parent[idx(at)] = Some(from);
        if at == puzzle.end() {
            break;
        }
        let mut next: Vec<Position> = Action::ALL
            .iter()
            .filter_map(|a| a.apply(at))
            .filter(|&p| puzzle.is_passable(p) && !seen[idx(p)])
            .collect();
        next.shuffle(rng);
        stack.extend(next.into_iter().map(|p| (p, at)));
    }
    let mut positions = Vec::from([puzzle.end()]);
    let mut at = puzzle.end();
    while at != puzzle.start() {
        at = parent[idx(at)].expect("end reachable on an open board");
        positions.push(at);
    }
    positions.reverse();
    Path::new(puzzle, positions).expect("search tree path is simple")
}

/// Splits a region into random connected pieces of at most `max_area` cells.
fn carve(region: &[CellCoord], max_area: usize, rng: &mut ChaCha8Rng) -> Vec<Polyshape> {
    let mut left: Vec<CellCoord> = region.to_vec();
    let mut pieces = Vec::new();
    while !left.is_empty() {
        let seed = left.swap_remove(rng.random_range(0..left.len()));
        let target = rng.random_range(1..=max_area);
        let mut piece = Vec::from([seed]);
        while piece.len() < target {
            let frontier: Vec<usize> = (0..left.len())
                .filter(|&k| piece.iter().any(|p| p.i.abs_diff(left[k].i) + p.j.abs_diff(left[k].j) == 1))
                .collect();
            if frontier.is_empty() {
                break;
            }
            piece.push(left.swap_remove(frontier[rng.random_range(0..frontier.len())]));
        }
        let min_i = piece.iter().map(|c| c.i).min().unwrap_or(0);
        let min_j = piece.iter().map(|c| c.j).min().unwrap_or(0);
        let cells = piece.iter().map(|c| (c.i - min_i, c.j - min_j)).collect();
        pieces.push(Polyshape::from_cells(cells).expect("non-empty piece"));
    }
    pieces
}

fn sample_puzzle(config: &GenConfig, density: f64, rng: &mut ChaCha8Rng) -> Puzzle {
    let id = format!("{:016x}", rng.next_u64());
    let cols = rng.random_range(config.cols_range.0..=config.cols_range.1);
    let rows = rng.random_range(config.rows_range.0..=config.rows_range.1);
    let (width, height) = (2 * cols + 1, 2 * rows + 1);
    let mut grid: Vec<Vec<Symbol>> = (0..height)
        .map(|y| {
            (0..width)
                .map(|x| if x % 2 == 1 && y % 2 == 1 { Symbol::EmptyCell } else { Symbol::Open })
                .collect()
        })
        .collect();

    let mut border: Vec<Position> = (0..height)
        .flat_map(|y| (0..width).map(move |x| Position::new(x, y)))
        .filter(|p| p.class().is_path_class())
        .filter(|p| p.x == 0 || p.y == 0 || p.x == width - 1 || p.y == height - 1)
        .collect();
    let start = border.swap_remove(rng.random_range(0..border.len()));
    let end = border[rng.random_range(0..border.len())];
    grid[start.y][start.x] = Symbol::Start;
    grid[end.y][end.x] = Symbol::End;

    let bare = Puzzle::new(id.clone(), grid.clone(), BTreeMap::new(), None).expect("bare board is valid");
    let reference = random_route(&bare, rng);
    let partition = compute_regions(&bare, &reference);

    let area = cols * rows;
    let w = &config.rule_weights;
    let kinds = [
        (CellKind::Square, w.square),
        (CellKind::Star, w.star),
        (CellKind::Triangle, w.triangle),
        (CellKind::Poly, w.poly),
        (CellKind::Ylop, w.ylop),
    ];
    let mut b = Builder {
        config,
        cols,
        grid,
        shapes: BTreeMap::new(),
        polys: Vec::new(),
        taken: alloc::vec![false; area],
        budget: ((density * area as f64) as usize).min(area),
    };
    let region_color: Vec<Color> = (0..partition.len()).map(|_| b.color(rng)).collect();
    let mut tiled = alloc::vec![false; partition.len()];

    // Consistent rules hold on the reference route; the rest are unconstrained.
    // Ylops go last so unconstrained ones can copy a placed poly.
    let mut plan: Vec<(CellCoord, CellKind, bool)> = Vec::new();
    let mut cells: Vec<CellCoord> = (0..rows).flat_map(|j| (0..cols).map(move |i| CellCoord::new(i, j))).collect();
    cells.shuffle(rng);
    for &cell in cells.iter().take(b.budget) {
        if let Some(kind) = pick_weighted(rng, &kinds) {
            plan.push((cell, kind, rng.random_bool(config.planted_fraction)));
        }
    }
    plan.sort_by_key(|(_, kind, _)| *kind == CellKind::Ylop);

    for (cell, kind, consistent) in plan {
        if b.budget == 0 {
            break;
        }
        if !b.is_free(cell) {
            continue;
        }
        if !consistent {
            b.place_random(cell, kind, rng);
            continue;
        }
        let r = partition.region_of(cell);
        let region = partition.region(r);
        let square = Symbol::Square(region_color[r]);
        match kind {
            CellKind::Square => b.put(cell, square),
            CellKind::Star => match b.free_cells(region, cell, rng).first() {
                Some(&other) => {
                    let c = b.color_except(region_color[r], rng);
                    b.put(cell, Symbol::Star(c));
                    b.put(other, Symbol::Star(c));
                }
                None => b.put(cell, square),
            },
            CellKind::Triangle => match edge_touch_count(&reference, cell) {
                0 => b.put(cell, square),
                k => {
                    let color = b.color(rng);
                    b.put(cell, Symbol::Triangle { count: k as u8, color });
                }
            },
            CellKind::Poly => {
                let pieces = carve(region, config.max_shape_area, rng);
                let mut spots = b.free_cells(region, cell, rng);
                spots.insert(0, cell);
                if tiled[r] || spots.len() < pieces.len() {
                    b.put(cell, square);
                    continue;
                }
                tiled[r] = true;
                for (spot, piece) in spots.into_iter().zip(pieces) {
                    let shape = b.intern(piece);
                    let color = b.color(rng);
                    b.put(spot, Symbol::Poly { color, shape });
                }
            }
            CellKind::Ylop => match b.free_cells(region, cell, rng).first() {
                Some(&other) => {
                    let shape = b.intern(random_shape(rng, config.max_shape_area));
                    let color = b.color(rng);
                    b.put(cell, Symbol::Ylop { color, shape });
                    b.put(other, Symbol::Poly { color, shape });
                }
                None => b.put(cell, square),
            },
        }
    }

    // Dots and gaps on path positions other than the endpoints.
    let n_path = (config.path_rule_fraction * density * area as f64) as usize;
    let mut on_route: Vec<Position> = reference.positions()[1..reference.len() - 1].to_vec();
    let mut off_route: Vec<Position> = bare
        .positions()
        .filter(|&p| bare.is_passable(p) && !reference.contains(p))
        .collect();
    let mut anywhere: Vec<Position> = bare.positions().filter(|&p| bare.is_passable(p) && p != start && p != end).collect();
    on_route.shuffle(rng);
    off_route.shuffle(rng);
    anywhere.shuffle(rng);
    let path_kinds = [(Symbol::Dot, w.dot), (Symbol::Gap, w.gap)];
    let mut grid = b.grid;
    let mut placed = 0;
    while placed < n_path {
        let Some(symbol) = pick_weighted(rng, &path_kinds) else { break };
        let pool = match (rng.random_bool(config.planted_fraction), symbol) {
            (true, Symbol::Dot) => &mut on_route,
            (true, _) => &mut off_route,
            (false, _) => &mut anywhere,
        };
        let spot = loop {
            match pool.pop() {
                Some(p) if grid[p.y][p.x] == Symbol::Open => break Some(p),
                Some(_) => continue,
                None => break None,
            }
        };
        if let Some(p) = spot {
            grid[p.y][p.x] = symbol;
        }
        placed += 1;
    }

    Puzzle::new(id, grid, b.shapes, None).expect("generator builds valid puzzles")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GenConfig {
        GenConfig { cols_range: (2, 3), rows_range: (2, 3), seed: 11, ..GenConfig::default() }
    }

    #[test]
    fn emits_certified_puzzle() {
        let g = generate_puzzle(&small()).unwrap();
        assert!(g.solutions.exhausted);
        assert!((1..=50).contains(&g.solutions.len()));
        assert_eq!(g.level, difficulty_level(g.score));
        assert!(matches!(g.trace.last().unwrap().outcome, AttemptOutcome::Accepted { .. }));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_puzzle(&small()).unwrap();
        let b = generate_puzzle(&small()).unwrap();
        assert_eq!(a.puzzle, b.puzzle);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn rejects_bad_config() {
        let c = GenConfig { cols_range: (0, 3), ..GenConfig::default() };
        assert!(matches!(generate_puzzle(&c), Err(GenError::InvalidConfig(_))));
    }

    #[test]
    fn batch_seeds_differ() {
        assert_ne!(batch_seed(7, 0), batch_seed(7, 1));
        assert_eq!(batch_seed(7, 3), batch_seed(7, 3));
    }
}
