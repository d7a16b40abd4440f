//! Reference implementations used as test oracles. Deliberately naive and
//! independent of the engine internals: only the public grid model is used.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spatial_gym_core::{Color, Polyshape, Position, Puzzle, Symbol};

const STEPS: [(isize, isize); 4] = [(1, 0), (0, -1), (-1, 0), (0, 1)];

pub fn neighbours(puzzle: &Puzzle, p: Position) -> Vec<Position> {
    STEPS
        .iter()
        .filter_map(|&(dx, dy)| {
            let x = p.x as isize + dx;
            let y = p.y as isize + dy;
            if x < 0 || y < 0 {
                return None;
            }
            let q = Position::new(x as usize, y as usize);
            let walkable = match puzzle.symbol(q) {
                Some(Symbol::Gap) | None => false,
                Some(_) => q.x.is_multiple_of(2) || q.y.is_multiple_of(2),
            };
            walkable.then_some(q)
        })
        .collect()
}

/// Every simple path from start that stops on reaching the end.
pub fn all_paths_to_end(puzzle: &Puzzle) -> Vec<Vec<Position>> {
    fn go(puzzle: &Puzzle, path: &mut Vec<Position>, out: &mut Vec<Vec<Position>>) {
        let head = *path.last().unwrap();
        if head == puzzle.end() {
            out.push(path.clone());
            return;
        }
        for n in neighbours(puzzle, head) {
            if !path.contains(&n) {
                path.push(n);
                go(puzzle, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(puzzle, &mut vec![puzzle.start()], &mut out);
    out
}

/// All rule-satisfying paths, found without any pruning.
pub fn naive_solutions(puzzle: &Puzzle) -> Vec<Vec<Position>> {
    all_paths_to_end(puzzle).into_iter().filter(|p| naive_verify(puzzle, p)).collect()
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    parent[x] = r;
    r
}

/// Region label per lattice cell (row-major), labels are union-find roots.
pub fn naive_regions(puzzle: &Puzzle, path: &[Position]) -> Vec<usize> {
    let (c, r) = (puzzle.cell_cols(), puzzle.cell_rows());
    let mut parent: Vec<usize> = (0..c * r).collect();
    for j in 0..r {
        for i in 0..c {
            if i + 1 < c && !path.contains(&Position::new(2 * i + 2, 2 * j + 1)) {
                let (a, b) = (find(&mut parent, j * c + i), find(&mut parent, j * c + i + 1));
                parent[a] = b;
            }
            if j + 1 < r && !path.contains(&Position::new(2 * i + 1, 2 * j + 2)) {
                let (a, b) = (find(&mut parent, j * c + i), find(&mut parent, (j + 1) * c + i));
                parent[a] = b;
            }
        }
    }
    (0..c * r).map(|k| find(&mut parent, k)).collect()
}

fn shape_cells(s: &Polyshape) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for (row, line) in s.to_rows().iter().enumerate() {
        for (col, &bit) in line.iter().enumerate() {
            if bit == 1 {
                v.push((col, row));
            }
        }
    }
    v
}

/// Brute-force exact cover: each piece tried at every offset, in order.
pub fn naive_tiles(region: &[(usize, usize)], pieces: &[Vec<(usize, usize)>]) -> bool {
    fn go(k: usize, pieces: &[Vec<(usize, usize)>], free: &mut Vec<(usize, usize)>) -> bool {
        if k == pieces.len() {
            return free.is_empty();
        }
        let candidates: Vec<(usize, usize)> = free.clone();
        for &(fx, fy) in &candidates {
            for &(px, py) in &pieces[k] {
                if px > fx || py > fy {
                    continue;
                }
                let (ox, oy) = (fx - px, fy - py);
                let cells: Vec<(usize, usize)> = pieces[k].iter().map(|&(x, y)| (ox + x, oy + y)).collect();
                if cells.iter().all(|c| free.contains(c)) {
                    let saved = free.clone();
                    free.retain(|c| !cells.contains(c));
                    if go(k + 1, pieces, free) {
                        return true;
                    }
                    *free = saved;
                }
            }
        }
        false
    }
    let area: usize = pieces.iter().map(|p| p.len()).sum();
    if area != region.len() {
        return false;
    }
    go(0, pieces, &mut region.to_vec())
}

pub fn naive_verify(puzzle: &Puzzle, path: &[Position]) -> bool {
    if path.first() != Some(&puzzle.start()) || path.last() != Some(&puzzle.end()) {
        return false;
    }
    let mut cells = Vec::new();
    for (p, s) in puzzle.symbols() {
        match s {
            Symbol::Dot if !path.contains(&p) => return false,
            Symbol::Gap if path.contains(&p) => return false,
            Symbol::Triangle { count, .. } => {
                let touched = STEPS
                    .iter()
                    .filter(|&&(dx, dy)| {
                        let q = Position::new((p.x as isize + dx) as usize, (p.y as isize + dy) as usize);
                        path.contains(&q)
                    })
                    .count();
                if touched != usize::from(count) {
                    return false;
                }
                cells.push((p, s));
            }
            Symbol::Square(_) | Symbol::Star(_) | Symbol::Poly { .. } | Symbol::Ylop { .. } => cells.push((p, s)),
            _ => {}
        }
    }
    let labels = naive_regions(puzzle, path);
    let cols = puzzle.cell_cols();
    let label = |p: Position| labels[(p.y / 2) * cols + p.x / 2];
    let colour = |s: Symbol| match s {
        Symbol::Square(c) | Symbol::Star(c) => Some(c),
        Symbol::Triangle { color, .. } | Symbol::Poly { color, .. } | Symbol::Ylop { color, .. } => Some(color),
        _ => None,
    };

    let mut groups: BTreeMap<usize, Vec<(Position, Symbol)>> = BTreeMap::new();
    for &(p, s) in &cells {
        groups.entry(label(p)).or_default().push((p, s));
    }
    for (region, members) in &groups {
        let mut square_colours: Vec<Color> = members
            .iter()
            .filter_map(|(_, s)| if let Symbol::Square(c) = s { Some(*c) } else { None })
            .collect();
        square_colours.sort();
        square_colours.dedup();
        if square_colours.len() > 1 {
            return false;
        }
        for &(p, s) in members {
            if let Symbol::Star(c) = s {
                let partners = members.iter().filter(|&&(q, t)| q != p && colour(t) == Some(c)).count();
                if partners != 1 {
                    return false;
                }
            }
        }
        let mut polys: Vec<(Color, Vec<(usize, usize)>)> = members
            .iter()
            .filter_map(|(_, s)| match s {
                Symbol::Poly { color, shape } => Some((*color, shape_cells(puzzle.shape(*shape).unwrap()))),
                _ => None,
            })
            .collect();
        for (_, s) in members {
            if let Symbol::Ylop { color, shape } = s {
                let cells = shape_cells(puzzle.shape(*shape).unwrap());
                match polys.iter().position(|(c, v)| c == color && *v == cells) {
                    Some(k) => {
                        polys.remove(k);
                    }
                    None => return false,
                }
            }
        }
        if !polys.is_empty() {
            let region_cells: Vec<(usize, usize)> = (0..labels.len())
                .filter(|&k| labels[k] == *region)
                .map(|k| (k % cols, k / cols))
                .collect();
            let pieces: Vec<_> = polys.into_iter().map(|(_, v)| v).collect();
            if !naive_tiles(&region_cells, &pieces) {
                return false;
            }
        }
    }
    true
}

/// Breadth-first shortest path length in half-steps, ignoring rules.
pub fn bfs_distance(puzzle: &Puzzle) -> Option<usize> {
    let mut dist: BTreeMap<Position, usize> = BTreeMap::new();
    let mut queue = VecDeque::from([puzzle.start()]);
    dist.insert(puzzle.start(), 0);
    while let Some(p) = queue.pop_front() {
        if p == puzzle.end() {
            return Some(dist[&p]);
        }
        for n in neighbours(puzzle, p) {
            if !dist.contains_key(&n) {
                dist.insert(n, dist[&p] + 1);
                queue.push_back(n);
            }
        }
    }
    None
}

/// Exact probability that a uniform random walk without backtracking
/// reaches End within `limit` actions.
pub fn exact_completion_probability(puzzle: &Puzzle, limit: usize) -> f64 {
    fn go(puzzle: &Puzzle, path: &mut Vec<Position>, steps: usize, limit: usize) -> f64 {
        let head = *path.last().unwrap();
        if head == puzzle.end() {
            return 1.0;
        }
        if steps == limit {
            return 0.0;
        }
        let moves: Vec<Position> = neighbours(puzzle, head).into_iter().filter(|n| !path.contains(n)).collect();
        if moves.is_empty() {
            return 0.0;
        }
        let share = 1.0 / moves.len() as f64;
        moves
            .into_iter()
            .map(|m| {
                path.push(m);
                let p = go(puzzle, path, steps + 1, limit);
                path.pop();
                share * p
            })
            .sum()
    }
    go(puzzle, &mut vec![puzzle.start()], 0, limit)
}

pub fn oracle_shapes() -> BTreeMap<u32, Polyshape> {
    let rows: [&[&[u8]]; 5] = [
        &[&[1]],
        &[&[1, 1]],
        &[&[1], &[1]],
        &[&[1, 1], &[1, 0]],
        &[&[1, 1], &[1, 1]],
    ];
    rows.iter()
        .enumerate()
        .map(|(k, r)| (k as u32, Polyshape::from_rows(r).unwrap()))
        .collect()
}

/// A random small puzzle built token by token; may well be unsolvable.
pub fn random_puzzle(seed: u64, max_cols: usize, max_rows: usize, rule_p: f64) -> Puzzle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = rng.random_range(max_cols.saturating_sub(1).max(1)..=max_cols);
    let rows = rng.random_range(max_rows.saturating_sub(1).max(1)..=max_rows);
    let (w, h) = (2 * cols + 1, 2 * rows + 1);
    let colours = ["R", "B", "Y"];
    let mut grid: Vec<Vec<String>> = vec![vec![String::new(); w]; h];
    for y in 0..h {
        for x in 0..w {
            let c = colours[rng.random_range(0..colours.len())];
            grid[y][x] = if x % 2 == 1 && y % 2 == 1 {
                if rng.random_bool(rule_p) {
                    match rng.random_range(0..5) {
                        0 => format!("o-{c}"),
                        1 => format!("*-{c}"),
                        2 => format!("{}-{c}", ["A", "B", "C", "D"][rng.random_range(0..4)]),
                        3 => format!("P-{c}-{}", rng.random_range(0..5)),
                        _ => format!("Y-{c}-{}", rng.random_range(0..5)),
                    }
                } else {
                    "N".to_string()
                }
            } else {
                match rng.random_range(0..100) {
                    0..=6 => ".".to_string(),
                    7..=9 => "G".to_string(),
                    _ => "+".to_string(),
                }
            };
        }
    }
    let border: Vec<(usize, usize)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| (x % 2 == 0 || y % 2 == 0) && (x == 0 || y == 0 || x == w - 1 || y == h - 1))
        .collect();
    let s = border[rng.random_range(0..border.len())];
    let mut e = s;
    while e == s {
        e = border[rng.random_range(0..border.len())];
    }
    grid[s.1][s.0] = "S".to_string();
    grid[e.1][e.0] = "E".to_string();
    Puzzle::from_tokens(format!("rand-{seed}"), &grid, oracle_shapes(), None).unwrap()
}
