//! Shortest navigation path from Start to End, ignoring every rule.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use crate::grid::Puzzle;
use crate::path::Path;
use crate::search::Board;

/// A* over passable positions with the Manhattan heuristic.
///
/// Open entries are ordered by `(f, action digit, insertion order)`; a
/// position is queued again only when its cost strictly improves. Returns
/// `None` iff End is unreachable.
pub fn astar_path(puzzle: &Puzzle) -> Option<Path> {
    let board = Board::new(puzzle);
    let goal = puzzle.end();
    let h = |i: usize| board.position(i).manhattan(goal);
    let n = board.neighbors.len();

    let mut g = vec![usize::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;

    g[board.start] = 0;
    open.push(Reverse((h(board.start), 0u8, seq, board.start)));
    while let Some(Reverse((_, _, _, at))) = open.pop() {
        if closed[at] {
            continue;
        }
        closed[at] = true;
        if at == board.end {
            let mut rev = vec![at];
            let mut cur = at;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                rev.push(cur);
            }
            rev.reverse();
            let positions: Vec<_> = rev.into_iter().map(|i| board.position(i)).collect();
            return Some(Path::from_trusted(positions));
        }
        for (digit, next) in board.neighbors[at].into_iter().enumerate() {
            if next == usize::MAX || closed[next] {
                continue;
            }
            let cost = g[at] + 1;
            if cost < g[next] {
                g[next] = cost;
                parent[next] = at;
                seq += 1;
                open.push(Reverse((cost + h(next), digit as u8, seq, next)));
            }
        }
    }
    None
}
